//! Occupation-number Fock space over the mode grid.
//!
//! Basis states are occupation vectors `n` over the grid modes with total
//! photon number at most `n_max`; creation into the overfull sector yields
//! zero by the truncation convention. Ladder amplitudes carry `sqrt(w_i)` so
//! the canonical commutation relations close on the discrete weighted inner
//! product `<g, h> = sum_i w_i conj(g_i) h_i` without any per-operation
//! weight bookkeeping.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CVector, OperatorHandle};
use crate::modes::{ModeGrid, PhotonFunction};

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

#[derive(Debug)]
struct FockCore {
    mode_count: usize,
    n_max: usize,
    /// Occupation vectors, graded by total photon number then lexicographic.
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `raise[f][i] = (target, sqrt(n_i + 1))`, `None` past the cutoff.
    raise: Vec<Vec<Option<(usize, f64)>>>,
    /// `lower[f][i] = (target, sqrt(n_i))`, `None` on empty modes.
    lower: Vec<Vec<Option<(usize, f64)>>>,
    total: Vec<u8>,
    hf_diag: Vec<f64>,
    sqrt_weight: Vec<f64>,
}

/// Finite bosonic Fock basis tied to a [`ModeGrid`]. Cheap to clone.
#[derive(Debug, Clone)]
pub struct FockBasis {
    core: Arc<FockCore>,
}

fn enumerate_compositions(modes: usize, total: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, slots: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if slots == 1 {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v as u8);
            rec(prefix, slots - 1, left - v, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::new(), modes, total, out);
}

impl FockBasis {
    pub fn new(grid: &ModeGrid, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::config("photon cutoff n_max must be at least 1"));
        }
        if grid.is_empty() {
            return Err(Error::config("mode grid is empty"));
        }
        let m = grid.len();
        let mut states = Vec::new();
        for total in 0..=n_max {
            enumerate_compositions(m, total, &mut states);
        }
        let mut index = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            index.insert(s.clone(), i);
        }
        let mut raise = Vec::with_capacity(states.len());
        let mut lower = Vec::with_capacity(states.len());
        let mut total = Vec::with_capacity(states.len());
        let mut hf_diag = Vec::with_capacity(states.len());
        for s in &states {
            let tot: usize = s.iter().map(|&n| n as usize).sum();
            total.push(tot as u8);
            let mut energy = 0.0;
            for (i, &n) in s.iter().enumerate() {
                energy += n as f64 * grid.omega(i);
            }
            hf_diag.push(energy);
            let mut r_row = Vec::with_capacity(m);
            let mut l_row = Vec::with_capacity(m);
            let mut scratch = s.clone();
            for i in 0..m {
                if tot < n_max {
                    scratch[i] += 1;
                    let tgt = index[&scratch];
                    r_row.push(Some((tgt, ((s[i] + 1) as f64).sqrt())));
                    scratch[i] -= 1;
                } else {
                    r_row.push(None);
                }
                if s[i] > 0 {
                    scratch[i] -= 1;
                    let tgt = index[&scratch];
                    l_row.push(Some((tgt, (s[i] as f64).sqrt())));
                    scratch[i] += 1;
                } else {
                    l_row.push(None);
                }
            }
            raise.push(r_row);
            lower.push(l_row);
        }
        let sqrt_weight = grid.modes().iter().map(|md| md.weight.sqrt()).collect();
        Ok(FockBasis {
            core: Arc::new(FockCore {
                mode_count: m,
                n_max,
                states,
                index,
                raise,
                lower,
                total,
                hf_diag,
                sqrt_weight,
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.core.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode_count(&self) -> usize {
        self.core.mode_count
    }

    pub fn n_max(&self) -> usize {
        self.core.n_max
    }

    /// Index of the vacuum state (always 0 in the graded ordering).
    pub fn vacuum(&self) -> usize {
        0
    }

    pub fn occupation(&self, f: usize) -> &[u8] {
        &self.core.states[f]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.core.index.get(occupation).copied()
    }

    pub fn total_photons(&self, f: usize) -> usize {
        self.core.total[f] as usize
    }

    /// Free-field energy of a basis state, `sum_i n_i omega(k_i)`.
    pub fn hf_energy(&self, f: usize) -> f64 {
        self.core.hf_diag[f]
    }

    pub(crate) fn raise_entry(&self, f: usize, mode: usize) -> Option<(usize, f64)> {
        self.core.raise[f][mode]
    }

    pub(crate) fn lower_entry(&self, f: usize, mode: usize) -> Option<(usize, f64)> {
        self.core.lower[f][mode]
    }

    /// Basis enumeration as text, for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.core.states.iter().enumerate() {
            write!(out, "{i} [").unwrap();
            for (j, n) in s.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{n}").unwrap();
            }
            writeln!(out, "] total={}", self.core.total[i]).unwrap();
        }
        out
    }

    fn ladder_op(
        &self,
        matter_dim: usize,
        raise_coeff: Vec<Complex64>,
        lower_coeff: Vec<Complex64>,
    ) -> OperatorHandle {
        let core = self.core.clone();
        let dim = matter_dim * self.len();
        let adjoint_raise: Vec<Complex64> = lower_coeff.iter().map(|c| c.conj()).collect();
        let adjoint_lower: Vec<Complex64> = raise_coeff.iter().map(|c| c.conj()).collect();
        let core2 = core.clone();
        OperatorHandle::new(
            dim,
            move |v| apply_ladder(&core, matter_dim, &raise_coeff, &lower_coeff, v),
            move |v| apply_ladder(&core2, matter_dim, &adjoint_raise, &adjoint_lower, v),
        )
    }

    /// Creation operator `a*(h)`: mode `i` raises with amplitude
    /// `h_i sqrt(w_i) sqrt(n_i + 1)`; the top sector is annihilated.
    pub fn create_op(&self, h: &PhotonFunction, matter_dim: usize) -> OperatorHandle {
        let m = self.mode_count();
        assert_eq!(h.len(), m, "photon function does not live on this grid");
        let raise: Vec<Complex64> =
            (0..m).map(|i| h.value(i) * self.core.sqrt_weight[i]).collect();
        self.ladder_op(matter_dim, raise, vec![Complex64::default(); m])
    }

    /// Annihilation operator `a(h)`, the adjoint of [`FockBasis::create_op`].
    pub fn annihilate_op(&self, h: &PhotonFunction, matter_dim: usize) -> OperatorHandle {
        let m = self.mode_count();
        assert_eq!(h.len(), m, "photon function does not live on this grid");
        let lower: Vec<Complex64> =
            (0..m).map(|i| h.value(i).conj() * self.core.sqrt_weight[i]).collect();
        self.ladder_op(matter_dim, vec![Complex64::default(); m], lower)
    }

    /// Pointwise annihilation `a(k_i, lambda_i)`, weight-free, so that
    /// `a(h) = sum_i w_i conj(h_i) a(k_i, lambda_i)`.
    pub fn mode_annihilate_op(&self, mode: usize, matter_dim: usize) -> OperatorHandle {
        let m = self.mode_count();
        let mut lower = vec![Complex64::default(); m];
        lower[mode] = Complex64::new(1.0 / self.core.sqrt_weight[mode], 0.0);
        self.ladder_op(matter_dim, vec![Complex64::default(); m], lower)
    }

    /// Pointwise creation, the formal adjoint of
    /// [`FockBasis::mode_annihilate_op`].
    pub fn mode_create_op(&self, mode: usize, matter_dim: usize) -> OperatorHandle {
        let m = self.mode_count();
        let mut raise = vec![Complex64::default(); m];
        raise[mode] = Complex64::new(1.0 / self.core.sqrt_weight[mode], 0.0);
        self.ladder_op(matter_dim, raise, vec![Complex64::default(); m])
    }

    /// Field operator `phi(h) = (a(h) + a*(h)) / sqrt(2)`.
    pub fn field_op(&self, h: &PhotonFunction, matter_dim: usize) -> OperatorHandle {
        let m = self.mode_count();
        assert_eq!(h.len(), m, "photon function does not live on this grid");
        let s = 1.0 / 2f64.sqrt();
        let raise: Vec<Complex64> =
            (0..m).map(|i| h.value(i) * (self.core.sqrt_weight[i] * s)).collect();
        let lower: Vec<Complex64> =
            (0..m).map(|i| h.value(i).conj() * (self.core.sqrt_weight[i] * s)).collect();
        self.ladder_op(matter_dim, raise, lower)
    }

    /// Free-field energy `H_f`, diagonal in the occupation basis.
    pub fn hf_op(&self, matter_dim: usize) -> OperatorHandle {
        let core = self.core.clone();
        let dim = matter_dim * self.len();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            for f in 0..core.states.len() {
                let e = core.hf_diag[f];
                if e != 0.0 {
                    out.rows_mut(f * matter_dim, matter_dim)
                        .axpy(Complex64::new(e, 0.0), &v.rows(f * matter_dim, matter_dim), Complex64::default());
                }
            }
            out
        })
    }

    /// Total photon number operator, diagonal in the occupation basis.
    pub fn number_op(&self, matter_dim: usize) -> OperatorHandle {
        let core = self.core.clone();
        let dim = matter_dim * self.len();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            for f in 0..core.states.len() {
                let n = core.total[f] as f64;
                if n != 0.0 {
                    out.rows_mut(f * matter_dim, matter_dim)
                        .axpy(Complex64::new(n, 0.0), &v.rows(f * matter_dim, matter_dim), Complex64::default());
                }
            }
            out
        })
    }
}

fn apply_ladder(
    core: &FockCore,
    matter_dim: usize,
    raise_coeff: &[Complex64],
    lower_coeff: &[Complex64],
    v: &CVector,
) -> CVector {
    let fock_dim = core.states.len();
    let mut out = CVector::zeros(v.len());
    for f in 0..fock_dim {
        let src = v.rows(f * matter_dim, matter_dim);
        for i in 0..core.mode_count {
            let cr = raise_coeff[i];
            if cr != Complex64::default() {
                if let Some((tgt, amp)) = core.raise[f][i] {
                    out.rows_mut(tgt * matter_dim, matter_dim).axpy(
                        cr * amp,
                        &src,
                        Complex64::new(1.0, 0.0),
                    );
                }
            }
            let cl = lower_coeff[i];
            if cl != Complex64::default() {
                if let Some((tgt, amp)) = core.lower[f][i] {
                    out.rows_mut(tgt * matter_dim, matter_dim).axpy(
                        cl * amp,
                        &src,
                        Complex64::new(1.0, 0.0),
                    );
                }
            }
        }
    }
    out
}

/// A complex amplitude vector on matter tensor Fock, stored with the matter
/// index fastest (contiguous matter block per Fock basis state).
#[derive(Debug, Clone)]
pub struct StateVector {
    pub data: CVector,
    pub matter_dim: usize,
    pub fock_dim: usize,
}

impl StateVector {
    pub fn zeros(matter_dim: usize, fock_dim: usize) -> Self {
        StateVector { data: CVector::zeros(matter_dim * fock_dim), matter_dim, fock_dim }
    }

    pub fn from_data(data: CVector, matter_dim: usize, fock_dim: usize) -> Self {
        assert_eq!(data.len(), matter_dim * fock_dim);
        StateVector { data, matter_dim, fock_dim }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Product state `phi (x) eta` of a matter vector and a Fock vector.
    pub fn product(matter: &CVector, fock: &CVector) -> Self {
        let md = matter.len();
        let fd = fock.len();
        let mut data = CVector::zeros(md * fd);
        for f in 0..fd {
            if fock[f] != Complex64::default() {
                data.rows_mut(f * md, md).axpy(fock[f], matter, Complex64::default());
            }
        }
        StateVector { data, matter_dim: md, fock_dim: fd }
    }

    /// Product of a matter vector with the Fock vacuum.
    pub fn vacuum_product(matter: &CVector, fock_dim: usize) -> Self {
        let mut fock = CVector::zeros(fock_dim);
        fock[0] = Complex64::new(1.0, 0.0);
        StateVector::product(matter, &fock)
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    /// Inner product, antilinear in `self`.
    pub fn dotc(&self, other: &Self) -> Complex64 {
        self.data.dotc(&other.data)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        StateVector {
            data: &self.data / Complex64::new(n, 0.0),
            matter_dim: self.matter_dim,
            fock_dim: self.fock_dim,
        }
    }

    /// Total squared amplitude sitting at the photon-number cutoff; the
    /// truncation-error handle every verifier reports.
    pub fn top_sector_weight(&self, basis: &FockBasis) -> f64 {
        let mut acc = 0.0;
        for f in 0..self.fock_dim {
            if basis.total_photons(f) == basis.n_max() {
                acc += self.data.rows(f * self.matter_dim, self.matter_dim).norm_squared();
            }
        }
        acc
    }

    /// Squared amplitude per photon-number sector.
    pub fn sector_weights(&self, basis: &FockBasis) -> Vec<f64> {
        let mut acc = vec![0.0; basis.n_max() + 1];
        for f in 0..self.fock_dim {
            acc[basis.total_photons(f)] +=
                self.data.rows(f * self.matter_dim, self.matter_dim).norm_squared();
        }
        acc
    }

    /// Random unit state supported on photon sectors `<= photon_cap`.
    pub fn random_guarded(
        matter_dim: usize,
        basis: &FockBasis,
        photon_cap: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut data = CVector::zeros(matter_dim * basis.len());
        for f in 0..basis.len() {
            if basis.total_photons(f) <= photon_cap {
                for m in 0..matter_dim {
                    data[f * matter_dim + m] =
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
        }
        let n = data.norm();
        StateVector::from_data(data / Complex64::new(n, 0.0), matter_dim, basis.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{CutoffSpec, GridSpec, ShellSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_1d() -> ModeGrid {
        let spec = GridSpec::new(
            1,
            vec![
                ShellSpec { radius: 0.5, directions: 2, weight: 0.8 },
                ShellSpec { radius: 1.2, directions: 2, weight: 1.4 },
            ],
            CutoffSpec::sharp(0.1, 2.0),
        );
        ModeGrid::build(&spec).unwrap()
    }

    fn random_photon(grid: &ModeGrid, rng: &mut impl Rng) -> PhotonFunction {
        PhotonFunction::from_fn(grid, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn basis_size_is_binomial() {
        for n_max in 1..=4usize {
            for shells in 1..=3usize {
                let spec = GridSpec::new(
                    1,
                    (0..shells)
                        .map(|s| ShellSpec {
                            radius: 0.5 + s as f64 * 0.5,
                            directions: 2,
                            weight: 1.0,
                        })
                        .collect(),
                    CutoffSpec::sharp(0.1, 4.0),
                );
                let grid = ModeGrid::build(&spec).unwrap();
                let m = grid.len();
                if m > 6 {
                    continue;
                }
                let basis = FockBasis::new(&grid, n_max).unwrap();
                assert_eq!(basis.len(), binomial(m + n_max, n_max));
            }
        }
    }

    #[test]
    fn enumeration_is_graded_then_lexicographic() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        for f in 1..basis.len() {
            let (a, b) = (basis.occupation(f - 1), basis.occupation(f));
            let ta: usize = a.iter().map(|&x| x as usize).sum();
            let tb: usize = b.iter().map(|&x| x as usize).sum();
            assert!(ta < tb || (ta == tb && a < b));
        }
        assert_eq!(basis.occupation(0), &[0, 0, 0, 0]);
    }

    #[test]
    fn creation_on_vacuum_and_ladder_amplitudes() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 3).unwrap();
        let i = 2;
        let h = PhotonFunction::indicator(&grid, i);
        let a_star = basis.create_op(&h, 1);
        let mut vac = CVector::zeros(basis.len());
        vac[0] = Complex64::new(1.0, 0.0);
        let one = a_star.apply(&vac);
        let mut occ = vec![0u8; grid.len()];
        occ[i] = 1;
        let idx = basis.index_of(&occ).unwrap();
        let w = grid.mode(i).weight;
        assert!((one[idx] - Complex64::new(w.sqrt(), 0.0)).norm() < 1e-15);
        assert!((one.norm_squared() - w).abs() < 1e-15);

        // Second application picks up sqrt(n + 1) = sqrt(2).
        let two = a_star.apply(&one);
        occ[i] = 2;
        let idx2 = basis.index_of(&occ).unwrap();
        assert!((two[idx2] - Complex64::new(w * 2f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn annihilation_kills_vacuum_and_mode_annihilate_is_weight_free() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_photon(&grid, &mut rng);
        let a = basis.annihilate_op(&h, 1);
        let mut vac = CVector::zeros(basis.len());
        vac[0] = Complex64::new(1.0, 0.0);
        assert_eq!(a.apply(&vac).norm(), 0.0);

        // a(k_i) a*(1_i) vacuum = vacuum with amplitude exactly 1.
        let i = 1;
        let one_i = basis.create_op(&PhotonFunction::indicator(&grid, i), 1).apply(&vac);
        let back = basis.mode_annihilate_op(i, 1).apply(&one_i);
        assert!((back[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn creation_overlap_reproduces_weighted_inner_product() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = random_photon(&grid, &mut rng);
        let h = random_photon(&grid, &mut rng);
        let mut vac = CVector::zeros(basis.len());
        vac[0] = Complex64::new(1.0, 0.0);
        let hv = basis.create_op(&h, 1).apply(&vac);
        let gv = basis.create_op(&g, 1).apply(&vac);
        // <a*(h) vac, a*(g) vac> = <h, g> = sum w conj(h) g.
        let lhs = hv.dotc(&gv);
        let rhs = h.weighted_inner(&g, &grid);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn adjointness_of_creation_and_annihilation() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_photon(&grid, &mut rng);
        let matter_dim = 3;
        let a = basis.annihilate_op(&h, matter_dim);
        let a_star = basis.create_op(&h, matter_dim);
        let dim = matter_dim * basis.len();
        let psi = crate::linalg::random_vector(dim, &mut rng);
        let phi = crate::linalg::random_vector(dim, &mut rng);
        // <a(h) psi, phi> = <psi, a*(h) phi>.
        let lhs = a.apply(&psi).dotc(&phi);
        let rhs = psi.dotc(&a_star.apply(&phi));
        assert!((lhs - rhs).norm() < 1e-13 * psi.norm() * phi.norm());

        // Assembled matrices are exact conjugate transposes.
        let ma = a.assemble_dense();
        let ms = a_star.assemble_dense();
        assert_eq!((ma.adjoint() - ms).norm(), 0.0);
    }

    #[test]
    fn field_operator_properties() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        let zero = PhotonFunction::zeros(&grid);
        let phi0 = basis.field_op(&zero, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let v = crate::linalg::random_vector(basis.len(), &mut rng);
        assert_eq!(phi0.apply(&v).norm(), 0.0);

        let h = random_photon(&grid, &mut rng);
        let phi = basis.field_op(&h, 1);
        assert!(phi.hermiticity_defect() < 1e-13);

        // Vacuum expectation of phi(h)^2 is the squared discrete norm over 2.
        let mut vac = CVector::zeros(basis.len());
        vac[0] = Complex64::new(1.0, 0.0);
        let pv = phi.apply(&vac);
        let expect = h.weighted_inner(&h, &grid).re / 2.0;
        assert!((pv.norm_squared() - expect).abs() < 1e-14);
    }

    #[test]
    fn hf_and_number_are_diagonal_and_commute() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        let hf = basis.hf_op(1);
        let num = basis.number_op(1);
        let mut vac = CVector::zeros(basis.len());
        vac[0] = Complex64::new(1.0, 0.0);
        assert_eq!(hf.apply(&vac).norm(), 0.0);

        // Single photon at a mode of energy omega scales by omega.
        let i = 3;
        let mut occ = vec![0u8; grid.len()];
        occ[i] = 1;
        let idx = basis.index_of(&occ).unwrap();
        let mut v = CVector::zeros(basis.len());
        v[idx] = Complex64::new(1.0, 0.0);
        let hv = hf.apply(&v);
        assert!((hv[idx].re - grid.omega(i)).abs() < 1e-15);

        // Two photons on different modes add their energies.
        let mut occ2 = vec![0u8; grid.len()];
        occ2[0] = 1;
        occ2[2] = 1;
        let idx2 = basis.index_of(&occ2).unwrap();
        let mut v2 = CVector::zeros(basis.len());
        v2[idx2] = Complex64::new(1.0, 0.0);
        let hv2 = hf.apply(&v2);
        assert!((hv2[idx2].re - (grid.omega(0) + grid.omega(2))).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let r = crate::linalg::random_vector(basis.len(), &mut rng);
        let ab = num.apply(&hf.apply(&r));
        let ba = hf.apply(&num.apply(&r));
        assert_eq!((ab - ba).norm(), 0.0);
    }

    #[test]
    fn ccr_on_guarded_subspace() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 3).unwrap();
        let matter_dim = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let g = random_photon(&grid, &mut rng);
            let h = random_photon(&grid, &mut rng);
            let a_g = basis.annihilate_op(&g, matter_dim);
            let a_star_h = basis.create_op(&h, matter_dim);
            let a_h = basis.annihilate_op(&h, matter_dim);
            let a_star_g = basis.create_op(&g, matter_dim);
            let psi = StateVector::random_guarded(matter_dim, &basis, basis.n_max() - 1, &mut rng);
            let inner = g.weighted_inner(&h, &grid);
            let comm = a_g.apply(&a_star_h.apply(&psi.data))
                - a_star_h.apply(&a_g.apply(&psi.data));
            let defect = (&comm - &psi.data * inner).norm();
            assert!(defect < 1e-12, "CCR defect {defect}");
            // [a(g), a(h)] = 0 on the same guarded states.
            let comm2 = a_g.apply(&a_h.apply(&psi.data)) - a_h.apply(&a_g.apply(&psi.data));
            assert!(comm2.norm() < 1e-13);
            // [a*(g), a*(h)] = 0 on states two below the cutoff.
            let psi2 =
                StateVector::random_guarded(matter_dim, &basis, basis.n_max() - 2, &mut rng);
            let comm3 = a_star_g.apply(&a_star_h.apply(&psi2.data))
                - a_star_h.apply(&a_star_g.apply(&psi2.data));
            assert!(comm3.norm() < 1e-13);
        }
    }

    #[test]
    fn top_sector_weight_tracks_cutoff_sector() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 2).unwrap();
        let mut occ = vec![0u8; grid.len()];
        occ[0] = 2;
        let idx = basis.index_of(&occ).unwrap();
        let mut sv = StateVector::zeros(1, basis.len());
        sv.data[idx] = Complex64::new(0.6, 0.0);
        sv.data[0] = Complex64::new(0.8, 0.0);
        assert!((sv.top_sector_weight(&basis) - 0.36).abs() < 1e-15);
        let sectors = sv.sector_weights(&basis);
        assert!((sectors[0] - 0.64).abs() < 1e-15);
        assert_eq!(sectors[1], 0.0);
    }

    #[test]
    fn dump_lists_every_state() {
        let grid = grid_1d();
        let basis = FockBasis::new(&grid, 1).unwrap();
        let dump = basis.dump();
        assert_eq!(dump.lines().count(), basis.len());
        assert!(dump.starts_with("0 [0 0 0 0] total=0"));
    }
}
