//! Assembly of the full interacting Hamiltonian on matter tensor Fock, the
//! commutator operators `D1(k, lambda)` and `D2(k, lambda, k', lambda')`,
//! and residual verifiers for the two commutator identities they satisfy.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = sum_j [ (p_j + A(x_j))^2 + mu S_j . B(x_j) ] + V (x) 1 + 1 (x) H_f
//! ```
//!
//! with the square expanded as `p^2 + (p.A + A.p) + A^2`. Discrete stencils
//! break the continuum product rule at O(h^2), so the cross term and `D1`
//! are kept in hermitian-symmetrized form; the symmetrized `D1` equals the
//! exact discrete commutator bracket, which is the identity the verifiers
//! gate on, and reduces to the familiar `2 e^{ikx} eps.(p + A)` form in the
//! continuum where `k.eps = 0`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{CVector, OperatorHandle};
use crate::matter::{MatterSpace, Spin};
use crate::modes::ModeGrid;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Component tags of the assembled Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Kinetic,
    Potential,
    FieldEnergy,
    ALinear,
    AQuadratic,
    SpinB,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Kinetic,
        Component::Potential,
        Component::FieldEnergy,
        Component::ALinear,
        Component::AQuadratic,
        Component::SpinB,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Component::Kinetic => "kinetic",
            Component::Potential => "potential",
            Component::FieldEnergy => "field-energy",
            Component::ALinear => "A-linear",
            Component::AQuadratic => "A-quadratic",
            Component::SpinB => "spin-B",
        }
    }
}

/// The assembled Hamiltonian: a total handle plus its tagged components
/// (their sum equals the total by construction).
pub struct CoupledOperator {
    pub total: OperatorHandle,
    pub components: Vec<(Component, OperatorHandle)>,
    pub dim: usize,
}

impl CoupledOperator {
    pub fn component(&self, tag: Component) -> &OperatorHandle {
        &self.components.iter().find(|(c, _)| *c == tag).unwrap().1
    }
}

/// Multiplication operator on the matter space, constant across Fock and
/// spin indices; the type of `D2(k, lambda, k', lambda')`.
#[derive(Debug, Clone)]
pub struct D2Value {
    values: Arc<Vec<Complex64>>,
    spin_dim: usize,
}

impl D2Value {
    /// Spatial values of the multiplication operator.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Apply to a full state vector (diagonal on spatial, identity on spin
    /// and Fock).
    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        let block = self.values.len() * self.spin_dim;
        let blocks = v.len() / block;
        for f in 0..blocks {
            for (s, &val) in self.values.iter().enumerate() {
                let base = f * block + s * self.spin_dim;
                for q in 0..self.spin_dim {
                    out[base + q] = val * v[base + q];
                }
            }
        }
        out
    }

    /// `<D2 psi, psi>` (antilinear in the first slot).
    pub fn expectation(&self, v: &CVector) -> Complex64 {
        let mut acc = C_ZERO;
        let block = self.values.len() * self.spin_dim;
        let blocks = v.len() / block;
        for f in 0..blocks {
            for (s, &val) in self.values.iter().enumerate() {
                let base = f * block + s * self.spin_dim;
                let mut w = 0.0;
                for q in 0..self.spin_dim {
                    w += v[base + q].norm_sqr();
                }
                acc += val.conj() * w;
            }
        }
        acc
    }
}

struct SystemCore {
    modes: ModeGrid,
    fock: FockBasis,
    matter: MatterSpace,
    mu: f64,
    /// `kappa_i e^{-i k_i . x_j(s)} / ((2 pi)^{d/2} sqrt(2 omega_i))`,
    /// indexed `[mode][particle][spatial]`; the raise-side coupling scalar.
    phase: Vec<Vec<Vec<Complex64>>>,
    phase_conj: Vec<Vec<Vec<Complex64>>>,
    /// `(-i k) ^ eps` per mode (zero below three dimensions).
    cross: Vec<[Complex64; 3]>,
    /// Spin coupling fields `cross_l * phase`, raise side, `[mode][particle]`.
    spin_field: Vec<Vec<Vec<[Complex64; 3]>>>,
    spin_field_conj: Vec<Vec<Vec<[Complex64; 3]>>>,
    sqrt_w: Vec<f64>,
    spin_coupling: bool,
    matter_dim: usize,
    spatial_dim: usize,
    spin_dim: usize,
    fock_dim: usize,
}

/// The coupled model: mode grid, Fock basis, matter space, and the coupling
/// tables binding them. Immutable and cheap to clone.
#[derive(Clone)]
pub struct System {
    core: Arc<SystemCore>,
}

impl System {
    /// Build the system and its coupling tables.
    ///
    /// Fails when the mode and matter dimensions disagree, when spin
    /// coupling is requested outside three dimensions with a nonzero
    /// coupling, or when the total dimension exceeds `max_dim`.
    pub fn build(
        modes: ModeGrid,
        fock: FockBasis,
        matter: MatterSpace,
        mu: f64,
        max_dim: usize,
    ) -> Result<Self> {
        if modes.dim() != matter.dim() {
            return Err(Error::config(format!(
                "mode grid dimension {} does not match matter dimension {}",
                modes.dim(),
                matter.dim()
            )));
        }
        if fock.mode_count() != modes.len() {
            return Err(Error::config("Fock basis was built over a different mode grid"));
        }
        let matter_dim = matter.matter_dim();
        let dim = matter_dim * fock.len();
        if dim > max_dim {
            return Err(Error::dimension(format!(
                "total dimension {dim} = {matter_dim} (matter) x {} (Fock) exceeds the \
                 budget {max_dim}; state storage alone needs {:.1} MiB per vector",
                fock.len(),
                (dim * 16) as f64 / (1024.0 * 1024.0)
            )));
        }
        let coupling = modes.modes().iter().any(|m| m.cutoff.norm() > 0.0);
        let spin_half = matter.grid().spin == Spin::Half;
        if spin_half && coupling && modes.dim() != 3 {
            return Err(Error::config(
                "spin-1/2 magnetic coupling needs dimension 3; use spin = zero or dim = 3",
            ));
        }
        let spin_coupling = spin_half && modes.dim() == 3;

        let spatial_dim = matter.spatial_dim();
        let particles = matter.grid().particles;
        let d = modes.dim() as f64;
        let two_pi_pow = (2.0 * std::f64::consts::PI).powf(d / 2.0);

        let mut phase = Vec::with_capacity(modes.len());
        let mut phase_conj = Vec::with_capacity(modes.len());
        let mut cross = Vec::with_capacity(modes.len());
        for m in modes.modes() {
            let pref = m.cutoff / (two_pi_pow * (2.0 * m.omega()).sqrt());
            let mut per_particle = Vec::with_capacity(particles);
            let mut per_particle_conj = Vec::with_capacity(particles);
            for j in 0..particles {
                let mut tab = Vec::with_capacity(spatial_dim);
                for s in 0..spatial_dim {
                    let x = matter.position(s, j);
                    let arg = -(m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]);
                    tab.push(pref * Complex64::from_polar(1.0, arg));
                }
                per_particle_conj.push(tab.iter().map(|c| c.conj()).collect());
                per_particle.push(tab);
            }
            phase.push(per_particle);
            phase_conj.push(per_particle_conj);
            let cr = if modes.dim() == 3 {
                let kxe = [
                    m.k[1] * m.eps[2] - m.k[2] * m.eps[1],
                    m.k[2] * m.eps[0] - m.k[0] * m.eps[2],
                    m.k[0] * m.eps[1] - m.k[1] * m.eps[0],
                ];
                [
                    Complex64::new(0.0, -kxe[0]),
                    Complex64::new(0.0, -kxe[1]),
                    Complex64::new(0.0, -kxe[2]),
                ]
            } else {
                [C_ZERO; 3]
            };
            cross.push(cr);
        }

        let mut spin_field = Vec::new();
        let mut spin_field_conj = Vec::new();
        if spin_coupling {
            for i in 0..modes.len() {
                let mut per_p = Vec::with_capacity(particles);
                let mut per_p_conj = Vec::with_capacity(particles);
                for j in 0..particles {
                    let mut tab = Vec::with_capacity(spatial_dim);
                    for s in 0..spatial_dim {
                        let ph = phase[i][j][s];
                        tab.push([cross[i][0] * ph, cross[i][1] * ph, cross[i][2] * ph]);
                    }
                    per_p_conj.push(
                        tab.iter()
                            .map(|f: &[Complex64; 3]| [f[0].conj(), f[1].conj(), f[2].conj()])
                            .collect(),
                    );
                    per_p.push(tab);
                }
                spin_field.push(per_p);
                spin_field_conj.push(per_p_conj);
            }
        }

        let sqrt_w = modes.modes().iter().map(|m| m.weight.sqrt()).collect();
        Ok(System {
            core: Arc::new(SystemCore {
                spin_dim: matter.spin_dim(),
                fock_dim: fock.len(),
                modes,
                fock,
                matter,
                mu,
                phase,
                phase_conj,
                cross,
                spin_field,
                spin_field_conj,
                sqrt_w,
                spin_coupling,
                matter_dim,
                spatial_dim,
            }),
        })
    }

    pub fn modes(&self) -> &ModeGrid {
        &self.core.modes
    }

    pub fn fock(&self) -> &FockBasis {
        &self.core.fock
    }

    pub fn matter(&self) -> &MatterSpace {
        &self.core.matter
    }

    pub fn mu(&self) -> f64 {
        self.core.mu
    }

    pub fn matter_dim(&self) -> usize {
        self.core.matter_dim
    }

    pub fn dim(&self) -> usize {
        self.core.matter_dim * self.core.fock_dim
    }

    fn component_op(&self, tag: Component) -> OperatorHandle {
        let core = self.core.clone();
        let dim = self.dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            match tag {
                Component::Kinetic => core.apply_kinetic(v, &mut out),
                Component::Potential => core.apply_potential(v, &mut out),
                Component::FieldEnergy => core.apply_field_energy(v, &mut out),
                Component::ALinear => core.apply_a_linear(v, &mut out),
                Component::AQuadratic => core.apply_a_quadratic(v, &mut out),
                Component::SpinB => core.apply_spin_b(v, &mut out),
            }
            out
        })
    }

    /// Assemble the full Hamiltonian with its component decomposition.
    pub fn hamiltonian(&self) -> CoupledOperator {
        let core = self.core.clone();
        let dim = self.dim();
        let total = OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            core.apply_kinetic(v, &mut out);
            core.apply_potential(v, &mut out);
            core.apply_field_energy(v, &mut out);
            core.apply_a_linear(v, &mut out);
            core.apply_a_quadratic(v, &mut out);
            core.apply_spin_b(v, &mut out);
            out
        });
        let components =
            Component::ALL.iter().map(|&tag| (tag, self.component_op(tag))).collect();
        CoupledOperator { total, components, dim }
    }

    /// The commutand `sum_j (p_j + A(x_j))^2 + mu S_j . B(x_j)` entering the
    /// first commutator identity (everything except `V` and `H_f`).
    pub fn interaction_op(&self) -> OperatorHandle {
        let core = self.core.clone();
        let dim = self.dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            core.apply_kinetic(v, &mut out);
            core.apply_a_linear(v, &mut out);
            core.apply_a_quadratic(v, &mut out);
            core.apply_spin_b(v, &mut out);
            out
        })
    }

    /// The vector potential component `A_l(x_j)` as an operator handle.
    pub fn vector_potential_op(&self, particle: usize, axis: usize) -> OperatorHandle {
        assert!(axis < self.core.modes.dim() && particle < self.core.matter.grid().particles);
        let core = self.core.clone();
        let dim = self.dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            core.apply_vector_potential(particle, axis, v, &mut out);
            out
        })
    }

    /// The magnetic field component `B_l(x_j)`; the zero operator below
    /// three dimensions (no transverse curl).
    pub fn magnetic_field_op(&self, particle: usize, axis: usize) -> OperatorHandle {
        assert!(axis < 3 && particle < self.core.matter.grid().particles);
        let dim = self.dim();
        if self.core.modes.dim() != 3 {
            return OperatorHandle::zero(dim);
        }
        let core = self.core.clone();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            core.apply_magnetic_field(particle, axis, v, &mut out);
            out
        })
    }

    /// The commutator operator `D1(k_i, lambda_i)` in hermitian-symmetrized
    /// form; raises or lowers photon number by at most one through the
    /// vector potential inside `p + A`.
    pub fn d1_op(&self, mode: usize) -> OperatorHandle {
        assert!(mode < self.core.modes.len(), "mode index out of range");
        let core = self.core.clone();
        let core2 = self.core.clone();
        let dim = self.dim();
        OperatorHandle::new(
            dim,
            move |v| core.apply_d1(mode, false, v),
            move |v| core2.apply_d1(mode, true, v),
        )
    }

    /// The matter multiplication operator `D2(K_i, K_j)`.
    pub fn d2_value(&self, left: usize, right: usize) -> D2Value {
        let core = &self.core;
        let mut values = vec![C_ZERO; core.spatial_dim];
        let mut eps_dot = 0.0;
        for l in 0..3 {
            eps_dot += core.modes.mode(left).eps[l] * core.modes.mode(right).eps[l];
        }
        for s in 0..core.spatial_dim {
            let mut acc = C_ZERO;
            for j in 0..core.matter.grid().particles {
                acc += core.phase_conj[left][j][s] * core.phase[right][j][s];
            }
            values[s] = acc * (2.0 * eps_dot);
        }
        D2Value { values: Arc::new(values), spin_dim: core.spin_dim }
    }

    /// `D1(K_i) psi` for every grid mode, the workhorse vectors of the
    /// T-matrix and scattering identities.
    pub fn d1_applied_all(&self, psi: &CVector) -> Vec<CVector> {
        (0..self.core.modes.len()).map(|i| self.core.apply_d1(i, false, psi)).collect()
    }

    /// Residual of the first commutator identity
    /// `[W, a*(h)] psi - sum_i w_i h_i D1(K_i) psi` with
    /// `W = sum_j (p_j + A(x_j))^2 + mu S_j . B(x_j)`.
    ///
    /// Exact (up to rounding) on states with photon number at most
    /// `n_max - 2`; the guard covers the double-ladder content of `W`.
    pub fn comm1_residual(&self, h: &crate::modes::PhotonFunction, psi: &CVector) -> f64 {
        let w_op = self.interaction_op();
        let a_star = self.core.fock.create_op(h, self.core.matter_dim);
        let lhs = w_op.apply(&a_star.apply(psi)) - a_star.apply(&w_op.apply(psi));
        let mut rhs = CVector::zeros(self.dim());
        for i in 0..self.core.modes.len() {
            let c = h.value(i) * self.core.modes.mode(i).weight;
            if c != C_ZERO {
                rhs += self.core.apply_d1(i, false, psi) * c;
            }
        }
        (lhs - rhs).norm()
    }

    /// Residual of the second commutator identity
    /// `[a(h), D1(K_i)] psi - sum_j w_j conj(h_j) D2(K_i, K_j) psi`.
    pub fn comm2_residual(
        &self,
        mode: usize,
        h: &crate::modes::PhotonFunction,
        psi: &CVector,
    ) -> f64 {
        let a = self.core.fock.annihilate_op(h, self.core.matter_dim);
        let d1_psi = self.core.apply_d1(mode, false, psi);
        let lhs = a.apply(&d1_psi) - self.core.apply_d1(mode, false, &a.apply(psi));
        let mut rhs = CVector::zeros(self.dim());
        for j in 0..self.core.modes.len() {
            let c = h.value(j).conj() * self.core.modes.mode(j).weight;
            if c != C_ZERO {
                rhs += self.d2_value(mode, j).apply(psi) * c;
            }
        }
        (lhs - rhs).norm()
    }
}

impl SystemCore {
    fn fock_block<'a>(&self, v: &'a CVector, f: usize) -> &'a [Complex64] {
        &v.as_slice()[f * self.matter_dim..(f + 1) * self.matter_dim]
    }

    fn apply_kinetic(&self, v: &CVector, out: &mut CVector) {
        for f in 0..self.fock_dim {
            let start = f * self.matter_dim;
            let (src, dst) = split_block(v, out, start, self.matter_dim);
            self.matter.add_neg_laplacian(src, dst, 1.0);
        }
    }

    fn apply_potential(&self, v: &CVector, out: &mut CVector) {
        let vals = self.matter.potential().values();
        let sd = self.spin_dim;
        for f in 0..self.fock_dim {
            let base = f * self.matter_dim;
            for (s, &val) in vals.iter().enumerate() {
                for q in 0..sd {
                    let idx = base + s * sd + q;
                    out[idx] += val * v[idx];
                }
            }
        }
    }

    fn apply_field_energy(&self, v: &CVector, out: &mut CVector) {
        for f in 0..self.fock_dim {
            let e = self.fock.hf_energy(f);
            if e == 0.0 {
                continue;
            }
            let base = f * self.matter_dim;
            for m in 0..self.matter_dim {
                out[base + m] += e * v[base + m];
            }
        }
    }

    /// `A_l(x_j)`: over all modes, diagonal coupling scalar times a ladder.
    fn apply_vector_potential(&self, particle: usize, axis: usize, v: &CVector, out: &mut CVector) {
        let sd = self.spin_dim;
        for f in 0..self.fock_dim {
            for i in 0..self.modes.len() {
                let eps_l = self.modes.mode(i).eps[axis];
                if eps_l == 0.0 {
                    continue;
                }
                for (raise, entry) in [
                    (true, self.fock.raise_entry(f, i)),
                    (false, self.fock.lower_entry(f, i)),
                ] {
                    if let Some((tgt, amp)) = entry {
                        let tab = if raise {
                            &self.phase[i][particle]
                        } else {
                            &self.phase_conj[i][particle]
                        };
                        let scale = Complex64::new(self.sqrt_w[i] * amp * eps_l, 0.0);
                        let src = self.fock_block(v, f);
                        let dst = &mut out.as_mut_slice()
                            [tgt * self.matter_dim..(tgt + 1) * self.matter_dim];
                        MatterSpace::add_spatial_diag(tab, sd, src, dst, scale);
                    }
                }
            }
        }
    }

    /// `B_l(x_j)` for three-dimensional grids.
    fn apply_magnetic_field(&self, particle: usize, axis: usize, v: &CVector, out: &mut CVector) {
        let sd = self.spin_dim;
        for f in 0..self.fock_dim {
            for i in 0..self.modes.len() {
                for (raise, entry) in [
                    (true, self.fock.raise_entry(f, i)),
                    (false, self.fock.lower_entry(f, i)),
                ] {
                    if let Some((tgt, amp)) = entry {
                        let cr =
                            if raise { self.cross[i][axis] } else { self.cross[i][axis].conj() };
                        if cr == C_ZERO {
                            continue;
                        }
                        let tab = if raise {
                            &self.phase[i][particle]
                        } else {
                            &self.phase_conj[i][particle]
                        };
                        let scale = cr * (self.sqrt_w[i] * amp);
                        let src = self.fock_block(v, f);
                        let dst = &mut out.as_mut_slice()
                            [tgt * self.matter_dim..(tgt + 1) * self.matter_dim];
                        MatterSpace::add_spatial_diag(tab, sd, src, dst, scale);
                    }
                }
            }
        }
    }

    /// Cross term `sum_{j,l} (p_{j,l} A_{j,l} + A_{j,l} p_{j,l})`.
    fn apply_a_linear(&self, v: &CVector, out: &mut CVector) {
        let md = self.matter_dim;
        let sd = self.spin_dim;
        let d = self.modes.dim();
        let particles = self.matter.grid().particles;
        let mut acc = vec![C_ZERO; md];
        let mut tmp = vec![C_ZERO; md];
        for f in 0..self.fock_dim {
            let src = self.fock_block(v, f);
            for i in 0..self.modes.len() {
                let eps = self.modes.mode(i).eps;
                for (raise, entry) in [
                    (true, self.fock.raise_entry(f, i)),
                    (false, self.fock.lower_entry(f, i)),
                ] {
                    let Some((tgt, amp)) = entry else { continue };
                    acc.fill(C_ZERO);
                    for j in 0..particles {
                        let tab =
                            if raise { &self.phase[i][j] } else { &self.phase_conj[i][j] };
                        // tmp = diag(phi) src, shared across axes.
                        tmp.fill(C_ZERO);
                        MatterSpace::add_spatial_diag(tab, sd, src, &mut tmp, C_ONE);
                        for l in 0..d {
                            if eps[l] == 0.0 {
                                continue;
                            }
                            let scale = Complex64::new(eps[l], 0.0);
                            let axis = j * d + l;
                            // p (phi src)
                            self.matter.add_momentum(axis, &tmp, &mut acc, scale);
                        }
                        for l in 0..d {
                            if eps[l] == 0.0 {
                                continue;
                            }
                            let axis = j * d + l;
                            // phi (p src): compute p src into a scratch and
                            // accumulate through the diagonal.
                            let mut psrc = vec![C_ZERO; md];
                            self.matter.add_momentum(axis, src, &mut psrc, C_ONE);
                            MatterSpace::add_spatial_diag(
                                tab,
                                sd,
                                &psrc,
                                &mut acc,
                                Complex64::new(eps[l], 0.0),
                            );
                        }
                    }
                    let coeff = Complex64::new(self.sqrt_w[i] * amp, 0.0);
                    let dst = &mut out.as_mut_slice()[tgt * md..(tgt + 1) * md];
                    for m in 0..md {
                        dst[m] += coeff * acc[m];
                    }
                }
            }
        }
    }

    /// `sum_j A(x_j)^2`, expanded over ordered mode and ladder pairs.
    fn apply_a_quadratic(&self, v: &CVector, out: &mut CVector) {
        let md = self.matter_dim;
        let sd = self.spin_dim;
        let particles = self.matter.grid().particles;
        let m_count = self.modes.len();
        for f in 0..self.fock_dim {
            let src_start = f * md;
            for i2 in 0..m_count {
                for (raise2, entry2) in [
                    (true, self.fock.raise_entry(f, i2)),
                    (false, self.fock.lower_entry(f, i2)),
                ] {
                    let Some((f1, amp2)) = entry2 else { continue };
                    for i1 in 0..m_count {
                        let mut eps_dot = 0.0;
                        for l in 0..3 {
                            eps_dot +=
                                self.modes.mode(i1).eps[l] * self.modes.mode(i2).eps[l];
                        }
                        if eps_dot == 0.0 {
                            continue;
                        }
                        for (raise1, entry1) in [
                            (true, self.fock.raise_entry(f1, i1)),
                            (false, self.fock.lower_entry(f1, i1)),
                        ] {
                            let Some((f2, amp1)) = entry1 else { continue };
                            let coeff = self.sqrt_w[i1] * self.sqrt_w[i2] * amp1 * amp2 * eps_dot;
                            let dst_start = f2 * md;
                            for s in 0..self.spatial_dim {
                                let mut prod = C_ZERO;
                                for j in 0..particles {
                                    let p1 = if raise1 {
                                        self.phase[i1][j][s]
                                    } else {
                                        self.phase_conj[i1][j][s]
                                    };
                                    let p2 = if raise2 {
                                        self.phase[i2][j][s]
                                    } else {
                                        self.phase_conj[i2][j][s]
                                    };
                                    prod += p1 * p2;
                                }
                                let c = prod * coeff;
                                if c == C_ZERO {
                                    continue;
                                }
                                let base_s = s * sd;
                                for q in 0..sd {
                                    out[dst_start + base_s + q] +=
                                        c * v[src_start + base_s + q];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `mu sum_j S_j . B(x_j)`.
    fn apply_spin_b(&self, v: &CVector, out: &mut CVector) {
        if !self.spin_coupling {
            return;
        }
        let md = self.matter_dim;
        let particles = self.matter.grid().particles;
        let mu = Complex64::new(self.mu, 0.0);
        for f in 0..self.fock_dim {
            for i in 0..self.modes.len() {
                for (raise, entry) in [
                    (true, self.fock.raise_entry(f, i)),
                    (false, self.fock.lower_entry(f, i)),
                ] {
                    let Some((tgt, amp)) = entry else { continue };
                    let scale = mu * (self.sqrt_w[i] * amp);
                    for j in 0..particles {
                        let field = if raise {
                            &self.spin_field[i][j]
                        } else {
                            &self.spin_field_conj[i][j]
                        };
                        let (src, dst) = if tgt == f {
                            unreachable!("ladder always changes the sector");
                        } else {
                            split_block_pair(v, out, f * md, tgt * md, md)
                        };
                        self.matter.add_spin_mix(j, field, src, dst, scale);
                    }
                }
            }
        }
    }

    /// `D1(K_i)` (or its adjoint): the symmetrized bracket
    /// `sum_{j,l} [ X_{j,l} C_{j,l} + C_{j,l} X_{j,l} ] + mu sum_j S_j . c_j`
    /// with `X = p + A` and `C` the conjugated coupling diagonal.
    fn apply_d1(&self, mode: usize, adjoint: bool, v: &CVector) -> CVector {
        let md = self.matter_dim;
        let sd = self.spin_dim;
        let d = self.modes.dim();
        let particles = self.matter.grid().particles;
        let eps = self.modes.mode(mode).eps;
        let mut out = CVector::zeros(v.len());
        // The bracket diagonal: conj(phase) for D1 itself, phase for D1*.
        let ctab = if adjoint { &self.phase } else { &self.phase_conj };

        for j in 0..particles {
            let tab = &ctab[mode][j];
            // u = C_j v (axis-independent scalar part, scaled by eps_l later)
            let mut u = CVector::zeros(v.len());
            for f in 0..self.fock_dim {
                let (src, dst) = split_block_pair(v, &mut u, f * md, f * md, md);
                MatterSpace::add_spatial_diag(tab, sd, src, dst, C_ONE);
            }
            for l in 0..d {
                if eps[l] == 0.0 {
                    continue;
                }
                let axis = j * d + l;
                let scale = Complex64::new(eps[l], 0.0);
                // X (C v): momentum part per Fock block, then the ladder A.
                for f in 0..self.fock_dim {
                    let (src, dst) = split_block_pair(&u, &mut out, f * md, f * md, md);
                    self.matter.add_momentum(axis, src, dst, scale);
                }
                self.scaled_vector_potential(j, l, &u, &mut out, scale);
                // C (X v): apply X to v, then the diagonal.
                let mut xv = CVector::zeros(v.len());
                for f in 0..self.fock_dim {
                    let (src, dst) = split_block_pair(v, &mut xv, f * md, f * md, md);
                    self.matter.add_momentum(axis, src, dst, C_ONE);
                }
                self.scaled_vector_potential(j, l, v, &mut xv, C_ONE);
                for f in 0..self.fock_dim {
                    let (src, dst) = split_block_pair(&xv, &mut out, f * md, f * md, md);
                    MatterSpace::add_spatial_diag(tab, sd, src, dst, scale);
                }
            }
            // Spin term: mu S . (i k ^ eps) conj(kappa e^{-ikx}) and its
            // adjoint; diagonal in Fock.
            if self.spin_coupling {
                let field = if adjoint {
                    &self.spin_field[mode][j]
                } else {
                    &self.spin_field_conj[mode][j]
                };
                let mu = Complex64::new(self.mu, 0.0);
                for f in 0..self.fock_dim {
                    let (src, dst) = split_block_pair(v, &mut out, f * md, f * md, md);
                    self.matter.add_spin_mix(j, field, src, dst, mu);
                }
            }
        }
        out
    }

    /// `out += scale * A_{j,l} v` over the full state.
    fn scaled_vector_potential(
        &self,
        particle: usize,
        axis: usize,
        v: &CVector,
        out: &mut CVector,
        scale: Complex64,
    ) {
        let md = self.matter_dim;
        let sd = self.spin_dim;
        for f in 0..self.fock_dim {
            for i in 0..self.modes.len() {
                let eps_l = self.modes.mode(i).eps[axis];
                if eps_l == 0.0 {
                    continue;
                }
                for (raise, entry) in [
                    (true, self.fock.raise_entry(f, i)),
                    (false, self.fock.lower_entry(f, i)),
                ] {
                    if let Some((tgt, amp)) = entry {
                        let tab = if raise {
                            &self.phase[i][particle]
                        } else {
                            &self.phase_conj[i][particle]
                        };
                        let c = scale * (self.sqrt_w[i] * amp * eps_l);
                        let (src, dst) = split_block_pair(v, out, f * md, tgt * md, md);
                        MatterSpace::add_spatial_diag(tab, sd, src, dst, c);
                    }
                }
            }
        }
    }
}

/// Borrow a source block from `v` and a mutable destination block from
/// `out`; blocks may coincide in index space because the borrows come from
/// two different vectors.
fn split_block_pair<'a>(
    v: &'a CVector,
    out: &'a mut CVector,
    src_start: usize,
    dst_start: usize,
    len: usize,
) -> (&'a [Complex64], &'a mut [Complex64]) {
    let src = &v.as_slice()[src_start..src_start + len];
    let dst = &mut out.as_mut_slice()[dst_start..dst_start + len];
    (src, dst)
}

fn split_block<'a>(
    v: &'a CVector,
    out: &'a mut CVector,
    start: usize,
    len: usize,
) -> (&'a [Complex64], &'a mut [Complex64]) {
    split_block_pair(v, out, start, start, len)
}
