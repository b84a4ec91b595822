//! Discretized photon one-particle space.
//!
//! A [`ModeGrid`] carries a finite set of momentum/polarization modes with
//! quadrature weights, the dispersion `omega(k) = |k|`, a deterministic
//! polarization frame per mode, and the ultraviolet cutoff values `kappa(k)`.
//! Continuum integrals over photon momenta become weighted sums over grid
//! modes; all weight bookkeeping downstream (ladder operators, form factors,
//! T-matrix kernels) is anchored to the conventions fixed here.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default infrared floor: modes with `|k|` at or below this are rejected.
pub const DEFAULT_MOMENTUM_FLOOR: f64 = 1e-3;

/// Euclidean norm of a momentum vector; the photon dispersion relation.
pub fn omega(k: &[f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Ultraviolet cutoff profile for `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffProfile {
    /// `kappa(k) = e` for `|k| < uv_cutoff`, zero otherwise.
    Sharp,
    /// `kappa(k) = e * exp(-|k|^2 / (2 uv_cutoff^2))`, smooth in `|k|`.
    Gaussian,
}

/// Coupling function `kappa`: charge times a cutoff profile.
#[derive(Debug, Clone)]
pub struct CutoffSpec {
    /// Electric charge `e`; overall coupling strength (may be zero).
    pub charge: f64,
    /// Ultraviolet cutoff scale; must be positive.
    pub uv_cutoff: f64,
    pub profile: CutoffProfile,
}

impl CutoffSpec {
    pub fn sharp(charge: f64, uv_cutoff: f64) -> Self {
        CutoffSpec { charge, uv_cutoff, profile: CutoffProfile::Sharp }
    }

    /// Evaluate `kappa(k)`.
    pub fn evaluate(&self, k: &[f64; 3]) -> Complex64 {
        let r = omega(k);
        let v = match self.profile {
            CutoffProfile::Sharp => {
                if r < self.uv_cutoff {
                    self.charge
                } else {
                    0.0
                }
            }
            CutoffProfile::Gaussian => {
                self.charge * (-r * r / (2.0 * self.uv_cutoff * self.uv_cutoff)).exp()
            }
        };
        Complex64::new(v, 0.0)
    }
}

/// One energy shell of the grid: a radius, a number of directions, and the
/// total quadrature weight to distribute equally over the shell's modes.
#[derive(Debug, Clone)]
pub struct ShellSpec {
    pub radius: f64,
    /// Number of unit directions on the shell. For `dim = 1` this must be 1
    /// (`+k` only) or 2 (`+k` and `-k`).
    pub directions: usize,
    /// Total weight of the shell, split equally over its direction modes.
    pub weight: f64,
}

/// Everything needed to build a [`ModeGrid`].
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dim: usize,
    pub shells: Vec<ShellSpec>,
    pub cutoff: CutoffSpec,
    pub momentum_floor: f64,
}

impl GridSpec {
    pub fn new(dim: usize, shells: Vec<ShellSpec>, cutoff: CutoffSpec) -> Self {
        GridSpec { dim, shells, cutoff, momentum_floor: DEFAULT_MOMENTUM_FLOOR }
    }
}

/// A single grid mode `(k, lambda)` with its weight, cutoff value, and
/// polarization vector.
#[derive(Debug, Clone)]
pub struct Mode {
    /// Momentum; components beyond the grid dimension are zero.
    pub k: [f64; 3],
    /// Polarization index, 0-based (`0..pol_count`).
    pub polarization: usize,
    /// Quadrature weight, strictly positive.
    pub weight: f64,
    /// Cutoff value `kappa(k)`.
    pub cutoff: Complex64,
    /// Polarization vector; unit vector, orthogonal to `k` for `dim >= 2`.
    pub eps: [f64; 3],
}

impl Mode {
    pub fn omega(&self) -> f64 {
        omega(&self.k)
    }
}

#[derive(Debug)]
struct GridInner {
    dim: usize,
    pol_count: usize,
    modes: Vec<Mode>,
    /// Mode indices grouped by exact `|k|`, ascending in radius.
    shells: Vec<Vec<usize>>,
    momentum_floor: f64,
}

/// Immutable discretized photon mode space. Cheap to clone and safe to share
/// across workers.
#[derive(Debug, Clone)]
pub struct ModeGrid {
    inner: Arc<GridInner>,
}

/// Deterministic orthonormal frame `(k/|k|, eps1, eps2)` for `dim = 3`.
///
/// The auxiliary axis is the coordinate axis least aligned with `k`, which
/// makes the frame a well-defined function of `k/|k|` alone.
fn polarization_frame(k: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let r = omega(k);
    let khat = [k[0] / r, k[1] / r, k[2] / r];
    let mut axis = 0;
    for a in 1..3 {
        if khat[a].abs() < khat[axis].abs() {
            axis = a;
        }
    }
    let mut e_a = [0.0; 3];
    e_a[axis] = 1.0;
    let proj = khat[axis];
    let mut t = [e_a[0] - proj * khat[0], e_a[1] - proj * khat[1], e_a[2] - proj * khat[2]];
    let tn = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    t = [t[0] / tn, t[1] / tn, t[2] / tn];
    let cross = [
        khat[1] * t[2] - khat[2] * t[1],
        khat[2] * t[0] - khat[0] * t[2],
        khat[0] * t[1] - khat[1] * t[0],
    ];
    (t, cross)
}

/// Unit directions on the sphere/circle/line for one shell.
fn shell_directions(dim: usize, count: usize) -> Result<Vec<[f64; 3]>> {
    match dim {
        1 => match count {
            1 => Ok(vec![[1.0, 0.0, 0.0]]),
            2 => Ok(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
            _ => Err(Error::config(format!(
                "dim=1 shells support 1 or 2 directions, got {count}"
            ))),
        },
        2 => {
            if count == 0 {
                return Err(Error::config("shell direction count must be positive"));
            }
            Ok((0..count)
                .map(|j| {
                    let theta = 2.0 * PI * j as f64 / count as f64;
                    [theta.cos(), theta.sin(), 0.0]
                })
                .collect())
        }
        3 => match count {
            0 => Err(Error::config("shell direction count must be positive")),
            2 => Ok(vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]),
            6 => Ok(vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ]),
            8 => {
                let s = 1.0 / 3f64.sqrt();
                let mut dirs = Vec::with_capacity(8);
                for &sx in &[1.0, -1.0] {
                    for &sy in &[1.0, -1.0] {
                        for &sz in &[1.0, -1.0] {
                            dirs.push([sx * s, sy * s, sz * s]);
                        }
                    }
                }
                Ok(dirs)
            }
            n => {
                // Fibonacci sphere for arbitrary counts.
                let golden = PI * (3.0 - 5f64.sqrt());
                Ok((0..n)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * i as f64;
                        [r * phi.cos(), r * phi.sin(), z]
                    })
                    .collect())
            }
        },
        _ => Err(Error::config(format!("dimension must be 1, 2, or 3, got {dim}"))),
    }
}

impl ModeGrid {
    /// Build a grid from its specification, validating every invariant.
    pub fn build(spec: &GridSpec) -> Result<Self> {
        if !(1..=3).contains(&spec.dim) {
            return Err(Error::config(format!(
                "dimension must be 1, 2, or 3, got {}",
                spec.dim
            )));
        }
        if spec.cutoff.uv_cutoff <= 0.0 {
            return Err(Error::config(format!(
                "uv cutoff must be positive, got {}",
                spec.cutoff.uv_cutoff
            )));
        }
        if spec.shells.is_empty() {
            return Err(Error::config("grid needs at least one shell"));
        }
        let pol_count = if spec.dim == 3 { 2 } else { 1 };
        let mut modes = Vec::new();
        let mut shells_sorted = spec.shells.clone();
        shells_sorted.sort_by(|a, b| a.radius.partial_cmp(&b.radius).unwrap());
        for shell in &shells_sorted {
            if !shell.radius.is_finite() || shell.radius <= spec.momentum_floor {
                return Err(Error::config(format!(
                    "shell radius {} at or below the momentum floor {}",
                    shell.radius, spec.momentum_floor
                )));
            }
            if shell.weight <= 0.0 || !shell.weight.is_finite() {
                return Err(Error::config(format!(
                    "shell weight must be positive and finite, got {}",
                    shell.weight
                )));
            }
            let dirs = shell_directions(spec.dim, shell.directions)?;
            let w = shell.weight / dirs.len() as f64;
            for dir in dirs {
                let k = [shell.radius * dir[0], shell.radius * dir[1], shell.radius * dir[2]];
                let kappa = spec.cutoff.evaluate(&k);
                match spec.dim {
                    1 => {
                        modes.push(Mode {
                            k,
                            polarization: 0,
                            weight: w,
                            cutoff: kappa,
                            eps: [1.0, 0.0, 0.0],
                        });
                    }
                    2 => {
                        // One transverse direction in the plane.
                        let r = omega(&k);
                        let eps = [-k[1] / r, k[0] / r, 0.0];
                        modes.push(Mode { k, polarization: 0, weight: w, cutoff: kappa, eps });
                    }
                    _ => {
                        let (e1, e2) = polarization_frame(&k);
                        modes.push(Mode {
                            k,
                            polarization: 0,
                            weight: w,
                            cutoff: kappa,
                            eps: e1,
                        });
                        modes.push(Mode {
                            k,
                            polarization: 1,
                            weight: w,
                            cutoff: kappa,
                            eps: e2,
                        });
                    }
                }
            }
        }
        let shells = group_by_radius(&modes);
        Ok(ModeGrid {
            inner: Arc::new(GridInner {
                dim: spec.dim,
                pol_count,
                modes,
                shells,
                momentum_floor: spec.momentum_floor,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn pol_count(&self) -> usize {
        self.inner.pol_count
    }

    pub fn len(&self) -> usize {
        self.inner.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.inner.modes
    }

    pub fn mode(&self, i: usize) -> &Mode {
        &self.inner.modes[i]
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.inner.modes[i].omega()
    }

    pub fn momentum_floor(&self) -> f64 {
        self.inner.momentum_floor
    }

    /// Mode indices grouped by exact `|k|`, ascending in radius.
    pub fn shells(&self) -> &[Vec<usize>] {
        &self.inner.shells
    }

    /// All unordered mode pairs `(i, j)`, `i < j`, sharing `|k|` exactly.
    pub fn shared_shell_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for shell in &self.inner.shells {
            for a in 0..shell.len() {
                for b in (a + 1)..shell.len() {
                    pairs.push((shell[a], shell[b]));
                }
            }
        }
        pairs
    }

    /// True when some shell carries at least two distinct modes, so the
    /// on-shell delta of scattering kernels has discrete support.
    pub fn has_shared_shell(&self) -> bool {
        self.inner.shells.iter().any(|s| s.len() >= 2)
    }

    /// Plain-text table: one line per mode with columns
    /// `d  k_1..k_d  lambda  w  Re(kappa)  Im(kappa)` (lambda is 1-based).
    pub fn dump_table(&self) -> String {
        let mut out = String::new();
        for m in self.modes() {
            write!(out, "{}", self.dim()).unwrap();
            for l in 0..self.dim() {
                write!(out, " {:.17e}", m.k[l]).unwrap();
            }
            writeln!(
                out,
                " {} {:.17e} {:.17e} {:.17e}",
                m.polarization + 1,
                m.weight,
                m.cutoff.re,
                m.cutoff.im
            )
            .unwrap();
        }
        out
    }

    /// Reload a grid from [`ModeGrid::dump_table`] output. Polarization
    /// vectors are reconstructed deterministically from `k` and `lambda`.
    pub fn parse_table(text: &str, momentum_floor: f64) -> Result<Self> {
        let mut modes = Vec::new();
        let mut dim = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| {
                Error::config(format!("mode table line {}: {}", lineno + 1, msg))
            };
            let d: usize =
                fields[0].parse().map_err(|_| bad("cannot parse dimension column"))?;
            if !(1..=3).contains(&d) {
                return Err(bad("dimension must be 1, 2, or 3"));
            }
            if dim == 0 {
                dim = d;
            } else if dim != d {
                return Err(bad("inconsistent dimensions across lines"));
            }
            if fields.len() != d + 5 {
                return Err(bad(&format!("expected {} columns, got {}", d + 5, fields.len())));
            }
            let mut k = [0.0; 3];
            for l in 0..d {
                k[l] = fields[1 + l].parse().map_err(|_| bad("cannot parse momentum"))?;
            }
            let lambda: usize =
                fields[d + 1].parse().map_err(|_| bad("cannot parse polarization"))?;
            let weight: f64 = fields[d + 2].parse().map_err(|_| bad("cannot parse weight"))?;
            let re: f64 = fields[d + 3].parse().map_err(|_| bad("cannot parse Re kappa"))?;
            let im: f64 = fields[d + 4].parse().map_err(|_| bad("cannot parse Im kappa"))?;
            let r = omega(&k);
            if r <= momentum_floor {
                return Err(bad("momentum at or below the floor"));
            }
            if weight <= 0.0 {
                return Err(bad("weight must be positive"));
            }
            let pol_count = if d == 3 { 2 } else { 1 };
            if lambda < 1 || lambda > pol_count {
                return Err(bad("polarization index out of range"));
            }
            let eps = match d {
                1 => [1.0, 0.0, 0.0],
                2 => [-k[1] / r, k[0] / r, 0.0],
                _ => {
                    let (e1, e2) = polarization_frame(&k);
                    if lambda == 1 {
                        e1
                    } else {
                        e2
                    }
                }
            };
            modes.push(Mode {
                k,
                polarization: lambda - 1,
                weight,
                cutoff: Complex64::new(re, im),
                eps,
            });
        }
        if modes.is_empty() {
            return Err(Error::config("mode table is empty"));
        }
        let shells = group_by_radius(&modes);
        let pol_count = if dim == 3 { 2 } else { 1 };
        Ok(ModeGrid {
            inner: Arc::new(GridInner { dim, pol_count, modes, shells, momentum_floor }),
        })
    }
}

fn group_by_radius(modes: &[Mode]) -> Vec<Vec<usize>> {
    let mut keyed: Vec<(u64, usize)> =
        modes.iter().enumerate().map(|(i, m)| (m.omega().to_bits(), i)).collect();
    keyed.sort_by(|a, b| {
        f64::from_bits(a.0).partial_cmp(&f64::from_bits(b.0)).unwrap().then(a.1.cmp(&b.1))
    });
    let mut shells: Vec<Vec<usize>> = Vec::new();
    let mut current_key = None;
    for (key, idx) in keyed {
        if current_key == Some(key) {
            shells.last_mut().unwrap().push(idx);
        } else {
            shells.push(vec![idx]);
            current_key = Some(key);
        }
    }
    shells
}

/// A photon wave packet: one complex amplitude per grid mode.
#[derive(Debug, Clone)]
pub struct PhotonFunction {
    values: DVector<Complex64>,
}

impl PhotonFunction {
    pub fn zeros(grid: &ModeGrid) -> Self {
        PhotonFunction { values: DVector::zeros(grid.len()) }
    }

    pub fn from_values(grid: &ModeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "photon function has {} values but grid has {} modes",
                values.len(),
                grid.len()
            )));
        }
        Ok(PhotonFunction { values: DVector::from_vec(values) })
    }

    /// Indicator of a single grid mode.
    pub fn indicator(grid: &ModeGrid, mode: usize) -> Self {
        let mut v = DVector::zeros(grid.len());
        v[mode] = Complex64::new(1.0, 0.0);
        PhotonFunction { values: v }
    }

    pub fn from_fn(grid: &ModeGrid, mut f: impl FnMut(&Mode) -> Complex64) -> Self {
        PhotonFunction {
            values: DVector::from_iterator(grid.len(), grid.modes().iter().map(&mut f)),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn value(&self, i: usize) -> Complex64 {
        self.values[i]
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        PhotonFunction { values: &self.values * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        PhotonFunction { values: &self.values + &other.values }
    }

    /// `e^{i sign * omega t} h`, the free-dispersion phase twist.
    pub fn phase_twisted(&self, grid: &ModeGrid, t: f64, sign: f64) -> Self {
        let mut v = self.values.clone();
        for i in 0..v.len() {
            v[i] *= Complex64::from_polar(1.0, sign * grid.omega(i) * t);
        }
        PhotonFunction { values: v }
    }

    /// Discrete weighted inner product `sum_i w_i conj(self_i) other_i`,
    /// antilinear in `self`.
    pub fn weighted_inner(&self, other: &Self, grid: &ModeGrid) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.values.len() {
            acc += self.values[i].conj() * other.values[i] * grid.mode(i).weight;
        }
        acc
    }

    /// Plain weighted L2 norm `sqrt(sum w |h|^2)`.
    pub fn l2_norm(&self, grid: &ModeGrid) -> f64 {
        self.weighted_inner(self, grid).re.sqrt()
    }

    /// The omega-weighted norm `sqrt(sum_i w_i |h_i|^2 (1 + 1/|k_i|))`.
    pub fn omega_norm(&self, grid: &ModeGrid) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            let m = grid.mode(i);
            acc += m.weight * self.values[i].norm_sqr() * (1.0 + 1.0 / m.omega());
        }
        acc.sqrt()
    }
}

/// Coupling form factor `G_x(k, lambda)`: the photon-side kernel of the
/// quantized vector potential at particle position `x`.
///
/// `G = (2 pi)^{-d/2} kappa(k) |k|^{-1/2} eps(k, lambda) e^{-i k.x}`.
pub fn form_factor_g(grid: &ModeGrid, mode: usize, x: &[f64; 3]) -> [Complex64; 3] {
    let m = grid.mode(mode);
    let d = grid.dim();
    let r = m.omega();
    let phase = -(m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]);
    let scalar = m.cutoff * Complex64::from_polar(1.0, phase)
        / ((2.0 * PI).powf(d as f64 / 2.0) * r.sqrt());
    let mut g = [Complex64::new(0.0, 0.0); 3];
    for l in 0..3 {
        g[l] = scalar * m.eps[l];
    }
    g
}

/// Magnetic form factor `H_x(k, lambda)`: as [`form_factor_g`] with the
/// polarization vector replaced by `(-i k) ^ eps`. Defined as zero for
/// `dim < 3`, where there is no transverse curl and spin coupling is
/// disabled.
pub fn form_factor_h(grid: &ModeGrid, mode: usize, x: &[f64; 3]) -> [Complex64; 3] {
    if grid.dim() != 3 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let m = grid.mode(mode);
    let r = m.omega();
    let phase = -(m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]);
    let scalar = m.cutoff * Complex64::from_polar(1.0, phase)
        / ((2.0 * PI).powf(1.5) * r.sqrt());
    let cross = [
        m.k[1] * m.eps[2] - m.k[2] * m.eps[1],
        m.k[2] * m.eps[0] - m.k[0] * m.eps[2],
        m.k[0] * m.eps[1] - m.k[1] * m.eps[0],
    ];
    let minus_i = Complex64::new(0.0, -1.0);
    let mut h = [Complex64::new(0.0, 0.0); 3];
    for l in 0..3 {
        h[l] = scalar * minus_i * cross[l];
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_shell_1d() -> ModeGrid {
        let spec = GridSpec::new(
            1,
            vec![
                ShellSpec { radius: 0.5, directions: 2, weight: 1.0 },
                ShellSpec { radius: 1.0, directions: 2, weight: 1.0 },
            ],
            CutoffSpec::sharp(0.1, 2.0),
        );
        ModeGrid::build(&spec).unwrap()
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(omega(&[3.0, 4.0, 0.0]), 5.0);
        assert!((omega(&[1.0, 1.0, 1.0]) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn one_dim_shell_count() {
        let grid = two_shell_1d();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.pol_count(), 1);
        assert_eq!(grid.shells().len(), 2);
        assert_eq!(grid.shells()[0].len(), 2);
    }

    #[test]
    fn zero_charge_zeroes_kappa() {
        let spec = GridSpec::new(
            1,
            vec![ShellSpec { radius: 0.5, directions: 2, weight: 1.0 }],
            CutoffSpec::sharp(0.0, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        assert!(grid.modes().iter().all(|m| m.cutoff.norm() == 0.0));
    }

    #[test]
    fn sharp_cutoff_kills_modes_above_uv_scale() {
        let spec = GridSpec::new(
            1,
            vec![
                ShellSpec { radius: 1.0, directions: 2, weight: 1.0 },
                ShellSpec { radius: 3.0, directions: 2, weight: 1.0 },
            ],
            CutoffSpec::sharp(0.25, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        for m in grid.modes() {
            if m.omega() < 2.0 {
                assert_eq!(m.cutoff.re, 0.25);
            } else {
                assert_eq!(m.cutoff.norm(), 0.0);
            }
        }
    }

    #[test]
    fn momentum_floor_rejected() {
        let spec = GridSpec::new(
            1,
            vec![ShellSpec { radius: 1e-5, directions: 2, weight: 1.0 }],
            CutoffSpec::sharp(0.1, 2.0),
        );
        assert!(matches!(ModeGrid::build(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn nonpositive_uv_cutoff_rejected() {
        let spec = GridSpec::new(
            1,
            vec![ShellSpec { radius: 0.5, directions: 2, weight: 1.0 }],
            CutoffSpec::sharp(0.1, 0.0),
        );
        assert!(matches!(ModeGrid::build(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn three_dim_frames_orthonormal() {
        let spec = GridSpec::new(
            3,
            vec![ShellSpec { radius: 1.0, directions: 6, weight: 1.0 }],
            CutoffSpec::sharp(0.1, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid.pol_count(), 2);
        // Gram matrix of (khat, eps1, eps2) per direction must be identity.
        for pair in grid.modes().chunks(2) {
            let m1 = &pair[0];
            let m2 = &pair[1];
            let r = m1.omega();
            let khat = [m1.k[0] / r, m1.k[1] / r, m1.k[2] / r];
            let frame = [khat, m1.eps, m2.eps];
            for a in 0..3 {
                for b in 0..3 {
                    let dot: f64 = (0..3).map(|l| frame[a][l] * frame[b][l]).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (dot - expect).abs() < 1e-14,
                        "gram defect at ({a},{b}): {dot}"
                    );
                }
            }
        }
    }

    #[test]
    fn omega_norm_examples() {
        let grid = two_shell_1d();
        let zero = PhotonFunction::zeros(&grid);
        assert_eq!(zero.omega_norm(&grid), 0.0);

        // Single mode with |k| = 1, weight 1, amplitude 1 gives sqrt(2).
        let spec = GridSpec::new(
            1,
            vec![ShellSpec { radius: 1.0, directions: 1, weight: 1.0 }],
            CutoffSpec::sharp(0.1, 2.0),
        );
        let single = ModeGrid::build(&spec).unwrap();
        let h = PhotonFunction::indicator(&single, 0);
        assert!((h.omega_norm(&single) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn omega_norm_matches_direct_sum() {
        let spec = GridSpec::new(
            2,
            vec![
                ShellSpec { radius: 0.7, directions: 4, weight: 0.9 },
                ShellSpec { radius: 1.3, directions: 4, weight: 1.7 },
            ],
            CutoffSpec::sharp(0.1, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        assert_eq!(grid.len(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = PhotonFunction::from_fn(&grid, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut brute = 0.0;
        for (i, m) in grid.modes().iter().enumerate() {
            brute += m.weight * h.value(i).norm_sqr() * (1.0 + 1.0 / m.omega());
        }
        assert!((h.omega_norm(&grid) - brute.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn omega_norm_absolutely_homogeneous() {
        let grid = two_shell_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = PhotonFunction::from_fn(&grid, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        for c in [Complex64::new(2.5, 0.0), Complex64::new(0.0, -1.3), Complex64::new(-0.7, 0.2)]
        {
            let lhs = h.scaled(c).omega_norm(&grid);
            let rhs = c.norm() * h.omega_norm(&grid);
            assert!((lhs - rhs).abs() < 1e-13 * rhs.max(1.0));
        }
    }

    #[test]
    fn transversality_of_g() {
        let spec = GridSpec::new(
            3,
            vec![ShellSpec { radius: 1.0, directions: 8, weight: 1.0 }],
            CutoffSpec::sharp(1.0, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        let x = [0.3, -0.4, 0.9];
        for i in 0..grid.len() {
            let g = form_factor_g(&grid, i, &x);
            let m = grid.mode(i);
            let dot = g[0] * m.k[0] + g[1] * m.k[1] + g[2] * m.k[2];
            assert!(dot.norm() < 1e-15);
        }
    }

    #[test]
    fn form_factor_hand_value() {
        // k = (0,0,1): the frame picks eps1 = (1,0,0), eps2 = khat x eps1 = (0,1,0).
        let spec = GridSpec::new(
            3,
            vec![ShellSpec { radius: 1.0, directions: 2, weight: 1.0 }],
            CutoffSpec::sharp(1.0, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        let m = grid.mode(0);
        assert_eq!(m.k, [0.0, 0.0, 1.0]);
        assert_eq!(m.eps, [1.0, 0.0, 0.0]);
        // kappa = 1 inside the cutoff because the charge is 1.
        let x = [0.0; 3];
        let g = form_factor_g(&grid, 0, &x);
        let c = (2.0 * PI).powf(-1.5);
        assert!((g[0] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!(g[1].norm() < 1e-15 && g[2].norm() < 1e-15);
        // (-i k) ^ eps = -i (0,0,1) x (1,0,0) = (0,-i,0).
        let h = form_factor_h(&grid, 0, &x);
        assert!(h[0].norm() < 1e-15);
        assert!((h[1] - Complex64::new(0.0, -c)).norm() < 1e-15);
        assert!(h[2].norm() < 1e-15);
    }

    #[test]
    fn form_factor_h_zero_below_three_dims() {
        let grid = two_shell_1d();
        let h = form_factor_h(&grid, 0, &[0.1, 0.0, 0.0]);
        assert!(h.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn zero_cutoff_zeroes_form_factors() {
        let spec = GridSpec::new(
            3,
            vec![ShellSpec { radius: 1.0, directions: 6, weight: 1.0 }],
            CutoffSpec::sharp(0.0, 2.0),
        );
        let grid = ModeGrid::build(&spec).unwrap();
        let g = form_factor_g(&grid, 3, &[0.2, 0.1, -0.5]);
        let h = form_factor_h(&grid, 3, &[0.2, 0.1, -0.5]);
        assert!(g.iter().chain(h.iter()).all(|c| c.norm() == 0.0));
    }

    #[test]
    fn shell_pairs_are_exactly_equal_radius_pairs() {
        let grid = two_shell_1d();
        let pairs = grid.shared_shell_pairs();
        // Exhaustive cross-check against a quadratic scan.
        let mut brute = Vec::new();
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                if grid.omega(i) == grid.omega(j) {
                    brute.push((i, j));
                }
            }
        }
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(sorted, brute);
        assert!(grid.has_shared_shell());
    }

    proptest::proptest! {
        #[test]
        fn omega_norm_homogeneity_property(
            re in -5.0..5.0f64,
            im in -5.0..5.0f64,
            seed in 0u64..512,
        ) {
            let grid = two_shell_1d();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = PhotonFunction::from_fn(&grid, |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let c = Complex64::new(re, im);
            let lhs = h.scaled(c).omega_norm(&grid);
            let rhs = c.norm() * h.omega_norm(&grid);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.max(1.0));
        }

        #[test]
        fn dump_parse_round_trip_property(
            dim in 1usize..=3,
            radii in proptest::collection::vec(0.05f64..3.0, 1..4),
            charge in 0.0f64..1.0,
        ) {
            let shells = radii
                .iter()
                .map(|&radius| ShellSpec {
                    radius,
                    directions: if dim == 1 { 2 } else { 3 },
                    weight: 1.0,
                })
                .collect();
            let spec = GridSpec::new(dim, shells, CutoffSpec::sharp(charge, 2.0));
            let grid = ModeGrid::build(&spec).unwrap();
            let reloaded =
                ModeGrid::parse_table(&grid.dump_table(), grid.momentum_floor()).unwrap();
            proptest::prop_assert_eq!(reloaded.len(), grid.len());
            for (a, b) in grid.modes().iter().zip(reloaded.modes()) {
                proptest::prop_assert_eq!(a.k, b.k);
                proptest::prop_assert_eq!(a.weight, b.weight);
                proptest::prop_assert_eq!(a.cutoff, b.cutoff);
                proptest::prop_assert_eq!(a.eps, b.eps);
            }
            proptest::prop_assert_eq!(reloaded.shells().len(), grid.shells().len());
        }
    }

    #[test]
    fn dump_parse_round_trip() {
        let spec = GridSpec::new(
            3,
            vec![
                ShellSpec { radius: 0.8, directions: 6, weight: 1.2 },
                ShellSpec { radius: 1.4, directions: 2, weight: 0.4 },
            ],
            CutoffSpec { charge: 0.3, uv_cutoff: 2.0, profile: CutoffProfile::Gaussian },
        );
        let grid = ModeGrid::build(&spec).unwrap();
        let text = grid.dump_table();
        let reloaded = ModeGrid::parse_table(&text, grid.momentum_floor()).unwrap();
        assert_eq!(reloaded.len(), grid.len());
        for (a, b) in grid.modes().iter().zip(reloaded.modes()) {
            assert_eq!(a.k, b.k);
            assert_eq!(a.polarization, b.polarization);
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.cutoff, b.cutoff);
            assert_eq!(a.eps, b.eps);
        }
        assert_eq!(reloaded.shells().len(), grid.shells().len());
    }
}
