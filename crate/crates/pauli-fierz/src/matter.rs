//! Finite-difference discretization of the matter (particle) space.
//!
//! Particles live on a Dirichlet box `[-L/2, L/2]^d` per coordinate with
//! second-order central stencils: the Laplacian uses the compact three-point
//! stencil and momentum the antisymmetric first difference, both Hermitian
//! with respect to the plain grid inner product. Spin-1/2 slots, when
//! enabled, multiply the spatial grid by a factor of 2 per particle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVector, OperatorHandle};

/// Particle spin; `Half` enables the Pauli operators and, in three
/// dimensions, the magnetic coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Zero,
    Half,
}

impl Spin {
    pub fn multiplicity(&self) -> usize {
        match self {
            Spin::Zero => 1,
            Spin::Half => 2,
        }
    }
}

/// Geometry of the discretized `N`-particle configuration space.
#[derive(Debug, Clone)]
pub struct ParticleGrid {
    /// Spatial dimension, shared with the photon mode grid.
    pub dim: usize,
    /// Interior grid points per axis (Dirichlet boundary).
    pub points: usize,
    /// Box side length; grid spacing is `extent / (points + 1)`.
    pub extent: f64,
    /// Particle count; at most 2 in this release.
    pub particles: usize,
    pub spin: Spin,
}

impl ParticleGrid {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::config(format!("matter dimension must be 1..3, got {}", self.dim)));
        }
        if self.points < 3 {
            return Err(Error::config("matter grid needs at least 3 points per axis"));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::config(format!("matter extent must be positive, got {}", self.extent)));
        }
        if self.particles == 0 || self.particles > 2 {
            return Err(Error::config(format!(
                "particle count must be 1 or 2 (N >= 3 is refused), got {}",
                self.particles
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.extent / (self.points + 1) as f64
    }

    /// Number of one-dimensional axes, `d * N`.
    pub fn axes(&self) -> usize {
        self.dim * self.particles
    }

    pub fn spatial_dim(&self) -> usize {
        self.points.pow(self.axes() as u32)
    }

    pub fn spin_dim(&self) -> usize {
        self.spin.multiplicity().pow(self.particles as u32)
    }

    pub fn matter_dim(&self) -> usize {
        self.spatial_dim() * self.spin_dim()
    }
}

/// Named potential families selectable from configuration.
#[derive(Debug, Clone)]
pub enum PotentialSpec {
    /// `V(x) = 0` inside the Dirichlet box.
    Box,
    /// `V(x) = frequency^2 |x|^2 / 4` per particle. With the kinetic term
    /// `p^2` (no half), the continuum ground energy is `d * frequency / 2`.
    Harmonic { frequency: f64 },
    /// `V(x) = quartic |x|^4 - quadratic |x|^2` per particle; dips below
    /// zero, giving a nontrivial negative part.
    DoubleWell { quartic: f64, quadratic: f64 },
    /// `V(x) = -depth / sqrt(|x|^2 + softening^2)` per particle.
    SoftCoulomb { depth: f64, softening: f64 },
    /// Piecewise-linear interpolation of `(x, V)` samples; one-dimensional
    /// matter only.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl PotentialSpec {
    fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Box => "box",
            PotentialSpec::Harmonic { .. } => "harmonic",
            PotentialSpec::DoubleWell { .. } => "double_well",
            PotentialSpec::SoftCoulomb { .. } => "soft_coulomb",
            PotentialSpec::Tabulated { .. } => "tabulated",
        }
    }

    /// Single-particle value at position `x` (first `dim` entries used).
    fn evaluate(&self, x: &[f64; 3], dim: usize) -> Result<f64> {
        let r2: f64 = x[..dim].iter().map(|c| c * c).sum();
        match self {
            PotentialSpec::Box => Ok(0.0),
            PotentialSpec::Harmonic { frequency } => Ok(0.25 * frequency * frequency * r2),
            PotentialSpec::DoubleWell { quartic, quadratic } => {
                Ok(quartic * r2 * r2 - quadratic * r2)
            }
            PotentialSpec::SoftCoulomb { depth, softening } => {
                Ok(-depth / (r2 + softening * softening).sqrt())
            }
            PotentialSpec::Tabulated { samples } => {
                if dim != 1 {
                    return Err(Error::config("tabulated potentials require dim = 1"));
                }
                let xv = x[0];
                if samples.len() < 2 {
                    return Err(Error::config("tabulated potential needs at least 2 samples"));
                }
                if xv < samples[0].0 || xv > samples[samples.len() - 1].0 {
                    return Err(Error::config(format!(
                        "tabulated potential does not cover grid point x = {xv}"
                    )));
                }
                let pos = samples.partition_point(|&(sx, _)| sx <= xv).min(samples.len() - 1);
                let (x0, v0) = samples[pos - 1];
                let (x1, v1) = samples[pos];
                if x1 == x0 {
                    return Ok(v0);
                }
                Ok(v0 + (v1 - v0) * (xv - x0) / (x1 - x0))
            }
        }
    }
}

/// Potential evaluated on the spatial grid (summed over particles).
#[derive(Debug)]
pub struct Potential {
    pub name: String,
    values: Vec<f64>,
    pub min_value: f64,
}

impl Potential {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise negative part `max(0, -V)`.
    pub fn negative_part(&self) -> Vec<f64> {
        self.values.iter().map(|&v| (-v).max(0.0)).collect()
    }
}

#[derive(Debug)]
struct MatterCore {
    grid: ParticleGrid,
    potential: Potential,
    /// Strides of each axis in the spatial index, axis-major, last fastest.
    strides: Vec<usize>,
    coords: Vec<f64>,
    spatial_dim: usize,
    spin_dim: usize,
}

/// Immutable matter-space bundle: grid geometry plus the potential table.
#[derive(Debug, Clone)]
pub struct MatterSpace {
    core: Arc<MatterCore>,
}

impl MatterSpace {
    pub fn build(grid: ParticleGrid, spec: &PotentialSpec) -> Result<Self> {
        grid.validate()?;
        if matches!(spec, PotentialSpec::Tabulated { .. }) && grid.dim != 1 {
            return Err(Error::config("tabulated potentials require dim = 1"));
        }
        if let PotentialSpec::Tabulated { samples } = spec {
            let sorted = samples.windows(2).all(|w| w[0].0 <= w[1].0);
            if !sorted {
                return Err(Error::config("tabulated potential samples must be sorted in x"));
            }
        }
        let axes = grid.axes();
        let mut strides = vec![0usize; axes];
        let mut s = 1usize;
        for a in (0..axes).rev() {
            strides[a] = s;
            s *= grid.points;
        }
        let h = grid.spacing();
        let coords: Vec<f64> =
            (0..grid.points).map(|m| -grid.extent / 2.0 + (m + 1) as f64 * h).collect();
        let spatial_dim = grid.spatial_dim();
        let spin_dim = grid.spin_dim();

        let mut values = vec![0.0f64; spatial_dim];
        let mut min_value = f64::INFINITY;
        for s in 0..spatial_dim {
            let mut acc = 0.0;
            for j in 0..grid.particles {
                let mut x = [0.0f64; 3];
                for l in 0..grid.dim {
                    let axis = j * grid.dim + l;
                    let m = (s / strides[axis]) % grid.points;
                    x[l] = coords[m];
                }
                acc += spec.evaluate(&x, grid.dim)?;
            }
            values[s] = acc;
            min_value = min_value.min(acc);
        }
        if !min_value.is_finite() {
            return Err(Error::config("potential is unbounded below on the grid"));
        }
        let potential = Potential { name: spec.name().to_string(), values, min_value };
        let space = MatterSpace {
            core: Arc::new(MatterCore { grid, potential, strides, coords, spatial_dim, spin_dim }),
        };
        space.check_exchange_symmetry()?;
        Ok(space)
    }

    pub fn grid(&self) -> &ParticleGrid {
        &self.core.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.core.potential
    }

    pub fn dim(&self) -> usize {
        self.core.grid.dim
    }

    pub fn spatial_dim(&self) -> usize {
        self.core.spatial_dim
    }

    pub fn spin_dim(&self) -> usize {
        self.core.spin_dim
    }

    pub fn matter_dim(&self) -> usize {
        self.core.spatial_dim * self.core.spin_dim
    }

    /// Position of particle `j` at a spatial index.
    pub fn position(&self, spatial: usize, particle: usize) -> [f64; 3] {
        let core = &self.core;
        let mut x = [0.0f64; 3];
        for l in 0..core.grid.dim {
            let axis = particle * core.grid.dim + l;
            let m = (spatial / core.strides[axis]) % core.grid.points;
            x[l] = core.coords[m];
        }
        x
    }

    /// Exchange symmetry of the potential for two-particle grids, checked
    /// exactly on a deterministic sample of index pairs.
    fn check_exchange_symmetry(&self) -> Result<()> {
        let core = &self.core;
        if core.grid.particles != 2 {
            return Ok(());
        }
        let block = core.grid.points.pow(core.grid.dim as u32);
        let step = (core.spatial_dim / 257).max(1);
        for s in (0..core.spatial_dim).step_by(step) {
            let s1 = s / block;
            let s2 = s % block;
            let swapped = s2 * block + s1;
            if core.potential.values[s] != core.potential.values[swapped] {
                return Err(Error::config(
                    "potential is not symmetric under particle exchange",
                ));
            }
        }
        Ok(())
    }

    /// `dst += scale * (-Laplacian) src` over all particle axes.
    pub(crate) fn add_neg_laplacian(&self, src: &[Complex64], dst: &mut [Complex64], scale: f64) {
        let core = &self.core;
        let h2 = core.grid.spacing() * core.grid.spacing();
        let c = scale / h2;
        let sd = core.spin_dim;
        let points = core.grid.points;
        for (a, &stride) in core.strides.iter().enumerate() {
            let _ = a;
            let mstride = stride * sd;
            for s in 0..core.spatial_dim {
                let m = (s / stride) % points;
                let base = s * sd;
                for q in 0..sd {
                    let mut acc = 2.0 * src[base + q];
                    if m > 0 {
                        acc -= src[base - mstride + q];
                    }
                    if m + 1 < points {
                        acc += -src[base + mstride + q];
                    }
                    dst[base + q] += c * acc;
                }
            }
        }
    }

    /// `dst += scale * p_axis src` with `p = -i d/dx` (central difference).
    pub(crate) fn add_momentum(
        &self,
        axis: usize,
        src: &[Complex64],
        dst: &mut [Complex64],
        scale: Complex64,
    ) {
        let core = &self.core;
        let stride = core.strides[axis];
        let points = core.grid.points;
        let sd = core.spin_dim;
        let mstride = stride * sd;
        // -i / (2h) folded into the scale.
        let c = scale * Complex64::new(0.0, -0.5 / core.grid.spacing());
        for s in 0..core.spatial_dim {
            let m = (s / stride) % points;
            let base = s * sd;
            for q in 0..sd {
                let mut acc = Complex64::default();
                if m + 1 < points {
                    acc += src[base + mstride + q];
                }
                if m > 0 {
                    acc -= src[base - mstride + q];
                }
                dst[base + q] += c * acc;
            }
        }
    }

    /// `dst += scale * diag(values) src`, spatial diagonal, spin identity.
    pub(crate) fn add_spatial_diag(
        values: &[Complex64],
        spin_dim: usize,
        src: &[Complex64],
        dst: &mut [Complex64],
        scale: Complex64,
    ) {
        for (s, &v) in values.iter().enumerate() {
            let c = scale * v;
            let base = s * spin_dim;
            for q in 0..spin_dim {
                dst[base + q] += c * src[base + q];
            }
        }
    }

    /// `dst += scale * sum_l field_l(x) (sigma_l / 2 on particle j) src`,
    /// where `field` packs three complex coefficients per spatial point.
    pub(crate) fn add_spin_mix(
        &self,
        particle: usize,
        field: &[[Complex64; 3]],
        src: &[Complex64],
        dst: &mut [Complex64],
        scale: Complex64,
    ) {
        let core = &self.core;
        if core.grid.spin == Spin::Zero {
            return;
        }
        let sd = core.spin_dim;
        let bit = core.grid.particles - 1 - particle;
        let flip_mask = 1usize << bit;
        let half = Complex64::new(0.5, 0.0);
        for s in 0..core.spatial_dim {
            let [c1, c2, c3] = field[s];
            let base = s * sd;
            for q in 0..sd {
                let up = (q >> bit) & 1 == 0;
                let amp = src[base + q];
                if amp == Complex64::default() {
                    continue;
                }
                let sign = if up { 1.0 } else { -1.0 };
                // sigma_3 / 2 term, diagonal.
                dst[base + q] += scale * half * c3 * sign * amp;
                // sigma_1 / 2 and sigma_2 / 2 flip the spin bit.
                let qf = q ^ flip_mask;
                let s2 = Complex64::new(0.0, sign);
                dst[base + qf] += scale * half * (c1 + c2 * s2) * amp;
            }
        }
    }

    /// Hermitian handle for `-Laplacian` on the matter space.
    pub fn neg_laplacian_op(&self) -> OperatorHandle {
        let space = self.clone();
        let dim = self.matter_dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            space.add_neg_laplacian(v.as_slice(), out.as_mut_slice(), 1.0);
            out
        })
    }

    /// Momentum of particle `j` along `axis` (0-based within the dimension).
    pub fn momentum_op(&self, particle: usize, axis: usize) -> OperatorHandle {
        assert!(particle < self.core.grid.particles && axis < self.core.grid.dim);
        let space = self.clone();
        let global_axis = particle * self.core.grid.dim + axis;
        let dim = self.matter_dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            space.add_momentum(global_axis, v.as_slice(), out.as_mut_slice(), Complex64::new(1.0, 0.0));
            out
        })
    }

    /// Spin operator `(S_j)_l = sigma_l / 2` on particle `j`; the zero map
    /// for spinless grids.
    pub fn spin_op(&self, particle: usize, pauli_axis: usize) -> OperatorHandle {
        assert!(pauli_axis < 3);
        let dim = self.matter_dim();
        if self.core.grid.spin == Spin::Zero {
            return OperatorHandle::zero(dim);
        }
        let space = self.clone();
        let field: Arc<Vec<[Complex64; 3]>> = Arc::new(
            (0..self.spatial_dim())
                .map(|_| {
                    let mut f = [Complex64::default(); 3];
                    f[pauli_axis] = Complex64::new(1.0, 0.0);
                    f
                })
                .collect(),
        );
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            space.add_spin_mix(particle, &field, v.as_slice(), out.as_mut_slice(), Complex64::new(1.0, 0.0));
            out
        })
    }

    /// Multiplication by the potential.
    pub fn potential_op(&self) -> OperatorHandle {
        let space = self.clone();
        let dim = self.matter_dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            let vals = &space.core.potential.values;
            let sd = space.core.spin_dim;
            for (s, &val) in vals.iter().enumerate() {
                let base = s * sd;
                for q in 0..sd {
                    out[base + q] = val * v[base + q];
                }
            }
            out
        })
    }

    /// `-Laplacian + V` on the full matter space (spin identity).
    pub fn atomic_op(&self) -> OperatorHandle {
        let space = self.clone();
        let dim = self.matter_dim();
        OperatorHandle::hermitian(dim, move |v| {
            let mut out = CVector::zeros(dim);
            space.add_neg_laplacian(v.as_slice(), out.as_mut_slice(), 1.0);
            let vals = &space.core.potential.values;
            let sd = space.core.spin_dim;
            for (s, &val) in vals.iter().enumerate() {
                let base = s * sd;
                for q in 0..sd {
                    out[base + q] += val * v[base + q];
                }
            }
            out
        })
    }

    /// Dense real-symmetric assembly of `-Laplacian + V` on the spatial grid
    /// (the operator is spin-diagonal).
    pub fn atomic_matrix(&self) -> DMatrix<f64> {
        let n = self.spatial_dim();
        let core = &self.core;
        let h2 = core.grid.spacing() * core.grid.spacing();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for s in 0..n {
            m[(s, s)] = core.potential.values[s] + 2.0 * core.strides.len() as f64 / h2;
            for &stride in &core.strides {
                let idx = (s / stride) % core.grid.points;
                if idx > 0 {
                    m[(s, s - stride)] -= 1.0 / h2;
                }
                if idx + 1 < core.grid.points {
                    m[(s, s + stride)] -= 1.0 / h2;
                }
            }
        }
        m
    }

    /// Lowest `count` eigenpairs of `-Laplacian + V` on the spatial grid by
    /// dense diagonalization.
    pub fn atomic_eigensystem(&self, count: usize) -> Result<Vec<(f64, DVector<f64>)>> {
        let n = self.spatial_dim();
        if n > 6000 {
            return Err(Error::dimension(format!(
                "atomic eigensystem needs a dense solve of dimension {n} (limit 6000)"
            )));
        }
        let m = self.atomic_matrix();
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        Ok(order
            .into_iter()
            .take(count)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect())
    }
}
