//! Experiment configuration: a flat, human-editable TOML file with four
//! sections (`[model]`, `[discretization]`, `[solver]`, `[experiment]`).
//! Every key has a documented default; parse -> serialize -> parse is
//! idempotent, which the runner relies on for reproducible config echoes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hamiltonian::System;
use crate::matter::{MatterSpace, ParticleGrid, PotentialSpec, Spin};
use crate::modes::{
    CutoffProfile, CutoffSpec, GridSpec, ModeGrid, PhotonFunction, ShellSpec,
};
use crate::spectral::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinChoice {
    Zero,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffChoice {
    Sharp,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Boundary-value eta sweeps over the configured mode pairs.
    Boundary,
    /// Pull-through residuals across the coupling sweep and both photon
    /// cutoffs `n_max` and `n_max - 1`.
    PullThrough,
}

/// Named potential parameters; which ones are read depends on
/// `model.potential`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    /// `harmonic`: oscillator frequency (ground energy `d * frequency / 2`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// `double_well`: quartic coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quartic: Option<f64>,
    /// `double_well`: quadratic well depth coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<f64>,
    /// `soft_coulomb`: well depth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    /// `soft_coulomb`: softening length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub softening: Option<f64>,
    /// `tabulated`: path to a plain-text file with `x V` columns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Spatial dimension shared by photons and matter: 1, 2, or 3.
    pub dimension: usize,
    /// Particle count (1 or 2).
    pub particles: usize,
    pub spin: SpinChoice,
    /// Potential family: harmonic | box | double_well | soft_coulomb | tabulated.
    pub potential: String,
    pub potential_params: PotentialParams,
    /// Magnetic coupling strength; 2 is the standard-model value.
    pub mu: f64,
    /// Electric charge entering the cutoff function.
    pub charge: f64,
    /// Ultraviolet cutoff scale.
    pub uv_cutoff: f64,
    pub cutoff_profile: CutoffChoice,
    /// Modes with `|k|` at or below this are rejected.
    pub momentum_floor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dimension: 1,
            particles: 1,
            spin: SpinChoice::Zero,
            potential: "harmonic".to_string(),
            potential_params: PotentialParams { frequency: Some(1.0), ..Default::default() },
            mu: 2.0,
            charge: 0.1,
            uv_cutoff: 2.0,
            cutoff_profile: CutoffChoice::Sharp,
            momentum_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    /// Interior matter grid points per axis (Dirichlet box).
    pub matter_points: usize,
    /// Matter box side length.
    pub matter_extent: f64,
    /// Energy-shell radii of the photon grid.
    pub mode_shells: Vec<f64>,
    /// Directions per shell (same length as `mode_shells`).
    pub modes_per_shell: Vec<usize>,
    /// Total quadrature weight per shell (same length as `mode_shells`).
    pub shell_weights: Vec<f64>,
    /// Total photon-number cutoff `n_max >= 1`.
    pub photon_cutoff: usize,
    /// Hard cap on the total Hilbert-space dimension.
    pub max_dimension: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            matter_points: 32,
            matter_extent: 16.0,
            mode_shells: vec![0.5, 1.0],
            modes_per_shell: vec![2, 2],
            shell_weights: vec![1.0, 1.0],
            photon_cutoff: 2,
            max_dimension: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub ground_tol: f64,
    pub solve_tol: f64,
    pub max_iterations: usize,
    pub dense_threshold: usize,
    pub gap_floor: f64,
    pub tail_tol: f64,
    pub quad_rel_tol: f64,
    pub stability_tol: f64,
    /// Eta schedule for boundary values and T-matrix sweeps, any order.
    pub eta_schedule: Vec<f64>,
    /// Damping schedule for asymptotic-operator sweeps.
    pub eps_schedule: Vec<f64>,
    /// Global scale on the verification budgets; 0 forces every check to
    /// fail (used to exercise the failure exit path).
    pub verify_tolerance_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            ground_tol: 1e-12,
            solve_tol: 1e-12,
            max_iterations: 800,
            dense_threshold: 5000,
            gap_floor: 1e-10,
            tail_tol: 1e-12,
            quad_rel_tol: 1e-9,
            stability_tol: 5e-2,
            eta_schedule: vec![0.4, 0.2, 0.1, 0.05],
            eps_schedule: vec![0.4, 0.2, 0.1],
            verify_tolerance_scale: 1.0,
        }
    }
}

/// One complex amplitude of a photon wave packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketEntry {
    pub mode: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seed for every randomized suite; the reproducibility contract is
    /// keyed on (config, seed).
    pub seed: u64,
    /// Mode pairs for T-matrix and boundary sweeps; absent means all pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_pairs: Option<Vec<[usize; 2]>>,
    /// Outgoing wave packet; absent means the first grid mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_f: Option<Vec<PacketEntry>>,
    /// Incoming wave packet; absent means the second grid mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_h: Option<Vec<PacketEntry>>,
    pub sweep: SweepKind,
    /// Write the assembled Hamiltonian as a coordinate-format text file
    /// (`row col Re Im` per line) during `ground-state`.
    pub dump_hamiltonian: bool,
    /// Charges for the pull-through sweep.
    pub coupling_sweep: Vec<f64>,
    /// Shell radii for the T-matrix continuity scan along a ray; empty
    /// disables the scan.
    pub ray_scan_radii: Vec<f64>,
    /// Times probed by the intertwining drift report.
    pub intertwine_times: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            mode_pairs: None,
            packet_f: None,
            packet_h: None,
            sweep: SweepKind::Boundary,
            dump_hamiltonian: false,
            coupling_sweep: vec![0.02, 0.05, 0.1],
            ray_scan_radii: Vec::new(),
            intertwine_times: vec![0.5, 1.0, 2.0],
        }
    }
}

/// The complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub discretization: DiscretizationConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| Error::config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.discretization;
        if d.mode_shells.is_empty() {
            return Err(Error::config("discretization.mode_shells must be non-empty"));
        }
        if d.modes_per_shell.len() != d.mode_shells.len()
            || d.shell_weights.len() != d.mode_shells.len()
        {
            return Err(Error::config(
                "modes_per_shell and shell_weights must match mode_shells in length",
            ));
        }
        if d.photon_cutoff < 1 {
            return Err(Error::config("discretization.photon_cutoff must be at least 1"));
        }
        for v in [
            ("solver.ground_tol", self.solver.ground_tol),
            ("solver.solve_tol", self.solver.solve_tol),
            ("solver.tail_tol", self.solver.tail_tol),
            ("solver.quad_rel_tol", self.solver.quad_rel_tol),
            ("model.uv_cutoff", self.model.uv_cutoff),
            ("discretization.matter_extent", d.matter_extent),
        ] {
            if !(v.1.is_finite() && v.1 > 0.0) {
                return Err(Error::config(format!("{} must be positive and finite", v.0)));
            }
        }
        if !self.model.mu.is_finite() || !self.model.charge.is_finite() {
            return Err(Error::config("model.mu and model.charge must be finite"));
        }
        if self.solver.eta_schedule.len() < 2 || self.solver.eta_schedule.iter().any(|&e| e <= 0.0)
        {
            return Err(Error::config(
                "solver.eta_schedule needs at least two positive entries",
            ));
        }
        if self.solver.eps_schedule.is_empty()
            || self.solver.eps_schedule.iter().any(|&e| e <= 0.0)
        {
            return Err(Error::config("solver.eps_schedule needs positive entries"));
        }
        if self.solver.verify_tolerance_scale < 0.0 {
            return Err(Error::config("solver.verify_tolerance_scale must be >= 0"));
        }
        // TOML integers are i64; larger seeds would not round-trip.
        if self.experiment.seed > i64::MAX as u64 {
            return Err(Error::config("experiment.seed must fit in a signed 64-bit integer"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        let shells = self
            .discretization
            .mode_shells
            .iter()
            .zip(&self.discretization.modes_per_shell)
            .zip(&self.discretization.shell_weights)
            .map(|((&radius, &directions), &weight)| ShellSpec { radius, directions, weight })
            .collect();
        GridSpec {
            dim: self.model.dimension,
            shells,
            cutoff: CutoffSpec {
                charge: self.model.charge,
                uv_cutoff: self.model.uv_cutoff,
                profile: match self.model.cutoff_profile {
                    CutoffChoice::Sharp => CutoffProfile::Sharp,
                    CutoffChoice::Gaussian => CutoffProfile::Gaussian,
                },
            },
            momentum_floor: self.model.momentum_floor,
        }
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let p = &self.model.potential_params;
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                Error::config(format!(
                    "potential '{}' needs model.potential_params.{field}",
                    self.model.potential
                ))
            })
        };
        match self.model.potential.as_str() {
            "box" => Ok(PotentialSpec::Box),
            "harmonic" => Ok(PotentialSpec::Harmonic { frequency: need("frequency", p.frequency)? }),
            "double_well" => Ok(PotentialSpec::DoubleWell {
                quartic: need("quartic", p.quartic)?,
                quadratic: need("quadratic", p.quadratic)?,
            }),
            "soft_coulomb" => Ok(PotentialSpec::SoftCoulomb {
                depth: need("depth", p.depth)?,
                softening: need("softening", p.softening)?,
            }),
            "tabulated" => {
                let file = p.file.as_ref().ok_or_else(|| {
                    Error::config("potential 'tabulated' needs model.potential_params.file")
                })?;
                let text = std::fs::read_to_string(file).map_err(|e| {
                    Error::config(format!("cannot read potential table {file}: {e}"))
                })?;
                let mut samples = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let mut cols = line.split_whitespace();
                    let parse = |c: Option<&str>| -> Result<f64> {
                        c.and_then(|s| s.parse().ok()).ok_or_else(|| {
                            Error::config(format!(
                                "potential table {file} line {}: expected `x V` columns",
                                lineno + 1
                            ))
                        })
                    };
                    let x = parse(cols.next())?;
                    let v = parse(cols.next())?;
                    samples.push((x, v));
                }
                Ok(PotentialSpec::Tabulated { samples })
            }
            other => Err(Error::config(format!(
                "unknown potential '{other}'; expected harmonic | box | double_well | \
                 soft_coulomb | tabulated"
            ))),
        }
    }

    pub fn particle_grid(&self) -> ParticleGrid {
        ParticleGrid {
            dim: self.model.dimension,
            points: self.discretization.matter_points,
            extent: self.discretization.matter_extent,
            particles: self.model.particles,
            spin: match self.model.spin {
                SpinChoice::Zero => Spin::Zero,
                SpinChoice::Half => Spin::Half,
            },
        }
    }

    /// Build the full coupled system described by this configuration.
    pub fn build_system(&self) -> Result<System> {
        self.validate()?;
        let grid = ModeGrid::build(&self.grid_spec())?;
        let fock = FockBasis::new(&grid, self.discretization.photon_cutoff)?;
        let matter = MatterSpace::build(self.particle_grid(), &self.potential_spec()?)?;
        System::build(grid, fock, matter, self.model.mu, self.discretization.max_dimension)
    }

    pub fn solver_options(&self, seed_override: Option<u64>) -> SolverOptions {
        SolverOptions {
            ground_tol: self.solver.ground_tol,
            solve_tol: self.solver.solve_tol,
            max_iter: self.solver.max_iterations,
            dense_threshold: self.solver.dense_threshold,
            gap_floor: self.solver.gap_floor,
            tail_tol: self.solver.tail_tol,
            quad_rel_tol: self.solver.quad_rel_tol,
            stability_tol: self.solver.stability_tol,
            seed: seed_override.unwrap_or(self.experiment.seed),
        }
    }

    /// Resolve a packet table into a photon function on the grid; `fallback`
    /// names the single mode used when the table is absent.
    pub fn packet(
        &self,
        entries: Option<&[PacketEntry]>,
        grid: &ModeGrid,
        fallback: usize,
    ) -> Result<PhotonFunction> {
        match entries {
            None => {
                if fallback >= grid.len() {
                    return Err(Error::config(format!(
                        "default packet mode {fallback} is outside the {}-mode grid",
                        grid.len()
                    )));
                }
                Ok(PhotonFunction::indicator(grid, fallback))
            }
            Some(list) => {
                let mut values = vec![num_complex::Complex64::default(); grid.len()];
                for e in list {
                    if e.mode >= grid.len() {
                        return Err(Error::config(format!(
                            "packet mode {} is outside the {}-mode grid",
                            e.mode,
                            grid.len()
                        )));
                    }
                    values[e.mode] += num_complex::Complex64::new(e.re, e.im);
                }
                PhotonFunction::from_values(grid, values)
            }
        }
    }

    /// The mode pairs a T-matrix or boundary sweep runs over.
    pub fn mode_pairs(&self, grid: &ModeGrid) -> Result<Vec<(usize, usize)>> {
        match &self.experiment.mode_pairs {
            Some(list) => {
                let mut pairs = Vec::with_capacity(list.len());
                for &[i, j] in list {
                    if i >= grid.len() || j >= grid.len() {
                        return Err(Error::config(format!(
                            "mode pair ({i}, {j}) is outside the {}-mode grid",
                            grid.len()
                        )));
                    }
                    pairs.push((i, j));
                }
                Ok(pairs)
            }
            None => Ok((0..grid.len())
                .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
                .collect()),
        }
    }
}

/// Generated key reference: the default configuration rendered as TOML with
/// section commentary.
pub fn config_reference() -> String {
    let defaults = RunConfig::default().to_toml_string();
    format!(
        "# Configuration reference. Every key below is shown with its default\n\
         # value; omitted keys take these defaults.\n\
         #\n\
         # [model]            physical model: dimension (1|2|3), particles (1|2),\n\
         #                    spin (zero|half; half needs dimension 3 when coupled),\n\
         #                    potential family + potential_params, magnetic mu,\n\
         #                    charge and uv_cutoff entering kappa, cutoff_profile\n\
         #                    (sharp|gaussian), infrared momentum_floor.\n\
         # [discretization]   matter grid (points per axis, box extent), photon\n\
         #                    shells (radius / directions / total weight triples),\n\
         #                    total photon cutoff, dimension hard cap.\n\
         # [solver]           tolerances and schedules: ground_tol, solve_tol,\n\
         #                    max_iterations, dense_threshold, gap_floor, tail_tol,\n\
         #                    quad_rel_tol, stability_tol, eta_schedule (boundary\n\
         #                    values), eps_schedule (asymptotic damping),\n\
         #                    verify_tolerance_scale (0 forces failures).\n\
         # [experiment]       seed, optional mode_pairs ([[i, j], ...]), optional\n\
         #                    packet_f / packet_h ({{ mode, re, im }} tables), sweep\n\
         #                    kind (boundary|pull-through), coupling_sweep,\n\
         #                    ray_scan_radii (T-matrix continuity scan),\n\
         #                    intertwine_times.\n\n{defaults}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_a_system() {
        let config = RunConfig::default();
        let system = config.build_system().unwrap();
        assert_eq!(system.modes().len(), 4);
        assert_eq!(system.dim(), 32 * 15);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let config = RunConfig::default();
        let text1 = config.to_toml_string();
        let parsed = RunConfig::from_toml_str(&text1).unwrap();
        let text2 = parsed.to_toml_string();
        assert_eq!(text1, text2);
        assert_eq!(config, parsed);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_idempotence_property(
            charge in 0.0f64..1.0,
            mu in -4.0f64..4.0,
            points in 4usize..64,
            cutoff in 1usize..4,
            seed in 0u64..(i64::MAX as u64),
        ) {
            let mut config = RunConfig::default();
            config.model.charge = charge;
            config.model.mu = mu;
            config.discretization.matter_points = points;
            config.discretization.photon_cutoff = cutoff;
            config.experiment.seed = seed;
            let text1 = config.to_toml_string();
            let parsed = RunConfig::from_toml_str(&text1).unwrap();
            let text2 = parsed.to_toml_string();
            proptest::prop_assert_eq!(&text1, &text2);
            proptest::prop_assert_eq!(config, parsed);
        }
    }

    #[test]
    fn tabulated_potential_file_round_trips_through_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("potential.txt");
        std::fs::write(&path, "# x V\n-10.0 2.0\n0.0 -1.0\n10.0 2.0\n").unwrap();
        let mut config = RunConfig::default();
        config.model.potential = "tabulated".into();
        config.model.potential_params =
            PotentialParams { file: Some(path.display().to_string()), ..Default::default() };
        let system = config.build_system().unwrap();
        assert!(system.matter().potential().min_value < 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_field_name() {
        let err = RunConfig::from_toml_str("[model]\ncharje = 0.1\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("charje"), "diagnostic should name the field: {msg}");
    }

    #[test]
    fn mismatched_shell_arrays_rejected() {
        let text = "[discretization]\nmode_shells = [0.5, 1.0]\nmodes_per_shell = [2]\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn potential_params_are_checked() {
        let mut config = RunConfig::default();
        config.model.potential = "double_well".into();
        config.model.potential_params = PotentialParams::default();
        let err = config.potential_spec().unwrap_err();
        assert!(format!("{err}").contains("quartic"));
    }

    #[test]
    fn packets_resolve_and_validate() {
        let config = RunConfig::default();
        let grid = ModeGrid::build(&config.grid_spec()).unwrap();
        let f = config.packet(None, &grid, 0).unwrap();
        assert_eq!(f.value(0).re, 1.0);
        let entries = vec![PacketEntry { mode: 2, re: 0.5, im: -0.25 }];
        let h = config.packet(Some(&entries), &grid, 0).unwrap();
        assert_eq!(h.value(2), num_complex::Complex64::new(0.5, -0.25));
        let bad = vec![PacketEntry { mode: 99, re: 1.0, im: 0.0 }];
        assert!(config.packet(Some(&bad), &grid, 0).is_err());
    }

    #[test]
    fn default_pairs_cover_the_grid() {
        let config = RunConfig::default();
        let grid = ModeGrid::build(&config.grid_spec()).unwrap();
        let pairs = config.mode_pairs(&grid).unwrap();
        assert_eq!(pairs.len(), grid.len() * grid.len());
    }

    #[test]
    fn reference_lists_all_sections() {
        let text = config_reference();
        for section in ["[model]", "[discretization]", "[solver]", "[experiment]"] {
            assert!(text.contains(section), "missing {section}");
        }
        // The reference body parses back as a valid config.
        let body: String = text.lines().filter(|l| !l.trim_start().starts_with('#')).collect::<Vec<_>>().join("\n");
        assert!(RunConfig::from_toml_str(&body).is_ok());
    }
}
