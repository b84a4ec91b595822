//! Command implementations behind the `pfsim` binary: configuration-driven
//! experiments with structured reports, deterministic CSV/JSON artifacts,
//! and plot-script emission.
//!
//! Exit-code contract: 0 on success, 1 on configuration errors, 2 on solver
//! failures, 3 when a verification budget is missed.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, SweepKind};
use crate::error::{Error, Result};
use crate::fock::StateVector;
use crate::linalg::{self, CVector};
use crate::modes::{ModeGrid, PhotonFunction};
use crate::report::{atomic_write, fmt_f64, JsonComplex, RunReport};
use crate::scattering::{CookPath, Direction, ScatteringContext};
use crate::spectral::{
    self, abelian_limit, ground_state, halfline_phase_integral, verify_creation_bound,
    verify_form_bound, LadderKind, SolverOptions,
};

/// Calibrated ceilings for the creation-bound ratios
/// `|a#(h_1)..a#(h_n) (H_f + 1)^{-n/2}| / prod |h_i|_omega` over the random
/// draws of the verification suite. A calibration pre-run over desk grids
/// (50 draws, several seeds, n_max 2 and 3) measured maxima of 0.715 for
/// n = 1 and 0.56 for n = 2; the pinned ceilings carry a 2x margin.
pub const CREATION_BOUND_C1: f64 = 1.5;
pub const CREATION_BOUND_C2: f64 = 1.2;

/// Map a command outcome to the process exit code.
pub fn exit_code(outcome: &Result<RunReport>) -> i32 {
    match outcome {
        Ok(report) if report.passed => 0,
        Ok(_) => 3,
        Err(Error::Config(_)) => 1,
        Err(_) => 2,
    }
}

fn seeded_rng(opts: &SolverOptions, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn random_photon(grid: &ModeGrid, rng: &mut impl Rng) -> PhotonFunction {
    PhotonFunction::from_fn(grid, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `k` components and 1-based polarization of a mode as CSV fields.
fn mode_fields(grid: &ModeGrid, idx: usize) -> String {
    let m = grid.mode(idx);
    let mut out = String::new();
    for l in 0..grid.dim() {
        out.push_str(&fmt_f64(m.k[l]));
        out.push(',');
    }
    out.push_str(&(m.polarization + 1).to_string());
    out
}

fn write_lines(dir: &Path, name: &str, header: &str, lines: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + lines.len() * 80);
    text.push_str(header);
    text.push('\n');
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    atomic_write(&dir.join(name), text.as_bytes())
}

/// Compute the ground state and report the eigenpair summary.
pub fn cmd_ground_state(
    config: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let mut report = RunReport::new("ground-state", opts.seed, config.to_toml_string());
    let system = config.build_system()?;
    let h = system.hamiltonian();
    let gs = ground_state(&h.total, system.fock(), system.matter_dim(), &opts)?;
    report.check(
        "ground-state-residual",
        gs.residual,
        opts.ground_tol * gs.energy.abs().max(1.0) * 10.0,
        format!("E = {:.12e}, {} iterations", gs.energy, gs.iterations),
    );
    if system.dim() <= opts.dense_threshold {
        let eig = linalg::DenseEig::from_operator(&h.total);
        report.check(
            "iterative-vs-dense-energy",
            (gs.energy - eig.values[0]).abs(),
            1e-9,
            format!("dense E = {:.12e}", eig.values[0]),
        );
    }
    if config.model.charge == 0.0 {
        // Decoupled: the interacting ground energy is the atomic one.
        let atomic = spectral::atomic_ground(&system)?;
        report.check(
            "decoupled-vs-atomic-energy",
            (gs.energy - atomic.energy).abs(),
            1e-10,
            format!("atomic E = {:.12e}", atomic.energy),
        );
    }
    if config.experiment.dump_hamiltonian {
        let triplets = h.total.sparse_triplets(0.0);
        let mut text = String::with_capacity(triplets.len() * 40);
        for (i, j, v) in triplets {
            text.push_str(&format!("{i} {j} {} {}\n", fmt_f64(v.re), fmt_f64(v.im)));
        }
        atomic_write(&out_dir.join("hamiltonian.coo"), text.as_bytes())?;
        report.record_output("hamiltonian.coo");
    }
    if gs.degenerate {
        report.note(format!(
            "ground state flagged degenerate (gap {:.3e} below floor {:.3e}); \
             deterministic dense tie-break used",
            gs.gap, opts.gap_floor
        ));
    }

    #[derive(serde::Serialize)]
    struct GroundStateArtifact {
        energy: f64,
        residual: f64,
        gap: f64,
        degenerate: bool,
        top_sector_weight: f64,
        sector_weights: Vec<f64>,
        iterations: usize,
        method: String,
    }
    let artifact = GroundStateArtifact {
        energy: gs.energy,
        residual: gs.residual,
        gap: gs.gap,
        degenerate: gs.degenerate,
        top_sector_weight: gs.top_sector_weight,
        sector_weights: gs.state.sector_weights(system.fock()),
        iterations: gs.iterations,
        method: format!("{:?}", gs.method),
    };
    atomic_write(
        &out_dir.join("ground_state.json"),
        serde_json::to_string_pretty(&artifact).unwrap().as_bytes(),
    )?;
    report.record_output("ground_state.json");
    report.write_json(out_dir)?;
    Ok(report)
}

/// Run the full invariant suite: CCR, both commutator identities,
/// pull-through, the spectral-theorem phase integral, Abelian limits, the
/// two-path Cook check, and the Appendix-style bound diagnostics.
pub fn cmd_verify(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let scale = config.solver.verify_tolerance_scale;
    let mut report = RunReport::new("verify", opts.seed, config.to_toml_string());
    let system = config.build_system()?;
    let grid = system.modes().clone();
    let basis = system.fock().clone();
    let matter_dim = system.matter_dim();
    let h = system.hamiltonian();

    // CCR suite: 20 random (g, h) pairs on guarded states.
    {
        let mut rng = seeded_rng(&opts, 1);
        let mut worst_comm = 0.0f64;
        let mut worst_pair = 0.0f64;
        for _ in 0..20 {
            let g = random_photon(&grid, &mut rng);
            let hp = random_photon(&grid, &mut rng);
            let psi = StateVector::random_guarded(matter_dim, &basis, basis.n_max() - 1, &mut rng);
            let a_g = basis.annihilate_op(&g, matter_dim);
            let a_star_h = basis.create_op(&hp, matter_dim);
            let inner = g.weighted_inner(&hp, &grid);
            let comm = a_g.apply(&a_star_h.apply(&psi.data))
                - a_star_h.apply(&a_g.apply(&psi.data));
            worst_comm = worst_comm.max((&comm - &psi.data * inner).norm());
            let a_h = basis.annihilate_op(&hp, matter_dim);
            let pair =
                a_g.apply(&a_h.apply(&psi.data)) - a_h.apply(&a_g.apply(&psi.data));
            worst_pair = worst_pair.max(pair.norm());
        }
        report.check("ccr-commutator", worst_comm, 1e-12 * scale, "20 random (g,h) pairs".into());
        report.check("ccr-annihilator-pair", worst_pair, 1e-13 * scale, String::new());
    }

    // Hermiticity and component decomposition.
    if system.dim() <= opts.dense_threshold {
        report.check(
            "hermiticity-dense",
            h.total.hermiticity_defect(),
            1e-12 * scale,
            format!("dim {}", system.dim()),
        );
    }
    {
        let mut rng = seeded_rng(&opts, 2);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let v = linalg::random_vector(system.dim(), &mut rng);
            let total = h.total.apply(&v);
            let mut sum = CVector::zeros(system.dim());
            for (_, op) in &h.components {
                sum += op.apply(&v);
            }
            worst = worst.max((total - sum).norm() / v.norm());
        }
        report.check("component-sum", worst, 1e-12 * scale, String::new());
    }

    // Commutator identities per mode on 10 guarded random states. The mode
    // sweep parallelizes; the max-reduction is order independent.
    {
        let mut rng = seeded_rng(&opts, 3);
        let mut worst1 = 0.0f64;
        let mut worst2 = 0.0f64;
        for _ in 0..10 {
            let psi = StateVector::random_guarded(
                matter_dim,
                &basis,
                basis.n_max().saturating_sub(2),
                &mut rng,
            );
            let hp = random_photon(&grid, &mut rng);
            let (w1, w2) = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let indicator = PhotonFunction::indicator(&grid, i);
                    (
                        system.comm1_residual(&indicator, &psi.data),
                        system.comm2_residual(i, &hp, &psi.data),
                    )
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
            worst1 = worst1.max(w1);
            worst2 = worst2.max(w2);
        }
        report.check("comm1-max", worst1, 1e-10 * scale, "all modes, 10 states".into());
        report.check("comm2-max", worst2, 1e-10 * scale, "all modes, 10 states".into());
    }

    // Scattering-side identities need the ground state.
    let ctx = ScatteringContext::new(system.clone(), opts.clone())?;
    report.note(format!(
        "ground energy {:.12e}, top-sector weight {:.3e}",
        ctx.energy(),
        ctx.ground.top_sector_weight
    ));

    for mode in 0..grid.len() {
        let rep = ctx.pull_through(mode)?;
        let budget = if rep.rhs_scale > 0.0 {
            10.0 * rep.top_sector_weight.sqrt() * rep.rhs_scale * scale
        } else {
            1e-10 * scale
        };
        report.check(
            &format!("pull-through-mode-{mode}"),
            rep.residual,
            budget,
            format!("top weight {:.3e}, scale {:.3e}", rep.top_sector_weight, rep.rhs_scale),
        );
    }

    // Spectral-theorem half-line integral on the assembled Hamiltonian.
    {
        let mut rng = seeded_rng(&opts, 4);
        let v = linalg::random_vector(system.dim(), &mut rng);
        for eps in [0.5, 0.1, 0.05] {
            let res = halfline_phase_integral(&h.total, &v, eps, &opts)?;
            report.check(
                &format!("phase-integral-eps-{eps}"),
                res.rel_diagnostic,
                1e-8 * scale,
                format!("T = {:.1}, {} evaluations", res.t_end, res.evaluations),
            );
        }
    }

    // Abelian limits of the three reference families.
    {
        let eps_schedule = [0.1, 0.01];
        let families: [(&str, Box<dyn Fn(f64) -> f64>, f64); 3] = [
            ("exp", Box::new(|s: f64| (-s).exp()), 1.0),
            ("exp-cos", Box::new(|s: f64| (-s).exp() * s.cos()), 0.5),
            ("indicator", Box::new(|s: f64| if s <= 1.0 { 1.0 } else { 0.0 }), 1.0),
        ];
        for (name, f, limit) in &families {
            let res = abelian_limit(f.as_ref(), &eps_schedule, &opts);
            for (eps, q) in &res.per_eps {
                report.check(
                    &format!("abelian-{name}-eps-{eps}"),
                    (q - limit).abs(),
                    5.0 * eps * scale,
                    format!("damped integral {q:.8}"),
                );
            }
        }
    }

    // Creation-operator bounds: 50 draws for n = 1 and n = 2.
    {
        let mut rng = seeded_rng(&opts, 5);
        let mut worst1 = 0.0f64;
        let mut worst2 = 0.0f64;
        for _ in 0..50 {
            let h1 = random_photon(&grid, &mut rng);
            let kind1 = if rng.gen_bool(0.5) { LadderKind::Create } else { LadderKind::Annihilate };
            worst1 = worst1.max(verify_creation_bound(
                &grid,
                &basis,
                &[(kind1, h1.clone())],
                &opts,
            )?);
            let h2 = random_photon(&grid, &mut rng);
            let kind2 = if rng.gen_bool(0.5) { LadderKind::Create } else { LadderKind::Annihilate };
            worst2 = worst2.max(verify_creation_bound(
                &grid,
                &basis,
                &[(kind1, h1), (kind2, h2)],
                &opts,
            )?);
        }
        report.check("creation-bound-n1", worst1, CREATION_BOUND_C1 * scale, "50 draws".into());
        report.check("creation-bound-n2", worst2, CREATION_BOUND_C2 * scale, "50 draws".into());
    }

    // Relative form bound at two epsilons.
    {
        let fb_half = verify_form_bound(&system, &h.total, 0.5, &opts)?;
        let fb_quarter = verify_form_bound(&system, &h.total, 0.25, &opts)?;
        report.check(
            "form-bound-min-eig",
            -fb_half.verified_min_eig,
            1e-10 * scale,
            format!("D_0.5 = {:.6e}", fb_half.d_eps),
        );
        report.check(
            "form-bound-monotone",
            fb_half.d_eps - fb_quarter.d_eps,
            1e-6 * scale,
            format!("D_0.25 = {:.6e}", fb_quarter.d_eps),
        );
    }

    // Two-path Cook integral and the T-matrix summation identity.
    {
        let mut rng = seeded_rng(&opts, 6);
        let hp = random_photon(&grid, &mut rng);
        let eps = 0.1;
        let a = ctx.cook_create(&hp, eps, Direction::In, CookPath::TimeQuadrature)?;
        let b = ctx.cook_create(&hp, eps, Direction::In, CookPath::ClosedForm)?;
        report.check(
            "cook-two-path",
            (&a.state - &b.state).norm(),
            1e-6 * scale,
            format!("eps = {eps}"),
        );
        for rep in ctx.verify_prop_tmat(&hp, eps)? {
            report.check(
                &format!("prop-tmat-mode-{}", rep.mode),
                rep.discrepancy,
                (1e-6 + rep.guard_defect + 1e-9) * scale,
                format!(
                    "quadrature part {:.3e}, guard part {:.3e}",
                    rep.quadrature_defect, rep.guard_defect
                ),
            );
        }
    }

    report.write_json(out_dir)?;
    Ok(report)
}

/// T-matrix table over the configured pairs with an eta sweep, the dense
/// oracle cross-check, and the optional continuity scan along a ray.
pub fn cmd_tmatrix(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let mut report = RunReport::new("tmatrix", opts.seed, config.to_toml_string());
    let system = config.build_system()?;
    let grid = system.modes().clone();
    let pairs = config.mode_pairs(&grid)?;
    let ctx = ScatteringContext::new(system, opts.clone())?;
    let table = ctx.t_matrix_table(&pairs, &config.solver.eta_schedule)?;

    let d = grid.dim();
    let k_cols: Vec<String> = (1..=d).map(|l| format!("k{l}")).collect();
    let kp_cols: Vec<String> = (1..=d).map(|l| format!("kp{l}")).collect();
    let header = format!(
        "# {},lambda,{},lambdap,eta,re_t,im_t,re_term1,im_term1,re_term2,im_term2,\
         re_term3,im_term3,stable",
        k_cols.join(","),
        kp_cols.join(",")
    );
    let mut lines = Vec::new();
    for row in &table.rows {
        for p in &row.sweep {
            lines.push(format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                mode_fields(&grid, row.out_mode),
                mode_fields(&grid, row.in_mode),
                fmt_f64(p.eta),
                fmt_f64(p.total.re),
                fmt_f64(p.total.im),
                fmt_f64(row.term1.re),
                fmt_f64(row.term1.im),
                fmt_f64(p.term2.re),
                fmt_f64(p.term2.im),
                fmt_f64(row.term3.re),
                fmt_f64(row.term3.im),
                if row.stable { 1 } else { 0 },
            ));
        }
    }
    write_lines(out_dir, "tmatrix.csv", &header, &lines)?;
    report.record_output("tmatrix.csv");

    // Dense-oracle cross-check at the smallest eta.
    if ctx.dense_matrix().is_some() {
        let eta = *table.etas.last().unwrap();
        let mut worst = 0.0f64;
        let scale_floor = table
            .rows
            .iter()
            .flat_map(|r| r.sweep.iter().map(|p| p.total.norm()))
            .fold(0.0f64, f64::max)
            .max(1e-30);
        for row in &table.rows {
            let fast = row.sweep.last().unwrap().total;
            let oracle = ctx.t_matrix_entry_dense(row.out_mode, row.in_mode, eta)?.total;
            let rel = (fast - oracle).norm() / oracle.norm().max(1e-6 * scale_floor);
            worst = worst.max(rel);
        }
        report.check(
            "tmatrix-dense-oracle",
            worst,
            1e-8,
            format!("{} pairs at eta = {eta}", table.rows.len()),
        );
    }

    // Term-3 independent recomputation.
    {
        let mut worst = 0.0f64;
        for row in &table.rows {
            let d2 = ctx.system.d2_value(row.out_mode, row.in_mode);
            let direct = d2.apply(&ctx.ground.state.data).dotc(&ctx.ground.state.data).conj();
            worst = worst.max((row.term3 - direct).norm());
        }
        report.check("tmatrix-term3-recompute", worst, 1e-12, String::new());
    }
    let unstable = table.rows.iter().filter(|r| !r.stable).count();
    report.note(format!(
        "{} of {} pairs flagged unstable under eta extrapolation",
        unstable,
        table.rows.len()
    ));

    // Continuity scan along the first shell direction (empirical only).
    if !config.experiment.ray_scan_radii.is_empty() {
        let ref_radius = config.discretization.mode_shells[0];
        let ref_dirs = config.discretization.modes_per_shell[0];
        let pol = if config.model.dimension == 3 { 2 } else { 1 };
        let scan_mode = ref_dirs * pol;
        let mut lines = Vec::new();
        let mut previous: Option<(f64, Complex64)> = None;
        let mut max_step = 0.0f64;
        for &r in &config.experiment.ray_scan_radii {
            let mut scan_config = config.clone();
            scan_config.discretization.mode_shells = vec![ref_radius, r];
            scan_config.discretization.modes_per_shell = vec![ref_dirs, ref_dirs];
            scan_config.discretization.shell_weights = vec![
                config.discretization.shell_weights[0],
                config.discretization.shell_weights[0],
            ];
            let scan_system = scan_config.build_system()?;
            let scan_ctx = ScatteringContext::new(scan_system, opts.clone())?;
            let sweep = &config.solver.eta_schedule;
            let table = scan_ctx.t_matrix_table(&[(scan_mode, 0), (scan_mode, scan_mode)], sweep)?;
            let t_ref = &table.rows[0];
            let t_diag = &table.rows[1];
            if let Some((r0, t0)) = previous {
                if r != r0 {
                    max_step = max_step.max((t_ref.extrapolated - t0).norm() / (r - r0).abs());
                }
            }
            previous = Some((r, t_ref.extrapolated));
            lines.push(format!(
                "{},{},{},{},{},{},{}",
                fmt_f64(r),
                fmt_f64(t_ref.extrapolated.re),
                fmt_f64(t_ref.extrapolated.im),
                fmt_f64(t_diag.extrapolated.re),
                fmt_f64(t_diag.extrapolated.im),
                if t_ref.stable { 1 } else { 0 },
                if t_diag.stable { 1 } else { 0 },
            ));
        }
        write_lines(
            out_dir,
            "tmatrix_ray.csv",
            "# radius,re_t_ref,im_t_ref,re_t_diag,im_t_diag,stable_ref,stable_diag",
            &lines,
        )?;
        report.record_output("tmatrix_ray.csv");
        report.note(format!(
            "ray scan: max |dT/dr| step {:.6e} (continuity observed, no rate asserted)",
            max_step
        ));
        atomic_write(
            &out_dir.join("tmatrix_ray.py"),
            ray_plot_script().as_bytes(),
        )?;
        report.record_output("tmatrix_ray.py");
    }

    report.write_json(out_dir)?;
    Ok(report)
}

/// Two-path S-matrix comparison with the eps sweep and plot script.
pub fn cmd_smatrix(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let mut report = RunReport::new("smatrix", opts.seed, config.to_toml_string());
    let system = config.build_system()?;
    let grid = system.modes().clone();
    if !grid.has_shared_shell() {
        return Err(Error::config(
            "scattering experiments need at least one shell with two distinct modes, \
             so the on-shell kernel has discrete support",
        ));
    }
    let ctx = ScatteringContext::new(system, opts)?;
    let f = config.packet(config.experiment.packet_f.as_deref(), &grid, 0)?;
    let fallback_h = if grid.len() > 1 { 1 } else { 0 };
    let h = config.packet(config.experiment.packet_h.as_deref(), &grid, fallback_h)?;
    let result = ctx.s_matrix(&f, &h, &config.solver.eps_schedule)?;

    for p in &result.sweep {
        report.check(
            &format!("smatrix-two-path-eps-{}", p.eps),
            p.discrepancy,
            p.budget,
            format!(
                "quad {:.3e}, ccr defect {:.3e}, lorentz defect {:.3e}",
                p.quad_budget, p.ccr_defect, p.lorentz_defect
            ),
        );
    }
    if result.sweep.len() >= 2 {
        let trend: Vec<String> =
            result.sweep.iter().map(|p| format!("{:.6e}", p.rhs.norm())).collect();
        report.note(format!("|RHS| across the eps sweep (descending eps): {}", trend.join(", ")));
    }

    #[derive(serde::Serialize)]
    struct SMatrixArtifact {
        inner_fh: JsonComplex,
        packet_f: Vec<JsonComplex>,
        packet_h: Vec<JsonComplex>,
        sweep: Vec<SMatrixPointArtifact>,
    }
    #[derive(serde::Serialize)]
    struct SMatrixPointArtifact {
        eps: f64,
        lhs_time: JsonComplex,
        lhs_closed: JsonComplex,
        rhs_lorentzian: JsonComplex,
        delta_form_rhs: JsonComplex,
        discrepancy: f64,
        budget: f64,
        quad_budget: f64,
        ccr_defect: f64,
        lorentz_defect: f64,
    }
    let artifact = SMatrixArtifact {
        inner_fh: result.inner_fh.into(),
        packet_f: (0..grid.len()).map(|i| f.value(i).into()).collect(),
        packet_h: (0..grid.len()).map(|i| h.value(i).into()).collect(),
        sweep: result
            .sweep
            .iter()
            .map(|p| SMatrixPointArtifact {
                eps: p.eps,
                lhs_time: p.lhs_time.into(),
                lhs_closed: p.lhs_closed.into(),
                rhs_lorentzian: p.rhs.into(),
                delta_form_rhs: p.delta_form_rhs.into(),
                discrepancy: p.discrepancy,
                budget: p.budget,
                quad_budget: p.quad_budget,
                ccr_defect: p.ccr_defect,
                lorentz_defect: p.lorentz_defect,
            })
            .collect(),
    };
    atomic_write(
        &out_dir.join("smatrix.json"),
        serde_json::to_string_pretty(&artifact).unwrap().as_bytes(),
    )?;
    report.record_output("smatrix.json");
    atomic_write(&out_dir.join("smatrix_sweep.py"), smatrix_plot_script().as_bytes())?;
    report.record_output("smatrix_sweep.py");
    report.write_json(out_dir)?;
    Ok(report)
}

/// Parameter sweeps: boundary-value eta sweeps (CSV per the spectral
/// interface) or pull-through residuals across couplings and cutoffs.
pub fn cmd_sweep(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<RunReport> {
    match config.experiment.sweep {
        SweepKind::Boundary => cmd_sweep_boundary(config, out_dir, seed),
        SweepKind::PullThrough => cmd_sweep_pull_through(config, out_dir, seed),
    }
}

fn cmd_sweep_boundary(
    config: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let mut report = RunReport::new("sweep-boundary", opts.seed, config.to_toml_string());
    let system = config.build_system()?;
    let grid = system.modes().clone();
    let pairs = config.mode_pairs(&grid)?;
    let ctx = ScatteringContext::new(system, opts.clone())?;

    let d = grid.dim();
    let k_cols: Vec<String> = (1..=d).map(|l| format!("k{l}")).collect();
    let kp_cols: Vec<String> = (1..=d).map(|l| format!("kp{l}")).collect();
    let header = format!(
        "# {},lambda,{},lambdap,eta,re,im,residual,re_extrapolated,im_extrapolated,stable",
        k_cols.join(","),
        kp_cols.join(",")
    );
    // Boundary-value queries are independent tasks; the collation below
    // walks them in pair order, so output is thread-count independent.
    let results: Vec<spectral::BoundaryValueResult> = pairs
        .par_iter()
        .map(|&(i, j)| {
            spectral::boundary_value(
                &ctx.hamiltonian.total,
                ctx.dense_matrix(),
                &ctx.d1_psi[i],
                &ctx.d1_psi[j],
                ctx.energy() + grid.omega(j),
                &config.solver.eta_schedule,
                &opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lines = Vec::new();
    let mut sup_bound = 0.0f64;
    let mut unstable = 0usize;
    for (&(i, j), bv) in pairs.iter().zip(&results) {
        if !bv.stable {
            unstable += 1;
        }
        sup_bound = sup_bound.max(bv.scale);
        for &(eta, value, residual) in &bv.sweep {
            lines.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                mode_fields(&grid, i),
                mode_fields(&grid, j),
                fmt_f64(eta),
                fmt_f64(value.re),
                fmt_f64(value.im),
                fmt_f64(residual),
                fmt_f64(bv.extrapolated.re),
                fmt_f64(bv.extrapolated.im),
                if bv.stable { 1 } else { 0 },
            ));
        }
    }
    write_lines(out_dir, "boundary_values.csv", &header, &lines)?;
    report.record_output("boundary_values.csv");
    report.check(
        "boundary-uniform-bound-finite",
        if sup_bound.is_finite() { 0.0 } else { 1.0 },
        0.5,
        format!("sup |f(eta)| over the sweep = {sup_bound:.6e}"),
    );
    report.note(format!(
        "{} of {} pairs flagged unstable under eta extrapolation",
        unstable,
        pairs.len()
    ));
    report.write_json(out_dir)?;
    Ok(report)
}

fn cmd_sweep_pull_through(
    config: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReport> {
    let opts = config.solver_options(seed);
    let mut report = RunReport::new("sweep-pull-through", opts.seed, config.to_toml_string());
    let n_max = config.discretization.photon_cutoff;
    let cutoffs: Vec<usize> =
        if n_max >= 2 { vec![n_max - 1, n_max] } else { vec![n_max] };
    let header = "# charge,n_max,mode,residual,top_sector_weight,rhs_scale";
    let mut lines = Vec::new();
    // residuals[(charge index, mode)] per cutoff for the decrease check.
    let mut by_cutoff: Vec<Vec<f64>> = Vec::new();
    for &cutoff in &cutoffs {
        let mut residuals = Vec::new();
        for &charge in &config.experiment.coupling_sweep {
            let mut c = config.clone();
            c.model.charge = charge;
            c.discretization.photon_cutoff = cutoff;
            let system = c.build_system()?;
            let ctx = ScatteringContext::new(system, opts.clone())?;
            for mode in 0..ctx.system.modes().len() {
                let rep = ctx.pull_through(mode)?;
                let budget = if rep.rhs_scale > 0.0 {
                    10.0 * rep.top_sector_weight.sqrt() * rep.rhs_scale
                } else {
                    1e-10
                };
                report.check(
                    &format!("pull-through-e-{charge}-n-{cutoff}-mode-{mode}"),
                    rep.residual,
                    budget * config.solver.verify_tolerance_scale.max(1e-300),
                    format!("top weight {:.3e}", rep.top_sector_weight),
                );
                residuals.push(rep.residual);
                lines.push(format!(
                    "{},{},{},{},{},{}",
                    fmt_f64(charge),
                    cutoff,
                    mode,
                    fmt_f64(rep.residual),
                    fmt_f64(rep.top_sector_weight),
                    fmt_f64(rep.rhs_scale),
                ));
            }
        }
        by_cutoff.push(residuals);
    }
    if by_cutoff.len() == 2 {
        let worst_ratio = by_cutoff[1]
            .iter()
            .zip(&by_cutoff[0])
            .map(|(hi, lo)| if *lo > 0.0 { hi / lo } else { 0.0 })
            .fold(0.0f64, f64::max);
        report.check(
            "pull-through-residual-decreases",
            worst_ratio,
            1.0,
            format!("max residual ratio n_max {} over {}", cutoffs[1], cutoffs[0]),
        );
    }
    write_lines(out_dir, "pull_through.csv", header, &lines)?;
    report.record_output("pull_through.csv");
    report.write_json(out_dir)?;
    Ok(report)
}

fn ray_plot_script() -> &'static str {
    r##"#!/usr/bin/env python3
"""Plot the T-matrix continuity scan written by `pfsim tmatrix`."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
radii, re_ref, im_ref = [], [], []
with open(here / "tmatrix_ray.csv") as fh:
    for row in csv.reader(fh):
        if not row or row[0].startswith("#"):
            continue
        radii.append(float(row[0]))
        re_ref.append(float(row[1]))
        im_ref.append(float(row[2]))

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(radii, re_ref, "o-", label="Re T(k(r), k_ref)")
ax.plot(radii, im_ref, "s-", label="Im T(k(r), k_ref)")
ax.set_xlabel("|k|")
ax.set_ylabel("T")
ax.legend()
ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig(here / "tmatrix_ray.png", dpi=160)
"##
}

fn smatrix_plot_script() -> &'static str {
    r##"#!/usr/bin/env python3
"""Plot the S-matrix two-path sweep written by `pfsim smatrix`."""
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
data = json.loads((here / "smatrix.json").read_text())
eps = [p["eps"] for p in data["sweep"]]
disc = [p["discrepancy"] for p in data["sweep"]]
budget = [p["budget"] for p in data["sweep"]]
lhs = [abs(complex(p["lhs_time"]["re"], p["lhs_time"]["im"])) for p in data["sweep"]]
rhs = [abs(complex(p["rhs_lorentzian"]["re"], p["rhs_lorentzian"]["im"])) for p in data["sweep"]]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.loglog(eps, disc, "o-", label="|LHS - RHS|")
ax1.loglog(eps, budget, "s--", label="budget")
ax1.set_xlabel("eps")
ax1.legend()
ax1.grid(True, alpha=0.3)
ax2.loglog(eps, lhs, "o-", label="|LHS|")
ax2.loglog(eps, rhs, "s--", label="|RHS|")
ax2.set_xlabel("eps")
ax2.legend()
ax2.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig(here / "smatrix_sweep.png", dpi=160)
"##
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.discretization.matter_points = 10;
        config.solver.eta_schedule = vec![0.4, 0.2, 0.1];
        config.solver.eps_schedule = vec![0.2, 0.1];
        config
    }

    #[test]
    fn ground_state_command_passes_and_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let report = cmd_ground_state(&fast_config(), dir.path(), None).unwrap();
        assert!(report.passed);
        assert!(dir.path().join("ground_state.json").exists());
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn tmatrix_command_emits_schema_and_oracle_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.experiment.mode_pairs = Some(vec![[0, 0], [0, 1], [2, 3]]);
        let report = cmd_tmatrix(&config, dir.path(), None).unwrap();
        assert!(report.passed, "{}", report.render_text());
        let csv = std::fs::read_to_string(dir.path().join("tmatrix.csv")).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# k1,lambda,kp1,lambdap,eta"));
        // 3 pairs x 3 etas data rows.
        assert_eq!(lines.count(), 9);
    }

    #[test]
    fn zero_coupling_tmatrix_is_all_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.model.charge = 0.0;
        let report = cmd_tmatrix(&config, dir.path(), None).unwrap();
        assert!(report.passed);
        let csv = std::fs::read_to_string(dir.path().join("tmatrix.csv")).unwrap();
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            // d = 1 layout: k1,lambda,kp1,lambdap,eta,re_t,im_t,...
            let re: f64 = fields[5].parse().unwrap();
            let im: f64 = fields[6].parse().unwrap();
            assert_eq!((re, im), (0.0, 0.0));
        }
    }

    #[test]
    fn smatrix_command_within_budgets() {
        let dir = tempfile::tempdir().unwrap();
        let report = cmd_smatrix(&fast_config(), dir.path(), None).unwrap();
        assert!(report.passed, "{}", report.render_text());
        let json = std::fs::read_to_string(dir.path().join("smatrix.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["sweep"].as_array().unwrap().len(), 2);
        assert!(dir.path().join("smatrix_sweep.py").exists());
    }

    #[test]
    fn smatrix_without_shared_shells_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.discretization.modes_per_shell = vec![1, 1];
        let outcome = cmd_smatrix(&config, dir.path(), None);
        assert_eq!(exit_code(&outcome), 1);
    }

    #[test]
    fn sweep_boundary_schema() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.experiment.mode_pairs = Some(vec![[0, 1]]);
        let report = cmd_sweep(&config, dir.path(), None).unwrap();
        assert!(report.passed);
        let csv = std::fs::read_to_string(dir.path().join("boundary_values.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# k1,lambda,kp1,lambdap,eta,re,im,residual,re_extrapolated,im_extrapolated,stable"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn sweep_pull_through_decreases_with_cutoff() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.experiment.sweep = SweepKind::PullThrough;
        config.experiment.coupling_sweep = vec![0.05, 0.1];
        let report = cmd_sweep(&config, dir.path(), None).unwrap();
        assert!(report.passed, "{}", report.render_text());
        assert!(dir.path().join("pull_through.csv").exists());
    }

    #[test]
    fn zero_coupling_verification_passes_trivially() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.model.charge = 0.0;
        let report = cmd_verify(&config, dir.path(), None).unwrap();
        assert!(report.passed, "{}", report.render_text());
    }

    #[test]
    fn hamiltonian_dump_writes_coordinate_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.model.charge = 0.0;
        config.discretization.matter_points = 4;
        config.experiment.dump_hamiltonian = true;
        let report = cmd_ground_state(&config, dir.path(), None).unwrap();
        assert!(report.passed, "{}", report.render_text());
        // Zero coupling also records the atomic cross-check.
        assert!(report.checks.iter().any(|c| c.name == "decoupled-vs-atomic-energy"));
        let coo = std::fs::read_to_string(dir.path().join("hamiltonian.coo")).unwrap();
        let first = coo.lines().next().unwrap();
        let fields: Vec<&str> = first.split_whitespace().collect();
        assert_eq!(fields.len(), 4);
        fields[0].parse::<usize>().unwrap();
        fields[2].parse::<f64>().unwrap();
    }

    #[test]
    fn forced_failure_scale_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config();
        config.solver.verify_tolerance_scale = 0.0;
        let outcome = cmd_verify(&config, dir.path(), None);
        assert_eq!(exit_code(&outcome), 3);
    }

    #[test]
    fn exit_codes_map_error_kinds() {
        assert_eq!(exit_code(&Err(Error::config("x"))), 1);
        assert_eq!(exit_code(&Err(Error::solver("x"))), 2);
        let passing = RunReport::new("t", 0, String::new());
        assert_eq!(exit_code(&Ok(passing)), 0);
        let mut failing = RunReport::new("t", 0, String::new());
        failing.check("c", 1.0, 0.5, String::new());
        assert_eq!(exit_code(&Ok(failing)), 3);
    }
}
