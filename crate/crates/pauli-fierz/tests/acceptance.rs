//! Acceptance suite: one test per acceptance criterion, each printing a
//! pass/fail line (run with `cargo test --test acceptance -- --nocapture`
//! to see them). Desk scale: one-dimensional spinless matter on 32 grid
//! points, four photon modes on two shells, photon cutoffs 2 and 3.

use num_complex::Complex64;
use pauli_fierz::config::RunConfig;
use pauli_fierz::fock::StateVector;
use pauli_fierz::linalg::{self, CVector};
use pauli_fierz::modes::PhotonFunction;
use pauli_fierz::report::RunReport;
use pauli_fierz::runner::{self, CREATION_BOUND_C1, CREATION_BOUND_C2};
use pauli_fierz::scattering::ScatteringContext;
use pauli_fierz::spectral::{
    abelian_limit, atomic_ground, halfline_phase_integral, verify_creation_bound,
    verify_form_bound, LadderKind, SolverOptions,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn desk_config(charge: f64, photon_cutoff: usize) -> RunConfig {
    let mut config = RunConfig::default();
    config.model.charge = charge;
    config.discretization.photon_cutoff = photon_cutoff;
    config
}

fn context(charge: f64, photon_cutoff: usize) -> ScatteringContext {
    let config = desk_config(charge, photon_cutoff);
    let system = config.build_system().unwrap();
    ScatteringContext::new(system, config.solver_options(None)).unwrap()
}

fn criterion(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn random_photon(grid: &pauli_fierz::modes::ModeGrid, rng: &mut impl Rng) -> PhotonFunction {
    PhotonFunction::from_fn(grid, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Criterion 1: CCR residuals on the guarded subspace stay below 1e-12
/// over 20 random wave-packet pairs.
#[test]
fn criterion_01_ccr_suite() {
    let config = desk_config(0.1, 3);
    let system = config.build_system().unwrap();
    let grid = system.modes();
    let basis = system.fock();
    let matter_dim = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut worst_pair = 0.0f64;
    for _ in 0..20 {
        let g = random_photon(grid, &mut rng);
        let h = random_photon(grid, &mut rng);
        let psi = StateVector::random_guarded(matter_dim, basis, basis.n_max() - 1, &mut rng);
        let a_g = basis.annihilate_op(&g, matter_dim);
        let a_star_h = basis.create_op(&h, matter_dim);
        let inner = g.weighted_inner(&h, grid);
        let comm =
            a_g.apply(&a_star_h.apply(&psi.data)) - a_star_h.apply(&a_g.apply(&psi.data));
        worst = worst.max((&comm - &psi.data * inner).norm());
        let a_h = basis.annihilate_op(&h, matter_dim);
        let pair = a_g.apply(&a_h.apply(&psi.data)) - a_h.apply(&a_g.apply(&psi.data));
        worst_pair = worst_pair.max(pair.norm());
    }
    criterion(
        1,
        "CCR guarded residuals",
        worst <= 1e-12 && worst_pair <= 1e-12,
        &format!("max commutator defect {worst:.3e}, max [a,a] defect {worst_pair:.3e}"),
    );
}

/// Criterion 2: both commutator identities hold to 1e-10 on 10 random
/// guarded states for every grid mode.
#[test]
fn criterion_02_commutator_identities() {
    let config = desk_config(0.1, 3);
    let system = config.build_system().unwrap();
    let grid = system.modes().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    for _ in 0..10 {
        let psi = StateVector::random_guarded(
            system.matter_dim(),
            system.fock(),
            system.fock().n_max() - 2,
            &mut rng,
        );
        let h = random_photon(&grid, &mut rng);
        for i in 0..grid.len() {
            let indicator = PhotonFunction::indicator(&grid, i);
            worst1 = worst1.max(system.comm1_residual(&indicator, &psi.data));
            worst2 = worst2.max(system.comm2_residual(i, &h, &psi.data));
        }
    }
    criterion(
        2,
        "commutator identities",
        worst1 <= 1e-10 && worst2 <= 1e-10,
        &format!("max comm1 residual {worst1:.3e}, max comm2 residual {worst2:.3e}"),
    );
}

/// Criterion 3: at zero coupling the ground state decouples, the T-matrix
/// vanishes, and both sides of the scattering formula are at the solver
/// floor.
#[test]
fn criterion_03_decoupling_oracle() {
    let ctx = context(0.0, 2);
    let system = &ctx.system;
    let atomic = atomic_ground(system).unwrap();
    let energy_defect = (ctx.energy() - atomic.energy).abs();

    let mut reference = CVector::zeros(system.dim());
    for s in 0..system.matter_dim() {
        reference[s] = Complex64::new(atomic.state[s], 0.0);
    }
    let overlap = reference.dotc(&ctx.ground.state.data);
    let aligned =
        &ctx.ground.state.data * (overlap.conj() / Complex64::new(overlap.norm(), 0.0));
    let state_defect = (aligned - reference).norm();

    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
    let table = ctx.t_matrix_table(&pairs, &[0.2, 0.1]).unwrap();
    let t_max = table
        .rows
        .iter()
        .flat_map(|r| r.sweep.iter().map(|p| p.total.norm()))
        .fold(0.0f64, f64::max);

    let f = PhotonFunction::indicator(system.modes(), 0);
    let h = PhotonFunction::indicator(system.modes(), 1);
    let smatrix = ctx.s_matrix(&f, &h, &[0.2, 0.1]).unwrap();
    let lhs_max = smatrix.sweep.iter().map(|p| p.lhs_time.norm()).fold(0.0f64, f64::max);
    let rhs_max = smatrix.sweep.iter().map(|p| p.rhs.norm()).fold(0.0f64, f64::max);

    criterion(
        3,
        "zero-coupling decoupling",
        energy_defect <= 1e-10
            && state_defect <= 1e-8
            && t_max <= 1e-14
            && lhs_max <= 1e-10
            && rhs_max <= 1e-10,
        &format!(
            "|E - E_at| = {energy_defect:.3e}, |psi - phi x vac| = {state_defect:.3e}, \
             max |T| = {t_max:.3e}, S-matrix sides {lhs_max:.3e} / {rhs_max:.3e}"
        ),
    );
}

/// Criterion 4: half-line quadrature versus resolvent closed form on the
/// assembled weak-coupling Hamiltonian, relative error at most 1e-8 for
/// eps in {0.5, 0.1, 0.05}.
#[test]
fn criterion_04_phase_integral() {
    let config = desk_config(0.1, 2);
    let system = config.build_system().unwrap();
    let h = system.hamiltonian();
    let opts = config.solver_options(None);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let v = linalg::random_vector(system.dim(), &mut rng);
    let mut detail = String::new();
    let mut pass = true;
    for eps in [0.5, 0.1, 0.05] {
        let res = halfline_phase_integral(&h.total, &v, eps, &opts).unwrap();
        detail.push_str(&format!("eps {eps}: {:.3e}  ", res.rel_diagnostic));
        pass &= res.rel_diagnostic <= 1e-8;
    }
    criterion(4, "spectral-theorem phase integral", pass, detail.trim());
}

/// Criterion 5: the three Abelian-limit families reproduce their closed-form
/// limits within 5 eps at each eps in {0.1, 0.01}.
#[test]
fn criterion_05_abelian_limit() {
    let opts = SolverOptions::default();
    let schedule = [0.1, 0.01];
    let families: [(&str, Box<dyn Fn(f64) -> f64>, f64); 3] = [
        ("exp", Box::new(|s: f64| (-s).exp()), 1.0),
        ("exp-cos", Box::new(|s: f64| (-s).exp() * s.cos()), 0.5),
        ("indicator", Box::new(|s: f64| if s <= 1.0 { 1.0 } else { 0.0 }), 1.0),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (name, f, limit) in &families {
        let res = abelian_limit(f.as_ref(), &schedule, &opts);
        for (eps, q) in &res.per_eps {
            let defect = (q - limit).abs();
            pass &= defect <= 5.0 * eps;
            detail.push_str(&format!("{name}@{eps}: {defect:.2e}  "));
        }
    }
    criterion(5, "Abelian limits", pass, detail.trim());
}

/// Criterion 6: pull-through residual within the truncation budget at each
/// coupling, strictly decreasing from photon cutoff 2 to 3.
#[test]
fn criterion_06_pull_through() {
    let mut pass = true;
    let mut detail = String::new();
    for charge in [0.02, 0.05, 0.1] {
        let ctx2 = context(charge, 2);
        let ctx3 = context(charge, 3);
        for mode in 0..ctx2.system.modes().len() {
            let r2 = ctx2.pull_through(mode).unwrap();
            let r3 = ctx3.pull_through(mode).unwrap();
            let budget2 = 10.0 * r2.top_sector_weight.sqrt() * r2.rhs_scale;
            let budget3 = 10.0 * r3.top_sector_weight.sqrt() * r3.rhs_scale;
            pass &= r2.residual <= budget2 && r3.residual <= budget3;
            pass &= r3.residual < r2.residual;
        }
        let r2 = ctx2.pull_through(0).unwrap();
        let r3 = ctx3.pull_through(0).unwrap();
        detail.push_str(&format!(
            "e={charge}: residual {:.2e} -> {:.2e}  ",
            r2.residual, r3.residual
        ));
    }
    criterion(6, "pull-through identity", pass, detail.trim());
}

/// Criterion 7: time-quadrature LHS of the T-matrix summation identity
/// matches the resolvent RHS within 1e-6 plus the measured guard budget, at
/// eps = 0.1, for every grid mode and three random packets.
#[test]
fn criterion_07_prop_tmat_two_path() {
    let ctx = context(0.1, 2);
    let mut pass = true;
    let mut worst_margin = 0.0f64;
    for seed in [701u64, 702, 703] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_photon(ctx.system.modes(), &mut rng);
        for rep in ctx.verify_prop_tmat(&h, 0.1).unwrap() {
            let budget = 1e-6 + rep.guard_defect + 1e-9;
            pass &= rep.discrepancy <= budget;
            worst_margin = worst_margin.max(rep.discrepancy / budget);
        }
    }
    criterion(
        7,
        "two-path T-matrix summation",
        pass,
        &format!("worst discrepancy/budget ratio {worst_margin:.3}"),
    );
}

/// Criterion 8: every production T-matrix entry matches a from-scratch
/// dense linear-algebra computation to relative error 1e-8 at eta in
/// {0.2, 0.1}, at both desk cutoffs.
#[test]
fn criterion_08_dense_oracle_equivalence() {
    let mut worst = 0.0f64;
    let mut dims = String::new();
    for cutoff in [2usize, 3] {
        let ctx = context(0.1, cutoff);
        dims.push_str(&format!("dim {}  ", ctx.system.dim()));
        let m = ctx.system.modes().len();
        for i in 0..m {
            for j in 0..m {
                for eta in [0.2, 0.1] {
                    let fast = ctx.t_matrix_entry(i, j, eta).unwrap();
                    let oracle = ctx.t_matrix_entry_dense(i, j, eta).unwrap();
                    let rel =
                        (fast.total - oracle.total).norm() / oracle.total.norm().max(1e-12);
                    worst = worst.max(rel);
                }
            }
        }
    }
    criterion(
        8,
        "dense-oracle T-matrix equivalence",
        worst <= 1e-8,
        &format!("{dims}worst relative defect {worst:.3e}"),
    );
}

/// Criterion 9: the scattering formula at finite eps holds within the
/// logged budget for shared-shell and disjoint-shell packets, and the
/// on-shell enhancement grows monotonically as eps shrinks.
#[test]
fn criterion_09_scattering_formula_finite_eps() {
    let ctx = context(0.1, 2);
    let grid = ctx.system.modes();
    let eps_schedule = [0.4, 0.2, 0.1];
    let f_on = PhotonFunction::indicator(grid, 0);
    let h_on = PhotonFunction::indicator(grid, 1);
    let h_off = PhotonFunction::indicator(grid, 2);
    assert_eq!(grid.omega(0), grid.omega(1));
    assert!((grid.omega(2) - grid.omega(0) - 0.5).abs() < 1e-14);

    let on = ctx.s_matrix(&f_on, &h_on, &eps_schedule).unwrap();
    let off = ctx.s_matrix(&f_on, &h_off, &eps_schedule).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    let mut prev_ratio = 0.0f64;
    let mut monotone = true;
    for (p_on, p_off) in on.sweep.iter().zip(&off.sweep) {
        pass &= p_on.discrepancy <= p_on.budget && p_off.discrepancy <= p_off.budget;
        let ratio = p_on.rhs.norm() / p_off.rhs.norm().max(1e-300);
        monotone &= ratio > prev_ratio;
        prev_ratio = ratio;
        detail.push_str(&format!(
            "eps {}: disc {:.2e} <= budget {:.2e}, on/off {:.2e}  ",
            p_on.eps, p_on.discrepancy, p_on.budget, ratio
        ));
    }
    criterion(
        9,
        "scattering formula at finite eps",
        pass && monotone,
        detail.trim(),
    );
}

/// Criterion 10: creation-bound ratios stay under the calibrated ceilings
/// over 50 draws, and the form bound produces a finite constant, monotone
/// in eps, with a nonnegative verified spectrum.
#[test]
fn criterion_10_appendix_bounds() {
    let config = desk_config(0.1, 2);
    let system = config.build_system().unwrap();
    let grid = system.modes().clone();
    let basis = system.fock().clone();
    let opts = config.solver_options(None);
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    for _ in 0..50 {
        let h1 = random_photon(&grid, &mut rng);
        let kind1 =
            if rng.gen_bool(0.5) { LadderKind::Create } else { LadderKind::Annihilate };
        worst1 = worst1
            .max(verify_creation_bound(&grid, &basis, &[(kind1, h1.clone())], &opts).unwrap());
        let h2 = random_photon(&grid, &mut rng);
        let kind2 =
            if rng.gen_bool(0.5) { LadderKind::Create } else { LadderKind::Annihilate };
        worst2 = worst2.max(
            verify_creation_bound(&grid, &basis, &[(kind1, h1), (kind2, h2)], &opts).unwrap(),
        );
    }

    // Shallow double well: nontrivial negative part with H >= 0.
    let mut dw = desk_config(0.1, 2);
    dw.model.potential = "double_well".into();
    dw.model.potential_params = pauli_fierz::config::PotentialParams {
        quartic: Some(0.5),
        quadratic: Some(1.0),
        ..Default::default()
    };
    dw.discretization.matter_points = 24;
    dw.discretization.matter_extent = 12.0;
    let dw_system = dw.build_system().unwrap();
    let dw_h = dw_system.hamiltonian();
    let fb_half = verify_form_bound(&dw_system, &dw_h.total, 0.5, &opts).unwrap();
    let fb_quarter = verify_form_bound(&dw_system, &dw_h.total, 0.25, &opts).unwrap();

    let pass = worst1 <= CREATION_BOUND_C1
        && worst2 <= CREATION_BOUND_C2
        && fb_half.d_eps.is_finite()
        && fb_half.d_eps > 0.0
        && fb_half.d_eps <= fb_quarter.d_eps + 1e-6
        && fb_half.verified_min_eig >= -1e-10
        && fb_quarter.verified_min_eig >= -1e-10;
    criterion(
        10,
        "appendix bound diagnostics",
        pass,
        &format!(
            "ratios {worst1:.3} <= {CREATION_BOUND_C1}, {worst2:.3} <= {CREATION_BOUND_C2}; \
             D_0.5 = {:.4e} <= D_0.25 = {:.4e}, min eig {:.2e}",
            fb_half.d_eps, fb_quarter.d_eps, fb_half.verified_min_eig
        ),
    );
}

/// Criterion 11: identical configuration and seed produce byte-identical
/// CSV/JSON artifacts.
#[test]
fn criterion_11_reproducibility() {
    let mut config = desk_config(0.1, 2);
    config.discretization.matter_points = 16;
    config.solver.eta_schedule = vec![0.4, 0.2, 0.1];
    config.solver.eps_schedule = vec![0.2, 0.1];

    let run = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let r1 = runner::cmd_tmatrix(&config, dir, None).unwrap();
        assert!(r1.passed, "{}", r1.render_text());
        let r2 = runner::cmd_smatrix(&config, dir, None).unwrap();
        assert!(r2.passed, "{}", r2.render_text());
        let mut files: Vec<(String, Vec<u8>)> = ["tmatrix.csv", "smatrix.json", "report.json"]
            .iter()
            .map(|name| (name.to_string(), std::fs::read(dir.join(name)).unwrap()))
            .collect();
        files.sort();
        files
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run(dir_a.path());
    let b = run(dir_b.path());
    let identical = a == b;
    criterion(
        11,
        "byte-identical reproducibility",
        identical,
        &format!("{} artifacts compared", a.len()),
    );
}

/// The report type used by the commands preserves check metadata; exercised
/// here so the acceptance target also covers the exit-code contract.
#[test]
fn verify_command_passes_on_desk_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(0.1, 2);
    let outcome: pauli_fierz::Result<RunReport> =
        runner::cmd_verify(&config, dir.path(), None);
    let report = outcome.unwrap();
    println!("{}", report.render_text());
    assert!(report.passed, "verification suite must pass on the desk configuration");
    assert_eq!(runner::exit_code(&Ok(report)), 0);
}
