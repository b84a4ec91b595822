//! Resolvent boundary values
//! `<D1(K) psi, (H - E_gs - omega(k') - i eta)^{-1} D1(K') psi>` along a
//! descending eta sweep, with linear extrapolation to eta -> 0 and the
//! stability flag that stands in for membership of the abstract set where
//! the limit exists. One Krylov space per incoming mode serves every eta.

use pauli_fierz::config::RunConfig;
use pauli_fierz::scattering::ScatteringContext;
use pauli_fierz::spectral::boundary_value;

fn main() {
    let mut config = RunConfig::default();
    config.model.charge = 0.1;
    let system = config.build_system().unwrap();
    let opts = config.solver_options(None);
    let ctx = ScatteringContext::new(system, opts.clone()).unwrap();
    let grid = ctx.system.modes();
    let etas = [0.4, 0.2, 0.1, 0.05, 0.025];

    for &(i, j) in &[(0usize, 0usize), (0, 1), (0, 2), (2, 3)] {
        let bv = boundary_value(
            &ctx.hamiltonian.total,
            ctx.dense_matrix(),
            &ctx.d1_psi[i],
            &ctx.d1_psi[j],
            ctx.energy() + grid.omega(j),
            &etas,
            &opts,
        )
        .unwrap();
        println!(
            "pair ({i}, {j}): omega = {:.2} -> {:.2}",
            grid.omega(i),
            grid.omega(j)
        );
        for (eta, value, residual) in &bv.sweep {
            println!(
                "  eta {eta:>6.3}: {:+.8e} {:+.8e}i   (solver residual {residual:.1e})",
                value.re, value.im
            );
        }
        println!(
            "  extrapolated: {:+.8e} {:+.8e}i   stable: {}",
            bv.extrapolated.re, bv.extrapolated.im, bv.stable
        );
        println!("  Cauchy differences along the sweep: {:?}\n", bv.cauchy_diffs);
    }
}
