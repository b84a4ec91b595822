//! Unitary time evolution under the coupled Hamiltonian by two methods:
//! spectral (dense eigendecomposition) and adaptive Krylov stepping.

use pauli_fierz::config::RunConfig;
use pauli_fierz::linalg;
use pauli_fierz::scattering::{PropagationMethod, ScatteringContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut config = RunConfig::default();
    config.model.charge = 0.1;
    let system = config.build_system().unwrap();
    let ctx = ScatteringContext::new(system, config.solver_options(None)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let psi = linalg::random_vector(ctx.system.dim(), &mut rng);

    println!("dense vs Krylov propagation on a random state (dim {}):", ctx.system.dim());
    for t in [0.5, 2.0, 5.0, -3.0] {
        let dense = ctx.propagate(&psi, t, PropagationMethod::Dense).unwrap();
        let krylov = ctx.propagate(&psi, t, PropagationMethod::Krylov).unwrap();
        println!(
            "  t = {t:>5}: |dense - krylov| = {:.3e}, norm drift = {:.3e}",
            (&dense - &krylov).norm(),
            (dense.norm() - psi.norm()).abs()
        );
    }

    // The ground state only rotates by its energy phase.
    let t = 3.0;
    let evolved = ctx
        .propagate(&ctx.ground.state.data, t, PropagationMethod::Dense)
        .unwrap();
    let phase = num_complex::Complex64::from_polar(1.0, -ctx.energy() * t);
    println!(
        "\nground state at t = {t}: |psi(t) - e^(-i E t) psi| = {:.3e}",
        (&evolved - &(&ctx.ground.state.data * phase)).norm()
    );
}
