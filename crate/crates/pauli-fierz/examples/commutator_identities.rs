//! The two commutator identities behind the scattering theory, checked as
//! residuals: `[W, a*(h)] = sum_i w_i h_i D1(K_i)` with
//! `W = sum_j (p_j + A(x_j))^2 + mu S_j . B(x_j)`, and
//! `[a(h), D1(K)] = sum_j w_j conj(h_j) D2(K, K_j)`. Both close exactly on
//! the guarded subspace; pushing states toward the photon cutoff shows the
//! truncation guard doing its job.

use num_complex::Complex64;
use pauli_fierz::config::RunConfig;
use pauli_fierz::fock::StateVector;
use pauli_fierz::modes::PhotonFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut config = RunConfig::default();
    config.model.charge = 0.15;
    config.discretization.photon_cutoff = 3;
    config.discretization.matter_points = 16;
    let system = config.build_system().unwrap();
    let grid = system.modes().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    println!("guard = photon number the random state is capped at");
    println!("(identities are exact only up to n_max - 2 = {})\n", system.fock().n_max() - 2);
    for guard in 0..=system.fock().n_max() {
        let psi = StateVector::random_guarded(system.matter_dim(), system.fock(), guard, &mut rng);
        let h = PhotonFunction::from_fn(&grid, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut worst1 = 0.0f64;
        let mut worst2 = 0.0f64;
        for i in 0..grid.len() {
            let indicator = PhotonFunction::indicator(&grid, i);
            worst1 = worst1.max(system.comm1_residual(&indicator, &psi.data));
            worst2 = worst2.max(system.comm2_residual(i, &h, &psi.data));
        }
        println!("guard {guard}: comm1 residual {worst1:.3e}, comm2 residual {worst2:.3e}");
    }

    // D2 at coincident modes is a positive multiple of the identity.
    println!("\nD2 diagonal values (coincident modes):");
    for i in 0..grid.len() {
        let d2 = system.d2_value(i, i);
        println!(
            "  mode {i}: D2(K,K) = {:.6e} (constant across the matter grid: {})",
            d2.values()[0].re,
            d2.values().iter().all(|v| (v - d2.values()[0]).norm() < 1e-15)
        );
    }
}
