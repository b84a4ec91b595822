//! Ground states of the coupled Hamiltonian: the decoupled check against
//! the bare atomic problem, photon dressing at weak coupling, and the
//! photon-number content of the interacting ground state.

use pauli_fierz::config::RunConfig;
use pauli_fierz::spectral::{atomic_ground, ground_state};

fn main() {
    // Zero coupling: the ground state is exactly (atomic ground) x vacuum.
    let mut config = RunConfig::default();
    config.model.charge = 0.0;
    let system = config.build_system().unwrap();
    let opts = config.solver_options(None);
    let h = system.hamiltonian();
    let gs = ground_state(&h.total, system.fock(), system.matter_dim(), &opts).unwrap();
    let atomic = atomic_ground(&system).unwrap();
    println!("decoupled run (charge 0):");
    println!("  E_gs          = {:+.12e}", gs.energy);
    println!("  E_atomic      = {:+.12e}", atomic.energy);
    println!("  |difference|  = {:.3e}", (gs.energy - atomic.energy).abs());
    println!("  residual      = {:.3e}, gap = {:.4}", gs.residual, gs.gap);

    // Weak coupling dresses the atom with photons; the sector weights show
    // how much amplitude each photon number carries, and the top sector
    // quantifies the truncation error every identity check inherits.
    for charge in [0.05, 0.1, 0.2] {
        let mut config = RunConfig::default();
        config.model.charge = charge;
        let system = config.build_system().unwrap();
        let h = system.hamiltonian();
        let gs = ground_state(&h.total, system.fock(), system.matter_dim(), &opts).unwrap();
        let sectors = gs.state.sector_weights(system.fock());
        println!("\ncharge {charge}: E_gs = {:+.10e} ({} Lanczos iterations)", gs.energy, gs.iterations);
        for (n, w) in sectors.iter().enumerate() {
            println!("  photon sector {n}: weight {w:.6e}");
        }
        println!("  top-sector weight (truncation handle): {:.3e}", gs.top_sector_weight);
    }
}
