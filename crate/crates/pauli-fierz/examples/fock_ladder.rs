//! Occupation-number Fock space over a mode grid: basis enumeration, ladder
//! operators with their quadrature-weight convention, and the canonical
//! commutation relations on the guarded subspace.

use num_complex::Complex64;
use pauli_fierz::fock::{binomial, FockBasis, StateVector};
use pauli_fierz::linalg::CVector;
use pauli_fierz::modes::{CutoffSpec, GridSpec, ModeGrid, PhotonFunction, ShellSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let grid = ModeGrid::build(&GridSpec::new(
        1,
        vec![
            ShellSpec { radius: 0.5, directions: 2, weight: 1.0 },
            ShellSpec { radius: 1.0, directions: 2, weight: 1.0 },
        ],
        CutoffSpec::sharp(0.1, 2.0),
    ))
    .unwrap();
    let basis = FockBasis::new(&grid, 2).unwrap();
    println!(
        "Fock basis: {} states = C({} + {}, {})",
        basis.len(),
        grid.len(),
        basis.n_max(),
        basis.n_max()
    );
    assert_eq!(basis.len(), binomial(grid.len() + basis.n_max(), basis.n_max()));
    print!("{}", basis.dump());

    // a*(indicator_i) on the vacuum: one photon with amplitude sqrt(w_i).
    let mut vacuum = CVector::zeros(basis.len());
    vacuum[basis.vacuum()] = Complex64::new(1.0, 0.0);
    let one = basis.create_op(&PhotonFunction::indicator(&grid, 2), 1).apply(&vacuum);
    println!(
        "\na*(e_2) vacuum: norm {:.6} (sqrt of the mode weight {:.3})",
        one.norm(),
        grid.mode(2).weight
    );

    // The weight-free pointwise annihilator undoes it with amplitude one.
    let back = basis.mode_annihilate_op(2, 1).apply(&one);
    println!("a(k_2) a*(e_2) vacuum -> vacuum amplitude {:.6}", back[0].re);

    // Vacuum fluctuation of the field operator: <phi(h)^2> = |h|^2 / 2.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = PhotonFunction::from_fn(&grid, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let phi_vac = basis.field_op(&h, 1).apply(&vacuum);
    println!(
        "\n<vac, phi(h)^2 vac> = {:.8} vs |h|^2 / 2 = {:.8}",
        phi_vac.norm_squared(),
        h.weighted_inner(&h, &grid).re / 2.0
    );

    // CCR on the guarded subspace (photon number below the cutoff).
    let g = PhotonFunction::from_fn(&grid, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let psi = StateVector::random_guarded(1, &basis, basis.n_max() - 1, &mut rng);
    let a_g = basis.annihilate_op(&g, 1);
    let a_star_h = basis.create_op(&h, 1);
    let comm = a_g.apply(&a_star_h.apply(&psi.data)) - a_star_h.apply(&a_g.apply(&psi.data));
    let defect = (&comm - &psi.data * g.weighted_inner(&h, &grid)).norm();
    println!("CCR defect on a guarded state: {defect:.3e}");

    // Truncation convention: creating on the top sector yields zero.
    let top = basis.len() - 1;
    let mut top_state = CVector::zeros(basis.len());
    top_state[top] = Complex64::new(1.0, 0.0);
    let raised = a_star_h.apply(&top_state);
    println!(
        "a*(h) on a top-sector state (occupation {:?}): norm {:.1}",
        basis.occupation(top),
        raised.norm()
    );
}
