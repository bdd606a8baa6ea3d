use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use gl_lod::assembly::assemble_mass;
use gl_lod::field::ComplexField;
use gl_lod::glenergy::EnergyContext;
use gl_lod::lodspace::{build_lod_space, LodProblem};
use gl_lod::mesh::build_hierarchy;
use gl_lod::minimize::{initial_guess, minimize, MinimizeConfig, SpaceChoice};
use gl_lod::potential::MagneticPotential;

fn fine_ctx(kappa: f64) -> EnergyContext {
    let mh = Arc::new(build_hierarchy(2, 4).unwrap());
    EnergyContext::fine(mh, MagneticPotential::sinusoidal(), kappa).unwrap()
}

#[test]
fn unit_state_energy_is_half_the_potential_norm() {
    // ∫|A|² = 1 for the default potential, so E(1) = ½
    let mh = Arc::new(build_hierarchy(3, 6).unwrap());
    let ctx = EnergyContext::fine(mh, MagneticPotential::sinusoidal(), 8.0).unwrap();
    let one = ComplexField::constant(ctx.space(), Complex64::new(1.0, 0.0));
    assert!((ctx.energy(&one).unwrap() - 0.5).abs() < 1e-4);
    let zero = ComplexField::zeros(ctx.space());
    assert!((ctx.energy(&zero).unwrap() - 0.25).abs() < 1e-14);
}

#[test]
fn energy_is_gauge_invariant_in_every_space() {
    let pot = MagneticPotential::sinusoidal();
    let mh = Arc::new(build_hierarchy(2, 4).unwrap());
    let lod = Arc::new(
        build_lod_space(
            &LodProblem::new(Arc::clone(&mh), pot.clone(), 8.0, 1.0).unwrap(),
            2,
        )
        .unwrap(),
    );
    let ctxs = [
        EnergyContext::fine(Arc::clone(&mh), pot.clone(), 8.0).unwrap(),
        EnergyContext::coarse(Arc::clone(&mh), pot.clone(), 8.0).unwrap(),
        EnergyContext::lod(lod, pot).unwrap(),
    ];
    for ctx in &ctxs {
        let v = initial_guess(ctx.space(), 11);
        let e = ctx.energy(&v).unwrap();
        for omega in [0.5, 2.0, -1.1] {
            assert!((ctx.energy(&v.rotate(omega)).unwrap() - e).abs() < 1e-13);
        }
    }
}

#[test]
fn gradient_is_orthogonal_to_the_gauge_direction() {
    let ctx = fine_ctx(8.0);
    let v = initial_guess(ctx.space(), 4);
    let g = ctx.gradient(&v).unwrap();
    let iv = v.times_i();
    let scale = g.dot(&g).sqrt() * iv.dot(&iv).sqrt();
    assert!(EnergyContext::pair(&g, &iv).abs() < 1e-12 * scale);
}

#[test]
fn minimizers_are_deterministic_and_subspaces_cost_energy() {
    let pot = MagneticPotential::sinusoidal();
    let mut fine = MinimizeConfig::new(SpaceChoice::FineFem, 8.0, 2, 5);
    fine.descent.residual_tol = Some(1e-8);
    let (_, a) = minimize(&fine, &pot).unwrap();
    let (_, b) = minimize(&fine, &pot).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    assert!(a.residual <= 1e-8);
    assert!(a.energy_trace.windows(2).all(|w| w[1] <= w[0]));

    let mut lod = MinimizeConfig::new(SpaceChoice::Lod, 8.0, 2, 5);
    lod.ell = 2;
    lod.descent.residual_tol = Some(1e-8);
    let (_, l) = minimize(&lod, &pot).unwrap();
    assert!(l.energy >= a.energy - 1e-8);
}

#[test]
fn mass_of_constant_is_area() {
    let m = assemble_mass(&gl_lod::mesh::TriMesh::structured(3));
    let ones = vec![Complex64::new(1.0, 0.0); m.nrows()];
    assert!((m.form(&ones, &ones) - 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_invariant_under_random_phases(seed in 0u64..10_000, omega in -6.3f64..6.3) {
        let ctx = fine_ctx(6.0);
        let v = initial_guess(ctx.space(), seed);
        let e = ctx.energy(&v).unwrap();
        prop_assert!((ctx.energy(&v.rotate(omega)).unwrap() - e).abs() < 1e-13);
    }

    #[test]
    fn line_delta_agrees_with_energy_difference(seed in 0u64..10_000, tau in 0.0f64..2.0) {
        let ctx = fine_ctx(8.0);
        let v = initial_guess(ctx.space(), seed);
        let d = initial_guess(ctx.space(), seed + 1);
        let direct = ctx.energy(&v.axpy(-tau, &d).unwrap()).unwrap() - ctx.energy(&v).unwrap();
        let line = ctx.line(&v, &d).unwrap().delta(tau);
        prop_assert!((direct - line).abs() < 1e-12 * (1.0 + direct.abs()));
    }
}
