use gl_lod::assembly::*;
use gl_lod::mesh::TriMesh;
use gl_lod::potential::MagneticPotential;
use gl_lod::quadrature::QuadratureRule;
use num_complex::Complex64;

#[test]
fn pure_gauge_field_has_vanishing_magnetic_energy() {
    // A = ∇x and v = exp(iκx) give i/κ ∇v + A v = 0
    let kappa = 3.0;
    let pot = MagneticPotential::new("uniform-x", 1.0, |_, _| [1.0, 0.0]);
    let mut prev = f64::INFINITY;
    for level in [3, 4, 5] {
        let mesh = TriMesh::structured(level);
        let a = assemble_abeta(&mesh, &pot, kappa, 0.0, &QuadratureRule::degree4()).unwrap();
        let v: Vec<Complex64> = mesh
            .vertices
            .iter()
            .map(|p| Complex64::from_polar(1.0, kappa * p[0]))
            .collect();
        let e = a.form(&v, &v);
        assert!(e < prev / 3.0, "level {level}: {e}");
        prev = e;
        let w: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        assert!((a.form(&w, &w) - 4.0).abs() < 0.3);
    }
    assert!(prev < 5e-3);
}
