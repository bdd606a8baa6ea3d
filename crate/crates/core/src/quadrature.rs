//! Quadrature rules on the reference triangle `{(x, y) : x, y ≥ 0, x + y ≤ 1}`.

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub name: &'static str,
    /// Polynomial degree integrated exactly.
    pub degree: u32,
    /// Barycentric coordinates `(λ0, λ1, λ2)`; the reference point is `(λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    /// Reference-triangle weights, summing to ½.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Symmetric 6-point rule of Dunavant, exact for degree 4.
    pub fn degree4() -> Self {
        let a = 0.445_948_490_915_965;
        let wa = 0.223_381_589_678_011 / 2.0;
        let b = 0.091_576_213_509_771;
        let wb = 0.109_951_743_655_322 / 2.0;
        let orbit = |p: f64| {
            let q = 1.0 - 2.0 * p;
            [[q, p, p], [p, q, p], [p, p, q]]
        };
        let mut points = Vec::with_capacity(6);
        points.extend(orbit(a));
        points.extend(orbit(b));
        Self {
            name: "dunavant-6",
            degree: 4,
            points,
            weights: vec![wa, wa, wa, wb, wb, wb],
        }
    }

    /// Edge-midpoint rule, exact for degree 2.
    pub fn degree2() -> Self {
        Self {
            name: "edge-midpoint-3",
            degree: 2,
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f(x, y)` over the reference triangle.
    pub fn integrate_reference(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }
}

/// Exact `∫ x^a y^b` over the reference triangle, `a! b! / (a + b + 2)!`.
pub fn reference_monomial(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_exactness(rule: &QuadratureRule) {
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 0.5).abs() < 1e-14);
        for p in &rule.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        for a in 0..=rule.degree {
            for b in 0..=(rule.degree - a) {
                let q = rule.integrate_reference(|x, y| x.powi(a as i32) * y.powi(b as i32));
                let exact = reference_monomial(a, b);
                assert!(
                    (q - exact).abs() < 1e-14,
                    "{}: x^{a} y^{b}: {q} vs {exact}",
                    rule.name
                );
            }
        }
    }

    #[test]
    fn degree4_rule_is_exact() {
        check_exactness(&QuadratureRule::degree4());
    }

    #[test]
    fn degree2_rule_is_exact() {
        check_exactness(&QuadratureRule::degree2());
    }

    #[test]
    fn degree4_rule_is_not_exact_for_degree5() {
        let r = QuadratureRule::degree4();
        let q = r.integrate_reference(|x, _| x.powi(5));
        assert!((q - reference_monomial(5, 0)).abs() > 1e-8);
    }
}
