use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

type Eval = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync;

/// A prescribed real vector potential `A: [0,1]² -> R²`.
#[derive(Clone)]
pub struct MagneticPotential {
    pub name: String,
    eval: Arc<Eval>,
    /// `‖A‖_{L∞}`.
    pub sup_norm: f64,
}

impl fmt::Debug for MagneticPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagneticPotential")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl MagneticPotential {
    pub fn new(
        name: impl Into<String>,
        sup_norm: f64,
        eval: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            sup_norm,
        }
    }

    /// `A(x, y) = √2 (sin πx cos πy, −cos πx sin πy)`.
    pub fn sinusoidal() -> Self {
        Self::new("sinusoidal", SQRT_2, |x, y| {
            let (sx, cx) = (PI * x).sin_cos();
            let (sy, cy) = (PI * y).sin_cos();
            [SQRT_2 * sx * cy, -SQRT_2 * cx * sy]
        })
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, |_, _| [0.0, 0.0])
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        (self.eval)(x, y)
    }

    /// Smallest β for which `a_β(v, v) ≥ ½ ‖v‖²_{H¹_κ}` is guaranteed.
    pub fn coercive_beta(&self) -> f64 {
        0.5 + self.sup_norm * self.sup_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_potential_is_divergence_free_and_tangential() {
        let a = MagneticPotential::sinusoidal();
        let h = 1e-5;
        for k in 0..50 {
            let x = 0.013 + 0.0197 * k as f64;
            let y = (0.71 * k as f64).fract();
            let div = (a.eval(x + h, y)[0] - a.eval(x - h, y)[0]) / (2.0 * h)
                + (a.eval(x, y + h)[1] - a.eval(x, y - h)[1]) / (2.0 * h);
            assert!(div.abs() < 1e-8, "div A = {div}");
            // A·n on the four sides
            assert!(a.eval(0.0, y)[0].abs() < 1e-15);
            assert!(a.eval(1.0, y)[0].abs() < 1e-15);
            assert!(a.eval(y, 0.0)[1].abs() < 1e-15);
            assert!(a.eval(y, 1.0)[1].abs() < 1e-15);
        }
    }

    #[test]
    fn sup_norm_is_attained() {
        let a = MagneticPotential::sinusoidal();
        let v = a.eval(0.5, 0.0);
        assert!((v[0].hypot(v[1]) - a.sup_norm).abs() < 1e-15);
    }
}
