//! The Cauchy loss and its half-quadratic reweighting.
//!
//! `φ_δ(t) = (δ²/2) log(1 + t²/δ²)` can be written as
//! `min_{ω ≥ 0} (ω/2) t² + (δ²/2) ρ(ω)` with `ρ(ω) = ω − log ω − 1`, the
//! minimum being attained at `ω* = δ² / (δ² + t²)`. The solver uses `ω*` as a
//! per-entry weight: large residuals get small weights.

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Scale parameter `δ` of the Cauchy loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyParams {
    delta: f64,
}

impl CauchyParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::domain(format!(
                "delta must be positive and finite, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phi(&self, t: f64) -> f64 {
        phi(t, self.delta)
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        phi_prime(t, self.delta)
    }

    pub fn weight(&self, t: f64) -> f64 {
        hq_weight(t, self.delta)
    }
}

/// `φ_δ(t) = (δ²/2) log(1 + t²/δ²)`.
pub fn phi(t: f64, delta: f64) -> f64 {
    let r = t / delta;
    0.5 * delta * delta * (r * r).ln_1p()
}

/// `φ'_δ(t) = δ² t / (δ² + t²)`. Odd, bounded by `δ/2`, and redescending.
pub fn phi_prime(t: f64, delta: f64) -> f64 {
    let r = t / delta;
    t / (1.0 + r * r)
}

/// Optimal half-quadratic weight `ω* = δ² / (δ² + t²)`, in `(0, 1]`.
pub fn hq_weight(t: f64, delta: f64) -> f64 {
    let r = t / delta;
    1.0 / (1.0 + r * r)
}

/// `ρ(ω) = ω − log ω − 1` for `ω > 0`.
///
/// Near `ω = 1`, where `ω − 1` is exact, `log1p` avoids cancellation. Far
/// from it the direct form keeps the relative accuracy of small weights.
pub fn rho(omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::domain(format!(
            "rho is defined for positive weights, got {omega}"
        )));
    }
    if (0.5..=2.0).contains(&omega) {
        let x = omega - 1.0;
        Ok(x - x.ln_1p())
    } else {
        Ok(omega - omega.ln() - 1.0)
    }
}

/// `Σ φ_δ` over every entry of a residual tensor.
pub fn total_loss(residual: &DenseTensor, delta: f64) -> f64 {
    residual.data().iter().map(|&t| phi(t, delta)).sum()
}

/// Value of the half-quadratic objective
/// `½ Σ w (r)² + (δ²/2) Σ ρ(w)` for given residuals and weights.
pub fn hq_objective(residual: &DenseTensor, weights: &DenseTensor, delta: f64) -> Result<f64> {
    if residual.dims() != weights.dims() {
        return Err(Error::structural("residual and weight dims differ"));
    }
    let mut quad = 0.0;
    let mut pen = 0.0;
    for (&r, &w) in residual.data().iter().zip(weights.data()) {
        quad += w * r * r;
        pen += rho(w)?;
    }
    Ok(0.5 * quad + 0.5 * delta * delta * pen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values() {
        assert_eq!(phi(0.0, 0.3), 0.0);
        assert!((phi(1.0, 1.0) - 0.346_573_590_279_972_65).abs() < 1e-15);
        assert_eq!(phi(2.0, 0.5), phi(-2.0, 0.5));
    }

    #[test]
    fn phi_below_quadratic() {
        for k in -200..=200 {
            let t = k as f64 * 0.05;
            for &delta in &[0.05, 0.5, 1.0, 5.0] {
                assert!(phi(t, delta) <= 0.5 * t * t + 1e-15);
            }
            let far = phi(t, 1e6);
            assert!((far - 0.5 * t * t).abs() <= 1e-9 * (1.0 + t * t));
        }
    }

    #[test]
    fn phi_prime_values() {
        assert_eq!(phi_prime(0.0, 1.0), 0.0);
        for &delta in &[0.05, 1.0, 3.0] {
            assert!((phi_prime(delta, delta) - delta / 2.0).abs() < 1e-15);
            assert_eq!(phi_prime(-0.7, delta), -phi_prime(0.7, delta));
        }
        assert!(phi_prime(1e9, 1.0) < 1e-8);
    }

    #[test]
    fn weights() {
        assert_eq!(hq_weight(0.0, 0.05), 1.0);
        assert!((hq_weight(0.05, 0.05) - 0.5).abs() < 1e-15);
        assert!(hq_weight(10.0, 0.05) < hq_weight(0.1, 0.05));
        assert!(hq_weight(1e6, 0.05) > 0.0);
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(1.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((rho(e).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!(rho(-0.1).is_err());
        assert!(rho(0.0).is_err());
        assert!(rho(f64::NAN).is_err());
    }

    #[test]
    fn rho_keeps_relative_accuracy_for_tiny_weights() {
        // ρ(ω) = −ln ω − 1 + ω; for ω = 1e-12 every digit of ln ω matters.
        let w = 1e-12;
        let exact = 12.0 * std::f64::consts::LN_10 - 1.0 + w;
        assert!((rho(w).unwrap() - exact).abs() <= 4.0 * f64::EPSILON * exact);
        for w in [0.49, 0.5, 1.0 - 1e-9, 1.0 + 1e-9, 2.0, 2.01] {
            let direct = w - f64::ln(w) - 1.0;
            assert!((rho(w).unwrap() - direct).abs() <= 1e-15, "{w}");
        }
    }

    #[test]
    fn params_validate() {
        assert!(CauchyParams::new(0.0).is_err());
        assert!(CauchyParams::new(f64::INFINITY).is_err());
        let p = CauchyParams::new(0.05).unwrap();
        assert_eq!(p.weight(0.05), hq_weight(0.05, 0.05));
    }

    #[test]
    fn total_loss_closed_forms() {
        let z = DenseTensor::zeros(vec![3, 4]).unwrap();
        assert_eq!(total_loss(&z, 0.05), 0.0);
        let delta = 0.3;
        let t = DenseTensor::filled(vec![3, 4], delta).unwrap();
        let want = 12.0 * 0.5 * delta * delta * std::f64::consts::LN_2;
        assert!((total_loss(&t, delta) - want).abs() < 1e-14);
    }

    #[test]
    fn total_loss_equals_hq_form_at_optimal_weights() {
        let delta = 0.05;
        let r = DenseTensor::from_fn(vec![5, 6, 7], |i| {
            ((i[0] * 31 + i[1] * 7 + i[2]) as f64 * 0.913).sin() * (i[2] as f64 + 0.1)
        })
        .unwrap();
        let w = r.map(|t| hq_weight(t, delta));
        let hq = hq_objective(&r, &w, delta).unwrap();
        assert!((hq - total_loss(&r, delta)).abs() < 1e-10);
    }
}
