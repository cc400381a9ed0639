//! Small dense linear-algebra helpers on top of nalgebra: the polar factor,
//! sign-fixed thin QR, and column normalization.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Polar decomposition `M = U H` of a tall `n × R` matrix.
#[derive(Debug, Clone)]
pub struct Polar {
    /// Orthonormal-column factor; maximizes `⟨M, Q⟩` over `QᵀQ = I`.
    pub u: DMatrix<f64>,
    /// Symmetric positive semidefinite `R × R` factor.
    pub h: DMatrix<f64>,
}

/// Computes `U = P Qᵀ` and `H = Q Ξ Qᵀ` from the thin SVD `M = P Ξ Qᵀ`.
///
/// The SVD is taken of the square `R` factor of a thin QR of `M`. Singular
/// vector signs are fixed so the largest-magnitude entry of each left singular
/// vector is positive. If the singular vectors fail a residual check and `R` is
/// invertible, scaled Newton iteration on `R` is used instead. With a
/// rank-deficient `M` the factor `U` is not unique.
pub fn polar(m: &DMatrix<f64>) -> Result<Polar> {
    let (n, r) = m.shape();
    if n < r {
        return Err(Error::structural(format!(
            "polar factor of a {n}×{r} matrix cannot have orthonormal columns"
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(numerical("non-finite entry passed to the polar decomposition"));
    }
    let qr = m.clone().qr();
    let q0 = qr.q();
    let rr = qr.r();
    let scale = rr.norm().max(f64::MIN_POSITIVE);
    let asymmetry = |w: &DMatrix<f64>| {
        let h = w.transpose() * &rr;
        (&h - h.transpose()).norm()
    };
    let mut w = square_polar_svd(&rr)?;
    if !(asymmetry(&w) <= 1e-13 * scale) {
        if let Some(x) = square_polar_newton(&rr) {
            if !(asymmetry(&x) >= asymmetry(&w)) {
                w = x;
            }
        }
    }
    let u = &q0 * &w;
    let h = w.transpose() * &rr;
    let h = (&h + h.transpose()) * 0.5;
    Ok(Polar { u, h })
}

fn numerical(what: &str) -> Error {
    Error::Numerical {
        iter: 0,
        what: what.into(),
    }
}

fn square_polar_svd(rr: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = rr
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| numerical("SVD did not converge"))?;
    let mut p = svd.u.expect("requested left singular vectors");
    let mut qt = svd.v_t.expect("requested right singular vectors");
    for i in 0..p.ncols() {
        let pivot = p
            .column(i)
            .iter()
            .fold(0.0f64, |best, &x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            p.column_mut(i).neg_mut();
            qt.row_mut(i).neg_mut();
        }
    }
    Ok(p * qt)
}

/// Scaled Newton iteration `X ← (γX + X⁻ᵀ/γ)/2` for an invertible square matrix.
fn square_polar_newton(rr: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut x = rr.clone();
    for _ in 0..100 {
        let inv = x.clone().try_inverse()?;
        let gamma = (inv.norm() / x.norm()).sqrt();
        let next = (&x * gamma + inv.transpose() / gamma) * 0.5;
        let change = (&next - &x).norm();
        x = next;
        if change <= 1e-15 * x.norm() {
            break;
        }
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Thin QR orthonormalization with `diag(R) ≥ 0`. Requires `nrows ≥ ncols`.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, r) = m.shape();
    if n < r {
        return Err(Error::structural(format!(
            "cannot orthonormalize {r} columns in dimension {n}"
        )));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let rr = qr.r();
    for i in 0..r {
        if rr[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

/// Scales every column to unit norm. A zero column is an error.
pub fn normalize_columns(m: &mut DMatrix<f64>) -> Result<()> {
    for (i, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::structural(format!(
                "column {i} has norm {norm} and cannot be normalized"
            )));
        }
        col /= norm;
    }
    Ok(())
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniformly distributed point on the Stiefel manifold `St(n, r)`.
pub fn random_stiefel(n: usize, r: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    orthonormalize(&gaussian_matrix(n, r, rng))
}
