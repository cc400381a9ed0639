//! Least-squares baseline: alternating least squares for
//! `min ‖A − ⟦σ;U⟧‖_F` under the same column constraints as HQ-ADMM.
//!
//! One sweep visits the modes in order. Orthonormal modes take the polar
//! factor of `A_(j) · KR(others) · diag(σ)`; unit-column modes take the
//! normalized least-squares direction. `σ` is then refit by projection,
//! which is the exact least-squares weight when at least one mode is
//! orthonormal.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cp::{CpModel, ModeKind};
use crate::error::{Error, Result};
use crate::linalg::polar;
use crate::solver::{
    check_finite_model, check_model_matches, fit, project_sigma, random_model, IterationRecord,
    SolveResult,
};
use crate::tensor::{khatri_rao, DenseTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct AlsConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Record the fit of every sweep.
    pub diagnostics: bool,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-6,
            seed: 0,
            diagnostics: false,
        }
    }
}

pub fn als_solve(
    a: &DenseTensor,
    rank: usize,
    t: usize,
    config: &AlsConfig,
) -> Result<SolveResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = random_model(a.dims(), rank, t, &mut rng)?;
    als_solve_from(a, model, config)
}

pub fn als_solve_from(a: &DenseTensor, mut model: CpModel, config: &AlsConfig) -> Result<SolveResult> {
    if config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::domain("max_iter and tol must be positive"));
    }
    check_model_matches(&model, a)?;
    if !a.is_finite() {
        return Err(Error::domain("data tensor contains non-finite values"));
    }
    project_sigma(a, &mut model)?;
    let unfoldings = (0..a.order())
        .map(|j| a.matricize(j))
        .collect::<Result<Vec<_>>>()?;

    let mut prev = fit(&model, a)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        sweep(&unfoldings, &mut model, iterations + 1)?;
        project_sigma(a, &mut model)?;
        iterations += 1;
        check_finite_model(&model, iterations)?;
        let f = fit(&model, a)?;
        if config.diagnostics {
            trace.push(IterationRecord {
                iter: iterations,
                fit: f,
                ..Default::default()
            });
        }
        if (f - prev).abs() <= config.tol {
            converged = true;
            prev = f;
            break;
        }
        prev = f;
    }
    Ok(SolveResult {
        model,
        iterations,
        final_fit: prev,
        converged,
        trace: config.diagnostics.then_some(trace),
    })
}

/// One Gauss–Seidel pass over the factor matrices; `σ` is held fixed.
fn sweep(unfoldings: &[DMatrix<f64>], model: &mut CpModel, iter: usize) -> Result<()> {
    let d = model.order();
    for (j, unfolding) in unfoldings.iter().enumerate() {
        let others: Vec<&DMatrix<f64>> = (0..d).filter(|&l| l != j).map(|l| &model.factors[l]).collect();
        // Column i is the contraction of A with the mode-l columns i, l ≠ j.
        let m = unfolding * khatri_rao(&others)?;
        match model.modes[j] {
            ModeKind::Orthonormal => {
                let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&model.sigma));
                model.factors[j] = polar(&(m * sigma)).map(|p| p.u).map_err(|e| match e {
                    Error::Numerical { what, .. } => Error::Numerical { iter, what },
                    other => other,
                })?;
            }
            ModeKind::UnitColumns => {
                // Least-squares B = A_(j) KR G⁻¹ with G the Hadamard product of
                // the other Gram matrices, then U_j = B diag(σ)⁻¹ normalized.
                let r = model.rank();
                let mut gram = DMatrix::from_element(r, r, 1.0);
                for u in &others {
                    gram.component_mul_assign(&(u.transpose() * *u));
                }
                let b = gram
                    .clone()
                    .cholesky()
                    .map(|c| c.solve(&m.transpose()).transpose())
                    .or_else(|| gram.pseudo_inverse(1e-12).ok().map(|p| &m * p))
                    .ok_or_else(|| Error::Numerical {
                        iter,
                        what: "singular Gram matrix in least-squares factor update".into(),
                    })?;
                for i in 0..r {
                    let col = b.column(i);
                    let norm = col.norm();
                    if norm > 0.0 && norm.is_finite() {
                        let sign = if model.sigma[i] < 0.0 { -1.0 } else { 1.0 };
                        model.factors[j].set_column(i, &(col * (sign / norm)));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn exact(dims: &[usize], rank: usize, t: usize, seed: u64) -> (CpModel, DenseTensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = random_model(dims, rank, t, &mut rng).unwrap();
        m.sigma = (0..rank).map(|i| if i % 2 == 0 { 1.5 + i as f64 } else { -1.0 - i as f64 }).collect();
        let a = m.reconstruct().unwrap();
        (m, a)
    }

    #[test]
    fn truth_init_fits_in_one_sweep() {
        for t in 1..=3 {
            let (m, a) = exact(&[6, 7, 8], 3, t, t as u64);
            let res = als_solve_from(&a, m, &AlsConfig::default()).unwrap();
            assert!(res.iterations <= 1, "t={t}: {} sweeps", res.iterations);
            assert!(res.final_fit < 1e-10, "t={t}: fit {}", res.final_fit);
        }
    }

    #[test]
    fn fit_is_nonincreasing() {
        let (_, mut a) = exact(&[8, 7, 6], 3, 1, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for x in a.data_mut() {
            *x += 0.2 * rng.random::<f64>();
        }
        for t in 1..=2 {
            let cfg = AlsConfig { diagnostics: true, max_iter: 200, seed: 3, ..Default::default() };
            let res = als_solve(&a, 3, t, &cfg).unwrap();
            let trace = res.trace.unwrap();
            for w in trace.windows(2) {
                assert!(w[1].fit <= w[0].fit + 1e-9, "{} -> {}", w[0].fit, w[1].fit);
            }
            assert!(res.model.constraint_error() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (m, a) = exact(&[4, 4, 4], 2, 1, 1);
        let cfg = AlsConfig { max_iter: 0, ..Default::default() };
        assert!(als_solve_from(&a, m, &cfg).is_err());
        assert!(als_solve(&a, 5, 1, &AlsConfig::default()).is_err());
    }
}
