//! Pieces shared by HQ-ADMM and the ALS baseline: random initialization,
//! the stopping rule, and the result type.

use rand::Rng;

use crate::cp::{CpModel, ModeKind};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, normalize_columns, orthonormalize};
use crate::tensor::DenseTensor;

/// Output of either solver.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub model: CpModel,
    pub iterations: usize,
    /// `‖⟦σ;U⟧ − A‖_F` at termination.
    pub final_fit: f64,
    /// True when the fit-change criterion fired, false when `max_iter` did.
    pub converged: bool,
    pub trace: Option<Vec<IterationRecord>>,
}

/// Per-iteration diagnostics. The ALS baseline fills only `iter` and `fit`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub fit: f64,
    pub aug_lagrangian: f64,
    pub prox_aug_lagrangian: f64,
    pub primal_residual: f64,
    pub kkt_residual: f64,
    /// `‖Y^{k+1} − Y^k‖_F`.
    pub dual_step: f64,
    /// `‖T^{k+1} − T^k‖_F`.
    pub primal_step: f64,
    /// `max |Y^{k+1} + W^k ⊛ (T^{k+1} − A)|`.
    pub multiplier_identity_error: f64,
}

pub const TRACE_CSV_HEADER: &str =
    "iter,fit,aug_lagrangian,prox_aug_lagrangian,primal_residual,kkt_residual";

/// Renders a trace as CSV with [`TRACE_CSV_HEADER`] columns.
pub fn trace_to_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            r.iter, r.fit, r.aug_lagrangian, r.prox_aug_lagrangian, r.primal_residual, r.kkt_residual
        ));
    }
    out
}

/// Checks `1 ≤ t ≤ d`, `R ≥ 1`, and `R ≤ n_j` on orthonormal modes.
pub fn check_problem(dims: &[usize], rank: usize, t: usize) -> Result<()> {
    let d = dims.len();
    if rank == 0 {
        return Err(Error::structural("rank must be at least 1"));
    }
    if t == 0 || t > d {
        return Err(Error::structural(format!(
            "number of orthonormal modes must lie in 1..={d}, got {t}"
        )));
    }
    for (j, &n) in dims.iter().enumerate().skip(d - t) {
        if rank > n {
            return Err(Error::structural(format!(
                "rank {rank} exceeds dimension {n} of orthonormal mode {j}"
            )));
        }
    }
    Ok(())
}

/// Random feasible factors: i.i.d. standard normal draws, then sign-fixed thin
/// QR on orthonormal modes and column normalization elsewhere. `σ` is left at
/// zero; see [`project_sigma`].
pub fn random_model(dims: &[usize], rank: usize, t: usize, rng: &mut impl Rng) -> Result<CpModel> {
    check_problem(dims, rank, t)?;
    let d = dims.len();
    let factors = dims
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let g = gaussian_matrix(n, rank, rng);
            if j >= d - t {
                orthonormalize(&g)
            } else {
                let mut g = g;
                normalize_columns(&mut g).map(|_| g)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CpModel::new(vec![0.0; rank], factors, t)
}

/// `σ_i = ⟨X, ⊗_j u_{j,i}⟩` for every component.
pub fn project_sigma(x: &DenseTensor, model: &mut CpModel) -> Result<()> {
    if x.dims() != model.dims().as_slice() {
        return Err(Error::structural(format!(
            "data dims {:?} do not match model dims {:?}",
            x.dims(),
            model.dims()
        )));
    }
    for i in 0..model.rank() {
        let g = x.contract_unchecked(0, |l| model.column(l, i));
        model.sigma[i] = crate::tensor::dot(&g, model.column(0, i));
    }
    Ok(())
}

/// `‖⟦σ;U⟧ − A‖_F`.
pub fn fit(model: &CpModel, a: &DenseTensor) -> Result<f64> {
    model.reconstruct()?.distance(a)
}

pub(crate) fn check_finite_model(model: &CpModel, iter: usize) -> Result<()> {
    if model.sigma.iter().all(|s| s.is_finite())
        && model.factors.iter().all(|f| f.iter().all(|x| x.is_finite()))
    {
        Ok(())
    } else {
        Err(Error::Numerical {
            iter,
            what: "non-finite value in the factors or weights".into(),
        })
    }
}

pub(crate) fn check_model_matches(model: &CpModel, a: &DenseTensor) -> Result<()> {
    if model.dims() != a.dims() {
        return Err(Error::structural(format!(
            "initial model dims {:?} do not match data dims {:?}",
            model.dims(),
            a.dims()
        )));
    }
    if model.modes.iter().filter(|&&m| m == ModeKind::Orthonormal).count() == 0 {
        return Err(Error::structural("at least one orthonormal mode is required"));
    }
    Ok(())
}
