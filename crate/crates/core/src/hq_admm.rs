//! Half-quadratic ADMM for
//!
//! ```text
//! min Σ φ_δ(A − ⟦σ; U_1, …, U_d⟧)
//! s.t. ‖u_{j,i}‖ = 1 (j ≤ d − t),  U_jᵀ U_j = I (j > d − t)
//! ```
//!
//! The loss is rewritten with per-entry weights `W` and a slack `T = ⟦σ;U⟧`
//! with multiplier `Y`. Each iteration updates, in this order: the
//! unit-column factors, the orthonormal factors (polar decomposition), `T`,
//! `Y`, `σ`, and `W`. Every block has a closed form.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cp::{CpModel, ModeKind};
use crate::error::{Error, Result};
use crate::linalg::polar;
use crate::loss::{hq_weight, rho};
use crate::solver::{
    check_finite_model, check_model_matches, check_problem, project_sigma, random_model,
    IterationRecord, SolveResult,
};
use crate::tensor::{dot, DenseTensor};

/// Smallest penalty for which the proximal augmented Lagrangian is known to
/// be nonincreasing along the iterates.
pub const TAU_THEORY_MIN: f64 = 3.162_277_660_168_379_5; // √10

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Penalty parameter τ.
    pub tau: f64,
    /// Proximal weight α on the factor updates.
    pub alpha: f64,
    /// Cauchy scale δ.
    pub delta: f64,
    pub max_iter: usize,
    /// Stop once `|fit^{k+1} − fit^k| ≤ tol`
    /// and the primal residual is at most `primal_tol`.
    pub tol: f64,
    /// Bound on `‖⟦σ;U⟧ − T‖_F` at termination; `f64::INFINITY` leaves only
    /// the fit-change test.
    pub primal_tol: f64,
    /// Seed for the random initial factors.
    pub seed: u64,
    /// Record a full [`IterationRecord`] every iteration.
    pub diagnostics: bool,
    /// Log a warning when `tau < √10`.
    pub warn_tau: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            alpha: 1e-8,
            delta: 0.05,
            max_iter: 2000,
            tol: 1e-6,
            primal_tol: 1e-4,
            seed: 0,
            diagnostics: false,
            warn_tau: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        positive("alpha", self.alpha)?;
        positive("delta", self.delta)?;
        positive("tol", self.tol)?;
        if !(self.primal_tol > 0.0) {
            return Err(Error::domain(format!("primal_tol must be positive, got {}", self.primal_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn tau_in_theory_regime(&self) -> bool {
        self.tau >= TAU_THEORY_MIN
    }
}

/// All iterates of the method.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub model: CpModel,
    /// Slack copy of `⟦σ;U⟧`.
    pub t: DenseTensor,
    /// Multiplier for `⟦σ;U⟧ = T`.
    pub y: DenseTensor,
    /// Half-quadratic weights.
    pub w: DenseTensor,
    pub iter: usize,
    /// `‖⟦σ;U⟧ − A‖_F` for the current model.
    pub fit: f64,
    /// `‖⟦σ;U⟧ − T‖_F`.
    pub primal_residual: f64,
    pub trace: Vec<IterationRecord>,
}

/// Individual blocks of the stationarity system; [`KktResidual::max`] is the
/// scalar residual.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    /// `max ‖(Y+τT) ⊗_{l≠j} u_{l,i} − σ_i τ u_{j,i}‖` over unit-column modes.
    pub unit_columns: f64,
    /// Riemannian gradient norm on the orthonormal modes.
    pub orthonormal: f64,
    /// `‖(W+τE) ⊛ T − W ⊛ A + Y − τ⟦σ;U⟧‖_F`.
    pub slack: f64,
    /// `‖⟦σ;U⟧ − T‖_F`.
    pub primal: f64,
    /// `‖W − δ²/(δ² + (T − A)²)‖_F`.
    pub weights: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        [
            self.unit_columns,
            self.orthonormal,
            self.slack,
            self.primal,
            self.weights,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Builds the initial state from random factors drawn with `rng`.
pub fn init_state(
    a: &DenseTensor,
    rank: usize,
    t: usize,
    config: &SolverConfig,
    rng: &mut impl rand::Rng,
) -> Result<SolverState> {
    config.validate()?;
    check_problem(a.dims(), rank, t)?;
    let model = random_model(a.dims(), rank, t, rng)?;
    init_state_from(a, model, config.delta)
}

/// Initial state at given feasible factors: `σ⁰_i = ⟨A, ⊗_j u⁰_{j,i}⟩`,
/// `T⁰ = A`, `Y⁰ = 0`, and `W⁰` the half-quadratic weights of the initial
/// residual `⟦σ⁰;U⁰⟧ − A`.
pub fn init_state_from(a: &DenseTensor, mut model: CpModel, delta: f64) -> Result<SolverState> {
    check_model_matches(&model, a)?;
    if !a.is_finite() {
        return Err(Error::domain("data tensor contains non-finite values"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive and finite, got {delta}")));
    }
    project_sigma(a, &mut model)?;
    let recon = model.reconstruct()?;
    let fit = recon.distance(a)?;
    let w = recon.zip_with(a, |r, x| hq_weight(r - x, delta))?;
    Ok(SolverState {
        model,
        t: a.clone(),
        y: DenseTensor::zeros(a.dims().to_vec())?,
        w,
        iter: 0,
        fit,
        primal_residual: fit,
        trace: Vec::new(),
    })
}

/// The iteration driver. Each `update_*` method performs one block of an
/// iteration and must be called in the order used by [`HqAdmm::step`].
pub struct HqAdmm<'a> {
    data: &'a DenseTensor,
    config: SolverConfig,
    state: SolverState,
    /// `Y^k + τ T^k`, fixed for the whole factor sweep.
    gradient_source: Option<DenseTensor>,
    /// `⟦σ^k; U^{k+1}⟧`, shared by the `T` and `Y` updates.
    recon: Option<DenseTensor>,
    prev_t: Option<DenseTensor>,
    last_dual_step: f64,
    last_identity_error: f64,
}

impl<'a> HqAdmm<'a> {
    pub fn new(data: &'a DenseTensor, config: SolverConfig, state: SolverState) -> Result<Self> {
        config.validate()?;
        if state.t.dims() != data.dims() {
            return Err(Error::structural("state and data dims differ"));
        }
        Ok(Self {
            data,
            config,
            state,
            gradient_source: None,
            recon: None,
            prev_t: None,
            last_dual_step: 0.0,
            last_identity_error: 0.0,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SolverState {
        self.invalidate();
        &mut self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    fn invalidate(&mut self) {
        self.gradient_source = None;
        self.recon = None;
    }

    fn gradient_source(&mut self) -> Result<&DenseTensor> {
        if self.gradient_source.is_none() {
            let tau = self.config.tau;
            let z = self.state.y.zip_with(&self.state.t, |y, t| y + tau * t)?;
            self.gradient_source = Some(z);
        }
        Ok(self.gradient_source.as_ref().unwrap())
    }

    fn check_mode(&self, mode: usize, kind: ModeKind) -> Result<()> {
        match self.state.model.modes.get(mode) {
            Some(&k) if k == kind => Ok(()),
            Some(&k) => Err(Error::structural(format!(
                "mode {mode} is {k:?}, expected {kind:?}"
            ))),
            None => Err(Error::structural(format!("mode {mode} out of range"))),
        }
    }

    /// Mode-`mode` gradient columns `v_{j,i} = (Y^k+τT^k) ⊗_{l≠j} u_{l,i}` at the
    /// latest factors, scaled by `σ^k_i`, plus `α U^k_j`.
    fn proximal_target(&mut self, mode: usize) -> Result<DMatrix<f64>> {
        let alpha = self.config.alpha;
        self.gradient_source()?;
        let z = self.gradient_source.as_ref().unwrap();
        let model = &self.state.model;
        let n = model.factors[mode].nrows();
        let mut target = DMatrix::zeros(n, model.rank());
        for i in 0..model.rank() {
            let v = z.contract_unchecked(mode, |l| model.column(l, i));
            let sigma = model.sigma[i];
            let u = model.column(mode, i);
            for s in 0..n {
                target[(s, i)] = sigma * v[s] + alpha * u[s];
            }
        }
        Ok(target)
    }

    /// `u_{j,i} ← ṽ / ‖ṽ‖` with `ṽ = σ_i v_{j,i} + α u_{j,i}`.
    pub fn update_unit_columns(&mut self, mode: usize) -> Result<()> {
        self.check_mode(mode, ModeKind::UnitColumns)?;
        let target = self.proximal_target(mode)?;
        let factor = &mut self.state.model.factors[mode];
        for (i, col) in target.column_iter().enumerate() {
            let norm = col.norm();
            // α > 0 and ‖u^k‖ = 1 keep ṽ away from zero unless σ_i v cancels αu exactly.
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Numerical {
                    iter: self.state.iter,
                    what: format!("column {i} of mode {mode} has norm {norm}"),
                });
            }
            factor.set_column(i, &(col / norm));
        }
        self.recon = None;
        Ok(())
    }

    /// `U_j ← polar(Ṽ_j)` with `Ṽ_j = V_j diag(σ^k) + α U^k_j`. Returns `Ṽ_j`.
    pub fn update_orthonormal(&mut self, mode: usize) -> Result<DMatrix<f64>> {
        self.check_mode(mode, ModeKind::Orthonormal)?;
        let target = self.proximal_target(mode)?;
        let p = polar(&target).map_err(|e| match e {
            Error::Numerical { what, .. } => Error::Numerical {
                iter: self.state.iter,
                what,
            },
            other => other,
        })?;
        self.state.model.factors[mode] = p.u;
        self.recon = None;
        Ok(target)
    }

    /// `T = (W ⊛ A − Y + τ⟦σ^k;U^{k+1}⟧) ⊘ (W + τ)`.
    pub fn update_t(&mut self) -> Result<()> {
        let tau = self.config.tau;
        let recon = self.state.model.reconstruct()?;
        let mut t = DenseTensor::zeros(self.data.dims().to_vec())?;
        for ((((dst, &w), &a), &y), &r) in t
            .data_mut()
            .iter_mut()
            .zip(self.state.w.data())
            .zip(self.data.data())
            .zip(self.state.y.data())
            .zip(recon.data())
        {
            *dst = (w * a - y + tau * r) / (w + tau);
        }
        self.prev_t = Some(std::mem::replace(&mut self.state.t, t));
        self.recon = Some(recon);
        self.gradient_source = None;
        Ok(())
    }

    /// `Y ← Y − τ(⟦σ^k;U^{k+1}⟧ − T^{k+1})`. Must follow [`update_t`](Self::update_t).
    pub fn update_y(&mut self) -> Result<()> {
        let tau = self.config.tau;
        let recon = self
            .recon
            .take()
            .ok_or_else(|| Error::structural("update_y requires update_t first"))?;
        let mut step_sq = 0.0;
        let mut identity_err = 0.0f64;
        let y = self.state.y.data_mut();
        for (((yv, &r), &t), (&w, &a)) in y
            .iter_mut()
            .zip(recon.data())
            .zip(self.state.t.data())
            .zip(self.state.w.data().iter().zip(self.data.data()))
        {
            let delta = tau * (r - t);
            *yv -= delta;
            step_sq += delta * delta;
            identity_err = identity_err.max((*yv + w * (t - a)).abs());
        }
        self.last_dual_step = step_sq.sqrt();
        self.last_identity_error = identity_err;
        self.gradient_source = None;
        Ok(())
    }

    /// `σ_i = ⟨Y + τT, ⊗_j u_{j,i}⟩ / τ`.
    pub fn update_sigma(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.gradient_source()?;
        let z = self.gradient_source.as_ref().unwrap();
        let model = &mut self.state.model;
        for i in 0..model.rank() {
            let g = z.contract_unchecked(0, |l| model.column(l, i));
            model.sigma[i] = dot(&g, model.column(0, i)) / tau;
        }
        Ok(())
    }

    /// `W = δ² / (δ² + (T − A)²)` entrywise.
    pub fn update_w(&mut self) -> Result<()> {
        let delta = self.config.delta;
        for ((w, &t), &a) in self
            .state
            .w
            .data_mut()
            .iter_mut()
            .zip(self.state.t.data())
            .zip(self.data.data())
        {
            *w = hq_weight(t - a, delta);
        }
        Ok(())
    }

    /// One full iteration. Returns the new fit `‖⟦σ^{k+1};U^{k+1}⟧ − A‖_F`.
    pub fn step(&mut self) -> Result<f64> {
        let d = self.state.model.order();
        self.gradient_source = None;
        for j in 0..d {
            match self.state.model.modes[j] {
                ModeKind::UnitColumns => self.update_unit_columns(j)?,
                ModeKind::Orthonormal => {
                    self.update_orthonormal(j)?;
                }
            }
        }
        self.update_t()?;
        self.update_y()?;
        self.update_sigma()?;
        self.update_w()?;
        self.state.iter += 1;
        let iter = self.state.iter;
        check_finite_model(&self.state.model, iter)?;

        let recon = self.state.model.reconstruct()?;
        let fit = recon.distance(self.data)?;
        if !fit.is_finite() {
            return Err(Error::Numerical {
                iter,
                what: format!("fit became {fit}"),
            });
        }
        self.state.fit = fit;
        self.state.primal_residual = recon.distance(&self.state.t)?;

        if self.config.diagnostics {
            let prev_t = self.prev_t.as_ref().expect("set by update_t");
            let primal_step = self.state.t.distance(prev_t)?;
            let aug = aug_lagrangian_with(&self.state, self.data, &recon, self.config.tau, self.config.delta)?;
            let prox = aug + 2.0 / self.config.tau * primal_step * primal_step;
            let kkt = kkt_residual_with(&self.state, self.data, &recon, &self.config)?;
            self.state.trace.push(IterationRecord {
                iter,
                fit,
                aug_lagrangian: aug,
                prox_aug_lagrangian: prox,
                primal_residual: self.state.primal_residual,
                kkt_residual: kkt.max(),
                dual_step: self.last_dual_step,
                primal_step,
                multiplier_identity_error: self.last_identity_error,
            });
        }
        self.gradient_source = None;
        Ok(fit)
    }

    /// Iterates until the fit changes by at most `tol` with the primal
    /// residual below `primal_tol`, or `max_iter` is hit.
    pub fn run(mut self) -> Result<SolveResult> {
        if self.config.warn_tau && !self.config.tau_in_theory_regime() {
            log::warn!(
                "tau = {} is below sqrt(10); monotone decrease of the proximal augmented Lagrangian is not guaranteed",
                self.config.tau
            );
        }
        let mut prev = self.state.fit;
        let mut converged = false;
        while self.state.iter < self.config.max_iter {
            let fit = self.step()?;
            if (fit - prev).abs() <= self.config.tol && self.state.primal_residual <= self.config.primal_tol {
                converged = true;
                break;
            }
            prev = fit;
        }
        let diagnostics = self.config.diagnostics;
        let state = self.state;
        Ok(SolveResult {
            iterations: state.iter,
            final_fit: state.fit,
            converged,
            trace: diagnostics.then_some(state.trace),
            model: state.model,
        })
    }
}

/// Runs HQ-ADMM from random factors seeded by `config.seed`.
pub fn solve(a: &DenseTensor, rank: usize, t: usize, config: &SolverConfig) -> Result<SolveResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let state = init_state(a, rank, t, config, &mut rng)?;
    HqAdmm::new(a, config.clone(), state)?.run()
}

/// Runs HQ-ADMM from the given feasible factors (their `σ` is recomputed).
pub fn solve_from(a: &DenseTensor, initial: CpModel, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let state = init_state_from(a, initial, config.delta)?;
    HqAdmm::new(a, config.clone(), state)?.run()
}

/// `L_τ = ½‖√W ⊛ (A − T)‖² + (δ²/2) Σ ρ(W) − ⟨Y, ⟦σ;U⟧ − T⟩ + (τ/2)‖⟦σ;U⟧ − T‖²`.
pub fn aug_lagrangian(state: &SolverState, a: &DenseTensor, tau: f64, delta: f64) -> Result<f64> {
    let recon = state.model.reconstruct()?;
    aug_lagrangian_with(state, a, &recon, tau, delta)
}

/// `L̃_τ = L_τ + (2/τ)‖T − T′‖²`.
pub fn prox_aug_lagrangian(
    state: &SolverState,
    prev_t: &DenseTensor,
    a: &DenseTensor,
    tau: f64,
    delta: f64,
) -> Result<f64> {
    let step = state.t.distance(prev_t)?;
    Ok(aug_lagrangian(state, a, tau, delta)? + 2.0 / tau * step * step)
}

fn aug_lagrangian_with(
    state: &SolverState,
    a: &DenseTensor,
    recon: &DenseTensor,
    tau: f64,
    delta: f64,
) -> Result<f64> {
    if state.t.dims() != a.dims() || recon.dims() != a.dims() {
        return Err(Error::structural("state and data dims differ"));
    }
    let mut quad = 0.0;
    let mut pen = 0.0;
    let mut coupling = 0.0;
    let mut gap = 0.0;
    for (((&w, &av), &t), (&y, &r)) in state
        .w
        .data()
        .iter()
        .zip(a.data())
        .zip(state.t.data())
        .zip(state.y.data().iter().zip(recon.data()))
    {
        if !(w > 0.0) {
            return Err(Error::domain(format!("weight {w} is not positive")));
        }
        quad += w * (av - t) * (av - t);
        pen += rho(w)?;
        coupling += y * (r - t);
        gap += (r - t) * (r - t);
    }
    Ok(0.5 * quad + 0.5 * delta * delta * pen - coupling + 0.5 * tau * gap)
}

/// Residual of the stationarity system at the current state.
pub fn kkt_residual(state: &SolverState, a: &DenseTensor, config: &SolverConfig) -> Result<KktResidual> {
    let recon = state.model.reconstruct()?;
    kkt_residual_with(state, a, &recon, config)
}

fn kkt_residual_with(
    state: &SolverState,
    a: &DenseTensor,
    recon: &DenseTensor,
    config: &SolverConfig,
) -> Result<KktResidual> {
    let tau = config.tau;
    let delta = config.delta;
    let z = state.y.zip_with(&state.t, |y, t| y + tau * t)?;
    let model = &state.model;
    let mut out = KktResidual::default();

    for (j, kind) in model.modes.iter().enumerate() {
        let n = model.factors[j].nrows();
        let mut g = DMatrix::zeros(n, model.rank());
        for i in 0..model.rank() {
            let v = z.contract_unchecked(j, |l| model.column(l, i));
            g.set_column(i, &nalgebra::DVector::from_vec(v));
        }
        match kind {
            ModeKind::UnitColumns => {
                for i in 0..model.rank() {
                    let u = model.factors[j].column(i);
                    let r = (g.column(i) - u * (model.sigma[i] * tau)).norm();
                    out.unit_columns = out.unit_columns.max(r);
                }
            }
            ModeKind::Orthonormal => {
                // σ_i (Y+τT) ⊗_{l≠j} u_{l,i} = Σ_r Λ_{ir} u_{j,r} with Λ symmetric.
                let gs = g * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&model.sigma));
                let u = &model.factors[j];
                let utg = u.transpose() * &gs;
                let normal = (&gs - u * &utg).norm();
                let skew = ((&utg - utg.transpose()) * 0.5).norm();
                out.orthonormal = out.orthonormal.max(normal + skew);
            }
        }
    }

    let mut slack = 0.0;
    let mut primal = 0.0;
    let mut weights = 0.0;
    for (((&w, &av), &t), (&y, &r)) in state
        .w
        .data()
        .iter()
        .zip(a.data())
        .zip(state.t.data())
        .zip(state.y.data().iter().zip(recon.data()))
    {
        let s = (w + tau) * t - w * av + y - tau * r;
        slack += s * s;
        primal += (r - t) * (r - t);
        let dw = w - hq_weight(t - av, delta);
        weights += dw * dw;
    }
    out.slack = slack.sqrt();
    out.primal = primal.sqrt();
    out.weights = weights.sqrt();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::gram_error;
    use crate::linalg::random_stiefel;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Exact orthogonal rank-R tensor and its model.
    fn exact_instance(dims: &[usize], rank: usize, t: usize, seed: u64) -> (CpModel, DenseTensor) {
        let mut r = rng(seed);
        let mut m = random_model(dims, rank, t, &mut r).unwrap();
        m.sigma = (0..rank).map(|i| 2.0 - 0.3 * i as f64).collect();
        let a = m.reconstruct().unwrap();
        (m, a)
    }

    fn noisy_instance(seed: u64) -> DenseTensor {
        let (_, a) = exact_instance(&[6, 5, 4], 3, 1, seed);
        let mut r = rng(seed + 100);
        let noise = random_stiefel(120, 1, &mut r).unwrap();
        let mut a = a;
        for (x, e) in a.data_mut().iter_mut().zip(noise.iter()) {
            *x += 0.3 * e;
        }
        a
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { tau: 0.0, ..Default::default() },
            SolverConfig { alpha: -1.0, ..Default::default() },
            SolverConfig { delta: f64::NAN, ..Default::default() },
            SolverConfig { tol: 0.0, ..Default::default() },
            SolverConfig { max_iter: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(!SolverConfig::default().tau_in_theory_regime());
        assert!(SolverConfig { tau: 4.0, ..Default::default() }.tau_in_theory_regime());
    }

    #[test]
    fn init_state_contract() {
        let a = noisy_instance(1);
        let cfg = SolverConfig::default();
        let s = init_state(&a, 3, 2, &cfg, &mut rng(7)).unwrap();
        assert!(s.y.data().iter().all(|&y| y == 0.0));
        assert_eq!(s.t, a);
        let r = s.model.reconstruct().unwrap();
        for i in 0..a.len() {
            assert_eq!(s.w.data()[i], hq_weight(r.data()[i] - a.data()[i], cfg.delta));
        }
        for j in 1..3 {
            assert!(gram_error(&s.model.factors[j]) < 1e-12);
        }
        assert!(init_state(&a, 5, 2, &cfg, &mut rng(7)).is_err());
        assert!(init_state(&a, 3, 0, &cfg, &mut rng(7)).is_err());
    }

    #[test]
    fn init_at_truth_recovers_sigma() {
        let (m, a) = exact_instance(&[5, 6, 7], 3, 1, 2);
        let mut start = m.clone();
        start.sigma = vec![0.0; 3];
        let s = init_state_from(&a, start, 0.05).unwrap();
        for (x, y) in s.model.sigma.iter().zip(&m.sigma) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_sigma_keeps_unit_column() {
        let a = noisy_instance(3);
        let mut s = init_state(&a, 3, 1, &SolverConfig::default(), &mut rng(1)).unwrap();
        s.model.sigma[1] = 0.0;
        let before = s.model.factors[0].column(1).clone_owned();
        let mut solver = HqAdmm::new(&a, SolverConfig::default(), s).unwrap();
        solver.update_unit_columns(0).unwrap();
        let after = solver.state().model.factors[0].column(1).clone_owned();
        assert!((after - before).amax() < 1e-15);
    }

    #[test]
    fn large_alpha_keeps_unit_column() {
        let a = noisy_instance(4);
        let cfg = SolverConfig { alpha: 1e12, ..Default::default() };
        let s = init_state(&a, 3, 1, &cfg, &mut rng(2)).unwrap();
        let before = s.model.factors[0].clone();
        let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
        solver.update_unit_columns(0).unwrap();
        assert!((&solver.state().model.factors[0] - before).amax() < 1e-9);
    }

    #[test]
    fn unit_column_step_decreases_proximal_objective() {
        // -Σ σ_i ⟨v_i, u⟩ drops by at least (α/2)‖u^{k+1} − u^k‖².
        for seed in 0..10 {
            let a = noisy_instance(10 + seed);
            let cfg = SolverConfig { alpha: 0.5, ..Default::default() };
            let s = init_state(&a, 3, 1, &cfg, &mut rng(seed)).unwrap();
            let z = s.y.zip_with(&s.t, |y, t| y + cfg.tau * t).unwrap();
            let old = s.model.clone();
            let mut solver = HqAdmm::new(&a, cfg.clone(), s).unwrap();
            solver.update_unit_columns(0).unwrap();
            let new = &solver.state().model;
            for i in 0..3 {
                let v = z.contract_all_but(0, &old.other_columns(0, i)).unwrap();
                let before = -old.sigma[i] * dot(&v, old.column(0, i));
                let after = -old.sigma[i] * dot(&v, new.column(0, i));
                let moved: f64 = old
                    .column(0, i)
                    .iter()
                    .zip(new.column(0, i))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                assert!(before - after >= 0.5 * cfg.alpha * moved - 1e-12);
                assert!((nalgebra::DVector::from_column_slice(new.column(0, i)).norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn orthonormal_step_polar_relation() {
        let a = noisy_instance(5);
        let cfg = SolverConfig::default();
        let s = init_state(&a, 3, 2, &cfg, &mut rng(3)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
        let target = solver.update_orthonormal(2).unwrap();
        let u = &solver.state().model.factors[2];
        assert!(gram_error(u) < 1e-10);
        let h = u.transpose() * &target;
        assert!((&h - h.transpose()).amax() < 1e-8);
        assert!((u * &h - &target).amax() < 1e-8);
        assert!(h.symmetric_eigenvalues().min() > -1e-8);
        assert!(solver.update_orthonormal(0).is_err());
        assert!(solver.update_unit_columns(2).is_err());
    }

    #[test]
    fn t_update_closed_forms() {
        let a = noisy_instance(6);
        let cfg = SolverConfig::default();
        let mut s = init_state(&a, 3, 1, &cfg, &mut rng(4)).unwrap();
        s.w = DenseTensor::ones(a.dims().to_vec()).unwrap();
        let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
        solver.update_t().unwrap();
        let r = solver.state().model.reconstruct().unwrap();
        let want = a.add(&r).unwrap().scaled(0.5);
        assert!(solver.state().t.distance(&want).unwrap() < 1e-14);

        // Large τ pulls T onto the reconstruction.
        let cfg = SolverConfig { tau: 1e9, ..Default::default() };
        let s = init_state(&a, 3, 1, &cfg, &mut rng(4)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
        solver.update_t().unwrap();
        assert!(solver.state().t.distance(&r).unwrap() < 1e-7);
    }

    #[test]
    fn t_update_zeroes_gradient() {
        let a = noisy_instance(7);
        let cfg = SolverConfig { tau: 0.7, ..Default::default() };
        let s = init_state(&a, 3, 1, &cfg, &mut rng(5)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg.clone(), s).unwrap();
        solver.step().unwrap();
        solver.step().unwrap();
        // W and Y are perturbed so the check is not trivial.
        let w_k = solver.state().w.clone();
        let y_k = solver.state().y.clone();
        solver.update_t().unwrap();
        let r = solver.state().model.reconstruct().unwrap();
        let t = &solver.state().t;
        for i in 0..a.len() {
            let grad = w_k.data()[i] * (t.data()[i] - a.data()[i]) + y_k.data()[i]
                - cfg.tau * (r.data()[i] - t.data()[i]);
            assert!(grad.abs() < 1e-10);
        }
    }

    #[test]
    fn y_update_identity_and_fixed_point() {
        let a = noisy_instance(8);
        let cfg = SolverConfig::default();
        let s = init_state(&a, 3, 1, &cfg, &mut rng(6)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
        solver.step().unwrap();
        let w_k = solver.state().w.clone();
        solver.update_t().unwrap();
        solver.update_y().unwrap();
        let st = solver.state();
        for i in 0..a.len() {
            let rhs = -w_k.data()[i] * (st.t.data()[i] - a.data()[i]);
            assert!((st.y.data()[i] - rhs).abs() < 1e-10);
        }
        assert!(solver.update_y().is_err());
    }

    #[test]
    fn y_unchanged_when_slack_matches_reconstruction() {
        // With W = 1 and A = ⟦σ;U⟧ + Y, the T update returns ⟦σ;U⟧ exactly.
        let (m, r) = exact_instance(&[4, 4, 4], 2, 2, 9);
        let y0 = DenseTensor::from_fn(vec![4, 4, 4], |i| 0.25 * ((i[0] + 2 * i[1] + 3 * i[2]) as f64).sin()).unwrap();
        let a = r.add(&y0).unwrap();
        let mut s = init_state_from(&a, m.clone(), 0.05).unwrap();
        s.model = m;
        s.t = r;
        s.y = y0.clone();
        s.w = DenseTensor::ones(vec![4, 4, 4]).unwrap();
        let mut solver = HqAdmm::new(&a, SolverConfig::default(), s).unwrap();
        solver.update_t().unwrap();
        solver.update_y().unwrap();
        assert!(solver.state().y.distance(&y0).unwrap() < 1e-14);
    }

    #[test]
    fn sigma_update_closed_forms() {
        // Y = 0, T = c ⊗u → σ = c, independent of τ.
        let (mut m, _) = exact_instance(&[4, 5, 6], 1, 2, 11);
        m.sigma = vec![2.5];
        let a = m.reconstruct().unwrap();
        for tau in [0.7, 1.0, 4.0] {
            let cfg = SolverConfig { tau, ..Default::default() };
            let mut s = init_state_from(&a, m.clone(), 0.05).unwrap();
            s.model.sigma = vec![0.0];
            let mut solver = HqAdmm::new(&a, cfg, s).unwrap();
            solver.update_sigma().unwrap();
            assert!((solver.state().model.sigma[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_update_matches_normal_equations() {
        // σ minimizes -Σσ_i⟨Z,⊗u_i⟩ + (τ/2)‖⟦σ;U⟧‖²; solve G σ = b densely.
        let a = noisy_instance(12);
        let cfg = SolverConfig { tau: 1.3, ..Default::default() };
        let s = init_state(&a, 3, 1, &cfg, &mut rng(8)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg.clone(), s).unwrap();
        solver.step().unwrap();
        let st = solver.state().clone();
        let z = st.y.zip_with(&st.t, |y, t| y + cfg.tau * t).unwrap();
        let r = st.model.rank();
        let terms: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let mut unit = st.model.clone();
                unit.sigma = vec![1.0; r];
                unit.rank_one_term(i)
            })
            .collect();
        let g = DMatrix::from_fn(r, r, |p, q| cfg.tau * dot(&terms[p], &terms[q]));
        let b = nalgebra::DVector::from_fn(r, |p, _| dot(&terms[p], z.data()));
        let sol = g.lu().solve(&b).unwrap();
        for i in 0..r {
            assert!((sol[i] - st.model.sigma[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn w_update_properties() {
        let (m, a) = exact_instance(&[3, 4, 5], 2, 1, 13);
        let s = init_state_from(&a, m, 0.05).unwrap();
        let mut solver = HqAdmm::new(&a, SolverConfig::default(), s).unwrap();
        solver.update_w().unwrap();
        assert!(solver.state().w.data().iter().all(|&w| w == 1.0));

        let mut s = solver.into_state();
        let delta = 0.05;
        s.t = a.clone();
        s.t.data_mut()[0] += delta;
        s.t.data_mut()[1] += 3.0;
        s.t.data_mut()[2] += 0.01;
        let mut solver = HqAdmm::new(&a, SolverConfig::default(), s).unwrap();
        solver.update_w().unwrap();
        let w = solver.state().w.data();
        assert!((w[0] - 0.5).abs() < 1e-14);
        assert!(w[1] < w[2]);
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn truth_init_stops_immediately() {
        let (m, a) = exact_instance(&[6, 7, 8], 3, 2, 14);
        let res = solve_from(&a, m, &SolverConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 2);
        assert!(res.final_fit < 1e-10);
    }

    #[test]
    fn lagrangian_zero_at_noiseless_fixed_point() {
        let (m, a) = exact_instance(&[4, 5, 6], 2, 1, 15);
        let s = init_state_from(&a, m, 0.05).unwrap();
        let l = aug_lagrangian(&s, &a, 1.0, 0.05).unwrap();
        assert!(l.abs() < 1e-20);
        let prev = s.t.scaled(0.9);
        let lt = prox_aug_lagrangian(&s, &prev, &a, 2.0, 0.05).unwrap();
        let gap = s.t.distance(&prev).unwrap();
        assert!((lt - l - gap * gap).abs() < 1e-14);
        let kkt = kkt_residual(&s, &a, &SolverConfig::default()).unwrap();
        assert!(kkt.max() < 1e-10, "{kkt:?}");
    }

    #[test]
    fn lagrangian_rejects_nonpositive_weight() {
        let (m, a) = exact_instance(&[4, 5, 6], 2, 1, 16);
        let mut s = init_state_from(&a, m, 0.05).unwrap();
        s.w.data_mut()[3] = 0.0;
        assert!(matches!(aug_lagrangian(&s, &a, 1.0, 0.05), Err(Error::Domain(_))));
    }

    #[test]
    fn weight_block_vanishes_after_w_update() {
        let a = noisy_instance(17);
        let cfg = SolverConfig::default();
        let s = init_state(&a, 3, 1, &cfg, &mut rng(9)).unwrap();
        let mut solver = HqAdmm::new(&a, cfg.clone(), s).unwrap();
        for _ in 0..3 {
            solver.step().unwrap();
            let k = kkt_residual(solver.state(), &a, &cfg).unwrap();
            assert_eq!(k.weights, 0.0);
        }
    }

    #[test]
    fn deterministic() {
        let a = noisy_instance(18);
        let cfg = SolverConfig { seed: 42, max_iter: 50, ..Default::default() };
        let r1 = solve(&a, 3, 1, &cfg).unwrap();
        let r2 = solve(&a, 3, 1, &cfg).unwrap();
        assert_eq!(r1.model, r2.model);
        assert_eq!(r1.final_fit.to_bits(), r2.final_fit.to_bits());
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn non_finite_data_rejected() {
        let mut a = noisy_instance(19);
        a.data_mut()[0] = f64::NAN;
        assert!(solve(&a, 2, 1, &SolverConfig::default()).is_err());
    }
}
