//! Synthetic benchmark problems: orthogonal ground truth, the three noise
//! models, the normalized error metric, and a seeded batch runner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::als::{als_solve, AlsConfig};
use crate::cp::CpModel;
use crate::error::{Error, Result};
use crate::hq_admm::{solve, SolverConfig};
use crate::linalg::{normalize_columns, orthonormalize};
use crate::solver::{check_problem, SolveResult};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// No contamination; the data is `A₀/‖A₀‖`.
    None,
    /// `A₀/‖A₀‖ + β N/‖N‖` with `N` i.i.d. Cauchy(0, scale).
    Cauchy { scale: f64, mix_beta: f64 },
    /// `A₀/‖A₀‖ + O`; each entry of `O` is nonzero with probability
    /// `density` and then uniform on `[low, high]`.
    Outliers { density: f64, low: f64, high: f64 },
    /// `A₀/‖A₀‖ + β N/‖N‖` with `N` i.i.d. standard normal.
    Gaussian { mix_beta: f64 },
}

impl NoiseSpec {
    pub const fn cauchy() -> Self {
        NoiseSpec::Cauchy { scale: 0.05, mix_beta: 0.5 }
    }

    pub const fn outliers() -> Self {
        NoiseSpec::Outliers { density: 0.1, low: 0.0, high: 10.0 }
    }

    pub const fn gaussian() -> Self {
        NoiseSpec::Gaussian { mix_beta: 0.1 }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Cauchy { .. } => "cauchy",
            NoiseSpec::Outliers { .. } => "outliers",
            NoiseSpec::Gaussian { .. } => "gaussian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::None => true,
            NoiseSpec::Cauchy { scale, mix_beta } => {
                scale > 0.0 && scale.is_finite() && mix_beta >= 0.0 && mix_beta.is_finite()
            }
            NoiseSpec::Outliers { density, low, high } => {
                (0.0..=1.0).contains(&density) && low.is_finite() && high.is_finite() && low <= high
            }
            NoiseSpec::Gaussian { mix_beta } => mix_beta >= 0.0 && mix_beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid noise parameters: {self:?}")))
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parses a tag into the default parameters of that noise model.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseSpec::None),
            "cauchy" => Ok(NoiseSpec::cauchy()),
            "outliers" | "outlier" => Ok(NoiseSpec::outliers()),
            "gaussian" => Ok(NoiseSpec::gaussian()),
            other => Err(Error::domain(format!("unknown noise model `{other}`"))),
        }
    }
}

/// Ground truth with factor entries uniform on `[-1, 1]`: the last `t` factors
/// are orthonormalized by thin QR, the rest normalized columnwise, and `σ` is
/// standard normal. Returns the model and `A₀ = ⟦σ; U_j⟧`.
pub fn gen_ground_truth(
    dims: &[usize],
    t: usize,
    rank: usize,
    rng: &mut impl Rng,
) -> Result<(CpModel, DenseTensor)> {
    check_problem(dims, rank, t)?;
    let d = dims.len();
    let mut factors = Vec::with_capacity(d);
    for (j, &n) in dims.iter().enumerate() {
        let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..=1.0));
        if j >= d - t {
            factors.push(orthonormalize(&g)?);
        } else {
            let mut g = g;
            normalize_columns(&mut g)?;
            factors.push(g);
        }
    }
    let sigma = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
    let model = CpModel::new(sigma, factors, t)?;
    let a0 = model.reconstruct()?;
    Ok((model, a0))
}

/// One Cauchy(0, scale) draw by inversion.
pub fn sample_cauchy(scale: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    scale * (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Contaminates `A₀/‖A₀‖` according to `spec`.
pub fn add_noise(a0: &DenseTensor, spec: &NoiseSpec, rng: &mut impl Rng) -> Result<DenseTensor> {
    spec.validate()?;
    let norm = a0.frob_norm();
    if !(norm > 0.0) {
        return Err(Error::domain("ground-truth tensor is zero"));
    }
    let mut a = a0.scaled(1.0 / norm);
    let mix = |a: &mut DenseTensor, noise: Vec<f64>, beta: f64| {
        let nn = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta > 0.0 && nn > 0.0 {
            for (x, e) in a.data_mut().iter_mut().zip(noise) {
                *x += beta * e / nn;
            }
        }
    };
    match *spec {
        NoiseSpec::None => {}
        NoiseSpec::Cauchy { scale, mix_beta } => {
            let noise = (0..a.len()).map(|_| sample_cauchy(scale, rng)).collect();
            mix(&mut a, noise, mix_beta);
        }
        NoiseSpec::Gaussian { mix_beta } => {
            let noise = (0..a.len()).map(|_| rng.sample(StandardNormal)).collect();
            mix(&mut a, noise, mix_beta);
        }
        NoiseSpec::Outliers { density, low, high } => {
            for x in a.data_mut() {
                if rng.random_bool(density) {
                    *x += if high > low { rng.random_range(low..high) } else { low };
                }
            }
        }
    }
    Ok(a)
}

/// `‖A₀/‖A₀‖ − A*/‖A*‖‖_F` with `A* = ⟦σ; U_j⟧`, a value in `[0, 2]`.
pub fn err_metric(a0: &DenseTensor, model: &CpModel) -> Result<f64> {
    normalized_distance(a0, &model.reconstruct()?)
}

pub fn normalized_distance(a0: &DenseTensor, a_star: &DenseTensor) -> Result<f64> {
    let n0 = a0.frob_norm();
    let ns = a_star.frob_norm();
    if !(ns > 0.0) {
        return Err(Error::domain("reconstructed tensor is zero"));
    }
    if !(n0 > 0.0) {
        return Err(Error::domain("ground-truth tensor is zero"));
    }
    if a0.dims() != a_star.dims() {
        return Err(Error::structural("tensor dims differ"));
    }
    let s = a0
        .data()
        .iter()
        .zip(a_star.data())
        .map(|(x, y)| {
            let e = x / n0 - y / ns;
            e * e
        })
        .sum::<f64>();
    Ok(s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    HqAdmm,
    Als,
}

impl SolverKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SolverKind::HqAdmm => "hq-admm",
            SolverKind::Als => "als",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hq-admm" | "hqadmm" | "hq_admm" => Ok(SolverKind::HqAdmm),
            "als" => Ok(SolverKind::Als),
            other => Err(Error::domain(format!("unknown solver `{other}`"))),
        }
    }
}

/// One benchmark row: `instances` random problems of a single shape and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    /// Common mode size `n_1 = … = n_d`.
    pub n: usize,
    pub d: usize,
    pub t: usize,
    pub rank: usize,
    pub noise: NoiseSpec,
    pub instances: usize,
    /// Master seed; instance streams are derived from it.
    pub seed: u64,
}

impl BenchCase {
    pub fn dims(&self) -> Vec<usize> {
        vec![self.n; self.d]
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::domain("a bench case needs at least one instance"));
        }
        if self.d < 2 {
            return Err(Error::structural("tensor order must be at least 2"));
        }
        self.noise.validate()?;
        check_problem(&self.dims(), self.rank, self.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub err: f64,
    pub iterations: usize,
    pub converged: bool,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub case: BenchCase,
    pub solver: SolverKind,
    /// One entry per instance, in instance order; failures carry the message.
    pub outcomes: Vec<std::result::Result<InstanceOutcome, String>>,
    pub err_median: f64,
    pub err_mean: f64,
    pub iter_median: f64,
    pub iter_mean: f64,
    pub time_mean_s: f64,
}

impl BenchResult {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_err()).count()
    }

    fn aggregate(case: BenchCase, solver: SolverKind, outcomes: Vec<std::result::Result<InstanceOutcome, String>>) -> Self {
        let ok: Vec<&InstanceOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let errs: Vec<f64> = ok.iter().map(|o| o.err).collect();
        let iters: Vec<f64> = ok.iter().map(|o| o.iterations as f64).collect();
        let times: Vec<f64> = ok.iter().map(|o| o.time_s).collect();
        Self {
            case,
            solver,
            err_median: median(&errs),
            err_mean: mean(&errs),
            iter_median: median(&iters),
            iter_mean: mean(&iters),
            time_mean_s: mean(&times),
            outcomes,
        }
    }
}

/// Median of the finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Mean accumulated in sorted order so the result does not depend on the
/// order instances finished in.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` for instance `instance` under `master`.
pub fn sub_seed(master: u64, instance: u64, stream: u64) -> u64 {
    mix64(mix64(mix64(master) ^ instance) ^ stream)
}

pub const DATA_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = 1;

/// Ground truth and noisy data for one instance of a case.
pub fn bench_instance(case: &BenchCase, instance: usize) -> Result<(DenseTensor, DenseTensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(case.seed, instance as u64, DATA_STREAM));
    let (_, a0) = gen_ground_truth(&case.dims(), case.t, case.rank, &mut rng)?;
    let a = add_noise(&a0, &case.noise, &mut rng)?;
    Ok((a0, a))
}

/// Solver settings shared by every case of a batch. The `seed` fields are
/// overwritten per instance.
#[derive(Debug, Clone, Default)]
pub struct BenchSettings {
    pub hq: SolverConfig,
    pub als: AlsConfig,
    /// Worker threads; 0 uses the global rayon pool.
    pub jobs: usize,
}

/// Runs every solver on every instance of every case. Both solvers see the
/// same data and the same initialization seed per instance. Results come back
/// in `(case, solver)` order.
pub fn run_bench(cases: &[BenchCase], solvers: &[SolverKind], settings: &BenchSettings) -> Result<Vec<BenchResult>> {
    for c in cases {
        c.validate()?;
    }
    settings.hq.validate()?;
    let work = || -> Vec<BenchResult> {
        let mut out = Vec::new();
        for case in cases {
            let per_instance: Vec<Vec<std::result::Result<InstanceOutcome, String>>> = (0..case.instances)
                .into_par_iter()
                .map(|i| run_instance(case, i, solvers, settings))
                .collect();
            for (s, &solver) in solvers.iter().enumerate() {
                let outcomes = per_instance.iter().map(|v| v[s].clone()).collect();
                out.push(BenchResult::aggregate(case.clone(), solver, outcomes));
            }
        }
        out
    };
    if settings.jobs == 0 {
        Ok(work())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(work))
    }
}

fn run_instance(
    case: &BenchCase,
    instance: usize,
    solvers: &[SolverKind],
    settings: &BenchSettings,
) -> Vec<std::result::Result<InstanceOutcome, String>> {
    let data = match bench_instance(case, instance) {
        Ok(x) => x,
        Err(e) => return solvers.iter().map(|_| Err(e.to_string())).collect(),
    };
    let (a0, a) = data;
    let init_seed = sub_seed(case.seed, instance as u64, INIT_STREAM);
    solvers
        .iter()
        .map(|&solver| {
            let start = Instant::now();
            let res: Result<SolveResult> = match solver {
                SolverKind::HqAdmm => {
                    let cfg = SolverConfig { seed: init_seed, warn_tau: false, ..settings.hq.clone() };
                    solve(&a, case.rank, case.t, &cfg)
                }
                SolverKind::Als => {
                    let cfg = AlsConfig { seed: init_seed, ..settings.als.clone() };
                    als_solve(&a, case.rank, case.t, &cfg)
                }
            };
            let time_s = start.elapsed().as_secs_f64();
            res.and_then(|r| {
                Ok(InstanceOutcome {
                    err: err_metric(&a0, &r.model)?,
                    iterations: r.iterations,
                    converged: r.converged,
                    time_s,
                })
            })
            .map_err(|e| format!("instance {instance}: {e}"))
        })
        .collect()
}

pub const BENCH_CSV_HEADER: &str = "n,d,t,R,noise,solver,err_median,err_mean,iter_mean,time_mean_s";

/// CSV with [`BENCH_CSV_HEADER`] columns, one row per result.
pub fn bench_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6e},{:.6e},{:.2},{:.4}\n",
            r.case.n,
            r.case.d,
            r.case.t,
            r.case.rank,
            r.case.noise,
            r.solver,
            r.err_median,
            r.err_mean,
            r.iter_mean,
            r.time_mean_s
        ));
    }
    out
}
