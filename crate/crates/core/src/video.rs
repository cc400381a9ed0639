//! Foreground–background separation of grayscale video.
//!
//! Frames stack into an `l × m × n` tensor whose per-frame background is
//! `B_r = U diag(D_r) Vᵀ` with `U`, `V` orthonormal, so the model is the
//! order-3 problem with the last two modes orthonormal. The frame-mode
//! factor absorbs `σ`. Whatever the background misses is foreground.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hq_admm::{solve, SolverConfig};
use crate::pgm::{read_pgm, write_pgm, GrayImage};
use crate::solver::SolveResult;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Pixel divided by the PGM maxval.
    MaxVal,
    /// Maxval scaling followed by division by `norm`, the Frobenius norm of
    /// the maxval-scaled video.
    UnitFrobenius { norm: f64 },
}

/// How tensor entries map back to pixel intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRecord {
    pub original_max: u16,
    pub mode: Normalization,
}

impl ScaleRecord {
    /// Tensor value to intensity in `[0, 1]` units (not clamped).
    pub fn to_unit(&self, x: f64) -> f64 {
        match self.mode {
            Normalization::MaxVal => x,
            Normalization::UnitFrobenius { norm } => x * norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    /// Dimensions `(frames, height, width)`; frame `r` is the contiguous
    /// row-major block `r·m·n .. (r+1)·m·n`.
    pub tensor: DenseTensor,
    pub scale: ScaleRecord,
}

impl VideoTensor {
    pub fn new(tensor: DenseTensor, scale: ScaleRecord) -> Result<Self> {
        if tensor.order() != 3 {
            return Err(Error::structural(format!(
                "a video tensor has order 3, got order {}",
                tensor.order()
            )));
        }
        Ok(Self { tensor, scale })
    }

    pub fn frames(&self) -> usize {
        self.tensor.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.dims()[2]
    }

    pub fn frame(&self, r: usize) -> &[f64] {
        frame_slice(&self.tensor, r)
    }

    /// Rescales to unit Frobenius norm. A zero video is left unchanged.
    pub fn normalize_unit_frobenius(&mut self) {
        if let Normalization::UnitFrobenius { .. } = self.scale.mode {
            return;
        }
        let norm = self.tensor.frob_norm();
        if norm > 0.0 {
            self.tensor = self.tensor.scaled(1.0 / norm);
            self.scale.mode = Normalization::UnitFrobenius { norm };
        }
    }
}

fn frame_slice(t: &DenseTensor, r: usize) -> &[f64] {
    let size = t.dims()[1] * t.dims()[2];
    &t.data()[r * size..(r + 1) * size]
}

/// Reads every `*.pgm` file of `dir` in lexicographic filename order.
/// Other files are ignored. All frames must share dimensions and maxval.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<VideoTensor> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_pgm(p))
        .collect();
    if paths.is_empty() {
        return Err(Error::structural(format!("no .pgm frames in {}", dir.display())));
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    let images = paths.par_iter().map(read_pgm).collect::<Result<Vec<_>>>()?;

    let first = &images[0];
    for (img, path) in images.iter().zip(&paths) {
        if (img.width, img.height) != (first.width, first.height) {
            return Err(Error::structural(format!(
                "{} is {}×{}, expected {}×{}",
                path.display(),
                img.width,
                img.height,
                first.width,
                first.height
            )));
        }
        if img.maxval != first.maxval {
            return Err(Error::structural(format!(
                "{} has maxval {}, expected {}",
                path.display(),
                img.maxval,
                first.maxval
            )));
        }
    }
    let data = images.iter().flat_map(GrayImage::to_unit).collect();
    let tensor = DenseTensor::from_vec(vec![images.len(), first.height, first.width], data)?;
    VideoTensor::new(
        tensor,
        ScaleRecord { original_max: first.maxval, mode: Normalization::MaxVal },
    )
}

fn is_pgm(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Writes intensities in `[0, 1]` (clamped) as `prefix_00000.pgm`, ….
pub fn save_frames(dir: impl AsRef<Path>, prefix: &str, frames: &DenseTensor) -> Result<()> {
    let dir = dir.as_ref();
    if frames.order() != 3 {
        return Err(Error::structural("frames must form an order-3 tensor"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (l, m, n) = (frames.dims()[0], frames.dims()[1], frames.dims()[2]);
    let digits = l.saturating_sub(1).to_string().len().max(5);
    (0..l).into_par_iter().try_for_each(|r| {
        let img = GrayImage::from_unit(n, m, frame_slice(frames, r))?;
        write_pgm(dir.join(format!("{prefix}_{r:0digits$}.pgm")), &img)
    })
}

#[derive(Debug, Clone)]
pub struct FbResult {
    /// `l × R` per-frame weights, `D[(r, i)] = σ_i · u₁ᵢ(r)`.
    pub d: DMatrix<f64>,
    /// `m × R`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `n × R`, orthonormal columns.
    pub v: DMatrix<f64>,
    pub background: DenseTensor,
    /// `A − B`, frame by frame.
    pub foreground: DenseTensor,
    pub solve: SolveResult,
}

impl FbResult {
    pub fn frames(&self) -> usize {
        self.d.nrows()
    }

    pub fn rank(&self) -> usize {
        self.d.ncols()
    }

    /// `U diag(D_r) Vᵀ` as an `m × n` matrix.
    pub fn background_frame(&self, r: usize) -> DMatrix<f64> {
        let dr = DVector::from_iterator(self.rank(), self.d.row(r).iter().copied());
        &self.u * DMatrix::from_diagonal(&dr) * self.v.transpose()
    }

    pub fn foreground_frame(&self, r: usize) -> &[f64] {
        frame_slice(&self.foreground, r)
    }

    /// Pixels with `|F| > threshold`, in tensor layout.
    pub fn foreground_mask(&self, threshold: f64) -> Vec<bool> {
        self.foreground.data().iter().map(|f| f.abs() > threshold).collect()
    }

    pub fn compression_ratio(&self) -> f64 {
        let dims = self.background.dims();
        compression_ratio(dims[0], dims[1], dims[2], self.rank())
    }
}

/// Solver defaults for video: the fit-change test alone decides
/// convergence. Background ranks above the true one let spare components
/// slowly absorb moving objects; stopping on the fit plateau keeps them out.
pub fn video_config() -> SolverConfig {
    SolverConfig { primal_tol: f64::INFINITY, ..SolverConfig::default() }
}

/// Runs HQ-ADMM with `t = 2` and splits the video into background and foreground.
pub fn extract(video: &VideoTensor, rank: usize, config: &SolverConfig) -> Result<FbResult> {
    let (m, n) = (video.height(), video.width());
    if rank == 0 || rank > m.min(n) {
        return Err(Error::structural(format!(
            "rank {rank} must lie in 1..={} for {m}×{n} frames",
            m.min(n)
        )));
    }
    let res = solve(&video.tensor, rank, 2, config)?;
    let model = &res.model;
    let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&model.sigma));
    let d = &model.factors[0] * sigma;
    let background = model.reconstruct()?;
    let foreground = video.tensor.sub(&background)?;
    Ok(FbResult {
        d,
        u: model.factors[1].clone(),
        v: model.factors[2].clone(),
        background,
        foreground,
        solve: res,
    })
}

/// Storage of `(D, U, V)` relative to the raw video.
pub fn compression_ratio(l: usize, m: usize, n: usize, rank: usize) -> f64 {
    (rank * (l + m + n)) as f64 / (l * m * n) as f64
}

/// Percentage with two decimals, e.g. `0.16%`.
pub fn format_ratio(ratio: f64) -> String {
    format!("{:.2}%", 100.0 * ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForegroundMode {
    /// `|F|` divided by its largest value over the whole video.
    #[default]
    Absolute,
    /// `(F + 1)/2`, so zero maps to mid-gray.
    SignedOffset,
}

impl FromStr for ForegroundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "absolute" => Ok(ForegroundMode::Absolute),
            "signed" | "offset" => Ok(ForegroundMode::SignedOffset),
            other => Err(Error::domain(format!("unknown foreground mode `{other}`"))),
        }
    }
}

impl fmt::Display for ForegroundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForegroundMode::Absolute => "absolute",
            ForegroundMode::SignedOffset => "signed",
        })
    }
}

/// Writes `background/bg_*.pgm` and `foreground/fg_*.pgm` under `dir`.
pub fn export_frames(
    result: &FbResult,
    scale: &ScaleRecord,
    dir: impl AsRef<Path>,
    mode: ForegroundMode,
) -> Result<()> {
    let dir = dir.as_ref();
    let bg = result.background.map(|x| scale.to_unit(x));
    save_frames(dir.join("background"), "bg", &bg)?;
    let fg = match mode {
        ForegroundMode::Absolute => {
            let peak = result.foreground.data().iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if peak > 0.0 {
                result.foreground.map(|x| x.abs() / peak)
            } else {
                result.foreground.map(|_| 0.0)
            }
        }
        ForegroundMode::SignedOffset => result.foreground.map(|x| 0.5 * (scale.to_unit(x) + 1.0)),
    };
    save_frames(dir.join("foreground"), "fg", &fg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPath {
    /// Vertically centered, sweeping left and right.
    Horizontal,
    /// Both coordinates sweep, bouncing off the frame edges.
    Diagonal,
}

impl MotionPath {
    /// Top-left corner of the block in frame `r`.
    pub fn position(&self, r: usize, m: usize, n: usize, block: usize) -> (usize, usize) {
        let (rows, cols) = (m - block, n - block);
        match self {
            MotionPath::Horizontal => (rows / 2, bounce(r, cols)),
            MotionPath::Diagonal => (bounce(r, rows), bounce(r, cols)),
        }
    }
}

/// Triangle wave over `0..=range` advancing one step per frame.
fn bounce(r: usize, range: usize) -> usize {
    if range == 0 {
        return 0;
    }
    let p = r % (2 * range);
    if p <= range {
        p
    } else {
        2 * range - p
    }
}

impl FromStr for MotionPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(MotionPath::Horizontal),
            "diagonal" => Ok(MotionPath::Diagonal),
            other => Err(Error::domain(format!("unknown motion path `{other}`"))),
        }
    }
}

impl fmt::Display for MotionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionPath::Horizontal => "horizontal",
            MotionPath::Diagonal => "diagonal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoSpec {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub bg_rank: usize,
    /// Side of the square foreground block.
    pub block: usize,
    pub path: MotionPath,
    /// Intensity added on the block, in `[0, 1)`.
    pub contrast: f64,
}

impl VideoSpec {
    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.height, self.width);
        if self.frames == 0 || m == 0 || n == 0 {
            return Err(Error::structural("video dimensions must be positive"));
        }
        if self.bg_rank == 0 || self.bg_rank > m.min(n) {
            return Err(Error::structural(format!(
                "background rank {} must lie in 1..={}",
                self.bg_rank,
                m.min(n)
            )));
        }
        if self.block == 0 || self.block > m || self.block > n {
            return Err(Error::structural(format!(
                "{0}×{0} block does not fit in {m}×{n} frames",
                self.block
            )));
        }
        if !(0.0..1.0).contains(&self.contrast) {
            return Err(Error::domain(format!("contrast {} outside [0, 1)", self.contrast)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub video: VideoTensor,
    /// Foreground pixels, in tensor layout.
    pub mask: Vec<bool>,
    pub background: DenseTensor,
}

/// Static nonnegative rank-`bg_rank` background with peak `1 − contrast`,
/// plus a block of `contrast` moving along `path`. Entries stay in `[0, 1]`.
pub fn gen_synthetic_video(spec: &VideoSpec, rng: &mut impl Rng) -> Result<SyntheticVideo> {
    spec.validate()?;
    let (l, m, n) = (spec.frames, spec.height, spec.width);
    let left = DMatrix::from_fn(m, spec.bg_rank, |_, _| rng.random::<f64>());
    let right = DMatrix::from_fn(n, spec.bg_rank, |_, _| rng.random::<f64>());
    let mut image = left * right.transpose();
    let peak = image.max();
    if peak > 0.0 {
        image *= (1.0 - spec.contrast) / peak;
    }
    let background = DenseTensor::from_fn(vec![l, m, n], |idx| image[(idx[1], idx[2])])?;

    let mut mask = vec![false; l * m * n];
    if spec.contrast > 0.0 {
        for r in 0..l {
            let (top, left) = spec.path.position(r, m, n, spec.block);
            for i in top..top + spec.block {
                let row = (r * m + i) * n;
                mask[row + left..row + left + spec.block].fill(true);
            }
        }
    }
    let mut tensor = background.clone();
    for (x, &on) in tensor.data_mut().iter_mut().zip(&mask) {
        if on {
            *x += spec.contrast;
        }
    }
    let video = VideoTensor::new(
        tensor,
        ScaleRecord { original_max: 255, mode: Normalization::MaxVal },
    )?;
    Ok(SyntheticVideo { video, mask, background })
}

/// `2·tp / (2·tp + fp + fn)`; 1 when both masks are empty.
pub fn f1_score(predicted: &[bool], truth: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Writes the mask as black/white frames.
pub fn save_mask(dir: impl AsRef<Path>, dims: &[usize], mask: &[bool]) -> Result<()> {
    let t = DenseTensor::from_vec(dims.to_vec(), mask.iter().map(|&b| f64::from(u8::from(b))).collect())?;
    save_frames(dir, "mask", &t)
}
