use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rocp::io::{matrix_to_tensor, read_tensor, write_tensor};
use rocp::solver::trace_to_csv;
use rocp::synth::{
    add_noise, bench_csv, err_metric, gen_ground_truth, run_bench, BenchCase, BenchResult, BenchSettings,
    SolverKind,
};
use rocp::video::{
    compression_ratio, export_frames, extract, format_ratio, gen_synthetic_video, load_frames, save_frames,
    save_mask, video_config, Normalization, VideoSpec,
};
use rocp::{als_solve, solve, AlsConfig, CpModel, DenseTensor, Result, SolverConfig};

use crate::exit;
use crate::manifest::{io_error, Manifest};
use crate::{BenchArgs, DecomposeArgs, SynthArgs, VideoArgs, VideoGenArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn synth(a: &SynthArgs) -> Result<u8> {
    let noise = a.noise_args.apply(a.noise);
    noise.validate()?;
    let mut m = Manifest::new("synth");
    m.set("dims", join(&a.dims));
    m.set("rank", a.rank);
    m.set("t", a.t);
    m.set("noise", format!("{noise:?}"));
    m.set("seed", a.seed);
    m.set("out", a.out.display());
    m.write(&a.out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (_, a0) = gen_ground_truth(&a.dims, a.t, a.rank, &mut rng)?;
    let data = add_noise(&a0, &noise, &mut rng)?;
    write_tensor(a.out.join("data.rcpd"), &data)?;
    write_tensor(a.out.join("truth.rcpd"), &a0.scaled(1.0 / a0.frob_norm()))?;
    println!("wrote {} ({} noise, dims {})", a.out.join("data.rcpd").display(), noise, join(&a.dims));
    Ok(exit::OK)
}

fn write_model(dir: &Path, model: &CpModel) -> Result<()> {
    let sigma = DenseTensor::from_vec(vec![model.rank(), 1], model.sigma.clone())?;
    write_tensor(dir.join("sigma.rcpd"), &sigma)?;
    for (j, u) in model.factors.iter().enumerate() {
        write_tensor(dir.join(format!("factor_{}.rcpd", j + 1)), &matrix_to_tensor(u)?)?;
    }
    Ok(())
}

pub fn decompose(a: &DecomposeArgs) -> Result<u8> {
    let data = read_tensor(&a.input)?;
    let truth = a.truth.as_ref().map(read_tensor).transpose()?;
    let hq = a.solver_args.config(a.seed, SolverConfig::default().primal_tol);
    let als = AlsConfig { max_iter: hq.max_iter, tol: hq.tol, seed: a.seed, diagnostics: true };

    let mut m = Manifest::new("decompose");
    m.set("input", a.input.display());
    m.set("dims", join(data.dims()));
    m.set("rank", a.rank);
    m.set("t", a.t);
    m.set("solver", a.solver);
    m.set("seed", a.seed);
    match a.solver {
        SolverKind::HqAdmm => m.solver(&hq),
        SolverKind::Als => {
            m.set("max_iter", als.max_iter);
            m.set("tol", als.tol);
        }
    }
    if let Some(p) = &a.truth {
        m.set("truth", p.display());
    }
    m.set("out", a.out.display());
    m.write(&a.out)?;

    let start = Instant::now();
    let res = match a.solver {
        SolverKind::HqAdmm => solve(&data, a.rank, a.t, &SolverConfig { diagnostics: true, ..hq })?,
        SolverKind::Als => als_solve(&data, a.rank, a.t, &als)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    write_model(&a.out, &res.model)?;
    write_text(&a.out.join("trace.csv"), &trace_to_csv(res.trace.as_deref().unwrap_or_default()))?;

    println!("solver     {}", a.solver);
    println!("iterations {}", res.iterations);
    println!("converged  {}", res.converged);
    println!("fit        {:.6e}", res.final_fit);
    if let (SolverKind::HqAdmm, Some(last)) = (a.solver, res.trace.as_ref().and_then(|t| t.last())) {
        println!("kkt        {:.6e}", last.kkt_residual);
    }
    println!("time_s     {elapsed:.3}");
    if let Some(a0) = &truth {
        println!("err        {:.6e}", err_metric(a0, &res.model)?);
    }
    Ok(if res.converged { exit::OK } else { exit::MAX_ITER })
}

pub fn bench(a: &BenchArgs) -> Result<u8> {
    let mut cases = Vec::new();
    for &noise in &a.noise {
        for &n in &a.n {
            for &d in &a.d {
                for &t in &a.t {
                    cases.push(BenchCase {
                        n,
                        d,
                        t,
                        rank: a.rank,
                        noise: a.noise_args.apply(noise),
                        instances: a.instances,
                        seed: a.seed,
                    });
                }
            }
        }
    }
    let hq = a.solver_args.config(0, SolverConfig::default().primal_tol);
    let settings = BenchSettings {
        als: AlsConfig { max_iter: hq.max_iter, tol: hq.tol, ..AlsConfig::default() },
        hq,
        jobs: a.jobs,
    };

    let mut m = Manifest::new("bench");
    m.set("noise", join(&cases.iter().map(|c| format!("{:?}", c.noise)).collect::<Vec<_>>()));
    m.set("n", join(&a.n));
    m.set("d", join(&a.d));
    m.set("t", join(&a.t));
    m.set("rank", a.rank);
    m.set("instances", a.instances);
    m.set("seed", a.seed);
    m.set("solvers", join(&a.solvers));
    m.solver(&settings.hq);
    m.set("out", a.out.display());
    m.write(&a.out)?;

    let results = run_bench(&cases, &a.solvers, &settings)?;
    write_text(&a.out.join("bench.csv"), &bench_csv(&results))?;
    print!("{}", summary_table(&results));
    for r in results.iter().filter(|r| r.failures() > 0) {
        log::warn!("{} of {} {} instances failed (n={}, d={}, t={})", r.failures(), r.case.instances, r.solver, r.case.n, r.case.d, r.case.t);
    }
    Ok(exit::OK)
}

fn summary_table(results: &[BenchResult]) -> String {
    let mut out = format!(
        "{:>5} {:>7} {:<9} {:<8} {:>11} {:>11} {:>9} {:>9}\n",
        "n", "(d,t)", "noise", "solver", "err.med", "err.mean", "iter", "time(s)"
    );
    for r in results {
        out.push_str(&format!(
            "{:>5} {:>7} {:<9} {:<8} {:>11.3e} {:>11.3e} {:>9.1} {:>9.3}\n",
            r.case.n,
            format!("({},{})", r.case.d, r.case.t),
            r.case.noise.to_string(),
            r.solver.to_string(),
            r.err_median,
            r.err_mean,
            r.iter_mean,
            r.time_mean_s
        ));
    }
    out
}

pub fn video(a: &VideoArgs) -> Result<u8> {
    let mut video = load_frames(&a.frames)?;
    if a.unit_frobenius {
        video.normalize_unit_frobenius();
    }
    let (l, h, w) = (video.frames(), video.height(), video.width());
    let config = a.solver_args.config(a.seed, video_config().primal_tol);

    let mut m = Manifest::new("video");
    m.set("frames_dir", a.frames.display());
    m.set("dims", format!("{l},{h},{w}"));
    m.set("rank", a.rank);
    m.set("seed", a.seed);
    m.set("original_max", video.scale.original_max);
    m.set(
        "normalization",
        match video.scale.mode {
            Normalization::MaxVal => "maxval".to_string(),
            Normalization::UnitFrobenius { norm } => format!("unit-frobenius(norm={norm:e})"),
        },
    );
    m.set("foreground", a.foreground);
    m.solver(&config);
    m.set("out", a.out.display());
    m.write(&a.out)?;

    println!("frames {l} of {h}x{w}, rank {}", a.rank);
    println!("compression ratio {}", format_ratio(compression_ratio(l, h, w, a.rank)));
    let start = Instant::now();
    let res = extract(&video, a.rank, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    export_frames(&res, &video.scale, &a.out, a.foreground)?;
    write_tensor(a.out.join("D.rcpd"), &matrix_to_tensor(&res.d)?)?;
    write_tensor(a.out.join("U.rcpd"), &matrix_to_tensor(&res.u)?)?;
    write_tensor(a.out.join("V.rcpd"), &matrix_to_tensor(&res.v)?)?;
    println!("iterations {}", res.solve.iterations);
    println!("converged  {}", res.solve.converged);
    println!("time_s     {elapsed:.3}");
    Ok(if res.solve.converged { exit::OK } else { exit::MAX_ITER })
}

pub fn video_gen(a: &VideoGenArgs) -> Result<u8> {
    let spec = VideoSpec {
        frames: a.frames,
        height: a.height,
        width: a.width,
        bg_rank: a.bg_rank,
        block: a.block,
        path: a.path,
        contrast: a.contrast,
    };
    spec.validate()?;
    let mut m = Manifest::new("video-gen");
    m.set("frames", a.frames);
    m.set("height", a.height);
    m.set("width", a.width);
    m.set("bg_rank", a.bg_rank);
    m.set("block", a.block);
    m.set("path", a.path);
    m.set("contrast", a.contrast);
    m.set("seed", a.seed);
    m.set("out", a.out.display());
    m.write(&a.out)?;

    let g = gen_synthetic_video(&spec, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    save_frames(a.out.join("frames"), "frame", &g.video.tensor)?;
    save_frames(a.out.join("background"), "bg", &g.background)?;
    save_mask(a.out.join("mask"), g.video.tensor.dims(), &g.mask)?;
    println!("wrote {} frames of {}x{} to {}", a.frames, a.height, a.width, a.out.join("frames").display());
    Ok(exit::OK)
}
