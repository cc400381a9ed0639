use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rocp::synth::{add_noise, err_metric, gen_ground_truth};
use rocp::{als_solve, solve, AlsConfig, NoiseSpec, SolverConfig};

#[test]
fn both_solvers_recover_noiseless_truth() {
    for t in 1..=3 {
        let (_, a0) = gen_ground_truth(&[10, 9, 8], t, 3, &mut ChaCha8Rng::seed_from_u64(t as u64)).unwrap();
        let hq = solve(&a0, 3, t, &SolverConfig { seed: 4, ..Default::default() }).unwrap();
        assert!(err_metric(&a0, &hq.model).unwrap() < 1e-5, "hq t={t}");
        assert!(hq.model.constraint_error() < 1e-10);
        let als = als_solve(&a0, 3, t, &AlsConfig { seed: 4, ..Default::default() }).unwrap();
        assert!(err_metric(&a0, &als.model).unwrap() < 1e-5, "als t={t}");
    }
}

#[test]
fn dual_step_is_bounded_by_primal_steps() {
    for seed in 0..4u64 {
        let t = 1 + seed as usize % 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, a0) = gen_ground_truth(&[12, 12, 12], t, 3, &mut rng).unwrap();
        let a = add_noise(&a0, &NoiseSpec::cauchy(), &mut rng).unwrap();
        let cfg = SolverConfig { tau: 4.0, diagnostics: true, seed, ..Default::default() };
        let trace = solve(&a, 3, t, &cfg).unwrap().trace.unwrap();
        for w in trace.windows(2) {
            let bound = w[1].primal_step + w[0].primal_step;
            assert!(w[1].dual_step <= bound + 1e-12, "iter {}: {} > {}", w[1].iter, w[1].dual_step, bound);
        }
    }
}

#[test]
fn cauchy_fit_beats_least_squares_under_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (_, a0) = gen_ground_truth(&[25, 25, 25], 2, 3, &mut rng).unwrap();
    let a = add_noise(&a0, &NoiseSpec::outliers(), &mut rng).unwrap();
    let hq = solve(&a, 3, 2, &SolverConfig { tau: 0.7, seed: 1, ..Default::default() }).unwrap();
    let als = als_solve(&a, 3, 2, &AlsConfig { seed: 1, ..Default::default() }).unwrap();
    let (e_hq, e_als) = (err_metric(&a0, &hq.model).unwrap(), err_metric(&a0, &als.model).unwrap());
    assert!(e_hq < 0.2 && e_als > 1.0, "hq {e_hq}, als {e_als}");
}
