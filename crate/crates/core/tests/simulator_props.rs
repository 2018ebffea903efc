use asyncbo::acquisition::{propose, Rule};
use asyncbo::gp::{fit_posterior, Dataset, KernelHyperparams};
use asyncbo::objectives::Objective;
use asyncbo::optimizer::OptimizerConfig;
use asyncbo::rng::Streams;
use asyncbo::simulator::{run_async, run_seq, Mode, RunConfig, Simulation, INITIAL_WORKER};
use asyncbo::trace_io::records_to_string;

fn quick(objective: &str, rule: Rule, q: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(objective, rule, q, seed);
    cfg.optimizer = OptimizerConfig { num_candidates_per_dim: 100, num_restarts: 3, ..Default::default() };
    cfg.params.num_fantasies = 32;
    cfg.params.num_features = 128;
    cfg
}

#[test]
fn busy_set_and_clock_discipline() {
    let cfg = quick("ackley-2", Rule::Random, 3, 4).with_time(12.0);
    let mut sim = Simulation::new(&cfg, Mode::Async).unwrap();
    assert_eq!(sim.busy().len(), 3);
    while sim.step() {
        assert_eq!(sim.busy().len(), 3);
    }
    let trace = sim.into_trace();
    assert!(trace.records.windows(2).all(|w| w[0].sim_time <= w[1].sim_time));
    assert!(trace.completions().iter().all(|r| r.sim_time <= 12.0));
    assert!(trace.records.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
}

/// Replays every proposal from the trace alone: the model is rebuilt from the
/// records up to and including the completion, with the recorded
/// hyperparameters, and the busy set is the other pending queries.
#[test]
fn proposals_condition_on_exactly_the_completed_data() {
    for rule in [Rule::Ucb, Rule::KbUcb] {
        let cfg = quick("branin-2", rule, 3, 9).with_evals(8);
        let obj = Objective::from_name("branin-2").unwrap();
        let mut sim = Simulation::new(&cfg, Mode::Async).unwrap();
        let mut k = 0u64;
        while sim.step() {
            let trace = sim.trace();
            let last = trace.records.last().unwrap();
            let worker = last.worker_id as usize;
            let xs: Vec<Vec<f64>> = trace.records.iter().map(|r| r.x.clone()).collect();
            let ys: Vec<f64> = trace.records.iter().map(|r| if obj.minimize { -r.y_raw } else { r.y_raw }).collect();
            assert_eq!(xs.len(), trace.meta.n_initial + k as usize + 1);
            let data = Dataset::from_observations(2, xs, ys).unwrap();
            let h = KernelHyperparams::new(last.lengthscales.clone(), last.signal_variance, last.noise_variance).unwrap();
            let model = fit_posterior(&data, &h).unwrap();
            let busy = sim.busy();
            let others: Vec<Vec<f64>> = busy.iter().filter(|(w, _)| *w != worker).map(|(_, x)| x.to_vec()).collect();
            let issued = busy.iter().find(|(w, _)| *w == worker).unwrap().1.to_vec();
            let p = propose(rule, &cfg.params, &model, &others, &cfg.optimizer, &Streams::new(cfg.seed), k).unwrap();
            assert_eq!(p.x, issued, "{rule} step {k}");
            k += 1;
        }
    }
}

#[test]
fn initial_design_recorded_at_time_zero() {
    let trace = run_async(&quick("hartmann-3", Rule::Random, 2, 1).with_evals(4)).unwrap();
    assert_eq!(trace.meta.n_initial, 9);
    let init = &trace.records[..9];
    assert!(init.iter().all(|r| r.sim_time == 0.0 && r.worker_id == INITIAL_WORKER && r.delta.is_nan()));
    assert_eq!(trace.completions().len(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    for rule in [Rule::Ucb, Rule::ExpectedLogEi, Rule::LlpUcb, Rule::Aegis] {
        let cfg = quick("hartmann-3", rule, 3, 21).with_evals(6);
        let a = run_async(&cfg).unwrap();
        let b = run_async(&cfg).unwrap();
        assert_eq!(records_to_string(&a.records, 3).unwrap(), records_to_string(&b.records, 3).unwrap());
    }
}

/// Sequential UCB on Branin gets within 0.1 (unit-cube distance) of one of
/// the global minimizers within 15 iterations for most seeds.
#[test]
fn sequential_ucb_finds_branin_minimizer() {
    let obj = Objective::from_name("branin-2").unwrap();
    let targets: Vec<Vec<f64>> = obj.optimizers.iter().map(|x| obj.normalize(x)).collect();
    let mut hits = 0;
    for seed in 0..20 {
        let cfg = RunConfig::new("branin-2", Rule::Ucb, 1, seed).with_evals(15);
        let trace = run_seq(&cfg).unwrap();
        let close = trace.completions().iter().any(|r| {
            targets.iter().any(|t| t.iter().zip(&r.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= 0.1)
        });
        hits += close as usize;
    }
    assert!(hits > 10, "{hits}/20 seeds reached a minimizer");
}
