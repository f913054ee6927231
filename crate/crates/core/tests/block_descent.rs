use gaea_core::blockmd::{run_two_block, RunConfig};
use gaea_core::geometry::BlockGeometry;
use gaea_core::mirror::UpdateRule;
use gaea_core::problems::{rwc_benchmark, Objective, RwcBenchmark, RwcParams};
use gaea_core::record::series;
use gaea_core::stationarity::{bregman_stationarity, ProxConfig};
use gaea_core::{StreamRng, StreamTag};

fn rules(problem: &RwcBenchmark, eta: f64) -> [UpdateRule; 2] {
    let g = problem.geometry();
    [UpdateRule::closed_form(g.block(0).clone(), eta).unwrap(), UpdateRule::closed_form(g.block(1).clone(), eta).unwrap()]
}

#[test]
fn runs_replay_exactly_and_depend_on_the_seed() {
    let problem = rwc_benchmark(4, 4, 1.0, 2).unwrap();
    let init = problem.default_init();
    let run = |seed| run_two_block(&problem, &init[0], &init[1], &RunConfig::theory(200, 0.05, seed), &rules(&problem, 0.05)).unwrap();
    let a = run(1);
    assert_eq!(a, run(1));
    assert_ne!(a.iterate_hash, run(2).iterate_hash);
    assert_eq!(a.len(), 200);
    assert!(a.output_index >= 1 && a.output_index <= 201);
    assert!(a.blocks.contains(&0) && a.blocks.contains(&1));
    assert!(a.series(series::ENTROPY).unwrap().iter().all(|h| *h >= 0.0 && *h <= 4f64.ln() + 1e-12));
}

#[test]
fn cyclic_practice_run_alternates_blocks() {
    let problem = rwc_benchmark(3, 5, 0.5, 0).unwrap();
    let init = problem.default_init();
    let r = run_two_block(&problem, &init[0], &init[1], &RunConfig::practice(10, 0.1, 0), &rules(&problem, 0.1)).unwrap();
    assert_eq!(r.blocks, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    assert_eq!(r.output_index, 11);
}

#[test]
fn descent_lowers_stationarity_on_average() {
    let problem = RwcBenchmark::new(RwcParams { w_noise: 0.2, theta_noise: 0.2, ..RwcParams::default() }).unwrap();
    let init = problem.default_init();
    let cfg = ProxConfig::for_gamma(problem.gamma());
    let start = bregman_stationarity(&problem, &init, &cfg).unwrap();
    let mut total = 0.0;
    for seed in 0..10 {
        let run = RunConfig { output: gaea_core::blockmd::OutputIterate::Last, ..RunConfig::theory(2000, 0.05, seed) };
        let r = run_two_block(&problem, &init[0], &init[1], &run, &rules(&problem, 0.05)).unwrap();
        total += bregman_stationarity(&problem, &r.output, &cfg).unwrap();
    }
    assert!(total / 10.0 < 0.1 * start, "{} vs {start}", total / 10.0);
}

#[test]
fn stationarity_is_nonnegative_across_the_region() {
    let problem = rwc_benchmark(4, 4, 1.0, 5).unwrap();
    let points = problem.sample_region(20, 1.5, &mut StreamRng::new(0, StreamTag::Problem, 9));
    let cfg = ProxConfig::for_gamma(problem.gamma());
    for x in &points {
        assert!(bregman_stationarity(&problem, x, &cfg).unwrap() >= 0.0);
    }
}

#[test]
fn euclidean_rule_may_drive_an_entropic_block() {
    let problem = rwc_benchmark(2, 3, 1.0, 0).unwrap();
    let init = problem.default_init();
    let sgd = [
        UpdateRule::closed_form(BlockGeometry::euclidean(2), 0.1).unwrap(),
        UpdateRule::closed_form(BlockGeometry::euclidean_simplex(3), 0.1).unwrap(),
    ];
    let r = run_two_block(&problem, &init[0], &init[1], &RunConfig::practice(50, 0.1, 0), &sgd).unwrap();
    let theta = &r.output[1];
    assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(theta.iter().all(|v| *v >= 0.0));

    let wrong = [
        UpdateRule::closed_form(BlockGeometry::euclidean(2), 0.1).unwrap(),
        UpdateRule::closed_form(BlockGeometry::euclidean(3), 0.1).unwrap(),
    ];
    assert!(run_two_block(&problem, &init[0], &init[1], &RunConfig::practice(5, 0.1, 0), &wrong).is_err());
}
