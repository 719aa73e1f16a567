use std::time::Instant;
use cpt_kit::experiments::*;
use cpt_kit::inference::Statistic;
use cpt_kit::sampler::ChainConfig;

fn main() {
    let cfg = ExperimentConfig {
        family: Family::Cubic,
        n: 50, p: 20,
        theta: vec![0.0],
        c: vec![], n_unlabeled: vec![], n_labeled: vec![],
        trials: 20, alpha: 0.05,
        chain: ChainConfig::new(50, 100, 9),
        statistic: Statistic::AbsCorr,
        fixed_params: false, trace: None, worst_case: None,
    };
    let t0 = Instant::now();
    let result = run_suite(&cfg).unwrap();
    let dt = t0.elapsed();
    println!("20 trials (CPT+CRT, n=50 p=20 M=100 S=50): {:?} -> {:?} per trial", dt, dt / 20);
    println!("rows: {}", result.rows.len());
}
