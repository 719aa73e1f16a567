//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). Tolerances are pinned in
//! the asserts.
//!
//! Run with:
//!
//! ```bash
//! cargo test -p cpt-kit-cli --test acceptance -- --nocapture --test-threads 1
//! ```

use std::time::Instant;

use cpt_kit::diagnostics::{
    discrete_tv, gaussian_kl, lag1_autocorrelation, pinsker_tv_bound, stationary_distribution,
    transition_matrix,
};
use cpt_kit::experiments::{
    run_suite, run_trace_suite, worst_case_crt_experiment, ExperimentConfig, Family, TraceSpec,
    WorstCaseSpec,
};
use cpt_kit::inference::{run_cpt_test, Method, Statistic};
use cpt_kit::model::{
    ConditionalDensity, Covariate, Dataset, GaussianLinearModel, Response,
};
use cpt_kit::num::Real;
use cpt_kit::perm::Permutation;
use cpt_kit::sampler::{
    exact_cpt_distribution, pairwise_step, run_chain, swap_log_odds, ChainConfig, ChainStream,
};
use cpt_kit::streams::substream;

fn zv(vals: &[f64]) -> Vec<Covariate<f64>> {
    vals.iter().map(|&v| Covariate::Vector(vec![v])).collect()
}

fn report(criterion: &str, passed: bool, details: &str, started: Instant) {
    let state = if passed { "PASS" } else { "FAIL" };
    println!(
        "acceptance {criterion}: {state} — {details} [{:.1?}]",
        started.elapsed()
    );
    assert!(passed, "{criterion}: {details}");
}

fn suite_config(family: Family) -> ExperimentConfig {
    ExperimentConfig {
        family,
        n: 50,
        p: 20,
        theta: vec![],
        c: vec![],
        n_unlabeled: vec![],
        n_labeled: vec![],
        trials: 1000,
        alpha: 0.05,
        chain: ChainConfig::new(50, 100, 0),
        statistic: Statistic::AbsCorr,
        fixed_params: false,
        trace: None,
        worst_case: None,
    }
}

/// Criterion 1: chains initialized from the exact sampler and run S = 50
/// steps stay within TV 0.02 of the enumerated permutation law (n = 5,
/// random Gaussian linear model, 2e5 chains).
#[test]
fn criterion_01_exact_sampler_agreement() {
    let started = Instant::now();
    let mut rng = substream(101, &[0]);
    let p = 2;
    let b: Vec<f64> = (0..p).map(|_| f64::std_normal(&mut rng)).collect();
    let model = GaussianLinearModel::new(b.clone(), 1.0).unwrap();
    let n = 5;
    let z_rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| f64::std_normal(&mut rng)).collect())
        .collect();
    let x: Vec<f64> = z_rows
        .iter()
        .map(|row| {
            let mu: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
            mu + f64::std_normal(&mut rng)
        })
        .collect();
    let z: Vec<Covariate<f64>> = z_rows.into_iter().map(Covariate::Vector).collect();

    let target = exact_cpt_distribution(&x, &z, &model).unwrap();
    assert_eq!(target.perms().len(), 120);

    let replicates = 200_000u64;
    let mut counts = vec![0u64; 120];
    for r in 0..replicates {
        let mut start_rng = substream(102, &[r]);
        let start = target.sample(&mut start_rng);
        let out = run_chain(&start, &x, &z, &model, 50, &ChainStream::new(103, r)).unwrap();
        let idx = target.perms().iter().position(|p| p == &out).unwrap();
        counts[idx] += 1;
    }
    let empirical: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / replicates as f64)
        .collect();
    let tv = discrete_tv(&empirical, target.probs()).unwrap().tv;
    report(
        "criterion 1 (exact-sampler agreement)",
        tv < 0.02,
        &format!("TV over 120 permutations = {tv:.4} (< 0.02)"),
        started,
    );
}

/// Criterion 2: detailed balance of the exact transition matrix within
/// 1e-12 and stationary eigenvector within 1e-10 of the enumerated law,
/// for n in {2,3,4} with three random models each.
#[test]
fn criterion_02_detailed_balance() {
    let started = Instant::now();
    let mut worst_balance = 0.0f64;
    let mut worst_stationary = 0.0f64;
    for n in [2usize, 3, 4] {
        for rep in 0..3u64 {
            let mut rng = substream(200, &[n as u64, rep]);
            let b = f64::std_normal(&mut rng);
            let s2 = 0.5 + 1.5 * f64::uniform(&mut rng);
            let model = GaussianLinearModel::new(vec![b], s2).unwrap();
            let zr: Vec<f64> = (0..n).map(|_| f64::std_normal(&mut rng)).collect();
            let x: Vec<f64> = zr
                .iter()
                .map(|&zi| b * zi + s2.sqrt() * f64::std_normal(&mut rng))
                .collect();
            let z = zv(&zr);

            let tm = transition_matrix(&x, &z, &model).unwrap();
            let target = exact_cpt_distribution(&x, &z, &model).unwrap();
            let pi = target.probs();
            for a in 0..pi.len() {
                for bb in 0..pi.len() {
                    let flow = pi[a] * tm.probs[a][bb] - pi[bb] * tm.probs[bb][a];
                    worst_balance = worst_balance.max(flow.abs());
                }
            }
            let stationary = stationary_distribution(&tm);
            for (a, b) in stationary.iter().zip(pi) {
                worst_stationary = worst_stationary.max((a - b).abs());
            }
        }
    }
    report(
        "criterion 2 (detailed balance)",
        worst_balance < 1e-12 && worst_stationary < 1e-10,
        &format!(
            "max |pi(a)P(a,b) - pi(b)P(b,a)| = {worst_balance:.2e} (< 1e-12), stationary L-inf = {worst_stationary:.2e} (< 1e-10)"
        ),
        started,
    );
}

/// Criterion 3: nominal Type I error with a correctly specified model
/// (theta = 0): both rejection rates in [0.03, 0.07] over 1000 trials.
#[test]
fn criterion_03_nominal_level() {
    let started = Instant::now();
    let mut cfg = suite_config(Family::Quadratic);
    cfg.theta = vec![0.0];
    cfg.chain.seed = 301;
    let result = run_suite(&cfg).unwrap();
    let cpt = result.row(0.0, Method::Cpt).unwrap().rejection_rate;
    let crt = result.row(0.0, Method::Crt).unwrap().rejection_rate;
    report(
        "criterion 3 (nominal level)",
        (0.03..=0.07).contains(&cpt) && (0.03..=0.07).contains(&crt),
        &format!("CPT rate {cpt:.4}, CRT rate {crt:.4} (each in [0.03, 0.07])"),
        started,
    );
}

/// Criterion 4: under cubic misspecification at theta = 0.5 the CRT's
/// Type I error exceeds the CPT's by more than 2 combined standard errors.
#[test]
fn criterion_04_robustness_ordering() {
    let started = Instant::now();
    let mut cfg = suite_config(Family::Cubic);
    cfg.theta = vec![0.5];
    cfg.chain.seed = 401;
    let result = run_suite(&cfg).unwrap();
    let cpt = result.row(0.5, Method::Cpt).unwrap();
    let crt = result.row(0.5, Method::Crt).unwrap();
    let combined_se = (cpt.stderr.powi(2) + crt.stderr.powi(2)).sqrt();
    let gap = crt.rejection_rate - cpt.rejection_rate;
    report(
        "criterion 4 (robustness ordering)",
        gap > 2.0 * combined_se,
        &format!(
            "CRT rate {:.4} - CPT rate {:.4} = {gap:.4} (> 2 x combined SE = {:.4})",
            crt.rejection_rate,
            cpt.rejection_rate,
            2.0 * combined_se
        ),
        started,
    );
}

/// Criterion 5: power along c in {0, 0.1, 0.2, 0.3} over 500 trials —
/// nominal at c = 0, nondecreasing up to 2 SE, and the CPT/CRT gap at most
/// 0.15 everywhere.
#[test]
fn criterion_05_power_sanity() {
    let started = Instant::now();
    let mut cfg = suite_config(Family::Power);
    cfg.c = vec![0.0, 0.1, 0.2, 0.3];
    cfg.trials = 500;
    cfg.chain.seed = 501;
    let result = run_suite(&cfg).unwrap();

    let mut ok = true;
    let mut notes = Vec::new();
    for method in [Method::Cpt, Method::Crt] {
        let rows: Vec<_> = cfg.c.iter().map(|&c| result.row(c, method).unwrap()).collect();
        let at_null = rows[0].rejection_rate;
        if !(0.03..=0.07).contains(&at_null) {
            ok = false;
        }
        for w in rows.windows(2) {
            let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            if w[1].rejection_rate < w[0].rejection_rate - slack {
                ok = false;
            }
        }
        notes.push(format!(
            "{method}: {}",
            rows.iter()
                .map(|r| format!("{:.3}", r.rejection_rate))
                .collect::<Vec<_>>()
                .join("/")
        ));
    }
    for &c in &cfg.c {
        let gap = (result.row(c, Method::Cpt).unwrap().rejection_rate
            - result.row(c, Method::Crt).unwrap().rejection_rate)
            .abs();
        if gap > 0.15 {
            ok = false;
        }
    }
    report(
        "criterion 5 (power sanity)",
        ok,
        &format!("power curves {}", notes.join("; ")),
        started,
    );
}

/// Criterion 6: worst-case CRT lower bound. n = 1, Bernoulli(0.9) truth vs
/// Bernoulli(0.5) model: d_TV = 0.4, and the empirical excess Type I error
/// at alpha(Z) clears tv - 2.5 sqrt(log M / M) from below and tv + 3 SE
/// from above (M = 1000, 1e4 trials).
#[test]
fn criterion_06_worst_case_lower_bound() {
    let started = Instant::now();
    let mut cfg = suite_config(Family::WorstCase);
    cfg.n = 1;
    cfg.trials = 10_000;
    cfg.chain = ChainConfig::new(1, 1000, 601);
    cfg.worst_case = Some(WorstCaseSpec {
        support: vec![0.0, 1.0],
        probs_star: vec![0.1, 0.9],
        probs_hat: vec![0.5, 0.5],
    });
    let report_wc = worst_case_crt_experiment(&cfg).unwrap();
    let tv_exact = (report_wc.tv - 0.4).abs() < 1e-15;
    report(
        "criterion 6 (worst-case CRT lower bound)",
        tv_exact && report_wc.lower_bound_satisfied && report_wc.upper_bound_satisfied,
        &format!(
            "tv = {:.4}, excess = {:.4} in [{:.4}, {:.4}]",
            report_wc.tv, report_wc.excess, report_wc.lower_bound, report_wc.upper_bound
        ),
        started,
    );
}

/// A density multiplied by h(x)c(z): the base-measure change the CPT must
/// ignore.
struct Tilted<'a> {
    base: &'a GaussianLinearModel<f64>,
    h: (f64, f64),
    c: (f64, f64),
}

impl ConditionalDensity<f64> for Tilted<'_> {
    fn log_density(&self, x: f64, z: &Covariate<f64>) -> cpt_kit::Result<f64> {
        let zv = match z {
            Covariate::Vector(v) => v[0],
            _ => unreachable!(),
        };
        Ok(self.base.log_density(x, z)? + self.h.0 * x + self.h.1 * x * x + self.c.0
            + self.c.1 * zv)
    }

    fn conditional_mean(&self, z: &Covariate<f64>) -> cpt_kit::Result<f64> {
        self.base.conditional_mean(z)
    }

    fn sample<G: rand::Rng + ?Sized>(
        &self,
        z: &Covariate<f64>,
        rng: &mut G,
    ) -> cpt_kit::Result<f64> {
        self.base.sample(z, rng)
    }
}

/// Criterion 7: swap log odds agree within 1e-9 under any positive
/// h(x)c(z) retilt, and equal-seed chains trace identical permutations.
#[test]
fn criterion_07_base_measure_invariance() {
    let started = Instant::now();
    let base = GaussianLinearModel::new(vec![1.1], 0.8).unwrap();
    let mut rng = substream(700, &[0]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let tilted = Tilted {
            base: &base,
            h: (f64::std_normal(&mut rng), 0.3 * f64::uniform(&mut rng) - 0.15),
            c: (f64::std_normal(&mut rng), f64::std_normal(&mut rng)),
        };
        let xi = 3.0 * f64::std_normal(&mut rng);
        let xj = 3.0 * f64::std_normal(&mut rng);
        let zi = Covariate::Vector(vec![2.0 * f64::std_normal(&mut rng)]);
        let zj = Covariate::Vector(vec![2.0 * f64::std_normal(&mut rng)]);
        let a = swap_log_odds(&base, xi, xj, &zi, &zj).unwrap();
        let b = swap_log_odds(&tilted, xi, xj, &zi, &zj).unwrap();
        worst = worst.max((a - b).abs());
    }

    let mut chain_rng = substream(701, &[0]);
    let n = 16;
    let zr: Vec<f64> = (0..n).map(|_| f64::std_normal(&mut chain_rng)).collect();
    let x: Vec<f64> = zr
        .iter()
        .map(|&zi| 1.1 * zi + f64::std_normal(&mut chain_rng))
        .collect();
    let z = zv(&zr);
    let tilted = Tilted { base: &base, h: (0.4, -0.1), c: (2.0, -0.6) };
    let stream = ChainStream::new(702, 0);
    let mut perm_base = Permutation::identity(n);
    let mut perm_tilted = Permutation::identity(n);
    let mut identical = true;
    for step in 1..=60 {
        perm_base = pairwise_step(&perm_base, &x, &z, &base, &stream, step).unwrap();
        perm_tilted = pairwise_step(&perm_tilted, &x, &z, &tilted, &stream, step).unwrap();
        identical &= perm_base == perm_tilted;
    }
    report(
        "criterion 7 (base-measure invariance)",
        worst < 1e-9 && identical,
        &format!("max |log-odds shift| = {worst:.2e} (< 1e-9), chain sequences identical: {identical}"),
        started,
    );
}

/// Criterion 8: super-uniform CPT p-values at n = 10, M = 19 over 1e4
/// replicates, under a constant model and a correctly specified model:
/// P(p <= alpha) <= alpha + 3 sqrt(alpha / 1e4).
#[test]
fn criterion_08_super_uniformity() {
    let started = Instant::now();
    let alphas = [0.05, 0.1, 0.25, 0.5];
    let replicates = 10_000u64;
    let mut details = Vec::new();
    let mut ok = true;
    for (label, b) in [("constant", 0.0f64), ("correct", 1.3)] {
        let model = GaussianLinearModel::new(vec![b], 1.0).unwrap();
        let mut hits = [0usize; 4];
        for r in 0..replicates {
            let mut rng = substream(800, &[b.to_bits(), r]);
            let n = 10;
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut zr = Vec::with_capacity(n);
            for _ in 0..n {
                let zi = f64::std_normal(&mut rng);
                x.push(b * zi + f64::std_normal(&mut rng));
                y.push(0.8 * zi + f64::std_normal(&mut rng));
                zr.push(vec![zi]);
            }
            let ds = Dataset::from_matrix(x, Response::Real(y), zr).unwrap();
            let res =
                run_cpt_test(&ds, &model, Statistic::AbsCorr, &ChainConfig::new(50, 19, r))
                    .unwrap();
            for (k, &a) in alphas.iter().enumerate() {
                if res.p_value <= a {
                    hits[k] += 1;
                }
            }
        }
        for (k, &a) in alphas.iter().enumerate() {
            let rate = hits[k] as f64 / replicates as f64;
            let bound = a + 3.0 * (a / replicates as f64).sqrt();
            if rate > bound {
                ok = false;
            }
            details.push(format!("{label} a={a}: {rate:.4}<={bound:.4}"));
        }
    }
    report(
        "criterion 8 (super-uniformity)",
        ok,
        &details.join(", "),
        started,
    );
}

/// Criterion 9: closed-form Gaussian KL within 1% of a 1e6-sample Monte
/// Carlo estimate for 10 random parameter pairs; Pinsker bound exact at 0
/// and 2.
#[test]
fn criterion_09_kl_diagnostic() {
    let started = Instant::now();
    let mut rng = substream(900, &[0]);
    let mut worst_rel = 0.0f64;
    for _ in 0..10 {
        let mu_star = 2.0 * f64::std_normal(&mut rng);
        let mu_hat = mu_star + 1.0 + f64::uniform(&mut rng); // gap in [1, 2]
        let s2_star = 0.8 + 0.7 * f64::uniform(&mut rng);
        let s2_hat = 0.8 + 0.7 * f64::uniform(&mut rng);
        let exact = gaussian_kl(mu_star, s2_star, mu_hat, s2_hat).unwrap();

        let draws = 1_000_000u32;
        let mut sum = 0.0;
        for _ in 0..draws {
            let x = mu_star + s2_star.sqrt() * f64::std_normal(&mut rng);
            let log_star = -0.5 * (x - mu_star).powi(2) / s2_star - 0.5 * s2_star.ln();
            let log_hat = -0.5 * (x - mu_hat).powi(2) / s2_hat - 0.5 * s2_hat.ln();
            sum += log_star - log_hat;
        }
        let mc = sum / draws as f64;
        worst_rel = worst_rel.max((mc - exact).abs() / exact);
    }
    let pinsker_exact =
        pinsker_tv_bound(0.0).unwrap() == 0.0 && pinsker_tv_bound(2.0).unwrap() == 1.0;
    report(
        "criterion 9 (KL diagnostic)",
        worst_rel < 0.01 && pinsker_exact,
        &format!(
            "worst MC relative error {worst_rel:.4} (< 0.01), pinsker(0)=0 and pinsker(2)=1: {pinsker_exact}"
        ),
        started,
    );
}

/// Criterion 10: mixing traces. 20 chains, 250 steps; the loglik trace's
/// lag-1 autocorrelation over steps 100..250 is below the one over steps
/// 0..50 in at least 16 chains, and the trace CSV is produced.
#[test]
fn criterion_10_mixing_traces() {
    let started = Instant::now();
    let mut cfg = suite_config(Family::Trace);
    cfg.trace = Some(TraceSpec { chains: 20, steps: 250 });
    cfg.chain.seed = 1001;
    let traces = run_trace_suite(&cfg).unwrap();
    assert_eq!(traces.len(), 20);

    let dir = tempfile::tempdir().unwrap();
    let mut stabilized = 0;
    for (k, trace) in traces.iter().enumerate() {
        let path = dir.path().join(format!("trace_{k:02}.csv"));
        let mut file = std::fs::File::create(&path).unwrap();
        trace.write_csv(&mut file).unwrap();

        let early = lag1_autocorrelation(&trace.loglik[0..=50]).unwrap();
        let late = lag1_autocorrelation(&trace.loglik[100..=250]).unwrap();
        if late < early {
            stabilized += 1;
        }
    }
    let csv_rows = std::fs::read_to_string(dir.path().join("trace_00.csv"))
        .unwrap()
        .lines()
        .count();
    report(
        "criterion 10 (mixing traces)",
        stabilized >= 16 && csv_rows == 252,
        &format!("lag-1 autocorrelation dropped in {stabilized}/20 chains (need >= 16); trace CSV has {csv_rows} rows"),
        started,
    );
}

/// Criterion 11: every command, rerun with the same seed and different
/// --threads, produces byte-identical result files.
#[test]
fn criterion_11_thread_determinism() {
    let started = Instant::now();
    let bin = env!("CARGO_BIN_EXE_cpt-kit");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();

    let mut rows = vec!["x,y,z1".to_string()];
    for i in 0..30 {
        let z = (i as f64 - 14.5) / 5.0;
        rows.push(format!(
            "{},{},{z}",
            z + ((i * 31 + 3) % 23) as f64 / 23.0 - 0.5,
            0.4 * z + ((i * 41 + 5) % 13) as f64 / 13.0 - 0.5
        ));
    }
    std::fs::write(dir.path().join("d.csv"), rows.join("\n") + "\n").unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"kind":"gaussian_linear","b":[1.0],"sigma2":1.0}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"family":"tanh","n":16,"p":3,"theta":[0.0,0.4],"trials":10,"alpha":0.05,"chain":{"S":8,"M":19,"seed":0}}"#,
    )
    .unwrap();

    let run = |args: &[&str]| {
        let output = std::process::Command::new(bin).args(args).output().unwrap();
        assert!(
            output.status.success(),
            "command {args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };

    let mut identical = true;
    let mut checked = Vec::new();
    for (threads, tag) in [("1", "t1"), ("4", "t4")] {
        run(&[
            "test", "--data", &path("d.csv"), "--model", &path("m.json"),
            "--method", "CPT", "-M", "49", "-S", "20", "--seed", "11",
            "--include-copies",
            "--copies-csv", &path(&format!("copies_{tag}.csv")),
            "--output", &path(&format!("cpt_{tag}.json")),
            "--threads", threads,
        ]);
        run(&[
            "test", "--data", &path("d.csv"), "--model", &path("m.json"),
            "--method", "CRT", "-M", "49", "--seed", "11",
            "--output", &path(&format!("crt_{tag}.json")),
            "--threads", threads,
        ]);
        run(&[
            "simulate", "--config", &path("cfg.json"), "--seed", "13",
            "--output", &path(&format!("sim_{tag}")),
            "--threads", threads,
        ]);
        run(&[
            "fit", "--data", &path("d.csv"), "--kind", "gaussian-linear",
            "--output", &path(&format!("fit_{tag}.json")),
            "--threads", threads,
        ]);
        run(&[
            "diagnose", "--data", &path("d.csv"), "--model", &path("m.json"),
            "-S", "40", "--seed", "17",
            "--output", &path(&format!("trace_{tag}.csv")),
            "--threads", threads,
        ]);
    }
    for (a, b) in [
        ("cpt_t1.json", "cpt_t4.json"),
        ("crt_t1.json", "crt_t4.json"),
        ("copies_t1.csv", "copies_t4.csv"),
        ("sim_t1/results.csv", "sim_t4/results.csv"),
        ("fit_t1.json", "fit_t4.json"),
        ("trace_t1.csv", "trace_t4.csv"),
    ] {
        let same = std::fs::read(dir.path().join(a)).unwrap()
            == std::fs::read(dir.path().join(b)).unwrap();
        identical &= same;
        checked.push(format!("{a}=={b}: {same}"));
    }
    report(
        "criterion 11 (thread determinism)",
        identical,
        &checked.join(", "),
        started,
    );
}
