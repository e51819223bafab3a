//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilt_frontier::cli::{execute_frontier, frontier_exit_code, FrontierArgs, RunConfig, EXIT_OK};
use tilt_frontier::data::{generate, Noise, SyntheticConfig, SyntheticKind};
use tilt_frontier::frontier::{build_frontier, FrontierRecord, Split};
use tilt_frontier::loss_core::{tilted_value, LossProfile, TiltParam};
use tilt_frontier::models::{tilted_objective_and_grad, Activation, ModelSpec};
use tilt_frontier::solver::{default_grid, geometric_grid, minimize, SolverConfig};
use tilt_frontier::verify::{grid_minimize, run_check, CheckStatus};

struct Outcome {
    passed: bool,
    details: String,
}

fn outcome(passed: bool, details: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        details: details.into(),
    }
}

fn tilt(lambda: f64) -> TiltParam {
    TiltParam::new(lambda).unwrap()
}

fn sample_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/compas_sample.csv")
}

fn random_profiles() -> Vec<LossProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..1000)
        .map(|_| {
            let n = rng.random_range(2..=100);
            LossProfile::new((0..n).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap()
        })
        .collect()
}

fn naive_mean(losses: &[f64]) -> f64 {
    losses.iter().sum::<f64>() / losses.len() as f64
}

fn naive_max(losses: &[f64]) -> f64 {
    losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn sandwich_and_limits() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut worst_small = 0.0f64;
    let mut worst_large = 0.0f64;
    let mut large_checked = 0;
    for p in random_profiles() {
        let losses = p.losses();
        let (mean, max) = (naive_mean(losses), naive_max(losses));
        let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let range = max - min;
        let small = tilted_value(&p, tilt(1e-7));
        let second = losses
            .iter()
            .copied()
            .filter(|&l| l < max)
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = max - second;
        let mut values = vec![small];
        worst_small = worst_small.max((small - mean).abs() / (1e-4 * (1.0 + range)));
        if gap >= 0.1 {
            let large = tilted_value(&p, tilt(40.0 / gap));
            values.push(large);
            worst_large = worst_large.max((large - max).abs() / (0.15 * gap));
            large_checked += 1;
        }
        for lambda in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            values.push(tilted_value(&p, tilt(lambda)));
        }
        let eps = 1e-12 * (1.0 + max);
        violations += values
            .iter()
            .filter(|&&v| !(v >= mean - eps && v <= max + eps))
            .count();
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && worst_small <= 1.0 && worst_large <= 1.0 && elapsed < Duration::from_secs(5),
        format!(
            "{violations} sandwich violations; small-tilt error {worst_small:.3} and large-tilt error {worst_large:.3} \
             of tolerance ({large_checked} gap profiles); {elapsed:.2?}"
        ),
    )
}

fn monotone_in_lambda() -> Outcome {
    let grid = geometric_grid(1e-3, 1e3, 50).unwrap();
    let mut worst_drop = 0.0f64;
    for p in random_profiles() {
        let values: Vec<f64> = grid.iter().map(|&l| tilted_value(&p, tilt(l))).collect();
        for w in values.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    outcome(
        worst_drop <= 1e-10,
        format!("largest decrease along a 50-point grid {worst_drop:e} (slack 1e-10)"),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut worst_family = String::new();
    for family in ["linear", "logistic", "mlp1", "mlp2"] {
        for instance in 0..100u64 {
            let p = rng.random_range(1..=5);
            let n = rng.random_range(2..=30);
            let spec = ModelSpec::from_name(family, p, 8, Activation::Tanh).unwrap();
            let classifier = spec.is_classifier();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let targets: Vec<f64> = (0..n)
                .map(|_| {
                    if classifier {
                        f64::from(rng.random_bool(0.5) as u8)
                    } else {
                        rng.random_range(-3.0..3.0)
                    }
                })
                .collect();
            let dataset = tilt_frontier::data::Dataset::from_rows(rows, targets, None).unwrap();
            let theta: Vec<f64> = spec
                .init_params(instance)
                .into_inner()
                .into_iter()
                .map(|v| v * 2.0)
                .collect();
            let lambda = tilt(rng.random_range(0.1..5.0));
            let (_, grad) = tilted_objective_and_grad(&spec, &theta, &dataset, lambda).unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..theta.len())
                .map(|j| {
                    let mut plus = theta.clone();
                    let mut minus = theta.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let fp = tilted_objective_and_grad(&spec, &plus, &dataset, lambda)
                        .unwrap()
                        .0;
                    let fm = tilted_objective_and_grad(&spec, &minus, &dataset, lambda)
                        .unwrap()
                        .0;
                    (fp - fm) / (2.0 * h)
                })
                .collect();
            let diff = grad
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            let rel = diff / scale;
            if rel > worst {
                worst = rel;
                worst_family = family.to_string();
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-5 && elapsed < Duration::from_secs(30),
        format!(
            "worst relative error {worst:e} ({worst_family}) over 400 instances; {elapsed:.2?}"
        ),
    )
}

fn minimizer_convergence() -> Outcome {
    let spec = ModelSpec::linear(1).without_intercept();
    let dataset =
        tilt_frontier::data::Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![0.0, 10.0], None)
            .unwrap();
    let config = SolverConfig {
        grad_tol: 1e-10,
        max_iters: 200_000,
        ..Default::default()
    };
    let solve = |lambda: f64| {
        minimize(&spec, &dataset, tilt(lambda), &config, &spec.zero_params())
            .unwrap()
            .theta_hat
            .as_slice()[0]
    };
    let small = solve(1e-4);
    let large = solve(1e3);
    let oracle = grid_minimize(
        |t| t[0].powi(2).max((2.0 * t[0] - 10.0).powi(2)),
        &[-6.0],
        &[14.0],
        2,
    );
    let passed = (small - 4.0).abs() <= 1e-3
        && (large - oracle.argmin[0]).abs() <= 5e-2
        && (oracle.argmin[0] - 10.0 / 3.0).abs() <= 1e-3
        && !oracle.on_boundary;
    outcome(
        passed,
        format!(
            "theta(1e-4)={small:.6} (target 4), theta(1e3)={large:.6} vs grid minimax {:.6}",
            oracle.argmin[0]
        ),
    )
}

fn frontier_monotonicity() -> Outcome {
    let start = Instant::now();
    let synthetic = generate(&SyntheticConfig {
        kind: SyntheticKind::TwoGroupLogistic,
        n: 500,
        p: 5,
        noise: Noise::Gaussian { sigma: 1.0 },
        group_imbalance: 0.2,
        seed: 17,
        feature_mean: 0.0,
        theta_star: None,
    })
    .unwrap();
    let spec = ModelSpec::logistic(5);
    let names = synthetic.dataset.group_names().unwrap();
    let records = build_frontier(
        &spec,
        &synthetic.dataset,
        None,
        Some(&names),
        &default_grid(),
        &SolverConfig::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let avg: Vec<f64> = records.iter().map(|r| r.avg_individual_loss).collect();
    let max: Vec<f64> = records.iter().map(|r| r.max_individual_loss).collect();
    let avg_drop = avg
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let max_rise = max
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let converged = records.iter().filter(|r| r.converged).count();
    outcome(
        records.len() == 25
            && converged == 25
            && avg_drop <= 1e-6
            && max_rise <= 1e-6
            && elapsed < Duration::from_secs(60),
        format!(
            "avg {:.6}->{:.6}, max {:.6}->{:.6}; largest avg decrease {avg_drop:e}, largest max increase {max_rise:e}; \
             {converged}/25 converged; {elapsed:.2?}",
            avg[0], avg[24], max[0], max[24]
        ),
    )
}

fn gd_rate_bound() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for (name, lambda) in [
        ("gd_rate_lambda_0.1", 0.1),
        ("gd_rate_lambda_1", 1.0),
        ("gd_rate_lambda_5", 5.0),
    ] {
        let r = run_check(name).unwrap();
        // measured = [largest excess over bound, empirical rate, guaranteed rate, C]
        let c = r.measured[3];
        let expected_rate = 1.0 - 2.0 / (2.0 + 2.0 * c * lambda);
        let rate_matches = (r.measured[2] - expected_rate).abs() <= 1e-15;
        passed &= r.status == CheckStatus::Pass && rate_matches;
        details.push(format!(
            "lambda={lambda}: excess {:e}, rate {:.6}",
            r.measured[0], r.measured[2]
        ));
    }
    outcome(passed, details.join("; "))
}

fn check_group(names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut details = Vec::new();
    for &name in names {
        let r = run_check(name).unwrap();
        passed &= r.status == CheckStatus::Pass;
        details.push(format!("{name}: {:?} {:?}", r.status, r.measured));
    }
    outcome(passed, details.join("; "))
}

fn timed(f: impl FnOnce() -> Outcome, limit: Duration) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.passed &= elapsed < limit;
    o.details = format!("{}; {elapsed:.2?}", o.details);
    o
}

fn frontier_args(out: PathBuf) -> FrontierArgs {
    FrontierArgs {
        data: Some(sample_data()),
        target: Some("two_year_recid".into()),
        group: Some("race".into()),
        model: Some("logistic,mlp1".into()),
        hidden: Some(8),
        lambda_count: Some(6),
        max_iters: Some(300),
        seed: Some(3),
        out: Some(out),
        ..Default::default()
    }
}

fn run_quietly(args: &FrontierArgs) -> u8 {
    let config = RunConfig::resolve(args).unwrap();
    frontier_exit_code(&execute_frontier(&config).unwrap())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let codes = [
        run_quietly(&frontier_args(a.clone())),
        run_quietly(&frontier_args(b.clone())),
    ];
    let mut identical = true;
    let mut compared = 0;
    for file in ["frontier_logistic.csv", "frontier_mlp1.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        identical &= !x.is_empty() && x == y;
        compared += 1;
    }
    outcome(
        identical && codes == [EXIT_OK, EXIT_OK],
        format!("{compared} CSV pairs byte-identical: {identical}"),
    )
}

fn read_records(path: PathBuf) -> Vec<FrontierRecord> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn sample_frontier_shape() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let args = FrontierArgs {
        data: Some(sample_data()),
        target: Some("two_year_recid".into()),
        group: Some("race".into()),
        model: Some("logistic".into()),
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let code = run_quietly(&args);
    let csv = std::fs::read_to_string(dir.path().join("frontier_logistic.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let train: Vec<&csv::StringRecord> = rows
        .iter()
        .filter(|r| &r[col("split")] == "train")
        .collect();
    let test_rows = rows.iter().filter(|r| &r[col("split")] == "test").count();
    let value = |r: &csv::StringRecord, name: &str| r[col(name)].parse::<f64>().unwrap();
    let (first, last) = (train[0], train[train.len() - 1]);
    let max_drops = value(last, "max_individual_loss") < value(first, "max_individual_loss");
    let avg_rises = value(last, "avg_individual_loss") >= value(first, "avg_individual_loss");
    let json = read_records(dir.path().join("frontier_logistic.jsonl"));
    let mirrored = json.len() == rows.len()
        && json.iter().filter(|r| r.split == Split::Train).count() == train.len();
    outcome(
        code == EXIT_OK
            && train.len() == 25
            && test_rows == 25
            && max_drops
            && avg_rises
            && mirrored,
        format!(
            "train max {:.6} -> {:.6}, avg {:.6} -> {:.6}; {} train / {test_rows} test rows",
            value(first, "max_individual_loss"),
            value(last, "max_individual_loss"),
            value(first, "avg_individual_loss"),
            value(last, "avg_individual_loss"),
            train.len()
        ),
    )
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("1 sandwich and limits", Box::new(sandwich_and_limits)),
        ("2 monotone in lambda", Box::new(monotone_in_lambda)),
        ("3 gradient correctness", Box::new(gradient_correctness)),
        ("4 minimizer convergence", Box::new(minimizer_convergence)),
        ("5 frontier monotonicity", Box::new(frontier_monotonicity)),
        ("6 gradient descent rate bound", Box::new(gd_rate_bound)),
        (
            "7 regularization bound",
            Box::new(|| {
                check_group(&[
                    "regularization_bound_a",
                    "regularization_bound_b",
                    "regularization_bound_c",
                ])
            }),
        ),
        (
            "8 identifiability",
            Box::new(|| {
                timed(
                    || check_group(&["identifiability_symmetric", "identifiability_skewed"]),
                    Duration::from_secs(120),
                )
            }),
        ),
        (
            "9 utility argmin equivalence",
            Box::new(|| check_group(&["utility_argmin_equivalence"])),
        ),
        (
            "10 leximax limit",
            Box::new(|| check_group(&["leximax_max_separated", "leximax_max_tied"])),
        ),
        ("11 determinism", Box::new(determinism)),
        ("12 sample frontier shape", Box::new(sample_frontier_shape)),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.passed {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.details
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
