//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any of them fails. Pass criterion numbers as arguments to
//! run a subset.

use std::process::Command;
use std::time::Instant;

use mdshrink::rmt::{delta_loss, ell_inv, lambda_fwd, loss_branches, optimal_delta};
use mdshrink::sim::{
    null_spectra, probe_spiked_model, run_manifold_experiment, run_spiked_experiment, summarize,
    ErrorMetric, ManifoldExperimentConfig, SpikedExperimentConfig,
};
use mdshrink::{AspectRatio, Execution, RuleKind, SpikedModel};
use mdshrink_cli::output::csv_body;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ar(b: f64) -> AspectRatio {
    AspectRatio::new(b).unwrap()
}

fn median(v: impl IntoIterator<Item = f64>) -> f64 {
    summarize(&v.into_iter().collect::<Vec<_>>())
        .unwrap()
        .median
}

fn formula_suite() -> Outcome {
    let start = Instant::now();
    let mut worst_trip: f64 = 0.0;
    let mut worst_edge: f64 = 0.0;
    let mut worst_zeta: f64 = 0.0;
    let mut worst_opt: f64 = 0.0;
    for b in [0.1, 0.25, 0.5, 0.9, 1.0].map(ar) {
        let lp = b.ell_plus();
        for i in 1..=1000 {
            let alpha = lp + (100.0 - lp) * i as f64 / 1000.0;
            let back = ell_inv(lambda_fwd(alpha, b).unwrap(), b).unwrap();
            worst_trip = worst_trip.max((back - alpha).abs());

            // Both branches of the loss meet at zeta = 1/alpha.
            let z = 1.0 / alpha;
            let (up, um) = loss_branches(alpha, z, b).unwrap();
            worst_zeta = worst_zeta.max((up + um).abs());
            let left = delta_loss(alpha, z * (1.0 - 1e-13), b).unwrap();
            let right = delta_loss(alpha, z * (1.0 + 1e-13), b).unwrap();
            worst_zeta = worst_zeta.max((left - right).abs());

            let opt = optimal_delta(alpha, b).unwrap();
            worst_opt = worst_opt.max((opt - delta_loss(alpha, z, b).unwrap()).abs());
        }
        let at_edge = lambda_fwd(lp, b).unwrap();
        let above = lambda_fwd(lp * (1.0 + 1e-13), b).unwrap();
        worst_edge = worst_edge
            .max((at_edge - b.lambda_plus()).abs())
            .max((above - b.lambda_plus()).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_trip <= 1e-10
        && worst_edge <= 1e-10
        && worst_zeta <= 1e-10
        && worst_opt <= 1e-12
        && secs < 1.0;
    outcome(
        pass,
        format!(
            "round trip {worst_trip:.1e}, lambda edge {worst_edge:.1e}, zeta branch {worst_zeta:.1e}, optimum {worst_opt:.1e}, {secs:.2} s"
        ),
    )
}

fn optimality() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for b in [0.25, 0.5, 1.0].map(ar) {
        let lp = b.ell_plus();
        for i in 1..=400 {
            let alpha = lp + (20.0 - lp) * i as f64 / 400.0;
            let best = delta_loss(alpha, 1.0 / alpha, b).unwrap();
            for j in 0..=500 {
                let zeta = 5.0 * j as f64 / 500.0;
                worst = worst.max(best - delta_loss(alpha, zeta, b).unwrap());
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("{checked} grid points, max violation {worst:.1e}, {secs:.2} s"),
    )
}

fn rmt_convergence() -> Outcome {
    let start = Instant::now();
    let b = ar(0.5);
    let model = SpikedModel::new(vec![2.0], 1.0, b).unwrap();
    let probes = probe_spiked_model(&model, 4000, 2000, 50, 2024, Execution::Parallel).unwrap();
    let top = median(probes.iter().map(|p| p.top_eigenvalue));
    let cos2 = median(probes.iter().map(|p| p.top_cosine_sq));
    let loss = median(probes.iter().map(|p| p.loss_optimal));
    let target = optimal_delta(2.0, b).unwrap();
    let pass = (top - 3.75).abs() <= 0.1
        && (cos2 - 0.7).abs() <= 0.05
        && (loss - target).abs() <= 0.1 * target;
    outcome(
        pass,
        format!(
            "top eigenvalue {top:.4} (3.75), cos^2 {cos2:.4} (0.7), optimal loss {loss:.4} ({target:.4}), {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn lost_spike() -> Outcome {
    let start = Instant::now();
    let model = SpikedModel::new(vec![0.5], 1.0, ar(1.0)).unwrap();
    let probes = probe_spiked_model(&model, 4000, 4000, 10, 77, Execution::Parallel).unwrap();
    let classical = median(probes.iter().map(|p| p.loss_classical));
    let optimal = median(probes.iter().map(|p| p.loss_optimal));
    outcome(
        classical >= 1.8 && optimal >= 1.8,
        format!(
            "median loss classical {classical:.4}, optimal {optimal:.4} (floor 1.8), {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn loss_ordering() -> Outcome {
    let start = Instant::now();
    let mut order_fail = Vec::new();
    let mut gap_fail = Vec::new();
    let mut min_gap = f64::INFINITY;
    for d in [1usize, 4] {
        let cfg = SpikedExperimentConfig {
            reps: 50,
            master_seed: 300 + d as u64,
            ..SpikedExperimentConfig::with_rank(d)
        };
        let report = run_spiked_experiment(&cfg).unwrap();
        for cell in &report.cells {
            if cell.sigma < 0.45 - 1e-9 {
                continue;
            }
            let c = cell.rule(RuleKind::Classical).unwrap();
            let o = cell.rule(RuleKind::Optimal).unwrap();
            if o.summary.median > c.summary.median {
                order_fail.push(format!("d={d} beta={} sigma={}", cell.beta, cell.sigma));
            }
            if cell.sigma >= 0.9 - 1e-9 && cell.beta >= 0.4 - 1e-9 {
                let gap = c.log_excess_summary.median - o.log_excess_summary.median;
                min_gap = min_gap.min(gap);
                if gap <= 0.5 {
                    gap_fail.push(format!(
                        "d={d} beta={} sigma={} gap={gap:.2}",
                        cell.beta, cell.sigma
                    ));
                }
            }
        }
    }
    outcome(
        order_fail.is_empty() && gap_fail.is_empty(),
        format!(
            "ordering violations {order_fail:?}, gap violations {gap_fail:?}, smallest log10 gap {min_gap:.2}, {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Published means per (beta, sigma): classical y1, optimal y1, classical y2, optimal y2.
const TABLE: [(f64, f64, [f64; 4]); 9] = [
    (0.1, 1.0, [18.78, 0.78, 55.98, 1.32]),
    (0.1, 1.5, [23.72, 1.41, 59.42, 2.59]),
    (0.1, 2.0, [33.54, 2.18, 64.04, 5.19]),
    (0.5, 1.0, [26.86, 2.41, 60.88, 4.06]),
    (0.5, 1.5, [42.66, 4.78, 69.06, 10.65]),
    (0.5, 2.0, [58.59, 9.84, 77.24, 31.52]),
    (1.0, 1.0, [34.70, 4.05, 64.11, 8.39]),
    (1.0, 1.5, [54.72, 10.62, 75.54, 23.97]),
    (1.0, 2.0, [69.65, 21.35, 83.30, 62.99]),
];

fn manifold_table() -> Outcome {
    let start = Instant::now();
    let cfg = ManifoldExperimentConfig {
        reps: 100,
        master_seed: 1,
        ..Default::default()
    };
    let report = run_manifold_experiment(&cfg).unwrap();
    let slots = [
        (0, RuleKind::Classical),
        (0, RuleKind::Optimal),
        (1, RuleKind::Classical),
        (1, RuleKind::Optimal),
    ];
    // The published numbers read naturally as percentages, so both units are tried
    // under both distance conventions.
    let mut best: Option<(usize, String, String)> = None;
    for metric in [ErrorMetric::Squared, ErrorMetric::Unsquared] {
        for (unit, scale) in [("fraction", 1.0), ("percent", 100.0)] {
            let mut hits = 0;
            let mut worst = String::new();
            let mut worst_rel = 0.0;
            for &(beta, sigma, published) in &TABLE {
                let cell = report.cell(beta, sigma).unwrap();
                for (k, &(tp, rule)) in slots.iter().enumerate() {
                    let ours = scale * cell.entry(tp, rule).unwrap().summary(metric).mean;
                    let rel = (ours - published[k]).abs() / published[k];
                    if rel <= 0.25 {
                        hits += 1;
                    }
                    if rel > worst_rel {
                        worst_rel = rel;
                        worst = format!(
                            "beta={beta} sigma={sigma} y{} {}: {ours:.3} vs {}",
                            tp + 1,
                            rule.name(),
                            published[k]
                        );
                    }
                }
            }
            let label = format!("{metric:?}/{unit}");
            if best.as_ref().is_none_or(|b| hits > b.0) {
                best = Some((hits, label, worst));
            }
        }
    }
    let (hits, label, worst) = best.unwrap();
    outcome(
        hits == 36,
        format!(
            "best convention {label} matches {hits}/36 cells within 25% (worst {worst}), {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn cli_output(args: &[&str], threads: &str) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_mdshrink"))
        .args(args)
        .env("MDSHRINK_THREADS", threads)
        .output()
        .expect("cli runs");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_rows(text: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["rows"].clone()
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 5] = [
        &["asym-loss"],
        &["shrinker-curve"],
        &[
            "spiked-sim",
            "--reps",
            "3",
            "--n",
            "100",
            "--d",
            "4",
            "--seed",
            "9",
        ],
        &["manifold-sim", "--reps", "3", "--p", "30", "--seed", "9"],
        &[
            "manifold-sim",
            "--reps",
            "3",
            "--p",
            "30",
            "--seed",
            "9",
            "--json",
        ],
    ];
    let mut mismatched = Vec::new();
    for args in runs {
        let a = cli_output(args, "1");
        let b = cli_output(args, "3");
        let same = if args.contains(&"--json") {
            json_rows(&a) == json_rows(&b)
        } else {
            !csv_body(&a).is_empty() && csv_body(&a) == csv_body(&b)
        };
        if !same {
            mismatched.push(args.join(" "));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{} commands compared across 1 and 3 threads, mismatches {mismatched:?}",
            runs.len()
        ),
    )
}

fn null_case() -> Outcome {
    let start = Instant::now();
    let b = ar(0.5);
    let (lo, hi) = (b.lambda_minus() - 0.1, b.lambda_plus() + 0.1);
    let spectra = null_spectra(2000, 1000, 100, 8, Execution::Parallel).unwrap();
    let inside = spectra
        .iter()
        .filter(|s| s.iter().all(|&x| (lo..=hi).contains(&x)))
        .count();
    outcome(
        inside >= 99,
        format!(
            "{inside}/100 spectra inside [{lo:.4}, {hi:.4}], {:.0} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("formula suite", formula_suite),
        ("optimality of the optimal shrinker", optimality),
        ("spiked-model convergence", rmt_convergence),
        ("lost spike", lost_spike),
        ("loss ordering across the grid", loss_ordering),
        ("manifold error table", manifold_table),
        ("CLI determinism", determinism),
        ("null-case spectrum", null_case),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.iter().any(|o| o == &id.to_string()) {
            continue;
        }
        let r = run();
        println!(
            "criterion {id} [{}] {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
