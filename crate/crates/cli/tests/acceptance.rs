//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fbm_chaos::config::{Settings, DEFAULT_SEED};
use fbm_chaos::experiments::{euler, exact, girsanov, negativity, operator_check, simulate};
use fbm_chaos::report::{ExperimentReport, Metric};
use fbm_chaos_core::{HurstPair, ModelParams};

type Outcome = anyhow::Result<(bool, String)>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn metric<'a>(r: &'a ExperimentReport, name: &str) -> anyhow::Result<&'a Metric> {
    r.metric_named(name).ok_or_else(|| anyhow::anyhow!("missing metric {name}"))
}

/// Checks every named metric of `r` and describes their values.
fn judged(r: &ExperimentReport, names: &[&str]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        let m = metric(r, name)?;
        ok &= m.passed == Some(true);
        match m.std_error {
            Some(se) => parts.push(format!("{name}={:.4e}±{se:.1e}", m.value)),
            None => parts.push(format!("{name}={:.4e}", m.value)),
        }
    }
    Ok((ok, parts.join(" ")))
}

fn combine(outcomes: impl IntoIterator<Item = Outcome>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for o in outcomes {
        let (pass, text) = o?;
        ok &= pass;
        parts.push(text);
    }
    Ok((ok, parts.join("; ")))
}

fn exact_config(alpha: f64, b: f64) -> exact::ExactConfig {
    exact::ExactConfig {
        alpha,
        a: 1.0,
        b,
        horizon: 1.0,
        grid_n: 64,
        samples: 100,
        mean_samples: 100_000,
        truncation: 20,
        seed: DEFAULT_SEED,
        threads: None,
        with_decay: false,
    }
}

fn exponential_identity() -> Outcome {
    combine([0.3, 0.5, 0.7].map(|alpha| {
        let c = exact::ExactConfig { mean_samples: 2, ..exact_config(alpha, 0.5) };
        let r = exact::run(&c)?;
        let (ok, text) = judged(&r, &["sup_node_error"])?;
        Ok((ok, format!("alpha={alpha} {text}")))
    }))
}

fn mean_identity() -> Outcome {
    combine([(0.3, 0.0), (0.7, 1.0)].map(|(alpha, b)| {
        let c = exact::ExactConfig { samples: 1, ..exact_config(alpha, b) };
        let r = exact::run(&c)?;
        let (ok, text) = judged(&r, &["terminal_mean"])?;
        Ok((ok, format!("alpha={alpha} b={b} target={:.4} {text}", b.exp())))
    }))
}

fn euler_threshold() -> Outcome {
    let c = euler::EulerConfig {
        alphas: vec![0.3, 0.7],
        a: 1.0,
        horizon: 1.0,
        steps: vec![8, 128],
        samples: 10_000,
        seed: DEFAULT_SEED,
        threads: None,
    };
    let r = euler::run(&c)?;
    judged(&r, &["mse_ratio_n128_over_n8_alpha_0.7", "mse_ratio_n128_over_n8_alpha_0.3"])
}

fn operator_report() -> anyhow::Result<ExperimentReport> {
    operator_check::run(&operator_check::OperatorCheckConfig::default())
}

fn kstar_isometry() -> Outcome {
    let r = operator_report()?;
    let names: Vec<String> = [0.25, 0.75]
        .iter()
        .flat_map(|a| [0.5, 1.0].map(|t| format!("kstar_isometry_error_alpha_{a}_t_{t}")))
        .collect();
    judged(&r, &names.iter().map(String::as_str).collect::<Vec<_>>())
}

fn power_law() -> Outcome {
    let r = operator_report()?;
    judged(&r, &["power_law_slope_error_alpha_0.25", "power_law_slope_error_alpha_0.75"])
}

fn girsanov_mean() -> Outcome {
    let r = girsanov::run(&girsanov::GirsanovConfig::from_settings(&Settings::default()))?;
    judged(&r, &["density_mean", "reweighted_shifted_terminal_mean"])
}

fn deterministic_sheet() -> Outcome {
    let r = operator_report()?;
    judged(&r, &["picard_sup_error_a_-1", "picard_sup_error_a_1"])
}

fn negativity_bound() -> Outcome {
    let r = negativity::run(&negativity::NegativityConfig::from_settings(&Settings::default()))?;
    judged(&r, &["negative_on_region_lower_95"])
}

fn chaos_norm_decay() -> Outcome {
    let p = ModelParams { hurst: HurstPair::path(0.3)?, a: 1.0, b: 0.0, horizon: 1.0 };
    let mut r = ExperimentReport::new("decay");
    exact::decay_metrics(&mut r, &p)?;
    judged(&r, &["decay_norm_over_fitted_bound", "decay_max_ratio_from_order_3"])
}

fn sampler_laws() -> Outcome {
    combine([0.25, 0.5, 0.75].map(|alpha| {
        let c = simulate::SimulateConfig {
            alpha,
            beta: alpha,
            horizon: 1.0,
            grid_n: 8,
            samples: 200_000,
            seed: DEFAULT_SEED,
            threads: None,
        };
        let r = simulate::run(&c)?;
        let (ok, text) = judged(&r, &["path_covariance_max_z", "sheet_terminal_variance"])?;
        Ok((ok, format!("alpha={alpha} {text}")))
    }))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exponential solution identity", 10, exponential_identity),
        ("mean identity", 30, mean_identity),
        ("Wick-Euler threshold", 120, euler_threshold),
        ("K* isometry", 5, kstar_isometry),
        ("power law slope", 5, power_law),
        ("Girsanov unit mean", 60, girsanov_mean),
        ("deterministic sheet equation", 10, deterministic_sheet),
        ("negativity on a region", 300, negativity_bound),
        ("chaos norm decay", 30, chaos_norm_decay),
        ("sampler laws", 60, sampler_laws),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let (ok, text) = match outcome {
            Ok((ok, text)) => (ok && in_time, text),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.2}s of {}s] {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit,
            text
        );
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
