//! Simulate, assemble, fit and compare against the generating coefficients
//! over a run of consecutive seeds.

use std::fmt::Write as _;

use deterrence::model::fit;
use deterrence::panel::assemble_panel;
use deterrence::simulator::{simulate, SimConfig};

use crate::config::{write_output, RunConfig};
use crate::failure::{CmdResult, Failure};

struct SeedOutcome {
    seed: u64,
    estimates: Result<Vec<f64>, String>,
}

/// Sample standard deviation; `None` below two values.
fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn sign_word(truth: f64, estimate: f64) -> &'static str {
    if truth == 0.0 {
        "n/a"
    } else if truth.signum() == estimate.signum() {
        "match"
    } else {
        "FLIP"
    }
}

pub fn cmd_recover(cfg: &RunConfig) -> CmdResult {
    let seeds: usize = cfg.get_or("seeds", 10)?;
    if seeds == 0 {
        return Err(Failure::Usage("seeds must be at least 1".into()));
    }
    let tolerance: f64 = cfg.get_or("recover_tolerance", 0.05)?;
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Failure::Usage(format!(
            "recover_tolerance must be positive, got {tolerance}"
        )));
    }
    let base = SimConfig::from_kv(cfg.kv())?;
    cfg.note_all(&base.to_kv());
    let fit_config = cfg.fit_config()?;
    cfg.ensure_out_dir()?;

    let variant = base.variant;
    let names = variant.coefficient_names();
    let truth = base.true_params(Vec::new()).coefficients();
    let neighbors = base.neighbor_spec()?;

    let mut outcomes = Vec::with_capacity(seeds);
    for i in 0..seeds as u64 {
        let seed = base.seed.wrapping_add(i);
        let sim = SimConfig { seed, ..base.clone() };
        let estimates = simulate(&sim)
            .and_then(|out| assemble_panel(&out.effort, &out.observations, &sim.lags, neighbors.as_ref()))
            .and_then(|(panel, _)| fit(&panel, variant, &fit_config))
            .map(|r| r.params.coefficients())
            .map_err(|e| e.to_string());
        match &estimates {
            Ok(est) => log::info!("seed {seed}: estimates {est:?}"),
            Err(e) => log::warn!("seed {seed}: {e}"),
        }
        outcomes.push(SeedOutcome { seed, estimates });
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "recovery check: variant {variant}, policy {}, {}x{} cells, {} bins, pairing {}, {} seeds from {}, tolerance {tolerance}",
        base.policy, base.n_cols, base.n_rows, base.n_bins, base.lags, seeds, base.seed
    );
    let truth_line: Vec<String> = names.iter().zip(&truth).map(|(n, t)| format!("{n} {t:.3}")).collect();
    let _ = writeln!(text, "truth: {}", truth_line.join(", "));

    let mut header = format!("{:>6}", "seed");
    for n in names {
        let _ = write!(
            header,
            "  {:>10}  {:>10}  {:>5}",
            format!("{n}_hat"),
            format!("err_{n}"),
            "sign"
        );
    }
    let _ = writeln!(text, "{header}  status");

    let mut violated = false;
    let mut failed_seeds = 0;
    let mut per_coef: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for o in &outcomes {
        let mut line = format!("{:>6}", o.seed);
        match &o.estimates {
            Ok(est) => {
                let mut ok = true;
                for (j, (&e, &t)) in est.iter().zip(&truth).enumerate() {
                    let err = e - t;
                    ok &= err.abs() <= tolerance;
                    per_coef[j].push(e);
                    let _ = write!(line, "  {e:>10.4}  {err:>+10.4}  {:>5}", sign_word(t, e));
                }
                violated |= !ok;
                line.push_str(if ok { "  ok" } else { "  OUT OF TOLERANCE" });
            }
            Err(e) => {
                violated = true;
                failed_seeds += 1;
                let _ = write!(line, "  ERROR: {e}");
            }
        }
        let _ = writeln!(text, "{line}");
    }

    let mut wide = Vec::new();
    for (j, n) in names.iter().enumerate() {
        let values = &per_coef[j];
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max_err = values.iter().map(|v| (v - truth[j]).abs()).fold(0.0, f64::max);
        let sd = sample_std(values);
        let sd_text = sd.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        let _ = writeln!(
            text,
            "across seeds: {n} mean {mean:.4}, sd {sd_text}, max |err| {max_err:.4}"
        );
        if sd.is_some_and(|s| s > tolerance) {
            wide.push(format!("{n} sd {sd_text} exceeds tolerance"));
        }
    }
    if failed_seeds > 0 {
        wide.push(format!("{failed_seeds} of {seeds} seeds produced no estimate"));
    }
    if violated && wide.is_empty() {
        wide.push("per-seed errors exceed tolerance".to_string());
    }
    if wide.is_empty() {
        let _ = writeln!(text, "variance: ok");
    } else {
        let _ = writeln!(text, "WIDE-VARIANCE: {}", wide.join("; "));
    }
    let passed = !violated;
    let _ = writeln!(text, "RESULT: {}", if passed { "PASS" } else { "FAIL" });

    write_output(&cfg.out("recover_report.txt"), &text)?;
    for line in text.lines() {
        log::info!("{line}");
    }
    cfg.write_resolved()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "recovery outside tolerance {tolerance}; see {}",
            cfg.out("recover_report.txt").display()
        )))
    }
}
