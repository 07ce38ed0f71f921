use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;

use deterrence::gam::{component_curve, fit_gam, term_significance, write_curves, FeatureTable, GamData};
use deterrence::geogrid::io as gio;
use deterrence::panel::assemble_panel;

use crate::config::{write_output, RunConfig};
use crate::failure::{CmdResult, Failure};

/// File-name-safe form of a feature name.
fn file_stem(feature: &str) -> String {
    feature
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_gam(cfg: &RunConfig) -> CmdResult {
    let features_path = cfg.input("features", "features.csv")?;
    let effort_path = cfg.input("effort_raster", "effort.csv")?;
    let obs_path = cfg.input("observation_raster", "observations.csv")?;
    let lags = cfg.pairing()?;
    let bin_length = cfg.bin_length(&[lags])?;
    let grid = cfg.grid()?;
    let binning = cfg.binning(bin_length)?;
    let with_effort: bool = cfg.get_or("gam_with_effort", true)?;
    let with_significance: bool = cfg.get_or("gam_significance", true)?;
    let n_grid: usize = cfg.get_or("curve_points", 100)?;
    if n_grid < 2 {
        return Err(Failure::Usage(format!("curve_points must be at least 2, got {n_grid}")));
    }
    let spec = cfg.gam_spec()?;
    cfg.ensure_out_dir()?;

    let features = FeatureTable::read_file(&features_path, &grid)
        .map_err(|e| Failure::Data(format!("{}: {e}", features_path.display())))?;
    let effort = gio::read_raster_file(&effort_path, &grid, &binning)?;
    let obs = gio::read_raster_file(&obs_path, &grid, &binning)?;
    let (panel, _) = assemble_panel(&effort, &obs, &lags, None)?;
    let data = GamData::from_panel(&panel, &features, with_effort)?;
    let fit = fit_gam(&data, &spec)?;
    log::info!(
        "gam: {} rows, {} terms, {} iterations, converged {}",
        fit.n_rows,
        fit.terms.len(),
        fit.iterations,
        fit.converged
    );

    let mut summary = String::new();
    let _ = writeln!(summary, "gam summary");
    let _ = writeln!(
        summary,
        "rows {}, intercept {:.4}, log-likelihood {:.4}, penalized {:.4}, iterations {}, converged {}",
        fit.n_rows, fit.intercept, fit.loglik, fit.penalized_loglik, fit.iterations, fit.converged
    );
    let mut significance = String::new();
    for name in data.names() {
        let curve = component_curve(&fit, name, n_grid)?;
        let path = cfg.out(&format!("curve_{}.csv", file_stem(name)));
        let file = File::create(&path).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
        write_curves(std::slice::from_ref(&curve), BufWriter::new(file))?;

        let term = fit.term(name)?;
        let slope = fit.linear_slope(name)?;
        let direction = if slope < 0.0 { "negative" } else { "positive" };
        let _ = writeln!(
            summary,
            "{name}: edf {:.2}, lambda {}, linear slope {slope:.4} ({direction})",
            term.edf, term.lambda
        );
        if with_significance {
            let sig = term_significance(&data, &spec, &fit, name)?;
            let _ = writeln!(significance, "{sig}");
        }
    }
    if let Ok(slope) = fit.linear_slope("past_effort") {
        let sign = if slope < 0.0 { "NEGATIVE" } else { "NON-NEGATIVE" };
        let _ = writeln!(summary, "past_effort slope sign: {sign} ({slope:.4})");
        log::info!("past_effort component slope {slope:.4} ({sign})");
    }
    write_output(&cfg.out("gam_summary.txt"), &summary)?;
    if with_significance {
        let header = "term significance (approximate: chi-square on effective degrees of freedom)\n";
        write_output(&cfg.out("significance.txt"), &(header.to_string() + &significance))?;
    }
    cfg.write_resolved()
}
