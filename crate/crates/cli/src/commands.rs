use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use deterrence::geogrid::io as gio;
use deterrence::geogrid::{
    bin_observations, rasterize_effort, segment_tracks, BinLength, EffortRaster, IngestReport, ObservationRaster,
};
use deterrence::model::{fit, FitResult, ModelVariant};
use deterrence::panel::{assemble_panel, write_panel, LagSpec, NeighborSpec, NormalizationStats};
use deterrence::report::{summarize, ReportTable};
use deterrence::simulator::{simulate, synthetic_features, SimConfig};
use deterrence::Error;

use crate::config::{write_output, RunConfig};
use crate::failure::{CmdResult, Failure};

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRun {
    pub variant: ModelVariant,
    pub fits: Vec<FitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    /// Table row label: the pairing, or the window for neighbour models.
    pub label: String,
    pub pairing: String,
    pub neighbors: Option<NeighborSpec>,
    pub normalization: NormalizationStats,
    pub result: FitResult,
}

impl FitRun {
    pub fn table(&self) -> CmdResult<ReportTable> {
        let mut table = ReportTable::new(self.variant);
        for entry in &self.fits {
            table.push(summarize(&entry.result, &entry.label))?;
        }
        Ok(table)
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> CmdResult {
    let sim = SimConfig::from_kv(cfg.kv())?;
    cfg.note_all(&sim.to_kv());
    cfg.ensure_out_dir()?;
    let out = simulate(&sim)?;
    out.write(&cfg.out_dir)?;
    let features = synthetic_features(&out)?;
    let path = cfg.out("features.csv");
    let file = File::create(&path).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    features.write_csv(BufWriter::new(file), &out.effort.grid)?;
    log::info!(
        "simulated {} cells x {} bins, detection rate {:.4}, into {}",
        out.effort.n_cells(),
        out.effort.n_bins(),
        out.detection_rate(),
        cfg.out_dir.display()
    );
    cfg.write_resolved()
}

pub fn cmd_ingest(cfg: &RunConfig) -> CmdResult {
    let waypoints_path = cfg.required_input("waypoints")?;
    let observations_path = cfg.optional_input("observations")?;
    let grid = cfg.grid()?;
    let bin_length = match cfg.get::<BinLength>("bin_length")? {
        Some(b) => b,
        None => cfg.pairing()?.current,
    };
    let binning = cfg.binning(bin_length)?;
    let rules = cfg.gap_rules()?;
    cfg.ensure_out_dir()?;

    let mut report = IngestReport::new();
    let waypoints = gio::read_waypoints(&waypoints_path, &mut report)?;
    let valid = waypoints.len();
    let tracks = segment_tracks(waypoints, &rules, &mut report);
    let effort = rasterize_effort(&tracks, &grid, &binning, &mut report);
    let observations = match &observations_path {
        Some(path) => gio::read_observations(path, &mut report)?,
        None => Vec::new(),
    };
    let obs = bin_observations(&observations, &grid, &binning, &mut report);

    gio::write_raster_file(&effort, &cfg.out("effort.csv"))?;
    gio::write_raster_file(&obs, &cfg.out("observations.csv"))?;
    let summary = format!(
        "{report}total effort km: {:.6}\ntotal observations: {}\n",
        effort.total(),
        obs.total()
    );
    write_output(&cfg.out("ingest_report.txt"), &summary)?;
    for line in summary.lines() {
        log::info!("{line}");
    }
    cfg.write_resolved()?;
    if valid == 0 {
        return Err(Failure::Data(format!(
            "no valid waypoints in {}",
            waypoints_path.display()
        )));
    }
    Ok(())
}

fn read_rasters(cfg: &RunConfig, bin_length: BinLength) -> CmdResult<(EffortRaster, ObservationRaster)> {
    let effort_path = cfg.input("effort_raster", "effort.csv")?;
    let obs_path = cfg.input("observation_raster", "observations.csv")?;
    let grid = cfg.grid()?;
    let binning = cfg.binning(bin_length)?;
    Ok((
        gio::read_raster_file(&effort_path, &grid, &binning)?,
        gio::read_raster_file(&obs_path, &grid, &binning)?,
    ))
}

pub fn cmd_panel(cfg: &RunConfig) -> CmdResult {
    let lags = cfg.pairing()?;
    let bin_length = cfg.bin_length(&[lags])?;
    let variant = cfg.variant()?;
    let windows = cfg.neighbor_specs(variant)?;
    if windows.len() > 1 {
        return Err(Failure::Usage("panel takes a single neighbor_window".into()));
    }
    let (effort, obs) = read_rasters(cfg, bin_length)?;
    cfg.ensure_out_dir()?;
    let (panel, stats) = assemble_panel(&effort, &obs, &lags, windows.first())?;
    let path = cfg.out("panel.csv");
    let file = File::create(&path).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    write_panel(&panel, &effort.grid, BufWriter::new(file))?;
    write_output(
        &cfg.out("normalization.json"),
        &(serde_json::to_string_pretty(&stats)? + "\n"),
    )?;
    log::info!(
        "panel of {} rows, detection rate {:.4}",
        panel.len(),
        panel.detection_rate()
    );
    cfg.write_resolved()
}

fn row_label(variant: ModelVariant, lags: &LagSpec, spec: Option<&NeighborSpec>, many_pairings: bool) -> String {
    match spec {
        Some(spec) if variant.needs_neighbors() && many_pairings => format!("{lags} {}", spec.label()),
        Some(spec) => spec.label(),
        None => lags.label(),
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> CmdResult {
    let pairings = cfg.pairings()?;
    let bin_length = cfg.bin_length(&pairings)?;
    let variant = cfg.variant()?;
    let windows = cfg.neighbor_specs(variant)?;
    let fit_config = cfg.fit_config()?;
    let (effort, obs) = read_rasters(cfg, bin_length)?;
    cfg.ensure_out_dir()?;

    let specs: Vec<Option<NeighborSpec>> = if windows.is_empty() {
        vec![None]
    } else {
        windows.into_iter().map(Some).collect()
    };
    let mut fits = Vec::new();
    for lags in &pairings {
        for spec in &specs {
            let label = row_label(variant, lags, spec.as_ref(), pairings.len() > 1);
            let (panel, normalization) = assemble_panel(&effort, &obs, lags, spec.as_ref())?;
            let result = fit(&panel, variant, &fit_config)?;
            log::info!(
                "{label}: {} rows, {} iterations, converged {}, nll {:.6}",
                result.n_rows,
                result.iterations,
                result.converged,
                result.final_nll
            );
            if !result.converged {
                log::warn!("{label}: optimizer stopped at max_iterations without converging");
            }
            fits.push(FitEntry {
                label,
                pairing: lags.label(),
                neighbors: *spec,
                normalization,
                result,
            });
        }
    }
    let run = FitRun { variant, fits };
    write_output(&cfg.out("fit.json"), &(serde_json::to_string_pretty(&run)? + "\n"))?;
    write_tables(cfg, &run.table()?, "table")?;
    cfg.write_resolved()
}

fn write_tables(cfg: &RunConfig, table: &ReportTable, stem: &str) -> CmdResult {
    write_output(&cfg.out(&format!("{stem}.txt")), &table.to_text())?;
    write_output(&cfg.out(&format!("{stem}.csv")), &table.to_csv())?;
    log::info!("wrote {stem}.txt and {stem}.csv to {}", cfg.out_dir.display());
    Ok(())
}

pub fn read_fit_run(path: &Path) -> CmdResult<FitRun> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Merges one or more `fit.json` files of the same variant into one table.
pub fn cmd_report(cfg: &RunConfig) -> CmdResult {
    let names: Vec<String> = cfg.list("fit_json", "")?;
    let paths: Vec<std::path::PathBuf> = if names.is_empty() {
        vec![cfg.input("fit_json", "fit.json")?]
    } else {
        names
            .iter()
            .map(|n| {
                let p = std::path::PathBuf::from(n);
                if p.is_file() {
                    Ok(p)
                } else {
                    Err(Failure::Usage(format!("fit_json file {} does not exist", p.display())))
                }
            })
            .collect::<CmdResult<_>>()?
    };
    cfg.ensure_out_dir()?;
    let mut merged: Option<FitRun> = None;
    for path in &paths {
        let run = read_fit_run(path)?;
        match &mut merged {
            None => merged = Some(run),
            Some(m) if m.variant == run.variant => m.fits.extend(run.fits),
            Some(m) => {
                return Err(Failure::Usage(format!(
                    "{} holds {} fits but earlier files hold {}",
                    path.display(),
                    run.variant,
                    m.variant
                )))
            }
        }
    }
    let run = merged.ok_or_else(|| Failure::Usage("no fit_json files given".into()))?;
    write_tables(cfg, &run.table()?, "report")?;
    cfg.write_resolved()
}
