//! Synthetic parks with known ground truth.
//!
//! Bins are rolled forward in order. In each bin the patrol policy assigns
//! effort (possibly reacting to the previous bin's detections), the chosen
//! model variant's linear predictor is evaluated with covariates standardized
//! against the declared statistics, and one Bernoulli detection is drawn per
//! cell. Early bins use whatever history exists; only rows with a full past
//! window are recorded as generating rows.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::FeatureTable;
use crate::geogrid::{io as gio, BinLength, EffortRaster, GridSpec, ObservationRaster, TimeBinning};
use crate::kv::KeyValues;
use crate::model::{logistic, predict_prob, ModelParams, ModelVariant};
use crate::panel::{neighbor_sum_slice, ColumnStats, LagSpec, NeighborSpec, NormalizationStats, PanelRow};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatrolPolicy {
    /// Every cell gets exactly `effort_scale` km.
    Uniform,
    /// I.i.d. exponential effort with mean `effort_scale`.
    Random,
    /// A budget of `N·effort_scale` split by the softmax of last bin's detections.
    Reactive,
}

impl PatrolPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            PatrolPolicy::Uniform => "uniform",
            PatrolPolicy::Random => "random",
            PatrolPolicy::Reactive => "reactive",
        }
    }
}

impl fmt::Display for PatrolPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatrolPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(PatrolPolicy::Uniform),
            "random" => Ok(PatrolPolicy::Random),
            "reactive" => Ok(PatrolPolicy::Reactive),
            other => Err(Error::InvalidConfig(format!("unknown patrol policy `{other}`"))),
        }
    }
}

/// Effort for one bin. `prev_detections` holds last bin's detection counts
/// per cell (all zero for the first bin); its length fixes the cell count.
pub fn patrol_policy_effort(
    prev_detections: &[f64],
    policy: PatrolPolicy,
    effort_scale: f64,
    seed: u64,
    bin: usize,
) -> Vec<f64> {
    let n = prev_detections.len();
    match policy {
        PatrolPolicy::Uniform => vec![effort_scale; n],
        PatrolPolicy::Random => (0..n)
            .map(|cell| {
                let e: f64 = substream(seed, Purpose::Effort, cell, bin).sample(Exp1);
                effort_scale * e
            })
            .collect(),
        PatrolPolicy::Reactive => {
            let max = prev_detections.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = prev_detections.iter().map(|c| (c - max).exp()).collect();
            let total: f64 = w.iter().sum();
            let budget = n as f64 * effort_scale;
            w.iter().map(|wi| budget * wi / total).collect()
        }
    }
}

/// Optional per-covariate overrides of the declared standardization stats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredOverrides {
    pub curr_effort: Option<ColumnStats>,
    pub past_effort: Option<ColumnStats>,
    pub past_illegal: Option<ColumnStats>,
    pub past_neighbors: Option<ColumnStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_cols: usize,
    pub n_rows: usize,
    pub n_bins: usize,
    pub lags: LagSpec,
    pub epoch: DateTime<Utc>,
    pub mean_a: f64,
    pub std_a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub eta: f64,
    pub policy: PatrolPolicy,
    /// Kilometres per cell-bin.
    pub effort_scale: f64,
    pub neighbor_window: Option<usize>,
    pub variant: ModelVariant,
    pub seed: u64,
    pub declared: DeclaredOverrides,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_cols: 20,
            n_rows: 20,
            n_bins: 48,
            lags: LagSpec {
                current: BinLength::Month,
                k: 1,
            },
            epoch: Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(),
            mean_a: -5.0,
            std_a: 1.0,
            beta: 1.0,
            gamma: -0.2,
            rho: 0.0,
            eta: 0.0,
            policy: PatrolPolicy::Random,
            effort_scale: 2.0,
            neighbor_window: None,
            variant: ModelVariant::PastEffort,
            seed: 0,
            declared: DeclaredOverrides::default(),
        }
    }
}

const DECLARED_KEYS: [&str; 4] = ["curr_effort", "past_effort", "past_illegal", "past_neighbors"];

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cols == 0 || self.n_rows == 0 || self.n_bins == 0 || self.lags.k == 0 {
            return Err(Error::InvalidConfig(
                "grid dimensions, bin count and lag must be positive".into(),
            ));
        }
        if !(self.std_a >= 0.0) || !self.mean_a.is_finite() || !self.std_a.is_finite() {
            return Err(Error::InvalidConfig("std_a must be finite and nonnegative".into()));
        }
        if !(self.effort_scale >= 0.0) || !self.effort_scale.is_finite() {
            return Err(Error::InvalidConfig(
                "effort_scale must be finite and nonnegative".into(),
            ));
        }
        let coefficients = [self.beta, self.gamma, self.rho, self.eta];
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        let unused: &[(&str, f64)] = match self.variant {
            ModelVariant::PastEffort => &[("rho", self.rho), ("eta", self.eta)],
            ModelVariant::PastIllegal => &[("gamma", self.gamma), ("eta", self.eta)],
            ModelVariant::PastIllegalNeighbors => &[("gamma", self.gamma)],
        };
        if let Some((name, _)) = unused.iter().find(|(_, v)| *v != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "variant {} has no `{name}` term but {name} is nonzero",
                self.variant
            )));
        }
        match (self.variant.needs_neighbors(), self.neighbor_window) {
            (true, None) => {
                return Err(Error::InvalidConfig(format!(
                    "variant {} needs neighbor_window",
                    self.variant
                )));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "neighbor_window is only used by {}",
                    ModelVariant::PastIllegalNeighbors
                )));
            }
            (true, Some(w)) => {
                NeighborSpec::new(w)?;
            }
            (false, None) => {}
        }
        for (name, s) in DECLARED_KEYS.iter().zip(self.overrides()) {
            if let Some(s) = s {
                if !(s.std > 0.0) || !s.mean.is_finite() || !s.std.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "declared std for {name} must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    fn overrides(&self) -> [Option<ColumnStats>; 4] {
        let d = &self.declared;
        [d.curr_effort, d.past_effort, d.past_illegal, d.past_neighbors]
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::km_cells(self.n_cols, self.n_rows)
    }

    pub fn binning(&self) -> Result<TimeBinning> {
        TimeBinning::new(self.epoch, self.lags.current, self.n_bins)
    }

    pub fn neighbor_spec(&self) -> Result<Option<NeighborSpec>> {
        self.neighbor_window.map(NeighborSpec::new).transpose()
    }

    /// Standardization stats used while generating.
    ///
    /// Defaults treat per-cell effort as having mean and std `effort_scale`,
    /// past sums of `k` bins as independent, and detections as Bernoulli at
    /// the probit-matched marginal rate `logistic(mean_a / √(1 + π·std_a²/8))`.
    /// Explicit overrides win.
    pub fn declared_stats(&self) -> NormalizationStats {
        let s = self.effort_scale;
        let k = self.lags.k as f64;
        let q = logistic(self.mean_a / (1.0 + std::f64::consts::PI * self.std_a.powi(2) / 8.0).sqrt());
        let nonzero = |v: f64| if v > 0.0 { v } else { 1.0 };
        let past_illegal = ColumnStats {
            mean: k * q,
            std: nonzero((k * q * (1.0 - q)).sqrt()),
        };
        let d = &self.declared;
        NormalizationStats {
            curr_effort: d.curr_effort.unwrap_or(ColumnStats {
                mean: s,
                std: nonzero(s),
            }),
            past_effort: d.past_effort.unwrap_or(ColumnStats {
                mean: k * s,
                std: nonzero(k.sqrt() * s),
            }),
            past_illegal: d.past_illegal.unwrap_or(past_illegal),
            past_neighbors: self.neighbor_window.map(|w| {
                let m = (w * w - 1) as f64;
                d.past_neighbors.unwrap_or(ColumnStats {
                    mean: m * past_illegal.mean,
                    std: m.sqrt() * past_illegal.std,
                })
            }),
        }
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let mut declared = DeclaredOverrides::default();
        for (name, slot) in DECLARED_KEYS.iter().zip([
            &mut declared.curr_effort,
            &mut declared.past_effort,
            &mut declared.past_illegal,
            &mut declared.past_neighbors,
        ]) {
            let mean = kv.get::<f64>(&format!("declared_{name}_mean"))?;
            let std = kv.get::<f64>(&format!("declared_{name}_std"))?;
            *slot = match (mean, std) {
                (Some(mean), Some(std)) => Some(ColumnStats { mean, std }),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "declared_{name}_mean and declared_{name}_std must be given together"
                    )))
                }
            };
        }
        let epoch = match kv.raw("epoch") {
            Some(s) => gio::parse_timestamp(s).ok_or_else(|| Error::InvalidConfig(format!("bad epoch `{s}`")))?,
            None => d.epoch,
        };
        let cfg = Self {
            n_cols: kv.get_or("n_cols", d.n_cols)?,
            n_rows: kv.get_or("n_rows", d.n_rows)?,
            n_bins: kv.get_or("n_bins", d.n_bins)?,
            lags: kv.get_or("pairing", d.lags)?,
            epoch,
            mean_a: kv.get_or("mean_a", d.mean_a)?,
            std_a: kv.get_or("std_a", d.std_a)?,
            beta: kv.get_or("beta", d.beta)?,
            gamma: kv.get_or("gamma", if kv.contains("variant") { 0.0 } else { d.gamma })?,
            rho: kv.get_or("rho", d.rho)?,
            eta: kv.get_or("eta", d.eta)?,
            policy: kv.get_or("policy", d.policy)?,
            effort_scale: kv.get_or("effort_scale", d.effort_scale)?,
            neighbor_window: kv.get("neighbor_window")?,
            variant: kv.get_or("variant", d.variant)?,
            seed: kv.get_or("seed", d.seed)?,
            declared,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field as `key = value`, readable by [`SimConfig::from_kv`].
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("n_cols", self.n_cols);
        kv.set("n_rows", self.n_rows);
        kv.set("n_bins", self.n_bins);
        kv.set("pairing", self.lags);
        kv.set("epoch", self.epoch.to_rfc3339());
        kv.set("mean_a", self.mean_a);
        kv.set("std_a", self.std_a);
        kv.set("beta", self.beta);
        kv.set("gamma", self.gamma);
        kv.set("rho", self.rho);
        kv.set("eta", self.eta);
        kv.set("policy", self.policy);
        kv.set("effort_scale", self.effort_scale);
        if let Some(w) = self.neighbor_window {
            kv.set("neighbor_window", w);
        }
        kv.set("variant", self.variant);
        kv.set("seed", self.seed);
        for (name, s) in DECLARED_KEYS.iter().zip(self.overrides()) {
            if let Some(s) = s {
                kv.set(&format!("declared_{name}_mean"), s.mean);
                kv.set(&format!("declared_{name}_std"), s.std);
            }
        }
        kv
    }

    pub fn true_params(&self, attractiveness: Vec<f64>) -> ModelParams {
        ModelParams {
            variant: self.variant,
            a: attractiveness,
            beta: self.beta,
            gamma: self.gamma,
            rho: self.rho,
            eta: self.eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub config: SimConfig,
    pub effort: EffortRaster,
    pub observations: ObservationRaster,
    pub attractiveness: Vec<f64>,
    pub declared: NormalizationStats,
    /// Standardized generating covariates and outcome for every bin `t >= k`,
    /// in panel row order.
    pub rows: Vec<PanelRow>,
}

/// Ground-truth sidecar written next to simulated rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub config: SimConfig,
    pub attractiveness: Vec<f64>,
    pub declared: NormalizationStats,
    pub n_rows: usize,
    pub detection_rate: f64,
}

impl SimOutput {
    pub fn truth(&self) -> SimTruth {
        SimTruth {
            config: self.config.clone(),
            attractiveness: self.attractiveness.clone(),
            declared: self.declared,
            n_rows: self.rows.len(),
            detection_rate: self.detection_rate(),
        }
    }

    /// Share of recorded rows with a detection.
    pub fn detection_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.y == 1).count() as f64 / self.rows.len() as f64
    }

    /// Writes `effort.csv`, `observations.csv` and `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        gio::write_raster_file(&self.effort, &dir.join("effort.csv"))?;
        gio::write_raster_file(&self.observations, &dir.join("observations.csv"))?;
        let truth = dir.join("truth.json");
        let json = serde_json::to_string_pretty(&self.truth())?;
        std::fs::write(&truth, json + "\n").map_err(|e| Error::io(&truth, e))
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let grid = config.grid()?;
    let binning = config.binning()?;
    let n = grid.n_cells();
    let k = config.lags.k;
    let seed = config.seed;
    let declared = config.declared_stats();

    let attractiveness: Vec<f64> = (0..n)
        .map(|cell| {
            let z: f64 = substream(seed, Purpose::Attractiveness, cell, 0).sample(StandardNormal);
            config.mean_a + config.std_a * z
        })
        .collect();
    let params = config.true_params(attractiveness.clone());

    let mut effort = EffortRaster::zeros(grid, binning);
    let mut obs = ObservationRaster::zeros(grid, binning);
    let mut neighbor_bins: Vec<Vec<f64>> = Vec::with_capacity(config.n_bins);
    let mut rows = Vec::with_capacity(n * config.n_bins.saturating_sub(k));
    let mut prev = vec![0.0; n];

    for t in 0..config.n_bins {
        let current = patrol_policy_effort(&prev, config.policy, config.effort_scale, seed, t);
        let lo = t.saturating_sub(k);
        for (cell, &e) in current.iter().enumerate() {
            effort.set(cell, t, e);
            let raw_past_effort: f64 = (lo..t).map(|b| effort.get(cell, b)).sum();
            let raw_past_illegal: f64 = (lo..t).map(|b| obs.get(cell, b) as f64).sum();
            let raw_past_neighbors: f64 = (lo..t).map(|b| neighbor_bins[b][cell]).sum();
            let row = PanelRow {
                cell,
                bin: t,
                y: 0,
                curr_effort: declared.curr_effort.standardize(e),
                past_effort: declared.past_effort.standardize(raw_past_effort),
                past_illegal: declared.past_illegal.standardize(raw_past_illegal),
                past_neighbors: declared
                    .past_neighbors
                    .map_or(0.0, |s| s.standardize(raw_past_neighbors)),
            };
            let u: f64 = substream(seed, Purpose::Detection, cell, t).random();
            let y = u8::from(u < predict_prob(&params, &row));
            obs.set(cell, t, y as u32);
            if t >= k {
                rows.push(PanelRow { y, ..row });
            }
        }
        let this_bin = obs.bin_slice(t);
        prev = this_bin.iter().map(|&c| c as f64).collect();
        neighbor_bins.push(match config.neighbor_window {
            Some(w) => neighbor_sum_slice(&grid, this_bin, w),
            None => vec![0.0; n],
        });
    }

    Ok(SimOutput {
        config: config.clone(),
        effort,
        observations: obs,
        attractiveness,
        declared,
        rows,
    })
}

/// Static per-cell features tied to the simulated attractiveness:
/// `dist_boundary` falls as attractiveness rises, `npp` rises with it, and
/// `slope` is pure noise.
pub fn synthetic_features(output: &SimOutput) -> Result<FeatureTable> {
    let a = &output.attractiveness;
    let scale = if output.config.std_a > 0.0 {
        output.config.std_a
    } else {
        1.0
    };
    let mut dist = Vec::with_capacity(a.len());
    let mut npp = Vec::with_capacity(a.len());
    let mut slope = Vec::with_capacity(a.len());
    for (cell, &ai) in a.iter().enumerate() {
        let mut rng = substream(output.config.seed, Purpose::Feature, cell, 0);
        let z = (ai - output.config.mean_a) / scale;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        dist.push(3.0 * (-0.5 * z + 0.2 * e1).exp());
        npp.push(z + e2);
        slope.push(rng.random_range(0.0..30.0));
    }
    FeatureTable::new(
        a.len(),
        vec!["dist_boundary".into(), "npp".into(), "slope".into()],
        vec![dist, npp, slope],
    )
}
