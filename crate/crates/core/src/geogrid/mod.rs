//! Spatial and temporal discretization of patrol data.
//!
//! Coordinates are planar metres. Geographic lat/lon must be projected before
//! ingestion. Cells and time bins both use half-open intervals, so every point
//! in the grid's extent belongs to exactly one cell and every timestamp in
//! the binned range to exactly one bin.

mod clip;
pub mod io;
mod rasterize;
mod segment;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clip::clip_segment_to_cells;
pub use rasterize::{bin_observations, rasterize_effort};
pub use segment::{segment_tracks, GapRules};

/// A point in planar projected coordinates, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Column/row address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Square-cell layout of the study area.
///
/// Cell `(c, r)` covers `[origin_x + c·s, origin_x + (c+1)·s) × [origin_y + r·s, origin_y + (r+1)·s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

impl GridSpec {
    pub const DEFAULT_CELL_SIZE: f64 = 1000.0;

    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, n_cols: usize, n_rows: usize) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid needs at least one column and row, got {n_cols}x{n_rows}"
            )));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size,
            n_cols,
            n_rows,
        })
    }

    /// Grid of `n_cols × n_rows` 1 km cells with its origin at (0, 0).
    pub fn km_cells(n_cols: usize, n_rows: usize) -> Result<Self> {
        Self::new(0.0, 0.0, Self::DEFAULT_CELL_SIZE, n_cols, n_rows)
    }

    /// Total number of targets N.
    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn width(&self) -> f64 {
        self.cell_size * self.n_cols as f64
    }

    pub fn height(&self) -> f64 {
        self.cell_size * self.n_rows as f64
    }

    /// Cell containing `(x, y)` under the half-open convention, if any.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<CellIndex> {
        self.local_cell_of(x - self.origin_x, y - self.origin_y)
    }

    /// Same as [`GridSpec::cell_of`] for coordinates already relative to the origin.
    pub(crate) fn local_cell_of(&self, lx: f64, ly: f64) -> Option<CellIndex> {
        let c = (lx / self.cell_size).floor();
        let r = (ly / self.cell_size).floor();
        if !(c >= 0.0 && r >= 0.0) || c >= self.n_cols as f64 || r >= self.n_rows as f64 {
            return None;
        }
        Some(CellIndex::new(c as usize, r as usize))
    }

    /// Row-major linear index used by rasters and the panel.
    pub fn linear(&self, cell: CellIndex) -> usize {
        cell.row * self.n_cols + cell.col
    }

    pub fn cell_at(&self, linear: usize) -> CellIndex {
        CellIndex::new(linear % self.n_cols, linear / self.n_cols)
    }

    pub fn center(&self, cell: CellIndex) -> Point {
        Point::new(
            self.origin_x + (cell.col as f64 + 0.5) * self.cell_size,
            self.origin_y + (cell.row as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Temporal resolution of a bin. Widths are fixed day counts, not calendar-aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinLength {
    Month,
    Quarter,
    Year,
}

impl BinLength {
    pub fn days(self) -> i64 {
        match self {
            BinLength::Month => 30,
            BinLength::Quarter => 91,
            BinLength::Year => 365,
        }
    }

    pub fn duration(self) -> TimeDelta {
        TimeDelta::days(self.days())
    }

    /// Short label used in pairing names (`1mo`, `3mo`, `year`).
    pub fn label(self) -> &'static str {
        match self {
            BinLength::Month => "1mo",
            BinLength::Quarter => "3mo",
            BinLength::Year => "year",
        }
    }

    /// Number of bins of this length that make up one bin of `outer`.
    pub fn bins_per(self, outer: BinLength) -> Option<usize> {
        use BinLength::*;
        match (self, outer) {
            (a, b) if a == b => Some(1),
            (Month, Quarter) => Some(3),
            (Month, Year) => Some(12),
            (Quarter, Year) => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for BinLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BinLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1mo" | "month" | "monthly" | "30" => Ok(BinLength::Month),
            "3mo" | "quarter" | "quarterly" | "91" => Ok(BinLength::Quarter),
            "year" | "yearly" | "1y" | "12mo" | "365" => Ok(BinLength::Year),
            other => Err(Error::InvalidBinning(format!("unknown bin length `{other}`"))),
        }
    }
}

/// Contiguous half-open time bins `[epoch + i·len, epoch + (i+1)·len)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinning {
    pub epoch: DateTime<Utc>,
    pub bin_length: BinLength,
    pub n_bins: usize,
}

impl TimeBinning {
    pub fn new(epoch: DateTime<Utc>, bin_length: BinLength, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidBinning("n_bins must be positive".into()));
        }
        Ok(Self {
            epoch,
            bin_length,
            n_bins,
        })
    }

    pub fn bin_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        if ts < self.epoch {
            return None;
        }
        let elapsed = (ts - self.epoch).num_seconds();
        let bin = elapsed / (self.bin_length.days() * 86_400);
        usize::try_from(bin).ok().filter(|&b| b < self.n_bins)
    }

    pub fn bin_start(&self, bin: usize) -> DateTime<Utc> {
        self.epoch + TimeDelta::days(self.bin_length.days() * bin as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.bin_start(self.n_bins)
    }
}

/// One raw GPS fix.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub patrol_id: String,
    pub timestamp: DateTime<Utc>,
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A connected run of waypoints from a single patrol, at least two points long.
#[derive(Debug, Clone, PartialEq)]
pub struct PatrolTrack {
    pub patrol_id: String,
    pub waypoints: Vec<Waypoint>,
}

impl PatrolTrack {
    /// Total path length in metres, ignoring the grid.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].point().distance(&w[1].point()))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationCategory {
    Snare,
    Cartridge,
    TraditionalWeapon,
    PoacherEncounter,
    Other,
}

impl ObservationCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationCategory::Snare => "snare",
            ObservationCategory::Cartridge => "cartridge",
            ObservationCategory::TraditionalWeapon => "traditional_weapon",
            ObservationCategory::PoacherEncounter => "poacher_encounter",
            ObservationCategory::Other => "other",
        }
    }
}

impl FromStr for ObservationCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snare" => Ok(ObservationCategory::Snare),
            "cartridge" => Ok(ObservationCategory::Cartridge),
            "traditional_weapon" => Ok(ObservationCategory::TraditionalWeapon),
            "poacher_encounter" => Ok(ObservationCategory::PoacherEncounter),
            "other" => Ok(ObservationCategory::Other),
            other => Err(Error::Parse(format!("unknown observation category `{other}`"))),
        }
    }
}

/// One ranger observation of illegal activity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub timestamp: DateTime<Utc>,
    pub x: f64,
    pub y: f64,
    pub category: ObservationCategory,
}

/// Values over the cell × bin index space, stored bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub grid: GridSpec,
    pub binning: TimeBinning,
    values: Vec<T>,
}

/// Kilometres patrolled per (cell, bin).
pub type EffortRaster = Raster<f64>;
/// Illegal-activity counts per (cell, bin).
pub type ObservationRaster = Raster<u32>;

impl<T: Copy + Default> Raster<T> {
    pub fn zeros(grid: GridSpec, binning: TimeBinning) -> Self {
        Self {
            values: vec![T::default(); grid.n_cells() * binning.n_bins],
            grid,
            binning,
        }
    }
}

impl<T> Raster<T> {
    /// Builds a raster from bin-major values (`values[bin * N + cell]`).
    pub fn from_values(grid: GridSpec, binning: TimeBinning, values: Vec<T>) -> Result<Self> {
        let expected = grid.n_cells() * binning.n_bins;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { grid, binning, values })
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn n_bins(&self) -> usize {
        self.binning.n_bins
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Values of one time bin, indexed by linear cell.
    pub fn bin_slice(&self, bin: usize) -> &[T] {
        let n = self.n_cells();
        &self.values[bin * n..(bin + 1) * n]
    }

    pub fn get_mut(&mut self, cell: usize, bin: usize) -> &mut T {
        let n = self.n_cells();
        &mut self.values[bin * n + cell]
    }

    pub fn set(&mut self, cell: usize, bin: usize, value: T) {
        *self.get_mut(cell, bin) = value;
    }

    pub fn same_layout<U>(&self, other: &Raster<U>) -> bool {
        self.grid == other.grid && self.binning == other.binning
    }
}

impl<T: Copy> Raster<T> {
    pub fn get(&self, cell: usize, bin: usize) -> T {
        self.values[bin * self.n_cells() + cell]
    }
}

impl<T: Copy + Into<f64>> Raster<T> {
    pub fn total(&self) -> f64 {
        self.values.iter().map(|&v| v.into()).sum()
    }
}

/// Record counts kept and dropped during ingestion, per record kind and reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    kept: BTreeMap<String, usize>,
    dropped: BTreeMap<String, BTreeMap<String, usize>>,
}

impl IngestReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn keep(&mut self, kind: &str) {
        self.keep_n(kind, 1);
    }

    pub fn keep_n(&mut self, kind: &str, n: usize) {
        *self.kept.entry(kind.to_string()).or_default() += n;
    }

    pub fn drop_record(&mut self, kind: &str, reason: &str) {
        *self
            .dropped
            .entry(kind.to_string())
            .or_default()
            .entry(reason.to_string())
            .or_default() += 1;
    }

    pub fn kept(&self, kind: &str) -> usize {
        self.kept.get(kind).copied().unwrap_or(0)
    }

    pub fn dropped(&self, kind: &str) -> usize {
        self.dropped.get(kind).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn dropped_for(&self, kind: &str, reason: &str) -> usize {
        self.dropped.get(kind).and_then(|m| m.get(reason)).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &IngestReport) {
        for (k, n) in &other.kept {
            *self.kept.entry(k.clone()).or_default() += n;
        }
        for (k, reasons) in &other.dropped {
            let entry = self.dropped.entry(k.clone()).or_default();
            for (r, n) in reasons {
                *entry.entry(r.clone()).or_default() += n;
            }
        }
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ingest report")?;
        let kinds: std::collections::BTreeSet<&String> = self.kept.keys().chain(self.dropped.keys()).collect();
        for kind in kinds {
            writeln!(f, "{kind}: kept {}, dropped {}", self.kept(kind), self.dropped(kind))?;
            if let Some(reasons) = self.dropped.get(kind) {
                for (reason, n) in reasons {
                    writeln!(f, "  dropped ({reason}): {n}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn epoch() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn grid_rejects_bad_dimensions() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 3, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, -1.0, 3, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, 1000.0, 0, 3).is_err());
        assert!(GridSpec::new(0.0, 0.0, 1000.0, 3, 0).is_err());
    }

    #[test]
    fn cell_lookup_is_half_open() {
        let g = GridSpec::new(100.0, 200.0, 1000.0, 3, 2).unwrap();
        assert_eq!(g.n_cells(), 6);
        assert_eq!(g.cell_of(100.0, 200.0), Some(CellIndex::new(0, 0)));
        assert_eq!(g.cell_of(1100.0, 200.0), Some(CellIndex::new(1, 0)));
        assert_eq!(g.cell_of(1099.999, 1200.0), Some(CellIndex::new(0, 1)));
        assert_eq!(g.cell_of(3100.0, 200.0), None);
        assert_eq!(g.cell_of(100.0, 2200.0), None);
        assert_eq!(g.cell_of(99.999, 200.0), None);
        assert_eq!(g.cell_of(f64::NAN, 200.0), None);
    }

    #[test]
    fn linear_index_round_trips() {
        let g = GridSpec::km_cells(4, 3).unwrap();
        for i in 0..g.n_cells() {
            assert_eq!(g.linear(g.cell_at(i)), i);
        }
        assert_eq!(g.linear(CellIndex::new(1, 2)), 9);
    }

    #[test]
    fn time_bins_are_half_open() {
        let b = TimeBinning::new(epoch(), BinLength::Month, 3).unwrap();
        assert_eq!(b.bin_of(epoch()), Some(0));
        assert_eq!(b.bin_of(epoch() + TimeDelta::days(30) - TimeDelta::seconds(1)), Some(0));
        assert_eq!(b.bin_of(epoch() + TimeDelta::days(30)), Some(1));
        assert_eq!(b.bin_of(epoch() + TimeDelta::days(90)), None);
        assert_eq!(b.bin_of(epoch() - TimeDelta::milliseconds(500)), None);
        assert_eq!(b.end(), epoch() + TimeDelta::days(90));
    }

    #[test]
    fn bin_length_parsing_and_ratios() {
        assert_eq!("3mo".parse::<BinLength>().unwrap(), BinLength::Quarter);
        assert_eq!("year".parse::<BinLength>().unwrap(), BinLength::Year);
        assert!("fortnight".parse::<BinLength>().is_err());
        assert_eq!(BinLength::Quarter.bins_per(BinLength::Year), Some(4));
        assert_eq!(BinLength::Month.bins_per(BinLength::Year), Some(12));
        assert_eq!(BinLength::Year.bins_per(BinLength::Month), None);
    }

    #[test]
    fn category_set_is_closed() {
        for c in ["snare", "cartridge", "traditional_weapon", "poacher_encounter", "other"] {
            assert_eq!(c.parse::<ObservationCategory>().unwrap().as_str(), c);
        }
        assert!("elephant".parse::<ObservationCategory>().is_err());
    }

    #[test]
    fn report_counts_and_merges() {
        let mut a = IngestReport::new();
        a.keep_n("waypoints", 9);
        a.drop_record("waypoints", "malformed timestamp");
        let mut b = IngestReport::new();
        b.drop_record("waypoints", "malformed timestamp");
        b.drop_record("observations", "outside grid");
        a.merge(&b);
        assert_eq!(a.kept("waypoints"), 9);
        assert_eq!(a.dropped("waypoints"), 2);
        assert_eq!(a.dropped_for("observations", "outside grid"), 1);
        let text = a.to_string();
        assert!(text.contains("waypoints: kept 9, dropped 2"));
        assert!(text.contains("dropped (malformed timestamp): 2"));
    }
}
