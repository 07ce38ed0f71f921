//! Regression rows from rasters: binary detection targets, lagged covariates,
//! neighbour-window sums and z-score standardization.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geogrid::{BinLength, EffortRaster, GridSpec, ObservationRaster, Raster};

/// Current-bin length and the number `k` of current bins in the past window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub current: BinLength,
    pub k: usize,
}

impl LagSpec {
    pub fn new(current: BinLength, past: BinLength) -> Result<Self> {
        let k = current.bins_per(past).ok_or_else(|| {
            Error::InvalidConfig(format!("past window {past} is not a whole number of {current} bins"))
        })?;
        Ok(Self { current, k })
    }

    pub fn with_k(current: BinLength, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("lag multiple k must be positive".into()));
        }
        Ok(Self { current, k })
    }

    /// Pairing label `past/current`, e.g. `year/3mo`.
    pub fn label(&self) -> String {
        let past = [BinLength::Month, BinLength::Quarter, BinLength::Year]
            .into_iter()
            .find(|&p| self.current.bins_per(p) == Some(self.k));
        match past {
            Some(p) => format!("{}/{}", p.label(), self.current.label()),
            None => format!("{}x{}/{}", self.k, self.current.label(), self.current.label()),
        }
    }
}

impl FromStr for LagSpec {
    type Err = Error;

    /// Parses pairings such as `1mo/1mo`, `year/3mo` or `year/year`.
    fn from_str(s: &str) -> Result<Self> {
        let (past, current) = s
            .split_once('/')
            .ok_or_else(|| Error::InvalidConfig(format!("pairing `{s}` must look like past/current")))?;
        LagSpec::new(current.parse()?, past.parse()?)
    }
}

impl fmt::Display for LagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// What the neighbour covariate sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSource {
    #[default]
    IllegalActivity,
    PatrolEffort,
}

impl FromStr for NeighborSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "illegal_activity" | "illegal" => Ok(Self::IllegalActivity),
            "patrol_effort" | "effort" => Ok(Self::PatrolEffort),
            other => Err(Error::InvalidConfig(format!("unknown neighbour source `{other}`"))),
        }
    }
}

impl NeighborSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::IllegalActivity => "illegal_activity",
            Self::PatrolEffort => "patrol_effort",
        }
    }
}

/// Square window of `window × window` cells centred on the target, target excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSpec {
    pub window: usize,
    #[serde(default)]
    pub source: NeighborSource,
}

impl NeighborSpec {
    pub fn new(window: usize) -> Result<Self> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "neighbour window must be odd and >= 3, got {window}"
            )));
        }
        Ok(Self {
            window,
            source: NeighborSource::IllegalActivity,
        })
    }

    pub fn label(&self) -> String {
        format!("{0}x{0}", self.window)
    }
}

/// Sum over the window centred on each cell, same bin, excluding the cell
/// itself. Cells beyond the grid edge contribute nothing.
pub fn neighbor_sum<T: Copy + Into<f64>>(raster: &Raster<T>, spec: &NeighborSpec) -> Raster<f64> {
    let mut out = Raster::<f64>::zeros(raster.grid, raster.binning);
    for bin in 0..raster.n_bins() {
        let sums = neighbor_sum_slice(&raster.grid, raster.bin_slice(bin), spec.window);
        for (cell, v) in sums.into_iter().enumerate() {
            out.set(cell, bin, v);
        }
    }
    out
}

/// [`neighbor_sum`] for a single bin laid out row-major.
pub fn neighbor_sum_slice<T: Copy + Into<f64>>(grid: &GridSpec, src: &[T], window: usize) -> Vec<f64> {
    let half = (window / 2) as isize;
    let (cols, rows) = (grid.n_cols as isize, grid.n_rows as isize);
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for nr in (r - half).max(0)..=(r + half).min(rows - 1) {
                for nc in (c - half).max(0)..=(c + half).min(cols - 1) {
                    if nr != r || nc != c {
                        acc += src[(nr * cols + nc) as usize].into();
                    }
                }
            }
            out[(r * cols + c) as usize] = acc;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub cell: usize,
    pub bin: usize,
    pub y: u8,
    pub curr_effort: f64,
    pub past_effort: f64,
    pub past_illegal: f64,
    pub past_neighbors: f64,
}

/// Standardized regression rows over `n_cells` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub n_cells: usize,
    pub has_neighbors: bool,
    pub rows: Vec<PanelRow>,
}

impl Panel {
    pub fn new(n_cells: usize, has_neighbors: bool, rows: Vec<PanelRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.cell >= n_cells) {
            return Err(Error::InvalidConfig(format!(
                "row cell {} outside {} cells",
                r.cell, n_cells
            )));
        }
        Ok(Self {
            n_cells,
            has_neighbors,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn detection_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.y as f64).sum::<f64>() / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    /// Two-pass mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    pub fn standardize(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.std
    }

    pub fn raw(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    fn is_degenerate(&self) -> bool {
        !(self.std > 1e-12 * self.mean.abs().max(1.0))
    }
}

/// Raw-unit mean and standard deviation of every standardized covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub curr_effort: ColumnStats,
    pub past_effort: ColumnStats,
    pub past_illegal: ColumnStats,
    pub past_neighbors: Option<ColumnStats>,
}

impl NormalizationStats {
    /// Recovers the raw covariates of a standardized row.
    pub fn destandardize(&self, row: &PanelRow) -> PanelRow {
        PanelRow {
            curr_effort: self.curr_effort.raw(row.curr_effort),
            past_effort: self.past_effort.raw(row.past_effort),
            past_illegal: self.past_illegal.raw(row.past_illegal),
            past_neighbors: self
                .past_neighbors
                .map_or(row.past_neighbors, |s| s.raw(row.past_neighbors)),
            ..*row
        }
    }
}

/// Builds one row per cell and per bin `t >= k`, then z-scores every covariate
/// over all emitted rows.
///
/// `y` is 1 iff at least one observation fell in (cell, t). Past covariates
/// sum the `k` bins preceding `t`; rows without a full past window are not
/// emitted.
pub fn assemble_panel(
    effort: &EffortRaster,
    obs: &ObservationRaster,
    lags: &LagSpec,
    neighbors: Option<&NeighborSpec>,
) -> Result<(Panel, NormalizationStats)> {
    if !effort.same_layout(obs) {
        return Err(Error::RasterMismatch);
    }
    if effort.binning.bin_length != lags.current {
        return Err(Error::InvalidConfig(format!(
            "rasters are binned by {} but the pairing {} expects {} bins",
            effort.binning.bin_length, lags, lags.current
        )));
    }
    let (n_cells, n_bins, k) = (effort.n_cells(), effort.n_bins(), lags.k);
    if n_bins <= k {
        return Err(Error::InsufficientHistory {
            needed: k + 1,
            available: n_bins,
        });
    }

    let neighbor_raster = neighbors.map(|spec| match spec.source {
        NeighborSource::IllegalActivity => neighbor_sum(obs, spec),
        NeighborSource::PatrolEffort => neighbor_sum(effort, spec),
    });

    let mut rows = Vec::with_capacity(n_cells * (n_bins - k));
    for t in k..n_bins {
        for cell in 0..n_cells {
            let past = |f: &dyn Fn(usize) -> f64| (1..=k).map(|j| f(t - j)).sum::<f64>();
            rows.push(PanelRow {
                cell,
                bin: t,
                y: u8::from(obs.get(cell, t) >= 1),
                curr_effort: effort.get(cell, t),
                past_effort: past(&|b| effort.get(cell, b)),
                past_illegal: past(&|b| obs.get(cell, b) as f64),
                past_neighbors: neighbor_raster.as_ref().map_or(0.0, |n| past(&|b| n.get(cell, b))),
            });
        }
    }

    let column = |name: &str, get: fn(&PanelRow) -> f64| -> Result<ColumnStats> {
        let values: Vec<f64> = rows.iter().map(get).collect();
        let stats = ColumnStats::of(&values);
        if stats.is_degenerate() {
            return Err(Error::DegenerateCovariate(name.to_string()));
        }
        Ok(stats)
    };
    let stats = NormalizationStats {
        curr_effort: column("curr_effort", |r| r.curr_effort)?,
        past_effort: column("past_effort", |r| r.past_effort)?,
        past_illegal: column("past_illegal", |r| r.past_illegal)?,
        past_neighbors: match neighbors {
            Some(_) => Some(column("past_neighbors", |r| r.past_neighbors)?),
            None => None,
        },
    };

    for r in &mut rows {
        r.curr_effort = stats.curr_effort.standardize(r.curr_effort);
        r.past_effort = stats.past_effort.standardize(r.past_effort);
        r.past_illegal = stats.past_illegal.standardize(r.past_illegal);
        if let Some(s) = stats.past_neighbors {
            r.past_neighbors = s.standardize(r.past_neighbors);
        }
    }

    Ok((
        Panel {
            n_cells,
            has_neighbors: neighbors.is_some(),
            rows,
        },
        stats,
    ))
}

pub const PANEL_HEADER: [&str; 8] = [
    "cell_col",
    "cell_row",
    "bin_index",
    "y",
    "curr_effort",
    "past_effort",
    "past_illegal",
    "past_neighbors",
];

/// Writes the standardized panel. `past_neighbors` is left empty when the
/// panel has no neighbour covariate.
pub fn write_panel<W: Write>(panel: &Panel, grid: &GridSpec, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PANEL_HEADER)?;
    for r in &panel.rows {
        let c = grid.cell_at(r.cell);
        let neighbors = if panel.has_neighbors {
            r.past_neighbors.to_string()
        } else {
            String::new()
        };
        wtr.write_record([
            c.col.to_string(),
            c.row.to_string(),
            r.bin.to_string(),
            r.y.to_string(),
            r.curr_effort.to_string(),
            r.past_effort.to_string(),
            r.past_illegal.to_string(),
            neighbors,
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<panel>", e))?;
    Ok(())
}

pub fn read_panel<R: Read>(reader: R, grid: &GridSpec) -> Result<Panel> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().map(str::trim).ne(PANEL_HEADER) {
        return Err(Error::Parse("panel header does not match the expected columns".into()));
    }
    let mut rows = Vec::new();
    let mut has_neighbors = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = || Error::Parse(format!("panel row {}: malformed entry", i + 2));
        let num = |j: usize| -> Result<f64> { record.get(j).unwrap_or("").trim().parse().map_err(|_| bad()) };
        let idx = |j: usize| -> Result<usize> { record.get(j).unwrap_or("").trim().parse().map_err(|_| bad()) };
        let (col, row) = (idx(0)?, idx(1)?);
        if col >= grid.n_cols || row >= grid.n_rows {
            return Err(Error::Parse(format!("panel row {}: cell outside the grid", i + 2)));
        }
        let neigh_field = record.get(7).unwrap_or("").trim();
        let this_has = !neigh_field.is_empty();
        if *has_neighbors.get_or_insert(this_has) != this_has {
            return Err(Error::Parse("past_neighbors is filled on some rows only".into()));
        }
        let y = idx(3)?;
        if y > 1 {
            return Err(bad());
        }
        rows.push(PanelRow {
            cell: row * grid.n_cols + col,
            bin: idx(2)?,
            y: y as u8,
            curr_effort: num(4)?,
            past_effort: num(5)?,
            past_illegal: num(6)?,
            past_neighbors: if this_has { num(7)? } else { 0.0 },
        });
    }
    Panel::new(grid.n_cells(), has_neighbors.unwrap_or(false), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geogrid::TimeBinning;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binning(len: BinLength, n: usize) -> TimeBinning {
        TimeBinning::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), len, n).unwrap()
    }

    fn counts(cols: usize, rows: usize, bins: usize, values: Vec<u32>) -> ObservationRaster {
        Raster::from_values(
            GridSpec::km_cells(cols, rows).unwrap(),
            binning(BinLength::Month, bins),
            values,
        )
        .unwrap()
    }

    fn brute_neighbors(r: &ObservationRaster, window: usize) -> Vec<f64> {
        let g = r.grid;
        let h = (window / 2) as i64;
        let mut out = Vec::new();
        for bin in 0..r.n_bins() {
            for row in 0..g.n_rows as i64 {
                for col in 0..g.n_cols as i64 {
                    let mut s = 0.0;
                    for dr in -h..=h {
                        for dc in -h..=h {
                            let (rr, cc) = (row + dr, col + dc);
                            if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= g.n_rows as i64 || cc >= g.n_cols as i64
                            {
                                continue;
                            }
                            s += r.get((rr as usize) * g.n_cols + cc as usize, bin) as f64;
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn all_ones_center_and_corner() {
        let r = counts(3, 3, 1, vec![1; 9]);
        let n = neighbor_sum(&r, &NeighborSpec::new(3).unwrap());
        assert_eq!(n.get(4, 0), 8.0);
        for corner in [0, 2, 6, 8] {
            assert_eq!(n.get(corner, 0), 3.0);
        }
        assert_eq!(n.get(1, 0), 5.0);
    }

    #[test]
    fn neighbor_windows_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let r = counts(10, 10, 2, (0..200).map(|_| rng.random_range(0..4)).collect());
            for w in [3, 5, 7] {
                assert_eq!(
                    neighbor_sum(&r, &NeighborSpec::new(w).unwrap()).values(),
                    brute_neighbors(&r, w).as_slice()
                );
            }
        }
    }

    #[test]
    fn neighbor_window_validation() {
        assert!(NeighborSpec::new(1).is_err());
        assert!(NeighborSpec::new(4).is_err());
        assert!(NeighborSpec::new(9).is_ok());
    }

    #[test]
    fn pairing_labels() {
        for label in ["1mo/1mo", "3mo/3mo", "year/1mo", "year/3mo", "year/year"] {
            assert_eq!(label.parse::<LagSpec>().unwrap().label(), label);
        }
        assert_eq!("year/3mo".parse::<LagSpec>().unwrap().k, 4);
        assert_eq!("year/1mo".parse::<LagSpec>().unwrap().k, 12);
        assert!("1mo/year".parse::<LagSpec>().is_err());
        assert!("3mo".parse::<LagSpec>().is_err());
        assert_eq!(LagSpec::with_k(BinLength::Month, 2).unwrap().label(), "2x1mo/1mo");
    }

    #[test]
    fn single_cell_k1_definition() {
        let g = GridSpec::km_cells(1, 1).unwrap();
        let b = binning(BinLength::Month, 3);
        let effort = Raster::from_values(g, b, vec![2.0, 3.0, 5.0]).unwrap();
        let obs = Raster::from_values(g, b, vec![0, 1, 0]).unwrap();
        let lags = LagSpec::with_k(BinLength::Month, 1).unwrap();
        let (panel, stats) = assemble_panel(&effort, &obs, &lags, None).unwrap();
        assert_eq!(panel.len(), 2);
        let raw = stats.destandardize(&panel.rows[0]);
        assert_eq!((raw.bin, raw.y), (1, 1));
        assert!((raw.curr_effort - 3.0).abs() < 1e-12);
        assert!((raw.past_effort - 2.0).abs() < 1e-12);
        assert!(raw.past_illegal.abs() < 1e-12);
        assert_eq!(panel.rows[1].y, 0);
    }

    #[test]
    fn year_over_quarter_sums_four_bins() {
        let g = GridSpec::km_cells(2, 1).unwrap();
        let b = binning(BinLength::Quarter, 7);
        let effort: Vec<f64> = (0..14).map(|i| i as f64 * 0.5 + (i % 3) as f64).collect();
        let obs: Vec<u32> = (0..14).map(|i| (i * 7 % 5) as u32 % 2).collect();
        let e = Raster::from_values(g, b, effort.clone()).unwrap();
        let o = Raster::from_values(g, b, obs.clone()).unwrap();
        let lags: LagSpec = "year/3mo".parse().unwrap();
        let (panel, stats) = assemble_panel(&e, &o, &lags, None).unwrap();
        assert_eq!(panel.len(), 2 * (7 - 4));
        for row in &panel.rows {
            let raw = stats.destandardize(row);
            let expect: f64 = (1..=4).map(|j| effort[(row.bin - j) * 2 + row.cell]).sum();
            assert!((raw.past_effort - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_name_the_problem() {
        let g = GridSpec::km_cells(2, 1).unwrap();
        let b = binning(BinLength::Month, 3);
        let e = Raster::from_values(g, b, vec![1.0, 2.0, 3.0, 1.0, 2.0, 2.5]).unwrap();
        let flat_obs = Raster::from_values(g, b, vec![0; 6]).unwrap();
        let lags = LagSpec::with_k(BinLength::Month, 1).unwrap();
        match assemble_panel(&e, &flat_obs, &lags, None) {
            Err(Error::DegenerateCovariate(name)) => assert_eq!(name, "past_illegal"),
            other => panic!("{other:?}"),
        }
        let long = LagSpec::with_k(BinLength::Month, 3).unwrap();
        assert!(matches!(
            assemble_panel(&e, &flat_obs, &long, None),
            Err(Error::InsufficientHistory {
                needed: 4,
                available: 3
            })
        ));
        let quarterly: LagSpec = "3mo/3mo".parse().unwrap();
        assert!(matches!(
            assemble_panel(&e, &flat_obs, &quarterly, None),
            Err(Error::InvalidConfig(_))
        ));
        let other = Raster::<u32>::zeros(GridSpec::km_cells(1, 2).unwrap(), b);
        assert!(matches!(
            assemble_panel(&e, &other, &lags, None),
            Err(Error::RasterMismatch)
        ));
    }

    fn random_rasters(seed: u64, cols: usize, rows: usize, bins: usize) -> (EffortRaster, ObservationRaster) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridSpec::km_cells(cols, rows).unwrap();
        let b = binning(BinLength::Month, bins);
        let n = g.n_cells() * bins;
        let e = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let o = (0..n)
            .map(|_| u32::from(rng.random_bool(0.3)) * rng.random_range(1..3))
            .collect();
        (
            Raster::from_values(g, b, e).unwrap(),
            Raster::from_values(g, b, o).unwrap(),
        )
    }

    #[test]
    fn panel_csv_round_trip() {
        let (e, o) = random_rasters(4, 3, 2, 5);
        let lags = LagSpec::with_k(BinLength::Month, 2).unwrap();
        for neighbors in [None, Some(NeighborSpec::new(3).unwrap())] {
            let (panel, _) = assemble_panel(&e, &o, &lags, neighbors.as_ref()).unwrap();
            let mut buf = Vec::new();
            write_panel(&panel, &e.grid, &mut buf).unwrap();
            let back = read_panel(buf.as_slice(), &e.grid).unwrap();
            assert_eq!(back, panel);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn panel_invariants(seed in 0u64..10_000, cols in 2usize..6, rows in 1usize..5, bins in 4usize..9, k in 1usize..4) {
            let (e, o) = random_rasters(seed, cols, rows, bins);
            let lags = LagSpec::with_k(BinLength::Month, k).unwrap();
            let spec = NeighborSpec::new(3).unwrap();
            let Ok((panel, stats)) = assemble_panel(&e, &o, &lags, Some(&spec)) else {
                return Ok(());
            };
            prop_assert_eq!(panel.len(), e.n_cells() * (bins - k));
            let n = panel.len() as f64;
            for get in [|r: &PanelRow| r.curr_effort, |r: &PanelRow| r.past_effort, |r: &PanelRow| r.past_illegal, |r: &PanelRow| r.past_neighbors] {
                let mean = panel.rows.iter().map(get).sum::<f64>() / n;
                let var = panel.rows.iter().map(|r| (get(r) - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((var - 1.0).abs() < 1e-10);
            }
            for r in &panel.rows {
                prop_assert_eq!(r.y, u8::from(o.get(r.cell, r.bin) >= 1));
                let raw = stats.destandardize(r);
                prop_assert!((raw.curr_effort - e.get(r.cell, r.bin)).abs() <= 1e-12 * e.get(r.cell, r.bin).max(1.0));
            }

            // y depends only on observations.
            let doubled = Raster::from_values(e.grid, e.binning, e.values().iter().map(|v| v * 2.0 + 1.0).collect()).unwrap();
            let (p2, _) = assemble_panel(&doubled, &o, &lags, Some(&spec)).unwrap();
            prop_assert!(p2.rows.iter().zip(&panel.rows).all(|(a, b)| a.y == b.y));
        }

        #[test]
        fn neighbor_sum_is_linear(seed in 0u64..10_000, w in prop::sample::select(vec![3usize, 5, 7])) {
            let (_, a) = random_rasters(seed, 6, 5, 2);
            let (_, b) = random_rasters(seed + 1, 6, 5, 2);
            let spec = NeighborSpec::new(w).unwrap();
            let sum = Raster::from_values(a.grid, a.binning, a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()).unwrap();
            let lhs = neighbor_sum(&sum, &spec);
            let (na, nb) = (neighbor_sum(&a, &spec), neighbor_sum(&b, &spec));
            for i in 0..lhs.values().len() {
                prop_assert_eq!(lhs.values()[i], na.values()[i] + nb.values()[i]);
            }
            let zero = Raster::<u32>::zeros(a.grid, a.binning);
            prop_assert!(neighbor_sum(&zero, &spec).values().iter().all(|&v| v == 0.0));
        }
    }
}
