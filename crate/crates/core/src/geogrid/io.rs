//! CSV formats for waypoints, observations and rasters.
//!
//! | file         | header                                 |
//! |--------------|----------------------------------------|
//! | waypoints    | `patrol_id,timestamp,x_m,y_m`          |
//! | observations | `timestamp,x_m,y_m,category`           |
//! | raster       | `cell_col,cell_row,bin_index,value`    |
//!
//! Timestamps are ISO-8601 / RFC 3339 in UTC. Malformed input rows are
//! dropped into the [`IngestReport`] rather than aborting the read.

use std::fmt::Display;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{CellIndex, GridSpec, IngestReport, ObservationRecord, Raster, TimeBinning, Waypoint};
use crate::error::{Error, Result};

pub const WAYPOINT_HEADER: [&str; 4] = ["patrol_id", "timestamp", "x_m", "y_m"];
pub const OBSERVATION_HEADER: [&str; 4] = ["timestamp", "x_m", "y_m", "category"];
pub const RASTER_HEADER: [&str; 4] = ["cell_col", "cell_row", "bin_index", "value"];

/// Parses an ISO-8601 UTC timestamp. Accepts RFC 3339 with any offset, or a
/// naive `YYYY-MM-DDTHH:MM:SS` / `YYYY-MM-DD HH:MM:SS` taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn column_positions<const N: usize>(headers: &csv::StringRecord, names: [&str; N]) -> Result<[usize; N]> {
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
    }
    Ok(out)
}

fn parse_coord(s: Option<&str>) -> std::result::Result<f64, &'static str> {
    let v: f64 = s.and_then(|s| s.trim().parse().ok()).ok_or("malformed coordinate")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("non-finite coordinate")
    }
}

pub fn parse_waypoints<R: Read>(reader: R, report: &mut IngestReport) -> Result<Vec<Waypoint>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let [id_col, ts_col, x_col, y_col] = column_positions(rdr.headers()?, WAYPOINT_HEADER)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let Ok(record) = record else {
            report.drop_record("waypoints", "unreadable row");
            continue;
        };
        let parsed = (|| {
            let patrol_id = record
                .get(id_col)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or("missing patrol_id")?;
            let timestamp = record
                .get(ts_col)
                .and_then(parse_timestamp)
                .ok_or("malformed timestamp")?;
            let x = parse_coord(record.get(x_col))?;
            let y = parse_coord(record.get(y_col))?;
            Ok::<_, &'static str>(Waypoint {
                patrol_id: patrol_id.to_string(),
                timestamp,
                x,
                y,
            })
        })();
        match parsed {
            Ok(wp) => out.push(wp),
            Err(reason) => report.drop_record("waypoints", reason),
        }
    }
    Ok(out)
}

pub fn read_waypoints(path: &Path, report: &mut IngestReport) -> Result<Vec<Waypoint>> {
    parse_waypoints(open(path)?, report)
}

pub fn parse_observations<R: Read>(reader: R, report: &mut IngestReport) -> Result<Vec<ObservationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let [ts_col, x_col, y_col, cat_col] = column_positions(rdr.headers()?, OBSERVATION_HEADER)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let Ok(record) = record else {
            report.drop_record("observations", "unreadable row");
            continue;
        };
        let parsed = (|| {
            let timestamp = record
                .get(ts_col)
                .and_then(parse_timestamp)
                .ok_or("malformed timestamp")?;
            let x = parse_coord(record.get(x_col))?;
            let y = parse_coord(record.get(y_col))?;
            let category = record
                .get(cat_col)
                .and_then(|c| c.parse().ok())
                .ok_or("unknown category")?;
            Ok::<_, &'static str>(ObservationRecord {
                timestamp,
                x,
                y,
                category,
            })
        })();
        match parsed {
            Ok(obs) => out.push(obs),
            Err(reason) => report.drop_record("observations", reason),
        }
    }
    Ok(out)
}

pub fn read_observations(path: &Path, report: &mut IngestReport) -> Result<Vec<ObservationRecord>> {
    parse_observations(open(path)?, report)
}

/// Writes the nonzero entries of a raster, ordered by bin, then row, then column.
pub fn write_raster<T, W>(raster: &Raster<T>, writer: W) -> Result<()>
where
    T: Copy + Default + PartialEq + Display,
    W: Write,
{
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RASTER_HEADER)?;
    let zero = T::default();
    for bin in 0..raster.n_bins() {
        for (cell, &v) in raster.bin_slice(bin).iter().enumerate() {
            if v == zero {
                continue;
            }
            let c = raster.grid.cell_at(cell);
            wtr.write_record([c.col.to_string(), c.row.to_string(), bin.to_string(), v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<raster>", e))?;
    Ok(())
}

pub fn write_raster_file<T>(raster: &Raster<T>, path: &Path) -> Result<()>
where
    T: Copy + Default + PartialEq + Display,
{
    write_raster(raster, create(path)?)
}

/// Reads a sparse raster. Entries outside the layout are an error: a raster
/// file is produced by this crate, so a mismatch means the wrong grid config.
pub fn parse_raster<T, R>(reader: R, grid: &GridSpec, binning: &TimeBinning) -> Result<Raster<T>>
where
    T: Copy + Default + FromStr,
    R: Read,
{
    let mut raster = Raster::zeros(*grid, *binning);
    let mut rdr = csv::Reader::from_reader(reader);
    let [col_c, row_c, bin_c, val_c] = column_positions(rdr.headers()?, RASTER_HEADER)?;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = || Error::Parse(format!("raster row {}: malformed entry", line + 2));
        let field = |i: usize| record.get(i).map(str::trim).ok_or_else(bad);
        let col: usize = field(col_c)?.parse().map_err(|_| bad())?;
        let row: usize = field(row_c)?.parse().map_err(|_| bad())?;
        let bin: usize = field(bin_c)?.parse().map_err(|_| bad())?;
        let value: T = field(val_c)?.parse().map_err(|_| bad())?;
        if col >= grid.n_cols || row >= grid.n_rows || bin >= binning.n_bins {
            return Err(Error::Parse(format!(
                "raster row {}: ({col}, {row}, {bin}) lies outside the configured grid/binning",
                line + 2
            )));
        }
        raster.set(grid.linear(CellIndex::new(col, row)), bin, value);
    }
    Ok(raster)
}

pub fn read_raster_file<T>(path: &Path, grid: &GridSpec, binning: &TimeBinning) -> Result<Raster<T>>
where
    T: Copy + Default + FromStr,
{
    parse_raster(open(path)?, grid, binning)
}
