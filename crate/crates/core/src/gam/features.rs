use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geogrid::{CellIndex, GridSpec};

/// Static per-cell features, one column per feature and one value per cell
/// in linear cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_cells: usize,
}

impl FeatureTable {
    pub fn new(n_cells: usize, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: names.len(),
                got: columns.len(),
            });
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_cells {
                return Err(Error::Parse(format!(
                    "feature `{name}` has {} values for {n_cells} cells",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("feature `{name}` has a non-finite value")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Parse(format!("duplicate feature `{dup}`")));
        }
        Ok(Self {
            names,
            columns,
            n_cells,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// `cell_col,cell_row,<feature columns>`; every grid cell exactly once.
    pub fn read_csv<R: Read>(reader: R, grid: &GridSpec) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("cell_col") || headers.get(1) != Some("cell_row") {
            return Err(Error::Parse("feature table must start with cell_col,cell_row".into()));
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let n = grid.n_cells();
        let mut columns = vec![vec![f64::NAN; n]; names.len()];
        let mut seen = vec![false; n];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let idx = |i: usize| -> Result<usize> {
                rec.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("feature row {}: bad cell index", line + 2)))
            };
            let cell = CellIndex::new(idx(0)?, idx(1)?);
            if cell.col >= grid.n_cols || cell.row >= grid.n_rows {
                return Err(Error::Parse(format!("feature row {}: cell outside grid", line + 2)));
            }
            let lin = grid.linear(cell);
            if std::mem::replace(&mut seen[lin], true) {
                return Err(Error::Parse(format!("feature row {}: duplicate cell", line + 2)));
            }
            for (j, col) in columns.iter_mut().enumerate() {
                col[lin] = rec
                    .get(j + 2)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("feature row {}: bad value for `{}`", line + 2, names[j])))?;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let c = grid.cell_at(missing);
            return Err(Error::Parse(format!(
                "feature table has no row for cell ({}, {})",
                c.col, c.row
            )));
        }
        Self::new(n, names, columns)
    }

    pub fn read_file(path: &Path, grid: &GridSpec) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, grid)
    }

    pub fn write_csv<W: Write>(&self, writer: W, grid: &GridSpec) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["cell_col".to_string(), "cell_row".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for lin in 0..self.n_cells {
            let c = grid.cell_at(lin);
            let mut rec = vec![c.col.to_string(), c.row.to_string()];
            rec.extend(self.columns.iter().map(|col| col[lin].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature table>", e))?;
        Ok(())
    }
}
