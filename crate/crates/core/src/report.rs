//! Coefficient tables: one row per fit, three decimals, columns in the
//! order `mean_a, beta, gamma` (past effort), `mean_a, beta, rho` (past
//! illegal activity) or `mean_a, beta, rho, eta` (with neighbours).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{FitResult, ModelVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Pairing or window label, e.g. `year/3mo` or `3x3`.
    pub label: String,
    pub mean_a: f64,
    pub coefficients: Vec<f64>,
}

impl ReportRow {
    /// Values joined by `", "`, e.g. `-9.284, 1.076, -0.162`.
    pub fn values_line(&self) -> String {
        self.cells().join(", ")
    }

    fn cells(&self) -> Vec<String> {
        std::iter::once(self.mean_a)
            .chain(self.coefficients.iter().copied())
            .map(fmt3)
            .collect()
    }
}

/// Three decimals without a negative zero.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

pub fn summarize(result: &FitResult, label: &str) -> ReportRow {
    ReportRow {
        label: label.to_string(),
        mean_a: result.mean_a,
        coefficients: result.params.coefficients(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub variant: ModelVariant,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new(variant: ModelVariant) -> Self {
        Self {
            variant,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if row.coefficients.len() != self.variant.n_coefficients() {
            return Err(Error::LengthMismatch {
                expected: self.variant.n_coefficients(),
                got: row.coefficients.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["label", "mean_a"];
        h.extend_from_slice(self.variant.coefficient_names());
        h
    }

    /// Right-aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header = self.header();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| std::iter::once(r.label.clone()).chain(r.cells()).collect())
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for line in &body {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut emit = |cells: &mut dyn Iterator<Item = &str>| {
            let line: Vec<String> = cells
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        };
        emit(&mut header.iter().copied());
        for line in &body {
            emit(&mut line.iter().map(String::as_str));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.label, r.cells().join(","));
        }
        out
    }

    /// Inverse of [`ReportTable::to_csv`]. The variant is read from the header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty report".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let variant = ModelVariant::ALL
            .into_iter()
            .find(|v| header.get(2..) == Some(v.coefficient_names()))
            .filter(|_| header.get(..2) == Some(&["label", "mean_a"][..]))
            .ok_or_else(|| Error::Parse(format!("unrecognized report header `{}`", header.join(","))))?;
        let mut table = Self::new(variant);
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::Parse(format!("report row `{line}` has {} fields", fields.len())));
            }
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{f}`"))))
                .collect::<Result<Vec<_>>>()?;
            table.push(ReportRow {
                label: fields[0].to_string(),
                mean_a: nums[0],
                coefficients: nums[1..].to_vec(),
            })?;
        }
        Ok(table)
    }
}
