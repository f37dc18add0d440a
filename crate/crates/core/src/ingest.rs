//! Price tables from CSV, price increments, and synthetic Gaussian samples.
//!
//! CSV input is UTF-8 with a configurable delimiter and an optional header
//! row. A cell is missing when it is empty or the literal `NA`. When
//! [`CsvOptions::timestamps`] is set the first column holds timestamps
//! (numeric, or strings ordered lexicographically such as ISO-8601),
//! otherwise the row index is used.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::SampleSet;
use crate::oracles::GaussianSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    /// Remove every column that has a missing cell.
    #[default]
    DropColumn,
    /// Fail on the first missing cell.
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub header: bool,
    pub timestamps: bool,
    pub na_policy: NaPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: true,
            timestamps: true,
            na_policy: NaPolicy::DropColumn,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    timestamps: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn strictly_increasing(a: &str, b: &str) -> bool {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x < y,
        _ => a < b,
    }
}

impl PriceTable {
    pub fn new(
        timestamps: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::arg(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(bad) = columns.iter().position(|c| c.len() != timestamps.len()) {
            return Err(Error::arg(format!(
                "column `{}` has {} rows, expected {}",
                names[bad],
                columns[bad].len(),
                timestamps.len()
            )));
        }
        if let Some(i) = timestamps
            .windows(2)
            .position(|w| !strictly_increasing(&w[0], &w[1]))
        {
            return Err(Error::arg(format!(
                "timestamps not strictly increasing at row {}: `{}` then `{}`",
                i + 2,
                timestamps[i],
                timestamps[i + 1]
            )));
        }
        Ok(Self {
            timestamps,
            names,
            columns,
        })
    }

    /// Table indexed by row number.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let rows = columns.first().map(Vec::len).unwrap_or(0);
        Self::new((0..rows).map(|i| i.to_string()).collect(), names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Writes the table with a `timestamp` column and a header row. Values
    /// use the shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, ts) in self.timestamps.iter().enumerate() {
            let mut record = vec![ts.clone()];
            record.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `table` to `path` as comma-separated values with a header row.
pub fn write_csv(table: &PriceTable, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    table.write_csv(std::io::BufWriter::new(file), b',')
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<PriceTable> {
    let file = std::fs::File::open(path)?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let first_data_col = usize::from(options.timestamps);

    let header = if options.header {
        match records.next() {
            Some(rec) => Some(rec?),
            None => return Err(Error::EmptyTable),
        }
    } else {
        None
    };
    let row_offset = 1 + usize::from(options.header);

    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut dropped: Vec<bool> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + row_offset;
        if columns.is_empty() && dropped.is_empty() {
            let n = rec.len().saturating_sub(first_data_col);
            columns = vec![Vec::new(); n];
            dropped = vec![false; n];
        }
        timestamps.push(if options.timestamps {
            rec.get(0).unwrap_or("").trim().to_string()
        } else {
            i.to_string()
        });
        for (j, col) in columns.iter_mut().enumerate() {
            let column = j + first_data_col + 1;
            let cell = rec.get(j + first_data_col).unwrap_or("");
            if is_missing(cell) {
                match options.na_policy {
                    NaPolicy::Error => return Err(Error::MissingValue { row, column }),
                    NaPolicy::DropColumn => {
                        dropped[j] = true;
                        col.push(f64::NAN);
                    }
                }
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: format!("`{cell}` is not finite"),
                });
            }
            col.push(value);
        }
    }

    let n_cols = match &header {
        Some(h) => h.len().saturating_sub(first_data_col),
        None => columns.len(),
    };
    if columns.is_empty() {
        columns = vec![Vec::new(); n_cols];
        dropped = vec![false; n_cols];
    }
    let names: Vec<String> = match &header {
        Some(h) => h
            .iter()
            .skip(first_data_col)
            .map(|s| s.trim().to_string())
            .collect(),
        None => (0..columns.len()).map(|j| format!("col{j}")).collect(),
    };

    let (names, columns): (Vec<_>, Vec<_>) = names
        .into_iter()
        .zip(columns)
        .zip(dropped)
        .filter_map(|(nc, drop)| (!drop).then_some(nc))
        .unzip();
    if columns.is_empty() {
        return Err(Error::EmptyTable);
    }
    PriceTable::new(timestamps, names, columns)
}

/// Row `t` holds `price[t + 1] - price[t]` for every column, in column order.
pub fn to_increments(table: &PriceTable) -> Result<SampleSet> {
    if table.n_rows() < 2 {
        return Err(Error::arg(format!(
            "increments need at least 2 rows, table has {}",
            table.n_rows()
        )));
    }
    let d = table.n_cols();
    let mut data = Vec::with_capacity((table.n_rows() - 1) * d);
    for t in 0..table.n_rows() - 1 {
        data.extend(table.columns.iter().map(|c| c[t + 1] - c[t]));
    }
    SampleSet::from_flat(data, d)
}

/// Lower-triangular `L` with `L L^T = a` for a symmetric positive
/// semidefinite `a`; zero pivots are allowed.
#[allow(clippy::needless_range_loop)]
fn psd_cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    const TOL: f64 = 1e-10;
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::arg("correlation matrix must be square"));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > TOL {
                return Err(Error::arg("correlation matrix must be symmetric"));
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let pivot = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if pivot < -TOL {
            return Err(Error::arg(
                "correlation matrix is not positive semidefinite",
            ));
        }
        let diag = pivot.max(0.0).sqrt();
        l[j][j] = diag;
        for i in j + 1..n {
            let off = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if diag > TOL {
                l[i][j] = off / diag;
            } else if off.abs() > TOL {
                return Err(Error::arg(
                    "correlation matrix is not positive semidefinite",
                ));
            }
        }
    }
    Ok(l)
}

/// `samples` i.i.d. draws of a Gaussian vector with the given marginals and
/// correlation (independent when `None`).
///
/// Draws come from the last stream (`u64::MAX`) of a ChaCha8 generator keyed
/// by `seed`, so the same seed can drive the SGLD chains without overlap.
pub fn gaussian_sampler(
    specs: &[GaussianSpec],
    correlation: Option<&[Vec<f64>]>,
    samples: usize,
    seed: u64,
) -> Result<SampleSet> {
    if specs.is_empty() {
        return Err(Error::arg("at least one marginal is required"));
    }
    if samples == 0 {
        return Err(Error::arg("sample count must be positive"));
    }
    for s in specs {
        GaussianSpec::new(s.mu, s.sigma)?;
    }
    let d = specs.len();
    let chol = match correlation {
        Some(c) => {
            if c.len() != d {
                return Err(Error::arg(format!(
                    "correlation is {}x{}, expected {d}x{d}",
                    c.len(),
                    c.len()
                )));
            }
            Some(psd_cholesky(c)?)
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut z = vec![0.0; d];
    let mut data = Vec::with_capacity(samples * d);
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (j, spec) in specs.iter().enumerate() {
            let x = match &chol {
                Some(l) => (0..=j).map(|k| l[j][k] * z[k]).sum::<f64>(),
                None => z[j],
            };
            data.push(spec.mu + spec.sigma * x);
        }
    }
    SampleSet::from_flat(data, d)
}
