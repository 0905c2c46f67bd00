//! Price, return and magnitude panels.
//!
//! A panel is an N x T grid of series (rows) over ordered timestamps
//! (columns) with a parallel boolean mask. Masked cells are missing prices or
//! non-trading days; they hold 0 in return-like panels and are excluded from
//! every mean, variance and correlation computed downstream.
//!
//! CSV layout (both for ingestion and for the cache written by the CLI):
//! a header `date,<name1>,...,<nameN>`, one row per timestamp, `.` decimal
//! separator, and an empty field for a missing or masked cell.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::output::{fmt_num, write_table};

/// Compares two timestamp labels. Labels are opaque; if both parse as numbers
/// they are compared numerically, otherwise lexicographically (ISO dates sort
/// correctly this way).
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

fn check_increasing(timestamps: &[String]) -> Result<()> {
    for (k, pair) in timestamps.windows(2).enumerate() {
        if compare_labels(&pair[0], &pair[1]) != Ordering::Less {
            return Err(Error::NonMonotoneTimestamps {
                line: k + 3,
                previous: pair[0].clone(),
                next: pair[1].clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    names: Vec<String>,
    timestamps: Vec<String>,
    values: DMatrix<f64>,
    missing: DMatrix<bool>,
}

impl PricePanel {
    /// Builds a validated panel. Missing cells may hold any value; it is
    /// replaced by NaN.
    pub fn new(
        names: Vec<String>,
        timestamps: Vec<String>,
        mut values: DMatrix<f64>,
        missing: DMatrix<bool>,
    ) -> Result<Self> {
        let (n, t) = values.shape();
        if names.len() != n || timestamps.len() != t || missing.shape() != (n, t) {
            return Err(Error::invalid("price panel shape mismatch"));
        }
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 series, got {n}")));
        }
        if t < 3 {
            return Err(Error::invalid(format!("need at least 3 timestamps, got {t}")));
        }
        check_increasing(&timestamps)?;
        for j in 0..t {
            for i in 0..n {
                if missing[(i, j)] {
                    values[(i, j)] = f64::NAN;
                } else if !(values[(i, j)] > 0.0) || !values[(i, j)].is_finite() {
                    return Err(Error::NonPositivePrice {
                        line: j + 2,
                        column: names[i].clone(),
                        value: values[(i, j)],
                    });
                }
            }
        }
        Ok(Self {
            names,
            timestamps,
            values,
            missing,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn missing(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_grid(path, &self.names, &self.timestamps, &self.values, &self.missing)
    }
}

/// Shared storage for return-like panels (returns, magnitudes, residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPanel {
    names: Vec<String>,
    timestamps: Vec<String>,
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl MaskedPanel {
    /// Masked cells are forced to exactly 0.
    pub fn new(
        names: Vec<String>,
        timestamps: Vec<String>,
        mut values: DMatrix<f64>,
        mask: DMatrix<bool>,
    ) -> Result<Self> {
        let (n, t) = values.shape();
        if names.len() != n || timestamps.len() != t || mask.shape() != (n, t) {
            return Err(Error::invalid("panel shape mismatch"));
        }
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::invalid("panel contains a non-finite unmasked value"));
            }
        }
        Ok(Self {
            names,
            timestamps,
            values,
            mask,
        })
    }

    /// Panel with no masked cells and generated labels.
    pub fn unmasked(values: DMatrix<f64>) -> Result<Self> {
        let (n, t) = values.shape();
        let names = (0..n).map(|i| format!("s{i}")).collect();
        let timestamps = (0..t).map(|k| k.to_string()).collect();
        Self::new(names, timestamps, values, DMatrix::from_element(n, t, false))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn is_masked(&self, i: usize, t: usize) -> bool {
        self.mask[(i, t)]
    }

    pub fn unmasked_count(&self, i: usize) -> usize {
        self.mask.row(i).iter().filter(|m| !**m).count()
    }

    /// Mean and population std of row `i` over unmasked cells in `range`.
    pub fn row_moments(&self, i: usize, range: std::ops::Range<usize>) -> (usize, f64, f64) {
        let cells = range.map(move |t| (self.values[(i, t)], !self.mask[(i, t)]));
        crate::stats::masked_moments(cells)
    }

    pub fn has_mask(&self) -> bool {
        self.mask.iter().any(|m| *m)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_grid(path, &self.names, &self.timestamps, &self.values, &self.mask)
    }

    /// Reads a cache written by [`MaskedPanel::write_csv`]: empty cells are masked.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let raw = read_grid(path.as_ref(), b',')?;
        let n = raw.names.len();
        let t = raw.timestamps.len();
        let mut values = DMatrix::zeros(n, t);
        let mut mask = DMatrix::from_element(n, t, false);
        for (j, row) in raw.cells.iter().enumerate() {
            for (i, cell) in row.iter().enumerate() {
                match cell {
                    Some(v) => values[(i, j)] = *v,
                    None => mask[(i, j)] = true,
                }
            }
        }
        Self::new(raw.names, raw.timestamps, values, mask)
    }
}

macro_rules! panel_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(MaskedPanel);

        impl $name {
            pub fn from_panel(panel: MaskedPanel) -> Self {
                Self(panel)
            }

            pub fn into_inner(self) -> MaskedPanel {
                self.0
            }
        }

        impl std::ops::Deref for $name {
            type Target = MaskedPanel;
            fn deref(&self) -> &MaskedPanel {
                &self.0
            }
        }

        impl AsRef<MaskedPanel> for $name {
            fn as_ref(&self) -> &MaskedPanel {
                &self.0
            }
        }
    };
}

panel_newtype!(ReturnPanel);
panel_newtype!(MagnitudePanel);

impl AsRef<MaskedPanel> for MaskedPanel {
    fn as_ref(&self) -> &MaskedPanel {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    pub delimiter: u8,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnOptions {
    /// Treat exact-zero returns as non-trading days.
    pub mask_zero_returns: bool,
}

impl Default for ReturnOptions {
    fn default() -> Self {
        Self {
            mask_zero_returns: true,
        }
    }
}

struct RawGrid {
    names: Vec<String>,
    timestamps: Vec<String>,
    /// One entry per CSV data row.
    cells: Vec<Vec<Option<f64>>>,
    lines: Vec<usize>,
}

fn read_grid(path: &Path, delimiter: u8) -> Result<RawGrid> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty header".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut cells = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len() + 1, record.len()),
            });
        }
        timestamps.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(field, name)| {
                if field.is_empty() {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                        line,
                        message: format!("column {name:?}: cannot parse {field:?} as a number"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
        lines.push(line);
    }
    Ok(RawGrid {
        names,
        timestamps,
        cells,
        lines,
    })
}

fn write_grid<P: AsRef<Path>>(
    path: P,
    names: &[String],
    timestamps: &[String],
    values: &DMatrix<f64>,
    mask: &DMatrix<bool>,
) -> Result<()> {
    let mut header = vec!["date".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = timestamps
        .iter()
        .enumerate()
        .map(|(j, ts)| {
            let mut row = vec![ts.clone()];
            row.extend((0..names.len()).map(|i| {
                if mask[(i, j)] {
                    String::new()
                } else {
                    fmt_num(values[(i, j)])
                }
            }));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Reads a price CSV. Empty cells become missing; timestamps must be strictly
/// increasing and every present price positive.
pub fn ingest_csv<P: AsRef<Path>>(path: P, config: &IngestConfig) -> Result<PricePanel> {
    let raw = read_grid(path.as_ref(), config.delimiter)?;
    let n = raw.names.len();
    let t = raw.timestamps.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "fewer than 2 series: found {n} price column(s)"
        )));
    }
    if t < 3 {
        return Err(Error::invalid(format!("need at least 3 rows, found {t}")));
    }
    for k in 1..t {
        if compare_labels(&raw.timestamps[k - 1], &raw.timestamps[k]) != Ordering::Less {
            return Err(Error::NonMonotoneTimestamps {
                line: raw.lines[k],
                previous: raw.timestamps[k - 1].clone(),
                next: raw.timestamps[k].clone(),
            });
        }
    }
    let mut values = DMatrix::from_element(n, t, f64::NAN);
    let mut missing = DMatrix::from_element(n, t, false);
    for (j, row) in raw.cells.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            match *cell {
                None => missing[(i, j)] = true,
                Some(v) if !(v > 0.0) || !v.is_finite() => {
                    return Err(Error::NonPositivePrice {
                        line: raw.lines[j],
                        column: raw.names[i].clone(),
                        value: v,
                    })
                }
                Some(v) => values[(i, j)] = v,
            }
        }
    }
    PricePanel::new(raw.names, raw.timestamps, values, missing)
}

/// Log returns with default options (exact zeros masked).
pub fn to_returns(panel: &PricePanel) -> ReturnPanel {
    to_returns_with(panel, ReturnOptions::default())
}

/// `R[i][t] = ln S[i][t+1] - ln S[i][t]`, labelled with the later timestamp.
/// A missing price masks both returns that touch it.
pub fn to_returns_with(panel: &PricePanel, options: ReturnOptions) -> ReturnPanel {
    let n = panel.n_series();
    let t = panel.len() - 1;
    let prices = panel.values();
    let missing = panel.missing();
    let mut values = DMatrix::zeros(n, t);
    let mut mask = DMatrix::from_element(n, t, false);
    for j in 0..t {
        for i in 0..n {
            if missing[(i, j)] || missing[(i, j + 1)] {
                mask[(i, j)] = true;
                continue;
            }
            let r = prices[(i, j + 1)].ln() - prices[(i, j)].ln();
            if r == 0.0 && options.mask_zero_returns {
                mask[(i, j)] = true;
            } else {
                values[(i, j)] = r;
            }
        }
    }
    let panel = MaskedPanel::new(
        panel.names().to_vec(),
        panel.timestamps()[1..].to_vec(),
        values,
        mask,
    )
    .expect("shapes are consistent by construction");
    ReturnPanel(panel)
}

/// `|R - <R>|` with the row mean taken over unmasked cells.
pub fn to_magnitudes(panel: &ReturnPanel) -> Result<MagnitudePanel> {
    let (n, t) = panel.values().shape();
    let mut values = DMatrix::zeros(n, t);
    for i in 0..n {
        let (count, mean, _) = panel.row_moments(i, 0..t);
        if count < 2 {
            return Err(Error::invalid(format!(
                "series {:?} has {count} usable returns, need at least 2",
                panel.names()[i]
            )));
        }
        for j in 0..t {
            if !panel.is_masked(i, j) {
                values[(i, j)] = (panel.values()[(i, j)] - mean).abs();
            }
        }
    }
    let inner = MaskedPanel::new(
        panel.names().to_vec(),
        panel.timestamps().to_vec(),
        values,
        panel.mask().clone(),
    )?;
    Ok(MagnitudePanel(inner))
}
