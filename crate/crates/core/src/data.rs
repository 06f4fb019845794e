//! Data sets: CSV ingestion, logistic-regression preprocessing and
//! synthetic generators.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LsviError, Result};
use crate::expfam::log_sigmoid;
use crate::numerics::{cholesky, Points, RngStream, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Intercept,
    Binary,
    Continuous,
}

/// How the label column is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelCoding {
    /// `0 → -1`, `1 → +1`.
    ZeroOne,
    /// Already `-1` / `+1`.
    PlusMinusOne,
    /// Real-valued response, kept as is.
    Response,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Points,
    pub y: Vec<f64>,
    pub kinds: Vec<ColumnKind>,
    pub names: Vec<String>,
    pub label_name: String,
    /// Rows skipped because a field was empty.
    pub rejected_rows: usize,
    pub note: String,
}

fn detect_kind(values: &[f64]) -> (ColumnKind, usize) {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in values {
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                return (ColumnKind::Continuous, 3);
            }
        }
    }
    match distinct.as_slice() {
        [v] if *v == 1.0 => (ColumnKind::Intercept, 1),
        [_, _] => (ColumnKind::Binary, 2),
        other => (ColumnKind::Continuous, other.len()),
    }
}

fn column(x: &Points, j: usize) -> Vec<f64> {
    x.rows().map(|r| r[j]).collect()
}

fn parse_label(v: f64, coding: LabelCoding, line: usize) -> Result<f64> {
    let bad = |m: String| LsviError::Parse { line, message: m };
    match coding {
        LabelCoding::Response => Ok(v),
        LabelCoding::ZeroOne if v == 0.0 => Ok(-1.0),
        LabelCoding::ZeroOne if v == 1.0 => Ok(1.0),
        LabelCoding::PlusMinusOne if v == 1.0 || v == -1.0 => Ok(v),
        _ => Err(bad(format!("label {v} does not fit the {coding:?} coding"))),
    }
}

/// Reads a comma-separated file with a header row. Rows with an empty field
/// are skipped and counted; any other non-numeric cell is an error.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, coding: LabelCoding) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| LsviError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| LsviError::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| LsviError::InvalidArgument(format!("no column named {label_column:?}")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut rejected = 0;
    for record in reader.records() {
        let record = record.map_err(|e| LsviError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() || record.iter().any(str::is_empty) {
            rejected += 1;
            continue;
        }
        let mut row = Vec::with_capacity(names.len());
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| LsviError::Parse {
                line,
                message: format!("non-numeric cell {field:?} in column {:?}", headers[i]),
            })?;
            if !v.is_finite() {
                return Err(LsviError::Parse {
                    line,
                    message: format!("non-finite cell {field:?}"),
                });
            }
            if i == label_idx {
                y.push(parse_label(v, coding, line)?);
            } else {
                row.push(v);
            }
        }
        data.extend(row);
    }
    if rejected > 0 {
        log::warn!("{}: skipped {rejected} row(s) with missing fields", path.display());
    }
    let x = Points::from_vec(y.len(), names.len(), data);
    let kinds = (0..names.len()).map(|j| detect_kind(&column(&x, j)).0).collect();
    Ok(Dataset {
        x,
        y,
        kinds,
        names,
        label_name: label_column.to_string(),
        rejected_rows: rejected,
        note: format!("loaded from {}", path.display()),
    })
}

/// Writes the data set in the dialect [`load_csv`] reads, label last.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| LsviError::Io(e.to_string()))?;
    let mut header = ds.names.clone();
    header.push(ds.label_name.clone());
    w.write_record(&header).map_err(|e| LsviError::Io(e.to_string()))?;
    for (row, label) in ds.x.rows().zip(&ds.y) {
        let fields: Vec<String> = row.iter().chain(std::iter::once(label)).map(|v| format!("{v:?}")).collect();
        w.write_record(&fields).map_err(|e| LsviError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Continuous columns to mean 0 and standard deviation 0.5, binary columns
/// to mean 0 and range 1, and a leading intercept column of ones. An
/// existing all-ones column is taken as the intercept.
pub fn preprocess_logistic(ds: &Dataset) -> Result<Dataset> {
    let n = ds.x.nrows();
    if n == 0 {
        return Err(LsviError::DegenerateData("empty data set".into()));
    }
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut names = vec!["intercept".to_string()];
    let mut kinds = vec![ColumnKind::Intercept];
    let mut have_intercept = false;
    for j in 0..ds.x.ncols() {
        let col = column(&ds.x, j);
        let (kind, distinct) = detect_kind(&col);
        let mean = col.iter().sum::<f64>() / n as f64;
        let scaled: Vec<f64> = match kind {
            ColumnKind::Intercept if !have_intercept => {
                have_intercept = true;
                names[0] = ds.names[j].clone();
                continue;
            }
            _ if distinct < 2 => return Err(LsviError::ConstantColumn { column: j }),
            ColumnKind::Binary => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                col.iter().map(|v| (v - mean) / (hi - lo)).collect()
            }
            _ => {
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                if !(sd > 0.0) {
                    return Err(LsviError::ConstantColumn { column: j });
                }
                col.iter().map(|v| 0.5 * (v - mean) / sd).collect()
            }
        };
        columns.push(scaled);
        names.push(ds.names[j].clone());
        kinds.push(kind);
    }
    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i]));
    }
    Ok(Dataset {
        x: Points::from_vec(n, d, data),
        y: ds.y.clone(),
        kinds,
        names,
        label_name: ds.label_name.clone(),
        rejected_rows: ds.rejected_rows,
        note: format!("{}; preprocessed", ds.note),
    })
}

/// Rows drawn from `N(0, R)` with `R_ij = 0.3^{|i-j|}`.
fn toeplitz_design(n: usize, d: usize, stream: &RngStream) -> Points {
    let r = SymMatrix::from_lower(nalgebra::DMatrix::from_fn(d, d, |i, j| {
        0.3f64.powi((i as i32 - j as i32).abs())
    }))
    .expect("square");
    let l = cholesky(&r).expect("Toeplitz correlation is positive definite");
    let mut rng = stream.rng();
    let mut x = Points::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        x.row_mut(i).copy_from_slice(&l.mul_vec(&z));
    }
    x
}

fn synthetic_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Logistic-regression data with correlated Gaussian covariates and
/// coefficients drawn from `N(0, I)`.
pub fn synth_logistic(n: usize, d: usize, stream: &RngStream) -> Dataset {
    let x = toeplitz_design(n, d, &stream.derive(0));
    let mut rng = stream.derive(1).rng();
    let beta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let y = x
        .rows()
        .map(|row| {
            let u: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            if rng.random::<f64>().ln() < log_sigmoid(u) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Dataset {
        kinds: vec![ColumnKind::Continuous; d],
        names: synthetic_names(d),
        x,
        y,
        label_name: "y".into(),
        rejected_rows: 0,
        note: format!("synthetic logistic, n={n}, d={d}"),
    }
}

/// Linear-regression data where only `active` coefficients are non-zero.
/// Returns the data and the true inclusion vector.
pub fn synth_varsel(n: usize, d: usize, active: usize, noise_std: f64, stream: &RngStream) -> (Dataset, Vec<f64>) {
    let active = active.min(d);
    let x = toeplitz_design(n, d, &stream.derive(0));
    let mut rng = stream.derive(1).rng();
    // random subset by partial shuffle
    let mut order: Vec<usize> = (0..d).collect();
    for i in 0..active {
        let j = rng.random_range(i..d);
        order.swap(i, j);
    }
    let mut gamma = vec![0.0; d];
    let mut beta = vec![0.0; d];
    for &j in &order[..active] {
        gamma[j] = 1.0;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let g: f64 = rng.sample(StandardNormal);
        beta[j] = sign * (1.0 + 0.5 * g.abs());
    }
    let y = x
        .rows()
        .map(|row| {
            let mean: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let e: f64 = rng.sample(StandardNormal);
            mean + noise_std * e
        })
        .collect();
    let ds = Dataset {
        kinds: vec![ColumnKind::Continuous; d],
        names: synthetic_names(d),
        x,
        y,
        label_name: "y".into(),
        rejected_rows: 0,
        note: format!("synthetic variable selection, n={n}, d={d}, active={active}"),
    };
    (ds, gamma)
}
