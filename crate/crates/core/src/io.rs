//! CSV input and output.
//!
//! Input files have a header row and one row per time point. A leading
//! timestamp column is dropped when it is recognised by its header name or
//! by a non-numeric first value. Numbers are written with 17 significant
//! digits so every `f64` survives a round trip, and every file is written
//! to a temporary sibling and renamed into place.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::ar1::PhiPosterior;
use crate::arp::{GibbsState, PosteriorDraws, RhoXiParams};
use crate::data::{Dataset, TestResult};
use crate::datagen::GenInstance;
use crate::error::{Error, Result};

const MISSING: [&str; 6] = ["", "na", "nan", "null", "none", "."];
const TIME_HEADERS: [&str; 6] = ["date", "time", "timestamp", "datetime", "period", "t"];

/// Decimal form with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.trim().to_ascii_lowercase().as_str())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

/// Parses CSV text into a dataset whose regressand is the first numeric
/// column.
pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        });
    }
    let records: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_error)?;
    let skip = usize::from(has_timestamp_column(&headers, records.first()));
    let labels = headers[skip..].to_vec();
    let n = labels.len();
    if n == 0 {
        return Err(Error::Dimension("no numeric columns".into()));
    }
    let mut values = DMatrix::zeros(records.len(), n);
    for (row, rec) in records.iter().enumerate() {
        // line 1 is the header
        let line = row + 2;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                column: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for j in 0..n {
            let cell = &rec[j + skip];
            if is_missing(cell) {
                return Err(Error::MissingData {
                    row,
                    column: j,
                    label: labels[j].clone(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: j + skip + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::MissingData {
                    row,
                    column: j,
                    label: labels[j].clone(),
                });
            }
            values[(row, j)] = v;
        }
    }
    Dataset::new(values, labels)
}

fn has_timestamp_column(headers: &[String], first: Option<&csv::StringRecord>) -> bool {
    if headers.len() < 2 {
        return false;
    }
    if TIME_HEADERS.contains(&headers[0].to_ascii_lowercase().as_str()) {
        return true;
    }
    match first.and_then(|r| r.get(0)) {
        Some(cell) => !is_missing(cell) && cell.parse::<f64>().is_err(),
        None => false,
    }
}

/// Reads a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_csv(fs::File::open(path)?)
}

/// Writes through a temporary file in the target directory, then renames,
/// so readers never observe a partial file.
pub fn write_atomic<F>(path: impl AsRef<Path>, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_row(w: &mut dyn Write, cells: &[String]) -> std::io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}

/// Dataset as CSV with its labels as header.
pub fn write_dataset(w: &mut dyn Write, data: &Dataset) -> std::io::Result<()> {
    write_row(w, data.labels())?;
    let v = data.values();
    for i in 0..v.nrows() {
        let row: Vec<String> = (0..v.ncols()).map(|j| format_f64(v[(i, j)])).collect();
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_atomic(path, |w| write_dataset(w, data))
}

/// Ground truth of a generated instance as `key,value` rows.
pub fn write_truth(w: &mut dyn Write, inst: &GenInstance) -> std::io::Result<()> {
    writeln!(w, "key,value")?;
    writeln!(w, "label,{}", inst.label)?;
    writeln!(w, "order,{}", inst.order())?;
    for (i, p) in inst.true_phi.iter().enumerate() {
        writeln!(w, "phi_{},{}", i + 1, format_f64(*p))?;
    }
    for (i, b) in inst.true_beta2.iter().enumerate() {
        writeln!(w, "beta2_{},{}", i + 1, format_f64(*b))?;
    }
    writeln!(w, "intercept,{}", format_f64(inst.true_intercept))
}

pub fn save_truth(path: impl AsRef<Path>, inst: &GenInstance) -> Result<()> {
    write_atomic(path, |w| write_truth(w, inst))
}

/// One row per kept draw. Lag-difference columns run to the largest order
/// visited and are blank where a draw has fewer.
pub fn write_draws(w: &mut dyn Write, draws: &PosteriorDraws) -> std::io::Result<()> {
    let max_k = draws.draws.iter().map(|s| s.k).max().unwrap_or(0);
    let n_beta = draws.draws.first().map_or(0, |s| s.beta2.len());
    let has_alpha = draws.draws.first().is_some_and(|s| s.alpha.is_some());
    let mut header = vec!["draw".to_string(), "k".into(), "rho".into()];
    header.extend((1..max_k).map(|i| format!("xi_{i}")));
    if has_alpha {
        header.push("alpha".into());
    }
    header.extend((1..=n_beta).map(|i| format!("beta2_{i}")));
    header.push("sigma2".into());
    write_row(w, &header)?;
    for (i, s) in draws.draws.iter().enumerate() {
        let mut row = vec![i.to_string(), s.k.to_string(), format_f64(s.rho_xi.rho)];
        for j in 0..max_k.saturating_sub(1) {
            row.push(s.rho_xi.xi.get(j).map_or(String::new(), |v| format_f64(*v)));
        }
        if let Some(d) = s.alpha {
            row.push(format_f64(d));
        }
        row.extend(s.beta2.iter().map(|b| format_f64(*b)));
        row.push(format_f64(s.sigma2));
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn save_draws(path: impl AsRef<Path>, draws: &PosteriorDraws) -> Result<()> {
    write_atomic(path, |w| write_draws(w, draws))
}

/// Reads draws written by [`write_draws`].
pub fn parse_draws<R: Read>(reader: R) -> Result<PosteriorDraws> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(k_col), Some(rho_col), Some(s2_col)) = (col("k"), col("rho"), col("sigma2")) else {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "draws file needs k, rho and sigma2 columns".into(),
        });
    };
    let xi_cols: Vec<usize> = (1..).map_while(|i| col(&format!("xi_{i}"))).collect();
    let beta_cols: Vec<usize> = (1..).map_while(|i| col(&format!("beta2_{i}"))).collect();
    let alpha_col = col("alpha");
    let mut draws = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = row + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j).unwrap_or("").parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("not a number: {:?}", rec.get(j).unwrap_or("")),
            })
        };
        let k: usize = rec
            .get(k_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse {
                line,
                column: k_col + 1,
                message: "order must be a non-negative integer".into(),
            })?;
        if k > xi_cols.len() + 1 {
            return Err(Error::Parse {
                line,
                column: k_col + 1,
                message: format!("order {k} needs {} lag-difference columns", k - 1),
            });
        }
        let xi = xi_cols[..k.saturating_sub(1)]
            .iter()
            .map(|&j| num(j))
            .collect::<Result<Vec<f64>>>()?;
        draws.push(GibbsState {
            k,
            rho_xi: RhoXiParams {
                rho: num(rho_col)?,
                xi,
            },
            beta2: DVector::from_vec(
                beta_cols
                    .iter()
                    .map(|&j| num(j))
                    .collect::<Result<Vec<f64>>>()?,
            ),
            alpha: alpha_col.map(num).transpose()?,
            sigma2: num(s2_col)?,
        });
    }
    Ok(PosteriorDraws {
        draws,
        burn_in: 0,
        thin: 1,
        seed: 0,
        acceptance_stats: Default::default(),
    })
}

pub fn load_draws(path: impl AsRef<Path>) -> Result<PosteriorDraws> {
    parse_draws(fs::File::open(path)?)
}

pub fn write_phi_posterior(w: &mut dyn Write, post: &PhiPosterior) -> std::io::Result<()> {
    writeln!(w, "phi,density")?;
    for (x, d) in post.grid.iter().zip(&post.density) {
        writeln!(w, "{},{}", format_f64(*x), format_f64(*d))?;
    }
    Ok(())
}

pub fn save_phi_posterior(path: impl AsRef<Path>, post: &PhiPosterior) -> Result<()> {
    write_atomic(path, |w| write_phi_posterior(w, post))
}

/// Flat `key=value` lines: `method`, `verdict`, `statistic`, `threshold`,
/// then `diag.<name>` for every diagnostic in key order.
pub fn write_result_kv(w: &mut dyn Write, r: &TestResult) -> std::io::Result<()> {
    writeln!(w, "method={}", r.method)?;
    writeln!(w, "verdict={}", r.verdict)?;
    writeln!(w, "statistic={}", format_f64(r.statistic))?;
    writeln!(w, "threshold={}", format_f64(r.threshold))?;
    for (k, v) in &r.diagnostics {
        writeln!(w, "diag.{k}={}", format_f64(*v))?;
    }
    Ok(())
}
