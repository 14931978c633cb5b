//! File formats: dataset CSV ingestion, per-chain draw files, flat
//! key-value config files, and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::basis::BetaWeights;
use crate::error::{ComireError, Result};
use crate::gibbs::{PosteriorDraws, RetainedDraw};
use crate::model::{Dataset, ExtremalHigh, ExtremalLow, ParamState};

/// Ingestion bookkeeping for the manifest and warnings.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_filtered: usize,
    pub extra_columns: Vec<String>,
}

/// Read a dataset CSV with mandatory `x` and `y` columns.
///
/// Extra columns are ignored (reported back for a warning); non-numeric
/// cells and negative doses are errors naming the offending row. Rows with
/// responses above `max_y` are dropped when a ceiling is given.
pub fn read_dataset(path: &Path, max_y: Option<f64>) -> Result<(Dataset, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ComireError::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| ComireError::Data(format!("cannot read header: {e}")))?
        .clone();
    let mut x_col = None;
    let mut y_col = None;
    let mut extra = Vec::new();
    for (k, name) in headers.iter().enumerate() {
        match name {
            "x" => x_col = Some(k),
            "y" => y_col = Some(k),
            other => extra.push(other.to_string()),
        }
    }
    let x_col = x_col.ok_or_else(|| {
        ComireError::Data(format!("missing `x` column in {}", path.display()))
    })?;
    let y_col = y_col.ok_or_else(|| {
        ComireError::Data(format!("missing `y` column in {}", path.display()))
    })?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut report = IngestReport {
        extra_columns: extra,
        ..Default::default()
    };
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header line
        let record =
            record.map_err(|e| ComireError::Data(format!("row {row}: malformed record: {e}")))?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let cell = record.get(col).ok_or_else(|| {
                ComireError::Data(format!("row {row}: missing `{name}` value"))
            })?;
            cell.parse::<f64>().map_err(|_| {
                ComireError::Data(format!("row {row}: non-numeric `{name}` value `{cell}`"))
            })
        };
        let x = parse(x_col, "x")?;
        let y = parse(y_col, "y")?;
        if !x.is_finite() || x < 0.0 {
            return Err(ComireError::Data(format!(
                "row {row}: dose must be finite and nonnegative (got {x})"
            )));
        }
        if !y.is_finite() {
            return Err(ComireError::Data(format!(
                "row {row}: response must be finite (got {y})"
            )));
        }
        report.rows_read += 1;
        if let Some(ceiling) = max_y {
            if y > ceiling {
                report.rows_filtered += 1;
                continue;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((Dataset::new(xs, ys)?, report))
}

/// Write a dataset in the standard `x,y` schema.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::from("x,y\n");
    for (x, y) in data.x().iter().zip(data.y()) {
        writeln!(out, "{x},{y}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the retained draws of one chain: one row per retained iteration,
/// columns `iteration, w_1..w_J, nu0_1..nu0_H, mu0_1..mu0_H,
/// tau0_1..tau0_H, mu_inf, tau_inf`.
pub fn write_draws(path: &Path, draws: &PosteriorDraws, chain_id: usize) -> Result<()> {
    let (h, j) = (draws.h(), draws.j());
    let mut out = String::from("iteration");
    for k in 1..=j {
        write!(out, ",w_{k}").expect("string write");
    }
    for k in 1..=h {
        write!(out, ",nu0_{k}").expect("string write");
    }
    for k in 1..=h {
        write!(out, ",mu0_{k}").expect("string write");
    }
    for k in 1..=h {
        write!(out, ",tau0_{k}").expect("string write");
    }
    out.push_str(",mu_inf,tau_inf\n");

    for draw in draws.draws().iter().filter(|d| d.chain_id == chain_id) {
        write!(out, "{}", draw.iteration).expect("string write");
        for v in PosteriorDraws::scalar_row(&draw.state) {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read one or more per-chain draw files back into a merged collection.
/// The chain id is taken from each file's position in the list.
pub fn read_draws(paths: &[std::path::PathBuf]) -> Result<PosteriorDraws> {
    if paths.is_empty() {
        return Err(ComireError::Usage("no draw files supplied".into()));
    }
    let mut all = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (chain_id, path) in paths.iter().enumerate() {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| ComireError::Data(format!("cannot open {}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| ComireError::Data(format!("cannot read header: {e}")))?
            .clone();
        let j = headers.iter().filter(|h| h.starts_with("w_")).count();
        let h = headers.iter().filter(|h| h.starts_with("nu0_")).count();
        if j == 0 || h == 0 {
            return Err(ComireError::Data(format!(
                "{} does not look like a draws file (no w_/nu0_ columns)",
                path.display()
            )));
        }
        if let Some(d) = dims {
            if d != (h, j) {
                return Err(ComireError::Data(format!(
                    "{} has dimensions H={h}, J={j} but earlier files had H={}, J={}",
                    path.display(),
                    d.0,
                    d.1
                )));
            }
        } else {
            dims = Some((h, j));
        }
        let expected = 1 + j + 3 * h + 2;
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 2;
            let record = record
                .map_err(|e| ComireError::Data(format!("row {row}: malformed record: {e}")))?;
            if record.len() != expected {
                return Err(ComireError::Data(format!(
                    "row {row}: expected {expected} columns, found {}",
                    record.len()
                )));
            }
            let mut vals = Vec::with_capacity(expected);
            for cell in record.iter() {
                vals.push(cell.parse::<f64>().map_err(|_| {
                    ComireError::Data(format!("row {row}: non-numeric cell `{cell}`"))
                })?);
            }
            let iteration = vals[0] as usize;
            let mut cursor = 1;
            let w = vals[cursor..cursor + j].to_vec();
            cursor += j;
            let nu0 = vals[cursor..cursor + h].to_vec();
            cursor += h;
            let mu0 = vals[cursor..cursor + h].to_vec();
            cursor += h;
            let tau0 = vals[cursor..cursor + h].to_vec();
            cursor += h;
            let state = ParamState::new(
                ExtremalLow::new(nu0, mu0, tau0)?,
                ExtremalHigh::new(vals[cursor], vals[cursor + 1])?,
                BetaWeights::new(w)?,
            )?;
            all.push(RetainedDraw {
                chain_id,
                iteration,
                state,
            });
        }
    }
    let (h, j) = dims.expect("at least one file");
    if all.is_empty() {
        return Err(ComireError::Data("draw files contain no rows".into()));
    }
    Ok(PosteriorDraws::from_draws(all, h, j))
}

/// Flat key-value run manifest; sorted keys make the file deterministic.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| ComireError::Data(format!("manifest is missing `{key}`")))?
            .parse()
            .map_err(|_| ComireError::Data(format!("manifest `{key}` is not numeric")))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .ok_or_else(|| ComireError::Data(format!("manifest is missing `{key}`")))?
            .parse()
            .map_err(|_| ComireError::Data(format!("manifest `{key}` is not an integer")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ComireError::Data(format!("cannot read {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ComireError::Data(format!("manifest line without `=`: `{line}`"))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }
}

/// SHA-256 digest of a file, hex-encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// User-editable configuration overrides, parsed from flat key-value text.
/// Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub h: Option<usize>,
    pub inner_knots: Option<usize>,
    pub degree: Option<usize>,
    /// Symmetric Dirichlet mass per component for the mixture weights.
    pub alpha: Option<f64>,
    /// Symmetric Dirichlet mass per basis function.
    pub eta: Option<f64>,
    pub a_tau: Option<f64>,
    pub b_tau: Option<f64>,
    pub prior_mean: Option<f64>,
    pub kappa: Option<f64>,
    pub dose_max: Option<f64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ComireError::Config(format!(
                    "config line {} has no `=`: `{line}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_num = |kind: &str| {
                ComireError::Config(format!(
                    "config line {}: `{key}` expects {kind} (got `{value}`)",
                    lineno + 1
                ))
            };
            match key {
                "h" => cfg.h = Some(value.parse().map_err(|_| bad_num("an integer"))?),
                "inner_knots" => {
                    cfg.inner_knots = Some(value.parse().map_err(|_| bad_num("an integer"))?)
                }
                "degree" => cfg.degree = Some(value.parse().map_err(|_| bad_num("an integer"))?),
                "alpha" => cfg.alpha = Some(value.parse().map_err(|_| bad_num("a number"))?),
                "eta" => cfg.eta = Some(value.parse().map_err(|_| bad_num("a number"))?),
                "a_tau" => cfg.a_tau = Some(value.parse().map_err(|_| bad_num("a number"))?),
                "b_tau" => cfg.b_tau = Some(value.parse().map_err(|_| bad_num("a number"))?),
                "prior_mean" => {
                    cfg.prior_mean = Some(value.parse().map_err(|_| bad_num("a number"))?)
                }
                "kappa" => cfg.kappa = Some(value.parse().map_err(|_| bad_num("a number"))?),
                "dose_max" => {
                    cfg.dose_max = Some(value.parse().map_err(|_| bad_num("a number"))?)
                }
                "iterations" => {
                    cfg.iterations = Some(value.parse().map_err(|_| bad_num("an integer"))?)
                }
                "burn_in" => {
                    cfg.burn_in = Some(value.parse().map_err(|_| bad_num("an integer"))?)
                }
                "thin" => cfg.thin = Some(value.parse().map_err(|_| bad_num("an integer"))?),
                "chains" => cfg.chains = Some(value.parse().map_err(|_| bad_num("an integer"))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad_num("an integer"))?),
                unknown => {
                    return Err(ComireError::Config(format!(
                        "unknown config key `{unknown}` on line {}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ComireError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
