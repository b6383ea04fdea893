//! Gridded space-time data and its long-format CSV representation.
//!
//! Values are stored with `x` varying fastest, then `y`, then `t`, all
//! 0-based. The CSV form `x,y,t,value` uses 1-based coordinates. Missing
//! observations are `NaN` in memory and absent rows (or an empty `value`) on
//! disk.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Marginal scale of a field's values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margins {
    Raw,
    Gumbel,
    Frechet,
}

impl fmt::Display for Margins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Margins::Raw => "raw",
            Margins::Gumbel => "gumbel",
            Margins::Frechet => "frechet",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    n: usize,
    t_len: usize,
    values: Vec<f64>,
    margins: Margins,
}

impl SpaceTimeField {
    /// Wraps `values` laid out as `[(t * n + y) * n + x]`.
    ///
    /// `NaN` marks a missing value; infinities are rejected, as are
    /// non-positive values in a Fréchet-tagged field.
    pub fn new(n: usize, t_len: usize, values: Vec<f64>, margins: Margins) -> Result<Self> {
        if n < 2 || t_len == 0 {
            return Err(Error::InvalidGrid(format!(
                "field must be at least 2x2x1, got {n}x{n}x{t_len}"
            )));
        }
        if values.len() != n * n * t_len {
            return Err(Error::InvalidArgs(format!(
                "expected {} values for a {n}x{n}x{t_len} field, got {}",
                n * n * t_len,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_infinite()) {
            return Err(Error::InvalidArgs(format!("field contains non-finite value {v}")));
        }
        if margins == Margins::Frechet {
            if let Some(v) = values.iter().find(|v| **v <= 0.0) {
                return Err(Error::InvalidArgs(format!(
                    "Fréchet field contains non-positive value {v}"
                )));
            }
        }
        Ok(Self {
            n,
            t_len,
            values,
            margins,
        })
    }

    /// Builds a field by evaluating `f(x, y, t)` at every point (0-based).
    pub fn from_fn(
        n: usize,
        t_len: usize,
        margins: Margins,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n * t_len);
        for t in 0..t_len {
            for y in 0..n {
                for x in 0..n {
                    values.push(f(x, y, t));
                }
            }
        }
        Self::new(n, t_len, values, margins)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn margins(&self) -> Margins {
        self.margins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (t * self.n + y) * self.n + x
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.values[self.index(x, y, t)]
    }

    /// One time slice, `x` fastest.
    pub fn slice(&self, t: usize) -> &[f64] {
        let s = self.n * self.n;
        &self.values[t * s..(t + 1) * s]
    }

    /// Time series at site `(x, y)`.
    pub fn series(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.t_len).map(|t| self.get(x, y, t)).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Applies `f` to each site's time series in place and retags the margins.
    pub fn map_series(
        &self,
        margins: Margins,
        mut f: impl FnMut(usize, usize, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        let mut values = vec![f64::NAN; self.values.len()];
        for y in 0..self.n {
            for x in 0..self.n {
                let out = f(x, y, &self.series(x, y))?;
                if out.len() != self.t_len {
                    return Err(Error::LengthMismatch {
                        len: out.len(),
                        expected: self.t_len,
                    });
                }
                for (t, v) in out.into_iter().enumerate() {
                    values[self.index(x, y, t)] = v;
                }
            }
        }
        Self::new(self.n, self.t_len, values, margins)
    }

    /// Same values under a different margins tag (validated).
    pub fn with_margins(self, margins: Margins) -> Result<Self> {
        Self::new(self.n, self.t_len, self.values, margins)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "t", "value"])?;
        for t in 0..self.t_len {
            for y in 0..self.n {
                for x in 0..self.n {
                    let v = self.get(x, y, t);
                    if v.is_nan() {
                        continue;
                    }
                    wr.write_record(&[
                        (x + 1).to_string(),
                        (y + 1).to_string(),
                        (t + 1).to_string(),
                        format!("{v:?}"),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads long-format CSV. The grid side and length are taken from the
    /// largest coordinates present; cells without a row are missing.
    pub fn read_csv<R: Read>(r: R, margins: Margins) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: usize,
            y: usize,
            t: usize,
            value: Option<f64>,
        }
        let mut rows = Vec::new();
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        for rec in rd.deserialize::<Row>() {
            let row = rec?;
            if row.x == 0 || row.y == 0 || row.t == 0 {
                return Err(Error::Parse("coordinates are 1-based; found a 0".into()));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        let nx = rows.iter().map(|r| r.x).max().unwrap();
        let ny = rows.iter().map(|r| r.y).max().unwrap();
        if nx != ny {
            return Err(Error::InvalidGrid(format!("grid must be square, found {nx}x{ny}")));
        }
        let t_len = rows.iter().map(|r| r.t).max().unwrap();
        let n = nx;
        let mut values = vec![f64::NAN; n * n * t_len];
        let mut seen = vec![false; values.len()];
        for r in rows {
            let i = ((r.t - 1) * n + (r.y - 1)) * n + (r.x - 1);
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Parse(format!("duplicate row for ({}, {}, {})", r.x, r.y, r.t)));
            }
            values[i] = r.value.unwrap_or(f64::NAN);
        }
        Self::new(n, t_len, values, margins)
    }

    /// Writes `<stem>.csv` and the `<stem>.json` sidecar.
    pub fn save(&self, dir: &Path, stem: &str, meta: &FieldMeta) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let mut json = serde_json::to_string_pretty(meta)?;
        json.push('\n');
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    /// Reads a CSV, using the sidecar (same stem, `.json`) for the margins
    /// tag when one exists.
    pub fn load(csv_path: &Path, default_margins: Margins) -> Result<(Self, Option<FieldMeta>)> {
        let meta_path = csv_path.with_extension("json");
        let meta: Option<FieldMeta> = if meta_path.exists() {
            Some(serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?)
        } else {
            None
        };
        let margins = meta.as_ref().map_or(default_margins, |m| m.margins);
        let f = std::fs::File::open(csv_path)?;
        let field = Self::read_csv(std::io::BufReader::new(f), margins)?;
        if let Some(m) = &meta {
            if m.n != field.n || m.t_len != field.t_len {
                return Err(Error::Parse(format!(
                    "sidecar says {}x{}x{}, data is {}x{}x{}",
                    m.n, m.n, m.t_len, field.n, field.n, field.t_len
                )));
            }
        }
        Ok((field, meta))
    }

    pub fn meta(&self, model: Option<ModelSpec>, seed: Option<u64>) -> FieldMeta {
        FieldMeta {
            n: self.n,
            t_len: self.t_len,
            margins: self.margins,
            model,
            seed,
        }
    }
}

/// Sidecar metadata written next to a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub margins: Margins,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}
