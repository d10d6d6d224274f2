//! File formats: kernel matrices (CSV and binary), paths, training data,
//! predictions, and the trained-model document.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{ModelParams, PosteriorCache, SpectralNet};
use crate::linalg::RealMatrix;
use crate::simulate::Path;
use crate::spectral::{FrequencyGrid, GridSpec};

pub const BINARY_MAGIC: &[u8; 4] = b"RNFF";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(",")
}

/// Header `x,x_0,…,x_{n−1}`, then one row per location led by its `x`.
pub fn write_kernel_csv<W: Write>(mut w: W, xs: &[f64], k: &RealMatrix) -> Result<()> {
    if k.shape() != (xs.len(), xs.len()) {
        return Err(Error::dim(format!(
            "{:?} kernel for {} locations",
            k.shape(),
            xs.len()
        )));
    }
    let mut header = String::from("x");
    for x in xs {
        header.push(',');
        header.push_str(&fmt_f64(*x));
    }
    writeln!(w, "{header}")?;
    for (i, x) in xs.iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(*x), join(k.row(i).iter().copied()))?;
    }
    Ok(())
}

pub fn read_kernel_csv<R: Read>(r: R) -> Result<(Vec<f64>, RealMatrix)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    let xs = header
        .iter()
        .skip(1)
        .map(|s| parse_field(s, 1))
        .collect::<Result<Vec<_>>>()?;
    let n = xs.len();
    let mut k = RealMatrix::zeros(n, n);
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if rows >= n || record.len() != n + 1 {
            return Err(Error::Parse(format!("line {line}: unexpected kernel row")));
        }
        for j in 0..n {
            k[(rows, j)] = parse_field(&record[j + 1], line)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!(
            "expected {n} kernel rows, found {rows}"
        )));
    }
    Ok((xs, k))
}

/// Magic `RNFF`, `u32` rows, `u32` cols, then row-major little-endian `f64`.
pub fn write_kernel_binary<W: Write>(mut w: W, k: &RealMatrix) -> Result<()> {
    let rows = u32::try_from(k.nrows()).map_err(|_| Error::invalid("matrix too large"))?;
    let cols = u32::try_from(k.ncols()).map_err(|_| Error::invalid("matrix too large"))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            w.write_all(&k[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_kernel_binary<R: Read>(mut r: R) -> Result<RealMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("missing RNFF magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u32::from_le_bytes(word) as usize;
    let mut k = RealMatrix::zeros(rows, cols);
    let mut buf = [0u8; 8];
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut buf)?;
            k[(i, j)] = f64::from_le_bytes(buf);
        }
    }
    Ok(k)
}

/// Long format: `path_id,x,z` (plus `z_im` for complex paths).
pub fn write_paths_csv<W: Write>(mut w: W, xs: &[f64], paths: &[Path]) -> Result<()> {
    let complex = paths.iter().any(|p| matches!(p, Path::Complex(_)));
    writeln!(
        w,
        "{}",
        if complex {
            "path_id,x,z,z_im"
        } else {
            "path_id,x,z"
        }
    )?;
    for (id, path) in paths.iter().enumerate() {
        if path.len() != xs.len() {
            return Err(Error::dim(format!(
                "path {id} has {} values for {} locations",
                path.len(),
                xs.len()
            )));
        }
        for (i, x) in xs.iter().enumerate() {
            match path {
                Path::Real(v) if complex => {
                    writeln!(w, "{id},{},{},{}", fmt_f64(*x), fmt_f64(v[i]), fmt_f64(0.0))?
                }
                Path::Real(v) => writeln!(w, "{id},{},{}", fmt_f64(*x), fmt_f64(v[i]))?,
                Path::Complex(v) => writeln!(
                    w,
                    "{id},{},{},{}",
                    fmt_f64(*x),
                    fmt_f64(v[i].re),
                    fmt_f64(v[i].im)
                )?,
            }
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse(format!("line {line}: {e}"))
}

fn parse_field(s: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse '{s}' as a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value '{s}'")));
    }
    Ok(v)
}

/// CSV with a header naming columns `x` and `z`.
pub fn read_training_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("line 1: missing column '{name}'")))
    };
    let (ix, iz) = (col("x")?, col("z")?);
    let mut xs = Vec::new();
    let mut z = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::Parse(format!("line {line}: missing field")))
        };
        xs.push(parse_field(field(ix)?, line)?);
        z.push(parse_field(field(iz)?, line)?);
    }
    Ok((xs, z))
}

pub fn write_training_csv<W: Write>(mut w: W, xs: &[f64], z: &[f64]) -> Result<()> {
    writeln!(w, "x,z")?;
    for (x, v) in xs.iter().zip(z) {
        writeln!(w, "{},{}", fmt_f64(*x), fmt_f64(*v))?;
    }
    Ok(())
}

/// Single-column `x` list, as used for test locations.
pub fn read_locations_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = reader.headers().map_err(csv_error)?.clone();
    let ix = header
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| Error::Parse("line 1: missing column 'x'".into()))?;
    let mut xs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        xs.push(parse_field(
            record
                .get(ix)
                .ok_or_else(|| Error::Parse(format!("line {line}: missing field")))?,
            line,
        )?);
    }
    Ok(xs)
}

pub fn write_predictions_csv<W: Write>(
    mut w: W,
    xs: &[f64],
    mean: &DVector<f64>,
    var: &[f64],
) -> Result<()> {
    if mean.len() != xs.len() || var.len() != xs.len() {
        return Err(Error::dim("prediction columns differ in length"));
    }
    writeln!(w, "x,mean,var")?;
    for i in 0..xs.len() {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(xs[i]),
            fmt_f64(mean[i]),
            fmt_f64(var[i])
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDocument {
    pub beta: Vec<f64>,
    /// Row-major `4r × 4r`.
    pub q: Vec<f64>,
}

/// Trained model on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub rank: usize,
    pub complex_output: bool,
    pub input_scale: f64,
    pub weights: Vec<f64>,
    pub log_gamma2: f64,
    pub log_sigma_noise2: f64,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorDocument>,
}

impl ModelDocument {
    pub fn from_params(params: &ModelParams, grid: &FrequencyGrid) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: params.net.layer_sizes.clone(),
            rank: params.net.rank,
            complex_output: params.net.complex_output,
            input_scale: params.net.input_scale,
            weights: params.net.params.clone(),
            log_gamma2: params.log_gamma2,
            log_sigma_noise2: params.log_sigma_noise2,
            grid: grid.spec(),
            posterior: None,
        }
    }

    pub fn from_cache(cache: &PosteriorCache) -> Result<Self> {
        let mut doc = Self::from_params(&cache.params, &cache.frequency_grid()?);
        doc.posterior = Some(PosteriorDocument {
            beta: cache.beta.iter().copied().collect(),
            q: cache.q.transpose().iter().copied().collect(),
        });
        Ok(doc)
    }

    pub fn params(&self) -> Result<ModelParams> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let net = SpectralNet {
            layer_sizes: self.layer_sizes.clone(),
            rank: self.rank,
            complex_output: self.complex_output,
            input_scale: self.input_scale,
            params: self.weights.clone(),
        };
        net.validate()?;
        Ok(ModelParams {
            net,
            log_gamma2: self.log_gamma2,
            log_sigma_noise2: self.log_sigma_noise2,
        })
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::from_spec(&self.grid)
    }

    pub fn cache(&self) -> Result<PosteriorCache> {
        let post = self
            .posterior
            .as_ref()
            .ok_or_else(|| Error::Parse("model has no posterior cache".into()))?;
        let p = 4 * self.rank;
        if post.beta.len() != p || post.q.len() != p * p {
            return Err(Error::Parse(format!(
                "posterior cache does not match rank {}",
                self.rank
            )));
        }
        Ok(PosteriorCache {
            beta: DVector::from_column_slice(&post.beta),
            q: RealMatrix::from_row_slice(p, p, &post.q),
            params: self.params()?,
            grid: self.grid,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let mut text = String::new();
        BufReader::new(File::open(path)?).read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}
