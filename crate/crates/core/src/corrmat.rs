//! Equal-time correlation matrices of normalized returns and the
//! distribution of their off-diagonal entries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rates::ReturnPanel;

pub const DEFAULT_BINS: usize = 80;
pub const MIN_BINS: usize = 10;
const BINARY_MAGIC: &[u8; 4] = b"FXCM";

const SYMMETRY_TOL: f64 = 1e-14;
const DIAGONAL_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("returns must be normalized before building a correlation matrix")]
    NotNormalized,
    #[error("return panel for base {0} has no rows")]
    Empty(String),
    #[error("correlation matrix invariant violated: {0}")]
    InvariantViolation(String),
    #[error("histogram needs at least {MIN_BINS} bins, got {0}")]
    TooFewBins(usize),
    #[error("malformed binary matrix: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    base: String,
    codes: Vec<String>,
    values: Matrix,
    samples: usize,
    rank_deficient: bool,
}

impl CorrelationMatrix {
    /// Wraps an externally built matrix after checking symmetry, unit
    /// diagonal, entry range and trace. `samples` is the number of time
    /// samples behind it (0 when unknown).
    pub fn from_values(
        base: impl Into<String>,
        codes: Vec<String>,
        mut values: Matrix,
        samples: usize,
    ) -> Result<Self, CorrError> {
        let m = codes.len();
        if values.rows() != m || values.cols() != m {
            return Err(CorrError::InvariantViolation(format!(
                "{m} codes for a {}x{} matrix",
                values.rows(),
                values.cols()
            )));
        }
        for i in 0..m {
            if (values[(i, i)] - 1.0).abs() > DIAGONAL_TOL {
                return Err(CorrError::InvariantViolation(format!(
                    "diagonal entry {i} is {}",
                    values[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(CorrError::InvariantViolation(format!(
                        "asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
            for j in 0..m {
                let v = values[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + RANGE_TOL {
                    return Err(CorrError::InvariantViolation(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                values[(i, j)] = values[(i, j)].clamp(-1.0, 1.0);
            }
        }
        let trace = values.trace();
        if (trace - m as f64).abs() > TRACE_TOL {
            return Err(CorrError::InvariantViolation(format!(
                "trace {trace} differs from {m}"
            )));
        }
        let rank_deficient = samples > 0 && samples <= m;
        Ok(Self {
            base: base.into(),
            codes,
            values,
            samples,
            rank_deficient,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.codes.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Set when there are no more samples than series, so the matrix is
    /// singular by construction.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.codes.iter().position(|c| c == a)?;
        let j = self.codes.iter().position(|c| c == b)?;
        Some(self.values[(i, j)])
    }

    /// Strictly lower-triangular entries, row by row.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in 0..i {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    /// CSV with a header row and column of codes; the corner cell holds the base.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![self.base.clone()];
        header.extend(self.codes.iter().cloned());
        out.write_record(&header).map_err(std::io::Error::other)?;
        for (i, c) in self.codes.iter().enumerate() {
            let mut rec = vec![c.clone()];
            rec.extend(self.values.row(i).iter().map(f64::to_string));
            out.write_record(&rec).map_err(std::io::Error::other)?;
        }
        out.flush()
    }

    /// Binary layout: `FXCM`, u32 m, u32 base length, base bytes, then m²
    /// row-major f64 values; all integers and floats little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.base.len() as u32).to_le_bytes())?;
        w.write_all(self.base.as_bytes())?;
        for v in self.values.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }
}

/// Reads the layout written by [`CorrelationMatrix::write_binary`],
/// returning the base code and the raw matrix.
pub fn read_binary<R: Read>(mut r: R) -> Result<(String, Matrix), CorrError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(CorrError::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let m = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let len = u32::from_le_bytes(word) as usize;
    let mut base = vec![0u8; len];
    r.read_exact(&mut base)?;
    let base = String::from_utf8(base).map_err(|e| CorrError::Format(e.to_string()))?;
    let mut data = Vec::with_capacity(m * m);
    let mut buf = [0u8; 8];
    for _ in 0..m * m {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok((base, Matrix::from_row_major(m, m, data)))
}

/// `C = (1/T) M Mᵀ` for the normalized return matrix `M`.
pub fn correlation_matrix(rp: &ReturnPanel) -> Result<CorrelationMatrix, CorrError> {
    if !rp.is_normalized() {
        return Err(CorrError::NotNormalized);
    }
    let m = rp.n_series();
    if m == 0 {
        return Err(CorrError::Empty(rp.base().to_string()));
    }
    let t = rp.n_samples();
    let rows = rp.returns();
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let c = dot / t as f64;
            values[(i, j)] = c;
            values[(j, i)] = c;
        }
    }
    let cm = CorrelationMatrix::from_values(rp.base(), rp.codes().to_vec(), values, t)?;
    if cm.rank_deficient {
        log::warn!(
            "base {}: {t} samples for {m} series, correlation matrix is rank deficient",
            rp.base()
        );
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagHistogram {
    pub base: String,
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Centre of the most populated bin.
    pub mode_bin: f64,
    pub count: usize,
}

impl OffDiagHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// `bin_center,density` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_center", "density"])
            .map_err(std::io::Error::other)?;
        for (c, d) in self.bin_centers().iter().zip(&self.density) {
            out.write_record([c.to_string(), d.to_string()])
                .map_err(std::io::Error::other)?;
        }
        out.flush()
    }
}

/// Density histogram of the strictly lower-triangular entries over uniform
/// bins on [-1, 1]. An empty sample yields zero density and NaN moments.
pub fn offdiag_histogram(
    cm: &CorrelationMatrix,
    bins: usize,
) -> Result<OffDiagHistogram, CorrError> {
    if bins < MIN_BINS {
        return Err(CorrError::TooFewBins(bins));
    }
    let width = 2.0 / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|k| -1.0 + k as f64 * width).collect();
    let entries = cm.off_diagonal();
    let mut counts = vec![0usize; bins];
    for &x in &entries {
        let k = (((x + 1.0) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1;
    }
    let n = entries.len();
    let density = counts
        .iter()
        .map(|&c| {
            if n == 0 {
                0.0
            } else {
                c as f64 / (n as f64 * width)
            }
        })
        .collect();
    let (mean, std_dev, mode_bin) = if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let (mean, sd) = crate::rates::mean_std(&entries);
        let top = counts
            .iter()
            .enumerate()
            .fold(0, |best, (k, &c)| if c > counts[best] { k } else { best });
        (mean, sd, -1.0 + (top as f64 + 0.5) * width)
    };
    Ok(OffDiagHistogram {
        base: cm.base().to_string(),
        bin_edges,
        density,
        mean,
        std_dev,
        mode_bin,
        count: n,
    })
}
