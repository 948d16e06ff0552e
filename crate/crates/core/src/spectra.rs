//! Eigendecomposition of correlation matrices, random-matrix bounds and
//! eigenvector localization.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrmat::CorrelationMatrix;
use crate::matrix::Matrix;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Eigenvalues closer than this are treated as degenerate when ordering.
pub const TIE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error(
        "Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})"
    )]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigenvalue sum {sum} differs from the trace {expected}")]
    TraceMismatch { sum: f64, expected: f64 },
}

/// Index of the largest-magnitude component; ties within `TIE_TOL` go to
/// the lowest index.
fn dominant_component(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter().position(|x| x.abs() >= max - TIE_TOL).unwrap_or(0)
}

/// Eigenpairs of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unit
/// eigenvectors as columns. Degenerate eigenvalues (closer than `TIE_TOL`)
/// are ordered by descending index of their eigenvector's dominant
/// component, and every eigenvector is signed so that its dominant
/// component is positive.
pub fn symmetric_eigen(input: &Matrix) -> Result<(Vec<f64>, Matrix), SpectraError> {
    if !input.is_square() {
        return Err(SpectraError::NotSquare(input.rows(), input.cols()));
    }
    if input.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(SpectraError::NonFinite);
    }
    let m = input.rows();
    let mut a = input.as_slice().to_vec();
    let mut v = Matrix::identity(m).as_slice().to_vec();
    let tol = 1e-12 * m as f64;

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    s += a[i * m + j] * a[i * m + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = m < 2 || off_norm(&a) < tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(SpectraError::NoConvergence {
                sweeps,
                off_norm: off_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..m - 1 {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..m {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    a[k * m + p] = np;
                    a[p * m + k] = np;
                    a[k * m + q] = nq;
                    a[q * m + k] = nq;
                }
                a[p * m + p] = app - t * apq;
                a[q * m + q] = aqq + t * apq;
                a[p * m + q] = 0.0;
                a[q * m + p] = 0.0;
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&a) < tol;
    }

    let vectors = Matrix::from_row_major(m, m, v);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|k| {
            let mut col = vectors.column(k);
            let d = dominant_component(&col);
            if col[d] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            (a[k * m + k], col)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Reorder runs of degenerate eigenvalues.
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && pairs[end].0 - pairs[end - 1].0 < TIE_TOL {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by_key(|(_, col)| std::cmp::Reverse(dominant_component(col)));
        }
        start = end;
    }

    let values = pairs.iter().map(|(l, _)| *l).collect();
    let mut out = Matrix::zeros(m, m);
    for (k, (_, col)) in pairs.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            out[(i, k)] = *x;
        }
    }
    Ok((values, out))
}

/// Inverse participation ratio `Σ v_j⁴` of a unit vector.
pub fn participation_ratio(v: &[f64]) -> f64 {
    v.iter().map(|x| x.powi(4)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub base: String,
    /// Currency codes labelling eigenvector components.
    pub codes: Vec<String>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
    pub ipr: Vec<f64>,
    /// Sum of the eigenvalues.
    pub trace_check: f64,
}

impl EigenSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// `index,eigenvalue,ipr` with 1-based ascending index.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "eigenvalue", "ipr"])
            .map_err(std::io::Error::other)?;
        for (k, (l, p)) in self.eigenvalues.iter().zip(&self.ipr).enumerate() {
            out.write_record([(k + 1).to_string(), l.to_string(), p.to_string()])
                .map_err(std::io::Error::other)?;
        }
        out.flush()
    }

    /// Wide eigenvector table: `code,v1,...,vm`, one row per currency.
    pub fn write_eigenvectors_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["code".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("v{k}")));
        out.write_record(&header).map_err(std::io::Error::other)?;
        for (i, c) in self.codes.iter().enumerate() {
            let mut rec = vec![c.clone()];
            rec.extend(self.eigenvectors.row(i).iter().map(f64::to_string));
            out.write_record(&rec).map_err(std::io::Error::other)?;
        }
        out.flush()
    }
}

/// Full eigendecomposition of a correlation matrix.
pub fn eigendecompose(cm: &CorrelationMatrix) -> Result<EigenSpectrum, SpectraError> {
    let (eigenvalues, eigenvectors) = symmetric_eigen(cm.values())?;
    let m = cm.dim();
    if let Some(&min) = eigenvalues.first() {
        if min < -PSD_TOL {
            return Err(SpectraError::NotPositiveSemidefinite(min));
        }
    }
    let trace_check: f64 = eigenvalues.iter().sum();
    if (trace_check - m as f64).abs() > TRACE_TOL {
        return Err(SpectraError::TraceMismatch {
            sum: trace_check,
            expected: m as f64,
        });
    }
    let ipr = (0..m)
        .map(|k| participation_ratio(&eigenvectors.column(k)))
        .collect();
    Ok(EigenSpectrum {
        base: cm.base().to_string(),
        codes: cm.codes().to_vec(),
        eigenvalues,
        eigenvectors,
        ipr,
        trace_check,
    })
}

/// IPR of eigenvector `k` (ascending order index).
pub fn ipr(spectrum: &EigenSpectrum, k: usize) -> f64 {
    participation_ratio(&spectrum.eigenvector(k))
}

/// Marchenko–Pastur edges for unit-variance noise and the number of
/// eigenvalues outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmtBounds {
    pub q: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub count_above: usize,
    pub count_below: usize,
}

impl RmtBounds {
    pub fn new(m: usize, samples: usize) -> Self {
        let ratio = (m as f64 / samples as f64).sqrt();
        Self {
            q: samples as f64 / m as f64,
            lambda_minus: (1.0 - ratio).powi(2),
            lambda_plus: (1.0 + ratio).powi(2),
            count_above: 0,
            count_below: 0,
        }
    }
}

pub fn rmt_bounds(spectrum: &EigenSpectrum, samples: usize) -> RmtBounds {
    let mut b = RmtBounds::new(spectrum.dim(), samples);
    b.count_above = spectrum
        .eigenvalues
        .iter()
        .filter(|&&l| l > b.lambda_plus)
        .count();
    b.count_below = spectrum
        .eigenvalues
        .iter()
        .filter(|&&l| l < b.lambda_minus)
        .count();
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collectivity {
    pub lambda_max: f64,
    /// `lambda_max / m`.
    pub trace_fraction: f64,
    /// `lambda_max` minus the second largest eigenvalue; zero when m = 1.
    pub gap: f64,
}

pub fn collectivity_summary(spectrum: &EigenSpectrum) -> Collectivity {
    let m = spectrum.dim();
    let lambda_max = spectrum.lambda_max();
    let gap = if m >= 2 {
        lambda_max - spectrum.eigenvalues[m - 2]
    } else {
        0.0
    };
    Collectivity {
        lambda_max,
        trace_fraction: lambda_max / m as f64,
        gap,
    }
}
