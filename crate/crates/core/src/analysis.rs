//! Per-base sweeps: the maximal-eigenvalue ladder, per-base reports and
//! sector sub-basket ladders.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrmat::{
    correlation_matrix, offdiag_histogram, CorrError, CorrelationMatrix, OffDiagHistogram,
};
use crate::ingest::{IngestError, RatePanel};
use crate::nullmodels::{fictitious_panel, NullError, NullSpec, FICTITIOUS_CODE};
use crate::rates::{log_returns, normalize_dropping, RatesError, ReturnPanel};
use crate::spectra::{
    collectivity_summary, eigendecompose, rmt_bounds, EigenSpectrum, RmtBounds, SpectraError,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Corr(#[from] CorrError),
    #[error("base {base}: {source}")]
    Spectra {
        base: String,
        #[source]
        source: SpectraError,
    },
    #[error(transparent)]
    Null(#[from] NullError),
    #[error(transparent)]
    Panel(#[from] IngestError),
    #[error("need at least 3 currencies, have {0}")]
    TooFewCurrencies(usize),
    #[error("sector needs at least 3 currencies, got {0}")]
    SubsetTooSmall(usize),
    #[error("base {0}: every return row has zero variance")]
    Collapsed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub base: String,
    pub lambda_max: f64,
    pub trace_fraction: f64,
    pub gap: f64,
    pub count_above_rmt: usize,
    pub m: usize,
    /// Rows dropped for zero variance.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omission {
    pub base: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    /// Sorted by descending `lambda_max` (ties by base code).
    pub entries: Vec<LadderEntry>,
    pub tau: usize,
    /// Return samples per series.
    pub samples: usize,
    pub includes_fictitious: bool,
    /// Bases without an entry and why.
    pub omitted: Vec<Omission>,
}

impl Ladder {
    pub fn entry(&self, base: &str) -> Option<&LadderEntry> {
        self.entries.iter().find(|e| e.base == base)
    }

    /// Zero-based position of `base` in the descending ladder.
    pub fn rank_of(&self, base: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.base == base)
    }

    pub fn bases(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.base.as_str()).collect()
    }

    /// `base,lambda_max,trace_fraction,gap,count_above_rmt,m`
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "base",
            "lambda_max",
            "trace_fraction",
            "gap",
            "count_above_rmt",
            "m",
        ])
        .map_err(std::io::Error::other)?;
        for e in &self.entries {
            out.write_record([
                e.base.clone(),
                e.lambda_max.to_string(),
                e.trace_fraction.to_string(),
                e.gap.to_string(),
                e.count_above_rmt.to_string(),
                e.m.to_string(),
            ])
            .map_err(std::io::Error::other)?;
        }
        out.flush()
    }
}

/// Everything computed for one base in one pipeline pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseReport {
    pub matrix: CorrelationMatrix,
    pub histogram: OffDiagHistogram,
    pub spectrum: EigenSpectrum,
    pub bounds: RmtBounds,
    pub excluded: Vec<String>,
}

/// Log returns in `base`, normalized with zero-variance rows dropped.
pub fn normalized_returns(
    panel: &RatePanel,
    base: &str,
    tau: usize,
) -> Result<(ReturnPanel, Vec<String>), AnalysisError> {
    let raw = log_returns(panel, base, tau)?;
    Ok(normalize_dropping(&raw))
}

fn spectrum_for(
    panel: &RatePanel,
    base: &str,
    tau: usize,
) -> Result<(CorrelationMatrix, EigenSpectrum, Vec<String>), AnalysisError> {
    let (rp, excluded) = normalized_returns(panel, base, tau)?;
    if rp.n_series() == 0 {
        return Err(AnalysisError::Collapsed(base.to_string()));
    }
    let cm = correlation_matrix(&rp)?;
    let spectrum = eigendecompose(&cm).map_err(|source| AnalysisError::Spectra {
        base: base.to_string(),
        source,
    })?;
    Ok((cm, spectrum, excluded))
}

pub fn per_base_report(
    panel: &RatePanel,
    base: &str,
    tau: usize,
    bins: usize,
) -> Result<BaseReport, AnalysisError> {
    let (matrix, spectrum, excluded) = spectrum_for(panel, base, tau)?;
    let histogram = offdiag_histogram(&matrix, bins)?;
    let bounds = rmt_bounds(&spectrum, matrix.samples());
    Ok(BaseReport {
        matrix,
        histogram,
        spectrum,
        bounds,
        excluded,
    })
}

fn ladder_entry(panel: &RatePanel, base: &str, tau: usize) -> Result<LadderEntry, AnalysisError> {
    let (cm, spectrum, excluded) = spectrum_for(panel, base, tau)?;
    let summary = collectivity_summary(&spectrum);
    let bounds = rmt_bounds(&spectrum, cm.samples());
    Ok(LadderEntry {
        base: base.to_string(),
        lambda_max: summary.lambda_max,
        trace_fraction: summary.trace_fraction,
        gap: summary.gap,
        count_above_rmt: bounds.count_above,
        m: cm.dim(),
        excluded,
    })
}

fn ladder_over(
    panel: &RatePanel,
    tau: usize,
    includes_fictitious: bool,
) -> Result<Ladder, AnalysisError> {
    let bases = panel.universe();
    if bases.len() < 3 {
        return Err(AnalysisError::TooFewCurrencies(bases.len()));
    }
    let samples = log_returns(panel, &bases[0], tau)?.n_samples();
    let results: Vec<Result<LadderEntry, AnalysisError>> = bases
        .par_iter()
        .map(|b| ladder_entry(panel, b, tau))
        .collect();

    let mut entries = Vec::with_capacity(bases.len());
    let mut omitted = Vec::new();
    for (base, r) in bases.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(AnalysisError::Collapsed(_)) => {
                log::warn!("ladder: omitting base {base}, all rows have zero variance");
                omitted.push(Omission {
                    base: base.clone(),
                    reason: "all return rows have zero variance".into(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    entries.sort_by(|a, b| {
        b.lambda_max
            .total_cmp(&a.lambda_max)
            .then_with(|| a.base.cmp(&b.base))
    });
    Ok(Ladder {
        entries,
        tau,
        samples,
        includes_fictitious,
        omitted,
    })
}

/// Ladder of the largest eigenvalue over every basket member used as base
/// (the quote currency included), optionally with the fictitious currency
/// generated from `seed`.
pub fn build_ladder(
    panel: &RatePanel,
    tau: usize,
    include_fict: bool,
    seed: u64,
) -> Result<Ladder, AnalysisError> {
    if include_fict {
        let with_fict = fictitious_panel(panel, &NullSpec::fictitious(seed))?;
        ladder_over(&with_fict, tau, true)
    } else {
        ladder_over(panel, tau, false)
    }
}

/// Ladder restricted to a sub-basket; bases and rates come from `subset` only.
pub fn sector_ladder(
    panel: &RatePanel,
    subset: &[String],
    tau: usize,
) -> Result<Ladder, AnalysisError> {
    let mut unique: Vec<String> = Vec::new();
    for c in subset {
        if !unique.contains(c) {
            unique.push(c.clone());
        }
    }
    if unique.len() < 3 {
        return Err(AnalysisError::SubsetTooSmall(unique.len()));
    }
    let sub = panel.sub_basket(&unique)?;
    ladder_over(&sub, tau, unique.iter().any(|c| c == FICTITIOUS_CODE))
}
