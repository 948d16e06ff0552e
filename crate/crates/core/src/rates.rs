//! Log returns in an arbitrary base currency, base changes and
//! normalization.
//!
//! For base `a` and currency `i` the rate is `x_i^(a) = P_i / P_a`, where
//! `P` are prices in the panel's quote currency (the quote itself has
//! `P = 1`). Returns at lag `tau` use non-overlapping differences on the
//! panel grid, so a panel of `T_p` dates gives `(T_p - 1) / tau` samples.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{RatePanel, DATE_FORMAT};
use crate::rng::NoiseStream;

/// Rows whose standard deviation falls below this are treated as constant.
pub const SIGMA_MIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("unknown base currency {0}")]
    UnknownBase(String),
    #[error("lag {tau} leaves no return samples in a panel of {len} dates")]
    TauTooLarge { tau: usize, len: usize },
    #[error("lag must be positive")]
    InvalidTau,
    #[error("returns are already normalized")]
    AlreadyNormalized,
    #[error("zero variance in returns of {0}")]
    ZeroVariance(String),
    #[error("need at least 3 currencies, have {0}")]
    TooFewCurrencies(usize),
    #[error("invalid return panel: {0}")]
    InvalidPanel(String),
}

/// Log returns of `codes` expressed in `base`; one row per currency.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    base: String,
    codes: Vec<String>,
    returns: Vec<Vec<f64>>,
    tau: usize,
    normalized: bool,
    dates: Vec<NaiveDate>,
}

impl ReturnPanel {
    /// Builds a raw (not normalized) panel. `dates` may be empty for
    /// synthetic data; otherwise it labels each sample with its end date.
    pub fn new(
        base: impl Into<String>,
        codes: Vec<String>,
        returns: Vec<Vec<f64>>,
        tau: usize,
        dates: Vec<NaiveDate>,
    ) -> Result<Self, RatesError> {
        let base = base.into();
        if codes.len() != returns.len() {
            return Err(RatesError::InvalidPanel(format!(
                "{} codes but {} rows",
                codes.len(),
                returns.len()
            )));
        }
        if codes.contains(&base) {
            return Err(RatesError::InvalidPanel(format!(
                "base {base} listed as a row"
            )));
        }
        let t = returns.first().map_or(0, Vec::len);
        if returns.iter().any(|r| r.len() != t) {
            return Err(RatesError::InvalidPanel("ragged return rows".into()));
        }
        if !dates.is_empty() && dates.len() != t {
            return Err(RatesError::InvalidPanel(format!(
                "{} dates for {t} samples",
                dates.len()
            )));
        }
        if tau == 0 {
            return Err(RatesError::InvalidTau);
        }
        Ok(Self {
            base,
            codes,
            returns,
            tau,
            normalized: false,
            dates,
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn returns(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn row(&self, code: &str) -> Option<&[f64]> {
        self.index_of(code).map(|i| self.returns[i].as_slice())
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Number of series (rows).
    pub fn n_series(&self) -> usize {
        self.codes.len()
    }

    /// Number of samples per series.
    pub fn n_samples(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    /// Keeps samples `range` of every row.
    pub fn truncated(&self, range: std::ops::Range<usize>) -> ReturnPanel {
        let mut out = self.clone();
        out.returns = self
            .returns
            .iter()
            .map(|r| r[range.clone()].to_vec())
            .collect();
        if !self.dates.is_empty() {
            out.dates = self.dates[range].to_vec();
        }
        out
    }

    /// Reorders rows: row `k` of the result is row `order[k]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> ReturnPanel {
        let mut out = self.clone();
        out.codes = order.iter().map(|&i| self.codes[i].clone()).collect();
        out.returns = order.iter().map(|&i| self.returns[i].clone()).collect();
        out
    }

    /// Drops the listed rows.
    pub fn without(&self, drop: &[String]) -> ReturnPanel {
        let keep: Vec<usize> = (0..self.codes.len())
            .filter(|&i| !drop.contains(&self.codes[i]))
            .collect();
        self.reordered(&keep)
    }

    /// Wide CSV: `date,<code>...`. Synthetic panels without dates use the
    /// sample index in the first column.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.codes.iter().cloned());
        out.write_record(&header).map_err(std::io::Error::other)?;
        for t in 0..self.n_samples() {
            let label = self
                .dates
                .get(t)
                .map_or_else(|| t.to_string(), |d| d.format(DATE_FORMAT).to_string());
            let mut rec = vec![label];
            rec.extend(self.returns.iter().map(|r| r[t].to_string()));
            out.write_record(&rec).map_err(std::io::Error::other)?;
        }
        out.flush()
    }
}

/// Sample grid for non-overlapping lag-`tau` differences.
fn sample_points(len: usize, tau: usize) -> Result<Vec<usize>, RatesError> {
    if tau == 0 {
        return Err(RatesError::InvalidTau);
    }
    if len == 0 || tau >= len {
        return Err(RatesError::TauTooLarge { tau, len });
    }
    Ok((0..len).step_by(tau).collect())
}

/// Log returns of every basket member other than `base`, expressed in `base`.
///
/// Rows follow the panel's listed currencies, then the quote currency,
/// skipping `base`.
pub fn log_returns(panel: &RatePanel, base: &str, tau: usize) -> Result<ReturnPanel, RatesError> {
    if !panel.contains(base) {
        return Err(RatesError::UnknownBase(base.to_string()));
    }
    let points = sample_points(panel.len(), tau)?;
    let base_prices = panel.price_series(base).expect("base checked");
    let codes: Vec<String> = panel.universe().into_iter().filter(|c| c != base).collect();
    let returns = codes
        .iter()
        .map(|c| {
            let prices = panel.price_series(c).expect("code from universe");
            let log_rate: Vec<f64> = points
                .iter()
                .map(|&t| (prices[t] / base_prices[t]).ln())
                .collect();
            log_rate.windows(2).map(|w| w[1] - w[0]).collect()
        })
        .collect();
    let dates = points[1..].iter().map(|&t| panel.dates()[t]).collect();
    ReturnPanel::new(base, codes, returns, tau, dates)
}

/// Re-expresses raw returns in `new_base`, one of the panel's rows.
///
/// Uses `G_i^(new) = G_i^(old) - G_new^(old)`; the old base takes the
/// new base's row position with returns `-G_new^(old)`. Rebasing to the
/// current base returns the panel unchanged.
pub fn rebase(rp: &ReturnPanel, new_base: &str) -> Result<ReturnPanel, RatesError> {
    if rp.normalized {
        return Err(RatesError::AlreadyNormalized);
    }
    if new_base == rp.base {
        return Ok(rp.clone());
    }
    let k = rp
        .index_of(new_base)
        .ok_or_else(|| RatesError::UnknownBase(new_base.to_string()))?;
    let pivot = &rp.returns[k];
    let returns = rp
        .returns
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if i == k {
                pivot.iter().map(|g| -g).collect()
            } else {
                row.iter().zip(pivot).map(|(g, p)| g - p).collect()
            }
        })
        .collect();
    let mut codes = rp.codes.clone();
    codes[k] = rp.base.clone();
    Ok(ReturnPanel {
        base: new_base.to_string(),
        codes,
        returns,
        tau: rp.tau,
        normalized: false,
        dates: rp.dates.clone(),
    })
}

/// Mean and population (1/T) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardize(row: &[f64]) -> Option<Vec<f64>> {
    let (mean, sd) = mean_std(row);
    if sd.is_nan() || sd <= SIGMA_MIN {
        return None;
    }
    Some(row.iter().map(|x| (x - mean) / sd).collect())
}

/// Centres every row and scales it to unit 1/T standard deviation.
pub fn normalize(rp: &ReturnPanel) -> Result<ReturnPanel, RatesError> {
    let returns = rp
        .codes
        .iter()
        .zip(&rp.returns)
        .map(|(c, row)| standardize(row).ok_or_else(|| RatesError::ZeroVariance(c.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReturnPanel {
        returns,
        normalized: true,
        ..rp.clone()
    })
}

/// Like [`normalize`] but drops zero-variance rows, returning their codes.
pub fn normalize_dropping(rp: &ReturnPanel) -> (ReturnPanel, Vec<String>) {
    let mut excluded = Vec::new();
    let mut codes = Vec::new();
    let mut returns = Vec::new();
    for (c, row) in rp.codes.iter().zip(&rp.returns) {
        match standardize(row) {
            Some(g) => {
                codes.push(c.clone());
                returns.push(g);
            }
            None => {
                log::warn!("base {}: excluding {c} (zero variance)", rp.base);
                excluded.push(c.clone());
            }
        }
    }
    let out = ReturnPanel {
        codes,
        returns,
        normalized: true,
        ..rp.clone()
    };
    (out, excluded)
}

/// Source of log cross rates `ln x_i^(a)(t)` over a fixed basket.
pub trait CrossRates {
    fn universe(&self) -> Vec<String>;
    fn n_dates(&self) -> usize;
    /// `ln` of the price of currency `i` in units of currency `a` at date `t`.
    fn log_rate(&self, a: usize, i: usize, t: usize) -> f64;
}

impl CrossRates for RatePanel {
    fn universe(&self) -> Vec<String> {
        RatePanel::universe(self)
    }

    fn n_dates(&self) -> usize {
        self.len()
    }

    fn log_rate(&self, a: usize, i: usize, t: usize) -> f64 {
        let n = self.n_currencies();
        let price = |k: usize| if k == n { 1.0 } else { self.prices()[k][t] };
        (price(i) / price(a)).ln()
    }
}

/// Explicit table of every ordered cross rate, for checking externally
/// supplied quotes that need not obey the arbitrage identities.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossRateTable {
    codes: Vec<String>,
    n_dates: usize,
    // [a][i][t] flattened
    log_rates: Vec<f64>,
}

impl CrossRateTable {
    pub fn from_panel(panel: &RatePanel) -> Self {
        let codes = panel.universe();
        let n = codes.len();
        let t_len = panel.len();
        let mut log_rates = Vec::with_capacity(n * n * t_len);
        for a in 0..n {
            for i in 0..n {
                for t in 0..t_len {
                    log_rates.push(panel.log_rate(a, i, t));
                }
            }
        }
        Self {
            codes,
            n_dates: t_len,
            log_rates,
        }
    }

    fn offset(&self, a: usize, i: usize, t: usize) -> usize {
        let n = self.codes.len();
        (a * n + i) * self.n_dates + t
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    /// Overwrites the rate of `currency` in units of `base` at date `t`.
    pub fn set_rate(&mut self, base: &str, currency: &str, t: usize, rate: f64) {
        let a = self.index_of(base).expect("known base");
        let i = self.index_of(currency).expect("known currency");
        let k = self.offset(a, i, t);
        self.log_rates[k] = rate.ln();
    }

    pub fn rate(&self, base: &str, currency: &str, t: usize) -> f64 {
        let a = self.index_of(base).expect("known base");
        let i = self.index_of(currency).expect("known currency");
        self.log_rates[self.offset(a, i, t)].exp()
    }
}

impl CrossRates for CrossRateTable {
    fn universe(&self) -> Vec<String> {
        self.codes.clone()
    }

    fn n_dates(&self) -> usize {
        self.n_dates
    }

    fn log_rate(&self, a: usize, i: usize, t: usize) -> f64 {
        self.log_rates[self.offset(a, i, t)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseChangeReport {
    pub max_inverse_residual: f64,
    pub max_triangle_residual: f64,
    /// `(a, i, b)` with the largest triangle residual.
    pub worst_triple: (String, String, String),
}

/// Checks the inverse and triangle identities on lag-`tau` log returns.
///
/// When `sample_triples` covers every ordered triple of distinct currencies
/// all of them are checked; otherwise triples are drawn from a stream
/// seeded with `seed`.
pub fn verify_constraints<S: CrossRates + ?Sized>(
    source: &S,
    tau: usize,
    sample_triples: usize,
    seed: u64,
) -> Result<BaseChangeReport, RatesError> {
    let codes = source.universe();
    let n = codes.len();
    if n < 3 {
        return Err(RatesError::TooFewCurrencies(n));
    }
    let points = sample_points(source.n_dates(), tau)?;
    let g = |a: usize, i: usize, k: usize| {
        source.log_rate(a, i, points[k + 1]) - source.log_rate(a, i, points[k])
    };

    let all = n * (n - 1) * (n - 2);
    let triples: Vec<(usize, usize, usize)> = if sample_triples >= all {
        let mut v = Vec::with_capacity(all);
        for a in 0..n {
            for i in (0..n).filter(|&i| i != a) {
                for b in (0..n).filter(|&b| b != a && b != i) {
                    v.push((a, i, b));
                }
            }
        }
        v
    } else {
        let mut rng = NoiseStream::gaussian(seed);
        (0..sample_triples)
            .map(|_| loop {
                let a = rng.next_index(n);
                let i = rng.next_index(n);
                let b = rng.next_index(n);
                if a != i && i != b && a != b {
                    break (a, i, b);
                }
            })
            .collect()
    };

    let mut max_inv = 0.0f64;
    let mut max_tri = 0.0f64;
    let mut worst = triples[0];
    for &(a, i, b) in &triples {
        for k in 0..points.len() - 1 {
            let (gai, gib, gba) = (g(a, i, k), g(i, b, k), g(b, a, k));
            let inv = [(gai, g(i, a, k)), (gib, g(b, i, k)), (gba, g(a, b, k))]
                .iter()
                .map(|(x, y)| (x + y).abs())
                .fold(0.0, f64::max);
            max_inv = max_inv.max(inv);
            let tri = (gai + gib + gba).abs();
            if tri > max_tri {
                max_tri = tri;
                worst = (a, i, b);
            }
        }
    }
    Ok(BaseChangeReport {
        max_inverse_residual: max_inv,
        max_triangle_residual: max_tri,
        worst_triple: (
            codes[worst.0].clone(),
            codes[worst.1].clone(),
            codes[worst.2].clone(),
        ),
    })
}
