//! Raw quote loading, calendar synchronization and spike removal.
//!
//! Input files list one quote per row (`date,currency,price`), every price
//! expressed in units of a single quote currency. [`synchronize`] turns the
//! long table into a rectangular [`RatePanel`]; [`despike`] then repairs
//! isolated day-to-day jumps larger than a multiple of the series' return
//! standard deviation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input not found: {0}")]
    InputNotFound(PathBuf),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate quote for ({date}, {currency}) at line {line}")]
    DuplicateQuote {
        line: u64,
        date: NaiveDate,
        currency: String,
    },
    #[error("non-positive price {price} for ({date}, {currency}) at line {line}")]
    NonPositivePrice {
        line: u64,
        date: NaiveDate,
        currency: String,
        price: f64,
    },
    #[error("currency {currency} is quoted against itself at line {line}")]
    SelfQuote { line: u64, currency: String },
    #[error("quote table contains no rows")]
    NoData,
    #[error("series for {currency} has {len} quotes, fewer than the minimum {min}")]
    SeriesTooShort {
        currency: String,
        len: usize,
        min: usize,
    },
    #[error("date intersection has {len} dates, fewer than the minimum {min}")]
    EmptyIntersection { len: usize, min: usize },
    #[error("despiking replaced {fraction:.4} of cells, above the cap {cap}")]
    SpikeCapExceeded { fraction: f64, cap: f64 },
    #[error("panel needs at least {min} dates, has {len}")]
    PanelTooShort { len: usize, min: usize },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
}

/// One raw observation: price of `currency` in units of the quote currency.
#[derive(Debug, Clone, PartialEq)]
pub struct Quote {
    pub date: NaiveDate,
    pub currency: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawQuoteTable {
    pub quote_currency: String,
    pub rows: Vec<Quote>,
}

impl RawQuoteTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Currency codes in order of first appearance.
    pub fn currencies(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|q| seen.insert(q.currency.as_str()))
            .map(|q| q.currency.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    CarryForward,
    Intersect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub spike_sigma: f64,
    pub spike_fraction_cap: f64,
    pub max_despike_passes: usize,
    pub gap_policy: GapPolicy,
    pub min_series_length: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            spike_sigma: 5.0,
            spike_fraction_cap: 0.005,
            max_despike_passes: 3,
            gap_policy: GapPolicy::CarryForward,
            min_series_length: 3,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.spike_sigma.is_nan() || self.spike_sigma < 1.0 {
            return Err(IngestError::InvalidConfig(format!(
                "spike_sigma must be >= 1, got {}",
                self.spike_sigma
            )));
        }
        if !(self.spike_fraction_cap > 0.0 && self.spike_fraction_cap < 1.0) {
            return Err(IngestError::InvalidConfig(format!(
                "spike_fraction_cap must lie in (0, 1), got {}",
                self.spike_fraction_cap
            )));
        }
        if self.max_despike_passes == 0 {
            return Err(IngestError::InvalidConfig(
                "max_despike_passes must be positive".into(),
            ));
        }
        if self.min_series_length == 0 {
            return Err(IngestError::InvalidConfig(
                "min_series_length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A price replaced by [`despike`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DespikeRecord {
    pub currency: String,
    pub date: NaiveDate,
    pub original: f64,
    pub replacement: f64,
    pub pass: usize,
}

/// Rectangular, gap-free panel of prices against one quote currency.
///
/// Row `i` holds the price of `codes[i]` in units of `quote_currency`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePanel {
    codes: Vec<String>,
    quote_currency: String,
    dates: Vec<NaiveDate>,
    prices: Vec<Vec<f64>>,
    despike_log: Vec<DespikeRecord>,
}

impl RatePanel {
    pub fn new(
        codes: Vec<String>,
        quote_currency: impl Into<String>,
        dates: Vec<NaiveDate>,
        prices: Vec<Vec<f64>>,
    ) -> Result<Self, IngestError> {
        let quote_currency = quote_currency.into();
        if codes.len() != prices.len() {
            return Err(IngestError::InvalidPanel(format!(
                "{} codes but {} price rows",
                codes.len(),
                prices.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &codes {
            if c.is_empty() || !seen.insert(c.as_str()) {
                return Err(IngestError::InvalidPanel(format!(
                    "currency code {c:?} is empty or repeated"
                )));
            }
        }
        if seen.contains(quote_currency.as_str()) {
            return Err(IngestError::InvalidPanel(format!(
                "quote currency {quote_currency} also listed as a panel row"
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidPanel(
                "dates are not strictly increasing".into(),
            ));
        }
        for (c, row) in codes.iter().zip(&prices) {
            if row.len() != dates.len() {
                return Err(IngestError::InvalidPanel(format!(
                    "row {c} has {} prices for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                return Err(IngestError::InvalidPanel(format!(
                    "row {c} contains non-positive or non-finite price {p}"
                )));
            }
        }
        Ok(Self {
            codes,
            quote_currency,
            dates,
            prices,
            despike_log: Vec::new(),
        })
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn quote_currency(&self) -> &str {
        &self.quote_currency
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn despike_log(&self) -> &[DespikeRecord] {
        &self.despike_log
    }

    /// Number of listed currencies (the quote currency is not a row).
    pub fn n_currencies(&self) -> usize {
        self.codes.len()
    }

    /// Number of dates.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    /// All currencies of the basket: listed rows followed by the quote.
    pub fn universe(&self) -> Vec<String> {
        let mut all = self.codes.clone();
        all.push(self.quote_currency.clone());
        all
    }

    pub fn contains(&self, code: &str) -> bool {
        code == self.quote_currency || self.index_of(code).is_some()
    }

    /// Price series of any basket member in quote units (all ones for the quote).
    pub fn price_series(&self, code: &str) -> Option<Vec<f64>> {
        if code == self.quote_currency {
            Some(vec![1.0; self.len()])
        } else {
            self.index_of(code).map(|i| self.prices[i].clone())
        }
    }

    /// Returns the panel with one more listed currency.
    pub fn with_currency(
        &self,
        code: impl Into<String>,
        prices: Vec<f64>,
    ) -> Result<RatePanel, IngestError> {
        let mut codes = self.codes.clone();
        codes.push(code.into());
        let mut rows = self.prices.clone();
        rows.push(prices);
        let mut out = RatePanel::new(codes, self.quote_currency.clone(), self.dates.clone(), rows)?;
        out.despike_log = self.despike_log.clone();
        Ok(out)
    }

    /// Re-expresses every price in units of `new_quote`, a listed currency.
    /// The old quote currency becomes a listed row in `new_quote`'s position.
    pub fn repivot(&self, new_quote: &str) -> Result<RatePanel, IngestError> {
        if new_quote == self.quote_currency {
            return Ok(self.clone());
        }
        let k = self.index_of(new_quote).ok_or_else(|| {
            IngestError::InvalidPanel(format!("{new_quote} is not a panel currency"))
        })?;
        let pivot = &self.prices[k];
        let mut codes = self.codes.clone();
        codes[k] = self.quote_currency.clone();
        let prices = self
            .prices
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if i == k {
                    pivot.iter().map(|p| 1.0 / p).collect()
                } else {
                    row.iter().zip(pivot).map(|(p, q)| p / q).collect()
                }
            })
            .collect();
        RatePanel::new(codes, new_quote, self.dates.clone(), prices)
    }

    /// Restricts the basket to `subset` (which may include the quote
    /// currency). When the quote currency is not in the subset the panel is
    /// re-expressed in the first subset member.
    pub fn sub_basket(&self, subset: &[String]) -> Result<RatePanel, IngestError> {
        for c in subset {
            if !self.contains(c) {
                return Err(IngestError::InvalidPanel(format!(
                    "{c} is not a panel currency"
                )));
            }
        }
        let base = if subset.contains(&self.quote_currency) {
            self.clone()
        } else {
            match subset.first() {
                Some(first) => self.repivot(first)?,
                None => return Err(IngestError::InvalidPanel("empty subset".into())),
            }
        };
        let keep: Vec<usize> = base
            .codes
            .iter()
            .enumerate()
            .filter(|(_, c)| subset.contains(c))
            .map(|(i, _)| i)
            .collect();
        RatePanel::new(
            keep.iter().map(|&i| base.codes[i].clone()).collect(),
            base.quote_currency.clone(),
            base.dates.clone(),
            keep.iter().map(|&i| base.prices[i].clone()).collect(),
        )
    }

    /// Converts back to a long quote table.
    pub fn to_table(&self) -> RawQuoteTable {
        let mut rows = Vec::with_capacity(self.codes.len() * self.dates.len());
        for (t, d) in self.dates.iter().enumerate() {
            for (i, c) in self.codes.iter().enumerate() {
                rows.push(Quote {
                    date: *d,
                    currency: c.clone(),
                    price: self.prices[i][t],
                });
            }
        }
        RawQuoteTable {
            quote_currency: self.quote_currency.clone(),
            rows,
        }
    }

    /// Writes the wide layout: `date,<code>...`, one row per date.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), IngestError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.codes.iter().cloned());
        out.write_record(&header).map_err(csv_io)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(self.prices.iter().map(|row| row[t].to_string()));
            out.write_record(&rec).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the wide layout written by [`RatePanel::write_csv`].
    pub fn read_csv<R: Read>(r: R, quote_currency: &str) -> Result<RatePanel, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
        if headers.get(0) != Some("date") || headers.len() < 2 {
            return Err(IngestError::Parse {
                line: 1,
                message: "expected header `date,<code>...`".into(),
            });
        }
        let codes: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut prices = vec![Vec::new(); codes.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != codes.len() + 1 {
                return Err(IngestError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", codes.len() + 1, rec.len()),
                });
            }
            dates.push(parse_date(&rec[0], line)?);
            for (i, cell) in rec.iter().skip(1).enumerate() {
                prices[i].push(parse_price(cell, line)?);
            }
        }
        RatePanel::new(codes, quote_currency, dates, prices)
    }

    /// Writes the despike sidecar: `currency,date,original,replacement,pass`.
    pub fn write_despike_log<W: Write>(&self, w: W) -> Result<(), IngestError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["currency", "date", "original", "replacement", "pass"])
            .map_err(csv_io)?;
        for r in &self.despike_log {
            out.write_record([
                r.currency.clone(),
                r.date.format(DATE_FORMAT).to_string(),
                r.original.to_string(),
                r.replacement.to_string(),
                r.pass.to_string(),
            ])
            .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(e))
}

fn parse_err(line: u64, e: impl std::fmt::Display) -> IngestError {
    IngestError::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(s, DATE_FORMAT)
        .map_err(|e| parse_err(line, format!("bad date {s:?}: {e}")))
}

fn parse_price(s: &str, line: u64) -> Result<f64, IngestError> {
    let p: f64 = s
        .parse()
        .map_err(|e| parse_err(line, format!("bad price {s:?}: {e}")))?;
    if !p.is_finite() {
        return Err(parse_err(line, format!("non-finite price {s:?}")));
    }
    Ok(p)
}

/// Loads a long `date,currency,price` file.
pub fn load_raw(path: &Path, quote_currency: &str) -> Result<RawQuoteTable, IngestError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::InputNotFound(path.to_path_buf()),
        _ => IngestError::Io(e),
    })?;
    parse_raw(file, quote_currency)
}

/// Parses the long quote format from any reader.
pub fn parse_raw<R: Read>(r: R, quote_currency: &str) -> Result<RawQuoteTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers().map_err(|e| parse_err(1, e))?;
    if headers.iter().collect::<Vec<_>>() != ["date", "currency", "price"] {
        return Err(IngestError::Parse {
            line: 1,
            message: format!("expected header `date,currency,price`, found {headers:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let date = parse_date(&rec[0], line)?;
        let currency = rec[1].to_string();
        if currency.is_empty() {
            return Err(parse_err(line, "empty currency code"));
        }
        if currency == quote_currency {
            return Err(IngestError::SelfQuote { line, currency });
        }
        let price = parse_price(&rec[2], line)?;
        if price <= 0.0 {
            return Err(IngestError::NonPositivePrice {
                line,
                date,
                currency,
                price,
            });
        }
        if !seen.insert((date, currency.clone())) {
            return Err(IngestError::DuplicateQuote {
                line,
                date,
                currency,
            });
        }
        rows.push(Quote {
            date,
            currency,
            price,
        });
    }
    Ok(RawQuoteTable {
        quote_currency: quote_currency.to_string(),
        rows,
    })
}

/// Aligns all currencies on a common trading calendar.
pub fn synchronize(
    table: &RawQuoteTable,
    cfg: &PreprocessConfig,
) -> Result<RatePanel, IngestError> {
    cfg.validate()?;
    if table.is_empty() {
        return Err(IngestError::NoData);
    }
    let codes = table.currencies();
    let index: HashMap<&str, usize> = codes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut series: Vec<Vec<(NaiveDate, f64)>> = vec![Vec::new(); codes.len()];
    for q in &table.rows {
        series[index[q.currency.as_str()]].push((q.date, q.price));
    }
    for (c, s) in codes.iter().zip(series.iter_mut()) {
        if s.len() < cfg.min_series_length {
            return Err(IngestError::SeriesTooShort {
                currency: c.clone(),
                len: s.len(),
                min: cfg.min_series_length,
            });
        }
        s.sort_by_key(|(d, _)| *d);
    }

    let dates: Vec<NaiveDate> = match cfg.gap_policy {
        GapPolicy::CarryForward => {
            let start = series.iter().map(|s| s[0].0).max().expect("non-empty");
            series
                .iter()
                .flat_map(|s| s.iter().map(|(d, _)| *d))
                .filter(|d| *d >= start)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        }
        GapPolicy::Intersect => {
            let mut common: BTreeSet<NaiveDate> = series[0].iter().map(|(d, _)| *d).collect();
            for s in &series[1..] {
                let other: HashSet<NaiveDate> = s.iter().map(|(d, _)| *d).collect();
                common.retain(|d| other.contains(d));
            }
            if common.len() < cfg.min_series_length {
                return Err(IngestError::EmptyIntersection {
                    len: common.len(),
                    min: cfg.min_series_length,
                });
            }
            common.into_iter().collect()
        }
    };

    // Last observation carried forward; under `Intersect` every date is observed.
    let prices = series
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(dates.len());
            let mut k = 0;
            let mut last = None;
            for d in &dates {
                while k < s.len() && s[k].0 <= *d {
                    last = Some(s[k].1);
                    k += 1;
                }
                row.push(last.expect("panel starts at the latest first quote"));
            }
            row
        })
        .collect();
    RatePanel::new(codes, table.quote_currency.clone(), dates, prices)
}

/// Flags spike cells of one log-price series.
///
/// A return above the threshold marks its later price. When the following
/// return jumps back with the opposite sign it is the reversion leg of the
/// same outlier and is not flagged again. A large first return followed by a
/// normal one marks the first price instead.
fn flag_spikes(log_prices: &[f64], threshold: f64) -> Vec<usize> {
    let n = log_prices.len();
    let ret = |t: usize| log_prices[t] - log_prices[t - 1];
    let mut flagged = Vec::new();
    let mut t = 1;
    while t < n {
        let r = ret(t);
        if r.abs() > threshold {
            if t == 1 && n > 2 && ret(2).abs() <= threshold {
                flagged.push(0);
                t += 1;
                continue;
            }
            flagged.push(t);
            if t + 1 < n {
                let next = ret(t + 1);
                if next.abs() > threshold && next.signum() != r.signum() {
                    t += 2;
                    continue;
                }
            }
        }
        t += 1;
    }
    flagged
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Runs the despiking passes for one currency, returning the repaired
/// prices and the replacement records.
fn despike_series(
    code: &str,
    dates: &[NaiveDate],
    prices: &[f64],
    cfg: &PreprocessConfig,
) -> (Vec<f64>, Vec<DespikeRecord>) {
    let mut log_p: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let mut out = prices.to_vec();
    let mut records = Vec::new();
    for pass in 1..=cfg.max_despike_passes {
        let returns: Vec<f64> = log_p.windows(2).map(|w| w[1] - w[0]).collect();
        let sigma = sample_std(&returns);
        if sigma == 0.0 {
            break;
        }
        let flagged = flag_spikes(&log_p, cfg.spike_sigma * sigma);
        if flagged.is_empty() {
            break;
        }
        let is_spike: HashSet<usize> = flagged.iter().copied().collect();
        let mut repaired = log_p.clone();
        for &t in &flagged {
            let prev = (0..t).rev().find(|j| !is_spike.contains(j));
            let next = (t + 1..log_p.len()).find(|j| !is_spike.contains(j));
            let value = match (prev, next) {
                (Some(j), Some(k)) => {
                    log_p[j] + (log_p[k] - log_p[j]) * (t - j) as f64 / (k - j) as f64
                }
                (Some(j), None) => log_p[j],
                (None, Some(k)) => log_p[k],
                (None, None) => continue,
            };
            repaired[t] = value;
            let replacement = value.exp();
            records.push(DespikeRecord {
                currency: code.to_string(),
                date: dates[t],
                original: out[t],
                replacement,
                pass,
            });
            out[t] = replacement;
        }
        log_p = repaired;
    }
    (out, records)
}

/// Replaces day-to-day jumps larger than `spike_sigma` return standard
/// deviations by log-linear interpolation between the nearest clean
/// neighbours (a single neighbour is copied at the series boundary).
pub fn despike(panel: &RatePanel, cfg: &PreprocessConfig) -> Result<RatePanel, IngestError> {
    cfg.validate()?;
    if panel.len() < 3 {
        return Err(IngestError::PanelTooShort {
            len: panel.len(),
            min: 3,
        });
    }
    let mut out = panel.clone();
    let cells = (panel.n_currencies() * panel.len()) as f64;
    for (i, code) in panel.codes.iter().enumerate() {
        let (row, records) = despike_series(code, &panel.dates, &panel.prices[i], cfg);
        out.prices[i] = row;
        out.despike_log.extend(records);
        let fraction = out.despike_log.len() as f64 / cells;
        if fraction > cfg.spike_fraction_cap {
            // Finish the count so the reported fraction is order independent.
            let total = out.despike_log.len()
                + panel.codes[i + 1..]
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        despike_series(c, &panel.dates, &panel.prices[i + 1 + k], cfg)
                            .1
                            .len()
                    })
                    .sum::<usize>();
            return Err(IngestError::SpikeCapExceeded {
                fraction: total as f64 / cells,
                cap: cfg.spike_fraction_cap,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    #[test]
    fn loads_valid_rows() {
        let csv =
            "date,currency,price\n2001-03-05,CHF,0.61\n2001-03-05,EUR,0.92\n2001-03-06,CHF,0.62\n";
        let t = parse_raw(csv.as_bytes(), "USD").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.currencies(), vec!["CHF", "EUR"]);
    }

    #[test]
    fn rejects_zero_price() {
        let csv = "date,currency,price\n2001-03-05,CHF,0.0\n";
        assert!(matches!(
            parse_raw(csv.as_bytes(), "USD"),
            Err(IngestError::NonPositivePrice { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_duplicate_quote() {
        let csv = "date,currency,price\n2001-03-05,CHF,0.6\n2001-03-05,CHF,0.7\n";
        assert!(matches!(
            parse_raw(csv.as_bytes(), "USD"),
            Err(IngestError::DuplicateQuote { line: 3, .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "date,currency,price\n2001-03-05,CHF,0.6\n2001-13-05,CHF,0.7\n";
        match parse_raw(csv.as_bytes(), "USD") {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "date,currency,price\n2001-03-05,CHF,abc\n";
        assert!(matches!(
            parse_raw(csv.as_bytes(), "USD"),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_self_quote() {
        let csv = "date,currency,price\n2001-03-05,USD,1.0\n";
        assert!(matches!(
            parse_raw(csv.as_bytes(), "USD"),
            Err(IngestError::SelfQuote { .. })
        ));
    }

    fn gap_table() -> RawQuoteTable {
        // A on Mon/Tue/Thu, B on Mon..Thu.
        let mut rows = Vec::new();
        for (day, p) in [
            ("2001-03-05", 1.0),
            ("2001-03-06", 1.1),
            ("2001-03-08", 1.3),
        ] {
            rows.push(Quote {
                date: d(day),
                currency: "A".into(),
                price: p,
            });
        }
        for (day, p) in [
            ("2001-03-05", 2.0),
            ("2001-03-06", 2.1),
            ("2001-03-07", 2.2),
            ("2001-03-08", 2.3),
        ] {
            rows.push(Quote {
                date: d(day),
                currency: "B".into(),
                price: p,
            });
        }
        RawQuoteTable {
            quote_currency: "USD".into(),
            rows,
        }
    }

    #[test]
    fn carry_forward_fills_gap() {
        let p = synchronize(&gap_table(), &PreprocessConfig::default()).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.prices()[0], vec![1.0, 1.1, 1.1, 1.3]);
        assert_eq!(p.prices()[1], vec![2.0, 2.1, 2.2, 2.3]);
    }

    #[test]
    fn intersect_keeps_common_dates() {
        let cfg = PreprocessConfig {
            gap_policy: GapPolicy::Intersect,
            ..Default::default()
        };
        let p = synchronize(&gap_table(), &cfg).unwrap();
        assert_eq!(
            p.dates(),
            &[d("2001-03-05"), d("2001-03-06"), d("2001-03-08")]
        );
        assert_eq!(p.prices()[1], vec![2.0, 2.1, 2.3]);
    }

    #[test]
    fn identical_calendars_pass_through() {
        let mut rows = Vec::new();
        for (k, day) in ["2001-03-05", "2001-03-06", "2001-03-07"]
            .iter()
            .enumerate()
        {
            rows.push(Quote {
                date: d(day),
                currency: "A".into(),
                price: 1.0 + k as f64,
            });
            rows.push(Quote {
                date: d(day),
                currency: "B".into(),
                price: 5.0 - k as f64,
            });
        }
        let table = RawQuoteTable {
            quote_currency: "USD".into(),
            rows,
        };
        let p = synchronize(&table, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.prices()[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(p.prices()[1], vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn leading_dates_before_latest_first_quote_are_dropped() {
        let mut t = gap_table();
        t.rows
            .retain(|q| !(q.currency == "B" && q.date == d("2001-03-05")));
        let p = synchronize(&t, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.dates()[0], d("2001-03-06"));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn short_series_and_empty_intersection() {
        let cfg = PreprocessConfig {
            min_series_length: 4,
            ..Default::default()
        };
        assert!(matches!(
            synchronize(&gap_table(), &cfg),
            Err(IngestError::SeriesTooShort { ref currency, .. }) if currency == "A"
        ));
        let mut t = gap_table();
        t.rows
            .retain(|q| q.currency == "B" || q.date == d("2001-03-05"));
        t.rows.push(Quote {
            date: d("2001-03-09"),
            currency: "A".into(),
            price: 1.0,
        });
        t.rows.push(Quote {
            date: d("2001-03-10"),
            currency: "A".into(),
            price: 1.0,
        });
        let cfg = PreprocessConfig {
            gap_policy: GapPolicy::Intersect,
            min_series_length: 3,
            ..Default::default()
        };
        assert!(matches!(
            synchronize(&t, &cfg),
            Err(IngestError::EmptyIntersection { len: 1, min: 3 })
        ));
    }

    #[test]
    fn constant_series_is_not_despiked() {
        let dates: Vec<NaiveDate> = (0..10)
            .map(|k| d("2001-03-05") + chrono::Days::new(k))
            .collect();
        let p = RatePanel::new(vec!["A".into()], "USD", dates, vec![vec![2.5; 10]]).unwrap();
        let out = despike(&p, &PreprocessConfig::default()).unwrap();
        assert_eq!(out, p);
        assert!(out.despike_log().is_empty());
    }

    #[test]
    fn reversion_leg_is_not_flagged() {
        let lp = [0.0, 0.001, 0.5, 0.002, 0.0, 0.001];
        assert_eq!(flag_spikes(&lp, 0.1), vec![2]);
        // level shift: only the jump date is flagged
        let lp = [0.0, 0.001, 0.5, 0.501, 0.5, 0.501];
        assert_eq!(flag_spikes(&lp, 0.1), vec![2]);
        // outlier in the very first price
        let lp = [0.5, 0.0, 0.001, 0.0];
        assert_eq!(flag_spikes(&lp, 0.1), vec![0]);
        // outlier in the last price
        let lp = [0.0, 0.001, 0.0, 0.5];
        assert_eq!(flag_spikes(&lp, 0.1), vec![3]);
    }

    #[test]
    fn too_short_panel_is_rejected() {
        let p = RatePanel::new(
            vec!["A".into()],
            "USD",
            vec![d("2001-03-05"), d("2001-03-06")],
            vec![vec![1.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            despike(&p, &PreprocessConfig::default()),
            Err(IngestError::PanelTooShort { len: 2, .. })
        ));
    }

    #[test]
    fn repivot_and_sub_basket() {
        let dates = vec![d("2001-03-05"), d("2001-03-06")];
        let p = RatePanel::new(
            vec!["EUR".into(), "GBP".into()],
            "USD",
            dates,
            vec![vec![1.0, 1.1], vec![2.0, 2.2]],
        )
        .unwrap();
        let q = p.repivot("GBP").unwrap();
        assert_eq!(q.quote_currency(), "GBP");
        assert_eq!(q.codes(), &["EUR".to_string(), "USD".to_string()]);
        assert!((q.prices()[0][1] - 0.5).abs() < 1e-15);
        assert!((q.prices()[1][0] - 0.5).abs() < 1e-15);

        let s = p.sub_basket(&["USD".into(), "GBP".into()]).unwrap();
        assert_eq!(s.codes(), &["GBP".to_string()]);
        let s = p.sub_basket(&["GBP".into(), "EUR".into()]).unwrap();
        assert_eq!(s.quote_currency(), "GBP");
        assert_eq!(s.codes(), &["EUR".to_string()]);
    }

    #[test]
    fn wide_csv_round_trip() {
        let dates = vec![d("2001-03-05"), d("2001-03-06")];
        let p = RatePanel::new(
            vec!["EUR".into()],
            "USD",
            dates,
            vec![vec![0.1 + 0.2, 1.0 / 3.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = RatePanel::read_csv(buf.as_slice(), "USD").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn config_validation() {
        let bad = PreprocessConfig {
            spike_sigma: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PreprocessConfig {
            spike_fraction_cap: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(PreprocessConfig::default().validate().is_ok());
    }
}
