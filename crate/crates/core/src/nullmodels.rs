//! Null-hypothesis and synthetic panels.
//!
//! * [`fictitious_panel`] appends a currency `FIC` whose rate against the
//!   quote currency is pure noise, so every real/FIC rate is the product of
//!   the real/quote rate and the noise path.
//! * [`random_panel`] replaces all series with i.i.d. noise.
//! * [`one_factor_panel`] and [`dominant_world_panel`] build synthetic
//!   worlds with known correlation structure.
//!
//! All draws come from [`NoiseStream`]; the order of draws is fixed and
//! documented on each generator.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestError, RatePanel};
use crate::rates::{mean_std, RatesError, ReturnPanel};
use crate::rng::{Marginal, NoiseStream};

pub const FICTITIOUS_CODE: &str = "FIC";
pub const RANDOM_BASE: &str = "RND";
pub const SYNTHETIC_QUOTE: &str = "Q";
pub const DOMINANT_CODE: &str = "DOM";
pub const EXTREME_CODE: &str = "EXT";
/// Daily return scale of the synthetic price worlds.
pub const SYNTHETIC_DAILY_VOL: f64 = 0.005;

#[derive(Debug, Error)]
pub enum NullError {
    #[error("invalid null spec: {0}")]
    InvalidSpec(String),
    #[error("panel already contains a currency named {0}")]
    DuplicateCode(String),
    #[error(transparent)]
    Panel(#[from] IngestError),
    #[error(transparent)]
    Rates(#[from] RatesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    Fictitious,
    Random,
    OneFactor,
}

impl FromStr for NullKind {
    type Err = NullError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "fictitious" | "fict" => Ok(Self::Fictitious),
            "random" => Ok(Self::Random),
            "one_factor" => Ok(Self::OneFactor),
            other => Err(NullError::InvalidSpec(format!(
                "unknown null kind {other:?}"
            ))),
        }
    }
}

impl fmt::Display for NullKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fictitious => "fictitious",
            Self::Random => "random",
            Self::OneFactor => "one_factor",
        })
    }
}

/// Volatility of the quote/FIC noise path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaFict {
    /// Median return standard deviation of the real quote-based rows.
    #[default]
    MatchMedian,
    Fixed(f64),
}

impl FromStr for SigmaFict {
    type Err = NullError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.replace('-', "_") == "match_median" {
            return Ok(Self::MatchMedian);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| NullError::InvalidSpec(format!("bad sigma {s:?}")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(NullError::InvalidSpec(format!(
                "sigma must be >= 0, got {v}"
            )));
        }
        Ok(Self::Fixed(v))
    }
}

impl fmt::Display for SigmaFict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MatchMedian => f.write_str("match_median"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpec {
    pub kind: NullKind,
    pub seed: u64,
    pub sigma_fict: SigmaFict,
    /// Loading on the common factor, one-factor worlds only.
    pub factor_loading: f64,
    /// Number of series: `m` for random panels, `n` for one-factor panels.
    pub size: usize,
    /// Number of return samples.
    pub samples: usize,
    pub marginal: Marginal,
}

impl NullSpec {
    pub fn new(kind: NullKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            sigma_fict: SigmaFict::MatchMedian,
            factor_loading: 0.0,
            size: 59,
            samples: 1656,
            marginal: Marginal::Gaussian,
        }
    }

    pub fn fictitious(seed: u64) -> Self {
        Self::new(NullKind::Fictitious, seed)
    }

    pub fn random(m: usize, samples: usize, seed: u64) -> Self {
        Self {
            size: m,
            samples,
            ..Self::new(NullKind::Random, seed)
        }
    }

    pub fn one_factor(n: usize, samples: usize, factor_loading: f64, seed: u64) -> Self {
        Self {
            size: n,
            samples,
            factor_loading,
            ..Self::new(NullKind::OneFactor, seed)
        }
    }

    pub fn validate(&self) -> Result<(), NullError> {
        if !(0.0..=1.0).contains(&self.factor_loading) {
            return Err(NullError::InvalidSpec(format!(
                "factor_loading must lie in [0, 1], got {}",
                self.factor_loading
            )));
        }
        if let SigmaFict::Fixed(v) = self.sigma_fict {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NullError::InvalidSpec(format!(
                    "sigma must be >= 0, got {v}"
                )));
            }
        }
        if self.kind != NullKind::Fictitious && (self.size == 0 || self.samples == 0) {
            return Err(NullError::InvalidSpec(
                "size and samples must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Parses `key=value` lines (`kind`, `seed`, `sigma`, `loading`, `size`,
    /// `samples`, `marginal`). Blank lines and `#` comments are ignored;
    /// missing keys keep their defaults.
    pub fn parse_kv(text: &str) -> Result<Self, NullError> {
        let mut spec = Self::new(NullKind::Random, 0);
        let mut saw_kind = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                NullError::InvalidSpec(format!("expected key=value, got {line:?}"))
            })?;
            let value = value.trim();
            let bad = |what: &str| NullError::InvalidSpec(format!("bad {what} {value:?}"));
            match key.trim() {
                "kind" | "null" => {
                    spec.kind = value.parse()?;
                    saw_kind = true;
                }
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
                "sigma" | "sigma_fict" => spec.sigma_fict = value.parse()?,
                "loading" | "factor_loading" => {
                    spec.factor_loading = value.parse().map_err(|_| bad("loading"))?
                }
                "size" | "m" | "n" => spec.size = value.parse().map_err(|_| bad("size"))?,
                "samples" | "t" | "T" => {
                    spec.samples = value.parse().map_err(|_| bad("samples"))?
                }
                "marginal" => {
                    spec.marginal = match value {
                        "gaussian" => Marginal::Gaussian,
                        "uniform" => Marginal::Uniform,
                        _ => return Err(bad("marginal")),
                    }
                }
                other => return Err(NullError::InvalidSpec(format!("unknown key {other:?}"))),
            }
        }
        if !saw_kind {
            return Err(NullError::InvalidSpec("missing `kind`".into()));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> String {
        let marginal = match self.marginal {
            Marginal::Gaussian => "gaussian",
            Marginal::Uniform => "uniform",
        };
        format!(
            "kind={}\nseed={}\nsigma={}\nloading={}\nsize={}\nsamples={}\nmarginal={}\n",
            self.kind,
            self.seed,
            self.sigma_fict,
            self.factor_loading,
            self.size,
            self.samples,
            marginal
        )
    }
}

fn synthetic_dates(len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    (0..len)
        .map(|k| start + chrono::Days::new(k as u64))
        .collect()
}

/// Turns per-step log returns into a price path starting at 1.
fn integrate(returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut level = 0.0;
    out.push(1.0);
    for r in returns {
        level += r;
        out.push(level.exp());
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median 1/T standard deviation of the daily log returns of the listed
/// currencies against the quote currency.
pub fn median_quote_volatility(panel: &RatePanel) -> f64 {
    let sds = panel
        .prices()
        .iter()
        .map(|row| {
            let r: Vec<f64> = row.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
            mean_std(&r).1
        })
        .collect();
    median(sds)
}

/// Appends the fictitious currency `FIC` to `panel`.
///
/// Draws `T_p - 1` standardized innovations, scales them by the resolved
/// volatility and integrates them into the quote price of FIC starting at 1.
pub fn fictitious_panel(panel: &RatePanel, spec: &NullSpec) -> Result<RatePanel, NullError> {
    spec.validate()?;
    if panel.contains(FICTITIOUS_CODE) {
        return Err(NullError::DuplicateCode(FICTITIOUS_CODE.into()));
    }
    let sigma = match spec.sigma_fict {
        SigmaFict::MatchMedian => median_quote_volatility(panel),
        SigmaFict::Fixed(v) => v,
    };
    let mut rng = NoiseStream::new(spec.seed, spec.marginal);
    let steps: Vec<f64> = (1..panel.len())
        .map(|_| sigma * rng.next_standard())
        .collect();
    Ok(panel.with_currency(FICTITIOUS_CODE, integrate(&steps))?)
}

/// `size x samples` i.i.d. standardized returns, drawn row by row.
pub fn random_panel(spec: &NullSpec) -> Result<ReturnPanel, NullError> {
    spec.validate()?;
    let mut rng = NoiseStream::new(spec.seed, spec.marginal);
    let width = spec.size.to_string().len().max(3);
    let codes = (1..=spec.size).map(|i| format!("R{i:0width$}")).collect();
    let returns = (0..spec.size)
        .map(|_| (0..spec.samples).map(|_| rng.next_standard()).collect())
        .collect();
    Ok(ReturnPanel::new(
        RANDOM_BASE,
        codes,
        returns,
        1,
        Vec::new(),
    )?)
}

/// The random null as a price panel quoted in `RND`: each row of
/// [`random_panel`] is scaled by [`SYNTHETIC_DAILY_VOL`] and integrated, so
/// the `RND`-based log returns reproduce the random rows up to that scale.
pub fn random_rate_panel(spec: &NullSpec) -> Result<RatePanel, NullError> {
    let rp = random_panel(spec)?;
    let prices = rp
        .returns()
        .iter()
        .map(|row| {
            let steps: Vec<f64> = row.iter().map(|g| SYNTHETIC_DAILY_VOL * g).collect();
            integrate(&steps)
        })
        .collect();
    Ok(RatePanel::new(
        rp.codes().to_vec(),
        RANDOM_BASE,
        synthetic_dates(spec.samples + 1),
        prices,
    )?)
}

/// One common factor world priced in the synthetic quote currency `Q`.
///
/// Each daily log return is `vol * (L f(t) + sqrt(1 - L²) e_i(t))`; for every
/// step the factor `f` is drawn first, then `e_1 .. e_n`. The panel has
/// `samples + 1` dates.
pub fn one_factor_panel(spec: &NullSpec) -> Result<RatePanel, NullError> {
    spec.validate()?;
    let n = spec.size;
    let loading = spec.factor_loading;
    let idio = (1.0 - loading * loading).sqrt();
    let mut rng = NoiseStream::new(spec.seed, spec.marginal);
    let mut steps = vec![Vec::with_capacity(spec.samples); n];
    for _ in 0..spec.samples {
        let f = rng.next_standard();
        for row in steps.iter_mut() {
            row.push(SYNTHETIC_DAILY_VOL * (loading * f + idio * rng.next_standard()));
        }
    }
    let width = n.to_string().len().max(2);
    let codes = (1..=n).map(|i| format!("C{i:0width$}")).collect();
    let prices = steps.iter().map(|s| integrate(s)).collect();
    Ok(RatePanel::new(
        codes,
        SYNTHETIC_QUOTE,
        synthetic_dates(spec.samples + 1),
        prices,
    )?)
}

/// A world with one dominant reference currency.
///
/// Prices are quoted in the dominant currency `DOM`. Each peripheral
/// currency moves against it by independent noise of its own volatility
/// (spread linearly between `vol_low` and `vol_high`, in units of
/// [`SYNTHETIC_DAILY_VOL`]); the optional `EXT` currency does the same with
/// a much larger volatility, standing for a violently depreciating currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantWorld {
    pub peripherals: usize,
    pub vol_low: f64,
    pub vol_high: f64,
    pub extreme_vol: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl DominantWorld {
    pub fn new(peripherals: usize, samples: usize, seed: u64) -> Self {
        Self {
            peripherals,
            vol_low: 0.5,
            vol_high: 1.5,
            extreme_vol: Some(10.0),
            samples,
            seed,
        }
    }

    pub fn peripheral_vols(&self) -> Vec<f64> {
        let k = self.peripherals;
        (0..k)
            .map(|i| {
                let x = if k > 1 {
                    i as f64 / (k - 1) as f64
                } else {
                    0.5
                };
                self.vol_low + x * (self.vol_high - self.vol_low)
            })
            .collect()
    }
}

/// Draws, for each step, one innovation per peripheral in order, then the
/// extreme currency's.
pub fn dominant_world_panel(world: &DominantWorld) -> Result<RatePanel, NullError> {
    if world.peripherals == 0 || world.samples == 0 {
        return Err(NullError::InvalidSpec(
            "dominant world needs peripherals and samples".into(),
        ));
    }
    let mut vols = world.peripheral_vols();
    let width = world.peripherals.to_string().len().max(2);
    let mut codes: Vec<String> = (1..=world.peripherals)
        .map(|i| format!("P{i:0width$}"))
        .collect();
    if let Some(v) = world.extreme_vol {
        vols.push(v);
        codes.push(EXTREME_CODE.into());
    }
    let mut rng = NoiseStream::gaussian(world.seed);
    let mut steps = vec![Vec::with_capacity(world.samples); vols.len()];
    for _ in 0..world.samples {
        for (row, v) in steps.iter_mut().zip(&vols) {
            row.push(SYNTHETIC_DAILY_VOL * v * rng.next_gaussian());
        }
    }
    let prices = steps.iter().map(|s| integrate(s)).collect();
    Ok(RatePanel::new(
        codes,
        DOMINANT_CODE,
        synthetic_dates(world.samples + 1),
        prices,
    )?)
}
