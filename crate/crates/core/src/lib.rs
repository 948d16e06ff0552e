//! Cross-correlation analysis of currency exchange rate panels.
//!
//! Pipeline: raw `date,currency,price` quotes ([`ingest`]) are synchronized
//! and despiked into a [`RatePanel`]; for any base currency the panel is
//! turned into normalized log returns ([`rates`]), an equal-time correlation
//! matrix ([`corrmat`]) and its eigenspectrum ([`spectra`]). [`analysis`]
//! sweeps every currency as the base to build the ladder of largest
//! eigenvalues, and [`nullmodels`] supplies the reference panels.
//!
//! ```no_run
//! use fxcorr::{analysis, ingest};
//!
//! let table = ingest::load_raw("quotes.csv".as_ref(), "USD")?;
//! let cfg = ingest::PreprocessConfig::default();
//! let panel = ingest::despike(&ingest::synchronize(&table, &cfg)?, &cfg)?;
//! let ladder = analysis::build_ladder(&panel, 1, true, 42)?;
//! for e in &ladder.entries {
//!     println!("{} {:.3}", e.base, e.lambda_max);
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod corrmat;
pub mod ingest;
pub mod matrix;
pub mod nullmodels;
pub mod rates;
pub mod rng;
pub mod spectra;

pub use analysis::{
    build_ladder, per_base_report, sector_ladder, AnalysisError, BaseReport, Ladder, LadderEntry,
};
pub use corrmat::{correlation_matrix, offdiag_histogram, CorrelationMatrix, OffDiagHistogram};
pub use ingest::{
    despike, load_raw, synchronize, GapPolicy, PreprocessConfig, RatePanel, RawQuoteTable,
};
pub use matrix::Matrix;
pub use nullmodels::{
    fictitious_panel, one_factor_panel, random_panel, NullKind, NullSpec, SigmaFict,
};
pub use rates::{
    log_returns, normalize, rebase, verify_constraints, BaseChangeReport, ReturnPanel,
};
pub use spectra::{
    collectivity_summary, eigendecompose, ipr, rmt_bounds, EigenSpectrum, RmtBounds,
};
