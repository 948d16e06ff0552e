use std::path::PathBuf;

use fxcorr::analysis::AnalysisError;
use fxcorr::corrmat::CorrError;
use fxcorr::ingest::IngestError;
use fxcorr::nullmodels::NullError;
use fxcorr::rates::RatesError;
use fxcorr::spectra::SpectraError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Corr(#[from] CorrError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Null(#[from] NullError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Config { .. } => EXIT_USAGE,
            Self::Ingest(e) => ingest_code(e),
            Self::Rates(e) => rates_code(e),
            Self::Corr(e) => corr_code(e),
            Self::Spectra(_) => EXIT_NUMERIC,
            Self::Null(e) => null_code(e),
            Self::Analysis(e) => match e {
                AnalysisError::Rates(e) => rates_code(e),
                AnalysisError::Corr(e) => corr_code(e),
                AnalysisError::Spectra { .. } => EXIT_NUMERIC,
                AnalysisError::Null(e) => null_code(e),
                AnalysisError::Panel(e) => ingest_code(e),
                AnalysisError::TooFewCurrencies(_) | AnalysisError::SubsetTooSmall(_) => EXIT_USAGE,
                AnalysisError::Collapsed(_) => EXIT_DATA,
            },
        }
    }
}

fn ingest_code(e: &IngestError) -> u8 {
    match e {
        IngestError::InputNotFound(_)
        | IngestError::Io(_)
        | IngestError::Parse { .. }
        | IngestError::InvalidPanel(_)
        | IngestError::InvalidConfig(_) => EXIT_USAGE,
        IngestError::DuplicateQuote { .. }
        | IngestError::NonPositivePrice { .. }
        | IngestError::SelfQuote { .. }
        | IngestError::NoData
        | IngestError::SeriesTooShort { .. }
        | IngestError::EmptyIntersection { .. }
        | IngestError::SpikeCapExceeded { .. }
        | IngestError::PanelTooShort { .. } => EXIT_DATA,
    }
}

fn rates_code(e: &RatesError) -> u8 {
    match e {
        RatesError::UnknownBase(_)
        | RatesError::TauTooLarge { .. }
        | RatesError::InvalidTau
        | RatesError::TooFewCurrencies(_)
        | RatesError::InvalidPanel(_) => EXIT_USAGE,
        RatesError::ZeroVariance(_) => EXIT_DATA,
        RatesError::AlreadyNormalized => EXIT_NUMERIC,
    }
}

fn corr_code(e: &CorrError) -> u8 {
    match e {
        CorrError::TooFewBins(_) | CorrError::Format(_) | CorrError::Io(_) => EXIT_USAGE,
        CorrError::Empty(_) => EXIT_DATA,
        CorrError::NotNormalized | CorrError::InvariantViolation(_) => EXIT_NUMERIC,
    }
}

fn null_code(e: &NullError) -> u8 {
    match e {
        NullError::InvalidSpec(_) | NullError::DuplicateCode(_) => EXIT_USAGE,
        NullError::Panel(e) => ingest_code(e),
        NullError::Rates(e) => rates_code(e),
    }
}
