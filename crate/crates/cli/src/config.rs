//! Resolved, serializable description of one run.
//!
//! Every command resolves its flags into a [`RunConfig`], writes it as
//! `run_config.json` in the output directory and then executes from it, so
//! `fxcorr replay <run_config.json>` repeats the run exactly.

use std::fs;
use std::path::{Path, PathBuf};

use fxcorr::ingest::IngestError;
use fxcorr::nullmodels::{NullKind, NullSpec};
use fxcorr::PreprocessConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Ingest,
    Analyze,
    Ladder,
    Null,
}

/// Where prices come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum Source {
    /// Long `date,currency,price` file, synchronized and despiked on load.
    Raw { path: PathBuf },
    /// Wide panel as written by `fxcorr ingest`.
    Panel { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub name: String,
    pub codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub task: Task,
    pub source: Option<Source>,
    pub quote: String,
    pub bases: Vec<String>,
    pub tau: usize,
    pub preprocess: PreprocessConfig,
    pub bins: usize,
    pub null: Option<NullSpec>,
    pub with_fict: bool,
    pub sectors: Vec<Sector>,
    pub binary: bool,
    pub eigenvectors: bool,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.preprocess.validate()?;
        if let Some(spec) = &self.null {
            spec.validate()?;
        }
        let generated = matches!(
            self.null.as_ref().map(|s| s.kind),
            Some(NullKind::Random | NullKind::OneFactor)
        );
        match (&self.source, generated) {
            (Some(_), true) => {
                return Err(CliError::Usage(
                    "a random or one_factor null generates its own panel; drop the input flags"
                        .into(),
                ))
            }
            (None, false) => {
                return Err(CliError::Usage(
                    "one of --input or --panel is required".into(),
                ))
            }
            _ => {}
        }
        if self.task == Task::Ingest && !matches!(self.source, Some(Source::Raw { .. })) {
            return Err(CliError::Usage("ingest needs --input".into()));
        }
        if self.task == Task::Null && self.null.is_none() {
            return Err(CliError::Usage("null needs --kind".into()));
        }
        if self.tau == 0 {
            return Err(CliError::Usage("--tau must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Ingest(IngestError::InputNotFound(path.to_path_buf()))
            } else {
                CliError::io(path, e)
            }
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Absolute form of an existing input path.
pub fn resolve_input(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Ingest(IngestError::InputNotFound(path.to_path_buf()))
        } else {
            CliError::io(path, e)
        }
    })
}

pub fn resolve_output(path: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

/// Reads sector definitions: one sector per line, an optional `name:`
/// prefix, then codes separated by commas or whitespace. Blank lines and
/// `#` comments are ignored.
pub fn read_sectors(path: &Path) -> Result<Vec<Sector>, CliError> {
    let path = resolve_input(path)?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    parse_sectors(&text)
}

pub fn parse_sectors(text: &str) -> Result<Vec<Sector>, CliError> {
    let mut sectors = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, list) = match line.split_once(':') {
            Some((n, rest)) => (n.trim().to_string(), rest),
            None => (format!("sector{}", sectors.len() + 1), line),
        };
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(CliError::Usage(format!("bad sector name {name:?}")));
        }
        if sectors.iter().any(|s: &Sector| s.name == name) {
            return Err(CliError::Usage(format!("sector {name} defined twice")));
        }
        let codes = list
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        sectors.push(Sector { name, codes });
    }
    if sectors.is_empty() {
        return Err(CliError::Usage("sector file defines no sectors".into()));
    }
    Ok(sectors)
}
