//! Config files, path resolution and the config echo.

use std::fs;
use std::path::{Path, PathBuf};

use mrd_core::Panel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{config, data, io, CliError};

pub const ECHO_FILE: &str = "config_echo.json";

/// Parsed config and the directory its relative paths resolve against.
pub struct Loaded<T> {
    pub value: T,
    pub base: PathBuf,
}

/// Reads a TOML or JSON (by `.json` extension) config, or the defaults when
/// no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<Loaded<T>, CliError> {
    let cwd = std::env::current_dir().map_err(io)?;
    let Some(path) = path else {
        return Ok(Loaded { value: T::default(), base: cwd });
    };
    let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let tree: serde_json::Value = if is_json {
        serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?
    };
    let value = serde_path_to_error::deserialize(tree).map_err(|e| {
        let at = e.path().to_string();
        config(format!("{}: field `{at}`: {}", path.display(), e.inner()))
    })?;
    let base = path.parent().map_or_else(|| cwd.clone(), |p| cwd.join(p));
    Ok(Loaded { value, base })
}

/// Absolute, canonical form of `p` (relative paths are taken from `base`).
pub fn resolve(p: &Path, base: &Path) -> Result<PathBuf, CliError> {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    joined.canonicalize().map_err(|e| data(format!("{}: {e}", joined.display())))
}

/// Output path: relative paths land in `out_dir`.
pub fn output(p: &Path, out_dir: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

pub fn write_echo<T: Serialize>(out_dir: &Path, cfg: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(cfg).map_err(io)?;
    text.push('\n');
    write(&out_dir.join(ECHO_FILE), text.as_bytes())
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io(format!("{}: {e}", path.display())))
}

/// Where a panel's columns come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub panel: Option<PathBuf>,
    /// Running score, already centered at its cutoff.
    #[serde(default = "default_score")]
    pub score: String,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    #[serde(default = "default_treatment")]
    pub treatment: String,
    /// Defaults to every `z_*` column.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    /// Unit ids for cross-fitting folds; row numbers when absent.
    #[serde(default = "default_id")]
    pub id_column: String,
}

fn default_score() -> String {
    "x_d".into()
}
fn default_outcome() -> String {
    "y".into()
}
fn default_treatment() -> String {
    "d".into()
}
fn default_id() -> String {
    "lot_id".into()
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            panel: None,
            score: default_score(),
            outcome: default_outcome(),
            treatment: default_treatment(),
            covariates: None,
            id_column: default_id(),
        }
    }
}

/// Command-line overrides shared by the estimation commands.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct DataArgs {
    /// Input panel CSV.
    #[arg(long, short = 'p')]
    pub panel: Option<PathBuf>,
    /// Centered score column.
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub treatment: Option<String>,
    /// Comma-separated covariate columns (empty for none).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

impl DataConfig {
    /// Resolves the config-relative panel path, then applies overrides.
    pub fn resolve(&mut self, base: &Path, args: &DataArgs) -> Result<(), CliError> {
        if let Some(p) = &self.panel {
            self.panel = Some(resolve(p, base)?);
        }
        if let Some(p) = &args.panel {
            self.panel = Some(resolve(p, &std::env::current_dir().map_err(io)?)?);
        }
        if let Some(s) = &args.score {
            self.score = s.clone();
        }
        if let Some(s) = &args.outcome {
            self.outcome = s.clone();
        }
        if let Some(s) = &args.treatment {
            self.treatment = s.clone();
        }
        if let Some(c) = &args.covariates {
            self.covariates = Some(c.iter().filter(|s| !s.is_empty()).cloned().collect());
        }
        Ok(())
    }

    /// Reads the panel and pins the covariate list.
    pub fn read(&mut self) -> Result<Panel, CliError> {
        let path = self.panel.as_ref().ok_or_else(|| config("panel: no input panel given"))?;
        let panel = read_panel(path)?;
        if self.covariates.is_none() {
            self.covariates = Some(panel.names_with_prefix("z_"));
        }
        Ok(panel)
    }

    pub fn covariates(&self) -> &[String] {
        self.covariates.as_deref().unwrap_or_default()
    }
}

pub fn read_panel(path: &Path) -> Result<Panel, CliError> {
    let file = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    Panel::read_csv(file).map_err(|e| data(format!("{}: {e}", path.display())))
}
