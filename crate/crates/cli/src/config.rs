use std::fmt;
use std::path::Path;

use ofbm::verify::TestConfig;
use ofbm::OfbmError;
use serde::Deserialize;

/// Defaults read from `--config`; every key is optional and named after its flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "D")]
    pub hurst: Option<serde_json::Value>,
    pub generator: Option<String>,
    pub seed: Option<u64>,
    pub bound: Option<f64>,
    pub paths: Option<usize>,
    pub method: Option<String>,
    pub format: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub pairs: Option<Vec<(f64, f64)>>,
    pub ladder: Option<Vec<usize>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    /// Full verification settings; individual flags override its fields.
    pub test: Option<TestConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input detected before or during setup.
    Validation(String),
    /// A computation could not complete.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 3,
            Self::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) | Self::Failure(m) => f.write_str(m),
        }
    }
}

impl From<OfbmError> for CliError {
    fn from(e: OfbmError) -> Self {
        match e {
            OfbmError::Numeric(_) | OfbmError::Accuracy { .. } | OfbmError::Invariant(_) => Self::Failure(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(e.to_string())
    }
}
