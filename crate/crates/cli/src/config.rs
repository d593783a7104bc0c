//! Flat key = value configuration files.
//!
//! Recognized keys: `seed`, `format` (csv|json), `out`. Lines starting
//! with `#` and blank lines are ignored. Flags take precedence over the
//! config file, which takes precedence over the `UNTRACK_SEED` environment
//! variable and the built-in defaults.

use std::path::PathBuf;

use crate::table::OutputFormat;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

pub fn parse(content: &str) -> Result<FileConfig, String> {
    let mut config = FileConfig::default();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "seed" => {
                config.seed = Some(
                    value
                        .parse()
                        .map_err(|_| format!("line {}: seed must be an integer", lineno + 1))?,
                )
            }
            "format" => {
                config.format = Some(match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => return Err(format!("line {}: unknown format `{other}`", lineno + 1)),
                })
            }
            "out" => config.out = Some(PathBuf::from(value)),
            other => return Err(format!("line {}: unknown key `{other}`", lineno + 1)),
        }
    }
    Ok(config)
}
