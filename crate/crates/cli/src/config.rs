//! Settings resolution: flags, then environment, then the config file, then
//! defaults. Flags and environment are merged by clap before this runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use eeglog_core::{Error, Result};
use eeglog_service::DEFAULT_PORT;

pub const DEFAULT_CONFIG_FILE: &str = "eeglog.toml";
pub const DEFAULT_DATA_DIR: &str = "eeglog-data";

/// Keys accepted in the TOML config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub public_root: Option<PathBuf>,
    pub utc_offset: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    /// Reads `explicit`, or `eeglog.toml` in the working directory when it
    /// exists. An explicit path must exist.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !p.is_file() {
                    return Ok(Self::default());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub data_dir: PathBuf,
    pub port: u16,
    pub public_root: Option<PathBuf>,
    pub utc_offset: String,
    pub seed: u64,
}

/// Values already merged from flags and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub public_root: Option<PathBuf>,
    pub utc_offset: Option<String>,
    pub seed: Option<u64>,
}

pub fn resolve(over: Overrides, file: FileConfig) -> Settings {
    Settings {
        data_dir: over
            .data_dir
            .or(file.data_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
        port: over.port.or(file.port).unwrap_or(DEFAULT_PORT),
        public_root: over.public_root.or(file.public_root),
        utc_offset: over.utc_offset.or(file.utc_offset).unwrap_or_else(|| "UTC".into()),
        seed: over.seed.or(file.seed).unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file: FileConfig = toml::from_str("data_dir = \"/f\"\nport = 9000\nseed = 4").unwrap();
        let s = resolve(
            Overrides {
                port: Some(1234),
                ..Default::default()
            },
            file.clone(),
        );
        assert_eq!((s.data_dir, s.port, s.seed), (PathBuf::from("/f"), 1234, 4));
        let s = resolve(Overrides::default(), FileConfig::default());
        assert_eq!((s.port, s.utc_offset.as_str()), (DEFAULT_PORT, "UTC"));
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }
}
