//! Run configuration: command-line flags over an optional TOML/JSON file
//! over built-in defaults.

use std::path::{Path, PathBuf};

use occbench::occluder::CategoryFilter;
use occbench::planner::{MotionKind, MotionSpec, PlannerConfig, Split};
use serde::Deserialize;

use crate::error::CliError;

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub occluders: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub fg: Option<u8>,
    pub bg: Option<u8>,
    pub motion: Option<String>,
    pub split: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub strict: Option<bool>,
    pub iou: Option<Vec<f64>>,
    pub category: Option<String>,
    pub feather: Option<bool>,
    pub max_iterations: Option<u32>,
    pub min_scale: Option<f64>,
}

impl FileConfig {
    /// `.json` files are read as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Fill every unset key of `self` from `lower`.
    pub fn or(self, lower: FileConfig) -> FileConfig {
        FileConfig {
            manifest: self.manifest.or(lower.manifest),
            occluders: self.occluders.or(lower.occluders),
            out: self.out.or(lower.out),
            fg: self.fg.or(lower.fg),
            bg: self.bg.or(lower.bg),
            motion: self.motion.or(lower.motion),
            split: self.split.or(lower.split),
            seed: self.seed.or(lower.seed),
            workers: self.workers.or(lower.workers),
            strict: self.strict.or(lower.strict),
            iou: self.iou.or(lower.iou),
            category: self.category.or(lower.category),
            feather: self.feather.or(lower.feather),
            max_iterations: self.max_iterations.or(lower.max_iterations),
            min_scale: self.min_scale.or(lower.min_scale),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Static,
    Dynamic,
}

/// Fully resolved settings for `generate`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub occluder_dir: PathBuf,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub fg_level: u8,
    pub bg_level: u8,
    pub motion: MotionSpec,
    pub seed: u64,
    pub workers: usize,
    pub strict: bool,
    pub category: CategoryFilter,
    pub feather: bool,
    pub planner: PlannerConfig,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_FG: u8 = 2;
pub const DEFAULT_BG: u8 = 3;
pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.2, 0.5];

fn level(name: &str, value: Option<u8>, default: u8) -> Result<u8, CliError> {
    match value.unwrap_or(default) {
        l @ 1..=3 => Ok(l),
        other => Err(CliError::Config(format!("--{name} must be 1, 2 or 3, got {other}"))),
    }
}

fn required(name: &str, value: Option<PathBuf>) -> Result<PathBuf, CliError> {
    value.ok_or_else(|| CliError::Config(format!("--{name} is required")))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    /// Resolve merged settings. The split defaults to the motion's home
    /// split; an explicit split that the motion is not allowed in fails with
    /// `MotionSplitViolation`.
    pub fn resolve(merged: FileConfig) -> Result<Self, CliError> {
        let kind: MotionKind = match merged.motion.as_deref() {
            Some(m) => m.parse().map_err(CliError::Config)?,
            None => MotionKind::Static,
        };
        let split = match merged.split.as_deref() {
            Some(s) => Some(s.parse::<Split>().map_err(CliError::Config)?),
            None => None,
        };
        let motion = match kind {
            MotionKind::Static => MotionSpec::fixed(),
            _ => {
                let split = split.or(kind.home_split()).unwrap_or(Split::Test);
                let spec = MotionSpec::new(kind, split);
                spec.validate()?;
                spec
            }
        };
        let workers = merged.workers.unwrap_or_else(default_workers);
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        let category = match merged.category.as_deref() {
            Some(c) => c.parse().map_err(|e: occbench::OccluderError| CliError::Config(e.to_string()))?,
            None => CategoryFilter::All,
        };
        let mut planner = PlannerConfig::default();
        if let Some(n) = merged.max_iterations {
            planner.max_iterations = n;
        }
        if let Some(s) = merged.min_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CliError::Config(format!("min_scale must be positive, got {s}")));
            }
            planner.min_scale = s;
        }
        Ok(Self {
            manifest_path: required("manifest", merged.manifest)?,
            occluder_dir: required("occluders", merged.occluders)?,
            output_dir: required("out", merged.out)?,
            mode: if kind == MotionKind::Static {
                Mode::Static
            } else {
                Mode::Dynamic
            },
            fg_level: level("fg", merged.fg, DEFAULT_FG)?,
            bg_level: level("bg", merged.bg, DEFAULT_BG)?,
            motion,
            seed: merged.seed.unwrap_or(DEFAULT_SEED),
            workers,
            strict: merged.strict.unwrap_or(false),
            category,
            feather: merged.feather.unwrap_or(true),
            planner,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> FileConfig {
        FileConfig {
            manifest: Some("m.json".into()),
            occluders: Some("lib".into()),
            out: Some("out".into()),
            ..FileConfig::default()
        }
    }

    #[test]
    fn cli_overrides_file() {
        let cli = FileConfig {
            seed: Some(9),
            ..FileConfig::default()
        };
        let file = FileConfig {
            seed: Some(3),
            fg: Some(1),
            ..base()
        };
        let cfg = RunConfig::resolve(cli.or(file)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.fg_level, 1);
        assert_eq!(cfg.bg_level, DEFAULT_BG);
        assert_eq!(cfg.mode, Mode::Static);
    }

    #[test]
    fn split_follows_motion() {
        let cfg = RunConfig::resolve(FileConfig {
            motion: Some("zoom-in".into()),
            ..base()
        })
        .unwrap();
        assert_eq!(cfg.motion.split, Split::Train);
        assert_eq!(cfg.mode, Mode::Dynamic);
        let err = RunConfig::resolve(FileConfig {
            motion: Some("circle".into()),
            split: Some("train".into()),
            ..base()
        })
        .unwrap_err();
        assert_eq!(err.kind(), "MotionSplitViolation");
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            FileConfig { fg: Some(4), ..base() },
            FileConfig { workers: Some(0), ..base() },
            FileConfig { motion: Some("spiral".into()), ..base() },
            FileConfig { manifest: None, ..base() },
        ] {
            assert!(RunConfig::resolve(cfg).is_err());
        }
    }

    #[test]
    fn parses_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "seed = 5\nmotion = \"circle\"\niou = [0.2, 0.5]\n").unwrap();
        let cfg = FileConfig::load(&toml_path).unwrap();
        assert_eq!(cfg.seed, Some(5));
        assert_eq!(cfg.iou, Some(vec![0.2, 0.5]));
        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, r#"{"fg": 3, "strict": true}"#).unwrap();
        let cfg = FileConfig::load(&json_path).unwrap();
        assert_eq!((cfg.fg, cfg.strict), (Some(3), Some(true)));
        std::fs::write(&json_path, r#"{"colour": 3}"#).unwrap();
        assert!(FileConfig::load(&json_path).is_err());
    }
}
