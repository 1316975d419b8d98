//! One module per subcommand family: wave-packet runs, the double slit,
//! single-particle spin, entangled pairs, and the no-go enumerations.

pub mod nogo;
pub mod pairs;
pub mod slit;
pub mod spin;
pub mod wave;

use std::path::PathBuf;

use crate::config::ConfigMap;
use crate::errors::CliError;
use crate::output::{ManifestHead, OutputDir};

/// Keys every subcommand understands.
pub const COMMON_KEYS: &[(&str, &str, &str)] = &[
    ("out", "runs/<subcommand>", "output directory (created if absent)"),
    ("render", "true", "also write PNG renderings (presentational only)"),
];

/// The run's output directory, rendering switch, and manifest head.
pub struct RunSetup {
    pub out: OutputDir,
    pub render: bool,
    pub head: ManifestHead,
}

/// Close out configuration parsing: read the common output keys, reject
/// anything left unread, assemble the manifest head from the resolved
/// parameter set, and only then touch the filesystem. Call after every
/// subcommand-specific getter so configuration errors surface before any
/// computation or directory creation.
pub fn finalize_config(
    cfg: &mut ConfigMap,
    subcommand: &'static str,
    seed: Option<u64>,
    grid: Option<serde_json::Value>,
    units: serde_json::Value,
) -> Result<RunSetup, CliError> {
    let out = cfg.get_str("out", &format!("runs/{subcommand}"))?;
    let render = cfg.get_bool("render", true)?;
    cfg.finish()?;
    let mut parameters = serde_json::Map::new();
    for (k, v) in cfg.resolved() {
        parameters.insert(k.clone(), v.clone());
    }
    let head = ManifestHead {
        subcommand,
        parameters,
        seed,
        grid,
        units,
    };
    let out = OutputDir::create(&PathBuf::from(out))?;
    Ok(RunSetup {
        out,
        render,
        head,
    })
}

pub fn units_json(units: &pilotwave::UnitSystem64) -> serde_json::Value {
    serde_json::to_value(units).unwrap_or(serde_json::Value::Null)
}

pub fn grid_json(grid: &pilotwave::GridSpec64) -> Option<serde_json::Value> {
    serde_json::to_value(grid).ok()
}

/// Render an outcome sign as its CSV cell: `1` or `-1`, empty for absent.
pub fn outcome_cell(o: Option<i8>) -> String {
    match o {
        Some(v) => v.to_string(),
        None => String::new(),
    }
}
