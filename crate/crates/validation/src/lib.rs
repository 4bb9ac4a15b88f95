//! Golden figure data for the jcpath presets.
//!
//! The golden CSVs under `tests/golden/` are the committed output of every
//! figure preset. Set `JCPATH_BLESS=1` when running the acceptance target to
//! rewrite them after an intended change.

use std::path::{Path, PathBuf};

use jcpath::scenarios::{figure_presets, run_scenario, ScenarioResult};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_path(name: &str) -> PathBuf {
    golden_dir().join(format!("{name}.csv"))
}

/// CSV text of every figure preset, in preset order.
pub fn preset_csvs() -> ScenarioResult<Vec<(&'static str, String)>> {
    figure_presets()
        .into_iter()
        .map(|(name, cfg)| Ok((name, run_scenario(&cfg)?.to_csv()?)))
        .collect()
}

/// Rewrites the golden files from the current presets.
pub fn bless() -> ScenarioResult<()> {
    std::fs::create_dir_all(golden_dir())?;
    for (name, csv) in preset_csvs()? {
        std::fs::write(golden_path(name), csv)?;
    }
    Ok(())
}
