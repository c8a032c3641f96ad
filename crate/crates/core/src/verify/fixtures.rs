use std::path::PathBuf;

use serde::Deserialize;

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, TimeGrid};
use crate::error::Result;
use crate::io::{from_json_str, ControlFile, SystemFile, TransferFile};
use crate::system::LevelSystem;

const BUNDLED: [(&str, &str); 10] = [
    ("two_level.json", include_str!("../../fixtures/two_level.json")),
    ("two_level_bounded.json", include_str!("../../fixtures/two_level_bounded.json")),
    ("three_level.json", include_str!("../../fixtures/three_level.json")),
    ("four_level.json", include_str!("../../fixtures/four_level.json")),
    ("transfer_energy.json", include_str!("../../fixtures/transfer_energy.json")),
    ("transfer_time.json", include_str!("../../fixtures/transfer_time.json")),
    ("oracles.json", include_str!("../../fixtures/oracles.json")),
    ("counterexample_system.json", include_str!("../../fixtures/counterexample_system.json")),
    ("counterexample_a.json", include_str!("../../fixtures/counterexample_a.json")),
    ("counterexample_b.json", include_str!("../../fixtures/counterexample_b.json")),
];

pub const FIXTURE_NAMES: [&str; 10] = [
    BUNDLED[0].0,
    BUNDLED[1].0,
    BUNDLED[2].0,
    BUNDLED[3].0,
    BUNDLED[4].0,
    BUNDLED[5].0,
    BUNDLED[6].0,
    BUNDLED[7].0,
    BUNDLED[8].0,
    BUNDLED[9].0,
];

/// Reference values the oracle criterion compares against.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Oracles {
    pub energy_cost: f64,
    pub minimal_time: f64,
}

/// Fixture files, compiled in or read from a directory. A directory only
/// needs the files it overrides.
#[derive(Debug, Clone, Default)]
pub struct Fixtures {
    dir: Option<PathBuf>,
}

impl Fixtures {
    pub fn bundled() -> Self {
        Fixtures { dir: None }
    }

    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        Fixtures { dir: Some(dir.into()) }
    }

    /// Text of a fixture and a context string for error messages.
    pub fn text(&self, name: &str) -> Result<(String, String)> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            if path.exists() {
                return Ok((std::fs::read_to_string(&path)?, path.display().to_string()));
            }
        }
        let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| crate::error::Error::Parse {
            context: "fixtures".into(),
            detail: format!("no fixture named {name}"),
        })?;
        Ok((text.to_string(), format!("bundled fixture {name}")))
    }

    pub fn system(&self, name: &str) -> Result<LevelSystem> {
        let (text, context) = self.text(name)?;
        from_json_str::<SystemFile>(&text, &context)?.into_system(&context)
    }

    pub fn control(&self, name: &str, sys: &LevelSystem) -> Result<ControlGrid> {
        let (text, context) = self.text(name)?;
        from_json_str::<ControlFile>(&text, &context)?.into_control(sys, &context)
    }

    pub fn transfer(&self, name: &str, n: usize) -> Result<(BoundarySpec, BoundarySpec, TimeGrid)> {
        let (text, context) = self.text(name)?;
        from_json_str::<TransferFile>(&text, &context)?.into_parts(n, &context)
    }

    pub fn oracles(&self) -> Result<Oracles> {
        let (text, context) = self.text("oracles.json")?;
        from_json_str(&text, &context)
    }
}
