use std::path::Path;

use chrono::NaiveDate;
use pricedist_core::dataio::{write_panel, PanelSchema, PricePanel};
use pricedist_core::distnet::NetConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::TrainingSection;
use crate::hpo::{HourSelection, HpoSpace};
use crate::HarnessError;

/// Everything needed to reproduce a run: identical seed, search space and
/// data hash give an identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub data_hash: String,
    pub space: HpoSpace,
    pub training: TrainingSection,
    pub selections: Vec<HourSelection>,
    pub subperiod_starts: Vec<NaiveDate>,
    /// Checkpoint files relative to the output directory.
    pub checkpoints: Vec<String>,
}

impl RunManifest {
    pub fn configs(&self) -> Vec<NetConfig> {
        self.selections.iter().map(|s| s.config.clone()).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(HarnessError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| HarnessError::Config(format!("no manifest at {}; run `hpo` first", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// SHA-256 of the panel in canonical CSV form.
pub fn data_hash(panel: &PricePanel, schema: &PanelSchema) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_panel(&mut buf, panel, schema)?;
    Ok(hex(&Sha256::digest(&buf)))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short identifier derived from the seed, the search space and the data.
pub fn run_id(seed: u64, space: &HpoSpace, training: &TrainingSection, data_hash: &str) -> Result<String, HarnessError> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(serde_json::to_vec(space)?);
    h.update(serde_json::to_vec(training)?);
    h.update(data_hash.as_bytes());
    Ok(hex(&h.finalize()[..8]))
}
