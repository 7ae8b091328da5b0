use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ParamRanges, Param, RecipeId, Split};
use crate::error::{Error, Result};
use crate::render::{RenderSettings, VariationParams};
use crate::scene::PoseSchedule;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: usize,
    /// Parameters sampled for this group; the rest sit at range midpoints.
    pub varying: Vec<Param>,
    pub params: VariationParams,
    /// Group of the colored add-on set.
    pub colored: bool,
}

/// Rendering parameters of one entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSnapshot {
    #[serde(flatten)]
    pub variation: VariationParams,
    pub yaw_deg: f64,
    pub roll_deg: f64,
    /// Uniform albedo override; absent when the mesh's own albedo is used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub albedo: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model_id: String,
    pub group_id: usize,
    pub pose_index: usize,
    pub split: Split,
    pub params: ParamsSnapshot,
    /// Relative to the dataset root.
    pub fringe_path: String,
    pub depth_path: String,
    pub fringe_sha256: String,
    pub depth_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedModel {
    pub model_id: String,
    pub path: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub recipe: RecipeId,
    pub seed: u64,
    pub split_ratio: f64,
    /// False when the build aborted; entries then cover only finished pairs.
    pub complete: bool,
    pub ranges: ParamRanges,
    pub settings: RenderSettings,
    pub schedule: PoseSchedule,
    pub groups: Vec<GroupRecord>,
    pub entries: Vec<ManifestEntry>,
    pub failed_models: Vec<FailedModel>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_json(bytes: &[u8], path: &Path) -> Result<DatasetManifest> {
        let m: DatasetManifest = serde_json::from_slice(bytes).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "{}: manifest schema {} not supported (expected {SCHEMA_VERSION})",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<DatasetManifest> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::from_json(&bytes, path)
    }

    pub fn models_in(&self, split: Split) -> std::collections::BTreeSet<&str> {
        self.entries.iter().filter(|e| e.split == split).map(|e| e.model_id.as_str()).collect()
    }
}

/// `groupGG/<model>/poseNNN.<ext>`
pub fn entry_path(group_id: usize, model_id: &str, pose_index: usize, ext: &str) -> String {
    format!("group{group_id:02}/{model_id}/pose{pose_index:03}.{ext}")
}
