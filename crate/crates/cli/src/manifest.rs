//! Dataset manifest and the on-disk layout around it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use phml_core::geometry::{load_xyz, GridSpec, ParamVector, PointCloud, SyntheticSpec};
use phml_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{read_json, write_json};

pub const MANIFEST_FORMAT: &str = "phml-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub params: ParamVector,
    /// Cloud file, relative to the manifest directory.
    pub cloud: String,
    pub target: f64,
    #[serde(default)]
    pub prediction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub dataset_id: String,
    pub seeds: Seeds,
    pub grid: GridSpec,
    pub synthetic: SyntheticSpec,
    /// Persistence and histogram settings used by the last vectorize run.
    pub pipeline: PipelineConfig,
    pub items: Vec<Item>,
}

/// A manifest together with the directory its relative paths refer to.
pub struct Dataset {
    pub dir: PathBuf,
    pub path: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn load(path: &Path) -> CliResult<Self> {
        let manifest: Manifest = read_json(path, " (create one with `phml gen-data`)")?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(CliError::Data(format!(
                "{}: manifest format {:?}, expected {MANIFEST_FORMAT:?}",
                path.display(),
                manifest.format
            )));
        }
        let mut seen = BTreeSet::new();
        for item in &manifest.items {
            if !seen.insert(item.id.as_str()) {
                return Err(CliError::Data(format!("duplicate item id {:?}", item.id)));
            }
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for item in &manifest.items {
            let cloud = dir.join(&item.cloud);
            if !cloud.exists() {
                return Err(CliError::Data(format!("item {}: missing cloud file {}", item.id, cloud.display())));
            }
        }
        Ok(Self {
            dir,
            path: path.to_path_buf(),
            manifest,
        })
    }

    pub fn save(&self) -> CliResult<()> {
        write_json(&self.path, &self.manifest)
    }

    pub fn item_index(&self, id: &str) -> CliResult<usize> {
        self.manifest
            .items
            .iter()
            .position(|i| i.id == id)
            .ok_or_else(|| CliError::Data(format!("unknown target id {id:?}")))
    }

    pub fn load_cloud(&self, item: &Item) -> CliResult<PointCloud> {
        Ok(load_xyz(&self.dir.join(&item.cloud))?)
    }

    pub fn diagram_path(&self, id: &str) -> PathBuf {
        self.dir.join("diagrams").join(format!("{id}.json"))
    }

    pub fn landscape_path(&self, id: &str, dimension: usize) -> PathBuf {
        self.dir.join("landscapes").join(format!("{id}_h{dimension}.csv"))
    }

    pub fn features_path(&self) -> PathBuf {
        self.dir.join("features.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.dir.join("model.json")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.json")
    }

    pub fn importance_path(&self) -> PathBuf {
        self.dir.join("importance.csv")
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.dir.join("predictions.csv")
    }

    pub fn explain_dir(&self, mode: &str, id: &str) -> PathBuf {
        self.dir.join("explain").join(format!("{mode}-{id}"))
    }

    /// Predictions of every item, or a data error naming the missing stage.
    pub fn predictions(&self) -> CliResult<Vec<f64>> {
        self.manifest
            .items
            .iter()
            .map(|i| {
                i.prediction.ok_or_else(|| {
                    CliError::Data(format!(
                        "item {} has no prediction (run `phml pipeline --stage predict`)",
                        i.id
                    ))
                })
            })
            .collect()
    }
}
