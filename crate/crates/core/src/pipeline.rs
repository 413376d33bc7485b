//! End-to-end featurization: cloud → distances → Rips filtration → pairs →
//! H1/H2 landscapes → flat feature vector, and scoring through a forest.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forest::{self, Forest};
use crate::geometry::{pairwise_distances, PointCloud};
use crate::persistence::{build_rips, diagram, reduce, PersistenceDiagram, PersistencePair};
use crate::vectorize::{features, landscape, FeatureVector, Histogram, HistogramSpec};

pub const DEFAULT_MAX_DIM: usize = 3;
/// Largest death that can land inside the default H1 window (27 + 8.8).
pub const DEFAULT_MAX_RADIUS: f64 = 35.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_dim: usize,
    pub max_radius: f64,
    pub h1: HistogramSpec,
    pub h2: HistogramSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            max_radius: DEFAULT_MAX_RADIUS,
            h1: HistogramSpec::h1(),
            h2: HistogramSpec::h2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudFeatures {
    pub pairs: Vec<PersistencePair>,
    pub h1: Histogram,
    pub h2: Histogram,
    pub features: FeatureVector,
}

pub fn persistence_pairs(cloud: &PointCloud, config: &PipelineConfig) -> Result<Vec<PersistencePair>> {
    let filtration = build_rips(&pairwise_distances(cloud), config.max_dim, config.max_radius)?;
    Ok(reduce(&filtration))
}

pub fn diagrams(pairs: &[PersistencePair]) -> Result<(PersistenceDiagram, PersistenceDiagram)> {
    Ok((diagram(pairs, 1)?, diagram(pairs, 2)?))
}

/// Landscapes and features of already computed diagrams.
pub fn featurize_diagrams(
    h1: &PersistenceDiagram,
    h2: &PersistenceDiagram,
    config: &PipelineConfig,
) -> Result<(Histogram, Histogram, FeatureVector)> {
    let l1 = landscape(h1, &config.h1)?;
    let l2 = landscape(h2, &config.h2)?;
    let v = features(&l1.image, &l2.image)?;
    Ok((l1, l2, v))
}

pub fn featurize(cloud: &PointCloud, config: &PipelineConfig) -> Result<CloudFeatures> {
    let pairs = persistence_pairs(cloud, config)?;
    let (d1, d2) = diagrams(&pairs)?;
    let (h1, h2, features) = featurize_diagrams(&d1, &d2, config)?;
    Ok(CloudFeatures {
        pairs,
        h1,
        h2,
        features,
    })
}

/// Anything that maps a whole point cloud to a scalar output.
pub trait CloudScorer: Sync {
    fn score(&self, cloud: &PointCloud) -> Result<f64>;
}

/// Featurizes the cloud and runs the forest on it.
pub struct ModelScorer<'a> {
    pub forest: &'a Forest,
    pub config: PipelineConfig,
}

impl CloudScorer for ModelScorer<'_> {
    fn score(&self, cloud: &PointCloud) -> Result<f64> {
        let f = featurize(cloud, &self.config)?;
        forest::predict(self.forest, &f.features.0)
    }
}

impl<F> CloudScorer for F
where
    F: Fn(&PointCloud) -> Result<f64> + Sync,
{
    fn score(&self, cloud: &PointCloud) -> Result<f64> {
        self(cloud)
    }
}
