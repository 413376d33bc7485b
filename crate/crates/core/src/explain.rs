//! Explanations of the fitted pipeline: pixel maps over the landscape
//! features, categorical parameter attributions, spatial grid attributions
//! of a point cloud, and the decomposition of pixel attributions by
//! parameter.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{grid_counts, GridSpec, ParamVector, PointCloud, PARAM_NAMES};
use crate::persistence::{PersistenceDiagram, PersistencePair};
use crate::pipeline::CloudScorer;
use crate::vectorize::{pixel_index, pixel_of, HistogramSpec};
use crate::xai::{
    cohort_shapley, igcs, igcs_subset, similarity_matrix, similarity_matrix_with, similarity_thresholds, Attribution,
    SimilaritySpec,
};

pub const DEFAULT_PIXEL_QUANTILE: f64 = 0.95;

/// Attributions over the H1 and H2 landscape pixels, birth-major grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelAttributionMap {
    pub bins: usize,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub baseline: f64,
    pub total: f64,
}

impl PixelAttributionMap {
    pub fn from_flat(values: &[f64], baseline: f64, total: f64) -> Result<Self> {
        let bins = bins_of(values.len())?;
        let per = bins * bins;
        Ok(Self {
            bins,
            h1: values[..per].to_vec(),
            h2: values[per..].to_vec(),
            baseline,
            total,
        })
    }

    /// H1 then H2, in feature order.
    pub fn flat(&self) -> Vec<f64> {
        self.h1.iter().chain(&self.h2).copied().collect()
    }

    pub fn grid(&self, dimension: usize) -> &[f64] {
        if dimension == 1 {
            &self.h1
        } else {
            &self.h2
        }
    }

    pub fn sum(&self) -> f64 {
        self.h1.iter().chain(&self.h2).sum()
    }
}

fn bins_of(d: usize) -> Result<usize> {
    let bins = ((d / 2) as f64).sqrt().round() as usize;
    if bins == 0 || 2 * bins * bins != d {
        return Err(Error::invalid(format!("{d} features do not form two square pixel grids")));
    }
    Ok(bins)
}

fn check_rows(n: usize, outputs: usize, target_row: usize) -> Result<()> {
    if n != outputs {
        return Err(Error::invalid(format!("{n} rows but {outputs} outputs")));
    }
    if target_row >= n {
        return Err(Error::invalid(format!("target row {target_row} out of range for {n} rows")));
    }
    Ok(())
}

/// IGCS over every landscape pixel with the model's predictions as output.
pub fn pixel_attribution(
    x: &[Vec<f64>],
    predictions: &[f64],
    target_row: usize,
    spec: &SimilaritySpec,
    steps: usize,
) -> Result<PixelAttributionMap> {
    check_rows(x.len(), predictions.len(), target_row)?;
    let s = similarity_matrix(x, target_row, spec)?;
    let a = igcs(&s, predictions, steps)?;
    PixelAttributionMap::from_flat(&a.values, a.baseline, a.total)
}

pub fn param_similarity(params: &[ParamVector], target_row: usize) -> Result<crate::xai::CohortIndicatorMatrix> {
    let codes: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.codes().map(|c| c.to_vec()))
        .collect::<Result<_>>()?;
    similarity_matrix(&codes, target_row, &SimilaritySpec::categorical(PARAM_NAMES.len()))
}

/// Exact Cohort Shapley over the four categorical generator parameters.
pub fn param_attribution(params: &[ParamVector], y: &[f64], target_row: usize) -> Result<Attribution> {
    check_rows(params.len(), y.len(), target_row)?;
    let s = param_similarity(params, target_row)?;
    cohort_shapley(&s, y)?.with_names(PARAM_NAMES.iter().map(|s| s.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAttribution {
    pub index: usize,
    pub value: f64,
    /// Target points inside the cell; empty for cells that are only
    /// occupied by cohort members.
    pub point_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAttribution {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAttribution {
    pub spec: GridSpec,
    /// Cells occupied somewhere in the dataset, by index. Every other cell
    /// was dropped as globally empty and has attribution 0.
    pub cells: Vec<CellAttribution>,
    pub points: Vec<PointAttribution>,
    /// Attribution of target points outside the cube; always 0 since such
    /// inputs are rejected.
    pub overflow: f64,
    pub dropped_cells: usize,
    pub baseline: f64,
    pub total: f64,
    /// Scorer output per dataset row, target first.
    pub scores: Vec<f64>,
}

impl GridAttribution {
    pub fn cell_value(&self, index: usize) -> f64 {
        self.cells
            .binary_search_by_key(&index, |c| c.index)
            .map_or(0.0, |k| self.cells[k].value)
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().map(|c| c.value).sum()
    }
}

/// Attributes the scorer's output for `target` to grid cells, using cell
/// point counts as features and `[target] + cohort` as the dataset, then
/// splits each occupied cell's value evenly among its target points.
pub fn grid_based_explanation(
    target: &PointCloud,
    cohort: &[PointCloud],
    scorer: &dyn CloudScorer,
    spec: &GridSpec,
    steps: usize,
    ratio: f64,
) -> Result<GridAttribution> {
    spec.validate()?;
    if cohort.is_empty() {
        return Err(Error::invalid("grid explanation needs a non-empty cohort"));
    }
    let clouds: Vec<&PointCloud> = std::iter::once(target).chain(cohort).collect();
    let counts: Vec<_> = clouds.iter().map(|c| grid_counts(c, spec)).collect();
    if let Some(k) = counts.iter().position(|g| g.overflow > 0) {
        return Err(Error::invalid(format!(
            "{} points of dataset cloud {k} fall outside the grid cube",
            counts[k].overflow
        )));
    }
    let retained: Vec<usize> = counts
        .iter()
        .flat_map(|g| g.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let x: Vec<Vec<f64>> = counts
        .iter()
        .map(|g| retained.iter().map(|&i| g.counts[i] as f64).collect())
        .collect();
    let scores: Vec<f64> = clouds.par_iter().map(|c| scorer.score(c)).collect::<Result<_>>()?;

    let s = similarity_matrix(&x, 0, &SimilaritySpec::continuous(retained.len(), ratio))?;
    let a = igcs(&s, &scores, steps)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); retained.len()];
    let mut point_cell = Vec::with_capacity(target.len());
    for (i, p) in target.points.iter().enumerate() {
        let flat = spec.flat_index(spec.cell_of(p).expect("overflow rejected above"));
        let k = retained.binary_search(&flat).expect("target cells are retained");
        members[k].push(i);
        point_cell.push(k);
    }
    let points = point_cell
        .iter()
        .enumerate()
        .map(|(i, &k)| PointAttribution {
            index: i,
            value: a.values[k] / members[k].len() as f64,
        })
        .collect();
    let cells = retained
        .iter()
        .zip(a.values)
        .zip(members)
        .map(|((&index, value), point_indices)| CellAttribution {
            index,
            value,
            point_indices,
        })
        .collect();
    Ok(GridAttribution {
        spec: *spec,
        cells,
        points,
        overflow: 0.0,
        dropped_cells: spec.cell_count() - retained.len(),
        baseline: a.baseline,
        total: a.total,
        scores,
    })
}

/// Pixels worth decomposing: the largest `floor((1 - quantile) * d)`
/// non-zero values by magnitude, ties by index, returned in index order.
pub fn top_pixels(values: &[f64], quantile: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::invalid(format!("pixel quantile {quantile} must lie in [0, 1]")));
    }
    let keep = ((1.0 - quantile) * values.len() as f64 + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order.truncate(keep);
    order.sort_unstable();
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderMaps {
    pub param_names: Vec<String>,
    /// One flat pixel map per parameter, zero outside `computed`.
    pub maps: Vec<Vec<f64>>,
    /// Pixels that were decomposed, ascending.
    pub computed: Vec<usize>,
    /// Per computed pixel: dataset-mean attribution (the CS baseline).
    pub baselines: Vec<f64>,
    /// Per computed pixel: mean attribution over rows sharing all of the
    /// target's parameters (the CS total).
    pub totals: Vec<f64>,
    pub first_order: PixelAttributionMap,
}

impl HigherOrderMaps {
    pub fn pixel_values(&self, pixel: usize) -> Vec<f64> {
        self.maps.iter().map(|m| m[pixel]).collect()
    }
}

/// Splits pixel attributions among the generator parameters: every row gets
/// its own IGCS map against the shared dataset, then each selected pixel's
/// attributions across rows are explained by exact Cohort Shapley over the
/// parameters.
#[allow(clippy::too_many_arguments)]
pub fn higher_order(
    params: &[ParamVector],
    x: &[Vec<f64>],
    predictions: &[f64],
    target_row: usize,
    pixel_subset: Option<&[usize]>,
    quantile: f64,
    spec: &SimilaritySpec,
    steps: usize,
) -> Result<HigherOrderMaps> {
    check_rows(x.len(), predictions.len(), target_row)?;
    check_rows(params.len(), predictions.len(), target_row)?;
    let thresholds = similarity_thresholds(x, spec)?;
    let d = thresholds.len();
    let s = similarity_matrix_with(x, target_row, &thresholds)?;
    let first = igcs(&s, predictions, steps)?;
    let computed = match pixel_subset {
        Some(subset) => {
            let set: BTreeSet<usize> = subset.iter().copied().collect();
            if let Some(&p) = set.iter().find(|&&p| p >= d) {
                return Err(Error::invalid(format!("pixel {p} out of range for {d} features")));
            }
            set.into_iter().collect()
        }
        None => top_pixels(&first.values, quantile)?,
    };
    let first_order = PixelAttributionMap::from_flat(&first.values, first.baseline, first.total)?;

    // row attributions on the computed pixels, one row per dataset member
    let per_row: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|r| {
            let s = similarity_matrix_with(x, r, &thresholds)?;
            Ok(igcs_subset(&s, predictions, steps, &computed)?.values)
        })
        .collect::<Result<_>>()?;

    let ps = param_similarity(params, target_row)?;
    let per_pixel: Vec<Attribution> = (0..computed.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = per_row.iter().map(|row| row[k]).collect();
            cohort_shapley(&ps, &y)
        })
        .collect::<Result<_>>()?;

    let mut maps = vec![vec![0.0; d]; PARAM_NAMES.len()];
    for (&p, a) in computed.iter().zip(&per_pixel) {
        for (m, &v) in maps.iter_mut().zip(&a.values) {
            m[p] = v;
        }
    }
    Ok(HigherOrderMaps {
        param_names: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        maps,
        baselines: per_pixel.iter().map(|a| a.baseline).collect(),
        totals: per_pixel.iter().map(|a| a.total).collect(),
        computed,
        first_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluentialPixel {
    pub dimension: usize,
    pub birth_bin: usize,
    pub persistence_bin: usize,
    pub value: f64,
    /// Diagram pairs binned into this pixel; empty when the pixel's value
    /// comes from blur spillover only.
    pub pairs: Vec<PersistencePair>,
}

/// The `top_k` pixels of the diagram's dimension by attribution magnitude,
/// each with the diagram pairs that fall in it.
pub fn influential_cycles(
    map: &PixelAttributionMap,
    diagram: &PersistenceDiagram,
    spec: &HistogramSpec,
    top_k: usize,
) -> Result<Vec<InfluentialPixel>> {
    if spec.dimension != diagram.dimension {
        return Err(Error::invalid(format!(
            "H{} diagram with an H{} histogram spec",
            diagram.dimension, spec.dimension
        )));
    }
    if spec.bins != map.bins {
        return Err(Error::invalid(format!("map has {} bins, spec {}", map.bins, spec.bins)));
    }
    let bins = map.bins;
    let flat = map.flat();
    let mut order: Vec<usize> = (0..bins * bins)
        .map(|k| pixel_index(diagram.dimension, k / bins, k % bins, bins))
        .collect();
    order.sort_by(|&a, &b| flat[b].abs().total_cmp(&flat[a].abs()).then(a.cmp(&b)));
    order.truncate(top_k);
    Ok(order
        .into_iter()
        .map(|p| {
            let (dimension, birth_bin, persistence_bin) = pixel_of(p, bins);
            let pairs = diagram
                .pairs
                .iter()
                .filter(|pair| spec.locate(pair.birth, pair.death) == Some((birth_bin, persistence_bin)))
                .copied()
                .collect();
            InfluentialPixel {
                dimension,
                birth_bin,
                persistence_bin,
                value: flat[p],
                pairs,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pairwise_distances, perturb, EDGES, NODES, TEMPLATES};
    use crate::persistence::{build_rips, diagram, reduce};
    use crate::xai::cohort_value;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BINS: usize = 3;
    const D: usize = 2 * BINS * BINS;

    fn random_table(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..D).map(|_| rng.gen_range(0..4) as f64).collect())
            .collect();
        let y = x.iter().map(|r| r[0] * 2.0 + r[10] - r[3] * r[4]).collect();
        (x, y)
    }

    #[test]
    fn pixel_map_layout_and_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = random_table(&mut rng, 40);
        let spec = SimilaritySpec::continuous(D, 0.01);
        let m = pixel_attribution(&x, &y, 5, &spec, 2000).unwrap();
        assert_eq!((m.bins, m.h1.len(), m.h2.len()), (BINS, 9, 9));
        let s = similarity_matrix(&x, 5, &spec).unwrap();
        let full: Vec<usize> = (0..D).collect();
        let v1 = cohort_value(&s, &y, &full).unwrap();
        let v0 = cohort_value(&s, &y, &[]).unwrap();
        assert_eq!((m.total, m.baseline), (v1, v0));
        assert!((m.sum() - (v1 - v0)).abs() < 1e-3);
        assert!(pixel_attribution(&x[..39], &y, 5, &spec, 50).is_err());
        assert!(pixel_attribution(&x, &y, 40, &spec, 50).is_err());
    }

    #[test]
    fn identical_rows_give_zero_map() {
        let x = vec![vec![1.5; D]; 6];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = pixel_attribution(&x, &y, 2, &SimilaritySpec::continuous(D, 0.01), 50).unwrap();
        assert!(m.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_h2_columns_get_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut x, _) = random_table(&mut rng, 30);
        for row in &mut x {
            row[9..].iter_mut().for_each(|v| *v = 0.25);
        }
        let y: Vec<f64> = x.iter().map(|r| r[..9].iter().sum()).collect();
        let m = pixel_attribution(&x, &y, 0, &SimilaritySpec::continuous(D, 0.01), 50).unwrap();
        assert!(m.h2.iter().all(|v| v.abs() < 1e-6));
        assert!(m.h1.iter().any(|v| v.abs() > 1e-3));
    }

    fn factorial_params() -> Vec<ParamVector> {
        let mut out = Vec::new();
        for t in &TEMPLATES[..2] {
            for n1 in &NODES[..2] {
                for n2 in [None, Some(NODES[2])] {
                    for e in [Some(EDGES[0]), Some(EDGES[1]), None] {
                        out.push(ParamVector::new(t, n1, n2, e));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn param_attribution_cases() {
        let params = factorial_params();
        let n = params.len();
        let a = param_attribution(&params, &vec![3.0; n], 4).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
        assert_eq!(a.feature_names, PARAM_NAMES);

        let shared: Vec<ParamVector> = params
            .iter()
            .map(|p| ParamVector { edge: Some("kink".into()), ..p.clone() })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let a = param_attribution(&shared, &y, 7).unwrap();
        assert_eq!(a.values[3], 0.0);
        let a = param_attribution(&params, &y, 7).unwrap();
        assert!(a.completeness_gap() < 1e-9);
        assert!(param_attribution(&params, &y[1..], 7).is_err());
    }

    fn ring_cloud() -> PointCloud {
        let pts = (0..12)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 12.0;
                [10.0 + 3.0 * t.cos(), 10.0 + 3.0 * t.sin(), 10.0]
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    fn centroid_x(c: &PointCloud) -> Result<f64> {
        Ok(c.points.iter().map(|p| p[0]).sum::<f64>() / c.len() as f64)
    }

    #[test]
    fn grid_explanation_contracts() {
        let spec = GridSpec::new([0.0; 3], 2.0, 10).unwrap();
        let target = ring_cloud();
        let cohort: Vec<PointCloud> = (0..15).map(|s| perturb(&target, 1.0, s).unwrap()).collect();
        let g = grid_based_explanation(&target, &cohort, &centroid_x, &spec, 500, 0.01).unwrap();
        assert_eq!(g.scores.len(), 16);
        assert_eq!(g.dropped_cells + g.cells.len(), 1000);
        assert_eq!(g.overflow, 0.0);
        assert!((g.sum() - (g.total - g.baseline)).abs() < 1e-3);
        for c in &g.cells {
            let vals: Vec<f64> = c.point_indices.iter().map(|&i| g.points[i].value).collect();
            if let Some(&first) = vals.first() {
                assert!(vals.iter().all(|&v| v == first));
                assert_eq!(first, c.value / vals.len() as f64);
                let sum: f64 = vals.iter().sum();
                assert!((sum - c.value).abs() <= 1e-15 * c.value.abs().max(1.0) * vals.len() as f64);
            }
        }
        let retained: BTreeSet<usize> = g.cells.iter().map(|c| c.index).collect();
        let dropped = (0..1000).find(|i| !retained.contains(i)).unwrap();
        assert_eq!(g.cell_value(dropped), 0.0);

        let copies = vec![target.clone(); 4];
        let z = grid_based_explanation(&target, &copies, &centroid_x, &spec, 50, 0.01).unwrap();
        assert!(z.cells.iter().all(|c| c.value == 0.0));
        assert!(z.points.iter().all(|p| p.value == 0.0));

        assert!(grid_based_explanation(&target, &[], &centroid_x, &spec, 50, 0.01).is_err());
        let small = GridSpec::new([0.0; 3], 1.0, 10).unwrap();
        assert!(grid_based_explanation(&target, &cohort, &centroid_x, &small, 50, 0.01).is_err());
    }

    #[test]
    fn dropping_empty_cells_changes_nothing() {
        // the same dataset with the globally empty cells kept as features
        let spec = GridSpec::new([0.0; 3], 2.0, 10).unwrap();
        let target = ring_cloud();
        let cohort: Vec<PointCloud> = (0..8).map(|s| perturb(&target, 1.0, 100 + s).unwrap()).collect();
        let g = grid_based_explanation(&target, &cohort, &centroid_x, &spec, 50, 0.01).unwrap();
        let x: Vec<Vec<f64>> = std::iter::once(&target)
            .chain(&cohort)
            .map(|c| grid_counts(c, &spec).counts.iter().map(|&v| v as f64).collect())
            .collect();
        let s = similarity_matrix(&x, 0, &SimilaritySpec::continuous(1000, 0.01)).unwrap();
        let full = igcs(&s, &g.scores, 50).unwrap();
        for i in 0..1000 {
            assert_eq!(full.values[i], g.cell_value(i));
        }
    }

    #[test]
    fn top_pixel_selection() {
        let v = [0.0, -3.0, 1.0, 3.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(top_pixels(&v, 0.8).unwrap(), vec![1, 3]);
        assert_eq!(top_pixels(&v, 0.0).unwrap(), vec![1, 2, 3, 4]);
        assert!(top_pixels(&v, 1.0).unwrap().is_empty());
        assert!(top_pixels(&v, 1.5).is_err());
    }

    #[test]
    fn higher_order_efficiency_and_dummies() {
        let params = factorial_params();
        let n = params.len();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = random_table(&mut rng, n);
        let spec = SimilaritySpec::continuous(D, 0.01);
        let h = higher_order(&params, &x, &y, 5, None, 0.5, &spec, 50).unwrap();
        assert!(!h.computed.is_empty() && h.computed.len() <= D / 2);
        let first = h.first_order.flat();
        for (k, &p) in h.computed.iter().enumerate() {
            let parts: f64 = h.pixel_values(p).iter().sum();
            // unique parameter vectors: the CS total is the target's own value
            assert_eq!(h.totals[k], first[p]);
            assert!((parts + h.baselines[k] - first[p]).abs() < 1e-9);
        }
        for p in 0..D {
            if !h.computed.contains(&p) {
                assert!(h.maps.iter().all(|m| m[p] == 0.0));
            }
        }

        let same = vec![params[0].clone(); n];
        let h = higher_order(&same, &x, &y, 5, None, 0.5, &spec, 50).unwrap();
        assert!(h.maps.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn single_parameter_controls_pixel() {
        // pixel 4 takes a value set by the edge alone; the rest is constant
        let params = factorial_params();
        let edge_level = |p: &ParamVector| match p.edge.as_deref() {
            Some("bead1") => 0.0,
            Some("bead2") => 1.0,
            _ => 2.0,
        };
        let x: Vec<Vec<f64>> = params
            .iter()
            .map(|p| {
                let mut row = vec![0.5; D];
                row[4] = edge_level(p);
                row
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[4] * r[4]).collect();
        let spec = SimilaritySpec::continuous(D, 0.01);
        let h = higher_order(&params, &x, &y, 2, Some(&[4]), 0.95, &spec, 50).unwrap();
        let parts = h.pixel_values(4);
        let magnitude: f64 = parts.iter().map(|v| v.abs()).sum();
        assert!(magnitude > 0.0);
        assert!(parts[3].abs() >= 0.95 * magnitude, "{parts:?}");
    }

    #[test]
    fn influential_cycles_cases() {
        let spec = HistogramSpec::h1();
        let zero = PixelAttributionMap::from_flat(&vec![0.0; 2 * 54 * 54], 0.0, 0.0).unwrap();
        let empty = PersistenceDiagram { dimension: 1, pairs: vec![] };
        let top = influential_cycles(&zero, &empty, &spec, 3).unwrap();
        assert_eq!(top.len(), 3);
        assert!(top.iter().all(|t| t.pairs.is_empty()));

        // circle of radius 5 plus jitter; the map weights each bin by the
        // persistence of the pairs landing in it
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..20)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 20.0;
                [5.0 * t.cos() + rng.gen_range(-0.1..0.1), 5.0 * t.sin() + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let pairs = reduce(&build_rips(&pairwise_distances(&cloud), 2, 12.0).unwrap());
        let dg = diagram(&pairs, 1).unwrap();
        let mut values = vec![0.0; 2 * 54 * 54];
        for p in &dg.pairs {
            let (b, q) = spec.locate(p.birth, p.death).unwrap();
            values[pixel_index(1, b, q, 54)] += p.persistence();
        }
        let map = PixelAttributionMap::from_flat(&values, 0.0, 0.0).unwrap();
        let dominant = dg.pairs.iter().max_by(|a, b| a.persistence().total_cmp(&b.persistence())).unwrap();
        let top = influential_cycles(&map, &dg, &spec, 1).unwrap();
        assert!(top[0].value > 0.0);
        assert!(top[0].pairs.contains(dominant));

        let h2 = PersistenceDiagram { dimension: 2, pairs: vec![] };
        assert!(influential_cycles(&map, &h2, &spec, 1).is_err());
    }
}
