//! Observational attribution over similarity cohorts.
//!
//! A row is "similar" to the target on feature j when its value is within a
//! threshold of the target's. The cohort value of a feature subset is the
//! mean output over rows similar on every feature of the subset. Cohort
//! Shapley is the exact Shapley value of that set function; IGCS integrates
//! the gradient of its multilinear extension along the diagonal of the cube.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest feature count accepted by [`cohort_shapley`].
pub const MAX_EXACT_FEATURES: usize = 25;
pub const DEFAULT_RATIO: f64 = 0.01;
pub const DEFAULT_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub kinds: Vec<FeatureKind>,
    /// Continuous features match within `ratio * (max - min)` of the column.
    pub ratio: f64,
}

impl SimilaritySpec {
    pub fn continuous(d: usize, ratio: f64) -> Self {
        Self {
            kinds: vec![FeatureKind::Continuous; d],
            ratio,
        }
    }

    pub fn categorical(d: usize) -> Self {
        Self {
            kinds: vec![FeatureKind::Categorical; d],
            ratio: DEFAULT_RATIO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::invalid(format!("similarity ratio {} must lie in (0, 1]", self.ratio)));
        }
        Ok(())
    }
}

/// Row-major n×d indicator of similarity to the target row.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortIndicatorMatrix {
    n: usize,
    d: usize,
    target_row: usize,
    data: Vec<bool>,
}

impl CohortIndicatorMatrix {
    pub fn new(n: usize, d: usize, target_row: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::invalid(format!("indicator data has {} entries, expected {}", data.len(), n * d)));
        }
        if target_row >= n {
            return Err(Error::invalid(format!("target row {target_row} out of range for {n} rows")));
        }
        if !data[target_row * d..(target_row + 1) * d].iter().all(|&s| s) {
            return Err(Error::invalid("target row must be similar to itself on every feature"));
        }
        Ok(Self {
            n,
            d,
            target_row,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<bool>], target_row: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("indicator rows differ in length"));
        }
        Self::new(rows.len(), d, target_row, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.d
    }

    pub fn target_row(&self) -> usize {
        self.target_row
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Number of features on which each row differs from the target.
    pub fn dissimilar_counts(&self) -> Vec<u32> {
        (0..self.n)
            .map(|i| self.row(i).iter().filter(|&&s| !s).count() as u32)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Value of the empty coalition, the dataset mean.
    pub baseline: f64,
    /// Value of the full coalition, the mean over exact matches.
    pub total: f64,
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Attribution {
    fn new(values: Vec<f64>, baseline: f64, total: f64) -> Self {
        let feature_names = (0..values.len()).map(|j| format!("x{j}")).collect();
        Self {
            baseline,
            total,
            values,
            feature_names,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "{} names for {} attribution values",
                names.len(),
                self.values.len()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `|Σ values − (total − baseline)|`.
    pub fn completeness_gap(&self) -> f64 {
        (self.sum() - (self.total - self.baseline)).abs()
    }
}

/// Per-feature similarity thresholds: `ratio * (max - min)` for continuous
/// columns, 0 (exact equality) for categorical ones.
pub fn similarity_thresholds(x: &[Vec<f64>], spec: &SimilaritySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.kinds.len();
    if x.is_empty() {
        return Err(Error::invalid("similarity needs at least one row"));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!("row {i} has {} features, spec has {d}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite feature")));
        }
    }
    Ok((0..d)
        .map(|j| match spec.kinds[j] {
            FeatureKind::Categorical => 0.0,
            FeatureKind::Continuous => {
                let (lo, hi) = x
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
                spec.ratio * (hi - lo)
            }
        })
        .collect())
}

pub fn similarity_matrix(x: &[Vec<f64>], target_row: usize, spec: &SimilaritySpec) -> Result<CohortIndicatorMatrix> {
    let thresholds = similarity_thresholds(x, spec)?;
    similarity_matrix_with(x, target_row, &thresholds)
}

/// [`similarity_matrix`] with thresholds from [`similarity_thresholds`], for
/// explaining several targets of one dataset.
pub fn similarity_matrix_with(x: &[Vec<f64>], target_row: usize, thresholds: &[f64]) -> Result<CohortIndicatorMatrix> {
    if x.iter().any(|row| row.len() != thresholds.len()) {
        return Err(Error::invalid(format!("rows do not all have {} features", thresholds.len())));
    }
    if target_row >= x.len() {
        return Err(Error::invalid(format!("target row {target_row} out of range for {} rows", x.len())));
    }
    let target = &x[target_row];
    let data = x
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(target)
                .zip(thresholds)
                .map(|((a, b), t)| (a - b).abs() <= *t)
        })
        .collect();
    CohortIndicatorMatrix::new(x.len(), thresholds.len(), target_row, data)
}

fn check_y(s: &CohortIndicatorMatrix, y: &[f64]) -> Result<()> {
    if y.len() != s.rows() {
        return Err(Error::invalid(format!("{} outputs for {} rows", y.len(), s.rows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite output value"));
    }
    Ok(())
}

pub fn cohort_value(s: &CohortIndicatorMatrix, y: &[f64], subset: &[usize]) -> Result<f64> {
    check_y(s, y)?;
    if let Some(&j) = subset.iter().find(|&&j| j >= s.features()) {
        return Err(Error::invalid(format!("feature {j} out of range for {} features", s.features())));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, &yi) in y.iter().enumerate() {
        if subset.iter().all(|&j| s.get(i, j)) {
            sum += yi;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Exact Shapley values of the cohort value function.
///
/// Cohort means for all 2^d subsets come from one superset-sum transform over
/// the rows' similarity bitmasks.
pub fn cohort_shapley(s: &CohortIndicatorMatrix, y: &[f64]) -> Result<Attribution> {
    check_y(s, y)?;
    let d = s.features();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::invalid(format!(
            "exact cohort Shapley is limited to {MAX_EXACT_FEATURES} features (got {d}); use igcs instead"
        )));
    }
    let size = 1usize << d;
    let mut sums = vec![0.0f64; size];
    let mut counts = vec![0u32; size];
    for (i, &yi) in y.iter().enumerate() {
        let mask = s
            .row(i)
            .iter()
            .enumerate()
            .fold(0usize, |m, (j, &sim)| if sim { m | 1 << j } else { m });
        sums[mask] += yi;
        counts[mask] += 1;
    }
    for b in 0..d {
        let bit = 1 << b;
        for m in 0..size {
            if m & bit == 0 {
                sums[m] += sums[m | bit];
                counts[m] += counts[m | bit];
            }
        }
    }
    // reuse `sums` as the value table
    for (v, &c) in sums.iter_mut().zip(&counts) {
        *v /= c as f64;
    }
    drop(counts);
    let values = sums;

    // weight of a coalition of size k not containing j: 1 / (d * C(d-1, k))
    let mut weight = vec![0.0; d];
    let mut binom = 1.0;
    for (k, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (d as f64 * binom);
        binom = binom * (d - 1 - k) as f64 / (k + 1) as f64;
    }
    let mut phi = vec![0.0; d];
    for t in 0..size {
        let w = weight.get(t.count_ones() as usize).copied().unwrap_or(0.0);
        for (j, p) in phi.iter_mut().enumerate() {
            if t & (1 << j) == 0 {
                *p += w * (values[t | 1 << j] - values[t]);
            }
        }
    }
    // Identical indicator columns are interchangeable players; the transform
    // sums their terms in different orders, so equalize the rounding.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..d {
        let same = |k: usize| (0..s.rows()).all(|i| s.get(i, j) == s.get(i, k));
        match groups.iter_mut().find(|g| same(g[0])) {
            Some(g) => g.push(j),
            None => groups.push(vec![j]),
        }
    }
    for g in groups.iter().filter(|g| g.len() > 1) {
        let mean = g.iter().map(|&j| phi[j]).sum::<f64>() / g.len() as f64;
        g.iter().for_each(|&j| phi[j] = mean);
    }
    Ok(Attribution::new(phi, values[0], values[size - 1]))
}

fn check_w(s: &CohortIndicatorMatrix, w: &[f64]) -> Result<()> {
    if w.len() != s.features() {
        return Err(Error::invalid(format!("point has {} coordinates for {} features", w.len(), s.features())));
    }
    if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("multilinear point must lie in [0, 1]^d"));
    }
    Ok(())
}

fn row_weight(row: &[bool], w: &[f64]) -> f64 {
    row.iter()
        .zip(w)
        .map(|(&sim, &wj)| if sim { 1.0 } else { 1.0 - wj })
        .product()
}

/// Weighted mean of y with row weights `Π_j (1 − w_j (1 − S_ij))`.
pub fn multilinear_value(s: &CohortIndicatorMatrix, y: &[f64], w: &[f64]) -> Result<f64> {
    check_y(s, y)?;
    check_w(s, w)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        let wi = row_weight(s.row(i), w);
        num += wi * yi;
        den += wi;
    }
    Ok(num / den)
}

/// Analytic gradient of [`multilinear_value`] by the quotient rule.
pub fn multilinear_gradient(s: &CohortIndicatorMatrix, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_y(s, y)?;
    check_w(s, w)?;
    let d = s.features();
    let weights: Vec<f64> = (0..s.rows()).map(|i| row_weight(s.row(i), w)).collect();
    let den: f64 = weights.iter().sum();
    let v = weights.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() / den;

    let mut grad = vec![0.0; d];
    let mut suffix = vec![1.0; d + 1];
    for (i, &yi) in y.iter().enumerate() {
        let row = s.row(i);
        if row.iter().all(|&sim| sim) {
            continue;
        }
        let factor = |k: usize| if row[k] { 1.0 } else { 1.0 - w[k] };
        for k in (0..d).rev() {
            suffix[k] = suffix[k + 1] * factor(k);
        }
        // prefix/suffix products give Π_{k≠j} without dividing by a factor
        let mut prefix = 1.0;
        for j in 0..d {
            if !row[j] {
                grad[j] -= prefix * suffix[j + 1] * (yi - v);
            }
            prefix *= factor(j);
        }
    }
    grad.iter_mut().for_each(|g| *g /= den);
    Ok(grad)
}

/// Row coefficients of the diagonal midpoint-rule IGCS: the attribution of
/// feature j is the sum of `coeff[i]` over rows i dissimilar on j.
///
/// On the diagonal `w = t·1` a row with `m` dissimilar features has weight
/// `(1−t)^m`, so each gradient coordinate is a sum of per-row terms
/// `−(1−t)^(m−1) (y_i − v(t)) / D(t)`.
pub fn igcs_row_coefficients(dissimilar: &[u32], y: &[f64], steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    if dissimilar.len() != y.len() {
        return Err(Error::invalid(format!("{} counts for {} outputs", dissimilar.len(), y.len())));
    }
    if !dissimilar.contains(&0) {
        return Err(Error::invalid("the target row must be in the dataset"));
    }
    let mut coeff = vec![0.0; y.len()];
    let mut weights = vec![0.0; y.len()];
    for k in 0..steps {
        let q = 1.0 - (k as f64 + 0.5) / steps as f64;
        for (w, &m) in weights.iter_mut().zip(dissimilar) {
            *w = q.powi(m as i32);
        }
        let den: f64 = weights.iter().sum();
        let v = weights.iter().zip(y).map(|(w, yi)| w * yi).sum::<f64>() / den;
        for ((c, &m), &yi) in coeff.iter_mut().zip(dissimilar).zip(y) {
            if m > 0 {
                *c -= q.powi(m as i32 - 1) * (yi - v) / den;
            }
        }
    }
    coeff.iter_mut().for_each(|c| *c /= steps as f64);
    Ok(coeff)
}

fn exact_match_mean(dissimilar: &[u32], y: &[f64]) -> f64 {
    let (sum, count) = dissimilar
        .iter()
        .zip(y)
        .filter(|(&m, _)| m == 0)
        .fold((0.0, 0usize), |(s, c), (_, &yi)| (s + yi, c + 1));
    sum / count as f64
}

/// IGCS over a chosen subset of features. Values are identical to the
/// corresponding entries of the full [`igcs`] run.
pub fn igcs_subset(s: &CohortIndicatorMatrix, y: &[f64], steps: usize, features: &[usize]) -> Result<Attribution> {
    check_y(s, y)?;
    if let Some(&j) = features.iter().find(|&&j| j >= s.features()) {
        return Err(Error::invalid(format!("feature {j} out of range for {} features", s.features())));
    }
    let dissimilar = s.dissimilar_counts();
    let coeff = igcs_row_coefficients(&dissimilar, y, steps)?;
    let mut values = vec![0.0; features.len()];
    for (i, &c) in coeff.iter().enumerate() {
        if dissimilar[i] == 0 {
            continue;
        }
        let row = s.row(i);
        for (v, &j) in values.iter_mut().zip(features) {
            if !row[j] {
                *v += c;
            }
        }
    }
    let baseline = y.iter().sum::<f64>() / y.len() as f64;
    let total = exact_match_mean(&dissimilar, y);
    let names = features.iter().map(|j| format!("x{j}")).collect();
    Attribution::new(values, baseline, total).with_names(names)
}

/// Integrated gradients of the multilinear cohort value from `0` to `1`
/// along the diagonal, by the midpoint rule with `steps` nodes.
pub fn igcs(s: &CohortIndicatorMatrix, y: &[f64], steps: usize) -> Result<Attribution> {
    let all: Vec<usize> = (0..s.features()).collect();
    igcs_subset(s, y, steps, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (CohortIndicatorMatrix, Vec<f64>) {
        let target = rng.gen_range(0..n);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..d).map(|_| i == target || rng.gen_bool(0.6)).collect())
            .collect();
        let y = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        (CohortIndicatorMatrix::from_rows(&rows, target).unwrap(), y)
    }

    fn permutations(d: usize) -> Vec<Vec<usize>> {
        if d == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(d - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, d - 1);
                out.push(q);
            }
        }
        out
    }

    /// Average marginal contribution over all orderings, cohort means taken
    /// by direct filtering.
    fn permutation_oracle(s: &CohortIndicatorMatrix, y: &[f64]) -> Vec<f64> {
        let d = s.features();
        let perms = permutations(d);
        let mut phi = vec![0.0; d];
        for p in &perms {
            let mut coalition = Vec::new();
            let mut prev = cohort_value(s, y, &coalition).unwrap();
            for &j in p {
                coalition.push(j);
                let next = cohort_value(s, y, &coalition).unwrap();
                phi[j] += next - prev;
                prev = next;
            }
        }
        phi.iter().map(|v| v / perms.len() as f64).collect()
    }

    #[test]
    fn similarity_rules() {
        let x = vec![
            vec![0.0, 1.0, 5.0],
            vec![10.0, 2.0, 5.0],
            vec![0.1, 1.0, 5.0],
            vec![0.1000001, 3.0, 5.0],
        ];
        let spec = SimilaritySpec {
            kinds: vec![FeatureKind::Continuous, FeatureKind::Categorical, FeatureKind::Continuous],
            ratio: 0.01,
        };
        let s = similarity_matrix(&x, 0, &spec).unwrap();
        assert!(s.row(0).iter().all(|&v| v));
        assert_eq!(s.row(1), &[false, false, true]);
        assert_eq!(s.row(2), &[true, true, true]);
        assert_eq!(s.row(3), &[false, false, true]);
        assert_eq!(s.dissimilar_counts(), vec![0, 2, 0, 2]);
        assert!(similarity_matrix(&x, 4, &spec).is_err());
        let bad = SimilaritySpec { ratio: 0.0, ..spec };
        assert!(similarity_matrix(&x, 0, &bad).is_err());
    }

    #[test]
    fn matrix_requires_self_similar_target() {
        assert!(CohortIndicatorMatrix::from_rows(&[vec![true, false], vec![true, true]], 0).is_err());
        assert!(CohortIndicatorMatrix::from_rows(&[vec![true, false], vec![true, true]], 1).is_ok());
    }

    #[test]
    fn cohort_value_by_hand() {
        // rows: target (y=4), similar on f0 (y=2), on f1 (y=6), neither (y=0)
        let s = CohortIndicatorMatrix::from_rows(
            &[vec![true, true], vec![true, false], vec![false, true], vec![false, false]],
            0,
        )
        .unwrap();
        let y = [4.0, 2.0, 6.0, 0.0];
        assert_eq!(cohort_value(&s, &y, &[]).unwrap(), 3.0);
        assert_eq!(cohort_value(&s, &y, &[0]).unwrap(), 3.0);
        assert_eq!(cohort_value(&s, &y, &[1]).unwrap(), 5.0);
        assert_eq!(cohort_value(&s, &y, &[0, 1]).unwrap(), 4.0);
        assert!(cohort_value(&s, &y, &[2]).is_err());
        assert!(cohort_value(&s, &y[..3], &[]).is_err());
        // phi0 = ((3-3) + (4-5))/2, phi1 = ((5-3) + (4-3))/2
        let a = cohort_shapley(&s, &y).unwrap();
        assert_eq!(a.values, vec![-0.5, 1.5]);
        assert_eq!((a.baseline, a.total), (3.0, 4.0));
    }

    #[test]
    fn shapley_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let (s, y) = random_instance(&mut rng, 12, 5);
            let a = cohort_shapley(&s, &y).unwrap();
            assert!(a.completeness_gap() < 1e-9);
            let oracle = permutation_oracle(&s, &y);
            for (p, q) in a.values.iter().zip(&oracle) {
                assert!((p - q).abs() < 1e-9);
            }
        }
        // constant output
        let (s, _) = random_instance(&mut rng, 10, 4);
        let a = cohort_shapley(&s, &[2.5; 10]).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dummy_symmetry_and_duplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 15;
        let target = 3;
        let col: Vec<bool> = (0..n).map(|i| i == target || rng.gen_bool(0.5)).collect();
        let other: Vec<bool> = (0..n).map(|i| i == target || rng.gen_bool(0.5)).collect();
        let rows: Vec<Vec<bool>> = (0..n).map(|i| vec![col[i], true, col[i], other[i]]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s = CohortIndicatorMatrix::from_rows(&rows, target).unwrap();
        let a = cohort_shapley(&s, &y).unwrap();
        assert_eq!(a.values[1], 0.0);
        assert_eq!(a.values[0], a.values[2]);

        let doubled_rows: Vec<Vec<bool>> = rows.iter().chain(&rows).cloned().collect();
        let doubled_y: Vec<f64> = y.iter().chain(&y).copied().collect();
        let s2 = CohortIndicatorMatrix::from_rows(&doubled_rows, target).unwrap();
        let b = cohort_shapley(&s2, &doubled_y).unwrap();
        for (p, q) in a.values.iter().zip(&b.values) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn shapley_budget() {
        let d = MAX_EXACT_FEATURES + 1;
        let s = CohortIndicatorMatrix::from_rows(&[vec![true; d], vec![false; d]], 0).unwrap();
        let err = cohort_shapley(&s, &[1.0, 0.0]).unwrap_err().to_string();
        assert!(err.contains("igcs"), "{err}");
    }

    #[test]
    fn multilinear_corners_and_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (s, y) = random_instance(&mut rng, 20, 4);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((multilinear_value(&s, &y, &[0.0; 4]).unwrap() - mean).abs() < 1e-12);
        for mask in 0..16usize {
            let w: Vec<f64> = (0..4).map(|j| ((mask >> j) & 1) as f64).collect();
            let subset: Vec<usize> = (0..4).filter(|j| mask >> j & 1 == 1).collect();
            assert_eq!(
                multilinear_value(&s, &y, &w).unwrap(),
                cohort_value(&s, &y, &subset).unwrap()
            );
        }
        // one fractional coordinate: numerator and denominator both interpolate
        let w = [1.0, 0.3, 0.0, 1.0];
        let lo: Vec<usize> = vec![0, 3];
        let hi: Vec<usize> = vec![0, 1, 3];
        let count = |sub: &[usize]| (0..20).filter(|&i| sub.iter().all(|&j| s.get(i, j))).count() as f64;
        let (c0, c1) = (count(&lo), count(&hi));
        let (v0, v1) = (cohort_value(&s, &y, &lo).unwrap(), cohort_value(&s, &y, &hi).unwrap());
        let expected = (0.7 * c0 * v0 + 0.3 * c1 * v1) / (0.7 * c0 + 0.3 * c1);
        assert!((multilinear_value(&s, &y, &w).unwrap() - expected).abs() < 1e-12);
        assert!(multilinear_value(&s, &y, &[0.0, 1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_cases() {
        let s = CohortIndicatorMatrix::from_rows(&vec![vec![true; 3]; 4], 2).unwrap();
        let g = multilinear_gradient(&s, &[1.0, 2.0, 3.0, 4.0], &[0.4; 3]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (s, y) = random_instance(&mut rng, 16, 6);
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(0.01..0.99)).collect();
            let g = multilinear_gradient(&s, &y, &w).unwrap();
            let h = 1e-6;
            for j in 0..6 {
                let mut up = w.clone();
                let mut dn = w.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (multilinear_value(&s, &y, &up).unwrap() - multilinear_value(&s, &y, &dn).unwrap()) / (2.0 * h);
                assert!((g[j] - fd).abs() < 1e-5, "{} vs {fd}", g[j]);
                if (0..16).all(|i| s.get(i, j)) {
                    assert_eq!(g[j], 0.0);
                }
            }
        }
    }

    /// IGCS recomputed from the general gradient at each midpoint.
    fn igcs_by_gradient(s: &CohortIndicatorMatrix, y: &[f64], steps: usize) -> Vec<f64> {
        let d = s.features();
        let mut phi = vec![0.0; d];
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64;
            let g = multilinear_gradient(s, y, &vec![t; d]).unwrap();
            phi.iter_mut().zip(&g).for_each(|(p, gj)| *p += gj);
        }
        phi.iter().map(|p| p / steps as f64).collect()
    }

    #[test]
    fn igcs_matches_general_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let (s, y) = random_instance(&mut rng, 25, 7);
            let a = igcs(&s, &y, 40).unwrap();
            let b = igcs_by_gradient(&s, &y, 40);
            for (p, q) in a.values.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn igcs_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (s, _) = random_instance(&mut rng, 10, 3);
        let a = igcs(&s, &[1.0; 10], 50).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
        assert!(igcs(&s, &[1.0; 10], 0).is_err());

        // one feature: the path integral is v(1) - v(0) up to quadrature
        let rows: Vec<Vec<bool>> = (0..9).map(|i| vec![i % 3 == 0]).collect();
        let y: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let s = CohortIndicatorMatrix::from_rows(&rows, 0).unwrap();
        let a = igcs(&s, &y, 500).unwrap();
        assert_eq!((a.baseline, a.total), (4.0, 3.0));
        // midpoint error shrinks with the square of the step count
        assert!(a.completeness_gap() < 1e-5);
        assert!(igcs(&s, &y, 5000).unwrap().completeness_gap() < 1e-7);
        let s = CohortIndicatorMatrix::from_rows(&[vec![true], vec![false]], 0).unwrap();
        let a = igcs(&s, &[2.0, -1.0], 500).unwrap();
        assert!((a.values[0] - 1.5).abs() < 1e-6);

        for _ in 0..20 {
            let d = rng.gen_range(2..=8);
            let (s, y) = random_instance(&mut rng, 30, d);
            let fine = igcs(&s, &y, 500).unwrap();
            assert!(fine.completeness_gap() <= 1e-3);
            let cs = cohort_shapley(&s, &y).unwrap();
            let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            for (p, q) in fine.values.iter().zip(&cs.values) {
                assert!((p - q).abs() <= 0.05 * (hi - lo), "{p} vs {q}");
            }
        }
    }

    #[test]
    fn igcs_subset_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (s, y) = random_instance(&mut rng, 40, 8);
        let full = igcs(&s, &y, 50).unwrap();
        let part = igcs_subset(&s, &y, 50, &[6, 1]).unwrap();
        assert_eq!(part.values, vec![full.values[6], full.values[1]]);
        assert_eq!(part.feature_names, vec!["x6", "x1"]);
        assert!(igcs_subset(&s, &y, 50, &[8]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn corner_identity(seed in 0u64..1000, d in 1usize..6, mask in 0usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, y) = random_instance(&mut rng, 12, d);
            let mask = mask & ((1 << d) - 1);
            let w: Vec<f64> = (0..d).map(|j| ((mask >> j) & 1) as f64).collect();
            let subset: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
            prop_assert_eq!(multilinear_value(&s, &y, &w).unwrap(), cohort_value(&s, &y, &subset).unwrap());
        }

        #[test]
        fn efficiency(seed in 0u64..1000, d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, y) = random_instance(&mut rng, 20, d);
            prop_assert!(cohort_shapley(&s, &y).unwrap().completeness_gap() < 1e-9);
        }
    }
}
