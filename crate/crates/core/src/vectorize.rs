//! Persistence diagrams to fixed-length feature vectors.
//!
//! Each diagram becomes a `bins x bins` histogram over birth (rows) and
//! persistence (columns), smoothed with a Gaussian whose width is given in
//! diagram units. The model input is the H1 image followed by the H2 image,
//! both row-major, so pixel `(dim, i, j)` lives at
//! `(dim - 1) * bins^2 + i * bins + j`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

pub const DEFAULT_BINS: usize = 54;
pub const DEFAULT_SIGMA: f64 = 0.15;

/// Slack, in bin units, absorbed when locating a bin. Keeps values such as
/// `17.9 - 13.5` that land a few ulps under a bin edge in the bin the exact
/// arithmetic would choose.
const BIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub dimension: usize,
    pub birth_max: f64,
    pub persistence_max: f64,
    pub bins: usize,
    pub blur_sigma: f64,
}

impl HistogramSpec {
    pub fn h1() -> Self {
        Self {
            dimension: 1,
            birth_max: 27.0,
            persistence_max: 8.8,
            bins: DEFAULT_BINS,
            blur_sigma: DEFAULT_SIGMA,
        }
    }

    pub fn h2() -> Self {
        Self {
            dimension: 2,
            birth_max: 27.0,
            persistence_max: 3.5,
            bins: DEFAULT_BINS,
            blur_sigma: DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::invalid(format!("histogram dimension {}", self.dimension)));
        }
        if !(self.birth_max > 0.0 && self.persistence_max > 0.0) {
            return Err(Error::invalid("histogram axis maxima must be > 0"));
        }
        if self.bins == 0 {
            return Err(Error::invalid("histogram needs at least one bin"));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::invalid(format!("blur sigma {}", self.blur_sigma)));
        }
        Ok(())
    }

    /// Bin along an axis of length `max`; the last bin is closed.
    fn bin(&self, value: f64, max: f64) -> Option<usize> {
        if !(value >= 0.0 && value <= max) {
            return None;
        }
        let t = (value / max * self.bins as f64 + BIN_EPS).floor() as usize;
        Some(t.min(self.bins - 1))
    }

    /// `(birth bin, persistence bin)` of a diagram point, if inside the window.
    pub fn locate(&self, birth: f64, death: f64) -> Option<(usize, usize)> {
        Some((
            self.bin(birth, self.birth_max)?,
            self.bin(death - birth, self.persistence_max)?,
        ))
    }
}

/// A `bins x bins` image, birth-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeImage {
    pub spec: HistogramSpec,
    pub values: Vec<f64>,
}

impl LandscapeImage {
    pub fn zeros(spec: HistogramSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.bins * spec.bins],
        }
    }

    pub fn get(&self, birth_bin: usize, persistence_bin: usize) -> f64 {
        self.values[birth_bin * self.spec.bins + persistence_bin]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub image: LandscapeImage,
    /// Pairs outside the birth/persistence window.
    pub dropped: usize,
}

pub fn histogram(diagram: &PersistenceDiagram, spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    if diagram.dimension != spec.dimension {
        return Err(Error::invalid(format!(
            "H{} diagram binned with an H{} spec",
            diagram.dimension, spec.dimension
        )));
    }
    let mut image = LandscapeImage::zeros(*spec);
    let mut dropped = 0;
    for p in &diagram.pairs {
        match spec.locate(p.birth, p.death) {
            Some((i, j)) => image.values[i * spec.bins + j] += 1.0,
            None => dropped += 1,
        }
    }
    Ok(Histogram { image, dropped })
}

/// Normalised 1D Gaussian truncated at three standard deviations.
fn kernel(sigma_bins: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_bins).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-0.5 * (x / sigma_bins).powi(2)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Normalised convolution along one axis: the kernel is renormalised over
/// the in-range taps, so constants are preserved at the border.
fn blur_axis(values: &[f64], bins: usize, kernel: &[f64], along_rows: bool) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut out = vec![0.0; values.len()];
    for a in 0..bins {
        for b in 0..bins {
            let mut acc = 0.0;
            let mut weight = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let Some(pos) = (b + t).checked_sub(radius) else {
                    continue;
                };
                if pos >= bins {
                    continue;
                }
                let idx = if along_rows { pos * bins + a } else { a * bins + pos };
                acc += w * values[idx];
                weight += w;
            }
            let idx = if along_rows { b * bins + a } else { a * bins + b };
            out[idx] = acc / weight;
        }
    }
    out
}

/// Separable Gaussian smoothing with `spec.blur_sigma` converted to bins
/// independently per axis. Sigma 0 is the identity.
pub fn gaussian_blur(image: &LandscapeImage) -> LandscapeImage {
    let spec = image.spec;
    if spec.blur_sigma == 0.0 {
        return image.clone();
    }
    let bins = spec.bins;
    let sigma_birth = spec.blur_sigma * bins as f64 / spec.birth_max;
    let sigma_pers = spec.blur_sigma * bins as f64 / spec.persistence_max;
    let along_birth = blur_axis(&image.values, bins, &kernel(sigma_birth), true);
    let values = blur_axis(&along_birth, bins, &kernel(sigma_pers), false);
    LandscapeImage { spec, values }
}

/// Histogram then blur.
pub fn landscape(diagram: &PersistenceDiagram, spec: &HistogramSpec) -> Result<Histogram> {
    let Histogram { image, dropped } = histogram(diagram, spec)?;
    Ok(Histogram {
        image: gaussian_blur(&image),
        dropped,
    })
}

/// Flat model input: H1 pixels then H2 pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

pub fn features(h1: &LandscapeImage, h2: &LandscapeImage) -> Result<FeatureVector> {
    if h1.spec.dimension != 1 || h2.spec.dimension != 2 {
        return Err(Error::invalid("features take an H1 image then an H2 image"));
    }
    if h1.spec.bins != h2.spec.bins {
        return Err(Error::invalid(format!(
            "bin mismatch: H1 has {}, H2 has {}",
            h1.spec.bins, h2.spec.bins
        )));
    }
    let mut v = Vec::with_capacity(h1.values.len() * 2);
    v.extend_from_slice(&h1.values);
    v.extend_from_slice(&h2.values);
    Ok(FeatureVector(v))
}

/// Inverse of [`features`].
pub fn unflatten(
    v: &FeatureVector,
    h1: &HistogramSpec,
    h2: &HistogramSpec,
) -> Result<(LandscapeImage, LandscapeImage)> {
    let per = h1.bins * h1.bins;
    if h1.bins != h2.bins || v.0.len() != 2 * per {
        return Err(Error::invalid(format!(
            "feature vector of length {} does not match {} bins",
            v.0.len(),
            h1.bins
        )));
    }
    Ok((
        LandscapeImage {
            spec: *h1,
            values: v.0[..per].to_vec(),
        },
        LandscapeImage {
            spec: *h2,
            values: v.0[per..].to_vec(),
        },
    ))
}

/// Flat feature index of pixel `(dimension, birth bin, persistence bin)`.
pub fn pixel_index(dimension: usize, birth_bin: usize, persistence_bin: usize, bins: usize) -> usize {
    (dimension - 1) * bins * bins + birth_bin * bins + persistence_bin
}

/// Inverse of [`pixel_index`].
pub fn pixel_of(index: usize, bins: usize) -> (usize, usize, usize) {
    let per = bins * bins;
    (index / per + 1, (index % per) / bins, index % bins)
}

/// `bins` comma-separated lines of `bins` values, birth-major.
pub fn grid_to_csv(values: &[f64], bins: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(bins) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses a square numeric CSV grid. Returns `(values, side)`.
pub fn grid_from_csv(text: &str) -> Result<(Vec<f64>, usize)> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::invalid(format!("line {}: non-numeric cell {f:?}", line_no + 1))
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::invalid(format!(
                    "line {}: {} cells, expected {w}",
                    line_no + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    match width {
        Some(w) if w == rows => Ok((values, rows)),
        Some(w) => Err(Error::invalid(format!("grid is {rows}x{w}, expected square"))),
        None => Err(Error::invalid("empty grid")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistencePair;
    use proptest::prelude::*;

    fn pair(dimension: usize, birth: f64, death: f64) -> PersistencePair {
        PersistencePair {
            dimension,
            birth,
            death,
            birth_simplex: 0,
            death_simplex: 0,
        }
    }

    fn h1_diagram(pairs: Vec<(f64, f64)>) -> PersistenceDiagram {
        PersistenceDiagram {
            dimension: 1,
            pairs: pairs.into_iter().map(|(b, d)| pair(1, b, d)).collect(),
        }
    }

    #[test]
    fn empty_diagram_gives_zero_image() {
        let h = histogram(&h1_diagram(vec![]), &HistogramSpec::h1()).unwrap();
        assert!(h.image.values.iter().all(|&v| v == 0.0));
        assert_eq!(h.dropped, 0);
    }

    #[test]
    fn single_pair_bin() {
        let h = histogram(&h1_diagram(vec![(13.5, 17.9)]), &HistogramSpec::h1()).unwrap();
        assert_eq!(h.image.get(27, 27), 1.0);
        assert_eq!(h.image.total(), 1.0);
    }

    #[test]
    fn out_of_window_pairs_are_tallied() {
        let h = histogram(&h1_diagram(vec![(1.0, 10.0), (28.0, 29.0), (1.0, 2.0)]), &HistogramSpec::h1())
            .unwrap();
        assert_eq!(h.dropped, 2);
        assert_eq!(h.image.total(), 1.0);
    }

    #[test]
    fn last_bin_is_closed() {
        let h = histogram(&h1_diagram(vec![(27.0, 35.8)]), &HistogramSpec::h1()).unwrap();
        assert_eq!(h.image.get(53, 53), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(histogram(&h1_diagram(vec![]), &HistogramSpec::h2()).is_err());
    }

    #[test]
    fn blur_identity_and_constants() {
        let mut spec = HistogramSpec::h1();
        spec.blur_sigma = 0.0;
        let mut img = LandscapeImage::zeros(spec);
        img.values[100] = 3.0;
        assert_eq!(gaussian_blur(&img), img);

        spec.blur_sigma = 0.4;
        let c = LandscapeImage {
            spec,
            values: vec![2.5; spec.bins * spec.bins],
        };
        for v in gaussian_blur(&c).values {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_preserves_interior_mass() {
        let mut img = LandscapeImage::zeros(HistogramSpec::h1());
        img.values[27 * 54 + 27] = 1.0;
        let out = gaussian_blur(&img);
        assert!((out.total() - 1.0).abs() < 1e-9);
        assert!(out.get(27, 27) < 1.0);
        assert!(out.get(27, 28) > 0.0);
        assert!(out.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn kernel_radius_in_bins() {
        // 0.15 units is 0.3 birth bins and ~0.92 persistence bins
        let s = HistogramSpec::h1();
        assert_eq!(kernel(s.blur_sigma * 54.0 / 27.0).len(), 3);
        assert_eq!(kernel(s.blur_sigma * 54.0 / 8.8).len(), 7);
    }

    #[test]
    fn feature_layout() {
        let z1 = LandscapeImage::zeros(HistogramSpec::h1());
        let z2 = LandscapeImage::zeros(HistogramSpec::h2());
        let f = features(&z1, &z2).unwrap();
        assert_eq!(f.0.len(), 5832);
        assert!(f.0.iter().all(|&v| v == 0.0));

        let mut a = z1.clone();
        a.values[3 * 54 + 5] = 1.0;
        let mut b = z2.clone();
        b.values[7 * 54 + 9] = 2.0;
        let f = features(&a, &b).unwrap();
        assert_eq!(f.0[pixel_index(1, 3, 5, 54)], 1.0);
        assert_eq!(pixel_index(1, 3, 5, 54), 3 * 54 + 5);
        assert_eq!(f.0[2916 + 7 * 54 + 9], 2.0);
        assert_eq!(pixel_of(2916 + 7 * 54 + 9, 54), (2, 7, 9));

        let mut small = HistogramSpec::h2();
        small.bins = 10;
        assert!(features(&a, &LandscapeImage::zeros(small)).is_err());
    }

    #[test]
    fn csv_grid_round_trip() {
        let values: Vec<f64> = (0..9).map(|v| v as f64 / 7.0).collect();
        let (back, side) = grid_from_csv(&grid_to_csv(&values, 3)).unwrap();
        assert_eq!(side, 3);
        assert_eq!(back, values);
        assert!(grid_from_csv("1,2\n3\n").is_err());
        assert!(grid_from_csv("1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn mass_plus_drops_is_pair_count(
            pairs in prop::collection::vec((0.0f64..30.0, 0.0f64..10.0), 0..40)
        ) {
            let d = h1_diagram(pairs.iter().map(|&(b, p)| (b, b + p)).collect());
            let h = histogram(&d, &HistogramSpec::h1()).unwrap();
            prop_assert_eq!(h.image.total() as usize + h.dropped, d.len());
        }

        #[test]
        fn features_round_trip(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (s1, s2) = (HistogramSpec::h1(), HistogramSpec::h2());
            let a = LandscapeImage { spec: s1, values: (0..2916).map(|_| rng.gen()).collect() };
            let b = LandscapeImage { spec: s2, values: (0..2916).map(|_| rng.gen()).collect() };
            let (x, y) = unflatten(&features(&a, &b).unwrap(), &s1, &s2).unwrap();
            prop_assert_eq!(x, a);
            prop_assert_eq!(y, b);
        }
    }
}
