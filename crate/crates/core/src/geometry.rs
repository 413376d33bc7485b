//! Point clouds and everything that happens to them before persistence:
//! XYZ I/O, the synthetic structure generator, perturbation cohorts and
//! Cartesian grid featurization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Label written for points that carry none.
pub const DEFAULT_LABEL: &str = "X";

/// An ordered list of 3D points. The position in `points` is the canonical
/// point index used by every downstream attribution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Per-point labels; when present, same length as `points`.
    pub labels: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("non-finite coordinate {p:?}")));
        }
        Ok(Self {
            points,
            labels: None,
        })
    }

    pub fn with_labels(points: Vec<Point>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        self.labels
            .as_ref()
            .map(|l| l[i].as_str())
            .unwrap_or(DEFAULT_LABEL)
    }

    /// Largest pairwise Euclidean distance, 0 for fewer than two points.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.max(distance(a, b));
            }
        }
        best
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

// ---------------------------------------------------------------------------
// XYZ files

/// Parses XYZ text: a point count, a comment line, then `label x y z` lines.
/// `origin` only feeds error messages.
pub fn parse_xyz(text: &str, origin: &Path) -> Result<PointCloud> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let count_line = lines
        .next()
        .ok_or_else(|| err(1, "missing point count".into()))?;
    let count: usize = count_line
        .trim()
        .parse()
        .map_err(|_| err(1, format!("malformed point count {:?}", count_line.trim())))?;
    if lines.next().is_none() {
        return Err(err(2, "missing comment line".into()));
    }

    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let line_no = k + 3;
        let line = lines
            .next()
            .ok_or_else(|| err(line_no, format!("expected {count} points, found {k}")))?;
        let mut fields = line.split_whitespace();
        let label = fields
            .next()
            .ok_or_else(|| err(line_no, "empty point line".into()))?;
        let mut p = [0.0; 3];
        for (axis, slot) in p.iter_mut().enumerate() {
            let field = fields
                .next()
                .ok_or_else(|| err(line_no, format!("missing coordinate {axis}")))?;
            let v: f64 = field
                .parse()
                .map_err(|_| err(line_no, format!("non-numeric coordinate {field:?}")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite coordinate {field:?}")));
            }
            *slot = v;
        }
        points.push(p);
        labels.push(label.to_string());
    }
    Ok(PointCloud {
        points,
        labels: Some(labels),
    })
}

pub fn load_xyz(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_xyz(&text, path)
}

/// Renders a cloud as XYZ text with six decimals per coordinate.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(32 * (cloud.len() + 1));
    let _ = writeln!(out, "{}", cloud.len());
    out.push('\n');
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {:.6} {:.6} {:.6}",
            cloud.label(i),
            p[0],
            p[1],
            p[2]
        );
    }
    out
}

pub fn save_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    std::fs::write(path, format_xyz(cloud))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

// ---------------------------------------------------------------------------
// Grids

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point,
    pub cell_size: f64,
    pub cells_per_axis: usize,
}

impl Default for GridSpec {
    /// 57 cells of size 2 per axis: a cube of side 114.
    fn default() -> Self {
        Self {
            origin: [0.0; 3],
            cell_size: 2.0,
            cells_per_axis: 57,
        }
    }
}

impl GridSpec {
    pub fn new(origin: Point, cell_size: f64, cells_per_axis: usize) -> Result<Self> {
        let spec = Self {
            origin,
            cell_size,
            cells_per_axis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::invalid(format!("cell size {} must be > 0", self.cell_size)));
        }
        if self.cells_per_axis == 0 {
            return Err(Error::invalid("cells_per_axis must be >= 1"));
        }
        if self.origin.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn side(&self) -> f64 {
        self.cell_size * self.cells_per_axis as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(3)
    }

    pub fn center(&self) -> Point {
        let h = self.side() / 2.0;
        [self.origin[0] + h, self.origin[1] + h, self.origin[2] + h]
    }

    /// Cell holding `p` under half-open membership, or `None` outside the cube.
    pub fn cell_of(&self, p: &Point) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for axis in 0..3 {
            let t = ((p[axis] - self.origin[axis]) / self.cell_size).floor();
            if !(t >= 0.0 && t < self.cells_per_axis as f64) {
                return None;
            }
            idx[axis] = t as usize;
        }
        Some(idx)
    }

    /// Flat index, x-major then y then z.
    pub fn flat_index(&self, cell: [usize; 3]) -> usize {
        let n = self.cells_per_axis;
        (cell[0] * n + cell[1]) * n + cell[2]
    }

    pub fn unflatten(&self, index: usize) -> [usize; 3] {
        let n = self.cells_per_axis;
        [index / (n * n), (index / n) % n, index % n]
    }

    pub fn cell_center(&self, cell: [usize; 3]) -> Point {
        let h = self.cell_size;
        [
            self.origin[0] + (cell[0] as f64 + 0.5) * h,
            self.origin[1] + (cell[1] as f64 + 0.5) * h,
            self.origin[2] + (cell[2] as f64 + 0.5) * h,
        ]
    }
}

/// Per-cell point counts of one cloud over a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridCounts {
    pub spec: GridSpec,
    pub counts: Vec<u32>,
    /// Points that fell outside the cube.
    pub overflow: usize,
}

pub fn grid_counts(cloud: &PointCloud, spec: &GridSpec) -> GridCounts {
    let mut counts = vec![0u32; spec.cell_count()];
    let mut overflow = 0;
    for p in &cloud.points {
        match spec.cell_of(p) {
            Some(cell) => counts[spec.flat_index(cell)] += 1,
            None => overflow += 1,
        }
    }
    GridCounts {
        spec: *spec,
        counts,
        overflow,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub cells: usize,
    /// Cells without a point in any cloud of the dataset.
    pub empty_cells: usize,
    /// For every cell occupied somewhere: the number of clouds occupying it.
    pub occupied_histogram: BTreeMap<usize, usize>,
}

pub fn occupancy_stats(dataset: &[GridCounts]) -> Result<OccupancyStats> {
    let Some(first) = dataset.first() else {
        return Err(Error::invalid("occupancy of an empty dataset"));
    };
    if dataset.iter().any(|g| g.spec != first.spec) {
        return Err(Error::invalid("grid counts use different grid specs"));
    }
    let mut occupied_histogram = BTreeMap::new();
    for cell in 0..first.spec.cell_count() {
        let clouds = dataset.iter().filter(|g| g.counts[cell] > 0).count();
        if clouds > 0 {
            occupied_histogram.insert(cell, clouds);
        }
    }
    Ok(OccupancyStats {
        cells: first.spec.cell_count(),
        empty_cells: first.spec.cell_count() - occupied_histogram.len(),
        occupied_histogram,
    })
}

// ---------------------------------------------------------------------------
// Distances

/// Dense symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::invalid(format!("distance d({i},{j}) = {d}")));
                }
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&cloud.points[i], &cloud.points[j]);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

// ---------------------------------------------------------------------------
// Perturbation

/// Moves every point by exactly `length` along its own uniformly random
/// direction.
pub fn perturb(cloud: &PointCloud, length: f64, seed: u64) -> Result<PointCloud> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!("perturbation length {length} must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let u = random_unit_vector(&mut rng);
            [
                p[0] + length * u[0],
                p[1] + length * u[1],
                p[2] + length * u[2],
            ]
        })
        .collect();
    Ok(PointCloud {
        points,
        labels: cloud.labels.clone(),
    })
}

/// Archimedes: z uniform on [-1, 1] and azimuth uniform gives a uniform
/// point on the sphere.
fn random_unit_vector(rng: &mut impl Rng) -> Point {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    let v = [r * phi.cos(), r * phi.sin(), z];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

// ---------------------------------------------------------------------------
// Synthetic structures

pub const TEMPLATES: [&str; 4] = ["sql", "tet", "pri", "pyr"];
pub const NODES: [&str; 6] = ["mono", "dimer", "bent", "trimer", "chain", "tetramer"];
pub const EDGES: [&str; 8] = [
    "bead1", "bead2", "bead3", "kink", "ring3", "zigzag", "pair", "arc",
];

/// Categorical generator inputs. `node2` and `edge` may be absent; absence
/// is its own category and only matches absence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamVector {
    pub template: String,
    pub node1: String,
    pub node2: Option<String>,
    pub edge: Option<String>,
}

/// Parameter slot names, in feature order.
pub const PARAM_NAMES: [&str; 4] = ["template", "node1", "node2", "edge"];

/// Categorical code used for an absent slot.
pub const NONE_CODE: f64 = -1.0;

impl ParamVector {
    pub fn new(template: &str, node1: &str, node2: Option<&str>, edge: Option<&str>) -> Self {
        Self {
            template: template.into(),
            node1: node1.into(),
            node2: node2.map(Into::into),
            edge: edge.map(Into::into),
        }
    }

    /// Vocabulary positions of the four slots, [`NONE_CODE`] for absent ones.
    pub fn codes(&self) -> Result<[f64; 4]> {
        let find = |vocab: &[&str], v: &str, slot: &str| {
            vocab
                .iter()
                .position(|x| *x == v)
                .map(|i| i as f64)
                .ok_or_else(|| Error::invalid(format!("unknown {slot} value {v:?}")))
        };
        Ok([
            find(&TEMPLATES, &self.template, "template")?,
            find(&NODES, &self.node1, "node")?,
            match &self.node2 {
                Some(v) => find(&NODES, v, "node")?,
                None => NONE_CODE,
            },
            match &self.edge {
                Some(v) => find(&EDGES, v, "edge")?,
                None => NONE_CODE,
            },
        ])
    }

    /// Every admissible parameter vector, in a fixed order.
    pub fn vocabulary() -> Vec<ParamVector> {
        let node2s = std::iter::once(None).chain(NODES.iter().map(|n| Some(*n)));
        let node2s: Vec<_> = node2s.collect();
        let edges: Vec<_> = std::iter::once(None)
            .chain(EDGES.iter().map(|e| Some(*e)))
            .collect();
        let mut out = Vec::new();
        for t in TEMPLATES {
            for n1 in NODES {
                for n2 in &node2s {
                    for e in &edges {
                        out.push(ParamVector::new(t, n1, *n2, *e));
                    }
                }
            }
        }
        out
    }
}

impl std::fmt::Display for ParamVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.template,
            self.node1,
            self.node2.as_deref().unwrap_or("-"),
            self.edge.as_deref().unwrap_or("-")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub grid: GridSpec,
    /// Inner radius of the void shell scored by [`synthetic_target`].
    pub probe_radius: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            probe_radius: 1.9,
        }
    }
}

/// Node positions and connecting edges of a template.
fn template_frame(name: &str) -> Option<(Vec<Point>, Vec<(usize, usize)>)> {
    let frame = match name {
        // square layer
        "sql" => {
            let a = 9.0;
            (
                vec![[0.0, 0.0, 0.0], [a, 0.0, 0.0], [a, a, 0.0], [0.0, a, 0.0]],
                vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            )
        }
        // regular tetrahedron
        "tet" => {
            let a = 10.0;
            let s3 = 3f64.sqrt();
            (
                vec![
                    [0.0, 0.0, 0.0],
                    [a, 0.0, 0.0],
                    [a / 2.0, a * s3 / 2.0, 0.0],
                    [a / 2.0, a * s3 / 6.0, a * (2.0f64 / 3.0).sqrt()],
                ],
                vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            )
        }
        // triangular prism
        "pri" => {
            let a = 8.0;
            let h = 7.0;
            let s3 = 3f64.sqrt();
            (
                vec![
                    [0.0, 0.0, 0.0],
                    [a, 0.0, 0.0],
                    [a / 2.0, a * s3 / 2.0, 0.0],
                    [0.0, 0.0, h],
                    [a, 0.0, h],
                    [a / 2.0, a * s3 / 2.0, h],
                ],
                vec![
                    (0, 1),
                    (1, 2),
                    (2, 0),
                    (3, 4),
                    (4, 5),
                    (5, 3),
                    (0, 3),
                    (1, 4),
                    (2, 5),
                ],
            )
        }
        // square pyramid
        "pyr" => {
            let a = 9.0;
            (
                vec![
                    [0.0, 0.0, 0.0],
                    [a, 0.0, 0.0],
                    [a, a, 0.0],
                    [0.0, a, 0.0],
                    [a / 2.0, a / 2.0, 6.5],
                ],
                vec![
                    (0, 1),
                    (1, 2),
                    (2, 3),
                    (3, 0),
                    (0, 4),
                    (1, 4),
                    (2, 4),
                    (3, 4),
                ],
            )
        }
        _ => return None,
    };
    Some(frame)
}

/// Offsets of a node decoration cluster around its node.
fn node_cluster(name: &str) -> Option<Vec<Point>> {
    let s3 = 3f64.sqrt();
    let cluster = match name {
        "mono" => vec![[0.0, 0.0, 0.0]],
        "dimer" => vec![[-0.8, 0.0, 0.0], [0.8, 0.0, 0.0]],
        "bent" => vec![[-0.9, 0.0, 0.0], [0.9, 0.0, 0.0], [0.0, 1.3, 0.0]],
        "trimer" => vec![
            [1.1, 0.0, 0.0],
            [-0.55, 0.55 * s3, 0.0],
            [-0.55, -0.55 * s3, 0.0],
        ],
        "chain" => vec![[-1.4, 0.0, 0.0], [0.0, 0.0, 0.0], [1.4, 0.0, 0.0]],
        "tetramer" => vec![
            [1.2, 0.0, 0.0],
            [0.0, 1.2, 0.0],
            [-1.2, 0.0, 0.0],
            [0.0, -1.2, 0.0],
        ],
        _ => return None,
    };
    Some(cluster)
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(a: Point) -> Point {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Points a linker places on the segment `a`–`b`.
fn linker_points(name: &str, a: &Point, b: &Point) -> Option<Vec<Point>> {
    let u = normalized(sub(b, a));
    let helper = if u[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let v = normalized(cross(&u, &helper));
    let w = cross(&u, &v);
    let at = |t: f64, dv: f64, dw: f64| -> Point {
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = a[k] + t * (b[k] - a[k]) + dv * v[k] + dw * w[k];
        }
        p
    };
    let pts = match name {
        "bead1" => vec![at(0.5, 0.0, 0.0)],
        "bead2" => vec![at(1.0 / 3.0, 0.0, 0.0), at(2.0 / 3.0, 0.0, 0.0)],
        "bead3" => vec![at(0.25, 0.0, 0.0), at(0.5, 0.0, 0.0), at(0.75, 0.0, 0.0)],
        "kink" => vec![at(0.5, 1.6, 0.0)],
        "ring3" => {
            let r = 1.1;
            (0..3)
                .map(|k| {
                    let th = std::f64::consts::TAU * k as f64 / 3.0;
                    at(0.5, r * th.cos(), r * th.sin())
                })
                .collect()
        }
        "zigzag" => vec![at(1.0 / 3.0, 1.0, 0.0), at(2.0 / 3.0, -1.0, 0.0)],
        "pair" => vec![at(0.5, 0.0, 1.0), at(0.5, 0.0, -1.0)],
        "arc" => vec![at(0.3, 1.2, 0.0), at(0.5, 1.8, 0.0), at(0.7, 1.2, 0.0)],
        _ => return None,
    };
    Some(pts)
}

/// Deterministically assembles the structure named by `params`: node
/// clusters first (node order, then cluster order), then linker points
/// (edge order). Nodes at odd template positions use `node2` when present.
/// The frame is centred in the grid cube.
pub fn generate_structure(params: &ParamVector, spec: &SyntheticSpec) -> Result<PointCloud> {
    params.codes()?;
    let (nodes, edges) = template_frame(&params.template)
        .ok_or_else(|| Error::invalid(format!("unknown template {:?}", params.template)))?;

    let mut centroid = [0.0; 3];
    for p in &nodes {
        for k in 0..3 {
            centroid[k] += p[k] / nodes.len() as f64;
        }
    }
    let center = spec.grid.center();
    let shift = sub(&center, &centroid);
    let place = |p: &Point| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
    let nodes: Vec<Point> = nodes.iter().map(place).collect();

    let cluster1 = node_cluster(&params.node1)
        .ok_or_else(|| Error::invalid(format!("unknown node {:?}", params.node1)))?;
    let cluster2 = match &params.node2 {
        Some(n) => Some(
            node_cluster(n).ok_or_else(|| Error::invalid(format!("unknown node {n:?}")))?,
        ),
        None => None,
    };

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        let (cluster, label) = match (&cluster2, i % 2) {
            (Some(c2), 1) => (c2, "M2"),
            _ => (&cluster1, "M1"),
        };
        for off in cluster {
            points.push([node[0] + off[0], node[1] + off[1], node[2] + off[2]]);
            labels.push(label.to_string());
        }
    }
    if let Some(edge) = &params.edge {
        for (a, b) in &edges {
            let linker = linker_points(edge, &nodes[*a], &nodes[*b])
                .ok_or_else(|| Error::invalid(format!("unknown edge {edge:?}")))?;
            labels.extend(std::iter::repeat_n("L".to_string(), linker.len()));
            points.extend(linker);
        }
    }

    let cloud = PointCloud::with_labels(points, labels)?;
    if cloud.points.iter().any(|p| spec.grid.cell_of(p).is_none()) {
        return Err(Error::invalid(format!(
            "structure {params} does not fit the grid cube"
        )));
    }
    Ok(cloud)
}

/// Void-shell score: per-mille of grid cells whose centre lies at distance
/// `[r, 2r)` from its nearest cloud point. Empty clouds score 0.
pub fn synthetic_target(cloud: &PointCloud, grid: &GridSpec, probe_radius: f64) -> Result<f64> {
    if !(probe_radius > 0.0 && probe_radius.is_finite()) {
        return Err(Error::invalid(format!("probe radius {probe_radius} must be > 0")));
    }
    if cloud.is_empty() {
        return Ok(0.0);
    }
    let n = grid.cells_per_axis;
    let outer = 2.0 * probe_radius;
    let mut nearest = vec![f64::INFINITY; grid.cell_count()];
    for p in &cloud.points {
        // cells whose centre can lie within `outer` of p
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for k in 0..3 {
            let a = ((p[k] - outer - grid.origin[k]) / grid.cell_size - 0.5).ceil();
            let b = ((p[k] + outer - grid.origin[k]) / grid.cell_size - 0.5).floor();
            let a = a.max(0.0);
            let b = b.min(n as f64 - 1.0);
            if a > b {
                empty = true;
                break;
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        if empty {
            continue;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let cell = [x, y, z];
                    let d = distance(p, &grid.cell_center(cell));
                    let slot = &mut nearest[grid.flat_index(cell)];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    let shell = nearest
        .iter()
        .filter(|&&d| d >= probe_radius && d < outer)
        .count();
    Ok(1000.0 * shell as f64 / grid.cell_count() as f64)
}
