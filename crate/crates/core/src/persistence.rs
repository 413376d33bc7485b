//! Vietoris–Rips filtrations and Z/2 persistent homology in dimensions 1
//! and 2.
//!
//! A simplex enters the filtration at its diameter (largest pairwise
//! distance). Simplices are ordered by (value, dimension, vertices), which
//! puts every face before its cofaces. [`reduce`] runs the standard column
//! reduction with clearing, highest dimension first; [`reduce_naive`] is the
//! textbook left-to-right reduction over dense bit columns and only exists to
//! cross-check it. H0 is never reported and classes still alive at the
//! filtration's `max_radius` are dropped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

/// Default cap on the number of simplices a filtration may hold.
pub const DEFAULT_SIMPLEX_BUDGET: usize = 20_000_000;

const NO_COLUMN: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    vertices: [u32; 4],
    len: u8,
    pub value: f64,
}

impl Simplex {
    fn new(vertices: &[u32], value: f64) -> Self {
        let mut v = [0u32; 4];
        v[..vertices.len()].copy_from_slice(vertices);
        Self {
            vertices: v,
            len: vertices.len() as u8,
            value,
        }
    }

    /// Strictly increasing vertex indices.
    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    fn key(&self) -> u64 {
        simplex_key(self.vertices())
    }
}

/// Packs up to four 16-bit vertex ids, with the length in the top bits so
/// faces of different dimensions never collide.
fn simplex_key(vertices: &[u32]) -> u64 {
    let mut key = vertices.len() as u64;
    for &v in vertices {
        key = (key << 15) | v as u64;
    }
    key
}

const MAX_VERTICES: usize = 1 << 15;

#[derive(Debug, Clone)]
pub struct Filtration {
    simplices: Vec<Simplex>,
    pub max_radius: f64,
    pub max_dim: usize,
    index: HashMap<u64, u32>,
}

impl Filtration {
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_by_dim(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }

    /// Position of the simplex with these (sorted) vertices.
    pub fn index_of(&self, vertices: &[u32]) -> Option<usize> {
        self.index.get(&simplex_key(vertices)).map(|&i| i as usize)
    }

    /// Filtration indices of the codimension-one faces, ascending.
    pub fn boundary(&self, idx: usize) -> Vec<u32> {
        let s = &self.simplices[idx];
        let verts = s.vertices();
        if verts.len() == 1 {
            return Vec::new();
        }
        let mut face = [0u32; 3];
        let mut out: Vec<u32> = (0..verts.len())
            .map(|skip| {
                let mut k = 0;
                for (i, &v) in verts.iter().enumerate() {
                    if i != skip {
                        face[k] = v;
                        k += 1;
                    }
                }
                self.index[&simplex_key(&face[..k])]
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Builds the Rips filtration with the default simplex budget.
pub fn build_rips(dist: &DistanceMatrix, max_dim: usize, max_radius: f64) -> Result<Filtration> {
    build_rips_with_budget(dist, max_dim, max_radius, DEFAULT_SIMPLEX_BUDGET)
}

/// Every simplex of dimension `<= max_dim` whose diameter is at most
/// `max_radius`. Fails with [`Error::Resource`] before allocating if the
/// complex would exceed `budget` simplices.
pub fn build_rips_with_budget(
    dist: &DistanceMatrix,
    max_dim: usize,
    max_radius: f64,
    budget: usize,
) -> Result<Filtration> {
    if !(2..=3).contains(&max_dim) {
        return Err(Error::invalid(format!("max_dim {max_dim} must be 2 or 3")));
    }
    if !(max_radius > 0.0 && max_radius.is_finite()) {
        return Err(Error::invalid(format!("max_radius {max_radius} must be > 0")));
    }
    let n = dist.len();
    if n >= MAX_VERTICES {
        return Err(Error::Resource(format!(
            "{n} points exceed the {MAX_VERTICES}-vertex limit"
        )));
    }

    // higher-index neighbours within the radius
    let upper: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (i + 1..n)
                .filter(|&j| dist.get(i, j) <= max_radius)
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    let adjacent = |a: u32, b: u32| dist.get(a as usize, b as usize) <= max_radius;

    let mut total = n;
    for i in 0..n {
        for (p, &j) in upper[i].iter().enumerate() {
            total += 1;
            for (q, &k) in upper[i][p + 1..].iter().enumerate() {
                if !adjacent(j, k) {
                    continue;
                }
                total += 1;
                if max_dim == 3 {
                    total += upper[i][p + 2 + q..]
                        .iter()
                        .filter(|&&l| adjacent(j, l) && adjacent(k, l))
                        .count();
                }
                if total > budget {
                    return Err(Error::Resource(format!(
                        "Rips complex on {n} points at radius {max_radius} exceeds the \
                         budget of {budget} simplices"
                    )));
                }
            }
        }
    }

    let d = |a: u32, b: u32| dist.get(a as usize, b as usize);
    let mut simplices = Vec::with_capacity(total);
    for i in 0..n as u32 {
        simplices.push(Simplex::new(&[i], 0.0));
    }
    for i in 0..n {
        let iu = i as u32;
        for (p, &j) in upper[i].iter().enumerate() {
            let dij = d(iu, j);
            simplices.push(Simplex::new(&[iu, j], dij));
            for (q, &k) in upper[i][p + 1..].iter().enumerate() {
                if !adjacent(j, k) {
                    continue;
                }
                let tri = dij.max(d(iu, k)).max(d(j, k));
                simplices.push(Simplex::new(&[iu, j, k], tri));
                if max_dim == 3 {
                    for &l in &upper[i][p + 2 + q..] {
                        if adjacent(j, l) && adjacent(k, l) {
                            let tet = tri.max(d(iu, l)).max(d(j, l)).max(d(k, l));
                            simplices.push(Simplex::new(&[iu, j, k, l], tet));
                        }
                    }
                }
            }
        }
    }

    simplices.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.len.cmp(&b.len))
            .then_with(|| a.vertices().cmp(b.vertices()))
    });
    let index = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.key(), i as u32))
        .collect();
    Ok(Filtration {
        simplices,
        max_radius,
        max_dim,
        index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub dimension: usize,
    pub birth: f64,
    pub death: f64,
    pub birth_simplex: usize,
    pub death_simplex: usize,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Z/2 symmetric difference of two ascending index lists.
fn add_columns(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Column reducer shared by [`reduce`] and [`representative_cycle`].
struct Reducer<'a> {
    filtration: &'a Filtration,
    /// row -> column whose reduced pivot is that row
    owner: Vec<u32>,
    /// reduced columns, indexed by column; only pivot-owning ones are kept
    reduced: HashMap<u32, Vec<u32>>,
    scratch: Vec<u32>,
}

impl<'a> Reducer<'a> {
    fn new(filtration: &'a Filtration) -> Self {
        Self {
            filtration,
            owner: vec![NO_COLUMN; filtration.len()],
            reduced: HashMap::new(),
            scratch: Vec::new(),
        }
    }

    /// Reduces column `j` against the pivots found so far. Returns the
    /// pivot row if the column does not vanish.
    fn reduce_column(&mut self, j: usize) -> Option<u32> {
        let mut col = self.filtration.boundary(j);
        while let Some(&low) = col.last() {
            let k = self.owner[low as usize];
            if k == NO_COLUMN {
                self.owner[low as usize] = j as u32;
                self.reduced.insert(j as u32, col);
                return Some(low);
            }
            add_columns(&col, &self.reduced[&k], &mut self.scratch);
            std::mem::swap(&mut col, &mut self.scratch);
        }
        None
    }
}

/// Persistence pairs of dimensions 1 and 2 with positive persistence.
///
/// Columns are processed from the top dimension down; the pivot of every
/// non-zero column marks a lower-dimensional column that must reduce to
/// zero, so it is skipped (clearing). Edge columns are never reduced since
/// H0 is not reported.
pub fn reduce(filtration: &Filtration) -> Vec<PersistencePair> {
    let simplices = filtration.simplices();
    let mut by_dim: [Vec<usize>; 4] = Default::default();
    for (i, s) in simplices.iter().enumerate() {
        by_dim[s.dim()].push(i);
    }
    let mut cleared = vec![false; simplices.len()];
    let mut reducer = Reducer::new(filtration);
    let mut pairs = Vec::new();
    for dim in (2..=filtration.max_dim).rev() {
        for &j in &by_dim[dim] {
            if cleared[j] {
                continue;
            }
            if let Some(low) = reducer.reduce_column(j) {
                cleared[low as usize] = true;
                push_pair(&mut pairs, simplices, low as usize, j);
            }
        }
    }
    sort_pairs(&mut pairs);
    pairs
}

fn push_pair(pairs: &mut Vec<PersistencePair>, simplices: &[Simplex], birth: usize, death: usize) {
    let (b, d) = (&simplices[birth], &simplices[death]);
    if d.value > b.value {
        pairs.push(PersistencePair {
            dimension: b.dim(),
            birth: b.value,
            death: d.value,
            birth_simplex: birth,
            death_simplex: death,
        });
    }
}

fn sort_pairs(pairs: &mut [PersistencePair]) {
    pairs.sort_by(|a, b| {
        a.dimension
            .cmp(&b.dimension)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
            .then(a.birth_simplex.cmp(&b.birth_simplex))
    });
}

/// Textbook reduction: every column of dimension >= 1 left to right, each
/// time searching all earlier columns for an equal pivot. No pivot table,
/// no clearing. Quadratic memory and cubic time; test use only.
pub fn reduce_naive(filtration: &Filtration) -> Vec<PersistencePair> {
    let simplices = filtration.simplices();
    let m = simplices.len();
    let words = m.div_ceil(64);
    let mut columns: Vec<Vec<u64>> = Vec::with_capacity(m);
    let mut lows: Vec<Option<usize>> = Vec::with_capacity(m);

    let low_of = |col: &[u64]| {
        col.iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
    };

    for j in 0..m {
        let mut col = vec![0u64; words];
        let verts = simplices[j].vertices();
        if verts.len() > 1 {
            for skip in 0..verts.len() {
                let face: Vec<u32> = verts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect();
                // linear search keeps the oracle independent of the index
                let row = simplices
                    .iter()
                    .position(|s| s.vertices() == face.as_slice())
                    .expect("face present in filtration");
                col[row / 64] ^= 1 << (row % 64);
            }
        }
        let mut low = low_of(&col);
        while let Some(l) = low {
            let Some(k) = (0..j).find(|&k| lows[k] == Some(l)) else {
                break;
            };
            for (w, o) in col.iter_mut().zip(&columns[k]) {
                *w ^= *o;
            }
            low = low_of(&col);
        }
        columns.push(col);
        lows.push(low);
    }

    let mut pairs = Vec::new();
    for (j, low) in lows.iter().enumerate() {
        if let Some(i) = *low {
            if matches!(simplices[i].dim(), 1 | 2) {
                push_pair(&mut pairs, simplices, i, j);
            }
        }
    }
    sort_pairs(&mut pairs);
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dimension: usize,
    pub pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pairs of one dimension, ordered by (birth, death).
pub fn diagram(pairs: &[PersistencePair], dimension: usize) -> Result<PersistenceDiagram> {
    if !(1..=2).contains(&dimension) {
        return Err(Error::invalid(format!("diagram dimension {dimension} must be 1 or 2")));
    }
    let mut kept: Vec<_> = pairs
        .iter()
        .filter(|p| p.dimension == dimension)
        .copied()
        .collect();
    kept.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
    Ok(PersistenceDiagram {
        dimension,
        pairs: kept,
    })
}

/// `{dim, birth, death}` record used by the diagram JSON files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramRecord {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
}

pub fn diagram_records(pairs: &[PersistencePair]) -> Vec<DiagramRecord> {
    pairs
        .iter()
        .map(|p| DiagramRecord {
            dim: p.dimension,
            birth: p.birth,
            death: p.death,
        })
        .collect()
}

/// Rebuilds a diagram of one dimension from JSON records. Simplex indices
/// are not stored in files and come back as `usize::MAX`.
pub fn diagram_from_records(records: &[DiagramRecord], dimension: usize) -> Result<PersistenceDiagram> {
    let pairs: Vec<PersistencePair> = records
        .iter()
        .map(|r| PersistencePair {
            dimension: r.dim,
            birth: r.birth,
            death: r.death,
            birth_simplex: usize::MAX,
            death_simplex: usize::MAX,
        })
        .collect();
    diagram(&pairs, dimension)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeCycle {
    pub pair: PersistencePair,
    /// Point indices touched by the cycle, ascending.
    pub vertex_set: Vec<usize>,
    /// Filtration indices of the chain's simplices, ascending.
    pub chain: Vec<usize>,
}

/// The reduced death column of `pair`: a Z/2 cycle whose youngest simplex is
/// the birth simplex, and which bounds once the death simplex enters.
pub fn representative_cycle(
    filtration: &Filtration,
    pair: &PersistencePair,
) -> Result<RepresentativeCycle> {
    let not_found = || {
        Error::invalid(format!(
            "pair (dim {}, {} -> {}) not found in this filtration's reduction",
            pair.dimension, pair.birth, pair.death
        ))
    };
    let simplices = filtration.simplices();
    let death = pair.death_simplex;
    if death >= simplices.len() || simplices[death].dim() != pair.dimension + 1 {
        return Err(not_found());
    }
    let mut reducer = Reducer::new(filtration);
    for j in 0..=death {
        if simplices[j].dim() != pair.dimension + 1 {
            continue;
        }
        let low = reducer.reduce_column(j);
        if j == death && low != Some(pair.birth_simplex as u32) {
            return Err(not_found());
        }
    }
    let chain: Vec<usize> = reducer.reduced[&(death as u32)]
        .iter()
        .map(|&r| r as usize)
        .collect();
    let mut vertex_set: Vec<usize> = chain
        .iter()
        .flat_map(|&s| simplices[s].vertices().iter().map(|&v| v as usize))
        .collect();
    vertex_set.sort_unstable();
    vertex_set.dedup();
    Ok(RepresentativeCycle {
        pair: *pair,
        vertex_set,
        chain,
    })
}

/// Z/2 boundary of a chain given as filtration indices.
pub fn chain_boundary(filtration: &Filtration, chain: &[usize]) -> Vec<usize> {
    let mut parity: HashMap<u32, bool> = HashMap::new();
    for &s in chain {
        for f in filtration.boundary(s) {
            let e = parity.entry(f).or_insert(false);
            *e = !*e;
        }
    }
    let mut out: Vec<usize> = parity
        .into_iter()
        .filter(|(_, odd)| *odd)
        .map(|(f, _)| f as usize)
        .collect();
    out.sort_unstable();
    out
}

/// Bottleneck distance between two diagrams under the L-infinity metric,
/// where any point may also be matched to the diagonal.
pub fn bottleneck_distance(a: &[PersistencePair], b: &[PersistencePair]) -> f64 {
    let pa: Vec<(f64, f64)> = a.iter().map(|p| (p.birth, p.death)).collect();
    let pb: Vec<(f64, f64)> = b.iter().map(|p| (p.birth, p.death)).collect();
    let (na, nb) = (pa.len(), pb.len());
    let n = na + nb;
    if n == 0 {
        return 0.0;
    }
    let diag = |p: (f64, f64)| (p.1 - p.0) / 2.0;
    let linf = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs().max((p.1 - q.1).abs());

    // left: A points then B's diagonal slots; right: B points then A's slots
    let cost = |l: usize, r: usize| -> f64 {
        match (l < na, r < nb) {
            (true, true) => linf(pa[l], pb[r]),
            (true, false) => {
                if r - nb == l {
                    diag(pa[l])
                } else {
                    f64::INFINITY
                }
            }
            (false, true) => {
                if l - na == r {
                    diag(pb[r])
                } else {
                    f64::INFINITY
                }
            }
            (false, false) => 0.0,
        }
    };

    let mut candidates: Vec<f64> = (0..n)
        .flat_map(|l| (0..n).map(move |r| (l, r)))
        .map(|(l, r)| cost(l, r))
        .filter(|c| c.is_finite())
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let perfect = |eps: f64| -> bool {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|l| (0..n).filter(|&r| cost(l, r) <= eps).collect())
            .collect();
        let mut match_r = vec![usize::MAX; n];
        fn augment(
            l: usize,
            adj: &[Vec<usize>],
            seen: &mut [bool],
            match_r: &mut [usize],
        ) -> bool {
            for &r in &adj[l] {
                if seen[r] {
                    continue;
                }
                seen[r] = true;
                if match_r[r] == usize::MAX || augment(match_r[r], adj, seen, match_r) {
                    match_r[r] = l;
                    return true;
                }
            }
            false
        }
        (0..n).all(|l| {
            let mut seen = vec![false; n];
            augment(l, &adj, &mut seen, &mut match_r)
        })
    };

    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}
