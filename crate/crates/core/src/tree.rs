//! Leaf-labelled ultrametric trees and finite metric measure spaces.
//!
//! A tree is stored as its merge history: leaves occupy node indices
//! `0..n` and the `k`-th merge creates node `n + k`. Distances are derived on
//! demand (`r(i, j)` is twice the time of the most recent common ancestor).
//! Every merge carries a [`NodeId`]; trees extracted from the same ARG at
//! different loci share the id of every coalescence event they both use, and
//! tree equality across loci is decided by those ids.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Identity of a merge node, stable across loci of one ARG realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u64);

#[derive(Clone, Debug, PartialEq)]
pub struct Merge {
    pub time: f64,
    /// Node indices of the two lineages joined by this merge.
    pub children: [usize; 2],
    pub id: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UltrametricTree {
    leaves: Vec<String>,
    merges: Vec<Merge>,
}

/// Default leaf labels `"1"..="n"`.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

impl UltrametricTree {
    /// Builds a tree from its merge history, checking that every merge joins
    /// two live lineages, that times never decrease, and that the history is
    /// complete (`n - 1` merges).
    pub fn from_merges(leaves: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let n = leaves.len();
        if n == 0 {
            return Err(Error::invalid("tree needs at least one leaf"));
        }
        if merges.len() != n - 1 {
            return Err(Error::invalid(format!(
                "{} leaves need {} merges, got {}",
                n,
                n - 1,
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut last = 0.0f64;
        for (k, m) in merges.iter().enumerate() {
            if !(m.time >= last) || !m.time.is_finite() {
                return Err(Error::invalid(format!(
                    "merge {k} at time {} precedes time {last}",
                    m.time
                )));
            }
            last = m.time;
            let [a, b] = m.children;
            if a == b || a >= n + k || b >= n + k || used[a] || used[b] {
                return Err(Error::invalid(format!(
                    "merge {k} does not join two live lineages ({a}, {b})"
                )));
            }
            used[a] = true;
            used[b] = true;
        }
        Ok(Self { leaves, merges })
    }

    pub(crate) fn from_parts_unchecked(leaves: Vec<String>, merges: Vec<Merge>) -> Self {
        debug_assert_eq!(merges.len() + 1, leaves.len());
        Self { leaves, merges }
    }

    pub fn single_leaf(label: impl Into<String>) -> Self {
        Self {
            leaves: vec![label.into()],
            merges: Vec::new(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_nodes(&self) -> usize {
        self.leaves.len() + self.merges.len()
    }

    pub fn root(&self) -> usize {
        self.n_nodes() - 1
    }

    /// Time of the root; zero for a single leaf.
    pub fn root_time(&self) -> f64 {
        self.merges.last().map_or(0.0, |m| m.time)
    }

    pub fn node_time(&self, node: usize) -> f64 {
        let n = self.leaves.len();
        if node < n {
            0.0
        } else {
            self.merges[node - n].time
        }
    }

    pub fn node_id(&self, node: usize) -> Option<NodeId> {
        let n = self.leaves.len();
        (node >= n).then(|| self.merges[node - n].id)
    }

    pub fn leaf_index(&self, label: &str) -> Option<usize> {
        self.leaves.iter().position(|l| l == label)
    }

    /// Parent node index of every node; the root maps to `usize::MAX`.
    pub fn parents(&self) -> Vec<usize> {
        let n = self.leaves.len();
        let mut parent = vec![usize::MAX; self.n_nodes()];
        for (k, m) in self.merges.iter().enumerate() {
            parent[m.children[0]] = n + k;
            parent[m.children[1]] = n + k;
        }
        parent
    }

    /// Node index of the most recent common ancestor of two leaves.
    pub fn mrca(&self, i: usize, j: usize) -> usize {
        let parent = self.parents();
        self.mrca_with(&parent, i, j)
    }

    pub(crate) fn mrca_with(&self, parent: &[usize], mut a: usize, mut b: usize) -> usize {
        // parents always have larger indices than their children
        while a != b {
            if a < b {
                a = parent[a];
            } else {
                b = parent[b];
            }
        }
        a
    }

    /// Identity of the MRCA merge of two distinct leaves.
    pub fn mrca_id(&self, i: usize, j: usize) -> Option<NodeId> {
        self.node_id(self.mrca(i, j))
    }

    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            2.0 * self.node_time(self.mrca(i, j))
        }
    }

    /// Leaf indices below every node.
    pub fn clades(&self) -> Vec<Vec<usize>> {
        let n = self.leaves.len();
        let mut clades: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut c = clades[m.children[0]].clone();
            c.extend_from_slice(&clades[m.children[1]]);
            clades.push(c);
        }
        clades
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        let n = self.leaves.len();
        let mut entries = vec![0.0; n * n];
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let d = 2.0 * m.time;
            let (a, b) = (m.children[0], m.children[1]);
            for &x in &members[a] {
                for &y in &members[b] {
                    entries[x * n + y] = d;
                    entries[y * n + x] = d;
                }
            }
            let mut joined = std::mem::take(&mut members[a]);
            joined.extend(std::mem::take(&mut members[b]));
            members.push(joined);
        }
        DistanceMatrix { size: n, entries }
    }

    /// Durations `(S_n, ..., S_2)` during which exactly `k` lineages exist.
    pub fn level_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.merges
            .iter()
            .map(|m| {
                let s = m.time - prev;
                prev = m.time;
                s
            })
            .collect()
    }

    /// Total branch length (sum over levels of `k * S_k`).
    pub fn total_length(&self) -> f64 {
        let n = self.leaves.len();
        self.level_times()
            .iter()
            .enumerate()
            .map(|(i, s)| (n - i) as f64 * s)
            .sum()
    }

    /// Number of lineages alive at time `eps` above the leaves.
    pub fn lineage_count_at_depth(&self, eps: f64) -> usize {
        let merged = self.merges.partition_point(|m| m.time <= eps);
        self.leaves.len() - merged
    }

    pub fn to_mm_space(&self) -> FiniteMmSpace {
        FiniteMmSpace::uniform(self.leaves.clone(), self.distance_matrix())
            .expect("tree distances form a valid space")
    }

    /// The subtree spanned by a subset of leaves (given as leaf indices),
    /// keeping labels, times and merge identities.
    pub fn restrict(&self, subset: &[usize]) -> Result<UltrametricTree> {
        let n = self.leaves.len();
        if subset.is_empty() || subset.iter().any(|&i| i >= n) {
            return Err(Error::invalid("subset must be a non-empty set of leaf indices"));
        }
        let mut map: Vec<Option<usize>> = vec![None; self.n_nodes()];
        let mut leaves = Vec::with_capacity(subset.len());
        for (new, &old) in subset.iter().enumerate() {
            if map[old].is_some() {
                return Err(Error::invalid("subset contains duplicates"));
            }
            map[old] = Some(new);
            leaves.push(self.leaves[old].clone());
        }
        let mut merges = Vec::new();
        for (k, m) in self.merges.iter().enumerate() {
            let node = n + k;
            match (map[m.children[0]], map[m.children[1]]) {
                (Some(a), Some(b)) => {
                    map[node] = Some(subset.len() + merges.len());
                    merges.push(Merge {
                        time: m.time,
                        children: [a, b],
                        id: m.id,
                    });
                }
                (Some(a), None) | (None, Some(a)) => map[node] = Some(a),
                (None, None) => {}
            }
        }
        Ok(UltrametricTree { leaves, merges })
    }

    /// Identity comparison: same leaf labels and the same merge nodes joining
    /// the same lineages. Times are never compared.
    pub fn same_genealogy(&self, other: &UltrametricTree) -> bool {
        if self.leaves.len() != other.leaves.len() || self.merges.len() != other.merges.len() {
            return false;
        }
        let key = |t: &UltrametricTree| {
            let n = t.leaves.len();
            let child = |c: usize| -> ChildKey {
                if c < n {
                    ChildKey::Leaf(t.leaves[c].clone())
                } else {
                    ChildKey::Node(t.merges[c - n].id)
                }
            };
            let mut v: Vec<(NodeId, [ChildKey; 2])> = t
                .merges
                .iter()
                .map(|m| {
                    let mut ch = [child(m.children[0]), child(m.children[1])];
                    ch.sort();
                    (m.id, ch)
                })
                .collect();
            v.sort();
            v
        };
        let mut la = self.leaves.clone();
        let mut lb = other.leaves.clone();
        la.sort();
        lb.sort();
        la == lb && key(self) == key(other)
    }

    /// Checks the ultrametric inequality on the derived distances.
    pub fn is_ultrametric(&self) -> bool {
        self.distance_matrix().is_ultrametric(0.0)
    }

    pub fn to_record(&self) -> TreeRecord {
        TreeRecord {
            leaves: self.leaves.clone(),
            merges: self
                .merges
                .iter()
                .map(|m| MergeRecord {
                    t: m.time,
                    pair: m.children,
                    id: m.id.0,
                })
                .collect(),
        }
    }

    pub fn from_record(rec: TreeRecord) -> Result<Self> {
        let merges = rec
            .merges
            .into_iter()
            .map(|m| Merge {
                time: m.t,
                children: m.pair,
                id: NodeId(m.id),
            })
            .collect();
        Self::from_merges(rec.leaves, merges)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum ChildKey {
    Leaf(String),
    Node(NodeId),
}

/// JSON form of a tree: `{"leaves": [...], "merges": [{"t", "pair", "id"}]}`.
/// `pair` holds node indices (leaves first, then merges in order).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TreeRecord {
    pub leaves: Vec<String>,
    pub merges: Vec<MergeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MergeRecord {
    pub t: f64,
    pub pair: [usize; 2],
    #[serde(default)]
    pub id: u64,
}

/// Symmetric non-negative matrix with zero diagonal, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("distance matrix must be non-empty"));
        }
        if entries.len() != size * size {
            return Err(Error::invalid("entries length must be size^2"));
        }
        for i in 0..size {
            if entries[i * size + i] != 0.0 {
                return Err(Error::invalid("diagonal must be zero"));
            }
            for j in 0..size {
                let d = entries[i * size + j];
                if !(d >= 0.0) || d != entries[j * size + i] {
                    return Err(Error::invalid(format!(
                        "entry ({i},{j}) must be non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(Self { size, entries })
    }

    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                entries[i * size + j] = if i == j { 0.0 } else { f(i, j) };
            }
        }
        Self::new(size, entries)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn submatrix(&self, idx: &[usize]) -> DistanceMatrix {
        let m = idx.len();
        let mut entries = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                entries[a * m + b] = self.get(i, j);
            }
        }
        DistanceMatrix { size: m, entries }
    }

    /// `d(i,j) <= max(d(i,k), d(j,k)) + tol` for all triples.
    pub fn is_ultrametric(&self, tol: f64) -> bool {
        let n = self.size;
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = self.get(i, j);
                for k in 0..n {
                    if dij > self.get(i, k).max(self.get(j, k)) + tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn diameter(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }
}

/// Finite metric measure space with full-support weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMmSpace {
    points: Vec<String>,
    distances: DistanceMatrix,
    weights: Vec<f64>,
}

impl FiniteMmSpace {
    pub fn new(points: Vec<String>, distances: DistanceMatrix, weights: Vec<f64>) -> Result<Self> {
        if points.len() != distances.size() || weights.len() != points.len() {
            return Err(Error::invalid("points, distances and weights must agree in size"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            points,
            distances,
            weights,
        })
    }

    pub fn uniform(points: Vec<String>, distances: DistanceMatrix) -> Result<Self> {
        let n = points.len();
        Self::new(points, distances, vec![1.0 / n as f64; n])
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_uniform_weights(&self) -> bool {
        let w0 = 1.0 / self.size() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-12)
    }

    /// Draws `m` points i.i.d. from the weights and returns their distances:
    /// one `m x m` block of the distance matrix distribution.
    pub fn sample_distance_submatrix(
        &self,
        m: usize,
        rng: &mut crate::rng::RandomSource,
    ) -> Result<DistanceMatrix> {
        if m == 0 {
            return Err(Error::invalid("m must be positive"));
        }
        let idx: Vec<usize> = (0..m).map(|_| rng.weighted_index(&self.weights)).collect();
        Ok(self.distances.submatrix(&idx))
    }

    /// Like [`sample_distance_submatrix`](Self::sample_distance_submatrix)
    /// but conditioned on drawing pairwise distinct points.
    pub fn sample_distinct_submatrix(
        &self,
        m: usize,
        rng: &mut crate::rng::RandomSource,
    ) -> Result<DistanceMatrix> {
        if m == 0 || m > self.size() {
            return Err(Error::invalid("need 1 <= m <= size"));
        }
        let mut idx = Vec::with_capacity(m);
        while idx.len() < m {
            let i = rng.weighted_index(&self.weights);
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        Ok(self.distances.submatrix(&idx))
    }

    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect()
    }
}
