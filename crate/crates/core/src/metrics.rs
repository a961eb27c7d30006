//! Distances between finite metric measure spaces and between the trees of
//! one ARG at two loci.

use std::collections::VecDeque;

use crate::arg::{ArgEventLog, TreePath};
use crate::error::{Error, Result};
use crate::tree::{DistanceMatrix, FiniteMmSpace, UltrametricTree};

const MATCH_TOL: f64 = 1e-9;
const GTV_MAX_POINTS: usize = 8;

pub fn hausdorff_distance(a: &[usize], b: &[usize], metric: &DistanceMatrix) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("point sets must be non-empty"));
    }
    let n = metric.size();
    if a.iter().chain(b).any(|&i| i >= n) {
        return Err(Error::invalid("point index outside the metric"));
    }
    Ok(hausdorff_by(a.len(), b.len(), |i, j| metric.get(a[i], b[j])))
}

/// Hausdorff distance between index sets `0..na` and `0..nb` under a
/// cross-distance function.
fn hausdorff_by(na: usize, nb: usize, d: impl Fn(usize, usize) -> f64) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..na {
        h = h.max((0..nb).map(|j| d(i, j)).fold(f64::INFINITY, f64::min));
    }
    for j in 0..nb {
        h = h.max((0..na).map(|i| d(i, j)).fold(f64::INFINITY, f64::min));
    }
    h
}

fn check_measure(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("measure entries must be non-negative"));
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("measure sums to {s}, not 1")));
    }
    Ok(())
}

pub fn total_variation(mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::invalid("measures must have the same size"));
    }
    Ok(0.5 * mu1.iter().zip(mu2).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Prohorov distance on a common finite space, by bisection on `ε` with a
/// max-flow feasibility check: mass of `mu1` may move to points at distance
/// `< ε`, and the untransported mass must not exceed `ε`.
pub fn prohorov_distance(mu1: &[f64], mu2: &[f64], metric: &DistanceMatrix) -> Result<f64> {
    let n = mu1.len();
    if mu2.len() != n || metric.size() != n {
        return Err(Error::invalid("measures and metric must have the same size"));
    }
    check_measure(mu1)?;
    check_measure(mu2)?;
    let feasible = |eps: f64| {
        transport_within(mu1, mu2, metric, eps) >= 1.0 - eps - 1e-12
            && transport_within(mu2, mu1, metric, eps) >= 1.0 - eps - 1e-12
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if feasible(0.0) {
        return Ok(0.0);
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Maximum mass transportable from `mu1` to `mu2` along pairs at distance
/// `< eps` (identical points always allowed).
fn transport_within(mu1: &[f64], mu2: &[f64], metric: &DistanceMatrix, eps: f64) -> f64 {
    let n = mu1.len();
    let (s, t) = (2 * n, 2 * n + 1);
    let mut g = FlowGraph::new(2 * n + 2);
    for i in 0..n {
        if mu1[i] > 0.0 {
            g.add_edge(s, i, mu1[i]);
        }
        if mu2[i] > 0.0 {
            g.add_edge(n + i, t, mu2[i]);
        }
        for j in 0..n {
            if i == j || metric.get(i, j) < eps {
                g.add_edge(i, n + j, f64::INFINITY);
            }
        }
    }
    g.max_flow(s, t)
}

/// Edmonds–Karp on real capacities.
struct FlowGraph {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        Self {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        const EPS: f64 = 1e-15;
        let mut total = 0.0;
        loop {
            let mut prev = vec![usize::MAX; self.head.len()];
            let mut queue = VecDeque::from([s]);
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e] > EPS {
                        seen[v] = true;
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = prev[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            total += push;
        }
    }
}

/// Exact Gromov total variation distance `1 - M/N` for uniform spaces of
/// equal size `N <= 8`, where `M` is the size of a largest common
/// sub-isometry.
pub fn gtv_exact(x1: &FiniteMmSpace, x2: &FiniteMmSpace) -> Result<f64> {
    let n = x1.size();
    if x2.size() != n {
        return Err(Error::Unsupported("spaces must have equal size".into()));
    }
    if n > GTV_MAX_POINTS {
        return Err(Error::Unsupported(format!(
            "exact search supports at most {GTV_MAX_POINTS} points, got {n}"
        )));
    }
    if !x1.has_uniform_weights() || !x2.has_uniform_weights() {
        return Err(Error::Unsupported("weights must be uniform".into()));
    }
    let m = max_common_isometry(x1.distances(), x2.distances());
    Ok(1.0 - m as f64 / n as f64)
}

/// Size of a largest partial map between the two point sets preserving all
/// pairwise distances, by branch and bound over points of the first space.
pub fn max_common_isometry(d1: &DistanceMatrix, d2: &DistanceMatrix) -> usize {
    struct Search<'a> {
        d1: &'a DistanceMatrix,
        d2: &'a DistanceMatrix,
        image: Vec<usize>,
        used: Vec<bool>,
        mapped: Vec<usize>,
        best: usize,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize) {
            let n1 = self.d1.size();
            let cap = self.d2.size();
            if self.mapped.len() + (n1 - i) <= self.best || self.best == n1.min(cap) {
                return;
            }
            if i == n1 {
                self.best = self.mapped.len();
                return;
            }
            for j in 0..cap {
                if self.used[j] {
                    continue;
                }
                let ok = self
                    .mapped
                    .iter()
                    .all(|&p| (self.d1.get(i, p) - self.d2.get(j, self.image[p])).abs() <= MATCH_TOL);
                if ok {
                    self.used[j] = true;
                    self.image[i] = j;
                    self.mapped.push(i);
                    self.go(i + 1);
                    self.mapped.pop();
                    self.used[j] = false;
                }
            }
            self.go(i + 1);
        }
    }
    let mut s = Search {
        d1,
        d2,
        image: vec![usize::MAX; d1.size()],
        used: vec![false; d2.size()],
        mapped: Vec::new(),
        best: 0,
    };
    s.go(0);
    s.best
}

/// Trees of the same leaves read off one ARG at two loci.
#[derive(Clone, Debug)]
pub struct CoupledTreePair<'a> {
    pub arg: &'a ArgEventLog,
    pub leaves: Vec<usize>,
    pub u: f64,
    pub v: f64,
    pub tree_u: UltrametricTree,
    pub tree_v: UltrametricTree,
}

impl<'a> CoupledTreePair<'a> {
    pub fn new(arg: &'a ArgEventLog, leaves: &[usize], u: f64, v: f64) -> Result<Self> {
        Ok(Self {
            arg,
            leaves: leaves.to_vec(),
            u,
            v,
            tree_u: arg.extract_tree(leaves, u)?,
            tree_v: arg.extract_tree(leaves, v)?,
        })
    }

    /// Leaves (as positions in `leaves`) whose lineage at `u` is hit by a
    /// split with mark between the loci.
    pub fn cut(&self) -> Vec<bool> {
        let (lo, hi) = if self.u <= self.v { (self.u, self.v) } else { (self.v, self.u) };
        self.arg.cut_leaves(&self.leaves, self.u, lo, hi)
    }
}

pub fn d_aux(pair: &CoupledTreePair) -> f64 {
    let cut = pair.cut();
    cut.iter().filter(|c| **c).count() as f64 / cut.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn gh_bounds(pair: &CoupledTreePair) -> GhBounds {
    gh_bounds_with_cut(&pair.tree_u, &pair.tree_v, &pair.cut())
}

/// GH bounds for two trees on the same leaf labels, given which leaves
/// (indexed as in `tree_u`) are cut. Uncut leaves have identical pairwise
/// distances in both trees; gluing the trees along them gives a common
/// metric space whose Hausdorff distance between the two leaf sets bounds
/// GH from above.
pub fn gh_bounds_with_cut(tree_u: &UltrametricTree, tree_v: &UltrametricTree, cut: &[bool]) -> GhBounds {
    let (hu, hv) = (tree_u.root_time(), tree_v.root_time());
    let lower = (hu - hv).abs();
    let du = tree_u.distance_matrix();
    let dv = tree_v.distance_matrix();
    let n = tree_u.n_leaves();
    // position in tree_v of each tree_u leaf
    let to_v: Vec<usize> = tree_u
        .leaves()
        .iter()
        .map(|l| tree_v.leaf_index(l).expect("trees share leaf labels"))
        .collect();
    let glue: Vec<usize> = (0..n).filter(|&i| !cut[i]).collect();
    let cross = |x: usize, y: usize| -> f64 {
        if glue.is_empty() {
            hu + hv
        } else {
            glue.iter()
                .map(|&p| du.get(x, p) + dv.get(to_v[p], y))
                .fold(f64::INFINITY, f64::min)
        }
    };
    let upper = hausdorff_by(n, tree_v.n_leaves(), cross);
    GhBounds {
        lower,
        upper: upper.max(lower),
    }
}

/// Distance used between consecutive trees of a path.
#[derive(Clone, Copy, Debug)]
pub enum PathDistance<'a> {
    /// `d_aux` across each breakpoint, read from the ARG the path came from.
    AuxChain { arg: &'a ArgEventLog, leaves: &'a [usize] },
    GtvExact,
    GhUpper { arg: &'a ArgEventLog, leaves: &'a [usize] },
}

/// Total variation of a piecewise-constant tree path: the sum of jump
/// distances at its breakpoints.
pub fn path_variation(path: &TreePath, distance: PathDistance) -> Result<f64> {
    let mut total = 0.0;
    for (k, &beta) in path.breakpoints.iter().enumerate() {
        let (left, right) = (&path.trees[k], &path.trees[k + 1]);
        let jump = match distance {
            PathDistance::AuxChain { arg, leaves } => arg.d_aux(leaves, beta, beta)?,
            PathDistance::GtvExact => gtv_exact(&left.to_mm_space(), &right.to_mm_space())?,
            PathDistance::GhUpper { arg, leaves } => {
                let cut = arg.cut_leaves(leaves, beta, beta, beta);
                gh_bounds_with_cut(left, right, &cut).upper
            }
        };
        total += jump;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arg::fixtures::{one_mark_fixture, two_mark_fixture};
    use crate::arg::sample_arg;
    use crate::kingman::sample_kingman;
    use crate::rng::RandomSource;
    use crate::tree::default_labels;
    use proptest::prelude::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), |i, j| (points[i] - points[j]).abs()).unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let d = line(&[0.0, 1.0, 3.0]);
        assert_eq!(hausdorff_distance(&[0, 1], &[0, 1], &d).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&[0], &[0, 1], &d).unwrap(), 1.0);
        assert_eq!(hausdorff_distance(&[0, 1], &[2], &d).unwrap(), 3.0);
        assert!(hausdorff_distance(&[], &[2], &d).is_err());
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(total_variation(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn prohorov_examples() {
        let d = line(&[0.0, 1.0]);
        assert_eq!(prohorov_distance(&[0.5, 0.5], &[0.5, 0.5], &d).unwrap(), 0.0);
        let p = prohorov_distance(&[1.0, 0.0], &[0.5, 0.5], &d).unwrap();
        assert!((p - 0.5).abs() < 2e-9, "{p}");
        // close points: mass moves for free once eps exceeds their distance
        let d = line(&[0.0, 0.1]);
        let p = prohorov_distance(&[1.0, 0.0], &[0.0, 1.0], &d).unwrap();
        assert!((p - 0.1).abs() < 2e-9, "{p}");
        assert!(prohorov_distance(&[0.9, 0.0], &[0.0, 1.0], &d).is_err());
    }

    fn random_measure(r: &mut RandomSource, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| r.exponential(1.0)).collect();
        let s: f64 = w.iter().sum();
        let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
        let rest: f64 = v[1..].iter().sum();
        v[0] = 1.0 - rest;
        v
    }

    #[test]
    fn prohorov_bounded_by_tv() {
        for i in 0..1000 {
            let mut r = RandomSource::new(50, i);
            let n = 2 + r.index(6);
            let pts: Vec<f64> = (0..n).map(|_| r.uniform_in(0.0, 2.0)).collect();
            let d = line(&pts);
            let (m1, m2) = (random_measure(&mut r, n), random_measure(&mut r, n));
            let p = prohorov_distance(&m1, &m2, &d).unwrap();
            let tv = total_variation(&m1, &m2).unwrap();
            assert!(p <= tv + 2e-9, "instance {i}: {p} > {tv}");
        }
    }

    fn two_leaf(t: f64) -> FiniteMmSpace {
        crate::newick::decode(&format!("(a:{t},b:{t});")).unwrap().to_mm_space()
    }

    #[test]
    fn gtv_examples() {
        let x = two_leaf(0.4);
        assert_eq!(gtv_exact(&x, &x).unwrap(), 0.0);
        assert_eq!(gtv_exact(&x, &two_leaf(0.6)).unwrap(), 0.5);
        let big = sample_kingman(9, &mut RandomSource::new(0, 0)).unwrap().to_mm_space();
        assert!(matches!(gtv_exact(&big, &big), Err(Error::Unsupported(_))));
        let d = DistanceMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let skew = FiniteMmSpace::new(default_labels(2), d, vec![0.3, 0.7]).unwrap();
        assert!(gtv_exact(&skew, &skew).is_err());
    }

    #[test]
    fn one_mark_fixture_bounds() {
        let arg = one_mark_fixture();
        let all = arg.all_leaves();
        let pair = CoupledTreePair::new(&arg, &all, 0.2, 0.8).unwrap();
        assert!((d_aux(&pair) - 0.4).abs() < 1e-15);
        let g = gtv_exact(&pair.tree_u.to_mm_space(), &pair.tree_v.to_mm_space()).unwrap();
        assert!(g <= 0.4 + 1e-15);
        assert!(g <= d_aux(&pair));
        let gh = gh_bounds(&pair);
        assert!(gh.lower <= gh.upper);
    }

    #[test]
    fn gh_identical_trees() {
        let arg = two_mark_fixture();
        let all = arg.all_leaves();
        let pair = CoupledTreePair::new(&arg, &all, 0.4, 0.6).unwrap();
        assert_eq!(gh_bounds(&pair), GhBounds { lower: 0.0, upper: 0.0 });
        let pair = CoupledTreePair::new(&arg, &all, 0.1, 0.9).unwrap();
        let gh = gh_bounds(&pair);
        assert!(gh.lower >= 1.0 - 1e-12 && gh.upper >= gh.lower);
    }

    #[test]
    fn variation_of_two_mark_fixture() {
        let arg = two_mark_fixture();
        let all = arg.all_leaves();
        let path = arg.tree_path(&all).unwrap();
        let v = path_variation(&path, PathDistance::AuxChain { arg: &arg, leaves: &all }).unwrap();
        // at 0.3 only leaf 1 is cut; at 0.7 only leaf 3
        assert!((v - 0.4).abs() < 1e-15);
        let g = path_variation(&path, PathDistance::GtvExact).unwrap();
        assert!(g <= v + 1e-12);
        let constant = TreePath::constant(0.0, 1.0, path.trees[0].clone());
        assert_eq!(path_variation(&constant, PathDistance::GtvExact).unwrap(), 0.0);
    }

    #[test]
    fn gtv_below_daux_on_coupled_pairs() {
        for i in 0..300 {
            let mut r = RandomSource::new(51, i);
            let n = 2 + r.index(5);
            let arg = sample_arg(n, 0.0, 1.0, 2.0, &mut r).unwrap();
            let (u, v) = (r.uniform(), r.uniform());
            let pair = CoupledTreePair::new(&arg, &arg.all_leaves(), u, v).unwrap();
            let g = gtv_exact(&pair.tree_u.to_mm_space(), &pair.tree_v.to_mm_space()).unwrap();
            assert!(g <= d_aux(&pair) + 1e-12);
            let gh = gh_bounds(&pair);
            assert!(gh.lower <= gh.upper + 1e-12);
        }
    }

    #[test]
    fn path_variation_is_additive() {
        for i in 0..300 {
            let mut r = RandomSource::new(52, i);
            let arg = sample_arg(5, 0.0, 1.0, 2.0, &mut r).unwrap();
            let all = arg.all_leaves();
            let path = arg.tree_path(&all).unwrap();
            let c = r.uniform_in(0.01, 0.99);
            let dist = PathDistance::AuxChain { arg: &arg, leaves: &all };
            let whole = path_variation(&path, dist).unwrap();
            let left = path_variation(&path.window(0.0, c).unwrap(), dist).unwrap();
            let right = path_variation(&path.window(c, 1.0).unwrap(), dist).unwrap();
            assert!((whole - left - right).abs() < 1e-12);
        }
    }

    fn uniform_space(d: DistanceMatrix) -> FiniteMmSpace {
        FiniteMmSpace::uniform(default_labels(d.size()), d).unwrap()
    }

    proptest! {
        #[test]
        fn gtv_is_symmetric_and_satisfies_triangle(seed in 0u64..10_000) {
            let mut r = RandomSource::new(53, seed);
            let n = 1 + r.index(6);
            // coarse integer distances make partial isometries common
            let mk = |r: &mut RandomSource| {
                let pts: Vec<f64> = (0..n).map(|_| r.index(4) as f64).collect();
                uniform_space(DistanceMatrix::from_fn(n, |i, j| (pts[i] - pts[j]).abs() + if i == j { 0.0 } else { 1.0 }).unwrap())
            };
            let (a, b, c) = (mk(&mut r), mk(&mut r), mk(&mut r));
            let ab = gtv_exact(&a, &b).unwrap();
            prop_assert_eq!(ab, gtv_exact(&b, &a).unwrap());
            prop_assert_eq!(gtv_exact(&a, &a).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            let ac = gtv_exact(&a, &c).unwrap();
            let cb = gtv_exact(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
