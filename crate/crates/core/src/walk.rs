//! Tree-valued process along the genome.
//!
//! The walk starts from an n-coalescent at the left end of the genome and
//! grows a coalescing-splitting graph: at each step a split point is placed
//! uniformly on the retained structure, the position advances by an
//! exponential gap scaled by that structure's length, and the new branch
//! leaving the split point coalesces at rate 1 with each available line.
//! The variants differ only in what is retained and what is available:
//!
//! * `Full`: the whole graph (exact ARG law).
//! * `Smc`: the current tree, with the branch above the split point removed
//!   from the available lines.
//! * `SmcPrime`: the current tree, nothing removed.
//! * `Macs(k)`: split points on the current tree; the lines of the trees of
//!   the last `k` steps are available.
//!
//! The finished graph is returned as an [`ArgEventLog`], so trees, paths and
//! distances are read off it exactly as for a backward simulation.

use std::fmt;
use std::str::FromStr;

use crate::arg::{ArgEvent, ArgEventLog, TreePath};
use crate::error::{Error, Result};
use crate::kingman::sample_kingman_labelled;
use crate::rng::RandomSource;
use crate::stats::{ks_exponential, KsResult};
use crate::tree::{default_labels, NodeId, UltrametricTree};

const MAX_STEPS: usize = 5_000_000;
const MAX_EDGES: usize = 4_000_000;

/// Coalescence times of a new branch more than this many expected tree
/// heights above its start are redrawn.
const HORIZON_HEIGHTS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WalkVariant {
    #[default]
    Full,
    Smc,
    SmcPrime,
    Macs(usize),
}

impl fmt::Display for WalkVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkVariant::Full => write!(f, "full"),
            WalkVariant::Smc => write!(f, "smc"),
            WalkVariant::SmcPrime => write!(f, "smc-prime"),
            WalkVariant::Macs(k) => write!(f, "macs({k})"),
        }
    }
}

impl FromStr for WalkVariant {
    type Err = Error;

    /// Accepts `full`, `smc`, `smc-prime` (or `smc'`), `macs(k)` and `macs:k`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let v = match t.as_str() {
            "full" => WalkVariant::Full,
            "smc" => WalkVariant::Smc,
            "smc-prime" | "smc'" | "smcprime" => WalkVariant::SmcPrime,
            _ => {
                let k = t
                    .strip_prefix("macs(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| t.strip_prefix("macs:"))
                    .ok_or_else(|| Error::invalid(format!("unknown walk variant `{s}`")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad MaCS window in `{s}`")))?;
                WalkVariant::Macs(k)
            }
        };
        v.check()?;
        Ok(v)
    }
}

impl WalkVariant {
    fn check(&self) -> Result<()> {
        match self {
            WalkVariant::Macs(0) => Err(Error::invalid("MaCS window must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// One step of the walk: the candidate breakpoint, the retained length it
/// was drawn with, and the gap from the previous position. The last step of
/// a walk has `position > b` and creates no split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkStep {
    pub position: f64,
    pub length: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct WalkOutcome {
    pub log: ArgEventLog,
    pub steps: Vec<WalkStep>,
}

impl WalkOutcome {
    pub fn path(&self) -> Result<TreePath> {
        self.log.tree_path(&self.log.all_leaves())
    }
}

/// Samples the tree path of an n-sample on `[a, b]` along the genome.
pub fn sample_walk(
    n: usize,
    a: f64,
    b: f64,
    rho: f64,
    variant: WalkVariant,
    rng: &mut RandomSource,
) -> Result<TreePath> {
    sample_walk_detailed(n, a, b, rho, variant, rng)?.path()
}

/// Like [`sample_walk`] but returns the whole graph and the step record.
pub fn sample_walk_detailed(
    n: usize,
    a: f64,
    b: f64,
    rho: f64,
    variant: WalkVariant,
    rng: &mut RandomSource,
) -> Result<WalkOutcome> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_walk_params(a, b, rho, variant)?;
    let start = sample_kingman_labelled(default_labels(n), rng);
    run(&start, a, b, rho, variant, rng)
}

/// Runs the walk from a given tree at `a` instead of a fresh n-coalescent.
pub fn sample_walk_from(
    initial: &UltrametricTree,
    a: f64,
    b: f64,
    rho: f64,
    variant: WalkVariant,
    rng: &mut RandomSource,
) -> Result<WalkOutcome> {
    check_walk_params(a, b, rho, variant)?;
    run(initial, a, b, rho, variant, rng)
}

fn check_walk_params(a: f64, b: f64, rho: f64, variant: WalkVariant) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("genome interval [{a}, {b}] must satisfy a < b")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(
            "rho must be > 0; use a tiny value such as 1e-12 for the no-recombination limit",
        ));
    }
    variant.check()
}

/// KS test of the rescaled gaps `gap * length * rho` against Exponential(1),
/// i.e. of the gap law conditional on the retained length.
pub fn breakpoint_intensity_check(steps: &[WalkStep], rho: f64) -> KsResult {
    let xs: Vec<f64> = steps.iter().map(|s| s.gap * s.length * rho).collect();
    ks_exponential(&xs, 1.0)
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Leaf,
    Merge { children: [usize; 2], up: usize },
    Split { down: usize, mark: f64, left: usize, right: usize },
}

#[derive(Clone, Copy, Debug)]
struct Node {
    time: f64,
    kind: Kind,
}

/// A vertical line between two nodes; `top == None` is the line running up
/// forever from the highest node.
#[derive(Clone, Copy, Debug)]
struct Edge {
    bottom: usize,
    top: Option<usize>,
}

struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Lines of one tree read from the graph: edges below its root and the
/// root's continuation upward, plus the nodes where two lineages meet.
struct TreeLines {
    below: Vec<usize>,
    above: Vec<usize>,
    junction: Vec<bool>,
}

impl Graph {
    /// Leaf `i` is node `i` with edge `i`; merge `k` of the tree is node and
    /// edge `n + k`.
    fn from_tree(tree: &UltrametricTree) -> Self {
        let n = tree.n_leaves();
        let mut nodes: Vec<Node> = (0..n).map(|_| Node { time: 0.0, kind: Kind::Leaf }).collect();
        let mut edges: Vec<Edge> = (0..n).map(|i| Edge { bottom: i, top: None }).collect();
        for (k, m) in tree.merges().iter().enumerate() {
            let v = n + k;
            nodes.push(Node {
                time: m.time,
                kind: Kind::Merge { children: m.children, up: v },
            });
            edges.push(Edge { bottom: v, top: None });
            edges[m.children[0]].top = Some(v);
            edges[m.children[1]].top = Some(v);
        }
        Self { nodes, edges }
    }

    fn bottom_time(&self, e: usize) -> f64 {
        self.nodes[self.edges[e].bottom].time
    }

    fn top_time(&self, e: usize) -> f64 {
        self.edges[e].top.map_or(f64::INFINITY, |v| self.nodes[v].time)
    }

    fn length(&self, e: usize) -> f64 {
        self.top_time(e) - self.bottom_time(e)
    }

    /// Edge followed upward out of node `v`; at a split the right branch is
    /// taken when `mark <= threshold`.
    fn next_up(&self, v: usize, threshold: f64) -> usize {
        match self.nodes[v].kind {
            Kind::Merge { up, .. } => up,
            Kind::Split { mark, left, right, .. } => {
                if mark <= threshold {
                    right
                } else {
                    left
                }
            }
            Kind::Leaf => unreachable!("leaves have no incoming edge"),
        }
    }

    /// Cuts edge `e` at the (new) node `v`: `e` keeps the lower part and
    /// the returned edge is the upper part.
    fn subdivide(&mut self, e: usize, v: usize) -> usize {
        let upper = self.edges.len();
        let top = self.edges[e].top;
        self.edges.push(Edge { bottom: v, top });
        if let Some(t) = top {
            match &mut self.nodes[t].kind {
                Kind::Merge { children, .. } => {
                    for c in children.iter_mut() {
                        if *c == e {
                            *c = upper;
                        }
                    }
                }
                Kind::Split { down, .. } => *down = upper,
                Kind::Leaf => unreachable!(),
            }
        }
        self.edges[e].top = Some(v);
        upper
    }

    /// Inserts a split on `e` at `time`; returns `(left, right)` where left
    /// is the upper part of `e` and right a new edge with no top yet.
    fn insert_split(&mut self, e: usize, time: f64, mark: f64) -> (usize, usize) {
        let v = self.nodes.len();
        self.nodes.push(Node { time, kind: Kind::Leaf });
        let left = self.subdivide(e, v);
        let right = self.edges.len();
        self.edges.push(Edge { bottom: v, top: None });
        self.nodes[v].kind = Kind::Split { down: e, mark, left, right };
        (left, right)
    }

    /// Lets the topless edge `branch` end by merging into `target` at `time`.
    fn insert_merge(&mut self, target: usize, branch: usize, time: f64) {
        let v = self.nodes.len();
        self.nodes.push(Node { time, kind: Kind::Leaf });
        let up = self.subdivide(target, v);
        self.nodes[v].kind = Kind::Merge { children: [target, branch], up };
        self.edges[branch].top = Some(v);
    }

    fn read_tree(&self, n: usize, threshold: f64) -> TreeLines {
        let mut seen = vec![false; self.edges.len()];
        let mut junction = vec![false; self.nodes.len()];
        let mut order = Vec::new();
        for leaf in 0..n {
            let mut e = leaf;
            loop {
                if seen[e] {
                    junction[self.edges[e].bottom] = true;
                    break;
                }
                seen[e] = true;
                order.push(e);
                match self.edges[e].top {
                    None => break,
                    Some(t) => e = self.next_up(t, threshold),
                }
            }
        }
        let root_time = junction
            .iter()
            .enumerate()
            .filter(|(_, j)| **j)
            .map(|(v, _)| self.nodes[v].time)
            .fold(0.0, f64::max);
        let (below, above) = order.into_iter().partition(|&e| self.top_time(e) <= root_time);
        TreeLines { below, above, junction }
    }

    /// Draws the coalescence of a branch starting at `t0` with the lines
    /// `cands`, each alive on `[bottom, top)`, at rate 1 per line alive.
    fn coalescence(&self, cands: &[usize], t0: f64, rng: &mut RandomSource) -> (f64, usize) {
        let mut changes: Vec<(f64, i64)> = Vec::with_capacity(2 * cands.len());
        for &e in cands {
            let hi = self.top_time(e);
            if hi > t0 {
                changes.push((self.bottom_time(e).max(t0), 1));
                if hi.is_finite() {
                    changes.push((hi, -1));
                }
            }
        }
        changes.sort_by(|x, y| x.0.total_cmp(&y.0));
        let target = rng.exponential(1.0);
        let (mut cur, mut count, mut acc) = (t0, 0i64, 0.0);
        let mut t = f64::INFINITY;
        for &(time, delta) in &changes {
            if count > 0 && acc + count as f64 * (time - cur) >= target {
                t = cur + (target - acc) / count as f64;
                break;
            }
            acc += count as f64 * (time - cur);
            cur = time;
            count += delta;
        }
        if t.is_infinite() {
            debug_assert!(count > 0, "an unbounded line is always available");
            t = cur + (target - acc) / count as f64;
        }
        let alive: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&e| self.bottom_time(e) <= t && t < self.top_time(e))
            .collect();
        (t, alive[rng.index(alive.len())])
    }

    fn into_log(self, leaves: Vec<String>, a: f64, b: f64, rho: f64) -> Result<ArgEventLog> {
        let n = leaves.len();
        let mut order: Vec<usize> = (n..self.nodes.len()).collect();
        order.sort_by(|&x, &y| self.nodes[x].time.total_cmp(&self.nodes[y].time));
        let events = order
            .into_iter()
            .map(|v| {
                let time = self.nodes[v].time;
                match self.nodes[v].kind {
                    Kind::Merge { children, up } => ArgEvent::Coalesce {
                        time,
                        parts: children,
                        parent: up,
                        node: NodeId(v as u64),
                    },
                    Kind::Split { down, mark, left, right } => ArgEvent::Split {
                        time,
                        particle: down,
                        mark,
                        left,
                        right,
                    },
                    Kind::Leaf => unreachable!(),
                }
            })
            .collect();
        ArgEventLog::from_events(leaves, a, b, rho, events)
    }
}

/// Number of graph lines alive between consecutive node times: `counts[i]`
/// holds on `[times[i], times[i + 1])`, the last entry up to infinity.
struct Profile {
    times: Vec<f64>,
    counts: Vec<usize>,
}

impl Profile {
    fn new(g: &Graph) -> Self {
        let mut times: Vec<f64> = g.nodes.iter().map(|v| v.time).filter(|&t| t > 0.0).collect();
        times.sort_by(|x, y| x.total_cmp(y));
        let n = g.nodes.len() - times.len();
        times.insert(0, 0.0);
        let counts = (0..times.len()).map(|k| n - k).collect();
        Self { times, counts }
    }

    /// Adds a breakpoint at `t` and returns its index.
    fn insert(&mut self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x <= t);
        let c = self.counts[i - 1];
        self.times.insert(i, t);
        self.counts.insert(i, c);
        i
    }

    /// Time at which the integrated count from `times[from]` reaches `hazard`.
    fn draw(&self, from: usize, hazard: f64) -> f64 {
        let (mut cur, mut acc) = (self.times[from], 0.0);
        for i in from.. {
            let c = self.counts[i] as f64;
            let next = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if c > 0.0 && acc + c * (next - cur) >= hazard {
                return cur + (hazard - acc) / c;
            }
            acc += c * (next - cur);
            cur = next;
        }
        unreachable!("the top interval is unbounded")
    }

    fn add_line(&mut self, from: usize, to: usize) {
        for c in &mut self.counts[from..to] {
            *c += 1;
        }
    }
}

/// Picks a point uniformly (by length) on the finite edges `edges`.
fn uniform_point(
    g: &Graph,
    edges: impl Iterator<Item = usize>,
    total: f64,
    rng: &mut RandomSource,
) -> (usize, f64) {
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for e in edges {
        acc += g.length(e);
        chosen = Some(e);
        if target < acc {
            break;
        }
    }
    let chosen = chosen.expect("positive length implies an edge");
    let (lo, hi) = (g.bottom_time(chosen), g.top_time(chosen));
    let mut t = rng.uniform_in(lo, hi);
    // keep node times distinct from the edge ends
    while !(t > lo && t < hi) {
        t = rng.uniform_in(lo, hi);
    }
    (chosen, t)
}

fn run(
    initial: &UltrametricTree,
    a: f64,
    b: f64,
    rho: f64,
    variant: WalkVariant,
    rng: &mut RandomSource,
) -> Result<WalkOutcome> {
    let n = initial.n_leaves();
    let mut g = Graph::from_tree(initial);
    let horizon = HORIZON_HEIGHTS * 2.0 * (1.0 - 1.0 / n as f64);
    let mut steps = Vec::new();
    // positions U_0 = a, U_1, ...; the tree of step j is read after U_j
    let mut positions = vec![a];
    let mut pos = a;
    let mut profile = (variant == WalkVariant::Full).then(|| Profile::new(&g));
    let mut full_length = initial.total_length();
    loop {
        if steps.len() >= MAX_STEPS || g.edges.len() >= MAX_EDGES {
            return Err(Error::ResourceLimit(format!(
                "walk exceeded {} steps or {} graph lines at position {pos}",
                steps.len(),
                g.edges.len()
            )));
        }
        // retained edges (finite) and the lines available for coalescence
        let (retained, mut cands, current) = match variant {
            // every line is available and every finite line retained;
            // `profile` and `full_length` stand in for the lists
            WalkVariant::Full => (Vec::new(), Vec::new(), None),
            WalkVariant::Smc | WalkVariant::SmcPrime => {
                let t = g.read_tree(n, pos);
                let mut cands: Vec<usize> = t.below.iter().chain(&t.above).copied().collect();
                cands.sort_unstable();
                (t.below.clone(), cands, Some(t))
            }
            WalkVariant::Macs(k) => {
                // split points stay on the current tree; earlier trees only
                // contribute lines to coalesce with
                let current = g.read_tree(n, pos);
                let from = positions.len().saturating_sub(k);
                let mut avail = vec![false; g.edges.len()];
                for &u in &positions[from..] {
                    let t = g.read_tree(n, u);
                    for &e in t.below.iter().chain(&t.above) {
                        avail[e] = true;
                    }
                }
                let cands = (0..avail.len()).filter(|&e| avail[e]).collect();
                (current.below, cands, None)
            }
        };
        let length: f64 = match variant {
            WalkVariant::Full => full_length,
            _ => retained.iter().map(|&e| g.length(e)).sum(),
        };
        if !(length > 0.0) {
            // a single leaf never recombines
            break;
        }
        let gap = rng.exponential(1.0) / (length * rho);
        let next = pos + gap;
        steps.push(WalkStep { position: next, length, gap });
        if next > b {
            break;
        }
        pos = next;

        let (x_edge, x_time) = match variant {
            WalkVariant::Full => {
                let finite = (0..g.edges.len()).filter(|&e| g.edges[e].top.is_some());
                uniform_point(&g, finite, length, rng)
            }
            _ => uniform_point(&g, retained.iter().copied(), length, rng),
        };
        let (left, right) = g.insert_split(x_edge, x_time, pos);
        let (t_c, target) = match profile.as_mut() {
            Some(prof) => {
                let ix = prof.insert(x_time);
                let mut t_c = prof.draw(ix, rng.exponential(1.0));
                while t_c - x_time > horizon {
                    log::warn!("coalescence {} above its split point exceeds the horizon; redrawn", t_c - x_time);
                    t_c = prof.draw(ix, rng.exponential(1.0));
                }
                let ic = prof.insert(t_c);
                prof.add_line(ix, ic);
                let alive: Vec<usize> = (0..g.edges.len())
                    .filter(|&e| e != right && g.bottom_time(e) <= t_c && t_c < g.top_time(e))
                    .collect();
                debug_assert_eq!(alive.len(), prof.counts[ic]);
                (t_c, alive[rng.index(alive.len())])
            }
            None => {
                match (variant, &current) {
                    (WalkVariant::Smc, Some(tree)) => {
                        // drop the branch from the split point up to the next
                        // node where two lineages of the current tree meet
                        let mut deleted = vec![left];
                        let mut e = left;
                        while let Some(t) = g.edges[e].top {
                            if tree.junction.get(t).copied().unwrap_or(false) {
                                break;
                            }
                            e = g.next_up(t, pos);
                            deleted.push(e);
                        }
                        cands.retain(|e| !deleted.contains(e));
                    }
                    _ => cands.push(left),
                }
                let (mut t_c, mut target) = g.coalescence(&cands, x_time, rng);
                while t_c - x_time > horizon {
                    log::warn!("coalescence {} above its split point exceeds the horizon; redrawn", t_c - x_time);
                    (t_c, target) = g.coalescence(&cands, x_time, rng);
                }
                (t_c, target)
            }
        };
        full_length += t_c - x_time;
        if g.edges[target].top.is_none() {
            full_length += t_c - g.bottom_time(target);
        }
        g.insert_merge(target, right, t_c);
        positions.push(pos);
    }
    let leaves = initial.leaves().to_vec();
    let log = g.into_log(leaves, a, b, rho)?.with_seed(Some(rng.master_seed()));
    Ok(WalkOutcome { log, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arg::sample_arg;
    use crate::kingman::sample_kingman;
    use crate::stats::{ks_one_sample, ks_two_sample, mean_se};

    const VARIANTS: [WalkVariant; 5] = [
        WalkVariant::Full,
        WalkVariant::Smc,
        WalkVariant::SmcPrime,
        WalkVariant::Macs(1),
        WalkVariant::Macs(3),
    ];

    #[test]
    fn variant_names_round_trip() {
        for v in VARIANTS {
            assert_eq!(v.to_string().parse::<WalkVariant>().unwrap(), v);
        }
        assert_eq!("macs:5".parse::<WalkVariant>().unwrap(), WalkVariant::Macs(5));
        assert!("macs(0)".parse::<WalkVariant>().is_err());
        assert!("hudson".parse::<WalkVariant>().is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut r = RandomSource::new(0, 0);
        assert!(sample_walk(0, 0.0, 1.0, 1.0, WalkVariant::Full, &mut r).is_err());
        assert!(sample_walk(3, 1.0, 1.0, 1.0, WalkVariant::Full, &mut r).is_err());
        assert!(sample_walk(3, 0.0, 1.0, 0.0, WalkVariant::Smc, &mut r).is_err());
        assert!(sample_walk(3, 0.0, 1.0, 1.0, WalkVariant::Macs(0), &mut r).is_err());
    }

    #[test]
    fn negligible_recombination_gives_one_tree() {
        for v in VARIANTS {
            let mut r = RandomSource::new(1, 0);
            let out = sample_walk_detailed(6, 0.0, 1.0, 1e-12, v, &mut r).unwrap();
            let path = out.path().unwrap();
            assert_eq!(path.n_breakpoints(), 0);
            assert_eq!(out.log.n_splits(), 0);
            assert_eq!(out.steps.len(), 1);
            assert!(path.trees[0].is_ultrametric());
        }
    }

    #[test]
    fn single_leaf_never_splits() {
        let mut r = RandomSource::new(2, 0);
        let out = sample_walk_detailed(1, 0.0, 5.0, 3.0, WalkVariant::Full, &mut r).unwrap();
        assert!(out.steps.is_empty());
        assert_eq!(out.path().unwrap().trees[0].n_leaves(), 1);
    }

    #[test]
    fn positions_increase_and_stay_in_genome() {
        for v in VARIANTS {
            for i in 0..200 {
                let out = sample_walk_detailed(5, 0.0, 2.0, 1.0, v, &mut RandomSource::new(3, i)).unwrap();
                let (last, body) = out.steps.split_last().unwrap();
                assert!(last.position > 2.0);
                let mut prev = 0.0;
                for s in body {
                    assert!(s.position > prev && s.position <= 2.0);
                    assert!(s.gap > 0.0 && s.length > 0.0);
                    prev = s.position;
                }
                let path = out.path().unwrap();
                assert!(path.breakpoints.windows(2).all(|w| w[0] < w[1]));
                assert!(path.breakpoints.iter().all(|&x| x > 0.0 && x <= 2.0));
                assert!(path.trees.iter().all(|t| t.is_ultrametric() && t.n_leaves() == 5));
            }
        }
    }

    #[test]
    fn deterministic_given_source() {
        for v in VARIANTS {
            let x = sample_walk_detailed(6, 0.0, 3.0, 1.0, v, &mut RandomSource::new(4, 7)).unwrap();
            let y = sample_walk_detailed(6, 0.0, 3.0, 1.0, v, &mut RandomSource::new(4, 7)).unwrap();
            assert_eq!(x.log, y.log);
        }
    }

    #[test]
    fn macs_window_one_is_smc_prime() {
        for i in 0..100 {
            let x = sample_walk_detailed(5, 0.0, 4.0, 1.0, WalkVariant::SmcPrime, &mut RandomSource::new(5, i))
                .unwrap();
            let y = sample_walk_detailed(5, 0.0, 4.0, 1.0, WalkVariant::Macs(1), &mut RandomSource::new(5, i))
                .unwrap();
            assert_eq!(x.log, y.log);
        }
    }

    #[test]
    fn smc_changes_tree_at_every_split() {
        let mut unchanged_prime = 0;
        for i in 0..300 {
            let out = sample_walk_detailed(4, 0.0, 3.0, 1.0, WalkVariant::Smc, &mut RandomSource::new(6, i))
                .unwrap();
            assert_eq!(out.path().unwrap().trees.len(), out.log.n_splits() + 1);
            let prime = sample_walk_detailed(4, 0.0, 3.0, 1.0, WalkVariant::SmcPrime, &mut RandomSource::new(6, i))
                .unwrap();
            unchanged_prime += prime.log.n_splits() + 1 - prime.path().unwrap().trees.len();
        }
        // re-coalescence onto the split branch leaves the tree unchanged
        assert!(unchanged_prime > 0);
    }

    #[test]
    fn initial_tree_is_kept_at_left_end() {
        let mut r = RandomSource::new(7, 0);
        let t0 = sample_kingman(6, &mut r).unwrap();
        for v in VARIANTS {
            let out = sample_walk_from(&t0, 0.0, 1.0, 2.0, v, &mut r).unwrap();
            let first = out.log.extract_tree(&out.log.all_leaves(), 0.0).unwrap();
            assert_eq!(first.distance_matrix(), t0.distance_matrix());
        }
    }

    #[test]
    fn marginal_tree_is_kingman_for_every_variant() {
        let n = 4;
        let reps = 4000;
        for v in VARIANTS {
            let trees: Vec<UltrametricTree> = (0..reps)
                .map(|i| {
                    let out = sample_walk_detailed(n, 0.0, 2.0, 1.0, v, &mut RandomSource::new(8, i)).unwrap();
                    out.log.extract_tree(&out.log.all_leaves(), 2.0).unwrap()
                })
                .collect();
            for (lvl, k) in (2..=n).rev().enumerate() {
                let xs: Vec<f64> = trees.iter().map(|t| t.level_times()[lvl]).collect();
                let ks = ks_exponential(&xs, (k * (k - 1)) as f64 / 2.0);
                assert!(ks.p_value > 0.001, "{v} level {k}: p = {}", ks.p_value);
            }
        }
    }

    #[test]
    fn full_walk_matches_backward_breakpoint_count() {
        let reps = 4000;
        let count = |xs: Vec<f64>| mean_se(&xs);
        let walk = count(
            (0..reps)
                .map(|i| {
                    let p = sample_walk(4, 0.0, 1.0, 1.5, WalkVariant::Full, &mut RandomSource::new(9, i)).unwrap();
                    p.n_breakpoints() as f64
                })
                .collect(),
        );
        let back = count(
            (0..reps)
                .map(|i| {
                    let arg = sample_arg(4, 0.0, 1.0, 1.5, &mut RandomSource::new(10, i)).unwrap();
                    arg.tree_path(&arg.all_leaves()).unwrap().n_breakpoints() as f64
                })
                .collect(),
        );
        let z = (walk.0 - back.0) / (walk.1.powi(2) + back.1.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "walk {walk:?} backward {back:?}");
    }

    #[test]
    fn frozen_length_gaps_are_exponential() {
        let mut r = RandomSource::new(11, 0);
        let steps: Vec<WalkStep> = (0..100_000)
            .map(|_| {
                let gap = r.exponential(1.0) / (3.0 * 2.0);
                WalkStep { position: 0.0, length: 3.0, gap }
            })
            .collect();
        assert!(breakpoint_intensity_check(&steps, 2.0).p_value > 0.01);
        let wrong: Vec<WalkStep> = steps.iter().map(|s| WalkStep { length: 2.0, ..*s }).collect();
        assert!(breakpoint_intensity_check(&wrong, 2.0).p_value < 1e-6);
    }

    #[test]
    fn walk_gaps_are_exponential_given_length() {
        for v in VARIANTS {
            let steps: Vec<WalkStep> = (0..2000)
                .flat_map(|i| {
                    sample_walk_detailed(4, 0.0, 2.0, 1.0, v, &mut RandomSource::new(12, i))
                        .unwrap()
                        .steps
                })
                .collect();
            let ks = breakpoint_intensity_check(&steps, 1.0);
            assert!(ks.p_value > 0.001, "{v}: p = {}", ks.p_value);
        }
    }

    /// `P(gap <= g) = 1 - E[exp(-2 rho T g)]` with `T ~ Exp(1)`, by Simpson's
    /// rule on `[0, 60]`.
    fn first_gap_cdf_quadrature(g: f64, rho: f64) -> f64 {
        let m = 60_000;
        let h = 60.0 / m as f64;
        let f = |t: f64| (-2.0 * rho * t * g - t).exp();
        let mut s = f(0.0) + f(60.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        1.0 - s * h / 3.0
    }

    #[test]
    fn smc_first_gap_matches_quadrature() {
        let rho = 2.0;
        for g in [0.01, 0.3, 2.0] {
            let closed = 1.0 - 1.0 / (1.0 + 2.0 * rho * g);
            assert!((first_gap_cdf_quadrature(g, rho) - closed).abs() < 1e-9);
        }
        let xs: Vec<f64> = (0..20_000)
            .map(|i| {
                sample_walk_detailed(2, 0.0, 1.0, rho, WalkVariant::Smc, &mut RandomSource::new(13, i))
                    .unwrap()
                    .steps[0]
                    .gap
            })
            .collect();
        let ks = ks_one_sample(&xs, |g| first_gap_cdf_quadrature(g, rho));
        assert!(ks.p_value > 0.01, "p = {}", ks.p_value);
    }

    #[test]
    fn full_first_gap_matches_direct_simulation() {
        let rho = 2.0;
        let walk: Vec<f64> = (0..20_000)
            .map(|i| {
                sample_walk_detailed(2, 0.0, 1.0, rho, WalkVariant::Full, &mut RandomSource::new(14, i))
                    .unwrap()
                    .steps[0]
                    .gap
            })
            .collect();
        let mut r = RandomSource::new(15, 0);
        let direct: Vec<f64> = (0..20_000)
            .map(|_| {
                let len = sample_kingman(2, &mut r).unwrap().total_length();
                r.exponential(1.0) / (len * rho)
            })
            .collect();
        let ks = ks_two_sample(&walk, &direct);
        assert!(ks.p_value > 0.01, "p = {}", ks.p_value);
    }
}
