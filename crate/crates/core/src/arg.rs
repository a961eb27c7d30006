//! Backward-in-time ancestral recombination graph.
//!
//! A realization is stored as an [`ArgEventLog`]: particles `0..n` are the
//! sampled leaves, and every event creates fresh particle ids for its
//! outputs. A coalescence records the [`NodeId`] it creates so that trees
//! read off the log at different loci (or after subsampling / restriction)
//! can be compared by node identity instead of by floating-point times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newick;
use crate::rng::RandomSource;
use crate::tree::{default_labels, Merge, NodeId, UltrametricTree};

/// Hard cap on events per realization; beyond it the simulation is aborted
/// with a resource-limit error.
const MAX_EVENTS: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum ArgEvent {
    Coalesce {
        time: f64,
        parts: [usize; 2],
        parent: usize,
        node: NodeId,
    },
    Split {
        time: f64,
        particle: usize,
        mark: f64,
        left: usize,
        right: usize,
    },
}

impl ArgEvent {
    pub fn time(&self) -> f64 {
        match self {
            ArgEvent::Coalesce { time, .. } | ArgEvent::Split { time, .. } => *time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ArgAlgorithm {
    /// Every particle splits at rate ρ(b − a), including particles that carry
    /// no ancestral material.
    #[default]
    GriffithsMarjoram,
    /// Only particles carrying ancestral material split, at rate ρ times the
    /// span of that material; material whose MRCA has been reached is
    /// dropped.
    Hudson,
    /// Griffiths–Marjoram while ρ(b − a) <= [`AUTO_GM_LIMIT`], Hudson above.
    Auto,
}

/// Largest ρ(b − a) for which [`ArgAlgorithm::Auto`] picks the
/// Griffiths–Marjoram simulator. Its particle count equilibrates near
/// 2ρ(b − a) and the time to reach one particle grows exponentially.
pub const AUTO_GM_LIMIT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ArgEventLog {
    n_leaves: usize,
    a: f64,
    b: f64,
    rho: f64,
    seed: Option<u64>,
    leaves: Vec<String>,
    events: Vec<ArgEvent>,
    n_particles: usize,
}

fn check_params(n: usize, a: f64, b: f64, rho: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("genome interval [{a}, {b}] must satisfy a < b")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(
            "rho must be > 0; use a tiny value such as 1e-12 for the no-recombination limit",
        ));
    }
    Ok(())
}

/// Samples an ARG with the Griffiths–Marjoram dynamics.
pub fn sample_arg(n: usize, a: f64, b: f64, rho: f64, rng: &mut RandomSource) -> Result<ArgEventLog> {
    sample_arg_with(n, a, b, rho, ArgAlgorithm::GriffithsMarjoram, rng)
}

pub fn sample_arg_with(
    n: usize,
    a: f64,
    b: f64,
    rho: f64,
    algorithm: ArgAlgorithm,
    rng: &mut RandomSource,
) -> Result<ArgEventLog> {
    check_params(n, a, b, rho)?;
    let alg = match algorithm {
        ArgAlgorithm::Auto if rho * (b - a) <= AUTO_GM_LIMIT => ArgAlgorithm::GriffithsMarjoram,
        ArgAlgorithm::Auto => ArgAlgorithm::Hudson,
        other => other,
    };
    let mut log = ArgEventLog {
        n_leaves: n,
        a,
        b,
        rho,
        seed: Some(rng.master_seed()),
        leaves: default_labels(n),
        events: Vec::new(),
        n_particles: n,
    };
    match alg {
        ArgAlgorithm::Hudson => simulate_hudson(&mut log, rng)?,
        _ => simulate_gm(&mut log, rng)?,
    }
    Ok(log)
}

fn simulate_gm(log: &mut ArgEventLog, rng: &mut RandomSource) -> Result<()> {
    let theta = log.rho * (log.b - log.a);
    let mut live: Vec<usize> = (0..log.n_leaves).collect();
    let mut t = 0.0;
    while live.len() > 1 {
        if log.events.len() >= MAX_EVENTS {
            return Err(Error::ResourceLimit(format!(
                "ARG exceeded {MAX_EVENTS} events; use the Hudson algorithm for large rho(b-a)"
            )));
        }
        let k = live.len() as f64;
        let coal = k * (k - 1.0) / 2.0;
        let split = theta * k;
        t += rng.exponential(coal + split);
        if rng.uniform() * (coal + split) < coal {
            let (i, j) = rng.distinct_pair(live.len());
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let q = live.swap_remove(hi);
            let p = live[lo];
            let parent = log.fresh();
            log.events.push(ArgEvent::Coalesce {
                time: t,
                parts: [p, q],
                parent,
                node: NodeId(parent as u64),
            });
            live[lo] = parent;
        } else {
            let i = rng.index(live.len());
            let particle = live[i];
            let mark = rng.uniform_in(log.a, log.b);
            let left = log.fresh();
            let right = log.fresh();
            log.events.push(ArgEvent::Split {
                time: t,
                particle,
                mark,
                left,
                right,
            });
            live[i] = left;
            live.push(right);
        }
    }
    Ok(())
}

/// Ancestral material of a particle: disjoint sorted segments with the
/// number of sampled leaves below each.
#[derive(Clone, Debug, Default)]
struct Material(Vec<(f64, f64, u32)>);

impl Material {
    fn span(&self) -> f64 {
        match (self.0.first(), self.0.last()) {
            (Some(f), Some(l)) => l.1 - f.0,
            _ => 0.0,
        }
    }

    fn hull(&self) -> (f64, f64) {
        (self.0[0].0, self.0[self.0.len() - 1].1)
    }

    fn split(&self, mark: f64) -> (Material, Material) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &(lo, hi, c) in &self.0 {
            if hi <= mark {
                left.push((lo, hi, c));
            } else if lo >= mark {
                right.push((lo, hi, c));
            } else {
                left.push((lo, mark, c));
                right.push((mark, hi, c));
            }
        }
        (Material(left), Material(right))
    }

    fn count_at(&self, x: f64) -> u32 {
        self.0
            .iter()
            .find(|&&(lo, hi, _)| lo <= x && x <= hi)
            .map_or(0, |s| s.2)
    }

    /// Union with summed counts; segments reaching `full` are dropped.
    fn merge(&self, other: &Material, full: u32) -> Material {
        let mut pts: Vec<f64> = self
            .0
            .iter()
            .chain(&other.0)
            .flat_map(|&(lo, hi, _)| [lo, hi])
            .collect();
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup();
        let mut out: Vec<(f64, f64, u32)> = Vec::new();
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let c = self.count_at(mid) + other.count_at(mid);
            if c == 0 || c >= full {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == w[0] && last.2 == c => last.1 = w[1],
                _ => out.push((w[0], w[1], c)),
            }
        }
        Material(out)
    }
}

fn simulate_hudson(log: &mut ArgEventLog, rng: &mut RandomSource) -> Result<()> {
    let n = log.n_leaves;
    let full = n as u32;
    let mut live: Vec<usize> = (0..n).collect();
    let mut mat: Vec<Material> = if n == 1 {
        vec![Material::default()]
    } else {
        vec![Material(vec![(log.a, log.b, 1)]); n]
    };
    let mut t = 0.0;
    while live.len() > 1 {
        if log.events.len() >= MAX_EVENTS {
            return Err(Error::ResourceLimit(format!("ARG exceeded {MAX_EVENTS} events")));
        }
        let k = live.len() as f64;
        let coal = k * (k - 1.0) / 2.0;
        let spans: Vec<f64> = mat.iter().map(|m| log.rho * m.span()).collect();
        let split: f64 = spans.iter().sum();
        t += rng.exponential(coal + split);
        if rng.uniform() * (coal + split) < coal {
            let (i, j) = rng.distinct_pair(live.len());
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let q = live.swap_remove(hi);
            let mq = mat.swap_remove(hi);
            let p = live[lo];
            let parent = log.fresh();
            log.events.push(ArgEvent::Coalesce {
                time: t,
                parts: [p, q],
                parent,
                node: NodeId(parent as u64),
            });
            live[lo] = parent;
            mat[lo] = mat[lo].merge(&mq, full);
        } else {
            let i = rng.weighted_index(&spans);
            let (h0, h1) = mat[i].hull();
            let mark = rng.uniform_in(h0, h1);
            let (ml, mr) = mat[i].split(mark);
            let particle = live[i];
            let left = log.fresh();
            let right = log.fresh();
            log.events.push(ArgEvent::Split {
                time: t,
                particle,
                mark,
                left,
                right,
            });
            live[i] = left;
            mat[i] = ml;
            live.push(right);
            mat.push(mr);
        }
    }
    Ok(())
}

impl ArgEventLog {
    fn fresh(&mut self) -> usize {
        self.n_particles += 1;
        self.n_particles - 1
    }

    /// Builds a log from parts and checks every invariant.
    pub fn from_events(
        leaves: Vec<String>,
        a: f64,
        b: f64,
        rho: f64,
        events: Vec<ArgEvent>,
    ) -> Result<Self> {
        check_params(leaves.len(), a, b, rho)?;
        let n_particles = events
            .iter()
            .map(|e| match e {
                ArgEvent::Coalesce { parts, parent, .. } => parts[0].max(parts[1]).max(*parent),
                ArgEvent::Split { particle, left, right, .. } => (*particle).max(*left).max(*right),
            })
            .max()
            .map_or(leaves.len(), |m| (m + 1).max(leaves.len()));
        let log = Self {
            n_leaves: leaves.len(),
            a,
            b,
            rho,
            seed: None,
            leaves,
            events,
            n_particles,
        };
        log.validate()?;
        Ok(log)
    }

    pub(crate) fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut alive = vec![false; self.n_particles];
        let mut born = vec![false; self.n_particles];
        for i in 0..self.n_leaves {
            alive[i] = true;
            born[i] = true;
        }
        let mut count = self.n_leaves;
        let mut last = 0.0;
        let take = |p: usize, alive: &mut Vec<bool>| -> Result<()> {
            if p >= alive.len() || !alive[p] {
                return Err(Error::invalid(format!("particle {p} is not alive")));
            }
            alive[p] = false;
            Ok(())
        };
        for (k, e) in self.events.iter().enumerate() {
            let t = e.time();
            if !(t > last) && !(k == 0 && t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("event {k}: times must increase strictly")));
            }
            last = t;
            if count <= 1 {
                return Err(Error::invalid("events after the last particle remains"));
            }
            let outputs: Vec<usize> = match e {
                ArgEvent::Coalesce { parts, parent, .. } => {
                    if parts[0] == parts[1] {
                        return Err(Error::invalid(format!("event {k}: self-coalescence")));
                    }
                    take(parts[0], &mut alive)?;
                    take(parts[1], &mut alive)?;
                    count -= 1;
                    vec![*parent]
                }
                ArgEvent::Split { particle, mark, left, right, .. } => {
                    if !(*mark >= self.a && *mark <= self.b) {
                        return Err(Error::invalid(format!("event {k}: mark outside genome")));
                    }
                    take(*particle, &mut alive)?;
                    count += 1;
                    vec![*left, *right]
                }
            };
            for o in outputs {
                if o >= born.len() || born[o] {
                    return Err(Error::invalid(format!("event {k}: particle {o} reused")));
                }
                born[o] = true;
                alive[o] = true;
            }
        }
        if count != 1 {
            return Err(Error::invalid(format!("log ends with {count} particles")));
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn genome(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn events(&self) -> &[ArgEvent] {
        &self.events
    }

    pub fn terminal_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time())
    }

    pub fn n_splits(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, ArgEvent::Split { .. }))
            .count()
    }

    /// Split marks in event order.
    pub fn marks(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                ArgEvent::Split { mark, .. } => Some(*mark),
                _ => None,
            })
            .collect()
    }

    /// Particle count after each event, starting with `n_leaves`.
    pub fn particle_counts(&self) -> Vec<usize> {
        let mut k = self.n_leaves;
        let mut out = Vec::with_capacity(self.events.len() + 1);
        out.push(k);
        for e in &self.events {
            match e {
                ArgEvent::Coalesce { .. } => k -= 1,
                ArgEvent::Split { .. } => k += 1,
            }
            out.push(k);
        }
        out
    }

    pub fn max_particles(&self) -> usize {
        self.particle_counts().into_iter().max().unwrap_or(0)
    }

    fn check_leaf_set(&self, leaves: &[usize]) -> Result<()> {
        if leaves.is_empty() {
            return Err(Error::invalid("leaf set must be non-empty"));
        }
        let mut seen = vec![false; self.n_leaves];
        for &i in leaves {
            if i >= self.n_leaves || seen[i] {
                return Err(Error::invalid(format!("bad or repeated leaf index {i}")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    fn check_locus(&self, u: f64) -> Result<()> {
        if !(u >= self.a && u <= self.b) {
            return Err(Error::invalid(format!(
                "locus {u} outside genome [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn all_leaves(&self) -> Vec<usize> {
        (0..self.n_leaves).collect()
    }

    /// Reads the tree of the leaves `set` (indices into the leaf list) at
    /// locus `u`. At a split on a followed particle the left child is
    /// followed when `u <= mark`.
    pub fn extract_tree(&self, set: &[usize], u: f64) -> Result<UltrametricTree> {
        self.check_leaf_set(set)?;
        self.check_locus(u)?;
        Ok(self.extract_unchecked(set, u))
    }

    pub(crate) fn extract_unchecked(&self, set: &[usize], u: f64) -> UltrametricTree {
        let m = set.len();
        let labels: Vec<String> = set.iter().map(|&i| self.leaves[i].clone()).collect();
        let mut follow: Vec<usize> = vec![usize::MAX; self.n_particles];
        for (k, &i) in set.iter().enumerate() {
            follow[i] = k;
        }
        let mut merges = Vec::with_capacity(m.saturating_sub(1));
        let mut count = m;
        for e in &self.events {
            if count <= 1 {
                break;
            }
            match *e {
                ArgEvent::Coalesce { time, parts, parent, node } => {
                    let (x, y) = (follow[parts[0]], follow[parts[1]]);
                    match (x != usize::MAX, y != usize::MAX) {
                        (true, true) => {
                            merges.push(Merge { time, children: [x, y], id: node });
                            follow[parent] = m + merges.len() - 1;
                            count -= 1;
                        }
                        (true, false) => follow[parent] = x,
                        (false, true) => follow[parent] = y,
                        _ => {}
                    }
                }
                ArgEvent::Split { particle, mark, left, right, .. } => {
                    let x = follow[particle];
                    if x != usize::MAX {
                        if u <= mark {
                            follow[left] = x;
                        } else {
                            follow[right] = x;
                        }
                    }
                }
            }
        }
        UltrametricTree::from_parts_unchecked(labels, merges)
    }

    /// Piecewise-constant tree path of the leaves `set` over the genome.
    pub fn tree_path(&self, set: &[usize]) -> Result<TreePath> {
        self.check_leaf_set(set)?;
        let mut marks = self.marks();
        marks.sort_by(|x, y| x.total_cmp(y));
        marks.dedup();
        // the interval (U_{i-1}, U_i] is represented by u = U_i
        let mut reps = marks.clone();
        reps.push(self.b);
        let mut breakpoints = Vec::new();
        let mut trees: Vec<UltrametricTree> = Vec::new();
        for (i, &u) in reps.iter().enumerate() {
            let t = self.extract_unchecked(set, u);
            match trees.last() {
                Some(prev) if prev.same_genealogy(&t) => {}
                Some(_) => {
                    breakpoints.push(marks[i - 1]);
                    trees.push(t);
                }
                None => trees.push(t),
            }
        }
        Ok(TreePath {
            a: self.a,
            b: self.b,
            breakpoints,
            trees,
        })
    }

    /// `(R, count)`: number of splits and number of trees on the pruned
    /// full-leaf path.
    pub fn distinct_tree_count(&self) -> (usize, usize) {
        let path = self
            .tree_path(&self.all_leaves())
            .expect("full leaf set is valid");
        (self.n_splits(), path.trees.len())
    }

    /// The ARG of the leaves `set` alone: joint coalescences of followed
    /// particles and splits of followed particles, up to the first time a
    /// single followed particle remains. Node identities and leaf labels are
    /// kept.
    pub fn subsample(&self, set: &[usize]) -> Result<ArgEventLog> {
        self.check_leaf_set(set)?;
        let m = set.len();
        let mut out = ArgEventLog {
            n_leaves: m,
            a: self.a,
            b: self.b,
            rho: self.rho,
            seed: self.seed,
            leaves: set.iter().map(|&i| self.leaves[i].clone()).collect(),
            events: Vec::new(),
            n_particles: m,
        };
        let mut follow = vec![usize::MAX; self.n_particles];
        for (k, &i) in set.iter().enumerate() {
            follow[i] = k;
        }
        let mut count = m;
        for e in &self.events {
            if count <= 1 {
                break;
            }
            match *e {
                ArgEvent::Coalesce { time, parts, parent, node } => {
                    let (x, y) = (follow[parts[0]], follow[parts[1]]);
                    match (x != usize::MAX, y != usize::MAX) {
                        (true, true) => {
                            let p = out.fresh();
                            out.events.push(ArgEvent::Coalesce { time, parts: [x, y], parent: p, node });
                            follow[parent] = p;
                            count -= 1;
                        }
                        (true, false) => follow[parent] = x,
                        (false, true) => follow[parent] = y,
                        _ => {}
                    }
                }
                ArgEvent::Split { time, particle, mark, left, right } => {
                    let x = follow[particle];
                    if x != usize::MAX {
                        let l = out.fresh();
                        let r = out.fresh();
                        out.events.push(ArgEvent::Split { time, particle: x, mark, left: l, right: r });
                        follow[left] = l;
                        follow[right] = r;
                        count += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    /// The ARG seen by loci in `[c, d]`: splits with marks inside are kept,
    /// a split with mark `< c` is replaced by following its right child and
    /// one with mark `> d` by following its left child.
    pub fn restrict_genome(&self, c: f64, d: f64) -> Result<ArgEventLog> {
        if !(self.a <= c && c < d && d <= self.b) {
            return Err(Error::invalid(format!(
                "[{c}, {d}] must be a non-degenerate subinterval of [{}, {}]",
                self.a, self.b
            )));
        }
        let n = self.n_leaves;
        let mut out = ArgEventLog {
            n_leaves: n,
            a: c,
            b: d,
            rho: self.rho,
            seed: self.seed,
            leaves: self.leaves.clone(),
            events: Vec::new(),
            n_particles: n,
        };
        let mut follow = vec![usize::MAX; self.n_particles];
        for i in 0..n {
            follow[i] = i;
        }
        let mut count = n;
        for e in &self.events {
            if count <= 1 {
                break;
            }
            match *e {
                ArgEvent::Coalesce { time, parts, parent, node } => {
                    let (x, y) = (follow[parts[0]], follow[parts[1]]);
                    match (x != usize::MAX, y != usize::MAX) {
                        (true, true) => {
                            let p = out.fresh();
                            out.events.push(ArgEvent::Coalesce { time, parts: [x, y], parent: p, node });
                            follow[parent] = p;
                            count -= 1;
                        }
                        (true, false) => follow[parent] = x,
                        (false, true) => follow[parent] = y,
                        _ => {}
                    }
                }
                ArgEvent::Split { time, particle, mark, left, right } => {
                    let x = follow[particle];
                    if x == usize::MAX {
                        continue;
                    }
                    if mark < c {
                        follow[right] = x;
                    } else if mark > d {
                        follow[left] = x;
                    } else {
                        let l = out.fresh();
                        let r = out.fresh();
                        out.events.push(ArgEvent::Split { time, particle: x, mark, left: l, right: r });
                        follow[left] = l;
                        follow[right] = r;
                        count += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Fraction of the leaves `set` whose lineage in the tree at `u` (up to
    /// that tree's root) carries a split with mark in `[min(u,v), max(u,v)]`.
    pub fn d_aux(&self, set: &[usize], u: f64, v: f64) -> Result<f64> {
        self.check_leaf_set(set)?;
        self.check_locus(u)?;
        self.check_locus(v)?;
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        Ok(self.cut_leaves(set, u, lo, hi).iter().filter(|c| **c).count() as f64 / set.len() as f64)
    }

    /// For each leaf of `set`, whether its lineage at `u` is hit by a split
    /// with mark in `[lo, hi]` before the root of the tree at `u`.
    pub(crate) fn cut_leaves(&self, set: &[usize], u: f64, lo: f64, hi: f64) -> Vec<bool> {
        let m = set.len();
        let mut cut = vec![false; m];
        if m <= 1 {
            return cut;
        }
        // per followed particle, the set-positions of the leaves below it
        let mut below: Vec<Option<Vec<usize>>> = vec![None; self.n_particles];
        for (k, &i) in set.iter().enumerate() {
            below[i] = Some(vec![k]);
        }
        let mut count = m;
        for e in &self.events {
            if count <= 1 {
                break;
            }
            match *e {
                ArgEvent::Coalesce { parts, parent, .. } => {
                    let x = below[parts[0]].take();
                    let y = below[parts[1]].take();
                    match (x, y) {
                        (Some(mut x), Some(y)) => {
                            x.extend(y);
                            below[parent] = Some(x);
                            count -= 1;
                        }
                        (Some(x), None) | (None, Some(x)) => below[parent] = Some(x),
                        _ => {}
                    }
                }
                ArgEvent::Split { particle, mark, left, right, .. } => {
                    if let Some(x) = below[particle].take() {
                        if mark >= lo && mark <= hi {
                            for &k in &x {
                                cut[k] = true;
                            }
                        }
                        if u <= mark {
                            below[left] = Some(x);
                        } else {
                            below[right] = Some(x);
                        }
                    }
                }
            }
        }
        cut
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = LogHeader {
            n: self.n_leaves,
            a: self.a,
            b: self.b,
            rho: self.rho,
            seed: self.seed,
            leaves: self.leaves.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for e in &self.events {
            let line = match *e {
                ArgEvent::Coalesce { time, parts, parent, node } => EventLine {
                    t: time,
                    kind: "coal".into(),
                    parts: vec![parts[0], parts[1], parent],
                    mark: None,
                    node: Some(node.0),
                },
                ArgEvent::Split { time, particle, mark, left, right } => EventLine {
                    t: time,
                    kind: "split".into(),
                    parts: vec![particle, left, right],
                    mark: Some(mark),
                    node: None,
                },
            };
            out.push_str(&serde_json::to_string(&line).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: LogHeader = serde_json::from_str(
            lines.next().ok_or_else(|| Error::parse(0, "missing header line"))?,
        )?;
        let leaves = if header.leaves.is_empty() {
            default_labels(header.n)
        } else {
            header.leaves
        };
        if leaves.len() != header.n {
            return Err(Error::invalid("header leaf count mismatch"));
        }
        let mut events = Vec::new();
        for (k, line) in lines.enumerate() {
            let ev: EventLine = serde_json::from_str(line)?;
            let e = match (ev.kind.as_str(), ev.parts.as_slice()) {
                ("coal", &[p, q, parent]) => ArgEvent::Coalesce {
                    time: ev.t,
                    parts: [p, q],
                    parent,
                    node: NodeId(ev.node.unwrap_or(parent as u64)),
                },
                ("split", &[particle, left, right]) => ArgEvent::Split {
                    time: ev.t,
                    particle,
                    mark: ev
                        .mark
                        .ok_or_else(|| Error::parse(k + 1, "split without mark"))?,
                    left,
                    right,
                },
                _ => return Err(Error::parse(k + 1, "unknown event line")),
            };
            events.push(e);
        }
        let mut log = Self::from_events(leaves, header.a, header.b, header.rho, events)?;
        log.seed = header.seed;
        Ok(log)
    }
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    n: usize,
    a: f64,
    b: f64,
    rho: f64,
    seed: Option<u64>,
    #[serde(default)]
    leaves: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    t: f64,
    #[serde(rename = "type")]
    kind: String,
    parts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mark: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    node: Option<u64>,
}

/// Piecewise-constant tree-valued map on `[a, b]`. Tree `i` covers
/// `(breakpoints[i-1], breakpoints[i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreePath {
    pub a: f64,
    pub b: f64,
    pub breakpoints: Vec<f64>,
    pub trees: Vec<UltrametricTree>,
}

impl TreePath {
    pub fn constant(a: f64, b: f64, tree: UltrametricTree) -> Self {
        Self {
            a,
            b,
            breakpoints: Vec::new(),
            trees: vec![tree],
        }
    }

    pub fn index_at(&self, u: f64) -> usize {
        self.breakpoints.partition_point(|&x| x < u)
    }

    pub fn tree_at(&self, u: f64) -> &UltrametricTree {
        &self.trees[self.index_at(u)]
    }

    pub fn n_breakpoints(&self) -> usize {
        self.breakpoints.len()
    }

    /// The same path seen on the window `[c, d]`.
    pub fn window(&self, c: f64, d: f64) -> Result<TreePath> {
        if !(self.a <= c && c < d && d <= self.b) {
            return Err(Error::invalid("window must be a subinterval of the genome"));
        }
        let first = self.index_at(c);
        let breakpoints: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&x| x >= c && x < d)
            .collect();
        let trees = self.trees[first..first + breakpoints.len() + 1].to_vec();
        Ok(TreePath {
            a: c,
            b: d,
            breakpoints,
            trees,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "a": self.a,
            "b": self.b,
            "breakpoints": self.breakpoints,
            "trees": self.trees.iter().map(newick::encode).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Rec {
            a: f64,
            b: f64,
            breakpoints: Vec<f64>,
            trees: Vec<String>,
        }
        let rec: Rec = serde_json::from_value(value.clone())?;
        if rec.trees.len() != rec.breakpoints.len() + 1 {
            return Err(Error::invalid("trees count must be breakpoints count + 1"));
        }
        if rec.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("breakpoints must increase strictly"));
        }
        let trees = rec
            .trees
            .iter()
            .map(|s| newick::decode(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(TreePath {
            a: rec.a,
            b: rec.b,
            breakpoints: rec.breakpoints,
            trees,
        })
    }

    pub const CSV_HEADER: &'static str = "replicate,breakpoints,height_first,height_last,max_height";

    pub fn csv_row(&self, replicate: usize) -> String {
        let first = self.trees.first().map_or(0.0, |t| t.root_time());
        let last = self.trees.last().map_or(0.0, |t| t.root_time());
        let max = self.trees.iter().map(|t| t.root_time()).fold(0.0, f64::max);
        format!("{replicate},{},{first},{last},{max}", self.breakpoints.len())
    }
}

/// Small hand-built ARGs whose trees are known.
pub mod fixtures {
    use super::*;

    fn coal(time: f64, p: usize, q: usize, parent: usize) -> ArgEvent {
        ArgEvent::Coalesce { time, parts: [p, q], parent, node: NodeId(parent as u64) }
    }

    fn split(time: f64, particle: usize, mark: f64, left: usize, right: usize) -> ArgEvent {
        ArgEvent::Split { time, particle, mark, left, right }
    }

    /// Five leaves on [0, 1] with two recombinations at marks 0.3 and 0.7.
    /// Leaves 1..5 are particles 0..4.
    pub fn two_mark_fixture() -> ArgEventLog {
        let events = vec![
            coal(1.0, 3, 4, 5),        // (4,5)
            split(1.5, 0, 0.3, 6, 7),  // leaf 1: left 6, right 7
            coal(2.3, 7, 1, 8),        // right part of 1 with 2
            split(3.0, 2, 0.7, 9, 10), // leaf 3: left 9, right 10
            coal(4.0, 10, 5, 11),      // right part of 3 with (4,5)
            coal(5.0, 9, 8, 12),       // left part of 3 with (1r,2)
            coal(6.0, 12, 11, 13),
            coal(7.0, 6, 13, 14),      // left part of 1 joins last
        ];
        ArgEventLog::from_events(default_labels(5), 0.0, 1.0, 1.0, events).expect("fixture is a valid log")
    }

    /// Five leaves on [0, 1], loci 0.2 and 0.8, a single recombination with
    /// mark 0.5 on the ancestor of leaves 4 and 5.
    pub fn one_mark_fixture() -> ArgEventLog {
        let events = vec![
            coal(1.0, 3, 4, 5),
            coal(2.3, 1, 2, 6),
            split(4.0, 5, 0.5, 7, 8),
            coal(5.0, 7, 6, 9),
            coal(6.0, 8, 0, 10),
            coal(7.0, 9, 10, 11),
        ];
        ArgEventLog::from_events(default_labels(5), 0.0, 1.0, 1.0, events).expect("fixture is a valid log")
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::stats::{chi_square_two_sample, ks_exponential, mean_se, proportion_se};

    fn newick_of(t: &UltrametricTree) -> String {
        newick::encode(t)
    }

    #[test]
    fn two_mark_fixture_trees() {
        let arg = two_mark_fixture();
        let all = arg.all_leaves();
        let left = arg.extract_tree(&all, 0.1).unwrap();
        let mid = arg.extract_tree(&all, 0.5).unwrap();
        let right = arg.extract_tree(&all, 0.9).unwrap();
        assert_eq!(newick_of(&left), "(1:7,((3:5,2:5):1,(4:1,5:1):5):1);");
        assert_eq!(newick_of(&mid), "((3:5,(1:2.3,2:2.3):2.7):1,(4:1,5:1):5);");
        assert_eq!(newick_of(&right), "((1:2.3,2:2.3):3.7,(3:4,(4:1,5:1):3):2);");
        // heights and pair distances
        assert_eq!(left.root_time(), 7.0);
        assert_eq!(mid.root_time(), 6.0);
        assert_eq!(right.root_time(), 6.0);
        let d = |t: &UltrametricTree, i: usize, j: usize| t.pair_distance(i, j) / 2.0;
        assert_eq!(d(&left, 1, 2), 5.0);
        assert_eq!(d(&left, 0, 1), 7.0);
        assert_eq!(d(&mid, 0, 1), 2.3);
        assert_eq!(d(&mid, 0, 2), 5.0);
        assert_eq!(d(&mid, 2, 3), 6.0);
        assert_eq!(d(&right, 0, 1), 2.3);
        assert_eq!(d(&right, 2, 3), 4.0);
        assert_eq!(d(&right, 0, 2), 6.0);
        let path = arg.tree_path(&all).unwrap();
        assert_eq!(path.breakpoints, vec![0.3, 0.7]);
        assert_eq!(arg.distinct_tree_count(), (2, 3));
    }

    #[test]
    fn one_mark_fixture_d_aux() {
        let arg = one_mark_fixture();
        let all = arg.all_leaves();
        assert!((arg.d_aux(&all, 0.2, 0.8).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(arg.d_aux(&all, 0.6, 0.8).unwrap(), 0.0);
    }

    #[test]
    fn extraction_breakpoints_only_at_marks() {
        let arg = sample_arg(6, 0.0, 1.0, 1.0, &mut RandomSource::new(1, 0)).unwrap();
        let all = arg.all_leaves();
        let eps = 1e-12;
        for m in arg.marks() {
            let t0 = arg.extract_tree(&all, (m - 2.0 * eps).max(0.0)).unwrap();
            let t1 = arg.extract_tree(&all, (m - eps).max(0.0)).unwrap();
            assert!(t0.same_genealogy(&t1));
            let t2 = arg.extract_tree(&all, m).unwrap();
            assert!(t1.same_genealogy(&t2));
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut r = RandomSource::new(0, 0);
        assert!(sample_arg(3, 1.0, 1.0, 1.0, &mut r).is_err());
        assert!(sample_arg(3, 0.0, 1.0, 0.0, &mut r).is_err());
        assert!(sample_arg(0, 0.0, 1.0, 1.0, &mut r).is_err());
        let arg = sample_arg(3, 0.0, 1.0, 1.0, &mut r).unwrap();
        assert!(arg.extract_tree(&[0, 1], 1.5).is_err());
        assert!(arg.extract_tree(&[], 0.5).is_err());
        assert!(arg.restrict_genome(0.5, 0.5).is_err());
    }

    #[test]
    fn no_recombination_limit() {
        for i in 0..200 {
            let arg = sample_arg(5, 0.0, 1.0, 1e-12, &mut RandomSource::new(2, i)).unwrap();
            assert_eq!(arg.n_splits(), 0);
            let path = arg.tree_path(&arg.all_leaves()).unwrap();
            assert_eq!(path.trees.len(), 1);
        }
    }

    #[test]
    fn first_event_split_probability() {
        let reps = 100_000;
        let splits = (0..reps)
            .filter(|&i| {
                let arg = sample_arg(2, 0.0, 1.0, 1.0, &mut RandomSource::new(3, i as u64)).unwrap();
                matches!(arg.events()[0], ArgEvent::Split { .. })
            })
            .count();
        let (p, se) = proportion_se(splits, reps);
        assert!((p - 2.0 / 3.0).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn logs_are_valid_birth_death_paths() {
        for alg in [ArgAlgorithm::GriffithsMarjoram, ArgAlgorithm::Hudson] {
            for i in 0..300 {
                let arg = sample_arg_with(5, 0.0, 2.0, 0.8, alg, &mut RandomSource::new(4, i)).unwrap();
                arg.validate().unwrap();
                let c = arg.particle_counts();
                assert_eq!(c[0], 5);
                assert_eq!(*c.last().unwrap(), 1);
                assert!(c.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
            }
        }
    }

    #[test]
    fn pair_mrca_is_exponential_at_fixed_locus() {
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps)
            .map(|i| {
                let arg = sample_arg(4, 0.0, 1.0, 1.5, &mut RandomSource::new(5, i)).unwrap();
                arg.extract_tree(&[0, 2], 0.37).unwrap().root_time()
            })
            .collect();
        assert!(ks_exponential(&xs, 1.0).p_value > 0.01);
    }

    #[test]
    fn hudson_and_gm_agree_in_law() {
        let reps = 20_000;
        let collect = |alg: ArgAlgorithm, seed: u64| -> (Vec<f64>, Vec<u64>) {
            let mut heights = Vec::new();
            let mut same = vec![0u64; 2];
            for i in 0..reps {
                let arg = sample_arg_with(4, 0.0, 1.0, 1.0, alg, &mut RandomSource::new(seed, i)).unwrap();
                let t0 = arg.extract_tree(&arg.all_leaves(), 0.0).unwrap();
                let t1 = arg.extract_tree(&arg.all_leaves(), 1.0).unwrap();
                heights.push(t1.root_time());
                same[(t0.mrca_id(0, 1) == t1.mrca_id(0, 1)) as usize] += 1;
            }
            (heights, same)
        };
        let (hg, sg) = collect(ArgAlgorithm::GriffithsMarjoram, 6);
        let (hh, sh) = collect(ArgAlgorithm::Hudson, 7);
        assert!(crate::stats::ks_two_sample(&hg, &hh).p_value > 0.01);
        assert!(chi_square_two_sample(&sg, &sh).p_value > 0.01);
    }

    #[test]
    fn restrict_preserves_extraction_exactly() {
        for i in 0..1000 {
            let mut r = RandomSource::new(8, i);
            let arg = sample_arg(5, 0.0, 1.0, 1.5, &mut r).unwrap();
            let c = r.uniform_in(0.0, 0.5);
            let d = r.uniform_in(0.5, 1.0);
            let res = arg.restrict_genome(c, d).unwrap();
            res.validate().unwrap();
            let u = r.uniform_in(c, d);
            let all = arg.all_leaves();
            let x = arg.extract_tree(&all, u).unwrap();
            let y = res.extract_tree(&all, u).unwrap();
            assert!(x.same_genealogy(&y));
            assert_eq!(x, y);
        }
    }

    #[test]
    fn full_subsample_and_restriction_are_identity() {
        let arg = sample_arg(5, 0.0, 1.0, 1.0, &mut RandomSource::new(9, 0)).unwrap();
        assert_eq!(arg.subsample(&arg.all_leaves()).unwrap().events(), arg.events());
        assert_eq!(arg.restrict_genome(0.0, 1.0).unwrap().events(), arg.events());
    }

    #[test]
    fn subsample_keeps_ids_and_trees() {
        for i in 0..300 {
            let arg = sample_arg(6, 0.0, 1.0, 1.0, &mut RandomSource::new(10, i)).unwrap();
            let set = [1, 4, 5];
            let sub = arg.subsample(&set).unwrap();
            sub.validate().unwrap();
            for u in [0.0, 0.33, 0.9, 1.0] {
                let x = arg.extract_tree(&set, u).unwrap();
                let y = sub.extract_tree(&sub.all_leaves(), u).unwrap();
                assert!(x.same_genealogy(&y));
            }
        }
    }

    #[test]
    fn subsample_first_event_rates() {
        let reps = 100_000;
        let splits = (0..reps)
            .filter(|&i| {
                let arg = sample_arg(6, 0.0, 1.0, 0.5, &mut RandomSource::new(11, i as u64)).unwrap();
                let sub = arg.subsample(&[2, 5]).unwrap();
                matches!(sub.events()[0], ArgEvent::Split { .. })
            })
            .count();
        let (p, se) = proportion_se(splits, reps);
        assert!((p - 0.5).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn distinct_trees_bounded_by_splits_plus_one() {
        for i in 0..2000 {
            let arg = sample_arg(4, 0.0, 1.0, 1.0, &mut RandomSource::new(12, i)).unwrap();
            let (r, count) = arg.distinct_tree_count();
            assert!(count >= 1 && count <= r + 1);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let arg = sample_arg(4, 0.0, 1.0, 1.0, &mut RandomSource::new(13, 0)).unwrap();
        let text = arg.to_jsonl();
        assert!(text.lines().next().unwrap().starts_with("{\"n\":4,\"a\":0.0,\"b\":1.0,\"rho\":1.0,\"seed\":13"));
        let back = ArgEventLog::from_jsonl(&text).unwrap();
        assert_eq!(back, arg);
        assert!(ArgEventLog::from_jsonl("{\"n\":2,\"a\":0,\"b\":1,\"rho\":1,\"seed\":null}\n").is_err());
    }

    #[test]
    fn tree_path_matches_extraction_and_window() {
        let arg = sample_arg(5, 0.0, 1.0, 2.0, &mut RandomSource::new(14, 0)).unwrap();
        let all = arg.all_leaves();
        let path = arg.tree_path(&all).unwrap();
        let mut r = RandomSource::new(14, 1);
        for _ in 0..200 {
            let u = r.uniform();
            assert!(path.tree_at(u).same_genealogy(&arg.extract_tree(&all, u).unwrap()));
        }
        let w = path.window(0.25, 0.75).unwrap();
        for _ in 0..200 {
            let u = r.uniform_in(0.25, 0.75);
            assert!(w.tree_at(u).same_genealogy(path.tree_at(u)));
        }
        let back = TreePath::from_json(&path.to_json()).unwrap();
        assert_eq!(back.breakpoints, path.breakpoints);
    }

    #[test]
    fn split_count_mean_matches_direct_sampling_after_restriction() {
        let reps = 20_000;
        let restricted: Vec<f64> = (0..reps)
            .map(|i| {
                let arg = sample_arg(3, 0.0, 1.0, 1.0, &mut RandomSource::new(15, i)).unwrap();
                arg.restrict_genome(0.2, 0.6).unwrap().n_splits() as f64
            })
            .collect();
        let direct: Vec<f64> = (0..reps)
            .map(|i| sample_arg(3, 0.2, 0.6, 1.0, &mut RandomSource::new(16, i)).unwrap().n_splits() as f64)
            .collect();
        let (m1, s1) = mean_se(&restricted);
        let (m2, s2) = mean_se(&direct);
        assert!((m1 - m2).abs() < 3.0 * (s1 * s1 + s2 * s2).sqrt(), "{m1} vs {m2}");
    }
}
