//! Two-locus genealogies as a process on single and double lines, the
//! auxiliary graph that decouples double lines, and a coupling of the two.
//!
//! A line carries ancestry at locus 0, at locus u, or at both (a double
//! line). In the real two-locus ARG every pair of lines coalesces at rate 1
//! and a double splits into one line per locus at rate ρu; two doubles
//! coalescing merge both trees at once. The auxiliary graph replaces that
//! joint coalescence by a rate-2 event (iv) that merges the two lines on one
//! side only (fair coin) and leaves the other side's lines separate, which
//! makes the two trees independent n-coalescents.

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::tree::{Merge, NodeId, UltrametricTree};

#[derive(Clone, Copy, Debug, PartialEq)]
struct Line {
    zero: Option<usize>,
    u: Option<usize>,
}

impl Line {
    fn is_double(&self) -> bool {
        self.zero.is_some() && self.u.is_some()
    }
}

#[derive(Clone, Debug)]
struct Builder {
    leaves: Vec<String>,
    merges: Vec<Merge>,
}

impl Builder {
    fn merge(&mut self, time: f64, x: usize, y: usize, id: NodeId) -> usize {
        self.merges.push(Merge { time, children: [x, y], id });
        self.leaves.len() + self.merges.len() - 1
    }

    fn finish(self) -> UltrametricTree {
        UltrametricTree::from_merges(self.leaves, self.merges).expect("complete two-locus tree")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Aux,
    Real,
    /// Stop at the first ring of a double-pair clock.
    Coupled,
}

/// Line counts and tree builders of the two-locus process.
#[derive(Clone, Debug)]
pub struct AuxState {
    lines: Vec<Line>,
    tree_0: Builder,
    tree_u: Builder,
    next_id: u64,
    time: f64,
    first_iv: Option<f64>,
}

impl AuxState {
    /// `singles_0` lines at locus 0 only, `doubles` at both, `singles_u` at
    /// locus u only. Labels run `1..` in that order; doubles appear as leaves
    /// of both trees.
    pub fn new(singles_0: usize, doubles: usize, singles_u: usize) -> Result<Self> {
        if singles_0 + doubles == 0 || doubles + singles_u == 0 {
            return Err(Error::invalid("each locus needs at least one line"));
        }
        let label = |i: usize| (i + 1).to_string();
        let n0 = singles_0 + doubles;
        let mut lines = Vec::new();
        for i in 0..singles_0 {
            lines.push(Line { zero: Some(i), u: None });
        }
        for k in 0..doubles {
            lines.push(Line { zero: Some(singles_0 + k), u: Some(k) });
        }
        for k in 0..singles_u {
            lines.push(Line { zero: None, u: Some(doubles + k) });
        }
        Ok(Self {
            lines,
            tree_0: Builder { leaves: (0..n0).map(label).collect(), merges: Vec::new() },
            tree_u: Builder {
                leaves: (singles_0..singles_0 + doubles + singles_u).map(label).collect(),
                merges: Vec::new(),
            },
            next_id: 0,
            time: 0.0,
            first_iv: None,
        })
    }

    /// `(singles_0, doubles, singles_u)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for l in &self.lines {
            match (l.zero.is_some(), l.u.is_some()) {
                (true, true) => c.1 += 1,
                (true, false) => c.0 += 1,
                _ => c.2 += 1,
            }
        }
        c
    }

    fn done(&self) -> bool {
        let (a, b, c) = self.counts();
        a + b <= 1 && b + c <= 1
    }

    fn fresh_id(&mut self) -> NodeId {
        self.next_id += 1;
        NodeId(self.next_id - 1)
    }

    /// Runs until both trees are complete or, in coupled mode, until the
    /// first ring of a double-pair clock (returns `true` then).
    fn run(&mut self, mode: Mode, rho_u: f64, rng: &mut RandomSource) -> bool {
        while !self.done() {
            let (a, b, c) = self.counts();
            let s = a + c;
            let r_ss = (s * s.saturating_sub(1)) as f64 / 2.0;
            let r_sd = (s * b) as f64;
            let r_split = rho_u * b as f64;
            let pairs_dd = (b * b.saturating_sub(1)) as f64 / 2.0;
            let r_dd = if mode == Mode::Real { pairs_dd } else { 2.0 * pairs_dd };
            let total = r_ss + r_sd + r_split + r_dd;
            self.time += rng.exponential(total);
            let x = rng.uniform() * total;
            if x < r_ss {
                self.singles_pair(rng);
            } else if x < r_ss + r_sd {
                self.single_double(rng);
            } else if x < r_ss + r_sd + r_split {
                self.split_double(rng);
            } else {
                match mode {
                    Mode::Coupled => return true,
                    Mode::Aux => {
                        let heads = rng.bernoulli(0.5);
                        let (i, j) = self.double_pair(rng);
                        self.decouple(i, j, heads);
                    }
                    Mode::Real => {
                        let (i, j) = self.double_pair(rng);
                        self.joint(i, j);
                    }
                }
            }
        }
        false
    }

    fn indices(&self, pred: impl Fn(&Line) -> bool) -> Vec<usize> {
        (0..self.lines.len()).filter(|&i| pred(&self.lines[i])).collect()
    }

    fn singles_pair(&mut self, rng: &mut RandomSource) {
        let singles = self.indices(|l| !l.is_double());
        let (p, q) = rng.distinct_pair(singles.len());
        let (i, j) = (singles[p], singles[q]);
        let (li, lj) = (self.lines[i], self.lines[j]);
        let t = self.time;
        let merged = match (li.zero, lj.zero, li.u, lj.u) {
            (Some(x), Some(y), _, _) => {
                let id = self.fresh_id();
                Line { zero: Some(self.tree_0.merge(t, x, y, id)), u: None }
            }
            (_, _, Some(x), Some(y)) => {
                let id = self.fresh_id();
                Line { zero: None, u: Some(self.tree_u.merge(t, x, y, id)) }
            }
            _ => Line { zero: li.zero.or(lj.zero), u: li.u.or(lj.u) },
        };
        self.lines[i] = merged;
        self.lines.swap_remove(j);
    }

    fn single_double(&mut self, rng: &mut RandomSource) {
        let singles = self.indices(|l| !l.is_double());
        let doubles = self.indices(|l| l.is_double());
        let i = singles[rng.index(singles.len())];
        let d = doubles[rng.index(doubles.len())];
        let (s, dl) = (self.lines[i], self.lines[d]);
        let t = self.time;
        let id = self.fresh_id();
        if let Some(x) = s.zero {
            let node = self.tree_0.merge(t, x, dl.zero.unwrap(), id);
            self.lines[d].zero = Some(node);
        } else {
            let node = self.tree_u.merge(t, s.u.unwrap(), dl.u.unwrap(), id);
            self.lines[d].u = Some(node);
        }
        self.lines.swap_remove(i);
    }

    fn split_double(&mut self, rng: &mut RandomSource) {
        let doubles = self.indices(|l| l.is_double());
        let d = doubles[rng.index(doubles.len())];
        let l = self.lines[d];
        self.lines[d] = Line { zero: l.zero, u: None };
        self.lines.push(Line { zero: None, u: l.u });
    }

    fn double_pair(&self, rng: &mut RandomSource) -> (usize, usize) {
        let doubles = self.indices(|l| l.is_double());
        let (p, q) = rng.distinct_pair(doubles.len());
        (doubles[p], doubles[q])
    }

    /// Event (iv): merge one side, leave the other side's lines apart.
    fn decouple(&mut self, i: usize, j: usize, side_zero: bool) {
        let (li, lj) = (self.lines[i], self.lines[j]);
        let t = self.time;
        let id = self.fresh_id();
        if side_zero {
            let node = self.tree_0.merge(t, li.zero.unwrap(), lj.zero.unwrap(), id);
            self.lines[i] = Line { zero: Some(node), u: li.u };
            self.lines[j] = Line { zero: None, u: lj.u };
        } else {
            let node = self.tree_u.merge(t, li.u.unwrap(), lj.u.unwrap(), id);
            self.lines[i] = Line { zero: li.zero, u: Some(node) };
            self.lines[j] = Line { zero: lj.zero, u: None };
        }
        self.first_iv.get_or_insert(t);
    }

    /// Joint coalescence of two doubles: both trees merge at one node.
    fn joint(&mut self, i: usize, j: usize) {
        let (li, lj) = (self.lines[i], self.lines[j]);
        let t = self.time;
        let id = self.fresh_id();
        let z = self.tree_0.merge(t, li.zero.unwrap(), lj.zero.unwrap(), id);
        let w = self.tree_u.merge(t, li.u.unwrap(), lj.u.unwrap(), id);
        self.lines[i] = Line { zero: Some(z), u: Some(w) };
        self.lines.swap_remove(j);
    }

    fn into_result(self) -> AuxGraphResult {
        AuxGraphResult {
            event_iv_occurred: self.first_iv.is_some(),
            first_event_iv_time: self.first_iv,
            tree_0: self.tree_0.finish(),
            tree_u: self.tree_u.finish(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxGraphResult {
    pub tree_0: UltrametricTree,
    pub tree_u: UltrametricTree,
    pub event_iv_occurred: bool,
    pub first_event_iv_time: Option<f64>,
}

fn check_rho(rho_u: f64) -> Result<()> {
    if !(rho_u >= 0.0) || !rho_u.is_finite() {
        return Err(Error::invalid("rho_u must be finite and non-negative"));
    }
    Ok(())
}

/// Runs the auxiliary graph from the given line counts until both trees are
/// complete.
pub fn sample_aux_graph(
    singles_0: usize,
    doubles: usize,
    singles_u: usize,
    rho_u: f64,
    rng: &mut RandomSource,
) -> Result<AuxGraphResult> {
    check_rho(rho_u)?;
    let mut s = AuxState::new(singles_0, doubles, singles_u)?;
    s.run(Mode::Aux, rho_u, rng);
    Ok(s.into_result())
}

/// Runs the real two-locus process (`n` lines per locus, started apart).
pub fn sample_two_locus(n: usize, rho_u: f64, rng: &mut RandomSource) -> Result<(UltrametricTree, UltrametricTree)> {
    check_rho(rho_u)?;
    let mut s = AuxState::new(n, 0, n)?;
    s.run(Mode::Real, rho_u, rng);
    let r = s.into_result();
    Ok((r.tree_0, r.tree_u))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPair {
    /// Trees of the real two-locus process at loci 0 and u.
    pub real: (UltrametricTree, UltrametricTree),
    pub aux: AuxGraphResult,
}

/// Couples the real process with the auxiliary graph from `(n, 0, n)`.
///
/// Every double pair carries a rate-2 clock. Until it first rings both
/// processes make the same moves. At the ring a fair coin is tossed: the
/// auxiliary graph performs event (iv) on the side the coin names, and the
/// real process coalesces the pair jointly on heads and does nothing on
/// tails. From then on the two evolve separately under their own rates.
pub fn sample_coupled_pair(n: usize, rho_u: f64, rng: &mut RandomSource) -> Result<CoupledPair> {
    check_rho(rho_u)?;
    let mut s = AuxState::new(n, 0, n)?;
    if !s.run(Mode::Coupled, rho_u, rng) {
        let r = s.into_result();
        return Ok(CoupledPair {
            real: (r.tree_0.clone(), r.tree_u.clone()),
            aux: r,
        });
    }
    let heads = rng.bernoulli(0.5);
    let (i, j) = s.double_pair(rng);
    let mut aux = s.clone();
    aux.decouple(i, j, heads);
    let mut real = s;
    if heads {
        real.joint(i, j);
    }
    real.run(Mode::Real, rho_u, rng);
    aux.run(Mode::Aux, rho_u, rng);
    let real = real.into_result();
    Ok(CoupledPair {
        real: (real.tree_0, real.tree_u),
        aux: aux.into_result(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{prob_aux_event, prob_equal_cross_pair};
    use crate::stats::{ks_exponential, pearson_correlation, proportion_se};

    #[test]
    fn invalid_counts() {
        let mut r = RandomSource::new(0, 0);
        assert!(sample_aux_graph(0, 0, 2, 1.0, &mut r).is_err());
        assert!(sample_aux_graph(2, 0, 0, 1.0, &mut r).is_err());
        assert!(sample_aux_graph(2, 0, 2, -1.0, &mut r).is_err());
    }

    #[test]
    fn single_leaves_have_no_events() {
        let mut r = RandomSource::new(0, 0);
        let p = sample_coupled_pair(1, 0.0, &mut r).unwrap();
        assert_eq!(p.real.0.n_leaves(), 1);
        assert!(p.real.0.merges().is_empty() && p.real.1.merges().is_empty());
        assert!(!p.aux.event_iv_occurred);
    }

    #[test]
    fn two_doubles_without_recombination_always_decouple() {
        for i in 0..1000 {
            let res = sample_aux_graph(0, 2, 0, 0.0, &mut RandomSource::new(60, i)).unwrap();
            assert!(res.event_iv_occurred);
        }
    }

    #[test]
    fn event_iv_probability_matches_closed_form() {
        let reps = 100_000;
        for (k, ru) in [0.0, 1.0, 5.0].into_iter().enumerate() {
            let hits = (0..reps)
                .filter(|&i| {
                    sample_aux_graph(2, 0, 2, ru, &mut RandomSource::new(61 + k as u64, i as u64))
                        .unwrap()
                        .event_iv_occurred
                })
                .count();
            let (p, se) = proportion_se(hits, reps);
            let target = prob_aux_event(ru).unwrap();
            assert!((p - target).abs() < 3.0 * se, "ρu={ru}: {p} vs {target}");
        }
    }

    #[test]
    fn aux_marginals_are_kingman() {
        let reps = 10_000;
        let results: Vec<_> = (0..reps)
            .map(|i| sample_aux_graph(3, 0, 3, 1.0, &mut RandomSource::new(64, i)).unwrap())
            .collect();
        for (lvl, k) in [3usize, 2].into_iter().enumerate() {
            let rate = (k * (k - 1)) as f64 / 2.0;
            let x0: Vec<f64> = results.iter().map(|r| r.tree_0.level_times()[lvl]).collect();
            let xu: Vec<f64> = results.iter().map(|r| r.tree_u.level_times()[lvl]).collect();
            assert!(ks_exponential(&x0, rate).p_value > 0.01);
            assert!(ks_exponential(&xu, rate).p_value > 0.01);
        }
        let h0: Vec<f64> = results.iter().map(|r| r.tree_0.root_time()).collect();
        let hu: Vec<f64> = results.iter().map(|r| r.tree_u.root_time()).collect();
        assert!(pearson_correlation(&h0, &hu).abs() <= 3.0 / (reps as f64).sqrt());
    }

    #[test]
    fn ring_free_runs_are_identical() {
        let mut free = 0;
        for i in 0..10_000 {
            let p = sample_coupled_pair(3, 2.0, &mut RandomSource::new(65, i)).unwrap();
            if !p.aux.event_iv_occurred {
                free += 1;
                assert_eq!(p.real.0, p.aux.tree_0);
                assert_eq!(p.real.1, p.aux.tree_u);
            }
        }
        assert!(free > 1000);
    }

    #[test]
    fn real_pair_cross_statistic() {
        let reps = 100_000;
        let rv = 1.0;
        let hits = (0..reps)
            .filter(|&i| {
                let p = sample_coupled_pair(2, rv, &mut RandomSource::new(66, i as u64)).unwrap();
                p.real.0.mrca_id(0, 1) == p.real.1.mrca_id(0, 1)
            })
            .count();
        let (p, se) = proportion_se(hits, reps);
        let target = prob_equal_cross_pair(rv).unwrap();
        assert!((p - target).abs() < 3.0 * se, "{p} vs {target}");
    }
}
