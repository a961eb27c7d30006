//! Polynomial functionals `Φ(x) = E[φ(R)]`, where `R` is the distance
//! matrix of an i.i.d. sample of `degree` points drawn from the space's
//! measure.

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::tree::FiniteMmSpace;

const EXACT_TUPLE_LIMIT: f64 = 1e8;

/// Closed kernel library. Every built-in kernel takes values in `[0, 1]`
/// on non-negative distances.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// `1{r_ij <= t}`.
    Threshold { i: usize, j: usize, t: f64 },
    /// `exp(-Σ λ_ij r_ij)` with `λ_ij >= 0`.
    Exponential { weights: Vec<(usize, usize, f64)> },
    Product(Vec<Kernel>),
}

impl Kernel {
    pub fn eval(&self, r: &impl Fn(usize, usize) -> f64) -> f64 {
        match self {
            Kernel::Threshold { i, j, t } => {
                if r(*i, *j) <= *t {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Exponential { weights } => {
                (-weights.iter().map(|&(i, j, l)| l * r(i, j)).sum::<f64>()).exp()
            }
            Kernel::Product(ks) => ks.iter().map(|k| k.eval(r)).product(),
        }
    }

    fn validate(&self, degree: usize) -> Result<()> {
        match self {
            Kernel::Threshold { i, j, t } => {
                if *i >= degree || *j >= degree || t.is_nan() {
                    return Err(Error::invalid("threshold kernel index out of range"));
                }
            }
            Kernel::Exponential { weights } => {
                for &(i, j, l) in weights {
                    if i >= degree || j >= degree || !(l >= 0.0) || !l.is_finite() {
                        return Err(Error::invalid(
                            "exponential kernel needs in-range indices and finite λ >= 0",
                        ));
                    }
                }
            }
            Kernel::Product(ks) => {
                for k in ks {
                    k.validate(degree)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialDescriptor {
    degree: usize,
    kernel: Kernel,
    sup_norm_bound: f64,
}

impl PolynomialDescriptor {
    pub fn new(degree: usize, kernel: Kernel) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("degree must be positive"));
        }
        kernel.validate(degree)?;
        Ok(Self {
            degree,
            kernel,
            sup_norm_bound: 1.0,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.sup_norm_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Weighted average over all ordered tuples (with repetition).
    Exact,
    /// Average over tuples of pairwise distinct points, weighted by the
    /// product measure conditioned on distinctness.
    ExactDistinct,
    MonteCarlo { reps: usize },
}

pub fn evaluate_polynomial(
    space: &FiniteMmSpace,
    poly: &PolynomialDescriptor,
    mode: EvalMode,
    rng: &mut RandomSource,
) -> Result<f64> {
    let size = space.size();
    let n = poly.degree;
    let d = space.distances();
    let w = space.weights();
    match mode {
        EvalMode::Exact => {
            if (size as f64).powi(n as i32) > EXACT_TUPLE_LIMIT {
                return Err(Error::ResourceLimit(format!(
                    "{size}^{n} tuples exceed the exact limit; use monte-carlo mode"
                )));
            }
            Ok(enumerate(size, n, false, |idx| {
                let weight: f64 = idx.iter().map(|&i| w[i]).product();
                (weight, poly.kernel.eval(&|a, b| d.get(idx[a], idx[b])))
            }))
        }
        EvalMode::ExactDistinct => {
            if n > size {
                return Err(Error::invalid("degree exceeds space size"));
            }
            let count: f64 = (0..n).map(|k| (size - k) as f64).product();
            if count > EXACT_TUPLE_LIMIT {
                return Err(Error::ResourceLimit(format!(
                    "{count} distinct tuples exceed the exact limit; use monte-carlo mode"
                )));
            }
            Ok(enumerate(size, n, true, |idx| {
                let weight: f64 = idx.iter().map(|&i| w[i]).product();
                (weight, poly.kernel.eval(&|a, b| d.get(idx[a], idx[b])))
            }))
        }
        EvalMode::MonteCarlo { reps } => {
            if reps == 0 {
                return Err(Error::invalid("reps must be positive"));
            }
            let mut idx = vec![0usize; n];
            let mut acc = 0.0;
            for _ in 0..reps {
                for x in idx.iter_mut() {
                    *x = rng.weighted_index(w);
                }
                acc += poly.kernel.eval(&|a, b| d.get(idx[a], idx[b]));
            }
            Ok(acc / reps as f64)
        }
    }
}

/// Weighted mean of `f` over all ordered tuples of length `n` from
/// `0..size`, optionally restricted to injective tuples.
fn enumerate(size: usize, n: usize, distinct: bool, f: impl Fn(&[usize]) -> (f64, f64)) -> f64 {
    let mut idx = vec![0usize; n];
    let (mut num, mut den) = (0.0, 0.0);
    loop {
        let ok = !distinct || {
            let mut seen = true;
            'outer: for a in 0..n {
                for b in (a + 1)..n {
                    if idx[a] == idx[b] {
                        seen = false;
                        break 'outer;
                    }
                }
            }
            seen
        };
        if ok {
            let (w, v) = f(&idx);
            num += w * v;
            den += w;
        }
        // odometer increment
        let mut k = n;
        loop {
            if k == 0 {
                return num / den;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < size {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kingman::sample_kingman;
    use crate::tree::{default_labels, DistanceMatrix};

    fn exp_kernel(lambda: f64) -> PolynomialDescriptor {
        PolynomialDescriptor::new(2, Kernel::Exponential { weights: vec![(0, 1, lambda)] }).unwrap()
    }

    fn two_leaf_space(t: f64) -> FiniteMmSpace {
        let d = DistanceMatrix::new(2, vec![0.0, 2.0 * t, 2.0 * t, 0.0]).unwrap();
        FiniteMmSpace::uniform(default_labels(2), d).unwrap()
    }

    #[test]
    fn two_leaf_exact_and_distinct() {
        let (lambda, t) = (0.7, 0.4);
        let s = two_leaf_space(t);
        let mut r = RandomSource::new(0, 0);
        let e = evaluate_polynomial(&s, &exp_kernel(lambda), EvalMode::Exact, &mut r).unwrap();
        assert!((e - (1.0 + (-2.0 * lambda * t).exp()) / 2.0).abs() < 1e-15);
        let ed = evaluate_polynomial(&s, &exp_kernel(lambda), EvalMode::ExactDistinct, &mut r).unwrap();
        assert!((ed - (-2.0 * lambda * t).exp()).abs() < 1e-15);
    }

    #[test]
    fn exact_limit_is_enforced() {
        let n = 101;
        let d = DistanceMatrix::from_fn(n, |_, _| 1.0).unwrap();
        let s = FiniteMmSpace::uniform(default_labels(n), d).unwrap();
        let p = PolynomialDescriptor::new(4, Kernel::Threshold { i: 0, j: 1, t: 0.5 }).unwrap();
        let mut r = RandomSource::new(0, 0);
        assert!(matches!(
            evaluate_polynomial(&s, &p, EvalMode::Exact, &mut r),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn invalid_kernels_rejected() {
        assert!(PolynomialDescriptor::new(2, Kernel::Threshold { i: 0, j: 2, t: 1.0 }).is_err());
        assert!(PolynomialDescriptor::new(
            2,
            Kernel::Exponential { weights: vec![(0, 1, -1.0)] }
        )
        .is_err());
        assert!(PolynomialDescriptor::new(0, Kernel::Product(vec![])).is_err());
    }

    #[test]
    fn distinct_pair_expectation_over_kingman() {
        let lambda = 0.5;
        let reps = 100_000;
        let p = exp_kernel(lambda);
        let xs: Vec<f64> = (0..reps)
            .map(|i| {
                let mut r = RandomSource::new(31, i);
                let t = sample_kingman(5, &mut r).unwrap();
                evaluate_polynomial(&t.to_mm_space(), &p, EvalMode::ExactDistinct, &mut r).unwrap()
            })
            .collect();
        let (m, se) = crate::stats::mean_se(&xs);
        let target = 1.0 / (1.0 + 2.0 * lambda);
        assert!((m - target).abs() < 3.0 * se, "{m} vs {target} (se {se})");
    }

    #[test]
    fn exact_vs_monte_carlo_on_random_instances() {
        let reps = 4000;
        for i in 0..100 {
            let mut r = RandomSource::new(32, i);
            let n = 2 + r.index(5);
            let space = sample_kingman(n, &mut r).unwrap().to_mm_space();
            let degree = 2 + r.index(2);
            let kernel = if r.bernoulli(0.5) {
                Kernel::Threshold { i: 0, j: degree - 1, t: r.uniform_in(0.0, 3.0) }
            } else {
                Kernel::Product(vec![
                    Kernel::Exponential { weights: vec![(0, 1, r.uniform())] },
                    Kernel::Threshold { i: 1, j: degree - 1, t: r.uniform_in(0.0, 3.0) },
                ])
            };
            let p = PolynomialDescriptor::new(degree, kernel).unwrap();
            let exact = evaluate_polynomial(&space, &p, EvalMode::Exact, &mut r).unwrap();
            let mc = evaluate_polynomial(&space, &p, EvalMode::MonteCarlo { reps }, &mut r).unwrap();
            assert!(
                (exact - mc).abs() <= 4.0 / (reps as f64).sqrt() * p.sup_norm_bound(),
                "instance {i}: exact {exact} mc {mc}"
            );
            assert!(exact.abs() <= p.sup_norm_bound());
        }
    }

    #[test]
    fn distinct_gap_shrinks_with_size() {
        let p = PolynomialDescriptor::new(2, Kernel::Threshold { i: 0, j: 1, t: 0.3 }).unwrap();
        let mut prev = f64::INFINITY;
        for (k, size) in [10usize, 100, 1000].into_iter().enumerate() {
            let mut r = RandomSource::new(33, k as u64);
            let space = sample_kingman(size, &mut r).unwrap().to_mm_space();
            let e = evaluate_polynomial(&space, &p, EvalMode::Exact, &mut r).unwrap();
            let ed = evaluate_polynomial(&space, &p, EvalMode::ExactDistinct, &mut r).unwrap();
            let miss = 1.0 - (size as f64 - 1.0) / size as f64;
            let gap = (e - ed).abs();
            assert!(gap <= p.sup_norm_bound() * miss + 1e-12);
            assert!(gap < prev || gap == 0.0);
            prev = gap;
        }
    }

    #[test]
    fn submatrix_sampling_atoms() {
        let space = two_leaf_space(1.0);
        let reps = 100_000;
        let mut r = RandomSource::new(34, 0);
        let zeros = (0..reps)
            .filter(|_| space.sample_distance_submatrix(2, &mut r).unwrap().get(0, 1) == 0.0)
            .count();
        let (p, se) = crate::stats::proportion_se(zeros, reps);
        assert!((p - 0.5).abs() < 3.0 * se.max(1e-3));
        let one = space.sample_distance_submatrix(1, &mut r).unwrap();
        assert_eq!(one.entries(), &[0.0]);
    }

    #[test]
    fn distinct_submatrix_is_exponential() {
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps)
            .map(|i| {
                let mut r = RandomSource::new(35, i);
                let t = sample_kingman(6, &mut r).unwrap();
                t.to_mm_space().sample_distinct_submatrix(2, &mut r).unwrap().get(0, 1) / 2.0
            })
            .collect();
        assert!(crate::stats::ks_exponential(&xs, 1.0).p_value > 0.01);
    }
}
