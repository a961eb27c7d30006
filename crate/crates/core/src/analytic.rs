//! Closed-form two-locus probabilities and the bounds checked by the
//! experiments.
//!
//! Two routes give the same numbers on purpose: [`solve_first_event_system`]
//! eliminates the first-event linear system from its coefficients, while
//! [`prob_equal_cross_pair`] evaluates the final rational formula.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemVariant {
    /// The two-locus ARG: two double lines coalesce jointly at rate 1.
    Arg,
    /// The auxiliary graph: a pair of double lines decouples at rate 2.
    Aux,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstEventSystem {
    pub variant: SystemVariant,
    /// `ρ` times the distance between the two loci.
    pub rho_distance: f64,
}

/// Probabilities that the tracked pairs share a node (or, for the auxiliary
/// graph, that a decoupling event happens) from the states with four single
/// lines (`x`), one double and one single per side (`y`), and two doubles
/// (`z`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstEventSolution {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Solves
///
/// ```text
/// x = (2/3) y
/// y = r/(r+3) x + 1/(r+3) z
/// z = c_y y + c_1
/// ```
///
/// with `(c_y, c_1) = (2r/(2r+1), 1/(2r+1))` for the ARG and
/// `(2r/(2r+2), 2/(2r+2))` for the auxiliary graph, by substitution.
pub fn solve_first_event_system(sys: FirstEventSystem) -> Result<FirstEventSolution> {
    let r = sys.rho_distance;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid("rho_distance must be finite and non-negative"));
    }
    let (c_y, c_1) = match sys.variant {
        SystemVariant::Arg => (2.0 * r / (2.0 * r + 1.0), 1.0 / (2.0 * r + 1.0)),
        SystemVariant::Aux => (2.0 * r / (2.0 * r + 2.0), 2.0 / (2.0 * r + 2.0)),
    };
    // (r + 3) y = r (2/3) y + c_y y + c_1
    let y = c_1 / (r + 3.0 - 2.0 * r / 3.0 - c_y);
    let x = 2.0 * y / 3.0;
    let z = c_y * y + c_1;
    Ok(FirstEventSolution { x, y, z })
}

fn check_nonneg(v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("argument {v} must be finite and non-negative")));
    }
    Ok(())
}

/// `P(R_{12,0} = R_{34,v}) = 2 / (9 + 13ρv + 2ρ²v²)`.
pub fn prob_equal_cross_pair(rho_v: f64) -> Result<f64> {
    check_nonneg(rho_v)?;
    Ok(2.0 / (9.0 + 13.0 * rho_v + 2.0 * rho_v * rho_v))
}

/// `P(R_{12,0} = R_{12,v}) = (ρv + 9) / (2ρ²v² + 13ρv + 9)`.
pub fn prob_equal_same_pair(rho_v: f64) -> Result<f64> {
    check_nonneg(rho_v)?;
    Ok((rho_v + 9.0) / (2.0 * rho_v * rho_v + 13.0 * rho_v + 9.0))
}

/// `P(some decoupling event)` from two single lines per side:
/// `2 / (9 + 7ρu + ρ²u²)`.
pub fn prob_aux_event(rho_u: f64) -> Result<f64> {
    check_nonneg(rho_u)?;
    Ok(2.0 / (9.0 + 7.0 * rho_u + rho_u * rho_u))
}

/// A bound returned unclamped, flagged when it exceeds the trivial bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub trivial: f64,
    pub vacuous: bool,
}

impl Bound {
    fn new(value: f64, trivial: f64) -> Self {
        Self {
            value,
            trivial,
            vacuous: value > trivial,
        }
    }
}

fn binom2(n: usize) -> f64 {
    (n * (n - 1)) as f64 / 2.0
}

/// Union bound over cross pairs: `C(n,2)² · 2/(9 + 13ρv + 2ρ²v²)`.
pub fn cross_pair_union_bound(n: usize, rho_v: f64) -> Result<Bound> {
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    let p = prob_equal_cross_pair(rho_v)?;
    Ok(Bound::new(binom2(n).powi(2) * p, 1.0))
}

/// Union bound on the probability of some decoupling event from `n` single
/// lines per side: `C(n,2)² · 2/(9 + 7ρu + ρ²u²)`.
pub fn aux_union_bound(n: usize, rho_u: f64) -> Result<Bound> {
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    Ok(Bound::new(binom2(n).powi(2) * prob_aux_event(rho_u)?, 1.0))
}

/// Covariance bound for degree-`n` polynomials with unit sup norms:
/// `2n⁴ / (9 + 7ρu + ρ²u²)`. The trivial bound is 2.
pub fn mixing_bound(n: usize, rho_u: f64) -> Result<Bound> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    check_nonneg(rho_u)?;
    let n4 = (n as f64).powi(4);
    Ok(Bound::new(
        2.0 * n4 / (9.0 + 7.0 * rho_u + rho_u * rho_u),
        2.0,
    ))
}

/// Exact `E[(Σ_{k=2}^N S_k)²]` for independent `S_k ~ Exp(k(k-1)/2)`.
pub fn height_second_moment(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("N must be at least 2"));
    }
    let (mut mean, mut var) = (0.0, 0.0);
    for k in 2..=n {
        let m = 2.0 / (k * (k - 1)) as f64;
        mean += m;
        var += m * m;
    }
    Ok(mean * mean + var)
}

/// The `N → ∞` limit `4 + 4(π²/3 − 3)`.
pub fn height_second_moment_limit() -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    4.0 + 4.0 * (pi2 / 3.0 - 3.0)
}

/// The cruder bound `8(π²/3 − 3) + 8`.
pub fn height_second_moment_crude_bound() -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    8.0 * (pi2 / 3.0 - 3.0) + 8.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TightnessRhs {
    /// `ρ² h² E[H²]`.
    pub corrected: f64,
    /// `11 ρ h²`, the form with a single power of ρ.
    pub printed: f64,
}

/// Right-hand side of the tightness product bound. `n = None` uses the
/// infinite-sample second moment.
pub fn tightness_rhs(rho: f64, h: f64, n: Option<usize>) -> Result<TightnessRhs> {
    if !(rho > 0.0) || !(h > 0.0) {
        return Err(Error::invalid("rho and h must be positive"));
    }
    let m2 = match n {
        Some(n) => height_second_moment(n)?,
        None => height_second_moment_limit(),
    };
    Ok(TightnessRhs {
        corrected: rho * rho * h * h * m2,
        printed: 11.0 * rho * h * h,
    })
}
