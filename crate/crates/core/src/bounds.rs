//! Analytic bounding functions for UDD under pure dephasing.
//!
//! With `eps = J0 T` and `eta = Jz / J0`, the odd part of the bounding series
//! is `S_-(eta, eps) = exp(eps) sinh(eps eta) = sum_l p_l(eta) eps^l`, and the
//! UDD(N) residual is the tail `Delta_N = sum_{n > N} p_n(eta) eps^n`, which
//! bounds `||B_-(T)||`.
//!
//! `Delta_N` is evaluated from the closed form `S_- - sum_{n <= N} p_n eps^n`
//! while that subtraction keeps enough digits, and from the (all-positive)
//! tail series otherwise. Quantities that can exceed the `f64` range are
//! carried in log space.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::q_factor;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("parameters must be finite and non-negative: {0}")]
    InvalidParameter(String),
    #[error("value exceeds the representable range (log value {ln_value})")]
    Overflow { ln_value: f64 },
}

/// Dimensionless inputs `(N, eta, eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n_pulses: usize,
    pub eta: f64,
    pub epsilon: f64,
}

impl BoundParams {
    pub fn new(n_pulses: usize, eta: f64, epsilon: f64) -> Result<Self, BoundError> {
        let p = BoundParams {
            n_pulses,
            eta,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        check_non_negative("eta", self.eta)?;
        check_non_negative("epsilon", self.epsilon)
    }
}

/// Fixed-minimum-interval inputs `(N, eta, eps1 = J0 t1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedIntervalParams {
    pub n_pulses: usize,
    pub eta: f64,
    pub epsilon1: f64,
}

impl FixedIntervalParams {
    pub fn new(n_pulses: usize, eta: f64, epsilon1: f64) -> Result<Self, BoundError> {
        if n_pulses == 0 {
            return Err(BoundError::InvalidParameter(
                "fixed-interval bound needs at least one pulse".into(),
            ));
        }
        check_non_negative("eta", eta)?;
        check_non_negative("epsilon1", epsilon1)?;
        Ok(FixedIntervalParams {
            n_pulses,
            eta,
            epsilon1,
        })
    }

    /// The equivalent fixed-total-time parameters, `eps = eps1 q(N)`.
    pub fn to_bound_params(&self) -> Result<BoundParams, BoundError> {
        let q = q_factor(self.n_pulses).map_err(|e| BoundError::InvalidParameter(e.to_string()))?;
        BoundParams::new(self.n_pulses, self.eta, self.epsilon1 * q)
    }
}

fn check_non_negative(name: &str, x: f64) -> Result<(), BoundError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(BoundError::InvalidParameter(format!("{name} = {x}")))
    }
}

const LN_MAX: f64 = 709.782_712_893_384;

fn exp_checked(ln_value: f64) -> Result<f64, BoundError> {
    if ln_value > LN_MAX {
        Err(BoundError::Overflow { ln_value })
    } else {
        Ok(ln_value.exp())
    }
}

const LN_FACT_TABLE: usize = 1024;

/// `ln(n!)`.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    if n < LN_FACT_TABLE {
        table[n]
    } else {
        // Stirling with two correction terms; only reached far outside the CLI grids.
        let x = n as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}

/// Numerically stable `ln(sum_i exp(x_i))`.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Bounding series for the full propagator, `S = exp((J0 + Jz) T)`.
pub fn bounding_series_s(j0: f64, jz: f64, t: f64) -> Result<f64, BoundError> {
    check_non_negative("j0", j0)?;
    check_non_negative("jz", jz)?;
    check_non_negative("t", t)?;
    exp_checked((j0 + jz) * t)
}

/// `ln S_-(eta, eps)`; `-inf` when `S_-` vanishes.
pub fn ln_s_minus(eta: f64, epsilon: f64) -> f64 {
    if eta == 0.0 || epsilon == 0.0 {
        return f64::NEG_INFINITY;
    }
    // exp(eps) sinh(eps eta) = exp(eps (1 + eta)) (1 - exp(-2 eps eta)) / 2
    let x = epsilon * eta;
    epsilon + x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// `S_-(eta, eps) = exp(eps) sinh(eps eta)`.
pub fn s_minus(eta: f64, epsilon: f64) -> Result<f64, BoundError> {
    check_non_negative("eta", eta)?;
    check_non_negative("epsilon", epsilon)?;
    let ln = ln_s_minus(eta, epsilon);
    if ln < LN_MAX - 1.0 {
        // Direct form is more accurate where it is representable.
        Ok(epsilon.exp() * (epsilon * eta).sinh())
    } else {
        exp_checked(ln)
    }
}

/// `ln p_l(eta)`, using `p_l = sum_{k odd} eta^k / (k! (l-k)!)`, which has no
/// cancellation for small `eta`.
pub fn ln_p_coefficient(l: usize, eta: f64) -> f64 {
    if l == 0 || eta == 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_eta = eta.ln();
    let terms: Vec<f64> = (1..=l)
        .step_by(2)
        .map(|k| k as f64 * ln_eta - ln_factorial(k) - ln_factorial(l - k))
        .collect();
    log_sum_exp(&terms)
}

/// `p_l(eta) = [(1+eta)^l - (1-eta)^l] / (2 l!)`.
pub fn p_coefficient(l: usize, eta: f64) -> f64 {
    if l == 0 || eta == 0.0 {
        return 0.0;
    }
    if eta <= 1e3 && l <= 150 {
        (1..=l)
            .step_by(2)
            .map(|k| {
                let ln_den = ln_factorial(k) + ln_factorial(l - k);
                eta.powi(k as i32) * (-ln_den).exp()
            })
            .sum()
    } else {
        ln_p_coefficient(l, eta).exp()
    }
}

/// Taylor coefficient `d_k` of `S_-(J0, Jz)` in powers of `T`, computed from
/// the binomial expansion of `exp(J0 T) sinh(Jz T)`. Equals `p_k(Jz/J0) J0^k`.
pub fn d_coefficient(k: usize, j0: f64, jz: f64) -> f64 {
    (1..=k)
        .step_by(2)
        .map(|m| {
            let ln_den = ln_factorial(m) + ln_factorial(k - m);
            j0.powi((k - m) as i32) * jz.powi(m as i32) * (-ln_den).exp()
        })
        .sum()
}

/// `ln(p_n eps^n)`.
fn ln_series_term(n: usize, eta: f64, epsilon: f64) -> f64 {
    ln_p_coefficient(n, eta) + n as f64 * epsilon.ln()
}

/// Fraction of `S_-` that the closed form must leave behind for the
/// subtraction to be trusted; below it the tail series is summed instead.
const CLOSED_FORM_MIN_FRACTION: f64 = 1e-4;
const SERIES_REL_STOP: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 200;

/// Which route produced a value of `Delta_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRoute {
    Zero,
    ClosedForm,
    Series,
    LogClosedForm,
}

/// `Delta_N` in log space together with the evaluation route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEvaluation {
    pub ln_value: f64,
    pub route: DeltaRoute,
}

impl DeltaEvaluation {
    pub fn value(&self) -> Result<f64, BoundError> {
        exp_checked(self.ln_value)
    }
}

/// Sum of the tail series `sum_{n > N} p_n eps^n` in log space.
fn ln_tail_series(n_pulses: usize, eta: f64, epsilon: f64) -> f64 {
    let mut ln_sum = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for n in (n_pulses + 1)..=(n_pulses + SERIES_MAX_TERMS) {
        let ln_term = ln_series_term(n, eta, epsilon);
        ln_sum = if ln_sum == f64::NEG_INFINITY {
            ln_term
        } else {
            let (hi, lo) = if ln_sum >= ln_term {
                (ln_sum, ln_term)
            } else {
                (ln_term, ln_sum)
            };
            hi + (lo - hi).exp().ln_1p()
        };
        let decreasing = ln_term < prev;
        prev = ln_term;
        if decreasing && ln_term - ln_sum < SERIES_REL_STOP.ln() {
            break;
        }
    }
    ln_sum
}

/// Evaluate `Delta_N(eta, eps)` with route selection. Never overflows.
pub fn evaluate_delta(params: &BoundParams) -> Result<DeltaEvaluation, BoundError> {
    params.validate()?;
    let BoundParams {
        n_pulses,
        eta,
        epsilon,
    } = *params;
    if eta == 0.0 || epsilon == 0.0 {
        return Ok(DeltaEvaluation {
            ln_value: f64::NEG_INFINITY,
            route: DeltaRoute::Zero,
        });
    }
    let ln_s = ln_s_minus(eta, epsilon);
    if n_pulses == 0 {
        return Ok(DeltaEvaluation {
            ln_value: ln_s,
            route: DeltaRoute::ClosedForm,
        });
    }
    let head_terms: Vec<f64> = (1..=n_pulses)
        .map(|n| ln_series_term(n, eta, epsilon))
        .collect();
    let ln_head = log_sum_exp(&head_terms);
    let head_fraction = (ln_head - ln_s).exp();
    if head_fraction > 1.0 - CLOSED_FORM_MIN_FRACTION {
        return Ok(DeltaEvaluation {
            ln_value: ln_tail_series(n_pulses, eta, epsilon),
            route: DeltaRoute::Series,
        });
    }
    if ln_s < LN_MAX - 1.0 {
        let s = epsilon.exp() * (epsilon * eta).sinh();
        let mut head = 0.0;
        for n in 1..=n_pulses {
            head += p_coefficient(n, eta) * epsilon.powi(n as i32);
        }
        let delta = (s - head).max(0.0);
        Ok(DeltaEvaluation {
            ln_value: delta.ln(),
            route: DeltaRoute::ClosedForm,
        })
    } else {
        Ok(DeltaEvaluation {
            ln_value: ln_s + (-head_fraction).ln_1p(),
            route: DeltaRoute::LogClosedForm,
        })
    }
}

/// `Delta_N(eta, eps)`, the UDD(N) bound on `||B_-(T)||`.
pub fn delta_bound(params: &BoundParams) -> Result<f64, BoundError> {
    evaluate_delta(params)?.value()
}

/// `ln Delta_N(eta, eps)`; finite for every `eta, eps > 0`.
pub fn ln_delta_bound(params: &BoundParams) -> Result<f64, BoundError> {
    Ok(evaluate_delta(params)?.ln_value)
}

/// Bound at fixed shortest interval: `Delta_N(eta, eps1 q(N))`.
pub fn delta_bound_fixed_interval(params: &FixedIntervalParams) -> Result<f64, BoundError> {
    delta_bound(&params.to_bound_params()?)
}

pub fn ln_delta_bound_fixed_interval(params: &FixedIntervalParams) -> Result<f64, BoundError> {
    ln_delta_bound(&params.to_bound_params()?)
}

/// `min(1, Delta + Delta^2)`.
pub fn distance_bound_from_delta(delta: f64) -> f64 {
    if !delta.is_finite() || delta >= 1.0 {
        1.0
    } else {
        (delta + delta * delta).min(1.0)
    }
}

/// Trace-distance bound `min(1, Delta_N + Delta_N^2)`.
pub fn distance_bound(params: &BoundParams) -> Result<f64, BoundError> {
    match delta_bound(params) {
        Ok(d) => Ok(distance_bound_from_delta(d)),
        Err(BoundError::Overflow { .. }) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// `ln[p_{N+1}(eta) q(N+1)^{N+1} eps1^{N+1}]`, the leading term of the
/// fixed-interval residual with `q` taken at the summation index.
pub fn leading_term_growth(n_pulses: usize, eta: f64, epsilon1: f64) -> Result<f64, BoundError> {
    if n_pulses == 0 {
        return Err(BoundError::InvalidParameter("n_pulses must be >= 1".into()));
    }
    check_non_negative("eta", eta)?;
    check_non_negative("epsilon1", epsilon1)?;
    let m = n_pulses + 1;
    let q = q_factor(m).map_err(|e| BoundError::InvalidParameter(e.to_string()))?;
    Ok(ln_p_coefficient(m, eta) + m as f64 * (q.ln() + epsilon1.ln()))
}

/// Smallest `eps` with `Delta_N(eta, eps) >= target`, by bisection on the
/// monotone map `eps -> ln Delta_N`. Used to place experiments at a chosen
/// bound level.
pub fn epsilon_for_delta(n_pulses: usize, eta: f64, target: f64) -> Result<f64, BoundError> {
    if !(target > 0.0 && target.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
        return Err(BoundError::InvalidParameter(format!(
            "need eta > 0 and target > 0, got eta={eta}, target={target}"
        )));
    }
    let ln_target = target.ln();
    let ln_at = |eps: f64| ln_delta_bound(&BoundParams::new(n_pulses, eta, eps).unwrap()).unwrap();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while ln_at(hi) < ln_target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_at(mid) < ln_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
