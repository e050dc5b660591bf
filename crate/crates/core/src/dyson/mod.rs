//! Dyson expansion of the toggling-frame propagator.
//!
//! With `s = t/T` the propagator is
//! `U(T) = sum_n (-iT)^n sum_{|alpha| = n} F_alpha Q_alpha`, where
//! `F_alpha = int_0^1 ds_n f_{alpha_n}(s_n) ... int_0^{s_2} ds_1 f_{alpha_1}(s_1)`
//! and `Q_alpha = sigma_{alpha_n} B_{alpha_n} ... sigma_{alpha_1} B_{alpha_1}`.
//! Letters are `0` (`f_0 = 1`, `I ⊗ B0`) and `z` (`f_z = f(s)`, `sigma_z ⊗ Bz`).
//!
//! `F_alpha` is evaluated exactly by iterated integration of piecewise
//! polynomials whose breakpoints are the pulse fractions in double-double.

pub mod trig;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dd::Dd;
use crate::linops::{identity, kron, pauli_z, CMatrix};
use crate::sequence::{udd_sequence, PulseSequence, SequenceError};
use crate::simulator::BathModel;

pub const DEFAULT_MAX_ORDER: usize = 8;
/// Largest order accepted by the exhaustive vanishing check (`2^12` words).
pub const MAX_CHECK_ORDER: usize = 12;
pub const VANISHING_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum DysonError {
    #[error("a Dyson word needs at least one letter")]
    EmptyWord,
    #[error("invalid letter {0:?}; expected '0' or 'z'")]
    BadLetter(char),
    #[error("order {order} exceeds the configured maximum {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("max order {max_order} exceeds the pulse count {n_pulses}")]
    OrderExceedsPulses { max_order: usize, n_pulses: usize },
    #[error("bath dimension {bath} does not match operator dimension {expected}")]
    DimensionMismatch { bath: usize, expected: usize },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Zero,
    Z,
}

/// A Dyson word; `letters[0]` is the earliest (innermost) factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlphaWord {
    letters: Vec<Letter>,
}

impl AlphaWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self, DysonError> {
        if letters.is_empty() {
            return Err(DysonError::EmptyWord);
        }
        Ok(AlphaWord { letters })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn z_count(&self) -> usize {
        self.letters.iter().filter(|&&l| l == Letter::Z).count()
    }

    /// All `2^n` words of length `n >= 1`, lexicographic with `0 < z`.
    pub fn all_of_length(n: usize) -> Vec<AlphaWord> {
        assert!((1..64).contains(&n));
        (0..1u64 << n)
            .map(|code| {
                let letters = (0..n)
                    .map(|i| if code >> (n - 1 - i) & 1 == 1 { Letter::Z } else { Letter::Zero })
                    .collect();
                AlphaWord { letters }
            })
            .collect()
    }
}

impl fmt::Display for AlphaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            f.write_str(if *l == Letter::Z { "z" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for AlphaWord {
    type Err = DysonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(|c| match c {
                '0' => Ok(Letter::Zero),
                'z' | 'Z' => Ok(Letter::Z),
                other => Err(DysonError::BadLetter(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        AlphaWord::new(letters)
    }
}

/// Polynomial pieces on `[s_i, s_{i+1}]` in the local variable `u = s - s_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breakpoints: Vec<Dd>,
    segments: Vec<Vec<Dd>>,
}

impl PiecewisePoly {
    /// Constant `value` on the partition `0 = s_0 < s_1 < ... < s_m = 1`.
    pub fn constant(breakpoints: Vec<Dd>, value: Dd) -> Self {
        assert!(breakpoints.len() >= 2);
        let segments = vec![vec![value]; breakpoints.len() - 1];
        PiecewisePoly { breakpoints, segments }
    }

    /// Partition `0, delta_1, ..., delta_N, 1` of a pulse sequence.
    pub fn partition_of(seq: &PulseSequence) -> Vec<Dd> {
        let mut b = Vec::with_capacity(seq.n_pulses() + 2);
        b.push(Dd::ZERO);
        b.extend(seq.fractions_dd());
        b.push(Dd::ONE);
        b
    }

    pub fn breakpoints(&self) -> &[Dd] {
        &self.breakpoints
    }

    /// Coefficients of segment `i`, lowest degree first.
    pub fn segment(&self, i: usize) -> &[Dd] {
        &self.segments[i]
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    fn eval_local(coeffs: &[Dd], u: Dd) -> Dd {
        coeffs.iter().rev().fold(Dd::ZERO, |acc, &c| acc * u + c)
    }

    fn width(&self, i: usize) -> Dd {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    /// Left and right limits of segment `i`.
    pub fn segment_ends(&self, i: usize) -> (Dd, Dd) {
        let c = &self.segments[i];
        (c[0], Self::eval_local(c, self.width(i)))
    }

    /// Value at `s` in `[0, 1]`; interior breakpoints belong to the right segment.
    pub fn eval(&self, s: f64) -> f64 {
        let s = Dd::from_f64(s);
        let i = self.breakpoints[1..self.breakpoints.len() - 1]
            .partition_point(|b| b.to_f64() <= s.to_f64());
        Self::eval_local(&self.segments[i], s - self.breakpoints[i]).to_f64()
    }

    pub fn end_value(&self) -> Dd {
        self.segment_ends(self.segments.len() - 1).1
    }

    /// Antiderivative of `signs[i] * p` on each segment, vanishing at `s = 0`
    /// and continuous across breakpoints.
    pub fn integrate_signed(&self, signs: &[f64]) -> PiecewisePoly {
        assert_eq!(signs.len(), self.segments.len());
        let mut out = Vec::with_capacity(self.segments.len());
        let mut start = Dd::ZERO;
        for (i, coeffs) in self.segments.iter().enumerate() {
            let mut next = Vec::with_capacity(coeffs.len() + 1);
            next.push(start);
            for (k, &c) in coeffs.iter().enumerate() {
                next.push(c * Dd::from_f64(signs[i]) / Dd::from_f64((k + 1) as f64));
            }
            start = Self::eval_local(&next, self.width(i));
            out.push(next);
        }
        PiecewisePoly {
            breakpoints: self.breakpoints.clone(),
            segments: out,
        }
    }
}

fn signs_for(letter: Letter, n_segments: usize) -> Vec<f64> {
    (0..n_segments)
        .map(|i| match letter {
            Letter::Zero => 1.0,
            Letter::Z if i % 2 == 0 => 1.0,
            Letter::Z => -1.0,
        })
        .collect()
}

fn f_alpha_dd(word: &AlphaWord, partition: &[Dd]) -> Dd {
    let mut g = PiecewisePoly::constant(partition.to_vec(), Dd::ONE);
    for &letter in word.letters() {
        g = g.integrate_signed(&signs_for(letter, g.n_segments()));
    }
    g.end_value()
}

/// `F_alpha` for `seq` with the default order cap.
pub fn f_alpha_exact(word: &AlphaWord, seq: &PulseSequence) -> Result<f64, DysonError> {
    f_alpha_exact_with(word, seq, DEFAULT_MAX_ORDER)
}

pub fn f_alpha_exact_with(word: &AlphaWord, seq: &PulseSequence, max_order: usize) -> Result<f64, DysonError> {
    if word.len() > max_order {
        return Err(DysonError::OrderTooHigh {
            order: word.len(),
            max: max_order,
        });
    }
    Ok(f_alpha_dd(word, &PiecewisePoly::partition_of(seq)).to_f64())
}

/// Outcome of the exhaustive odd-z check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingReport {
    pub n_pulses: usize,
    pub max_order: usize,
    pub words_checked: usize,
    #[serde(rename = "max_abs_F")]
    pub max_abs_f: f64,
    pub argmax_word: String,
    pub pass: bool,
}

/// Every word of length `<= max_order` with an odd number of `z` letters.
pub fn odd_z_words(max_order: usize) -> Vec<AlphaWord> {
    (1..=max_order)
        .flat_map(AlphaWord::all_of_length)
        .filter(|w| w.z_count() % 2 == 1)
        .collect()
}

/// Check `|F_alpha| < VANISHING_TOL` for all odd-z words up to `max_order`
/// on any sequence. Non-UDD timings are expected to fail beyond first order.
pub fn verify_vanishing_orders_for(seq: &PulseSequence, max_order: usize) -> Result<VanishingReport, DysonError> {
    if max_order == 0 || max_order > MAX_CHECK_ORDER {
        return Err(DysonError::OrderTooHigh {
            order: max_order,
            max: MAX_CHECK_ORDER,
        });
    }
    let partition = PiecewisePoly::partition_of(seq);
    let words = odd_z_words(max_order);
    let values: Vec<f64> = words
        .par_iter()
        .map(|w| f_alpha_dd(w, &partition).to_f64().abs())
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let max_abs_f = values[best];
    Ok(VanishingReport {
        n_pulses: seq.n_pulses(),
        max_order,
        words_checked: words.len(),
        max_abs_f,
        argmax_word: words[best].to_string(),
        pass: max_abs_f < VANISHING_TOL,
    })
}

/// The vanishing check for UDD(`n_pulses`); requires `max_order <= n_pulses`.
pub fn verify_vanishing_orders(n_pulses: usize, max_order: usize) -> Result<VanishingReport, DysonError> {
    if max_order > n_pulses {
        return Err(DysonError::OrderExceedsPulses { max_order, n_pulses });
    }
    verify_vanishing_orders_for(&udd_sequence(n_pulses, 1.0)?, max_order)
}

/// Order-`n` contribution `(-iT)^n sum_alpha F_alpha Q_alpha`, split into the
/// bath operators multiplying `I` (even z-count) and `sigma_z` (odd z-count).
pub fn dyson_order_split(bath: &BathModel, seq: &PulseSequence, order: usize) -> Result<(CMatrix, CMatrix), DysonError> {
    if order > DEFAULT_MAX_ORDER {
        return Err(DysonError::OrderTooHigh {
            order,
            max: DEFAULT_MAX_ORDER,
        });
    }
    let d = bath.dim();
    if order == 0 {
        return Ok((identity(d), CMatrix::zeros(d, d)));
    }
    let partition = PiecewisePoly::partition_of(seq);
    let mut even = CMatrix::zeros(d, d);
    let mut odd = CMatrix::zeros(d, d);
    for word in AlphaWord::all_of_length(order) {
        let f = f_alpha_dd(&word, &partition).to_f64();
        let mut product = identity(d);
        for &l in word.letters() {
            let b = if l == Letter::Z { bath.bz() } else { bath.b0() };
            product = b * product;
        }
        let target = if word.z_count() % 2 == 0 { &mut even } else { &mut odd };
        *target += product.scale(f);
    }
    let factor = num_complex::Complex64::new(0.0, -seq.total_time()).powu(order as u32);
    Ok((even * factor, odd * factor))
}

/// Full order-`n` term on the qubit-bath space.
pub fn dyson_order_term(bath: &BathModel, seq: &PulseSequence, order: usize) -> Result<CMatrix, DysonError> {
    let (even, odd) = dyson_order_split(bath, seq, order)?;
    Ok(kron(&identity(2), &even) + kron(&pauli_z(), &odd))
}

/// Truncated Dyson series through `max_order <= 8`.
pub fn dyson_partial_sum(bath: &BathModel, seq: &PulseSequence, max_order: usize) -> Result<CMatrix, DysonError> {
    if max_order > DEFAULT_MAX_ORDER {
        return Err(DysonError::OrderTooHigh {
            order: max_order,
            max: DEFAULT_MAX_ORDER,
        });
    }
    let d = bath.dim();
    let mut sum = CMatrix::zeros(2 * d, 2 * d);
    for n in 0..=max_order {
        sum += dyson_order_term(bath, seq, n)?;
    }
    Ok(sum)
}

/// `(T (J0 + Jz))^n / n!`, the norm bound on the order-`n` term.
pub fn order_term_bound(order: usize, j0: f64, jz: f64, total_time: f64) -> f64 {
    let mut b = 1.0;
    for k in 1..=order {
        b *= total_time * (j0 + jz) / k as f64;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::periodic_sequence;

    fn w(s: &str) -> AlphaWord {
        s.parse().unwrap()
    }

    #[test]
    fn word_parsing_and_order() {
        assert_eq!(w("z0z").to_string(), "z0z");
        assert_eq!(w("z,0,z"), w("z0z"));
        assert_eq!("".parse::<AlphaWord>(), Err(DysonError::EmptyWord));
        assert_eq!("zx".parse::<AlphaWord>(), Err(DysonError::BadLetter('x')));
        let all: Vec<String> = AlphaWord::all_of_length(2).iter().map(|w| w.to_string()).collect();
        assert_eq!(all, ["00", "0z", "z0", "zz"]);
        assert_eq!(odd_z_words(5).len(), 31);
    }

    #[test]
    fn trivial_coefficients() {
        let udd1 = udd_sequence(1, 1.0).unwrap();
        assert_eq!(f_alpha_exact(&w("0"), &udd1).unwrap(), 1.0);
        assert!(f_alpha_exact(&w("z"), &udd1).unwrap().abs() < 1e-30);
        let third = PulseSequence::new(1.0, vec![1.0 / 3.0]).unwrap();
        assert!((f_alpha_exact(&w("z"), &third).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert!((f_alpha_exact(&w("000"), &third).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let udd3 = udd_sequence(3, 1.0).unwrap();
        assert!(f_alpha_exact(&w("z00"), &udd3).unwrap().abs() < 1e-12);
        // even z-count: no cancellation expected
        assert!((f_alpha_exact(&w("z0z"), &udd3).unwrap() + 0.010110028629970214).abs() < 1e-15);
    }

    #[test]
    fn antiderivative_is_continuous() {
        let seq = udd_sequence(4, 1.0).unwrap();
        let mut g = PiecewisePoly::constant(PiecewisePoly::partition_of(&seq), Dd::ONE);
        for l in w("z0zz").letters() {
            g = g.integrate_signed(&signs_for(*l, g.n_segments()));
        }
        for i in 0..g.n_segments() - 1 {
            let left = g.segment_ends(i).1;
            let right = g.segment_ends(i + 1).0;
            assert!((left - right).abs().to_f64() < 1e-30);
        }
    }

    #[test]
    fn order_cap() {
        let seq = udd_sequence(2, 1.0).unwrap();
        let long = w("000000000");
        assert!(matches!(f_alpha_exact(&long, &seq), Err(DysonError::OrderTooHigh { .. })));
        assert!(f_alpha_exact_with(&long, &seq, 9).is_ok());
        assert_eq!(
            verify_vanishing_orders(2, 3),
            Err(DysonError::OrderExceedsPulses { max_order: 3, n_pulses: 2 })
        );
    }

    #[test]
    fn vanishing_small_cases() {
        let r = verify_vanishing_orders(1, 1).unwrap();
        assert!(r.pass && r.words_checked == 1 && r.argmax_word == "z");
        let r = verify_vanishing_orders(5, 5).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.words_checked, 31);
        let periodic = periodic_sequence(3, 1.0).unwrap();
        let r = verify_vanishing_orders_for(&periodic, 3).unwrap();
        assert!(!r.pass);
        assert_eq!(r.argmax_word, "0z");
        assert!((r.max_abs_f - 0.125).abs() < 1e-15);
        assert!(f_alpha_exact(&w("00z"), &periodic).unwrap().abs() > 1e-4);
        // a palindrome with odd z-count vanishes for any mirror-antisymmetric switching function
        assert!(f_alpha_exact(&w("zzz"), &periodic).unwrap().abs() < 1e-30);
    }

    #[test]
    fn zero_order_is_identity() {
        let bath = crate::simulator::random_bath(3, 1.0, 0.5, 1).unwrap();
        let seq = udd_sequence(2, 0.3).unwrap();
        assert_eq!(dyson_partial_sum(&bath, &seq, 0).unwrap(), identity(6));
        assert!(dyson_partial_sum(&bath, &seq, 9).is_err());
    }
}
