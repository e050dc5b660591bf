//! Symbolic integration in the angle variable `theta`, where `s = (1 - cos theta)/2`.
//!
//! Under this substitution the UDD switching function becomes odd harmonics of
//! `N̄ theta` only: `f_z = sum_{r_o odd} c_{r_o} sin(r_o N̄ theta)` with
//! `N̄ = N + 1`. Integrands are then sums of `sin` or `cos` of
//! `(q + r N̄) theta`, multiplied by `sin theta` from `ds`. Only the labels
//! matter for the vanishing argument, so the Fourier weights `c_{r_o}` are
//! carried as unit placeholders.
//!
//! Convention: [`trig_integrate`] returns the antiderivative of
//! `2 term(theta) sin(theta)` without `f_z`, and of
//! `4 term(theta) sin(r_o N̄ theta) sin(theta)` with it. Constant parts of
//! the antiderivative are dropped.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use super::{AlphaWord, Letter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Sine,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(r: i64) -> Parity {
        if r.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrigError {
    #[error("N̄ must be at least 2, got {0}")]
    BadPeriod(i64),
    #[error("harmonic r_o = {0} must be odd")]
    EvenHarmonic(i64),
    #[error("label q = {q} outside |q| < N̄ = {n_bar}")]
    LabelOutOfRange { q: i64, n_bar: i64 },
    #[error("{kind:?}-type term with r = {r} has the wrong parity")]
    ParityMismatch { kind: TrigKind, r: i64 },
    #[error("secular term: sin({q} + {r}·N̄) has frequency ±1 before integration")]
    Secular { q: i64, r: i64 },
}

/// `coefficient · trig((q + r N̄) theta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrigTerm {
    pub coefficient: BigRational,
    pub kind: TrigKind,
    pub q: i64,
    pub r: i64,
}

impl TrigTerm {
    pub fn new(coefficient: BigRational, kind: TrigKind, q: i64, r: i64) -> Self {
        TrigTerm { coefficient, kind, q, r }
    }

    /// The constant `1 = cos(0 theta)`.
    pub fn unit() -> Self {
        TrigTerm::new(BigRational::one(), TrigKind::Cosine, 0, 0)
    }

    pub fn frequency(&self, n_bar: i64) -> i64 {
        self.q + self.r * n_bar
    }

    fn check(&self, n_bar: i64) -> Result<(), TrigError> {
        if self.q.abs() >= n_bar {
            return Err(TrigError::LabelOutOfRange { q: self.q, n_bar });
        }
        let want = match self.kind {
            TrigKind::Cosine => Parity::Even,
            TrigKind::Sine => Parity::Odd,
        };
        if Parity::of(self.r) != want {
            return Err(TrigError::ParityMismatch {
                kind: self.kind,
                r: self.r,
            });
        }
        Ok(())
    }
}

impl fmt::Display for TrigTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            TrigKind::Sine => "sin",
            TrigKind::Cosine => "cos",
        };
        write!(f, "{}·{}(({}{:+}N̄)θ)", self.coefficient, name, self.q, self.r)
    }
}

fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `2 c cos(a theta) sin(theta)` with `a = q + r N̄`:
/// `c [cos((a-1)θ)/(a-1) - cos((a+1)θ)/(a+1)]`. A zero denominator marks a
/// constant, which is dropped.
fn cos_piece(c: &BigRational, q: i64, r: i64, n_bar: i64, out: &mut Vec<TrigTerm>) {
    let a = q + r * n_bar;
    for (dq, sign) in [(-1, 1), (1, -1)] {
        let den = a + dq;
        if den != 0 {
            out.push(TrigTerm::new(c * rational(sign) / rational(den), TrigKind::Cosine, q + dq, r));
        }
    }
}

/// `2 c sin(a theta) sin(theta)`:
/// `c [sin((a-1)θ)/(a-1) - sin((a+1)θ)/(a+1)]`. A zero denominator would make
/// the antiderivative linear in theta.
fn sin_piece(c: &BigRational, q: i64, r: i64, n_bar: i64, out: &mut Vec<TrigTerm>) -> Result<(), TrigError> {
    let a = q + r * n_bar;
    if a == 1 || a == -1 {
        return Err(TrigError::Secular { q, r });
    }
    for (dq, sign) in [(-1, 1), (1, -1)] {
        out.push(TrigTerm::new(c * rational(sign) / rational(a + dq), TrigKind::Sine, q + dq, r));
    }
    Ok(())
}

/// Antiderivative of one integrand term, following the four case rules.
///
/// Without `f_z` the kind is preserved and `q` shifts by ±1. With `f_z` the
/// product `sin(r_o N̄ theta)` toggles the kind and shifts `r` by ±`r_o`.
pub fn trig_integrate(term: &TrigTerm, with_fz: bool, r_o: i64, n_bar: i64) -> Result<Vec<TrigTerm>, TrigError> {
    if n_bar < 2 {
        return Err(TrigError::BadPeriod(n_bar));
    }
    term.check(n_bar)?;
    let (c, q, r) = (&term.coefficient, term.q, term.r);
    let mut out = Vec::with_capacity(4);
    match (term.kind, with_fz) {
        (TrigKind::Cosine, false) => cos_piece(c, q, r, n_bar, &mut out),
        (TrigKind::Sine, false) => sin_piece(c, q, r, n_bar, &mut out)?,
        (kind, true) => {
            if Parity::of(r_o) != Parity::Odd {
                return Err(TrigError::EvenHarmonic(r_o));
            }
            // 2 cos(a) sin(b) = sin(a+b) - sin(a-b); 2 sin(a) sin(b) = cos(a-b) - cos(a+b)
            if kind == TrigKind::Cosine {
                sin_piece(c, q, r + r_o, n_bar, &mut out)?;
                sin_piece(&-c, q, r - r_o, n_bar, &mut out)?;
            } else {
                cos_piece(c, q, r - r_o, n_bar, &mut out);
                cos_piece(&-c, q, r + r_o, n_bar, &mut out);
            }
        }
    }
    for t in &out {
        if t.q.abs() >= n_bar {
            return Err(TrigError::LabelOutOfRange { q: t.q, n_bar });
        }
    }
    Ok(out)
}

/// Merge terms with equal labels and drop zero coefficients. Output is sorted
/// by `(kind, q, r)`.
pub fn collect_terms(terms: impl IntoIterator<Item = TrigTerm>) -> Vec<TrigTerm> {
    let mut acc: BTreeMap<(TrigKind, i64, i64), BigRational> = BTreeMap::new();
    for t in terms {
        *acc.entry((t.kind, t.q, t.r)).or_insert_with(BigRational::zero) += t.coefficient;
    }
    acc.into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((kind, q, r), c)| TrigTerm::new(c, kind, q, r))
        .collect()
}

/// Kind and `r` parity of the integrand after each letter, starting from
/// `(cosine, even)`. `f_0` keeps the state; `f_z` toggles both.
pub fn type_automaton(word: &AlphaWord) -> (TrigKind, Parity) {
    let mut state = (TrigKind::Cosine, Parity::Even);
    for letter in word.letters() {
        if *letter == Letter::Z {
            state = match state.0 {
                TrigKind::Cosine => (TrigKind::Sine, Parity::Odd),
                TrigKind::Sine => (TrigKind::Cosine, Parity::Even),
            };
        }
    }
    state
}

/// Result of integrating a whole word symbolically over `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordIntegral {
    /// Antiderivative after the last letter, with constants dropped.
    pub terms: Vec<TrigTerm>,
    /// Its increase over `[0, pi]`.
    pub value: BigRational,
}

/// `G(pi) - G(0)` for a term list: sines vanish at both ends,
/// `cos(k pi) = (-1)^k`.
pub fn definite_over_period(terms: &[TrigTerm], n_bar: i64) -> BigRational {
    let mut total = BigRational::zero();
    for t in terms.iter().filter(|t| t.kind == TrigKind::Cosine) {
        if t.frequency(n_bar).rem_euclid(2) == 1 {
            total -= &t.coefficient * rational(2);
        }
    }
    total
}

/// Nested integration of `word` with every `f_z` expanded over `harmonics`
/// (odd, unit weights). Each inner integral is taken from 0, so its constant
/// `-G(0)` re-enters as a `cos(0 theta)` term.
pub fn integrate_word(word: &AlphaWord, n_bar: i64, harmonics: &[i64]) -> Result<WordIntegral, TrigError> {
    let mut integrand = vec![TrigTerm::unit()];
    let mut last = Vec::new();
    for (i, letter) in word.letters().iter().enumerate() {
        let mut next = Vec::new();
        for term in &integrand {
            if *letter == Letter::Z {
                for &r_o in harmonics {
                    next.extend(trig_integrate(term, true, r_o, n_bar)?);
                }
            } else {
                next.extend(trig_integrate(term, false, 1, n_bar)?);
            }
        }
        let next = collect_terms(next);
        if i + 1 == word.len() {
            last = next;
            break;
        }
        let at_zero: BigRational = next
            .iter()
            .filter(|t| t.kind == TrigKind::Cosine)
            .map(|t| t.coefficient.clone())
            .sum();
        let mut with_const = next;
        with_const.push(TrigTerm::new(-at_zero, TrigKind::Cosine, 0, 0));
        integrand = collect_terms(with_const);
    }
    let value = definite_over_period(&last, n_bar);
    Ok(WordIntegral { terms: last, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn constant_integrand() {
        let out = collect_terms(trig_integrate(&TrigTerm::unit(), false, 1, 3).unwrap());
        // cos(-θ)/(-1) - cos(θ)/1, merged on the same frequency but distinct labels
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], TrigTerm::new(r(-1, 1), TrigKind::Cosine, -1, 0));
        assert_eq!(out[1], TrigTerm::new(r(-1, 1), TrigKind::Cosine, 1, 0));
    }

    #[test]
    fn special_cosine_case() {
        let t = TrigTerm::new(r(1, 1), TrigKind::Cosine, 1, 0);
        let out = trig_integrate(&t, false, 1, 3).unwrap();
        assert_eq!(out, vec![TrigTerm::new(r(-1, 2), TrigKind::Cosine, 2, 0)]);
        let t = TrigTerm::new(r(1, 1), TrigKind::Cosine, -1, 0);
        let out = trig_integrate(&t, false, 1, 3).unwrap();
        assert_eq!(out, vec![TrigTerm::new(r(1, -2), TrigKind::Cosine, -2, 0)]);
    }

    #[test]
    fn fz_toggles_kind() {
        let out = trig_integrate(&TrigTerm::unit(), true, 1, 2).unwrap();
        assert!(out.iter().all(|t| t.kind == TrigKind::Sine && t.r.abs() == 1));
        let s = TrigTerm::new(r(1, 1), TrigKind::Sine, 0, 1);
        let out = trig_integrate(&s, true, 1, 2).unwrap();
        assert!(out.iter().all(|t| t.kind == TrigKind::Cosine && t.r % 2 == 0));
    }

    #[test]
    fn precondition_errors() {
        let bad_parity = TrigTerm::new(r(1, 1), TrigKind::Sine, 0, 0);
        assert!(matches!(
            trig_integrate(&bad_parity, false, 1, 3),
            Err(TrigError::ParityMismatch { .. })
        ));
        let wide = TrigTerm::new(r(1, 1), TrigKind::Cosine, 3, 0);
        assert!(matches!(
            trig_integrate(&wide, false, 1, 3),
            Err(TrigError::LabelOutOfRange { .. })
        ));
        assert_eq!(
            trig_integrate(&TrigTerm::unit(), true, 2, 3),
            Err(TrigError::EvenHarmonic(2))
        );
        // sin(theta) sin(theta) is secular: q = 1 - 2 = -1 with r = 1, N̄ = 2
        let sec = TrigTerm::new(r(1, 1), TrigKind::Sine, -1, 1);
        assert_eq!(trig_integrate(&sec, false, 1, 2), Err(TrigError::Secular { q: -1, r: 1 }));
    }

    #[test]
    fn automaton_examples() {
        let w = |s: &str| s.parse::<AlphaWord>().unwrap();
        assert_eq!(type_automaton(&w("z")), (TrigKind::Sine, Parity::Odd));
        assert_eq!(type_automaton(&w("0")), (TrigKind::Cosine, Parity::Even));
        assert_eq!(type_automaton(&w("zz0z")), (TrigKind::Sine, Parity::Odd));
    }

    #[test]
    fn odd_words_vanish_over_period() {
        for n in 1..=3usize {
            for word in AlphaWord::all_of_length(n) {
                let res = integrate_word(&word, n as i64 + 1, &[1, 3]).unwrap();
                if word.z_count() % 2 == 1 {
                    assert!(res.value.is_zero(), "{word}");
                    assert!(res.terms.iter().all(|t| t.kind == TrigKind::Sine));
                }
            }
        }
        let w: AlphaWord = "00".parse().unwrap();
        let res = integrate_word(&w, 3, &[1]).unwrap();
        assert!(res.value.is_positive());
    }
}
