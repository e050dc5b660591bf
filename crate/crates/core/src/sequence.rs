//! Instantaneous pi-pulse sequences and their switching functions.
//!
//! [`udd_sequence`] builds the Uhrig sequence with `t_j = T sin^2(j pi / (2N+2))`.
//! Periodic and CPMG timings are available as controls that only cancel the
//! first order of the dephasing expansion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::Dd;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("number of pulses must be at least 1")]
    NoPulses,
    #[error("total time must be positive and finite, got {0}")]
    InvalidTotalTime(f64),
    #[error("pulse instants must be strictly increasing inside (0, {total_time}), got {instants:?}")]
    InvalidInstants { total_time: f64, instants: Vec<f64> },
    #[error("time {t} lies outside [0, {total_time}]")]
    TimeOutOfRange { t: f64, total_time: f64 },
}

/// Which construction produced a sequence. Only used to regenerate
/// high-precision breakpoints; never serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    Udd,
    Periodic,
    Cpmg,
    #[default]
    Custom,
}

impl std::str::FromStr for Timing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "udd" => Ok(Timing::Udd),
            "periodic" => Ok(Timing::Periodic),
            "cpmg" => Ok(Timing::Cpmg),
            other => Err(format!("unknown timing `{other}` (expected udd, periodic or cpmg)")),
        }
    }
}

/// Ordered pulse instants on `(0, total_time)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    total_time: f64,
    instants: Vec<f64>,
    #[serde(skip)]
    timing: Timing,
}

impl PulseSequence {
    /// Validating constructor for arbitrary instants.
    pub fn new(total_time: f64, instants: Vec<f64>) -> Result<Self, SequenceError> {
        let seq = PulseSequence {
            total_time,
            instants,
            timing: Timing::Custom,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Free evolution: no pulses at all.
    pub fn free(total_time: f64) -> Result<Self, SequenceError> {
        Self::new(total_time, Vec::new())
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(SequenceError::InvalidTotalTime(self.total_time));
        }
        let inside = self
            .instants
            .iter()
            .all(|&t| t.is_finite() && t > 0.0 && t < self.total_time);
        let increasing = self.instants.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(SequenceError::InvalidInstants {
                total_time: self.total_time,
                instants: self.instants.clone(),
            });
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn n_pulses(&self) -> usize {
        self.instants.len()
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    /// Relative pulse positions `delta_j = t_j / T` in double-double precision.
    ///
    /// For generated sequences these are recomputed from the defining formula;
    /// custom sequences fall back to the stored `f64` ratios.
    pub fn fractions_dd(&self) -> Vec<Dd> {
        let n = self.n_pulses();
        match self.timing {
            Timing::Udd => udd_fractions(n),
            Timing::Periodic => periodic_fractions(n),
            Timing::Cpmg => cpmg_fractions(n),
            Timing::Custom => self
                .instants
                .iter()
                .map(|&t| Dd::from_f64(t) / Dd::from_f64(self.total_time))
                .collect(),
        }
    }

    /// Interval durations together with the switching-function sign on each.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.instants.len() + 1);
        let mut prev = 0.0;
        let mut sign = 1.0;
        for &t in self.instants.iter().chain(std::iter::once(&self.total_time)) {
            out.push((t - prev, sign));
            prev = t;
            sign = -sign;
        }
        out
    }

    /// Same as [`intervals`](Self::intervals) with double-double durations.
    pub fn intervals_dd(&self) -> Vec<(Dd, f64)> {
        let total = Dd::from_f64(self.total_time);
        let mut out = Vec::with_capacity(self.instants.len() + 1);
        let mut prev = Dd::ZERO;
        let mut sign = 1.0;
        for frac in self.fractions_dd().into_iter().chain(std::iter::once(Dd::ONE)) {
            out.push(((frac - prev) * total, sign));
            prev = frac;
            sign = -sign;
        }
        out
    }
}

fn check_args(n_pulses: usize, total_time: f64) -> Result<(), SequenceError> {
    if n_pulses == 0 {
        return Err(SequenceError::NoPulses);
    }
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(SequenceError::InvalidTotalTime(total_time));
    }
    Ok(())
}

/// `sin^2(j pi / (2N+2))` for `j = 1..=N`, built so that
/// `delta_j + delta_{N+1-j} = 1` holds exactly in double-double.
pub fn udd_fractions(n_pulses: usize) -> Vec<Dd> {
    let n = n_pulses;
    let denom = Dd::from_f64((2 * n + 2) as f64);
    let mut out = vec![Dd::ZERO; n];
    for j in 1..=n {
        let mirror = n + 1 - j;
        if j > mirror {
            out[j - 1] = Dd::ONE - out[mirror - 1];
        } else if j == mirror {
            out[j - 1] = Dd::from_f64(0.5);
        } else {
            let s = (Dd::PI * Dd::from_f64(j as f64) / denom).sin();
            out[j - 1] = s * s;
        }
    }
    out
}

fn periodic_fractions(n: usize) -> Vec<Dd> {
    (1..=n)
        .map(|j| Dd::from_f64(j as f64) / Dd::from_f64((n + 1) as f64))
        .collect()
}

fn cpmg_fractions(n: usize) -> Vec<Dd> {
    (1..=n)
        .map(|j| (Dd::from_f64(j as f64) - Dd::from_f64(0.5)) / Dd::from_f64(n as f64))
        .collect()
}

fn from_fractions(total_time: f64, fractions: &[Dd], timing: Timing) -> PulseSequence {
    let t = Dd::from_f64(total_time);
    PulseSequence {
        total_time,
        instants: fractions.iter().map(|&d| (d * t).to_f64()).collect(),
        timing,
    }
}

/// The UDD(N) sequence on `[0, total_time]`.
pub fn udd_sequence(n_pulses: usize, total_time: f64) -> Result<PulseSequence, SequenceError> {
    check_args(n_pulses, total_time)?;
    Ok(from_fractions(total_time, &udd_fractions(n_pulses), Timing::Udd))
}

/// Equidistant pulses `t_j = j T / (N+1)`.
pub fn periodic_sequence(
    n_pulses: usize,
    total_time: f64,
) -> Result<PulseSequence, SequenceError> {
    check_args(n_pulses, total_time)?;
    Ok(from_fractions(total_time, &periodic_fractions(n_pulses), Timing::Periodic))
}

/// Carr-Purcell-Meiboom-Gill timing `t_j = (j - 1/2) T / N`.
pub fn cpmg_sequence(n_pulses: usize, total_time: f64) -> Result<PulseSequence, SequenceError> {
    check_args(n_pulses, total_time)?;
    Ok(from_fractions(total_time, &cpmg_fractions(n_pulses), Timing::Cpmg))
}

/// Build a sequence of the given timing family.
pub fn sequence_for(
    timing: Timing,
    n_pulses: usize,
    total_time: f64,
) -> Result<PulseSequence, SequenceError> {
    match timing {
        Timing::Udd | Timing::Custom => udd_sequence(n_pulses, total_time),
        Timing::Periodic => periodic_sequence(n_pulses, total_time),
        Timing::Cpmg => cpmg_sequence(n_pulses, total_time),
    }
}

/// Switching function `f(t) = ±1`, right-continuous at the pulse instants.
pub fn switching_function(seq: &PulseSequence, t: f64) -> Result<f64, SequenceError> {
    if !(0.0..=seq.total_time).contains(&t) {
        return Err(SequenceError::TimeOutOfRange {
            t,
            total_time: seq.total_time,
        });
    }
    // Number of instants <= t.
    let flips = seq.instants.partition_point(|&tj| tj <= t);
    Ok(if flips % 2 == 0 { 1.0 } else { -1.0 })
}

/// `q(N) = csc^2(pi / (2N+2))`, the ratio of total time to the first
/// (shortest) UDD interval.
pub fn q_factor(n_pulses: usize) -> Result<f64, SequenceError> {
    if n_pulses == 0 {
        return Err(SequenceError::NoPulses);
    }
    Ok(q_factor_dd(n_pulses).to_f64())
}

pub(crate) fn q_factor_dd(n_pulses: usize) -> Dd {
    let s = (Dd::PI / Dd::from_f64((2 * n_pulses + 2) as f64)).sin();
    (s * s).recip()
}
