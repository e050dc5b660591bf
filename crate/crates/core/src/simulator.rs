//! Exact simulation of a qubit dephasing against a finite bounded bath.
//!
//! The uncoupled Hamiltonian is `H = I ⊗ B0 + sigma_z ⊗ Bz`. In the toggling
//! frame the pulses only flip the sign of the coupling, so the propagator is
//! block diagonal in the `sigma_z` basis with blocks
//! `U_± = prod_j exp(-i (B0 ± f_j Bz) dt_j)` (later intervals on the left),
//! and `U = I ⊗ B_+ + sigma_z ⊗ B_-` with `B_± = (U_+ ± U_-)/2`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundError, BoundParams};
use crate::dd::{CDd, CDdMatrix, Dd};
use crate::linops::{
    self, c, identity, kron, pauli_x, pauli_z, partial_trace_bath_matrix, sup_norm, trace,
    trace_norm, CMatrix, DensityOperator, LinopsError,
};
use crate::random::{self, rng_from_seed, trial_seed};
use crate::sequence::{udd_sequence, PulseSequence, SequenceError};

/// Absolute tolerance on every proved inequality.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Below this, `||B_-||` is treated as exactly zero in scaling fits; it sits
/// a few decades above the double-double noise floor.
pub const DEGENERATE_NORM_FLOOR: f64 = 1e-26;
pub const MIN_BATH_DIM: usize = 2;
pub const MAX_BATH_DIM: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("bath dimension {0} outside supported range 2..=32")]
    BathDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate fit: ||B_-|| = {norm:e} at T = {time} is numerically zero")]
    DegenerateFit { time: f64, norm: f64 },
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// Pure-bath term `B0` and coupling `Bz` with their sup-norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BathModel {
    dim: usize,
    b0: CMatrix,
    bz: CMatrix,
    j0: f64,
    jz: f64,
}

impl BathModel {
    /// Build from explicit Hermitian matrices; the norms are measured.
    pub fn new(b0: CMatrix, bz: CMatrix) -> Result<Self, SimError> {
        let dim = b0.nrows();
        if !(MIN_BATH_DIM..=MAX_BATH_DIM).contains(&dim) {
            return Err(SimError::BathDimension(dim));
        }
        if bz.shape() != b0.shape() {
            return Err(LinopsError::DimensionMismatch(dim, bz.nrows()).into());
        }
        let b0 = linops::hermitize(&b0)?;
        let bz = linops::hermitize(&bz)?;
        let j0 = sup_norm(&b0);
        let jz = sup_norm(&bz);
        Ok(BathModel { dim, b0, bz, j0, jz })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b0(&self) -> &CMatrix {
        &self.b0
    }

    pub fn bz(&self) -> &CMatrix {
        &self.bz
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn jz(&self) -> f64 {
        self.jz
    }

    /// Full system-bath Hamiltonian `I ⊗ B0 + sigma_z ⊗ Bz`.
    pub fn hamiltonian(&self) -> CMatrix {
        kron(&identity(2), &self.b0) + kron(&pauli_z(), &self.bz)
    }

    /// Same bath with both operators multiplied by `k >= 0`.
    pub fn scaled(&self, k: f64) -> BathModel {
        BathModel {
            dim: self.dim,
            b0: self.b0.scale(k),
            bz: self.bz.scale(k),
            j0: self.j0 * k,
            jz: self.jz * k,
        }
    }
}

fn rescale_to(h: CMatrix, norm: f64) -> CMatrix {
    if norm == 0.0 {
        return CMatrix::zeros(h.nrows(), h.ncols());
    }
    let current = sup_norm(&h);
    h.scale(norm / current)
}

fn check_bath_args(dim: usize, j0: f64, jz: f64) -> Result<(), SimError> {
    if !(MIN_BATH_DIM..=MAX_BATH_DIM).contains(&dim) {
        return Err(SimError::BathDimension(dim));
    }
    for (name, x) in [("j0", j0), ("jz", jz)] {
        if !(x.is_finite() && x >= 0.0) {
            return Err(SimError::InvalidParameter(format!("{name} = {x}")));
        }
    }
    Ok(())
}

/// Two independent random Hermitian operators rescaled to sup-norms `j0`, `jz`.
pub fn random_bath(dim: usize, j0: f64, jz: f64, seed: u64) -> Result<BathModel, SimError> {
    check_bath_args(dim, j0, jz)?;
    let mut rng = rng_from_seed(seed);
    let b0 = rescale_to(random::random_hermitian(&mut rng, dim), j0);
    let bz = rescale_to(random::random_hermitian(&mut rng, dim), jz);
    Ok(BathModel {
        dim,
        b0,
        bz,
        j0,
        jz,
    })
}

/// A bath with `[B0, Bz] = 0`: both diagonal in one random basis.
pub fn commuting_bath(dim: usize, j0: f64, jz: f64, seed: u64) -> Result<BathModel, SimError> {
    check_bath_args(dim, j0, jz)?;
    let mut rng = rng_from_seed(seed);
    let u = random::random_unitary(&mut rng, dim);
    let diag = |rng: &mut random::LabRng| {
        let d = DVector::from_iterator(dim, (0..dim).map(|_| c(rand::Rng::random_range(rng, -1.0..1.0), 0.0)));
        &u * CMatrix::from_diagonal(&d) * u.adjoint()
    };
    let b0 = rescale_to(linops::hermitize(&diag(&mut rng))?, j0);
    let bz = rescale_to(linops::hermitize(&diag(&mut rng))?, jz);
    Ok(BathModel {
        dim,
        b0,
        bz,
        j0,
        jz,
    })
}

/// `U = I ⊗ B_+ + sigma_z ⊗ B_-`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPropagator {
    pub b_plus: CMatrix,
    pub b_minus: CMatrix,
}

/// Defects of the unitarity relations of a split propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDefects {
    /// `||B+^† B+ + B-^† B- - I||`
    pub norm_identity: f64,
    /// `||B+^† B- + B-^† B+||`
    pub cross_terms: f64,
    /// `||B+||`
    pub b_plus_norm: f64,
}

impl SplitPropagator {
    pub fn full(&self) -> CMatrix {
        kron(&identity(2), &self.b_plus) + kron(&pauli_z(), &self.b_minus)
    }

    pub fn defects(&self) -> SplitDefects {
        let d = self.b_plus.nrows();
        let bp = &self.b_plus;
        let bm = &self.b_minus;
        SplitDefects {
            norm_identity: sup_norm(&(bp.adjoint() * bp + bm.adjoint() * bm - identity(d))),
            cross_terms: sup_norm(&(bp.adjoint() * bm + bm.adjoint() * bp)),
            b_plus_norm: sup_norm(bp),
        }
    }

    pub fn b_minus_norm(&self) -> f64 {
        sup_norm(&self.b_minus)
    }
}

/// Toggling-frame propagator by exact exponentiation of each interval.
pub fn toggling_propagator(bath: &BathModel, seq: &PulseSequence) -> Result<SplitPropagator, SimError> {
    let d = bath.dim;
    let mut u_plus = identity(d);
    let mut u_minus = identity(d);
    let minus_i = c(0.0, -1.0);
    for (dt, sign) in seq.intervals() {
        let step_plus = linops::hermitian_exp(&(&bath.b0 + bath.bz.scale(sign)), minus_i * dt)?;
        let step_minus = linops::hermitian_exp(&(&bath.b0 - bath.bz.scale(sign)), minus_i * dt)?;
        u_plus = step_plus * u_plus;
        u_minus = step_minus * u_minus;
    }
    Ok(SplitPropagator {
        b_plus: (&u_plus + &u_minus).scale(0.5),
        b_minus: (&u_plus - &u_minus).scale(0.5),
    })
}

/// Toggling-frame propagator in double-double arithmetic, including
/// double-double pulse instants. `B_-` keeps ~30 significant digits relative
/// to the O(1) blocks, which resolves it deep into the small-`T` regime.
pub fn toggling_propagator_precise(bath: &BathModel, seq: &PulseSequence) -> SplitPropagator {
    let d = bath.dim;
    let b0 = CDdMatrix::from_c64(&bath.b0);
    let bz = CDdMatrix::from_c64(&bath.bz);
    let h_plus = b0.add(&bz);
    let h_minus = b0.sub(&bz);
    let mut u_plus = CDdMatrix::identity(d);
    let mut u_minus = CDdMatrix::identity(d);
    for (dt, sign) in seq.intervals_dd() {
        let (hp, hm) = if sign > 0.0 { (&h_plus, &h_minus) } else { (&h_minus, &h_plus) };
        let factor = CDd::new(Dd::ZERO, -dt);
        u_plus = hp.scale(factor).exp().matmul(&u_plus);
        u_minus = hm.scale(factor).exp().matmul(&u_minus);
    }
    let half = CDd::new(Dd::from_f64(0.5), Dd::ZERO);
    SplitPropagator {
        b_plus: u_plus.add(&u_minus).scale(half).to_c64(),
        b_minus: u_plus.sub(&u_minus).scale(half).to_c64(),
    }
}

/// Schrödinger-picture propagator with explicit pulses `exp(-i pi/2 sigma_x)`
/// between free evolutions, mapped back to the toggling frame by
/// `U_DD(T)^dagger`. Used to cross-check [`toggling_propagator`].
pub fn schrodinger_frame_propagator(bath: &BathModel, seq: &PulseSequence) -> Result<CMatrix, SimError> {
    let h = bath.hamiltonian();
    let n = 2 * bath.dim;
    let pulse = kron(&pauli_x(), &identity(bath.dim)).scale(1.0) * c(0.0, -1.0);
    let mut u = identity(n);
    let mut u_dd = identity(n);
    for (k, (dt, _)) in seq.intervals().into_iter().enumerate() {
        if k > 0 {
            u = &pulse * u;
            u_dd = &pulse * u_dd;
        }
        u = linops::hermitian_exp(&h, c(0.0, -dt))? * u;
    }
    Ok(u_dd.adjoint() * u)
}

/// `b_ab = tr[B_a rho B_b^dagger]` for `a, b` in `{+, -}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlations {
    pub pp: Complex64,
    pub pm: Complex64,
    pub mp: Complex64,
    pub mm: Complex64,
}

impl Correlations {
    /// Right-hand side of the four-term triangle bound on `2D`, halved.
    pub fn four_term_bound(&self) -> f64 {
        0.5 * ((self.pp - 1.0).norm() + self.pm.norm() + self.mp.norm() + self.mm.norm())
    }

    /// `|b_+-| + |b_--|`.
    pub fn two_term_bound(&self) -> f64 {
        self.pm.norm() + self.mm.norm()
    }
}

pub fn correlation_functions(
    split: &SplitPropagator,
    rho_b: &DensityOperator,
) -> Result<Correlations, SimError> {
    let d = split.b_plus.nrows();
    if rho_b.dim() != d {
        return Err(LinopsError::DimensionMismatch(d, rho_b.dim()).into());
    }
    let rho = rho_b.matrix();
    let b = |x: &CMatrix, y: &CMatrix| trace(&(x * rho * y.adjoint()));
    let (p, m) = (&split.b_plus, &split.b_minus);
    Ok(Correlations {
        pp: b(p, p),
        pm: b(p, m),
        mp: b(m, p),
        mm: b(m, m),
    })
}

fn qubit_projector(psi: &DVector<Complex64>) -> Result<DensityOperator, SimError> {
    if psi.len() != 2 {
        return Err(LinopsError::DimensionMismatch(psi.len(), 2).into());
    }
    let n = psi.norm();
    if !((n - 1.0).abs() < 1e-10) {
        return Err(SimError::InvalidParameter(format!("qubit state has norm {n}, expected 1")));
    }
    Ok(DensityOperator::pure(psi)?)
}

/// Reduced qubit state `tr_B[U (|psi><psi| ⊗ rho_B) U^dagger]` for a given split propagator.
pub fn reduced_qubit_state(
    split: &SplitPropagator,
    psi: &DVector<Complex64>,
    rho_b: &DensityOperator,
) -> Result<CMatrix, SimError> {
    let p = qubit_projector(psi)?;
    let u = split.full();
    let joint = &u * kron(p.matrix(), rho_b.matrix()) * u.adjoint();
    Ok(partial_trace_bath_matrix(&joint, rho_b.dim())?)
}

/// Right side of the explicit reduced-state identity:
/// `(b++ - 1) P + b+- P sz + b-+ sz P + b-- sz P sz` with `P = |psi><psi|`.
pub fn four_term_operator(corr: &Correlations, psi: &DVector<Complex64>) -> Result<CMatrix, SimError> {
    let p = qubit_projector(psi)?.into_matrix();
    let z = pauli_z();
    Ok(p.clone() * (corr.pp - 1.0) + &p * &z * corr.pm + &z * &p * corr.mp + &z * &p * &z * corr.mm)
}

/// Trace distance between the decoupled qubit and its ideal (unchanged) state.
pub fn protected_distance(
    bath: &BathModel,
    seq: &PulseSequence,
    psi: &DVector<Complex64>,
    rho_b: &DensityOperator,
) -> Result<f64, SimError> {
    let split = toggling_propagator(bath, seq)?;
    distance_from_split(&split, psi, rho_b)
}

/// Distance from a split propagator.
///
/// Populations are conserved, so the reduced state differs from `|psi><psi|`
/// only in its coherence, by the factor `tr[U_+ rho U_-^dagger] - 1
/// = 2 (b_-+ - b_--)`. This gives `D = 2 |psi_0 psi_1| |b_-+ - b_--|` without
/// the cancellation against 1 of the explicit reduced state.
pub fn distance_from_split(
    split: &SplitPropagator,
    psi: &DVector<Complex64>,
    rho_b: &DensityOperator,
) -> Result<f64, SimError> {
    qubit_projector(psi)?;
    let corr = correlation_functions(split, rho_b)?;
    let weight = 2.0 * psi[0].norm() * psi[1].norm();
    Ok((weight * (corr.mp - corr.mm).norm()).min(1.0))
}

/// Distance computed from the explicit reduced density matrix.
pub fn distance_from_reduced_state(
    split: &SplitPropagator,
    psi: &DVector<Complex64>,
    rho_b: &DensityOperator,
) -> Result<f64, SimError> {
    let rho_s = reduced_qubit_state(split, psi, rho_b)?;
    let ideal = qubit_projector(psi)?;
    Ok((0.5 * trace_norm(&(rho_s - ideal.matrix()))).min(1.0))
}

/// How the initial qubit state of each trial is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Haar-random pure state.
    #[default]
    Haar,
    /// `|+> = (|0> + |1>)/sqrt(2)`, maximally sensitive to dephasing.
    PlusX,
}

/// One bound-verification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub bath_dim: usize,
    pub n_pulses: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub initial_state: InitialState,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            bath_dim: 4,
            n_pulses: 4,
            eta: 1.0,
            epsilon: 0.1,
            seed: 7,
            trials: 100,
            initial_state: InitialState::Haar,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(MIN_BATH_DIM..=MAX_BATH_DIM).contains(&self.bath_dim) {
            return Err(SimError::BathDimension(self.bath_dim));
        }
        if self.trials == 0 {
            return Err(SimError::InvalidParameter("trials must be >= 1".into()));
        }
        for (name, x) in [("eta", self.eta), ("epsilon", self.epsilon)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(SimError::InvalidParameter(format!("{name} = {x}")));
            }
        }
        Ok(())
    }
}

/// Magnitudes and phases of one trial's correlation functions, as
/// `[re, im]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationRecord {
    pub pp: [f64; 2],
    pub pm: [f64; 2],
    pub mp: [f64; 2],
    pub mm: [f64; 2],
}

impl From<Correlations> for CorrelationRecord {
    fn from(c: Correlations) -> Self {
        let pair = |z: Complex64| [z.re, z.im];
        CorrelationRecord {
            pp: pair(c.pp),
            pm: pair(c.pm),
            mp: pair(c.mp),
            mm: pair(c.mm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    #[serde(rename = "D")]
    pub distance: f64,
    #[serde(rename = "delta_N")]
    pub delta: f64,
    pub bound: f64,
    pub b_norm_minus: f64,
    /// `min(bound - D, Delta_N - ||B_-||)`
    pub margin: f64,
    pub b: CorrelationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialRecord>,
    pub min_margin: f64,
    pub pass: bool,
    /// Seed of the first trial whose margin fell below `-INEQUALITY_TOL`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_seed: Option<u64>,
}

fn run_trial(spec: &ExperimentSpec, seq: &PulseSequence, delta: f64, index: usize) -> Result<TrialRecord, SimError> {
    let seed = trial_seed(spec.seed, index as u64);
    let bath = random_bath(spec.bath_dim, spec.epsilon, spec.eta * spec.epsilon, seed)?;
    let mut rng = rng_from_seed(seed ^ 0x5EED_0F57_A7E5);
    let psi = match spec.initial_state {
        InitialState::Haar => random::random_pure_state(&mut rng, 2),
        InitialState::PlusX => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            DVector::from_column_slice(&[c(s, 0.0), c(s, 0.0)])
        }
    };
    let rho_b = random::random_density(&mut rng, spec.bath_dim);
    let split = toggling_propagator(&bath, seq)?;
    let corr = correlation_functions(&split, &rho_b)?;
    let distance = distance_from_split(&split, &psi, &rho_b)?;
    let b_norm_minus = split.b_minus_norm();
    let bound = bounds::distance_bound_from_delta(delta);
    let margin = (bound - distance).min(delta - b_norm_minus);
    Ok(TrialRecord {
        seed,
        distance,
        delta,
        bound,
        b_norm_minus,
        margin,
        b: corr.into(),
    })
}

/// Draw baths with `J0 = eps`, `Jz = eta eps` at `T = 1`, and check
/// `D <= min(1, Delta + Delta^2)` and `||B_-|| <= Delta` on every trial.
pub fn verify_bound(spec: &ExperimentSpec) -> Result<VerificationReport, SimError> {
    spec.validate()?;
    let seq = if spec.n_pulses == 0 {
        PulseSequence::free(1.0)?
    } else {
        udd_sequence(spec.n_pulses, 1.0)?
    };
    let params = BoundParams::new(spec.n_pulses, spec.eta, spec.epsilon)?;
    let delta = match bounds::delta_bound(&params) {
        Ok(d) => d,
        Err(BoundError::Overflow { .. }) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, &seq, delta, i))
        .collect::<Result<Vec<_>, _>>()?;
    let min_margin = trials.iter().map(|t| t.margin).fold(f64::INFINITY, f64::min);
    let failed_seed = trials
        .iter()
        .find(|t| !(t.margin >= -INEQUALITY_TOL))
        .map(|t| t.seed);
    Ok(VerificationReport {
        spec: spec.clone(),
        trials,
        min_margin,
        pass: failed_seed.is_none(),
        failed_seed,
    })
}

/// Least-squares fit of `ln ||B_-(T)||` against `ln T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(T, ||B_-(T)||)` samples.
    pub points: Vec<(f64, f64)>,
}

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = points - 1;
    (0..points)
        .map(|k| match k {
            0 => lo,
            k if k == last => hi,
            k => (a + (b - a) * k as f64 / last as f64).exp(),
        })
        .collect()
}

/// Fit the small-`T` power law of `||B_-(T)||` for a sequence family.
pub fn order_scaling_fit_with(
    bath: &BathModel,
    make_seq: impl Fn(f64) -> Result<PulseSequence, SequenceError>,
    t_grid: &[f64],
) -> Result<ScalingFit, SimError> {
    if t_grid.len() < 2 {
        return Err(SimError::InvalidParameter("need at least two times".into()));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let seq = make_seq(t)?;
        let norm = toggling_propagator_precise(bath, &seq).b_minus_norm();
        if !(norm > DEGENERATE_NORM_FLOOR) {
            return Err(SimError::DegenerateFit { time: t, norm });
        }
        points.push((t, norm));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        points,
    })
}

/// Fit for UDD(N); the slope should approach `N + 1`.
pub fn order_scaling_fit(
    bath: &BathModel,
    n_pulses: usize,
    t_grid: &[f64],
) -> Result<ScalingFit, SimError> {
    order_scaling_fit_with(bath, |t| udd_sequence(n_pulses, t), t_grid)
}
