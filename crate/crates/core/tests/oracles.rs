//! Cross-checks of library results against independent computations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use udd_lab::bounds::{self, BoundParams, FixedIntervalParams};
use udd_lab::dyson::trig::{trig_integrate, TrigKind, TrigTerm};
use udd_lab::dyson::{self, AlphaWord, Letter};
use udd_lab::linops::{self, c, identity, CMatrix, DensityOperator};
use udd_lab::random::{self, rng_from_seed};
use udd_lab::sequence::{periodic_sequence, udd_sequence, PulseSequence};
use udd_lab::simulator::{self, random_bath};

// ---------- bounds ----------

fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `S` as the literal double sum over orders and z-counts.
fn s_double_sum(j0: f64, jz: f64, t: f64) -> f64 {
    let mut total = 0.0;
    for n in 0..400usize {
        let mut inner = 0.0;
        for k in 0..=n {
            let ln = (n - k) as f64 * j0.ln() + k as f64 * jz.ln() - ln_fact(k) - ln_fact(n - k);
            inner += ln.exp();
        }
        let term = t.powi(n as i32) * inner;
        total += term;
        if n > 10 && term < 1e-18 * total {
            break;
        }
    }
    total
}

#[test]
fn bounding_series_matches_double_sum() {
    for &(j0, jz, t) in &[(1.0, 0.5, 1.0), (0.2, 3.0, 2.0), (2.0, 0.01, 0.7), (1.5, 1.5, 3.0)] {
        let got = bounds::bounding_series_s(j0, jz, t).unwrap();
        let want = s_double_sum(j0, jz, t);
        assert!((got / want - 1.0).abs() < 1e-12, "{got} vs {want}");
    }
}

/// `p_l` from the binomial closed form `((1+eta)^l - (1-eta)^l) / (2 l!)`,
/// valid where it does not cancel badly.
fn p_binomial(l: usize, eta: f64) -> f64 {
    ((1.0 + eta).powi(l as i32) - (1.0 - eta).powi(l as i32)) / 2.0 / ln_fact(l).exp()
}

#[test]
fn p_coefficients_match_binomial_form() {
    for l in 1..25 {
        for &eta in &[0.5, 1.0, 3.0, 10.0] {
            let got = bounds::p_coefficient(l, eta);
            let want = p_binomial(l, eta);
            assert!((got / want - 1.0).abs() < 1e-12, "l={l} eta={eta}");
        }
    }
}

/// `Delta_N` summed term by term past the peak of `p_n eps^n`, in log space.
fn ln_delta_oracle(n: usize, eta: f64, eps: f64) -> f64 {
    let mut lf = vec![0.0f64];
    for k in 1..5000 {
        lf.push(lf[k - 1] + (k as f64).ln());
    }
    let ln_p = |l: usize| {
        // sum over odd k of eta^k / (k! (l-k)!)
        let terms: Vec<f64> = (1..=l).step_by(2).map(|k| k as f64 * eta.ln() - lf[k] - lf[l - k]).collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    };
    let mut terms = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut l = n + 1;
    loop {
        let t = ln_p(l) + l as f64 * eps.ln();
        let falling = terms.last().is_some_and(|&prev| t < prev);
        terms.push(t);
        peak = peak.max(t);
        if l > n + 5 && falling && t < peak - 45.0 {
            break;
        }
        l += 1;
    }
    peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln()
}

#[test]
fn delta_matches_tail_series() {
    for &n in &[0usize, 1, 2, 5, 10, 20] {
        for &eta in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            for &eps in &[1e-4, 1e-3, 0.05, 0.5, 2.0, 10.0] {
                let params = BoundParams::new(n, eta, eps).unwrap();
                let got = bounds::ln_delta_bound(&params).unwrap();
                let want = ln_delta_oracle(n, eta, eps);
                // compare in log space: absolute ln error is relative error
                assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "N={n} eta={eta} eps={eps}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn fixed_interval_uses_csc_squared() {
    for n in 1..8usize {
        let q = 1.0 / (PI / (2.0 * n as f64 + 2.0)).sin().powi(2);
        let eps1 = 0.01;
        let fixed = bounds::delta_bound_fixed_interval(&FixedIntervalParams::new(n, 0.3, eps1).unwrap()).unwrap();
        let direct = bounds::delta_bound(&BoundParams::new(n, 0.3, eps1 * q).unwrap()).unwrap();
        assert!((fixed / direct - 1.0).abs() < 1e-13);
        // first interval of UDD(n) with T = q t1 is t1
        let seq = udd_sequence(n, q * 0.25).unwrap();
        assert!((seq.instants()[0] - 0.25).abs() < 1e-14);
    }
}

// ---------- linops ----------

fn random_matrix(seed: u64, rows: usize, cols: usize) -> CMatrix {
    random::ginibre(&mut rng_from_seed(seed), rows, cols)
}

/// Largest singular value by power iteration on `A^dagger A`.
fn power_sup_norm(a: &CMatrix) -> f64 {
    let m = a.adjoint() * a;
    let mut v = DVector::from_element(a.ncols(), c(1.0, 0.3));
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w = &m * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        lambda = n;
        v = w / c(n, 0.0);
    }
    lambda.sqrt()
}

#[test]
fn norms_match_gram_oracles() {
    for seed in 0..20 {
        let a = random_matrix(seed, 4, 4);
        let sup = linops::sup_norm(&a);
        assert!((sup / power_sup_norm(&a) - 1.0).abs() < 1e-8, "seed {seed}");
        // trace norm from eigenvalues of the Gram matrix
        let gram = a.adjoint() * &a;
        let gram = (&gram + gram.adjoint()).scale(0.5);
        let eig = gram.symmetric_eigen();
        let tn: f64 = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).sum();
        assert!((linops::trace_norm(&a) / tn - 1.0).abs() < 1e-10);
    }
}

/// `exp(A)` by scaling, a Taylor series and squaring.
fn taylor_exp(a: &CMatrix) -> CMatrix {
    let mut squarings = 0;
    let mut scaled = a.clone();
    while scaled.norm() > 0.25 {
        scaled /= c(2.0, 0.0);
        squarings += 1;
    }
    let n = a.nrows();
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..30 {
        term = &term * &scaled / c(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn hermitian_exp_matches_taylor() {
    let mut rng = rng_from_seed(9);
    for d in [2, 3, 5, 8] {
        let h = random::random_hermitian(&mut rng, d);
        for &t in &[0.01, 0.7, 3.0] {
            let got = linops::hermitian_exp(&h, c(0.0, -t)).unwrap();
            let want = taylor_exp(&(h.clone() * c(0.0, -t)));
            assert!((got - want).norm() < 1e-11, "d={d} t={t}");
        }
    }
}

fn bloch(rho: &CMatrix) -> [f64; 3] {
    [2.0 * rho[(0, 1)].re, -2.0 * rho[(0, 1)].im, (rho[(0, 0)] - rho[(1, 1)]).re]
}

#[test]
fn qubit_distance_and_fidelity_oracles() {
    let mut rng = rng_from_seed(4);
    for _ in 0..50 {
        let r1 = random::random_density(&mut rng, 2);
        let r2 = random::random_density(&mut rng, 2);
        let (a, b) = (bloch(r1.matrix()), bloch(r2.matrix()));
        let dist = 0.5 * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        assert!((linops::trace_distance(&r1, &r2).unwrap() - dist).abs() < 1e-12);
        // qubit fidelity: F^2 = tr(r1 r2) + 2 sqrt(det r1 det r2)
        let det = |m: &CMatrix| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
        let tr12 = linops::trace(&(r1.matrix() * r2.matrix())).re;
        let f = (tr12 + 2.0 * (det(r1.matrix()) * det(r2.matrix())).max(0.0).sqrt()).sqrt();
        assert!((linops::fidelity(&r1, &r2).unwrap() - f).abs() < 1e-9);
    }
    let psi = random::random_pure_state(&mut rng, 3);
    let phi = random::random_pure_state(&mut rng, 3);
    let overlap = psi.dotc(&phi).norm();
    let f = linops::fidelity(&DensityOperator::pure(&psi).unwrap(), &DensityOperator::pure(&phi).unwrap()).unwrap();
    assert!((f - overlap).abs() < 1e-7);
}

// ---------- simulator ----------

/// Full toggling-frame propagator from repeated Taylor steps of the
/// qubit-bath Hamiltonian on each interval.
fn stepped_toggling(bath: &simulator::BathModel, seq: &PulseSequence, steps_per_interval: usize) -> CMatrix {
    let z = linops::pauli_z();
    let mut u = identity(2 * bath.dim());
    for (dt, sign) in seq.intervals() {
        let h = linops::kron(&identity(2), bath.b0()) + linops::kron(&z, bath.bz()) * c(sign, 0.0);
        let step = taylor_exp(&(h * c(0.0, -dt / steps_per_interval as f64)));
        for _ in 0..steps_per_interval {
            u = &step * u;
        }
    }
    u
}

#[test]
fn toggling_propagator_matches_stepping() {
    let bath = random_bath(3, 1.2, 0.9, 31).unwrap();
    for seq in [udd_sequence(3, 1.5).unwrap(), periodic_sequence(2, 0.7).unwrap()] {
        let split = simulator::toggling_propagator(&bath, &seq).unwrap();
        let want = stepped_toggling(&bath, &seq, 7);
        assert!((split.full() - want).norm() < 1e-11);
    }
}

#[test]
fn reduced_state_four_term_identity() {
    let mut rng = rng_from_seed(12);
    for seed in 0..20 {
        let bath = random_bath(4, 0.8, 0.6, seed).unwrap();
        let seq = udd_sequence(2, 1.0).unwrap();
        let split = simulator::toggling_propagator(&bath, &seq).unwrap();
        let rho = random::random_density(&mut rng, 4);
        let psi = random::random_pure_state(&mut rng, 2);
        let corr = simulator::correlation_functions(&split, &rho).unwrap();
        let lhs = simulator::reduced_qubit_state(&split, &psi, &rho).unwrap() - DensityOperator::pure(&psi).unwrap().into_matrix();
        let rhs = simulator::four_term_operator(&corr, &psi).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
        let d1 = simulator::distance_from_split(&split, &psi, &rho).unwrap();
        let d2 = simulator::distance_from_reduced_state(&split, &psi, &rho).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }
}

// ---------- dyson ----------

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Nested integral `g_k(s)` by Gauss-Legendre quadrature split at the
/// breakpoints; exact for the polynomial pieces up to degree 9.
struct Quadrature<'a> {
    breaks: Vec<f64>,
    word: &'a [Letter],
}

impl Quadrature<'_> {
    fn f(&self, letter: Letter, s: f64) -> f64 {
        if letter == Letter::Zero {
            return 1.0;
        }
        let idx = self.breaks[1..self.breaks.len() - 1].partition_point(|&b| b <= s);
        if idx % 2 == 0 { 1.0 } else { -1.0 }
    }

    fn g(&self, k: usize, s: f64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let letter = self.word[k - 1];
        let mut total = 0.0;
        for w in self.breaks.windows(2) {
            let (a, b) = (w[0], w[1].min(s));
            if b <= a {
                break;
            }
            let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
            for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let u = mid + half * x;
                total += wt * half * self.f(letter, u) * self.g(k - 1, u);
            }
        }
        total
    }
}

fn f_alpha_quadrature(word: &AlphaWord, seq: &PulseSequence) -> f64 {
    let mut breaks = vec![0.0];
    breaks.extend(seq.instants().iter().map(|t| t / seq.total_time()));
    breaks.push(1.0);
    let q = Quadrature { breaks, word: word.letters() };
    q.g(word.len(), 1.0)
}

#[test]
fn f_alpha_matches_quadrature() {
    let seqs = [
        udd_sequence(3, 1.0).unwrap(),
        udd_sequence(4, 1.0).unwrap(),
        periodic_sequence(3, 1.0).unwrap(),
        PulseSequence::new(1.0, vec![0.1, 0.35, 0.4]).unwrap(),
    ];
    for seq in &seqs {
        for n in 1..=4 {
            for word in AlphaWord::all_of_length(n) {
                let exact = dyson::f_alpha_exact(&word, seq).unwrap();
                let quad = f_alpha_quadrature(&word, seq);
                assert!((exact - quad).abs() < 1e-12, "{word}: {exact} vs {quad}");
            }
        }
    }
    let w: AlphaWord = "z0z".parse().unwrap();
    let udd3 = udd_sequence(3, 1.0).unwrap();
    assert!((f_alpha_quadrature(&w, &udd3) + 0.010_110_028_629_970_214).abs() < 1e-13);
}

#[test]
fn partial_sum_error_scales_with_order() {
    let bath = random_bath(3, 1.0, 0.7, 5).unwrap();
    for max_order in 1..=4usize {
        let err_at = |t: f64| {
            let seq = udd_sequence(2, t).unwrap();
            let exact = simulator::toggling_propagator_precise(&bath, &seq).full();
            (dyson::dyson_partial_sum(&bath, &seq, max_order).unwrap() - exact).norm()
        };
        let ratio = err_at(0.2) / err_at(0.02);
        let expected = 10f64.powi(max_order as i32 + 1);
        assert!(ratio > 0.5 * expected && ratio < 2.0 * expected, "order {max_order}: ratio {ratio}");
    }
}

// ---------- trig ----------

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Trig polynomial as `frequency >= 0 -> (sin coefficient, cos coefficient)`.
type Fourier = BTreeMap<i64, (BigRational, BigRational)>;

fn add_term(f: &mut Fourier, kind: TrigKind, freq: i64, coef: BigRational) {
    let (k, sign) = if freq < 0 { (-freq, -1) } else { (freq, 1) };
    let e = f.entry(k).or_insert_with(|| (BigRational::zero(), BigRational::zero()));
    match kind {
        TrigKind::Sine => e.0 += coef * rat(sign),
        TrigKind::Cosine => e.1 += coef,
    }
}

fn canonical(mut f: Fourier) -> Fourier {
    if let Some(e) = f.get_mut(&0) {
        e.0 = BigRational::zero();
    }
    f.retain(|_, (s, c)| !(s.is_zero() && c.is_zero()));
    f
}

/// `term * sin(m theta) * weight` expanded with product-to-sum identities.
fn multiply_sin(f: &Fourier, m: i64, weight: i64) -> Fourier {
    let mut out = Fourier::new();
    let half = BigRational::new(BigInt::from(weight), BigInt::from(2));
    for (&a, (s, c)) in f {
        // cos(a) sin(m) = [sin(a+m) - sin(a-m)]/2 ; sin(a) sin(m) = [cos(a-m) - cos(a+m)]/2
        add_term(&mut out, TrigKind::Sine, a + m, c * &half);
        add_term(&mut out, TrigKind::Sine, a - m, -(c * &half));
        add_term(&mut out, TrigKind::Cosine, a - m, s * &half);
        add_term(&mut out, TrigKind::Cosine, a + m, -(s * &half));
    }
    canonical(out)
}

fn derivative(terms: &[TrigTerm], n_bar: i64) -> Fourier {
    let mut out = Fourier::new();
    for t in terms {
        let k = t.frequency(n_bar);
        match t.kind {
            TrigKind::Sine => add_term(&mut out, TrigKind::Cosine, k, &t.coefficient * rat(k)),
            TrigKind::Cosine => add_term(&mut out, TrigKind::Sine, k, -(&t.coefficient * rat(k))),
        }
    }
    canonical(out)
}

fn integrand(term: &TrigTerm, with_fz: bool, r_o: i64, n_bar: i64) -> Fourier {
    let mut f = Fourier::new();
    add_term(&mut f, term.kind, term.frequency(n_bar), term.coefficient.clone());
    let f = canonical(f);
    if with_fz {
        let g = multiply_sin(&f, r_o * n_bar, 2);
        multiply_sin(&g, 1, 2)
    } else {
        multiply_sin(&f, 1, 2)
    }
}

#[test]
fn trig_rules_differentiate_back() {
    let mut cases = 0;
    for n_bar in 2..=6i64 {
        for q in -(n_bar - 1)..n_bar {
            for r in -3..=3i64 {
                for kind in [TrigKind::Sine, TrigKind::Cosine] {
                    let parity_ok = (kind == TrigKind::Cosine) == (r.rem_euclid(2) == 0);
                    if !parity_ok {
                        continue;
                    }
                    let term = TrigTerm::new(BigRational::new(BigInt::from(3), BigInt::from(7)), kind, q, r);
                    for (with_fz, r_o) in [(false, 1), (true, 1), (true, 3), (true, 5)] {
                        match trig_integrate(&term, with_fz, r_o, n_bar) {
                            Ok(out) => {
                                assert_eq!(
                                    derivative(&out, n_bar),
                                    integrand(&term, with_fz, r_o, n_bar),
                                    "{term} fz={with_fz} r_o={r_o} n_bar={n_bar}"
                                );
                                cases += 1;
                            }
                            Err(_) => {
                                // only outputs leaving |q| < n_bar, or secular inputs, may be refused
                                let a = term.frequency(n_bar);
                                let secular = kind == TrigKind::Sine && !with_fz && a.abs() == 1;
                                let edge = q.abs() == n_bar - 1;
                                assert!(secular || edge || with_fz, "{term} refused");
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(cases > 300);
}

#[test]
fn special_cases_match_direct_antiderivatives() {
    // 2 cos(theta) sin(theta) = sin(2 theta), antiderivative -cos(2 theta)/2
    let t = TrigTerm::new(rat(1), TrigKind::Cosine, 1, 0);
    let out = trig_integrate(&t, false, 1, 4).unwrap();
    assert_eq!(out, vec![TrigTerm::new(BigRational::new(BigInt::from(-1), BigInt::from(2)), TrigKind::Cosine, 2, 0)]);
    // 2 sin(theta) = d/dtheta(-2 cos theta): outputs sum to -2 cos theta
    let out = trig_integrate(&TrigTerm::unit(), false, 1, 4).unwrap();
    let total: BigRational = out.iter().map(|t| t.coefficient.clone()).sum();
    assert_eq!(total, rat(-2));
    assert!(out.iter().all(|t| t.frequency(4).abs() == 1 && t.kind == TrigKind::Cosine));
    // sine-type with f_z, r = r_o, |q| = 1: the cos((a - b) theta) piece hits the constant case
    let t = TrigTerm::new(rat(1), TrigKind::Sine, 1, 1);
    let out = trig_integrate(&t, true, 1, 3).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|t| t.kind == TrigKind::Cosine && !t.coefficient.is_zero()));
}

#[test]
fn dyson_term_norm_bound_on_small_bath() {
    let bath = random_bath(2, 0.9, 0.4, 77).unwrap();
    let seq = udd_sequence(3, 1.3).unwrap();
    for n in 0..=6 {
        let term = dyson::dyson_order_term(&bath, &seq, n).unwrap();
        let bound: f64 = (0..=n)
            .map(|k| 1.3f64.powi(n as i32) * 0.9f64.powi((n - k) as i32) * 0.4f64.powi(k as i32) / (ln_fact(k) + ln_fact(n - k)).exp())
            .sum();
        assert!(linops::sup_norm(&term) <= bound * (1.0 + 1e-12));
    }
}
