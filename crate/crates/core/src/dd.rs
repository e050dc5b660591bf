//! Double-double arithmetic.
//!
//! A [`Dd`] is an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 32 significant decimal digits. It carries the irrational UDD
//! breakpoints and the high-precision propagator used for order-scaling fits,
//! where the quantities of interest sit far below `f64` roundoff of the
//! surrounding O(1) matrices.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

#[derive(Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };

    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_parts(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = two_sum(hi, lo);
        Dd { hi, lo }
    }

    /// Nearest `f64`.
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One Newton step on the f64 estimate doubles the precision.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let resid = (Dd::from_parts(self.hi - p, 0.0) + Dd::from_f64(self.lo) - Dd::from_f64(e)).to_f64();
        Dd::from_parts(x, resid / (2.0 * x))
    }

    /// Sine and cosine for `|x| <= pi`. The argument is halved until small,
    /// evaluated by Taylor series, then doubled back with the double-angle
    /// formulas.
    pub fn sin_cos(self) -> (Dd, Dd) {
        assert!(
            self.hi.abs() <= 3.5,
            "Dd::sin_cos expects a reduced argument, got {}",
            self.hi
        );
        const HALVINGS: u32 = 4;
        let y = self * Dd::from_f64(1.0 / (1u32 << HALVINGS) as f64);
        let y2 = y * y;
        let mut s = y;
        let mut c = Dd::ONE;
        let mut term_s = y;
        let mut term_c = Dd::ONE;
        for k in 1..30u32 {
            let a = (2 * k) as f64;
            term_s = -(term_s * y2) / Dd::from_f64(a * (a + 1.0));
            term_c = -(term_c * y2) / Dd::from_f64((a - 1.0) * a);
            s += term_s;
            c += term_c;
            if term_s.hi.abs() < 1e-36 && term_c.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..HALVINGS {
            let s2 = Dd::from_f64(2.0) * s * c;
            let c2 = c * c - s * s;
            s = s2;
            c = c2;
        }
        (s, c)
    }

    pub fn sin(self) -> Dd {
        self.sin_cos().0
    }

    pub fn cos(self) -> Dd {
        self.sin_cos().1
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl From<i64> for Dd {
    fn from(x: i64) -> Self {
        let hi = x as f64;
        let lo = (x - hi as i64) as f64;
        Dd::from_parts(hi, lo)
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, rhs: Dd) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dd {
    fn sub_assign(&mut self, rhs: Dd) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dd {
    fn mul_assign(&mut self, rhs: Dd) {
        *self = *self * rhs;
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Default, Debug, PartialEq)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ZERO: CDd = CDd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: CDd = CDd {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    pub fn new(re: Dd, im: Dd) -> Self {
        CDd { re, im }
    }

    pub fn scale(self, k: Dd) -> CDd {
        CDd::new(self.re * k, self.im * k)
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }
}

impl From<Complex64> for CDd {
    fn from(z: Complex64) -> Self {
        CDd::new(Dd::from_f64(z.re), Dd::from_f64(z.im))
    }
}

impl Add for CDd {
    type Output = CDd;
    fn add(self, rhs: CDd) -> CDd {
        CDd::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for CDd {
    type Output = CDd;
    fn sub(self, rhs: CDd) -> CDd {
        CDd::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for CDd {
    type Output = CDd;
    fn mul(self, rhs: CDd) -> CDd {
        CDd::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl AddAssign for CDd {
    fn add_assign(&mut self, rhs: CDd) {
        *self = *self + rhs;
    }
}

/// Dense square matrix of [`CDd`] entries, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CDdMatrix {
    dim: usize,
    data: Vec<CDd>,
}

impl CDdMatrix {
    pub fn zeros(dim: usize) -> Self {
        CDdMatrix {
            dim,
            data: vec![CDd::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = CDd::ONE;
        }
        m
    }

    pub fn from_c64(m: &nalgebra::DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "CDdMatrix must be square");
        let dim = m.nrows();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = CDd::from(m[(i, j)]);
            }
        }
        out
    }

    pub fn to_c64(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)].to_c64())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matmul(&self, rhs: &CDdMatrix) -> CDdMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == CDd::ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CDdMatrix) -> CDdMatrix {
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        CDdMatrix { dim: self.dim, data }
    }

    pub fn sub(&self, rhs: &CDdMatrix) -> CDdMatrix {
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        CDdMatrix { dim: self.dim, data }
    }

    pub fn scale(&self, k: CDd) -> CDdMatrix {
        CDdMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&a| a * k).collect(),
        }
    }

    /// Frobenius norm, as `f64`.
    pub fn frobenius(&self) -> f64 {
        self.data
            .iter()
            .map(|z| z.norm_sqr().to_f64())
            .sum::<f64>()
            .sqrt()
    }

    /// `exp(self)` by scaling and squaring around a Taylor series.
    pub fn exp(&self) -> CDdMatrix {
        let norm = self.frobenius();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > 0.125 {
            scaled_norm *= 0.5;
            squarings += 1;
        }
        let a = self.scale(CDd::new(Dd::from_f64(0.5f64.powi(squarings as i32)), Dd::ZERO));
        let mut result = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for k in 1..60u32 {
            term = term
                .matmul(&a)
                .scale(CDd::new(Dd::from_f64(1.0) / Dd::from_f64(k as f64), Dd::ZERO));
            result = result.add(&term);
            if term.frobenius() < 1e-36 {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

impl std::ops::Index<(usize, usize)> for CDdMatrix {
    type Output = CDd;
    fn index(&self, (i, j): (usize, usize)) -> &CDd {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CDdMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut CDd {
        &mut self.data[i * self.dim + j]
    }
}
