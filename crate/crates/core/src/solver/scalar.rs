use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Arithmetic used by the simplex: exact rationals or tolerant floats.
pub(crate) trait Scalar: Clone + Debug + Send + Sync {
    const EXACT: bool;

    fn zero() -> Self;
    fn from_f64(v: f64) -> Self;
    fn from_big(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;
    fn to_exact(&self) -> Option<BigRational>;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;

    /// Sign, treating magnitudes within tolerance as zero.
    fn sign(&self) -> i8;

    fn is_zero_tol(&self) -> bool {
        self.sign() == 0
    }

    /// `self < o` beyond tolerance.
    fn lt(&self, o: &Self) -> bool {
        self.sub(o).sign() < 0
    }

    /// `|self - o|` within tolerance.
    fn approx_eq(&self, o: &Self) -> bool {
        self.sub(o).sign() == 0
    }

    fn is_integer(&self) -> bool;
}

pub(crate) const FLOAT_TOL: f64 = 1e-9;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_big(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_exact(&self) -> Option<BigRational> {
        None
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sign(&self) -> i8 {
        if *self > FLOAT_TOL {
            1
        } else if *self < -FLOAT_TOL {
            -1
        } else {
            0
        }
    }
    fn is_integer(&self) -> bool {
        (self - self.round()).abs() <= FLOAT_TOL
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn from_f64(v: f64) -> Self {
        exact_f64(v)
    }
    fn from_big(r: &BigRational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_exact(&self) -> Option<BigRational> {
        Some(self.clone())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sign(&self) -> i8 {
        if self.is_zero() {
            0
        } else if self.is_positive() {
            1
        } else {
            -1
        }
    }
    fn is_integer(&self) -> bool {
        BigRational::is_integer(self)
    }
}

/// Exact rational value of a finite float.
pub fn exact_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite objective coefficient")
}
