use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::*;

/// Single-direction forward-mode dual number `re + du·ε`, `ε² = 0`.
///
/// Nesting `Dual<Dual<f64>>` yields mixed second directional derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub du: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, du: T) -> Self {
        Dual { re, du }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, du: T::zero() }
    }

    fn chain(&self, t: Taylor2<T>) -> Self {
        Dual { du: t.f1 * self.du.clone(), re: t.f0 }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, du: self.du + o.du }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, du: self.du - o.du }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            du: self.re.clone() * o.du + self.du * o.re.clone(),
            re: self.re * o.re,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.re.recip();
        let re = self.re * inv.clone();
        Dual {
            du: (self.du - re.clone() * o.du) * inv,
            re,
        }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.du.all_finite()
    }
    fn powf(&self, n: f64) -> Self {
        self.chain(taylor_powf(&self.re, n))
    }
    fn sin(&self) -> Self {
        self.chain(taylor_sin(&self.re))
    }
    fn cos(&self) -> Self {
        self.chain(taylor_cos(&self.re))
    }
    fn tan(&self) -> Self {
        self.chain(taylor_tan(&self.re))
    }
    fn exp(&self) -> Self {
        self.chain(taylor_exp(&self.re))
    }
    fn ln(&self) -> Self {
        self.chain(taylor_ln(&self.re))
    }
    fn sqrt(&self) -> Self {
        self.chain(taylor_sqrt(&self.re))
    }
    fn sinh(&self) -> Self {
        self.chain(taylor_sinh(&self.re))
    }
    fn cosh(&self) -> Self {
        self.chain(taylor_cosh(&self.re))
    }
    fn abs(&self) -> Self {
        self.chain(taylor_abs(&self.re))
    }
    fn scale(&self, c: f64) -> Self {
        Dual { re: self.re.scale(c), du: self.du.scale(c) }
    }
    fn recip(&self) -> Self {
        self.chain(taylor_recip(&self.re))
    }
}
