use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number type the expression evaluator and the mechanics routines are generic over.
///
/// Implemented by `f64` and by the forward-mode dual types [`Dual`](super::Dual) and
/// [`Dual2`](super::Dual2), which nest: `Dual2<Dual<f64>>` carries a Hessian whose
/// entries are themselves differentiated along one extra direction.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;

    /// Real (zeroth-order) part.
    fn value(&self) -> f64;

    /// True when every stored component is finite.
    fn all_finite(&self) -> bool;

    /// `self^n` for a constant real exponent.
    fn powf(&self, n: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn abs(&self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::from_f64(c)
    }

    fn recip(&self) -> Self {
        Self::from_f64(1.0) / self.clone()
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn powf(&self, n: f64) -> Self {
        if n == 2.0 {
            self * self
        } else if n.fract() == 0.0 && n.abs() < 64.0 {
            f64::powi(*self, n as i32)
        } else {
            f64::powf(*self, n)
        }
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

/// First and second derivative of a unary function, expressed in the inner scalar.
pub(crate) struct Taylor2<T> {
    pub f0: T,
    pub f1: T,
    pub f2: T,
}

pub(crate) fn taylor_sin<T: Scalar>(a: &T) -> Taylor2<T> {
    let s = a.sin();
    Taylor2 { f1: a.cos(), f2: -s.clone(), f0: s }
}

pub(crate) fn taylor_cos<T: Scalar>(a: &T) -> Taylor2<T> {
    let c = a.cos();
    Taylor2 { f1: -a.sin(), f2: -c.clone(), f0: c }
}

pub(crate) fn taylor_tan<T: Scalar>(a: &T) -> Taylor2<T> {
    let t = a.tan();
    let sec2 = T::from_f64(1.0) + t.clone() * t.clone();
    Taylor2 { f2: t.scale(2.0) * sec2.clone(), f1: sec2, f0: t }
}

pub(crate) fn taylor_exp<T: Scalar>(a: &T) -> Taylor2<T> {
    let e = a.exp();
    Taylor2 { f0: e.clone(), f1: e.clone(), f2: e }
}

pub(crate) fn taylor_ln<T: Scalar>(a: &T) -> Taylor2<T> {
    let r = a.recip();
    Taylor2 { f0: a.ln(), f2: -(r.clone() * r.clone()), f1: r }
}

pub(crate) fn taylor_sqrt<T: Scalar>(a: &T) -> Taylor2<T> {
    let s = a.sqrt();
    let f1 = s.recip().scale(0.5);
    let f2 = -(f1.clone() / a.clone()).scale(0.5);
    Taylor2 { f0: s, f1, f2 }
}

pub(crate) fn taylor_sinh<T: Scalar>(a: &T) -> Taylor2<T> {
    let s = a.sinh();
    Taylor2 { f1: a.cosh(), f2: s.clone(), f0: s }
}

pub(crate) fn taylor_cosh<T: Scalar>(a: &T) -> Taylor2<T> {
    let c = a.cosh();
    Taylor2 { f1: a.sinh(), f2: c.clone(), f0: c }
}

pub(crate) fn taylor_abs<T: Scalar>(a: &T) -> Taylor2<T> {
    let sign = if a.value() < 0.0 { -1.0 } else { 1.0 };
    Taylor2 { f0: a.abs(), f1: T::from_f64(sign), f2: T::zero() }
}

pub(crate) fn taylor_powf<T: Scalar>(a: &T, n: f64) -> Taylor2<T> {
    if n == 0.0 {
        return Taylor2 { f0: T::from_f64(1.0), f1: T::zero(), f2: T::zero() };
    }
    if n == 1.0 {
        return Taylor2 { f0: a.clone(), f1: T::from_f64(1.0), f2: T::zero() };
    }
    if n == 2.0 {
        return Taylor2 { f0: a.clone() * a.clone(), f1: a.scale(2.0), f2: T::from_f64(2.0) };
    }
    let f2 = a.powf(n - 2.0).scale(n * (n - 1.0));
    let f1 = a.powf(n - 1.0).scale(n);
    Taylor2 { f0: a.powf(n), f1, f2 }
}

pub(crate) fn taylor_recip<T: Scalar>(a: &T) -> Taylor2<T> {
    let r = a.recip();
    let r2 = r.clone() * r.clone();
    Taylor2 { f2: r2.clone() * r.scale(2.0), f1: -r2, f0: r }
}
