use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::*;

/// Truncated second-order Taylor number over `n` seeded directions.
///
/// Holds the value, the gradient and the (symmetric, stored dense) Hessian with
/// respect to the seeded variables. Empty `grad`/`hess` vectors stand for zero,
/// so literal constants never allocate.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual2<T> {
    pub value: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

impl<T: Scalar> Dual2<T> {
    pub fn constant(value: T) -> Self {
        Dual2 { value, grad: Vec::new(), hess: Vec::new() }
    }

    /// Independent variable number `index` out of `n` seeded directions.
    pub fn variable(value: T, index: usize, n: usize) -> Self {
        assert!(index < n, "seed index {index} out of range for {n} directions");
        let mut grad = vec![T::zero(); n];
        grad[index] = T::from_f64(1.0);
        Dual2 { value, grad, hess: Vec::new() }
    }

    /// Number of seeded directions, or 0 for a constant.
    pub fn directions(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self, i: usize) -> T {
        self.grad.get(i).cloned().unwrap_or_else(T::zero)
    }

    pub fn hess(&self, i: usize, j: usize) -> T {
        let n = self.grad.len();
        if self.hess.is_empty() {
            T::zero()
        } else {
            self.hess[i * n + j].clone()
        }
    }

    fn chain(self, t: Taylor2<T>) -> Self {
        let n = self.grad.len();
        if n == 0 {
            return Dual2::constant(t.f0);
        }
        let mut hess = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut h = t.f2.clone() * self.grad[i].clone() * self.grad[j].clone();
                if !self.hess.is_empty() {
                    h = h + t.f1.clone() * self.hess[i * n + j].clone();
                }
                hess.push(h);
            }
        }
        let grad = self.grad.into_iter().map(|g| t.f1.clone() * g).collect();
        Dual2 { value: t.f0, grad, hess }
    }
}

fn zip_add<T: Scalar>(a: Vec<T>, b: Vec<T>, negate_b: bool) -> Vec<T> {
    match (a.is_empty(), b.is_empty()) {
        (_, true) => a,
        (true, false) => {
            if negate_b {
                b.into_iter().map(|x| -x).collect()
            } else {
                b
            }
        }
        (false, false) => {
            assert_eq!(a.len(), b.len(), "mixed seed dimensions");
            a.into_iter()
                .zip(b)
                .map(|(x, y)| if negate_b { x - y } else { x + y })
                .collect()
        }
    }
}

impl<T: Scalar> Add for Dual2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual2 {
            value: self.value + o.value,
            grad: zip_add(self.grad, o.grad, false),
            hess: zip_add(self.hess, o.hess, false),
        }
    }
}

impl<T: Scalar> Sub for Dual2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual2 {
            value: self.value - o.value,
            grad: zip_add(self.grad, o.grad, true),
            hess: zip_add(self.hess, o.hess, true),
        }
    }
}

impl<T: Scalar> Mul for Dual2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (na, nb) = (self.grad.len(), o.grad.len());
        if na == 0 {
            return o.scale_by(&self.value);
        }
        if nb == 0 {
            return self.scale_by(&o.value);
        }
        assert_eq!(na, nb, "mixed seed dimensions");
        let n = na;
        let mut hess = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut h = self.grad[i].clone() * o.grad[j].clone()
                    + o.grad[i].clone() * self.grad[j].clone();
                if !self.hess.is_empty() {
                    h = h + o.value.clone() * self.hess[i * n + j].clone();
                }
                if !o.hess.is_empty() {
                    h = h + self.value.clone() * o.hess[i * n + j].clone();
                }
                hess.push(h);
            }
        }
        let grad = self
            .grad
            .iter()
            .zip(&o.grad)
            .map(|(ga, gb)| self.value.clone() * gb.clone() + o.value.clone() * ga.clone())
            .collect();
        Dual2 { value: self.value * o.value, grad, hess }
    }
}

impl<T: Scalar> Dual2<T> {
    fn scale_by(self, c: &T) -> Self {
        Dual2 {
            value: self.value * c.clone(),
            grad: self.grad.into_iter().map(|g| g * c.clone()).collect(),
            hess: self.hess.into_iter().map(|h| h * c.clone()).collect(),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl<T: Scalar> Div for Dual2<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        if o.grad.is_empty() {
            let inv = o.value.recip();
            return self.scale_by(&inv);
        }
        self * o.recip()
    }
}

impl<T: Scalar> Neg for Dual2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual2 {
            value: -self.value,
            grad: self.grad.into_iter().map(|g| -g).collect(),
            hess: self.hess.into_iter().map(|h| -h).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Dual2<T> {
    fn from_f64(v: f64) -> Self {
        Dual2::constant(T::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.value.value()
    }
    fn all_finite(&self) -> bool {
        self.value.all_finite()
            && self.grad.iter().all(Scalar::all_finite)
            && self.hess.iter().all(Scalar::all_finite)
    }
    fn powf(&self, n: f64) -> Self {
        let t = taylor_powf(&self.value, n);
        self.clone().chain(t)
    }
    fn sin(&self) -> Self {
        let t = taylor_sin(&self.value);
        self.clone().chain(t)
    }
    fn cos(&self) -> Self {
        let t = taylor_cos(&self.value);
        self.clone().chain(t)
    }
    fn tan(&self) -> Self {
        let t = taylor_tan(&self.value);
        self.clone().chain(t)
    }
    fn exp(&self) -> Self {
        let t = taylor_exp(&self.value);
        self.clone().chain(t)
    }
    fn ln(&self) -> Self {
        let t = taylor_ln(&self.value);
        self.clone().chain(t)
    }
    fn sqrt(&self) -> Self {
        let t = taylor_sqrt(&self.value);
        self.clone().chain(t)
    }
    fn sinh(&self) -> Self {
        let t = taylor_sinh(&self.value);
        self.clone().chain(t)
    }
    fn cosh(&self) -> Self {
        let t = taylor_cosh(&self.value);
        self.clone().chain(t)
    }
    fn abs(&self) -> Self {
        let t = taylor_abs(&self.value);
        self.clone().chain(t)
    }
    fn scale(&self, c: f64) -> Self {
        self.clone().scale_by(&T::from_f64(c))
    }
    fn recip(&self) -> Self {
        let t = taylor_recip(&self.value);
        self.clone().chain(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(x: f64, y: f64) -> (Dual2<f64>, Dual2<f64>) {
        (Dual2::variable(x, 0, 2), Dual2::variable(y, 1, 2))
    }

    #[test]
    fn hessian_of_product() {
        let (x, y) = vars(2.0, 3.0);
        // f = x² y
        let f = x.clone() * x * y;
        assert_eq!(f.value, 12.0);
        assert_eq!(f.grad(0), 12.0);
        assert_eq!(f.grad(1), 4.0);
        assert_eq!(f.hess(0, 0), 6.0);
        assert_eq!(f.hess(0, 1), 4.0);
        assert_eq!(f.hess(1, 0), 4.0);
        assert_eq!(f.hess(1, 1), 0.0);
    }

    #[test]
    fn chain_rule_second_order() {
        let (x, y) = vars(0.3, -0.4);
        // f = exp(x y)
        let f = (x * y).exp();
        let e = (0.3_f64 * -0.4).exp();
        assert!((f.hess(0, 0) - 0.16 * e).abs() < 1e-15);
        assert!((f.hess(0, 1) - (1.0 + 0.3 * -0.4) * e).abs() < 1e-15);
    }

    #[test]
    fn zero_seed_matches_plain_arithmetic() {
        let a = Dual2::constant(1.25_f64);
        let b = Dual2::constant(-0.5_f64);
        let r = (a.clone() * b.clone() + a.sin()) / b.exp();
        let p = (1.25_f64 * -0.5 + 1.25_f64.sin()) / (-0.5_f64).exp();
        assert_eq!(r.value, p);
        assert_eq!(r.directions(), 0);
    }

    #[test]
    fn quotient_matches_closed_form() {
        let (x, y) = vars(1.5, 2.0);
        let f = x.clone() / y.clone();
        assert!((f.grad(1) + 1.5 / 4.0).abs() < 1e-15);
        assert!((f.hess(1, 1) - 2.0 * 1.5 / 8.0).abs() < 1e-15);
        assert!((f.hess(0, 1) + 1.0 / 4.0).abs() < 1e-15);
    }
}
