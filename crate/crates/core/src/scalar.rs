//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! dual numbers.
//!
//! Thermodynamic and residual expressions are written once over [`Scalar`].
//! Evaluating them with [`Dual<N>`] seeded on the network head
//! pre-activations yields exact partial derivatives, which the network
//! backward pass then propagates through the hidden layers.

use core::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by the residual expressions.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;

    fn pow10(self) -> Self {
        (self * Self::cst(core::f64::consts::LN_10)).exp()
    }

    fn sigmoid(self) -> Self {
        Self::cst(1.0) / (Self::cst(1.0) + (-self).exp())
    }

    fn square(self) -> Self {
        self * self
    }

    /// `max(0, self)`; the derivative at exactly zero is taken as zero.
    fn relu(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::cst(0.0)
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn pow10(self) -> Self {
        libm::pow(10.0, self)
    }
}

/// Forward-mode dual number with `N` tangent directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    /// Independent variable seeded along direction `i`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Self { v, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a += b;
        }
        Self { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d.iter()) {
            *a -= b;
        }
        Self { v: self.v - o.v, d }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Self { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * o.d[i]) * inv;
        }
        Self { v, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x = -*x;
        }
        Self { v: -self.v, d }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn exp(self) -> Self {
        let e = libm::exp(self.v);
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(libm::log(self.v), 1.0 / self.v)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = libm::sqrt(self.v);
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn pow10(self) -> Self {
        let p = libm::pow(10.0, self.v);
        self.chain(p, p * core::f64::consts::LN_10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: S, y: S) -> S {
        (x * y).exp() / (x + S::cst(2.0)) - y.ln() * x.sqrt() + (x - y).pow10()
    }

    #[test]
    fn dual_matches_central_difference() {
        let (x, y) = (0.7, 1.3);
        let g = f(Dual::<2>::var(x, 0), Dual::<2>::var(y, 1));
        let h = 1e-6;
        let dx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let dy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        assert!((g.v - f(x, y)).abs() < 1e-15);
        assert!((g.d[0] - dx).abs() < 1e-7 * dx.abs().max(1.0));
        assert!((g.d[1] - dy).abs() < 1e-7 * dy.abs().max(1.0));
    }

    #[test]
    fn relu_is_flat_below_zero() {
        let a = Dual::<1>::var(-0.5, 0).relu();
        assert_eq!(a.v, 0.0);
        assert_eq!(a.d[0], 0.0);
        let b = Dual::<1>::var(0.5, 0).relu();
        assert_eq!(b.d[0], 1.0);
    }
}
