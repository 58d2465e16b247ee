//! Scalar types the differentiable kernels are generic over.
//!
//! Every loss in this crate is written once, as a hand-rolled reverse pass
//! over a generic [`Scalar`]. Running it with `f64` yields the value and the
//! gradient; running it with [`Dual`] seeded with a direction `v` yields, in
//! the tangent parts of the gradient, the Hessian-vector product `H v`
//! (forward-over-reverse). The Hessian is never materialized.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
{
    fn constant(value: f64) -> Self;
    /// Primal part.
    fn value(&self) -> f64;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn scale(self, k: f64) -> Self {
        self * Self::constant(k)
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(value: f64) -> Self {
        value
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// First-order dual number `value + tangent·ε`, `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub fn new(value: f64, tangent: f64) -> Self {
        Dual { value, tangent }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let v = self.value / rhs.value;
        Dual::new(v, (self.tangent - v * rhs.tangent) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        self.value += rhs.value;
        self.tangent += rhs.tangent;
    }
}

impl Scalar for Dual {
    #[inline]
    fn constant(value: f64) -> Self {
        Dual::new(value, 0.0)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        Dual::new(t, self.tangent * (1.0 - t * t))
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        Dual::new(e, self.tangent * e)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Dual::new(self.value * k, self.tangent * k)
    }
}
