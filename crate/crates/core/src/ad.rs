//! Forward-mode automatic differentiation.
//!
//! [`Dual`] is generic over its own scalar, so `Dual<Dual<f64>>` carries
//! mixed second derivatives. Phase-space observables are written once
//! against [`Real`] and evaluated with `f64`, `Dual<f64>` or nested duals.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

/// Scalar type usable inside generator and Hamiltonian evaluations.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    fn from_f64(x: f64) -> Self;
    /// Primal value.
    fn re(self) -> f64;
    fn sqrt(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    pub fn variable(re: T) -> Self {
        Self { re, eps: T::one() }
    }
}

impl<T: Real> Zero for Dual<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
}

impl<T: Real> One for Dual<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.re;
        Self::new(
            self.re * inv,
            (self.eps * rhs.re - self.re * rhs.eps) * inv * inv,
        )
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Real> AddAssign for Dual<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Real> DivAssign for Dual<T> {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl<T: Real> Real for Dual<T> {
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }
    fn re(self) -> f64 {
        self.re.re()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (s + s))
    }
}

/// A scalar function on a flat phase-space coordinate vector, generic over
/// the scalar so that it can be differentiated.
pub trait PhaseFunction {
    fn eval<T: Real>(&self, x: &[T]) -> T;
}

impl<F: PhaseFunction + ?Sized> PhaseFunction for &F {
    fn eval<T: Real>(&self, x: &[T]) -> T {
        (**self).eval(x)
    }
}

/// Gradient by one forward pass per coordinate.
pub fn gradient_in<T: Real, F: PhaseFunction + ?Sized>(f: &F, x: &[T]) -> Vec<T> {
    let mut seeded: Vec<Dual<T>> = x.iter().map(|&v| Dual::constant(v)).collect();
    (0..x.len())
        .map(|j| {
            seeded[j].eps = T::one();
            let d = f.eval(&seeded).eps;
            seeded[j].eps = T::zero();
            d
        })
        .collect()
}

pub fn gradient<F: PhaseFunction + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    gradient_in(f, x)
}

/// Row-major Hessian, as the Jacobian of [`gradient_in`].
pub fn hessian<F: PhaseFunction + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n * n];
    let mut seeded: Vec<Dual<f64>> = x.iter().map(|&v| Dual::constant(v)).collect();
    for j in 0..n {
        seeded[j].eps = 1.0;
        let g = gradient_in(f, &seeded);
        for (i, gi) in g.iter().enumerate() {
            out[i * n + j] = gi.eps;
        }
        seeded[j].eps = 0.0;
    }
    out
}

/// Central-difference gradient with step `1e-6·max(1, |x_j|)`.
pub fn central_gradient<F: PhaseFunction + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let step = 1e-6 * x[j].abs().max(1.0);
            probe[j] = x[j] + step;
            let up = f.eval(&probe);
            probe[j] = x[j] - step;
            let down = f.eval(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * step)
        })
        .collect()
}
