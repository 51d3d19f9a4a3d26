//! Truncated formal power series with exact rational coefficients.
//!
//! Every series uses the exponential convention: slot `n` holds `f_n` in
//! `F(x) = Σ f_n x^n / n!`. A series knows its truncation order `N`; slots
//! `0..=N` are exact and nothing beyond `N` is ever consulted. Binary
//! operations truncate to the smaller order of their operands.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

/// Exact rational number, always kept in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Integer as a rational.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// The fraction `n/d`. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn big_rat(n: BigInt) -> Rational {
    Rational::from_integer(n)
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// Row `n` of Pascal's triangle.
pub(crate) fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * BigInt::from(n - k) / BigInt::from(k + 1);
        row.push(c.clone());
    }
    row
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("composition requires the inner series to have zero constant term")]
    NonzeroInnerConstant,
    #[error("compositional inverse requires f_0 = 0")]
    InverseNonzeroConstant,
    #[error("compositional inverse requires f_1 != 0")]
    InverseZeroLinear,
    #[error("exp requires f_0 = 0")]
    ExpNonzeroConstant,
    #[error("log requires f_0 = 1")]
    LogConstantNotOne,
    #[error("division by a series with zero constant term")]
    ZeroConstantTerm,
    #[error("series of order {got} is too short, order {needed} is required")]
    InsufficientOrder { needed: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FormalPowerSeries {
    coeffs: Vec<Rational>,
}

impl FormalPowerSeries {
    /// Builds a series from its EGF slots; the order is `slots.len() - 1`.
    pub fn from_slots(slots: Vec<Rational>) -> Self {
        assert!(!slots.is_empty(), "a series needs at least the constant slot");
        FormalPowerSeries { coeffs: slots }
    }

    pub fn from_int_slots(slots: &[i64]) -> Self {
        Self::from_slots(slots.iter().map(|&c| rat(c)).collect())
    }

    /// Series from ordinary coefficients `c_n` of `Σ c_n x^n`, zero-padded to `order`.
    pub fn from_ogf(coeffs: &[Rational], order: usize) -> Self {
        let mut f = BigInt::one();
        let slots = (0..=order)
            .map(|n| {
                if n > 0 {
                    f *= BigInt::from(n);
                }
                coeffs
                    .get(n)
                    .map(|c| c * big_rat(f.clone()))
                    .unwrap_or_else(Rational::zero)
            })
            .collect();
        Self::from_slots(slots)
    }

    /// Polynomial given by EGF slots, padded with zeros up to `order`.
    pub fn polynomial(slots: &[Rational], order: usize) -> Self {
        let slots = (0..=order)
            .map(|n| slots.get(n).cloned().unwrap_or_else(Rational::zero))
            .collect();
        Self::from_slots(slots)
    }

    pub fn from_fn(order: usize, f: impl FnMut(usize) -> Rational) -> Self {
        Self::from_slots((0..=order).map(f).collect())
    }

    pub fn zero(order: usize) -> Self {
        Self::from_fn(order, |_| Rational::zero())
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    pub fn one(order: usize) -> Self {
        Self::constant(Rational::one(), order)
    }

    /// The identity series `x`.
    pub fn x(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = Rational::one();
        }
        s
    }

    /// `e^x`: every slot equals one.
    pub fn exp_x(order: usize) -> Self {
        Self::from_fn(order, |_| Rational::one())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Slot `n`. Panics when `n` exceeds the order.
    pub fn slot(&self, n: usize) -> &Rational {
        &self.coeffs[n]
    }

    pub fn get(&self, n: usize) -> Option<&Rational> {
        self.coeffs.get(n)
    }

    pub fn slots(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Ordinary coefficient `f_n / n!`.
    pub fn ogf_coeff(&self, n: usize) -> Rational {
        &self.coeffs[n] / big_rat(factorial(n))
    }

    pub fn ogf_coeffs(&self) -> Vec<Rational> {
        let mut f = BigInt::one();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| {
                if n > 0 {
                    f *= BigInt::from(n);
                }
                c / big_rat(f.clone())
            })
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        Self::from_slots(self.coeffs[..=order].to_vec())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_slots(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// `F'`: slot `n` becomes `f_{n+1}`, order drops by one. An order-0 series
    /// has no known derivative slot and yields the zero series of order 0.
    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        Self::from_slots(self.coeffs[1..].to_vec())
    }

    /// `∫_0^x F`: slot `n` becomes `f_{n-1}`, slot 0 is zero, order grows by one.
    pub fn integral(&self) -> Self {
        let mut slots = Vec::with_capacity(self.coeffs.len() + 1);
        slots.push(Rational::zero());
        slots.extend(self.coeffs.iter().cloned());
        Self::from_slots(slots)
    }

    /// `x·F(x)`. Slot `n` is `n f_{n-1}`.
    pub fn mul_x(&self) -> Self {
        let mut slots = Vec::with_capacity(self.coeffs.len() + 1);
        slots.push(Rational::zero());
        for (n, c) in self.coeffs.iter().enumerate() {
            slots.push(c * rat(n as i64 + 1));
        }
        Self::from_slots(slots)
    }

    /// `(F(x) - f_0)/x`. Slot `n` is `f_{n+1}/(n+1)`.
    pub fn div_x(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        Self::from_slots(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(n, c)| c / rat(n as i64 + 1))
                .collect(),
        )
    }

    pub fn add_series(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        Self::from_fn(order, |n| &self.coeffs[n] + &other.coeffs[n])
    }

    pub fn sub_series(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        Self::from_fn(order, |n| &self.coeffs[n] - &other.coeffs[n])
    }

    /// Binomial (EGF) convolution `(ab)_n = Σ_k C(n,k) a_k b_{n-k}`.
    pub fn mul_series(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let mut out = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let row = binomial_row(n);
            let mut acc = Rational::zero();
            for k in 0..=n {
                let (a, b) = (&self.coeffs[k], &other.coeffs[n - k]);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc += a * b * big_rat(row[k].clone());
            }
            out.push(acc);
        }
        Self::from_slots(out)
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::one(self.order());
        for _ in 0..k {
            acc = acc.mul_series(self);
        }
        acc
    }

    /// `F(G(x))`. Requires `g_0 = 0`; the result has the smaller of both orders.
    pub fn compose(&self, g: &Self) -> Result<Self, SeriesError> {
        if !g.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroInnerConstant);
        }
        let order = self.order().min(g.order());
        let g = g.truncate(order);
        let mut acc = Self::constant(self.coeffs[0].clone(), order);
        // power = G^k / k!
        let mut power = Self::one(order);
        for k in 1..=order {
            power = power.mul_series(&g).scale(&ratio(1, k as i64));
            let fk = &self.coeffs[k];
            if !fk.is_zero() {
                acc = acc.add_series(&power.scale(fk));
            }
        }
        Ok(acc)
    }

    /// Compositional inverse by Lagrange inversion: `[x^n] F⁻¹ = (1/n) [x^{n-1}] (x/F)^n`.
    pub fn comp_inverse(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::InverseNonzeroConstant);
        }
        let order = self.order();
        if order == 0 {
            return Ok(Self::zero(0));
        }
        if self.coeffs[1].is_zero() {
            return Err(SeriesError::InverseZeroLinear);
        }
        // F(x)/x as an ordinary series, then its reciprocal.
        let ogf = self.ogf_coeffs();
        let shifted = Self::from_ogf(&ogf[1..], order - 1);
        let h = shifted.recip()?;
        let mut out = vec![Rational::zero(); order + 1];
        let mut power = Self::one(order - 1);
        for n in 1..=order {
            power = power.mul_series(&h);
            let c = power.ogf_coeff(n - 1) / rat(n as i64);
            out[n] = c * big_rat(factorial(n));
        }
        Ok(Self::from_slots(out))
    }

    /// `exp(F)`, from `E' = F' E`: `e_{n+1} = Σ_k C(n,k) f_{k+1} e_{n-k}`.
    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::ExpNonzeroConstant);
        }
        let order = self.order();
        let mut e = vec![Rational::one()];
        for n in 0..order {
            let row = binomial_row(n);
            let mut acc = Rational::zero();
            for k in 0..=n {
                let f = &self.coeffs[k + 1];
                if !f.is_zero() {
                    acc += f * &e[n - k] * big_rat(row[k].clone());
                }
            }
            e.push(acc);
        }
        Ok(Self::from_slots(e))
    }

    /// `log(F)` for `f_0 = 1`, as the integral of `F'/F`.
    pub fn log(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_one() {
            return Err(SeriesError::LogConstantNotOne);
        }
        if self.order() == 0 {
            return Ok(Self::zero(0));
        }
        let q = self.derivative().mul_series(&self.recip()?);
        Ok(q.integral())
    }

    /// `1/F`, from `Σ_k C(n,k) f_k r_{n-k} = [n = 0]`.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        let f0 = &self.coeffs[0];
        if f0.is_zero() {
            return Err(SeriesError::ZeroConstantTerm);
        }
        let inv0 = f0.recip();
        let mut r: Vec<Rational> = vec![inv0.clone()];
        for n in 1..=self.order() {
            let row = binomial_row(n);
            let mut acc = Rational::zero();
            for k in 1..=n {
                let f = &self.coeffs[k];
                if !f.is_zero() {
                    acc += f * &r[n - k] * big_rat(row[k].clone());
                }
            }
            r.push(-acc * &inv0);
        }
        Ok(Self::from_slots(r))
    }

    pub fn div_series(&self, other: &Self) -> Result<Self, SeriesError> {
        Ok(self.mul_series(&other.recip()?))
    }

    /// Truncated sum `Σ_{n≤N} f_n x^n / n!` at a rational point.
    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        let mut term = Rational::one();
        for (n, c) in self.coeffs.iter().enumerate() {
            if n > 0 {
                term = term * x / rat(n as i64);
            }
            acc += c * &term;
        }
        acc
    }

    /// Truncated sum at a complex point, in double precision.
    pub fn eval_complex(&self, x: num_complex::Complex64) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        let mut term = num_complex::Complex64::new(1.0, 0.0);
        for (n, c) in self.coeffs.iter().enumerate() {
            if n > 0 {
                term = term * x / n as f64;
            }
            acc += term * to_f64(c);
        }
        acc
    }

    /// Rows `(n, numerator, denominator)` for CSV export.
    pub fn csv_rows(&self) -> Vec<(usize, BigInt, BigInt)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| (n, c.numer().clone(), c.denom().clone()))
            .collect()
    }
}

pub(crate) fn to_f64(c: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN)
}

impl fmt::Display for FormalPowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}; O({})]", parts.join(", "), self.order() + 1)
    }
}

impl Add for &FormalPowerSeries {
    type Output = FormalPowerSeries;
    fn add(self, rhs: Self) -> FormalPowerSeries {
        self.add_series(rhs)
    }
}

impl Sub for &FormalPowerSeries {
    type Output = FormalPowerSeries;
    fn sub(self, rhs: Self) -> FormalPowerSeries {
        self.sub_series(rhs)
    }
}

impl Mul for &FormalPowerSeries {
    type Output = FormalPowerSeries;
    fn mul(self, rhs: Self) -> FormalPowerSeries {
        self.mul_series(rhs)
    }
}

impl Neg for &FormalPowerSeries {
    type Output = FormalPowerSeries;
    fn neg(self) -> FormalPowerSeries {
        self.scale(&rat(-1))
    }
}

/// Which elementary function `fps_exp_log` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementary {
    Exp,
    Log,
    Recip,
}

pub fn fps_exp_log(f: &FormalPowerSeries, which: Elementary) -> Result<FormalPowerSeries, SeriesError> {
    match which {
        Elementary::Exp => f.exp(),
        Elementary::Log => f.log(),
        Elementary::Recip => f.recip(),
    }
}

/// Elementary series used across the crate.
pub mod standard {
    use super::*;

    /// `log(1 + x)`.
    pub fn log1p(order: usize) -> FormalPowerSeries {
        // slot n = (-1)^{n-1} (n-1)!
        FormalPowerSeries::from_fn(order, |n| {
            if n == 0 {
                Rational::zero()
            } else {
                let v = big_rat(factorial(n - 1));
                if n % 2 == 0 {
                    -v
                } else {
                    v
                }
            }
        })
    }

    pub fn sin(order: usize) -> FormalPowerSeries {
        FormalPowerSeries::from_fn(order, |n| match n % 4 {
            1 => rat(1),
            3 => rat(-1),
            _ => Rational::zero(),
        })
    }

    pub fn cos(order: usize) -> FormalPowerSeries {
        FormalPowerSeries::from_fn(order, |n| match n % 4 {
            0 => rat(1),
            2 => rat(-1),
            _ => Rational::zero(),
        })
    }

    pub fn tan(order: usize) -> FormalPowerSeries {
        sin(order).mul_series(&cos(order).recip().expect("cos(0) = 1"))
    }

    /// `arctan(x)`, the integral of `1/(1+x^2)`.
    pub fn arctan(order: usize) -> FormalPowerSeries {
        if order == 0 {
            return FormalPowerSeries::zero(0);
        }
        let one_plus_x2 = FormalPowerSeries::polynomial(&[rat(1), rat(0), rat(2)], order - 1);
        one_plus_x2.recip().expect("constant term 1").integral()
    }

    /// Lambert W, slots `(-n)^{n-1}`.
    pub fn lambert_w(order: usize) -> FormalPowerSeries {
        FormalPowerSeries::from_fn(order, |n| {
            if n == 0 {
                Rational::zero()
            } else {
                big_rat(num_traits::pow(BigInt::from(-(n as i64)), n - 1))
            }
        })
    }

    /// `(1 + c x)^e` for rational exponent `e`.
    pub fn binomial_power(c: &Rational, e: &Rational, order: usize) -> FormalPowerSeries {
        // slot n = c^n e(e-1)...(e-n+1)
        let mut acc = Rational::one();
        FormalPowerSeries::from_fn(order, |n| {
            if n > 0 {
                acc = &acc * c * (e - rat(n as i64 - 1));
            }
            acc.clone()
        })
    }
}

/// Truncated bivariate series: entry `n` is the coefficient of `λ^n/n!`,
/// itself an EGF in `x`. Both directions use the exponential convention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivariateSeries {
    slots: Vec<FormalPowerSeries>,
}

impl BivariateSeries {
    /// Builds from λ-slots, truncating all of them to the smallest x-order.
    pub fn from_lambda_slots(slots: Vec<FormalPowerSeries>) -> Self {
        assert!(!slots.is_empty(), "a bivariate series needs the λ^0 slot");
        let x_order = slots.iter().map(|s| s.order()).min().unwrap_or(0);
        BivariateSeries { slots: slots.into_iter().map(|s| s.truncate(x_order)).collect() }
    }

    pub fn from_fn(lambda_order: usize, x_order: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        Self::from_lambda_slots(
            (0..=lambda_order)
                .map(|n| FormalPowerSeries::from_fn(x_order, |m| f(n, m)))
                .collect(),
        )
    }

    pub fn zero(lambda_order: usize, x_order: usize) -> Self {
        Self::from_fn(lambda_order, x_order, |_, _| Rational::zero())
    }

    pub fn one(lambda_order: usize, x_order: usize) -> Self {
        Self::from_fn(lambda_order, x_order, |n, m| if n == 0 && m == 0 { rat(1) } else { Rational::zero() })
    }

    /// A series in `λ` alone, constant in `x`.
    pub fn from_lambda_series(f: &FormalPowerSeries, x_order: usize) -> Self {
        Self::from_fn(f.order(), x_order, |n, m| if m == 0 { f.slot(n).clone() } else { Rational::zero() })
    }

    /// A series in `x` alone, constant in `λ`.
    pub fn from_x_series(f: &FormalPowerSeries, lambda_order: usize) -> Self {
        Self::from_fn(lambda_order, f.order(), |n, m| if n == 0 { f.slot(m).clone() } else { Rational::zero() })
    }

    pub fn lambda_order(&self) -> usize {
        self.slots.len() - 1
    }

    pub fn x_order(&self) -> usize {
        self.slots[0].order()
    }

    pub fn lambda_slot(&self, n: usize) -> &FormalPowerSeries {
        &self.slots[n]
    }

    pub fn lambda_slots(&self) -> &[FormalPowerSeries] {
        &self.slots
    }

    /// Slot `(n, m)`: coefficient of `λ^n x^m / (n! m!)`.
    pub fn coeff(&self, n: usize, m: usize) -> &Rational {
        self.slots[n].slot(m)
    }

    pub fn truncate(&self, lambda_order: usize, x_order: usize) -> Self {
        let l = lambda_order.min(self.lambda_order());
        Self::from_lambda_slots(self.slots[..=l].iter().map(|s| s.truncate(x_order)).collect())
    }

    fn common(&self, other: &Self) -> (usize, usize) {
        (self.lambda_order().min(other.lambda_order()), self.x_order().min(other.x_order()))
    }

    pub fn add_series(&self, other: &Self) -> Self {
        let (l, _) = self.common(other);
        Self::from_lambda_slots((0..=l).map(|n| self.slots[n].add_series(&other.slots[n])).collect())
    }

    pub fn sub_series(&self, other: &Self) -> Self {
        let (l, _) = self.common(other);
        Self::from_lambda_slots((0..=l).map(|n| self.slots[n].sub_series(&other.slots[n])).collect())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_lambda_slots(self.slots.iter().map(|s| s.scale(c)).collect())
    }

    pub fn mul_series(&self, other: &Self) -> Self {
        let (l, _) = self.common(other);
        let out = (0..=l)
            .map(|n| {
                let row = binomial_row(n);
                let mut acc = self.slots[0].mul_series(&other.slots[n]);
                for k in 1..=n {
                    let term = self.slots[k].mul_series(&other.slots[n - k]);
                    acc = acc.add_series(&term.scale(&big_rat(row[k].clone())));
                }
                acc
            })
            .collect();
        Self::from_lambda_slots(out)
    }

    /// `F(B(λ, x))` for univariate `F`; needs a zero `(0,0)` slot and
    /// `F` of order at least `lambda_order + x_order`.
    pub fn compose_into(&self, f: &FormalPowerSeries) -> Result<Self, SeriesError> {
        if !self.coeff(0, 0).is_zero() {
            return Err(SeriesError::NonzeroInnerConstant);
        }
        let (l, x) = (self.lambda_order(), self.x_order());
        let depth = l + x;
        if f.order() < depth {
            return Err(SeriesError::InsufficientOrder { needed: depth, got: f.order() });
        }
        let mut acc = Self::zero(l, x);
        acc.slots[0] = FormalPowerSeries::constant(f.slot(0).clone(), x);
        let mut power = Self::one(l, x);
        for k in 1..=depth {
            power = power.mul_series(self).scale(&ratio(1, k as i64));
            if !f.slot(k).is_zero() {
                acc = acc.add_series(&power.scale(f.slot(k)));
            }
        }
        Ok(acc)
    }

    pub fn exp(&self) -> Result<Self, SeriesError> {
        let depth = self.lambda_order() + self.x_order();
        self.compose_into(&FormalPowerSeries::exp_x(depth))
    }

    /// Substitutes a rational `x`, leaving a series in `λ`.
    pub fn eval_x(&self, x: &Rational) -> FormalPowerSeries {
        FormalPowerSeries::from_slots(self.slots.iter().map(|s| s.eval(x)).collect())
    }

    /// The x-series of slot sums `Σ_n c_{n,m} λ^n/n!` at a rational `λ`.
    pub fn eval_lambda(&self, lambda: &Rational) -> FormalPowerSeries {
        let mut acc = FormalPowerSeries::zero(self.x_order());
        let mut term = Rational::one();
        for (n, s) in self.slots.iter().enumerate() {
            if n > 0 {
                term = term * lambda / rat(n as i64);
            }
            acc = acc.add_series(&s.scale(&term));
        }
        acc
    }

    /// `Σ c_{n,m} λ^n x^m / (n! m!)` in double precision, with the magnitude
    /// of the outermost shell (`n = L` or `m = X`) as a crude tail estimate.
    pub fn eval_complex(&self, lambda: f64, x: num_complex::Complex64) -> (num_complex::Complex64, f64) {
        let (l, xo) = (self.lambda_order(), self.x_order());
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        let mut shell = 0.0;
        let mut lam_term = 1.0;
        for n in 0..=l {
            if n > 0 {
                lam_term *= lambda / n as f64;
            }
            let mut x_term = num_complex::Complex64::new(1.0, 0.0);
            for m in 0..=xo {
                if m > 0 {
                    x_term = x_term * x / m as f64;
                }
                let t = x_term * lam_term * to_f64(self.coeff(n, m));
                total += t;
                if n == l || m == xo {
                    shell += t.norm();
                }
            }
        }
        (total, shell)
    }

    pub fn lambda_derivative(&self) -> Self {
        if self.lambda_order() == 0 {
            return Self::zero(0, self.x_order());
        }
        Self::from_lambda_slots(self.slots[1..].to_vec())
    }

    pub fn x_derivative(&self) -> Self {
        Self::from_lambda_slots(self.slots.iter().map(|s| s.derivative()).collect())
    }
}

impl fmt::Display for BivariateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, s) in self.slots.iter().enumerate() {
            writeln!(f, "λ^{n}: {s}")?;
        }
        Ok(())
    }
}
