//! Generalized coherent states with `ρ(n) = B_{r,1}(n+p)`.
//!
//! Everything here is double precision. The sequences themselves are exact
//! integers; only their logarithms enter the sums, so `ρ(n)` far beyond the
//! `f64` range is harmless.

use std::f64::consts::{E, PI};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::stirling::{bell_rs_sequence, rs_table, DobinskiSum, Method};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherentError {
    #[error("series did not converge within {0} terms")]
    NonConvergence(usize),
    #[error("lower parameter {0} is a nonpositive integer")]
    PoleParameter(f64),
    #[error("tail term {tail:e} still above tolerance after {terms} terms")]
    TailBudget { terms: usize, tail: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("evaluation overflow at x = {0}")]
    Overflow(f64),
}

const MAX_SERIES_TERMS: usize = 100_000;

/// Generalized hypergeometric series `pFq(a; b; x)`, summed until
/// `|term| < tol·|partial|`.
pub fn pfq(a: &[f64], b: &[f64], x: f64, tol: f64) -> Result<f64, CoherentError> {
    if let Some(&bad) = b.iter().find(|&&v| v <= 0.0 && v.fract() == 0.0) {
        return Err(CoherentError::PoleParameter(bad));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let num: f64 = a.iter().map(|v| v + kf).product();
        let den: f64 = b.iter().map(|v| v + kf).product();
        term *= num / den * x / (kf + 1.0);
        sum += term;
        if !sum.is_finite() {
            return Err(CoherentError::Overflow(x));
        }
        // the ratio must also have settled below one, or a small term can be a fluke
        let next_ratio = a.iter().map(|v| v + kf + 1.0).product::<f64>() / b.iter().map(|v| v + kf + 1.0).product::<f64>()
            * x.abs()
            / (kf + 2.0);
        if term.abs() <= tol * sum.abs() && next_ratio.abs() < 1.0 || term == 0.0 {
            return Ok(sum);
        }
    }
    Err(CoherentError::NonConvergence(MAX_SERIES_TERMS))
}

/// Modified Bessel function `I_ν(x)` from `Σ_k (x/2)^{2k+ν}/(k! Γ(k+ν+1))`.
pub fn bessel_i(nu: f64, x: f64, tol: f64) -> Result<f64, CoherentError> {
    if nu < 0.0 {
        return Err(CoherentError::InvalidArgument(format!("order {nu} must be nonnegative")));
    }
    let half = x / 2.0;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= half * half / (kf * (kf + nu));
        sum += term;
        if term.abs() <= tol * sum.abs() && kf > half {
            return Ok(sum);
        }
    }
    Err(CoherentError::NonConvergence(MAX_SERIES_TERMS))
}

/// How to evaluate `B_{r,1}(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BellMode {
    Exact,
    /// Γ-ratio series with the given number of terms.
    Dobinski { terms: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum BellValue {
    Exact(BigInt),
    Approx(DobinskiSum),
}

impl BellValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            BellValue::Exact(b) => b.to_f64().unwrap_or(f64::INFINITY),
            BellValue::Approx(d) => d.value,
        }
    }
}

/// `B_{r,1}(n)`. The series mode evaluates
/// `((r-1)^{n-1}/e) Σ_k Γ(n+a_k)/(k! Γ(1+a_k))` with `a_k = (k+1)/(r-1)`,
/// which gives `(e-1)/e` rather than one at `n = 0` for `r ≥ 2`.
pub fn bell_r1(r: u32, n: u32, mode: BellMode) -> Result<BellValue, CoherentError> {
    if r == 0 {
        return Err(CoherentError::InvalidArgument("r must be at least 1".into()));
    }
    match mode {
        BellMode::Exact => {
            let t = rs_table(r, 1, n as usize, Method::Recurrence)
                .map_err(|e| CoherentError::InvalidArgument(e.to_string()))?;
            Ok(BellValue::Exact(t.int_bell(n as usize).expect("integral table")))
        }
        BellMode::Dobinski { terms } if r == 1 => Ok(BellValue::Approx(crate::stirling::dobinski_numeric(n, 1.0, terms))),
        BellMode::Dobinski { terms } => {
            let m = (r - 1) as f64;
            let mut acc = 0.0;
            let mut inv_fact = 1.0;
            let (mut prev, mut last) = (0.0, 0.0);
            for k in 0..=terms {
                if k > 0 {
                    inv_fact /= k as f64;
                }
                let a = (k as f64 + 1.0) / m;
                // Γ(n+a)/Γ(1+a)
                let ratio = if n == 0 { 1.0 / a } else { (1..n).map(|j| a + j as f64).product() };
                let t = inv_fact * ratio;
                acc += t;
                prev = last;
                last = t;
            }
            let scale = m.powi(n as i32 - 1) / E;
            let rho = if prev > 0.0 { last / prev } else { 1.0 };
            let tail = (rho < 1.0).then(|| scale * last * rho / (1.0 - rho));
            Ok(BellValue::Approx(DobinskiSum { value: scale * acc, last_term: scale * last, tail_bound: tail }))
        }
    }
}

/// Value assigned to `B_{r,1}(0)` when `p = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroConvention {
    /// `B(0) = 1`, the empty-product integer convention.
    Integer,
    /// `B_{r,1}(0) = (e-1)/e` for `r ≥ 2`, from the series.
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoKind {
    /// `ρ(n) = n!`, the conventional coherent states.
    Factorial,
    Bell { r: u32, p: u32, zero: ZeroConvention },
}

/// `ρ(0..=nmax)` kept as natural logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoSequence {
    kind: RhoKind,
    ln_rho: Vec<f64>,
}

pub const DEFAULT_NMAX: usize = 400;

fn big_ln(b: &BigInt) -> f64 {
    let bits = b.bits();
    if bits < 1000 {
        return b.to_f64().expect("finite").ln();
    }
    let shift = bits - 64;
    (b >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

impl RhoSequence {
    pub fn factorial(nmax: usize) -> Self {
        let mut ln_rho = vec![0.0];
        for n in 1..=nmax {
            ln_rho.push(ln_rho[n - 1] + (n as f64).ln());
        }
        RhoSequence { kind: RhoKind::Factorial, ln_rho }
    }

    pub fn bell(r: u32, p: u32, zero: ZeroConvention, nmax: usize) -> Result<Self, CoherentError> {
        if r == 0 {
            return Err(CoherentError::InvalidArgument("r must be at least 1".into()));
        }
        let seq = bell_rs_sequence(r, 1, nmax + p as usize);
        let mut ln_rho: Vec<f64> = seq[p as usize..].iter().map(big_ln).collect();
        if p == 0 && r >= 2 && zero == ZeroConvention::Series {
            ln_rho[0] = ((E - 1.0) / E).ln();
        }
        Ok(RhoSequence { kind: RhoKind::Bell { r, p, zero }, ln_rho })
    }

    /// `ρ(n) = B_{r,1}(n+p)` with the integer convention and default cutoff.
    pub fn bell_default(r: u32, p: u32) -> Result<Self, CoherentError> {
        Self::bell(r, p, ZeroConvention::Integer, DEFAULT_NMAX)
    }

    pub fn kind(&self) -> RhoKind {
        self.kind
    }

    pub fn nmax(&self) -> usize {
        self.ln_rho.len() - 1
    }

    pub fn ln_rho(&self, n: usize) -> f64 {
        self.ln_rho[n]
    }

    pub fn rho(&self, n: usize) -> f64 {
        self.ln_rho[n].exp()
    }

    /// `[n]_r = ρ(n)/ρ(n-1)`.
    pub fn ratio(&self, n: usize) -> f64 {
        (self.ln_rho[n] - self.ln_rho[n - 1]).exp()
    }
}

/// Sums `Σ_n w(n) x^{n-shift}/ρ(n)` over `n ≥ shift` in log space, stopping
/// once terms fall below `tol` of the running total past the peak.
fn series_sum(rho: &RhoSequence, x: f64, tol: f64, shift: usize, w: impl Fn(usize) -> f64) -> Result<f64, CoherentError> {
    if x < 0.0 {
        return Err(CoherentError::InvalidArgument(format!("x = {x} must be nonnegative")));
    }
    if x == 0.0 {
        return Ok(if shift <= rho.nmax() { w(shift) * (-rho.ln_rho(shift)).exp() } else { 0.0 });
    }
    let lx = x.ln();
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for n in shift..=rho.nmax() {
        let t = w(n) * ((n - shift) as f64 * lx - rho.ln_rho(n)).exp();
        sum += t;
        if n > shift + 2 && t.abs() <= tol * sum.abs() && t.abs() <= prev {
            return Ok(sum);
        }
        prev = t.abs();
    }
    Err(CoherentError::TailBudget { terms: rho.nmax(), tail: prev })
}

/// `𝒩(x)` and its first two derivatives, each summed termwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn normalization(rho: &RhoSequence, x: f64, tol: f64) -> Result<Normalization, CoherentError> {
    Ok(Normalization {
        value: series_sum(rho, x, tol, 0, |_| 1.0)?,
        d1: series_sum(rho, x, tol, 1, |n| n as f64)?,
        d2: series_sum(rho, x, tol, 2, |n| (n * (n - 1)) as f64)?,
    })
}

pub const DEFAULT_TOL: f64 = 1e-16;

/// `Q(x) = x(𝒩''/𝒩' - 𝒩'/𝒩)`.
pub fn mandel_q(rho: &RhoSequence, x: f64) -> Result<f64, CoherentError> {
    if x <= 0.0 {
        return Err(CoherentError::InvalidArgument(format!("x = {x} must be positive")));
    }
    let n = normalization(rho, x, DEFAULT_TOL)?;
    Ok(x * (n.d2 / n.d1 - n.d1 / n.value))
}

/// `ω(x) = [x 𝒩'/𝒩]' = (𝒩' + x𝒩'')/𝒩 - x𝒩'^2/𝒩^2`. At `x = 0` this is `ρ(0)/ρ(1)`.
pub fn metric_factor(rho: &RhoSequence, x: f64) -> Result<f64, CoherentError> {
    if x < 0.0 {
        return Err(CoherentError::InvalidArgument(format!("x = {x} must be nonnegative")));
    }
    let n = normalization(rho, x, DEFAULT_TOL)?;
    Ok((n.d1 + x * n.d2) / n.value - x * n.d1 * n.d1 / (n.value * n.value))
}

/// Normalized amplitudes `c_n = z^n/√(ρ(n) 𝒩(|z|²))` up to the last term
/// above tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub coefficients: Vec<Complex64>,
    pub normalization: f64,
}

impl StateVector {
    pub fn new(rho: &RhoSequence, z: Complex64, tol: f64) -> Result<Self, CoherentError> {
        let x = z.norm_sqr();
        let norm = normalization(rho, x, tol)?.value;
        let mut coefficients = vec![Complex64::new((-0.5 * (rho.ln_rho(0) + norm.ln())).exp(), 0.0)];
        for n in 1..=rho.nmax() {
            let c = coefficients[n - 1] * z / rho.ratio(n).sqrt();
            coefficients.push(c);
            if c.norm_sqr() < tol * tol && n as f64 > x {
                return Ok(StateVector { coefficients, normalization: norm });
            }
        }
        Err(CoherentError::TailBudget { terms: rho.nmax(), tail: coefficients[rho.nmax()].norm_sqr() })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨a⟩, ⟨a²⟩, ⟨a†a⟩` from `a|n⟩ = √n |n-1⟩`.
    pub fn moments(&self) -> (Complex64, Complex64, f64) {
        let c = &self.coefficients;
        let mut a1 = Complex64::zero();
        let mut a2 = Complex64::zero();
        let mut num = 0.0;
        for n in 0..c.len() {
            num += n as f64 * c[n].norm_sqr();
            if n + 1 < c.len() {
                a1 += c[n].conj() * c[n + 1] * ((n + 1) as f64).sqrt();
            }
            if n + 2 < c.len() {
                a2 += c[n].conj() * c[n + 2] * (((n + 1) * (n + 2)) as f64).sqrt();
            }
        }
        (a1, a2, num)
    }
}

/// Quadrature means and variances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratures {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
}

pub fn quadratures(rho: &RhoSequence, z: Complex64) -> Result<Quadratures, CoherentError> {
    let state = StateVector::new(rho, z, 1e-17)?;
    let (a1, a2, num) = state.moments();
    let mean_q = std::f64::consts::SQRT_2 * a1.re;
    let mean_p = std::f64::consts::SQRT_2 * a1.im;
    let q2 = (2.0 * a2.re + 2.0 * num + 1.0) / 2.0;
    let p2 = (-2.0 * a2.re + 2.0 * num + 1.0) / 2.0;
    Ok(Quadratures { mean_q, mean_p, var_q: q2 - mean_q * mean_q, var_p: p2 - mean_p * mean_p })
}

/// `(S_Q, S_P) = (⟨(ΔQ)²⟩/2, ⟨(ΔP)²⟩/2)`; the conventional value is `1/4`.
pub fn squeezing_params(rho: &RhoSequence, z: Complex64) -> Result<(f64, f64), CoherentError> {
    let q = quadratures(rho, z)?;
    Ok((q.var_q / 2.0, q.var_p / 2.0))
}

/// `σ = ⟨Q⟩²/(ΔQ)²` for real `z`, with `σ̄ = σ - 4z²`.
pub fn snr_sigma(rho: &RhoSequence, z: f64) -> Result<(f64, f64), CoherentError> {
    let q = quadratures(rho, Complex64::new(z, 0.0))?;
    let sigma = q.mean_q * q.mean_q / q.var_q;
    Ok((sigma, sigma - 4.0 * z * z))
}

/// Point mass `e^{-1}/(k-1)!` at `x = k` for `k = 1..=kmax`.
pub fn dirac_comb(kmax: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(kmax);
    let mut mass = 1.0 / E;
    for k in 1..=kmax {
        if k > 1 {
            mass /= (k - 1) as f64;
        }
        out.push((k as f64, mass));
    }
    out
}

const WEIGHT_TOL: f64 = 1e-16;

fn ofm(b: &[f64], x: f64) -> Result<f64, CoherentError> {
    pfq(&[], b, x, WEIGHT_TOL)
}

/// Continuous weight `W_{r,1}(x)` for `r = 2, 3, 4`, with
/// `B_{r,1}(n+1) = ∫_0^∞ x^n W_{r,1}(x) dx`.
pub fn weight_eval(r: u32, x: f64) -> Result<f64, CoherentError> {
    if x < 0.0 {
        return Err(CoherentError::InvalidArgument(format!("x = {x} must be nonnegative")));
    }
    let w = match r {
        2 => (-x - 1.0).exp() * x.sqrt() * bessel_i(1.0, 2.0 * x.sqrt(), WEIGHT_TOL)?,
        3 => {
            let h = (x / 2.0).sqrt();
            0.5 * h
                * (-x / 2.0 - 1.0).exp()
                * (2.0 / PI.sqrt() * ofm(&[0.5, 1.5], x / 8.0)? + h * ofm(&[1.5, 2.0], x / 8.0)?)
        }
        4 => {
            let g = gamma(2.0 / 3.0);
            let y = x / 81.0;
            let bracket = 3f64.powf(13.0 / 6.0) * g * g * x.cbrt() * ofm(&[1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0], y)?
                + 3f64.powf(4.0 / 3.0) * PI * x.powf(2.0 / 3.0) * ofm(&[2.0 / 3.0, 4.0 / 3.0, 5.0 / 3.0], y)?
                + PI * g * x * ofm(&[4.0 / 3.0, 5.0 / 3.0, 2.0], y)?;
            (-x / 3.0 - 1.0).exp() * bracket / (18.0 * PI * g)
        }
        _ => return Err(CoherentError::InvalidArgument(format!("no continuous weight for r = {r}"))),
    };
    if w.is_finite() {
        Ok(w)
    } else {
        Err(CoherentError::Overflow(x))
    }
}

/// A quadrature result against the exact moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentCheck {
    pub value: f64,
    pub exact: f64,
    pub rel_err: f64,
}

/// `∫ x^n W(x) x^{p-1} dx` style moments: for `r = 1` the comb is summed,
/// otherwise the integral runs over `[0,1], [1,4], [4,16], …` until a
/// block contributes less than `1e-14` of the total.
pub fn moment_quadrature(r: u32, n: u32) -> Result<MomentCheck, CoherentError> {
    if n > 12 {
        return Err(CoherentError::InvalidArgument(format!("moment order {n} above 12")));
    }
    let exact = bell_r1(r, n + 1, BellMode::Exact)?.as_f64();
    let value = if r == 1 {
        let mut acc = 0.0;
        for (k, m) in dirac_comb(200) {
            acc += k.powi(n as i32) * m;
        }
        acc
    } else {
        let f = |x: f64| x.powi(n as i32) * weight_eval(r, x).unwrap_or(f64::NAN);
        let mut acc = 0.0;
        let (mut a, mut b) = (0.0, 1.0);
        loop {
            let out = quadrature::integrate(f, a, b, 1e-13 * exact.max(1.0));
            acc += out.integral;
            if out.integral.abs() < 1e-14 * acc.abs() && b > 16.0 {
                break;
            }
            if b > 1e5 {
                return Err(CoherentError::NonConvergence(out.num_function_evaluations as usize));
            }
            a = b;
            b *= 4.0;
        }
        acc
    };
    Ok(MomentCheck { value, exact, rel_err: ((value - exact) / exact).abs() })
}

/// Figure data kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Weight,
    Mandel,
    Mandel0,
    Squeeze,
    Squeeze0,
    Snr,
    Metric,
}

impl FigureKind {
    pub const ALL: [FigureKind; 7] = [
        FigureKind::Weight,
        FigureKind::Mandel,
        FigureKind::Mandel0,
        FigureKind::Squeeze,
        FigureKind::Squeeze0,
        FigureKind::Snr,
        FigureKind::Metric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Weight => "weight",
            FigureKind::Mandel => "mandel",
            FigureKind::Mandel0 => "mandel0",
            FigureKind::Squeeze => "squeeze",
            FigureKind::Squeeze0 => "squeeze0",
            FigureKind::Snr => "snr",
            FigureKind::Metric => "metric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            FigureKind::Weight => &["r", "x", "W"],
            FigureKind::Mandel | FigureKind::Mandel0 => &["r", "p", "x", "Q"],
            FigureKind::Squeeze | FigureKind::Squeeze0 => &["r", "rez", "SQ", "SP"],
            FigureKind::Snr => &["r", "rez", "sigma_bar"],
            FigureKind::Metric => &["r", "x", "omega"],
        }
    }

    fn rs(self) -> std::ops::RangeInclusive<u32> {
        match self {
            FigureKind::Squeeze | FigureKind::Squeeze0 => 1..=3,
            _ => 1..=4,
        }
    }

    fn p(self) -> u32 {
        match self {
            FigureKind::Mandel0 | FigureKind::Squeeze0 => 0,
            _ => 1,
        }
    }

    /// Sample points `(r, abscissa)` in output order.
    pub fn grid(self) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        for r in self.rs() {
            match self {
                FigureKind::Weight if r == 1 => out.extend((1..=10).map(|k| (1, k as f64))),
                FigureKind::Weight => out.extend((0..=200).map(|i| (r, i as f64 / 20.0))),
                FigureKind::Mandel | FigureKind::Mandel0 | FigureKind::Metric => {
                    out.extend((1..=200).map(|i| (r, i as f64 / 20.0)))
                }
                FigureKind::Squeeze | FigureKind::Squeeze0 | FigureKind::Snr => {
                    out.extend((1..=100).map(|i| (r, i as f64 / 50.0)))
                }
            }
        }
        out
    }

    /// The `ρ` behind a curve; shared by every point with the same `r`.
    pub fn rho(self, r: u32) -> Result<RhoSequence, CoherentError> {
        RhoSequence::bell(r, self.p(), ZeroConvention::Integer, DEFAULT_NMAX)
    }

    /// One CSV row for a grid point. `W` on the `r = 1` rows is the comb mass at `x`.
    pub fn row(self, r: u32, t: f64) -> Result<Vec<String>, CoherentError> {
        self.row_with(&self.rho(r)?, r, t)
    }

    /// [`FigureKind::row`] with `rho` already built by [`FigureKind::rho`].
    pub fn row_with(self, rho: &RhoSequence, r: u32, t: f64) -> Result<Vec<String>, CoherentError> {
        let f = |v: f64| format!("{v:.12e}");
        Ok(match self {
            FigureKind::Weight => {
                let w = if r == 1 { dirac_comb(t as usize)[t as usize - 1].1 } else { weight_eval(r, t)? };
                vec![r.to_string(), t.to_string(), f(w)]
            }
            FigureKind::Mandel | FigureKind::Mandel0 => {
                vec![r.to_string(), self.p().to_string(), t.to_string(), f(mandel_q(rho, t)?)]
            }
            FigureKind::Squeeze | FigureKind::Squeeze0 => {
                let (sq, sp) = squeezing_params(rho, Complex64::new(t, 0.0))?;
                vec![r.to_string(), t.to_string(), f(sq), f(sp)]
            }
            FigureKind::Snr => vec![r.to_string(), t.to_string(), f(snr_sigma(rho, t)?.1)],
            FigureKind::Metric => vec![r.to_string(), t.to_string(), f(metric_factor(rho, t)?)],
        })
    }
}

/// First sign change of `Q` on a uniform grid over `(0, xmax]`, refined by bisection.
pub fn mandel_crossover(rho: &RhoSequence, xmax: f64, steps: usize) -> Result<Option<f64>, CoherentError> {
    let h = xmax / steps as f64;
    let mut lo = h;
    let mut qlo = mandel_q(rho, lo)?;
    for i in 2..=steps {
        let hi = i as f64 * h;
        let qhi = mandel_q(rho, hi)?;
        if qlo.signum() != qhi.signum() {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if mandel_q(rho, m)?.signum() == qlo.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        lo = hi;
        qlo = qhi;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{to_f64, FormalPowerSeries, Rational};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn pfq_examples() {
        assert!(close(pfq(&[], &[], 1.0, 1e-17).unwrap(), E, 1e-15));
        let v = 6.0 / E * pfq(&[4.0], &[2.0], 1.0, 1e-17).unwrap();
        assert!(close(v, 13.0, 1e-10));
        assert_eq!(pfq(&[1.0], &[-2.0], 0.5, 1e-12), Err(CoherentError::PoleParameter(-2.0)));
        assert!(matches!(pfq(&[1.0, 1.0], &[], 2.0, 1e-12), Err(CoherentError::NonConvergence(_) | CoherentError::Overflow(_))));
    }

    #[test]
    fn bessel_agrees_with_hypergeometric() {
        for x in [0.1, 1.0, 2.0, 7.5] {
            let via_pfq = (x / 2.0) * pfq(&[], &[2.0], x * x / 4.0, 1e-17).unwrap();
            assert!(close(bessel_i(1.0, x, 1e-17).unwrap(), via_pfq, 1e-12), "x={x}");
        }
        assert!(close(bessel_i(1.0, 2.0, 1e-17).unwrap(), 1.590_636_854_637_329, 1e-13));
    }

    #[test]
    fn pfq_against_exact_series() {
        // 1F1(1;2;x) = (e^x - 1)/x, partial sums of the exact exponential
        let e = FormalPowerSeries::exp_x(30);
        for x in [0.5f64, 1.0, 3.0] {
            let exact = (to_f64(&e.eval(&Rational::from_float(x).unwrap())) - 1.0) / x;
            assert!(close(pfq(&[1.0], &[2.0], x, 1e-17).unwrap(), exact, 1e-12));
        }
    }

    #[test]
    fn bell_r1_examples() {
        let seq: Vec<f64> = (1..=6).map(|n| bell_r1(2, n, BellMode::Exact).unwrap().as_f64()).collect();
        assert_eq!(seq, vec![1.0, 3.0, 13.0, 73.0, 501.0, 4051.0]);
        assert_eq!(bell_r1(4, 3, BellMode::Exact).unwrap(), BellValue::Exact(BigInt::from(41)));
        assert_eq!(bell_r1(4, 4, BellMode::Exact).unwrap(), BellValue::Exact(BigInt::from(465)));
        let d = bell_r1(1, 5, BellMode::Dobinski { terms: 80 }).unwrap();
        assert!(close(d.as_f64(), 52.0, 1e-9));
        for r in 2..=4u32 {
            for n in 1..=6u32 {
                let exact = bell_r1(r, n, BellMode::Exact).unwrap().as_f64();
                let BellValue::Approx(s) = bell_r1(r, n, BellMode::Dobinski { terms: 60 }).unwrap() else { panic!() };
                assert!(close(s.value, exact, 1e-12), "r={r} n={n}");
                assert!(s.tail_bound.unwrap() < 1e-12 * exact);
            }
            let zero = bell_r1(r, 0, BellMode::Dobinski { terms: 60 }).unwrap().as_f64();
            assert!(close(zero, (E - 1.0) / E, 1e-14));
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_eval(2, 0.0).unwrap(), 0.0);
        let mass: f64 = dirac_comb(60).iter().map(|c| c.1).sum();
        assert!(close(mass, 1.0, 1e-12));
        assert!(weight_eval(5, 1.0).is_err());
        for r in 2..=4 {
            for i in 0..400 {
                assert!(weight_eval(r, i as f64 * 0.25).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn moment_identity() {
        for r in 1..=4 {
            for n in 0..=6 {
                let m = moment_quadrature(r, n).unwrap();
                assert!(m.rel_err < 1e-6, "r={r} n={n} {m:?}");
            }
        }
        assert!(moment_quadrature(1, 3).unwrap().rel_err < 1e-10);
    }

    #[test]
    fn normalization_examples() {
        let fact = RhoSequence::factorial(DEFAULT_NMAX);
        for x in [0.0, 0.7, 3.0, 20.0] {
            let n = normalization(&fact, x, DEFAULT_TOL).unwrap();
            for v in [n.value, n.d1, n.d2] {
                assert!(close(v, x.exp(), 1e-13));
            }
        }
        let r2 = RhoSequence::bell_default(2, 1).unwrap();
        assert_eq!(normalization(&r2, 0.0, DEFAULT_TOL).unwrap().value, 1.0);
        let direct: f64 = bell_rs_sequence(2, 1, 40)[1..].iter().map(|b| 1.0 / b.to_f64().unwrap()).sum();
        assert!(close(normalization(&r2, 1.0, DEFAULT_TOL).unwrap().value, direct, 1e-14));
        let short = RhoSequence::bell(2, 1, ZeroConvention::Integer, 5).unwrap();
        assert!(matches!(normalization(&short, 50.0, DEFAULT_TOL), Err(CoherentError::TailBudget { .. })));
    }

    #[test]
    fn conventional_reduction() {
        let fact = RhoSequence::factorial(DEFAULT_NMAX);
        for x in [0.25, 1.0, 2.0, 5.0] {
            assert!(mandel_q(&fact, x).unwrap().abs() < 1e-10);
            assert!((metric_factor(&fact, x).unwrap() - 1.0).abs() < 1e-10);
            let (sq, sp) = squeezing_params(&fact, Complex64::new(x.sqrt(), 0.3)).unwrap();
            assert!((sq - 0.25).abs() < 1e-10 && (sp - 0.25).abs() < 1e-10);
            let (s, sb) = snr_sigma(&fact, x.sqrt()).unwrap();
            assert!(close(s, 4.0 * x, 1e-10) && sb.abs() < 1e-9);
        }
        let (s, sb) = snr_sigma(&fact, 1.0).unwrap();
        assert!(close(s, 4.0, 1e-10) && sb.abs() < 1e-10);
        assert!(snr_sigma(&fact, 1e-6).unwrap().0 < 1e-10);
    }

    #[test]
    fn state_is_normalized() {
        for r in 1..=4 {
            let rho = RhoSequence::bell_default(r, 1).unwrap();
            let s = StateVector::new(&rho, Complex64::new(1.2, -0.7), 1e-17).unwrap();
            assert!(close(s.norm_sqr(), 1.0, 1e-13));
        }
    }

    #[test]
    fn bell_states_diagnostics() {
        let r1 = RhoSequence::bell_default(1, 1).unwrap();
        for x in [0.5, 1.0, 2.0, 4.0] {
            assert!(mandel_q(&r1, x).unwrap() > 0.0);
        }
        let (sq, sp) = squeezing_params(&r1, Complex64::new(1.0, 0.0)).unwrap();
        assert!(sp < 0.25 && sq > 0.25);
        for r in 1..=4 {
            let rho = RhoSequence::bell_default(r, 1).unwrap();
            for a in [0.3, 0.8, 1.5] {
                let (q_i, p_i) = squeezing_params(&rho, Complex64::new(0.0, a)).unwrap();
                let (q_r, p_r) = squeezing_params(&rho, Complex64::new(a, 0.0)).unwrap();
                assert!((q_i - p_r).abs() < 1e-12 && (p_i - q_r).abs() < 1e-12);
            }
            for i in 1..=10 {
                assert!(snr_sigma(&rho, 0.2 * i as f64).unwrap().1 < 0.0, "r={r}");
            }
            assert!(close(metric_factor(&rho, 0.0).unwrap(), 1.0 / rho.ratio(1), 1e-14));
            // ω(x) near zero approaches ρ(0)/ρ(1)
            assert!((metric_factor(&rho, 1e-7).unwrap() - metric_factor(&rho, 0.0).unwrap()).abs() < 1e-5);
        }
        let dev = |r| {
            let rho = RhoSequence::bell_default(r, 1).unwrap();
            (1..=20).map(|i| (metric_factor(&rho, 0.25 * i as f64).unwrap() - 1.0).abs()).fold(0.0, f64::max)
        };
        let d1 = dev(1);
        assert!((2..=4).all(|r| dev(r) < d1));
    }

    #[test]
    fn diagnostics_depend_on_modulus() {
        let rho = RhoSequence::bell_default(3, 1).unwrap();
        let a = StateVector::new(&rho, Complex64::from_polar(1.3, 0.4), 1e-17).unwrap().moments().2;
        let b = StateVector::new(&rho, Complex64::from_polar(1.3, 2.1), 1e-17).unwrap().moments().2;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn p0_crossover() {
        let rho = RhoSequence::bell_default(2, 0).unwrap();
        assert!(mandel_q(&rho, 0.05).unwrap() < 0.0);
        let x = mandel_crossover(&rho, 10.0, 200).unwrap().expect("crossover in range");
        assert!(x > 0.5 && x < 10.0);
        let r1 = RhoSequence::bell_default(1, 0).unwrap();
        assert!((1..=40).all(|i| mandel_q(&r1, 0.25 * i as f64).unwrap() > 0.0));
    }

    #[test]
    fn series_zero_convention() {
        let int = RhoSequence::bell(3, 0, ZeroConvention::Integer, 50).unwrap();
        let ser = RhoSequence::bell(3, 0, ZeroConvention::Series, 50).unwrap();
        assert_eq!(int.rho(0), 1.0);
        assert!(close(ser.rho(0), (E - 1.0) / E, 1e-15));
        assert_eq!(int.rho(3), ser.rho(3));
    }

    #[test]
    fn figure_grids_have_schema_width() {
        for kind in FigureKind::ALL {
            let grid = kind.grid();
            assert!(!grid.is_empty());
            for &(r, t) in grid.iter().step_by(37) {
                assert_eq!(kind.row(r, t).unwrap().len(), kind.header().len(), "{}", kind.name());
            }
        }
    }
}
