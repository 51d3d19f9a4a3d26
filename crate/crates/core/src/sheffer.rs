//! Sheffer-type polynomials, their ladder operators, and the flow equations
//! behind `exp(λ(q(a†)a + v(a†)))`.
//!
//! The exponential factorizes as `:G(λ,a†) exp((T(λ,a†) - a†) a):` with
//! `∂_λ T = q(T)`, `∂_λ G = v(T) G`, `T(0,x) = x`, `G(0,x) = 1`. Both are
//! solved order by order in `λ` through partial Bell polynomials, so every
//! coefficient is exact.

use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::{BosonExpr, Gen, NormalForm};
use crate::poly::Polynomial;
use crate::series::{big_rat, binomial, factorial, rat, standard, BivariateSeries, FormalPowerSeries, Rational, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShefferError {
    #[error("f must have f_0 = 0 and f_1 != 0")]
    BadF,
    #[error("g must have g_0 != 0")]
    BadG,
    #[error("A must have A_0 != 0")]
    BadA,
    #[error("B must have B_0 = 0 and B_1 != 0")]
    BadB,
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("series of order {got} given where order {needed} is required")]
    InsufficientOrder { needed: usize, got: usize },
    #[error("operation needs a pair centered at zero, got center {0}")]
    Centered(Rational),
    #[error("tail magnitude {tail:e} above budget {budget:e}")]
    TailBudget { tail: f64, budget: f64 },
    #[error("cannot parse series `{0}`")]
    Parse(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A Sheffer pair `(f, g)`; the sequence has EGF
/// `exp(x f⁻¹(λ)) / g(f⁻¹(λ))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShefferPair {
    f: FormalPowerSeries,
    g: FormalPowerSeries,
}

impl ShefferPair {
    pub fn new(f: FormalPowerSeries, g: FormalPowerSeries) -> Result<Self, ShefferError> {
        if !f.slot(0).is_zero() || f.get(1).is_none_or(Zero::is_zero) {
            return Err(ShefferError::BadF);
        }
        if g.slot(0).is_zero() {
            return Err(ShefferError::BadG);
        }
        Ok(ShefferPair { f, g })
    }

    pub fn f(&self) -> &FormalPowerSeries {
        &self.f
    }

    pub fn g(&self) -> &FormalPowerSeries {
        &self.g
    }

    pub fn order(&self) -> usize {
        self.f.order().min(self.g.order())
    }

    /// `(A, B)` with `B = f⁻¹` and `A = 1/g(B)`.
    pub fn transfer(&self) -> Result<(FormalPowerSeries, FormalPowerSeries), ShefferError> {
        let order = self.order();
        let b = self.f.truncate(order).comp_inverse()?;
        let a = self.g.truncate(order).compose(&b)?.recip()?;
        Ok((a, b))
    }

    /// `A(λ) exp(x B(λ))` through the pair's order in both variables.
    pub fn egf(&self) -> Result<BivariateSeries, ShefferError> {
        let (a, b) = self.transfer()?;
        egf_from_ab(&a, &b, self.order())
    }

    pub fn ladder(&self) -> Result<LadderRep, ShefferError> {
        let order = self.order();
        let fp = self.f.truncate(order).derivative();
        let alpha = fp.recip()?;
        let g = self.g.truncate(order);
        let beta = -&g.derivative().mul_series(&g.truncate(order - 1).recip()?).mul_series(&alpha);
        Ok(LadderRep { p: self.f.truncate(order), alpha, beta })
    }
}

/// `A(λ) exp(x B(λ))` as a bivariate series with both orders `order`.
pub fn egf_from_ab(a: &FormalPowerSeries, b: &FormalPowerSeries, order: usize) -> Result<BivariateSeries, ShefferError> {
    let xb = BivariateSeries::from_fn(order, order, |n, m| if m == 1 { b.get(n).cloned().unwrap_or_default() } else { Rational::zero() });
    let e = xb.exp()?;
    Ok(BivariateSeries::from_lambda_series(&a.truncate(order), order).mul_series(&e))
}

/// `s_n(x)`, read off the EGF: `[x^k] s_n = (A B^k)_n / k!`.
pub fn sheffer_sequence(pair: &ShefferPair, n: usize) -> Result<Polynomial, ShefferError> {
    if pair.order() < n {
        return Err(ShefferError::InsufficientOrder { needed: n, got: pair.order() });
    }
    let (a, b) = pair.transfer()?;
    let (a, b) = (a.truncate(n), b.truncate(n));
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut power = a;
    for k in 0..=n {
        if k > 0 {
            power = power.mul_series(&b);
        }
        coeffs.push(power.slot(n) / big_rat(factorial(k)));
    }
    Ok(Polynomial::new(coeffs))
}

/// Lowering `P = f(D)` and raising `M = X α(D) + β(D)` with
/// `α = 1/f'` and `β = -(g'/g)/f'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderRep {
    pub p: FormalPowerSeries,
    pub alpha: FormalPowerSeries,
    pub beta: FormalPowerSeries,
}

/// `Σ_j (f_j/j!) D^j p` for a polynomial `p`; `f` needs order ≥ deg p.
pub fn apply_d_series(f: &FormalPowerSeries, p: &Polynomial) -> Result<Polynomial, ShefferError> {
    let deg = p.degree().unwrap_or(0);
    if f.order() < deg {
        return Err(ShefferError::InsufficientOrder { needed: deg, got: f.order() });
    }
    let mut acc = Polynomial::zero();
    let mut dj = p.clone();
    for j in 0..=deg {
        if j > 0 {
            dj = dj.derivative();
        }
        acc = acc.add(&dj.scale(&f.ogf_coeff(j)));
    }
    Ok(acc)
}

impl LadderRep {
    pub fn lower(&self, p: &Polynomial) -> Result<Polynomial, ShefferError> {
        apply_d_series(&self.p, p)
    }

    pub fn raise(&self, p: &Polynomial) -> Result<Polynomial, ShefferError> {
        let xa = Polynomial::variable().mul(&apply_d_series(&self.alpha, p)?);
        Ok(xa.add(&apply_d_series(&self.beta, p)?))
    }

    /// `[P, M] p`.
    pub fn commutator(&self, p: &Polynomial) -> Result<Polynomial, ShefferError> {
        Ok(self.lower(&self.raise(p)?)?.sub(&self.raise(&self.lower(p)?)?))
    }

    /// `M` written as `X(…) + (…)` in powers of `D` through `terms`.
    pub fn render_raising(&self, terms: usize) -> String {
        format!("X*({}) + ({})", render_d(&self.alpha, terms), render_d(&self.beta, terms))
    }

    pub fn render_lowering(&self, terms: usize) -> String {
        render_d(&self.p, terms)
    }
}

fn render_d(f: &FormalPowerSeries, terms: usize) -> String {
    let n = terms.min(f.order());
    let p = Polynomial::new((0..=n).map(|j| f.ogf_coeff(j)).collect());
    let tail = if f.order() > n && (n + 1..=f.order()).any(|j| !f.slot(j).is_zero()) { " + …" } else { "" };
    format!("{}{tail}", p.render("D"))
}

/// Named pairs from the classical list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogName {
    Hermite,
    Laguerre,
    Bessel,
    Bell,
    LowerFactorial,
    Hahn,
    Idempotent,
}

impl CatalogName {
    pub const ALL: [CatalogName; 7] = [
        CatalogName::Hermite,
        CatalogName::Laguerre,
        CatalogName::Bessel,
        CatalogName::Bell,
        CatalogName::LowerFactorial,
        CatalogName::Hahn,
        CatalogName::Idempotent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogName::Hermite => "hermite",
            CatalogName::Laguerre => "laguerre",
            CatalogName::Bessel => "bessel",
            CatalogName::Bell => "bell",
            CatalogName::LowerFactorial => "lower_factorial",
            CatalogName::Hahn => "hahn",
            CatalogName::Idempotent => "idempotent",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ShefferError> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| ShefferError::UnknownCatalog(s.to_string()))
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A catalog pair with its `(A, B)` written down independently of the
/// inversion, so the EGF can be checked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: CatalogName,
    pub pair: ShefferPair,
    pub ladder: LadderRep,
    pub expected_a: FormalPowerSeries,
    pub expected_b: FormalPowerSeries,
}

impl CatalogEntry {
    pub fn expected_egf(&self) -> Result<BivariateSeries, ShefferError> {
        egf_from_ab(&self.expected_a, &self.expected_b, self.pair.order())
    }
}

pub fn catalog(name: CatalogName, order: usize) -> Result<CatalogEntry, ShefferError> {
    use FormalPowerSeries as F;
    let o = order.max(2);
    let x = F::x(o);
    let one = F::one(o);
    let (f, g, a, b) = match name {
        CatalogName::Hermite => {
            // g = e^{t^2/4}
            let t2 = F::polynomial(&[rat(0), rat(0), rat(2)], o);
            let g = t2.scale(&crate::series::ratio(1, 4)).exp()?;
            let a = t2.scale(&rat(-1)).exp()?;
            (x.scale(&crate::series::ratio(1, 2)), g, a, x.scale(&rat(2)))
        }
        CatalogName::Laguerre => {
            // f = x/(x-1), g = 1/(1-t); A = 1/(1-λ), B = λ/(λ-1)
            let geo = F::from_ogf(&vec![rat(1); o + 1], o);
            let f = -&x.mul_series(&geo);
            (f.clone(), geo.clone(), geo, f)
        }
        CatalogName::Bessel => {
            let f = F::polynomial(&[rat(0), rat(1), rat(-1)], o);
            let b = &one - &standard::binomial_power(&rat(-2), &crate::series::ratio(1, 2), o);
            (f, one.clone(), one.clone(), b)
        }
        CatalogName::Bell => (standard::log1p(o), one.clone(), one.clone(), &F::exp_x(o) - &one),
        CatalogName::LowerFactorial => (&F::exp_x(o) - &one, one.clone(), one.clone(), standard::log1p(o)),
        CatalogName::Hahn => {
            let g = standard::cos(o).recip()?;
            let t2 = F::polynomial(&[rat(0), rat(0), rat(2)], o);
            let a = standard::binomial_power(&rat(1), &crate::series::ratio(-1, 2), o).compose(&t2)?;
            (standard::tan(o), g, a, standard::arctan(o))
        }
        CatalogName::Idempotent => (standard::lambert_w(o), one.clone(), one.clone(), F::exp_x(o - 1).mul_x()),
    };
    let pair = ShefferPair::new(f, g)?;
    let ladder = pair.ladder()?;
    Ok(CatalogEntry { name, pair, ladder, expected_a: a.truncate(o), expected_b: b.truncate(o) })
}

/// The operator `q(a†) a + v(a†)`. A nonzero center `c` means `q` and `v`
/// are stored as functions of `y = x - c`; the coherent-state sequences are
/// read off at `y = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QVPair {
    q: FormalPowerSeries,
    v: FormalPowerSeries,
    center: Rational,
    /// True when `q` and `v` are polynomials, so padding with zeros is exact.
    polynomial: bool,
}

impl QVPair {
    /// Truncated series; flows need orders of at least `L + X - 1`.
    pub fn new(q: FormalPowerSeries, v: FormalPowerSeries) -> Self {
        QVPair { q, v, center: Rational::zero(), polynomial: false }
    }

    pub fn centered(q: FormalPowerSeries, v: FormalPowerSeries, center: Rational) -> Self {
        QVPair { q, v, center, polynomial: false }
    }

    /// Polynomials given by their ordinary coefficients.
    pub fn polynomial(q: &[Rational], v: &[Rational]) -> Self {
        let order = q.len().max(v.len()).max(1);
        QVPair {
            q: FormalPowerSeries::from_ogf(q, order),
            v: FormalPowerSeries::from_ogf(v, order),
            center: Rational::zero(),
            polynomial: true,
        }
    }

    pub fn from_ints(q: &[i64], v: &[i64]) -> Self {
        let c = |s: &[i64]| s.iter().map(|&x| rat(x)).collect::<Vec<_>>();
        Self::polynomial(&c(q), &c(v))
    }

    pub fn q(&self) -> &FormalPowerSeries {
        &self.q
    }

    pub fn v(&self) -> &FormalPowerSeries {
        &self.v
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    fn at_order(&self, f: &FormalPowerSeries, order: usize) -> Result<FormalPowerSeries, ShefferError> {
        if f.order() >= order {
            Ok(f.truncate(order))
        } else if self.polynomial {
            Ok(FormalPowerSeries::polynomial(f.slots(), order))
        } else {
            Err(ShefferError::InsufficientOrder { needed: order, got: f.order() })
        }
    }

    /// `q(a†)a + v(a†)` as an expression, when the pair is a polynomial about zero.
    pub fn to_expr(&self) -> Result<BosonExpr, ShefferError> {
        if !self.center.is_zero() {
            return Err(ShefferError::Centered(self.center.clone()));
        }
        let mut terms = Vec::new();
        for (k, c) in self.q.ogf_coeffs().into_iter().enumerate() {
            if !c.is_zero() {
                let mut w = vec![Gen::Ad; k];
                w.push(Gen::A);
                terms.push((c, BosonExpr::Word(w)));
            }
        }
        for (k, c) in self.v.ogf_coeffs().into_iter().enumerate() {
            if !c.is_zero() {
                terms.push((c, BosonExpr::Word(vec![Gen::Ad; k])));
            }
        }
        Ok(BosonExpr::sum(terms))
    }
}

/// Parses EGF slots such as `0,1,0,0` or `1/2, -3`.
pub fn parse_slots(text: &str) -> Result<FormalPowerSeries, ShefferError> {
    let slots: Result<Vec<Rational>, _> = text.split(',').map(|t| t.trim().parse::<Rational>()).collect();
    match slots {
        Ok(s) if !s.is_empty() => Ok(FormalPowerSeries::from_slots(s)),
        _ => Err(ShefferError::Parse(text.to_string())),
    }
}

/// `T(λ,x)` and `G(λ,x)` to the requested orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSolution {
    pub t: BivariateSeries,
    pub g: BivariateSeries,
}

fn derivatives(f: &FormalPowerSeries, count: usize, x_order: usize) -> Vec<FormalPowerSeries> {
    let mut out = Vec::with_capacity(count + 1);
    let mut d = f.clone();
    for k in 0..=count {
        if k > 0 {
            d = d.derivative();
        }
        out.push(d.truncate(x_order));
    }
    out
}

/// Partial Bell polynomials `B_{n,k}(U_1, …)` row by row; row `n` needs `U_1..U_n`.
struct PartialBell {
    rows: Vec<Vec<FormalPowerSeries>>,
    x_order: usize,
}

impl PartialBell {
    fn new(x_order: usize) -> Self {
        PartialBell { rows: vec![vec![FormalPowerSeries::one(x_order)]], x_order }
    }

    fn push_row(&mut self, u: &[FormalPowerSeries]) {
        let n = self.rows.len();
        let mut row = vec![FormalPowerSeries::zero(self.x_order)];
        for k in 1..=n {
            let mut acc = FormalPowerSeries::zero(self.x_order);
            for i in 1..=n - k + 1 {
                let prev = &self.rows[n - i];
                if k - 1 < prev.len() {
                    let c = big_rat(binomial(n - 1, i - 1));
                    acc = acc.add_series(&u[i].mul_series(&prev[k - 1]).scale(&c));
                }
            }
            row.push(acc);
        }
        self.rows.push(row);
    }

    /// `[F∘T]_n = Σ_k F^{(k)} B_{n,k}` given the derivatives of `F`.
    fn compose(&self, ders: &[FormalPowerSeries], n: usize) -> FormalPowerSeries {
        let mut acc = FormalPowerSeries::zero(self.x_order);
        for (k, b) in self.rows[n].iter().enumerate() {
            acc = acc.add_series(&ders[k].mul_series(b));
        }
        acc
    }
}

fn partial_bell_of(t: &BivariateSeries) -> PartialBell {
    let mut pb = PartialBell::new(t.x_order());
    for _ in 1..=t.lambda_order() {
        pb.push_row(t.lambda_slots());
    }
    pb
}

/// Solves the flow equations in the pair's local coordinate.
pub fn solve_flow(qv: &QVPair, lambda_order: usize, x_order: usize) -> Result<FlowSolution, ShefferError> {
    let need = (lambda_order + x_order).saturating_sub(1);
    let q = qv.at_order(&qv.q, need)?;
    let v = qv.at_order(&qv.v, need)?;
    let qd = derivatives(&q, lambda_order, x_order);
    let vd = derivatives(&v, lambda_order, x_order);
    let mut t = vec![FormalPowerSeries::x(x_order)];
    let mut g = vec![FormalPowerSeries::one(x_order)];
    let mut vt = Vec::new();
    let mut pb = PartialBell::new(x_order);
    for n in 0..lambda_order {
        if n > 0 {
            pb.push_row(&t);
        }
        t.push(pb.compose(&qd, n));
        vt.push(pb.compose(&vd, n));
        let mut next = FormalPowerSeries::zero(x_order);
        for j in 0..=n {
            let c = big_rat(binomial(n, j));
            next = next.add_series(&vt[j].mul_series(&g[n - j]).scale(&c));
        }
        g.push(next);
    }
    Ok(FlowSolution { t: BivariateSeries::from_lambda_slots(t), g: BivariateSeries::from_lambda_slots(g) })
}

/// Oracle for [`solve_flow`]: the Lie series `T_n = (q∂)^n x`, `G_n = (q∂ + v)^n 1`.
pub fn solve_flow_lie(qv: &QVPair, lambda_order: usize, x_order: usize) -> Result<FlowSolution, ShefferError> {
    let work = lambda_order + x_order;
    let q = qv.at_order(&qv.q, work)?;
    let v = qv.at_order(&qv.v, work)?;
    let step = |f: &FormalPowerSeries, with_v: bool| {
        let d = q.mul_series(&f.derivative());
        if with_v {
            d.add_series(&v.mul_series(f))
        } else {
            d
        }
    };
    let mut t = vec![FormalPowerSeries::x(work)];
    let mut g = vec![FormalPowerSeries::one(work)];
    for n in 0..lambda_order {
        t.push(step(&t[n], false));
        g.push(step(&g[n], true));
    }
    let trunc = |s: Vec<FormalPowerSeries>| BivariateSeries::from_lambda_slots(s.iter().map(|f| f.truncate(x_order)).collect());
    Ok(FlowSolution { t: trunc(t), g: trunc(g) })
}

/// `exp(λ(q(a†)a + v(a†)))` expanded slot by slot in normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearExpNormalForm {
    pub flow: FlowSolution,
}

impl LinearExpNormalForm {
    /// Normal form of `(q(a†)a + v(a†))^n`, the `λ^n/n!` slot of
    /// `:G(λ,a†) exp((T(λ,a†) - a†) a):`. Exact while `x_order` covers the
    /// highest power of `a†` that occurs.
    pub fn slot(&self, n: usize) -> NormalForm {
        let FlowSolution { t, g } = &self.flow;
        let pb = partial_bell_of(t);
        let mut nf = NormalForm::zero();
        for l in 0..=n {
            let mut poly = FormalPowerSeries::zero(t.x_order());
            for j in l..=n {
                let c = big_rat(binomial(n, j));
                poly = poly.add_series(&g.lambda_slot(n - j).mul_series(&pb.rows[j][l]).scale(&c));
            }
            for (k, c) in poly.slots().iter().enumerate() {
                if !c.is_zero() {
                    nf.add_term(k as u32, l as u32, c / big_rat(factorial(k)));
                }
            }
        }
        nf
    }
}

pub fn normal_order_linear_exp(qv: &QVPair, lambda_order: usize, x_order: usize) -> Result<LinearExpNormalForm, ShefferError> {
    if !qv.center.is_zero() {
        return Err(ShefferError::Centered(qv.center.clone()));
    }
    Ok(LinearExpNormalForm { flow: solve_flow(qv, lambda_order, x_order)? })
}

/// `⟨z'|e^{λ(q(a†)a+v(a†))}|z⟩/⟨z'|z⟩ = G(λ, z̄') exp((T(λ, z̄') - z̄') z)`
/// from the truncated flow. `budget` caps the outermost-shell magnitude of
/// both series.
pub fn cs_expectation_linear(
    qv: &QVPair,
    zprime_bar: Complex64,
    z: Complex64,
    lambda: f64,
    lambda_order: usize,
    x_order: usize,
    budget: f64,
) -> Result<Complex64, ShefferError> {
    if !qv.center.is_zero() {
        return Err(ShefferError::Centered(qv.center.clone()));
    }
    let flow = solve_flow(qv, lambda_order, x_order)?;
    let (t, t_tail) = flow.t.eval_complex(lambda, zprime_bar);
    let (g, g_tail) = flow.g.eval_complex(lambda, zprime_bar);
    let tail = t_tail.max(g_tail);
    if tail > budget {
        return Err(ShefferError::TailBudget { tail, budget });
    }
    Ok(g * ((t - zprime_bar) * z).exp())
}

/// `(q, v)` in local form about `z̄'` from a transfer pair `(A, B)`:
/// `q̃ = B' ∘ B⁻¹`, `ṽ = (A'/A) ∘ B⁻¹`.
pub fn qv_from_ab(a: &FormalPowerSeries, b: &FormalPowerSeries, zprime_bar: Rational) -> Result<QVPair, ShefferError> {
    if a.slot(0).is_zero() {
        return Err(ShefferError::BadA);
    }
    if !b.slot(0).is_zero() || b.get(1).is_none_or(Zero::is_zero) {
        return Err(ShefferError::BadB);
    }
    let order = a.order().min(b.order());
    let (a, b) = (a.truncate(order), b.truncate(order));
    let inv = b.comp_inverse()?;
    let q = b.derivative().compose(&inv)?;
    let log_deriv = a.derivative().mul_series(&a.recip()?);
    let v = log_deriv.compose(&inv)?;
    Ok(QVPair::centered(q, v, zprime_bar))
}

/// `(A, B) = (G̃(λ,0), T̃(λ,0))` in the local coordinate.
pub fn ab_from_qv(qv: &QVPair, lambda_order: usize) -> Result<(FormalPowerSeries, FormalPowerSeries), ShefferError> {
    let flow = solve_flow(qv, lambda_order, 0)?;
    Ok((flow.g.eval_x(&Rational::zero()), flow.t.eval_x(&Rational::zero())))
}

/// λ-slots of `A(λ) exp(z B(λ))`, the combinatorial sequence attached to the pair.
pub fn coherent_sequence(qv: &QVPair, z: &Rational, n: usize) -> Result<Vec<Rational>, ShefferError> {
    let (a, b) = ab_from_qv(qv, n)?;
    let e = b.scale(z).exp()?;
    Ok(a.mul_series(&e).slots().to_vec())
}

/// `G(λ,x) F(T(λ,x))` as a formal series in `λ` and `x`.
pub fn substitute_series(qv: &QVPair, f: &FormalPowerSeries, lambda_order: usize, x_order: usize) -> Result<BivariateSeries, ShefferError> {
    let need = lambda_order + x_order;
    if f.order() < need {
        return Err(ShefferError::InsufficientOrder { needed: need, got: f.order() });
    }
    let flow = solve_flow(qv, lambda_order, x_order)?;
    let pb = partial_bell_of(&flow.t);
    let fd = derivatives(f, lambda_order, x_order);
    let ft = BivariateSeries::from_lambda_slots((0..=lambda_order).map(|n| pb.compose(&fd, n)).collect());
    Ok(flow.g.mul_series(&ft))
}

/// [`substitute_series`] summed at a rational `λ` through the λ-order.
pub fn substitute_apply(
    qv: &QVPair,
    f: &FormalPowerSeries,
    lambda: &Rational,
    lambda_order: usize,
    x_order: usize,
) -> Result<FormalPowerSeries, ShefferError> {
    Ok(substitute_series(qv, f, lambda_order, x_order)?.eval_lambda(lambda))
}

/// `Σ λ^n/n! (q(x)D + v(x))^n F` applied directly.
pub fn direct_exponential(qv: &QVPair, f: &FormalPowerSeries, lambda_order: usize, x_order: usize) -> Result<BivariateSeries, ShefferError> {
    let work = lambda_order + x_order;
    if f.order() < work {
        return Err(ShefferError::InsufficientOrder { needed: work, got: f.order() });
    }
    let q = qv.at_order(&qv.q, work)?;
    let v = qv.at_order(&qv.v, work)?;
    let mut slots = vec![f.truncate(work)];
    for n in 0..lambda_order {
        let cur = &slots[n];
        slots.push(q.mul_series(&cur.derivative()).add_series(&v.mul_series(cur)));
    }
    Ok(BivariateSeries::from_lambda_slots(slots.iter().map(|s| s.truncate(x_order)).collect()))
}

/// Where the one-parameter group law first fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLawViolation {
    /// `"T"` or `"G"`.
    pub series: &'static str,
    pub lambda_power: usize,
    pub theta_power: usize,
    pub x_slot: usize,
}

impl fmt::Display for GroupLawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} law fails at λ^{} θ^{} x^{}", self.series, self.lambda_power, self.theta_power, self.x_slot)
    }
}

/// Checks `T(λ+θ,x) = T(θ, T(λ,x))` and `G(λ+θ,x) = G(λ,x) G(θ, T(λ,x))`
/// for every `λ^i θ^j` with `i + j ≤ order`, through `x_order`.
pub fn flow_group_law_check(qv: &QVPair, order: usize, x_order: usize) -> Result<Result<(), GroupLawViolation>, ShefferError> {
    let wide = solve_flow(qv, order, order + x_order)?;
    let pb = partial_bell_of(&wide.t.truncate(order, x_order));
    let first_mismatch = |a: &FormalPowerSeries, b: &FormalPowerSeries| (0..=x_order).find(|&m| a.slot(m) != b.slot(m));
    let g_narrow = wide.g.truncate(order, x_order);
    for j in 0..=order {
        let tj = derivatives(wide.t.lambda_slot(j), order - j, x_order);
        let gj = derivatives(wide.g.lambda_slot(j), order - j, x_order);
        for i in 0..=order - j {
            let t_rhs = pb.compose(&tj, i);
            let t_lhs = wide.t.lambda_slot(i + j).truncate(x_order);
            if let Some(m) = first_mismatch(&t_lhs, &t_rhs) {
                return Ok(Err(GroupLawViolation { series: "T", lambda_power: i, theta_power: j, x_slot: m }));
            }
            let mut g_rhs = FormalPowerSeries::zero(x_order);
            for a in 0..=i {
                let c = big_rat(binomial(i, a));
                g_rhs = g_rhs.add_series(&g_narrow.lambda_slot(i - a).mul_series(&pb.compose(&gj, a)).scale(&c));
            }
            let g_lhs = wide.g.lambda_slot(i + j).truncate(x_order);
            if let Some(m) = first_mismatch(&g_lhs, &g_rhs) {
                return Ok(Err(GroupLawViolation { series: "G", lambda_power: i, theta_power: j, x_slot: m }));
            }
        }
    }
    Ok(Ok(()))
}

/// `T = x/(1-λx)` for `q = x²`, slots `n! x^{n+1}`.
pub fn mobius_flow(lambda_order: usize, x_order: usize) -> BivariateSeries {
    BivariateSeries::from_fn(lambda_order, x_order, |n, m| {
        if m == n + 1 {
            big_rat(factorial(n) * factorial(m))
        } else {
            Rational::zero()
        }
    })
}

/// Monomiality residuals `M s_n - s_{n+1}`, `P s_n - n s_{n-1}` and
/// `[P,M] x^n - x^n` for `n ≤ nmax`; `None` when all vanish.
pub fn monomiality_failure(pair: &ShefferPair, ladder: &LadderRep, nmax: usize) -> Result<Option<String>, ShefferError> {
    let seq: Vec<Polynomial> = (0..=nmax + 1).map(|n| sheffer_sequence(pair, n)).collect::<Result<_, _>>()?;
    for n in 0..=nmax {
        if ladder.raise(&seq[n])? != seq[n + 1] {
            return Ok(Some(format!("M s_{n} != s_{}", n + 1)));
        }
        let expect = if n == 0 { Polynomial::zero() } else { seq[n - 1].scale(&rat(n as i64)) };
        if ladder.lower(&seq[n])? != expect {
            return Ok(Some(format!("P s_{n} != {n} s_{}", n.saturating_sub(1))));
        }
        if ladder.raise(&ladder.lower(&seq[n])?)? != seq[n].scale(&rat(n as i64)) {
            return Ok(Some(format!("MP s_{n} != {n} s_{n}")));
        }
        let xn = Polynomial::monomial(Rational::one(), n);
        if ladder.commutator(&xn)? != xn {
            return Ok(Some(format!("[P,M] x^{n} != x^{n}")));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{normal_order_wick, Limits};
    use crate::series::ratio;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn sequence_examples() {
        let bell = catalog(CatalogName::Bell, 8).unwrap();
        assert_eq!(sheffer_sequence(&bell.pair, 3).unwrap(), Polynomial::from_ints(&[0, 1, 3, 1]));
        let lf = catalog(CatalogName::LowerFactorial, 8).unwrap();
        assert_eq!(sheffer_sequence(&lf.pair, 2).unwrap(), Polynomial::from_ints(&[0, -1, 1]));
        let h = catalog(CatalogName::Hermite, 8).unwrap();
        assert_eq!(sheffer_sequence(&h.pair, 2).unwrap(), Polynomial::from_ints(&[-2, 0, 4]));
        for name in CatalogName::ALL {
            let e = catalog(name, 6).unwrap();
            let g0 = e.pair.g().slot(0).clone();
            assert_eq!(sheffer_sequence(&e.pair, 0).unwrap(), Polynomial::constant(Rational::one() / g0));
        }
        assert_eq!(ShefferPair::new(FormalPowerSeries::one(4), FormalPowerSeries::one(4)), Err(ShefferError::BadF));
        assert_eq!(ShefferPair::new(FormalPowerSeries::x(4), FormalPowerSeries::zero(4)), Err(ShefferError::BadG));
    }

    #[test]
    fn catalog_egfs_and_monomiality() {
        for name in CatalogName::ALL {
            let e = catalog(name, 9).unwrap();
            assert_eq!(e.pair.egf().unwrap(), e.expected_egf().unwrap(), "{name}");
            assert_eq!(monomiality_failure(&e.pair, &e.ladder, 8).unwrap(), None, "{name}");
        }
        assert!(matches!(CatalogName::parse("legendre"), Err(ShefferError::UnknownCatalog(_))));
    }

    #[test]
    fn ladder_examples() {
        let bell = catalog(CatalogName::Bell, 6).unwrap();
        assert_eq!(bell.ladder.render_raising(6), "X*(D+1) + (0)");
        assert_eq!(bell.ladder.p, standard::log1p(6));
        let h = catalog(CatalogName::Hermite, 6).unwrap();
        assert_eq!(h.ladder.render_raising(6), "X*(2) + (-D)");
        assert_eq!(h.ladder.render_lowering(6), "1/2*D");
        let id = ShefferPair::new(FormalPowerSeries::x(6), FormalPowerSeries::one(6)).unwrap();
        let l = id.ladder().unwrap();
        for n in 0..6 {
            let xn = Polynomial::monomial(rat(1), n);
            assert_eq!(l.raise(&xn).unwrap(), Polynomial::monomial(rat(1), n + 1));
            assert_eq!(l.lower(&xn).unwrap(), xn.derivative());
        }
        // Laguerre: M = -X(1-D)^2 + (1-D), whose D-free part is -X + 1
        let lag = catalog(CatalogName::Laguerre, 6).unwrap();
        assert_eq!(lag.ladder.render_raising(2), "X*(-D^2+2D-1) + (-D+1)");
    }

    #[test]
    fn flow_examples() {
        let shift = solve_flow(&QVPair::from_ints(&[1], &[]), 6, 6).unwrap();
        assert_eq!(shift.t, BivariateSeries::from_fn(6, 6, |n, m| rat(((n, m) == (0, 1) || (n, m) == (1, 0)) as i64)));
        assert_eq!(shift.g, BivariateSeries::one(6, 6));
        let mob = solve_flow(&QVPair::from_ints(&[0, 0, 1], &[]), 6, 8).unwrap();
        assert_eq!(mob.t, mobius_flow(6, 8));
        // q = x, v = x^2: T = x e^λ, G = exp(x^2 (e^{2λ} - 1)/2)
        let f = solve_flow(&QVPair::from_ints(&[0, 1], &[0, 0, 1]), 6, 8).unwrap();
        let t = BivariateSeries::from_fn(6, 8, |_, m| rat((m == 1) as i64));
        assert_eq!(f.t, t);
        let inner = BivariateSeries::from_fn(6, 8, |n, m| {
            if m == 2 && n >= 1 {
                rat(1i64 << n)
            } else {
                Rational::zero()
            }
        });
        assert_eq!(f.g, inner.exp().unwrap());
    }

    #[test]
    fn bell_route_matches_lie_series() {
        let pairs = [
            QVPair::from_ints(&[1, 2, -1], &[0, 3]),
            QVPair::from_ints(&[0, 0, 0, 1], &[2, 0, 1]),
            QVPair::new(standard::log1p(12).add_series(&FormalPowerSeries::one(12)), standard::sin(12)),
        ];
        for qv in &pairs {
            assert_eq!(solve_flow(qv, 5, 6).unwrap(), solve_flow_lie(qv, 5, 6).unwrap());
        }
        assert!(matches!(solve_flow(&QVPair::new(FormalPowerSeries::x(3), FormalPowerSeries::zero(3)), 5, 5), Err(ShefferError::InsufficientOrder { .. })));
    }

    #[test]
    fn linear_exp_closed_forms() {
        // q = x: :exp(a†a(e^λ - 1)):, G = 1
        let e = normal_order_linear_exp(&QVPair::from_ints(&[0, 1], &[]), 8, 8).unwrap();
        assert_eq!(e.flow.g, BivariateSeries::one(8, 8));
        assert_eq!(e.flow.t, BivariateSeries::from_fn(8, 8, |_, m| rat((m == 1) as i64)));
        // q = 1, v = x: T = x + λ, G = e^{xλ + λ^2/2}
        let bch = normal_order_linear_exp(&QVPair::from_ints(&[1], &[0, 1]), 8, 8).unwrap();
        let expo = BivariateSeries::from_fn(8, 8, |n, m| rat(((n, m) == (1, 1) || (n, m) == (2, 0)) as i64));
        assert_eq!(bch.flow.g, expo.exp().unwrap());
        let l = Limits::default();
        for n in 0..=6u32 {
            let wick = normal_order_wick(&BosonExpr::power(crate::algebra::parse_expr("ad a").unwrap(), n), &l).unwrap();
            assert_eq!(e.slot(n as usize), wick);
            let wick = normal_order_wick(&BosonExpr::power(crate::algebra::parse_expr("a + ad").unwrap(), n), &l).unwrap();
            assert_eq!(bch.slot(n as usize), wick);
        }
    }

    #[test]
    fn cs_expectation_examples() {
        let c = |re: f64| Complex64::new(re, 0.0);
        let lam = 0.3;
        // q = x + 1: exp(z (z̄' + 1)(e^λ - 1))
        let v = cs_expectation_linear(&QVPair::from_ints(&[1, 1], &[]), c(1.0), c(0.7), lam, 24, 4, 1e-12).unwrap();
        assert!((v - (c(0.7 * 2.0 * (lam.exp() - 1.0))).exp()).norm() < 1e-12);
        // q = e^{-x}: exp(z (ln(e^{z̄'} + λ) - z̄'))
        let q = FormalPowerSeries::from_fn(48, |n| rat(if n % 2 == 0 { 1 } else { -1 }));
        let qv = QVPair::new(q, FormalPowerSeries::zero(48));
        let (zp, z) = (0.4, 0.9);
        let v = cs_expectation_linear(&qv, c(zp), c(z), lam, 26, 20, 1e-9).unwrap();
        let expected = (z * ((zp.exp() + lam).ln() - zp)).exp();
        assert!((v.re - expected).abs() < 1e-8, "{v} vs {expected}");
        let one = cs_expectation_linear(&QVPair::from_ints(&[0, 2], &[1]), c(0.5), c(1.5), 0.0, 4, 4, 1e-12).unwrap();
        assert!((one - c(1.0)).norm() < 1e-15);
        assert!(matches!(
            cs_expectation_linear(&QVPair::from_ints(&[0, 0, 1], &[]), c(1.0), c(1.0), 2.0, 6, 6, 1e-6),
            Err(ShefferError::TailBudget { .. })
        ));
    }

    #[test]
    fn qv_dictionary_examples() {
        let n = 8;
        // example c: A = 1/(1-λ), B = λ at z' = 1
        let a = FormalPowerSeries::from_ogf(&vec![rat(1); n + 1], n);
        let qv = qv_from_ab(&a, &FormalPowerSeries::x(n), rat(1)).unwrap();
        assert_eq!(qv.q().truncate(n - 1), FormalPowerSeries::one(n - 1));
        assert_eq!(qv.v().truncate(n - 1), FormalPowerSeries::from_ogf(&vec![rat(1); n], n - 1));
        let seq = coherent_sequence(&qv.clone(), &rat(1), 6).unwrap();
        assert_eq!(seq, ints(&[1, 2, 5, 16, 65, 326, 1957]));
        for (k, v) in seq.iter().enumerate() {
            let arrangements: Rational = (0..=k).map(|j| big_rat(factorial(k)) / big_rat(factorial(j))).sum();
            assert_eq!(v, &arrangements);
        }
        // example d: A = 1, B = 1 - √(1-2λ): q̃ = 1/(1-y)
        let b = &FormalPowerSeries::one(n) - &standard::binomial_power(&rat(-2), &ratio(1, 2), n);
        let qv = qv_from_ab(&FormalPowerSeries::one(n), &b, rat(1)).unwrap();
        assert_eq!(qv.q().truncate(n - 1), FormalPowerSeries::from_ogf(&vec![rat(1); n], n - 1));
        assert!(qv.v().is_zero());
        assert_eq!(coherent_sequence(&qv, &rat(1), 6).unwrap(), ints(&[1, 1, 2, 7, 37, 266, 2431]));
        // pure shift
        let qv = qv_from_ab(&FormalPowerSeries::one(n), &FormalPowerSeries::x(n), rat(0)).unwrap();
        assert_eq!(qv.q().truncate(n - 1), FormalPowerSeries::one(n - 1));
        assert!(qv.v().is_zero());
        assert_eq!(qv_from_ab(&FormalPowerSeries::zero(3), &FormalPowerSeries::x(3), rat(0)), Err(ShefferError::BadA));
    }

    #[test]
    fn ab_round_trip() {
        let n = 7;
        let a = standard::cos(n).add_series(&FormalPowerSeries::x(n));
        let b = standard::sin(n).add_series(&FormalPowerSeries::polynomial(&ints(&[0, 0, 3]), n));
        let qv = qv_from_ab(&a, &b, ratio(2, 3)).unwrap();
        let (a2, b2) = ab_from_qv(&qv, n - 1).unwrap();
        assert_eq!(a2, a.truncate(n - 1));
        assert_eq!(b2, b.truncate(n - 1));
    }

    #[test]
    fn combinatorial_sequences() {
        let q = FormalPowerSeries::from_ogf(&ints(&[1, 2, 1]), 8);
        let qv = QVPair::centered(q, FormalPowerSeries::zero(8), rat(1));
        assert_eq!(coherent_sequence(&qv, &rat(1), 6).unwrap(), ints(&[1, 1, 3, 13, 73, 501, 4051]));
        // q̃ = (1+y)(1 + ln(1+y))
        let one_plus = FormalPowerSeries::from_ogf(&ints(&[1, 1]), 8);
        let q = one_plus.mul_series(&FormalPowerSeries::one(8).add_series(&standard::log1p(8)));
        let qv = QVPair::centered(q, FormalPowerSeries::zero(8), rat(1));
        // exp(e^{e^λ - 1} - 1): partitions of partitions
        assert_eq!(coherent_sequence(&qv, &rat(1), 7).unwrap(), ints(&[1, 1, 3, 12, 60, 358, 2471, 19302]));
    }

    #[test]
    fn substitution_examples() {
        // Euler dilation: F = x^2 -> x^2 e^{2λ}
        let f = FormalPowerSeries::polynomial(&ints(&[0, 0, 2]), 12);
        let s = substitute_series(&QVPair::from_ints(&[0, 1], &[]), &f, 6, 6).unwrap();
        assert_eq!(s, BivariateSeries::from_fn(6, 6, |n, m| if m == 2 { rat(2 << n) } else { rat(0) }));
        // q = 1: G = exp(∫_0^λ v(x+u) du); v = x gives xλ + λ^2/2
        let s = substitute_series(&QVPair::from_ints(&[1], &[0, 1]), &FormalPowerSeries::one(12), 6, 6).unwrap();
        let expo = BivariateSeries::from_fn(6, 6, |n, m| rat(((n, m) == (1, 1) || (n, m) == (2, 0)) as i64));
        assert_eq!(s, expo.exp().unwrap());
        let qv = QVPair::from_ints(&[2, 1], &[1, 0, 3]);
        let f = standard::sin(14);
        let out = substitute_apply(&qv, &f, &Rational::zero(), 6, 8).unwrap();
        assert_eq!(out, f.truncate(8));
    }

    #[test]
    fn substitution_matches_direct_exponential() {
        let pairs = [
            QVPair::from_ints(&[1], &[]),
            QVPair::from_ints(&[0, 1], &[0, 0, 1]),
            QVPair::from_ints(&[0, 0, 1], &[1, 1]),
            QVPair::from_ints(&[1, -1, 2], &[0, 3, 0, 1]),
        ];
        for qv in &pairs {
            for m in 0..=6 {
                let f = FormalPowerSeries::polynomial(&(0..=m).map(|j| rat((j == m) as i64)).collect::<Vec<_>>(), 12);
                assert_eq!(substitute_series(qv, &f, 6, 6).unwrap(), direct_exponential(qv, &f, 6, 6).unwrap(), "m={m}");
            }
        }
    }

    #[test]
    fn group_law() {
        for q in [&[1][..], &[0, 1], &[0, 0, 1]] {
            for v in [&[][..], &[0, 1], &[0, 0, 1]] {
                let qv = QVPair::from_ints(q, v);
                assert_eq!(flow_group_law_check(&qv, 6, 6).unwrap(), Ok(()), "q={q:?} v={v:?}");
            }
        }
        let qv = QVPair::new(standard::tan(20), standard::cos(20));
        assert_eq!(flow_group_law_check(&qv, 5, 5).unwrap(), Ok(()));
    }

    #[test]
    fn parse_slot_lists() {
        assert_eq!(parse_slots("0,1,0,0").unwrap(), FormalPowerSeries::x(3));
        assert_eq!(parse_slots(" 1/2 , -3").unwrap(), FormalPowerSeries::from_slots(vec![ratio(1, 2), rat(-3)]));
        assert!(parse_slots("1,,2").is_err());
    }

    fn poly_strategy() -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(-2i64..3, 0..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn linear_exp_matches_wick(q in poly_strategy(), v in poly_strategy(), n in 0usize..=4) {
            let qv = QVPair::from_ints(&q, &v);
            let e = normal_order_linear_exp(&qv, n, 3 * n + 1).unwrap();
            let expr = BosonExpr::power(qv.to_expr().unwrap(), n as u32);
            let wick = normal_order_wick(&expr, &Limits::default()).unwrap();
            prop_assert_eq!(e.slot(n), wick);
        }

        #[test]
        fn random_pairs_satisfy_monomiality(
            f in proptest::collection::vec(-3i64..4, 6),
            g in proptest::collection::vec(-3i64..4, 7),
            f1 in prop_oneof![Just(-2i64), Just(-1), Just(1), Just(3)],
            g0 in prop_oneof![Just(-1i64), Just(1), Just(2)],
        ) {
            let mut fs = vec![0, f1];
            fs.extend(&f);
            let mut gs = vec![g0];
            gs.extend(&g);
            let pair = ShefferPair::new(FormalPowerSeries::from_int_slots(&fs), FormalPowerSeries::from_int_slots(&gs)).unwrap();
            let ladder = pair.ladder().unwrap();
            prop_assert_eq!(monomiality_failure(&pair, &ladder, 5).unwrap(), None);
        }
    }
}
