//! Generalized Stirling and Bell numbers.
//!
//! A homogeneous operator of excess `d ≥ 0`,
//! `H = (a†)^d Σ_k α_k (a†)^k a^k`, has powers
//! `H^n = (a†)^{nd} Σ_k S(n,k) (a†)^k a^k`. Every family here (classic,
//! strings, `(a†)^r a^s`, iterated strings) is a [`StirlingTable`] of those
//! `S(n,k)`; negative excess is reached through hermitian conjugation.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{AddAssign, Div, Mul};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::{AlgebraError, BosonExpr, Gen, Limits, NormalForm, StringSpec};
use crate::coherent::{self, CoherentError};
use crate::poly::Polynomial;
use crate::series::{
    big_rat, binomial, factorial, rat, standard, BivariateSeries, FormalPowerSeries, Rational, SeriesError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StirlingError {
    #[error("overall excess {0} is negative; use negative_excess")]
    NegativeExcess(i64),
    #[error("overall excess {0} is not negative")]
    NonNegativeExcess(i64),
    #[error("coefficient map has empty support")]
    EmptySupport,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Numeric(#[from] CoherentError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Recurrence or closed alternating-sum formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Recurrence,
    Explicit,
}

/// `x(x-1)…(x-k+1)`; the empty product is one.
pub fn falling_factorial(x: &Rational, k: u32) -> Rational {
    (0..k).fold(Rational::one(), |acc, j| acc * (x - rat(j as i64)))
}

pub fn falling_int(x: i64, k: u32) -> BigInt {
    (0..k as i64).fold(BigInt::one(), |acc, j| acc * BigInt::from(x - j))
}

/// Classic Stirling number of the second kind.
pub fn stirling2(n: usize, k: usize, method: Method) -> BigInt {
    match method {
        Method::Recurrence => {
            let mut row = vec![BigInt::one()];
            for _ in 0..n {
                let mut next = vec![BigInt::zero(); row.len() + 1];
                for (j, v) in row.iter().enumerate() {
                    next[j] += v * BigInt::from(j);
                    next[j + 1] += v;
                }
                row = next;
            }
            row.get(k).cloned().unwrap_or_else(BigInt::zero)
        }
        Method::Explicit => {
            let mut acc = BigInt::zero();
            for j in 0..=k {
                let t = binomial(k, j) * num_traits::pow(BigInt::from(j), n);
                if (k - j).is_multiple_of(2) {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            acc / factorial(k)
        }
    }
}

/// `B(n, x) = Σ_k S(n,k) x^k`.
pub fn bell_poly(n: usize, x: &Rational) -> Rational {
    let mut acc = Rational::zero();
    let mut p = Rational::one();
    for k in 0..=n {
        acc += big_rat(stirling2(n, k, Method::Recurrence)) * &p;
        p *= x;
    }
    acc
}

pub fn bell_polynomial(n: usize) -> Polynomial {
    Polynomial::new((0..=n).map(|k| big_rat(stirling2(n, k, Method::Recurrence))).collect())
}

pub fn bell_number(n: usize) -> BigInt {
    (0..=n).map(|k| stirling2(n, k, Method::Recurrence)).sum()
}

/// A truncated Dobiński sum with its crude tail certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DobinskiSum {
    pub value: f64,
    /// Magnitude of the last term included.
    pub last_term: f64,
    /// Geometric tail bound `t·ρ/(1-ρ)` from the ratio `ρ` of the last two
    /// terms, when that ratio is below one and the ratio is decreasing from
    /// there on (true once `k > x`).
    pub tail_bound: Option<f64>,
}

/// `e^{-x} Σ_{k=0}^{terms} k^n x^k / k!`.
pub fn dobinski_numeric(n: u32, x: f64, terms: usize) -> DobinskiSum {
    let mut weight = (-x).exp();
    let mut acc = 0.0;
    let mut last = 0.0;
    let mut prev = 0.0;
    for k in 0..=terms {
        if k > 0 {
            weight *= x / k as f64;
        }
        let t = weight * (k as f64).powi(n as i32);
        acc += t;
        prev = last;
        last = t;
    }
    DobinskiSum { value: acc, last_term: last, tail_bound: geometric_tail(prev, last, terms as f64 > x) }
}

fn geometric_tail(prev: f64, last: f64, decreasing: bool) -> Option<f64> {
    if !decreasing || prev <= 0.0 {
        return None;
    }
    let rho = last / prev;
    (rho < 1.0).then(|| last * rho / (1.0 - rho))
}

/// `H = (a†)^d Σ α_k (a†)^k a^k`. The excess may be negative only where an
/// operation says so (see [`negative_excess`]).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HomogSpec {
    d: i64,
    alpha: BTreeMap<u32, Rational>,
}

impl HomogSpec {
    pub fn new(d: i64, alpha: BTreeMap<u32, Rational>) -> Result<Self, StirlingError> {
        let alpha: BTreeMap<u32, Rational> = alpha.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if alpha.is_empty() {
            return Err(StirlingError::EmptySupport);
        }
        Ok(HomogSpec { d, alpha })
    }

    /// `(a†)^d (a†)^s a^s` style spec with a single coefficient one.
    pub fn monomial(s: u32, d: i64) -> Self {
        HomogSpec { d, alpha: BTreeMap::from([(s, Rational::one())]) }
    }

    pub fn from_ints(d: i64, alpha: &[(u32, i64)]) -> Result<Self, StirlingError> {
        Self::new(d, alpha.iter().map(|&(k, c)| (k, rat(c))).collect())
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn alpha(&self) -> &BTreeMap<u32, Rational> {
        &self.alpha
    }

    /// Lowest index `N₀` with nonzero coefficient.
    pub fn n0(&self) -> u32 {
        *self.alpha.keys().next().expect("nonempty support")
    }

    /// Highest index `N` with nonzero coefficient.
    pub fn top(&self) -> u32 {
        *self.alpha.keys().next_back().expect("nonempty support")
    }

    pub fn is_integral(&self) -> bool {
        self.alpha.values().all(|c| c.is_integer())
    }

    /// The operator as an expression, negative excess placing `a^{|d|}` on the right.
    pub fn to_expr(&self) -> BosonExpr {
        let terms = self
            .alpha
            .iter()
            .map(|(&k, c)| {
                let (pre, post) = if self.d >= 0 { (self.d as usize, 0) } else { (0, (-self.d) as usize) };
                let mut w = vec![Gen::Ad; pre + k as usize];
                w.extend(std::iter::repeat_n(Gen::A, k as usize + post));
                (c.clone(), BosonExpr::Word(w))
            })
            .collect();
        BosonExpr::sum(terms)
    }

    /// `homog:<d>:<k>=<α>,…`
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.alpha.iter().map(|(k, c)| format!("{k}={c}")).collect();
        format!("homog:{}:{}", self.d, parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    Classic,
    String(StringSpec),
    Homog(HomogSpec),
    Rs { r: u32, s: u32 },
    Iterated(StringSpec),
    /// Computed through the conjugate positive-excess problem.
    Conjugate(Box<Family>),
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::Classic => "classic".to_string(),
            Family::String(s) => format!("string:{s}"),
            Family::Homog(h) => h.label(),
            Family::Rs { r, s } => format!("rs:{r}:{s}"),
            Family::Iterated(s) => format!("string:{s}"),
            Family::Conjugate(f) => f.label(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Entries {
    Int(Vec<Vec<BigInt>>),
    Rat(Vec<Vec<Rational>>),
}

/// Rows `n = 0..=max_n` of `S(n,k)`, with `k` indexed from zero. Entries
/// outside the stored ranges are zero; `S(0,0) = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StirlingTable {
    family: Family,
    excess: i64,
    entries: Entries,
}

impl StirlingTable {
    fn from_rational_rows(family: Family, excess: i64, rows: Vec<Vec<Rational>>) -> Self {
        let integral = rows.iter().flatten().all(|c| c.is_integer());
        let entries = if integral {
            Entries::Int(rows.into_iter().map(|r| r.into_iter().map(|c| c.to_integer()).collect()).collect())
        } else {
            Entries::Rat(rows)
        };
        StirlingTable { family, excess, entries }
    }

    fn from_int_rows(family: Family, excess: i64, rows: Vec<Vec<BigInt>>) -> Self {
        StirlingTable { family, excess, entries: Entries::Int(rows) }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn label(&self) -> String {
        self.family.label()
    }

    /// Excess contributed by each power of the underlying operator.
    pub fn excess(&self) -> i64 {
        self.excess
    }

    pub fn max_n(&self) -> usize {
        match &self.entries {
            Entries::Int(r) => r.len() - 1,
            Entries::Rat(r) => r.len() - 1,
        }
    }

    pub fn is_integral(&self) -> bool {
        matches!(self.entries, Entries::Int(_))
    }

    pub fn row(&self, n: usize) -> Vec<Rational> {
        match &self.entries {
            Entries::Int(r) => r[n].iter().cloned().map(big_rat).collect(),
            Entries::Rat(r) => r[n].clone(),
        }
    }

    pub fn int_row(&self, n: usize) -> Option<Vec<BigInt>> {
        match &self.entries {
            Entries::Int(r) => Some(r[n].clone()),
            Entries::Rat(_) => None,
        }
    }

    pub fn entry(&self, n: usize, k: usize) -> Rational {
        match &self.entries {
            Entries::Int(r) => r.get(n).and_then(|row| row.get(k)).cloned().map(big_rat).unwrap_or_else(Rational::zero),
            Entries::Rat(r) => r.get(n).and_then(|row| row.get(k)).cloned().unwrap_or_else(Rational::zero),
        }
    }

    pub fn int_entry(&self, n: usize, k: usize) -> Option<BigInt> {
        match &self.entries {
            Entries::Int(r) => Some(r.get(n).and_then(|row| row.get(k)).cloned().unwrap_or_else(BigInt::zero)),
            Entries::Rat(_) => None,
        }
    }

    /// First and last `k` with nonzero `S(n,k)`.
    pub fn k_range(&self, n: usize) -> Option<(usize, usize)> {
        let row = self.row(n);
        let lo = row.iter().position(|c| !c.is_zero())?;
        let hi = row.iter().rposition(|c| !c.is_zero())?;
        Some((lo, hi))
    }

    pub fn bell(&self, n: usize) -> Rational {
        self.row(n).into_iter().sum()
    }

    pub fn int_bell(&self, n: usize) -> Option<BigInt> {
        self.int_row(n).map(|r| r.into_iter().sum())
    }

    pub fn bell_poly(&self, n: usize, x: &Rational) -> Rational {
        self.bell_polynomial(n).eval(x)
    }

    pub fn bell_polynomial(&self, n: usize) -> Polynomial {
        Polynomial::new(self.row(n))
    }

    /// `H^n` in normal form. Negative excess puts `a^{|d|n}` on the right.
    pub fn normal_form(&self, n: usize) -> NormalForm {
        let e = self.excess * n as i64;
        let mut nf = NormalForm::zero();
        for (k, c) in self.row(n).into_iter().enumerate() {
            let k = k as u32;
            let (cre, ann) = if e >= 0 { (k + e as u32, k) } else { (k, k + (-e) as u32) };
            nf.add_term(cre, ann, c);
        }
        nf
    }

    /// Rows `(n, k, S(n,k))` over the nonzero range of each row `n ≥ 1`.
    pub fn triangle_rows(&self) -> Vec<(usize, usize, Rational)> {
        let mut out = Vec::new();
        for n in 1..=self.max_n() {
            if let Some((lo, hi)) = self.k_range(n) {
                for k in lo..=hi {
                    out.push((n, k, self.entry(n, k)));
                }
            }
        }
        out
    }
}

impl fmt::Display for StirlingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in 1..=self.max_n() {
            let row: Vec<String> = match self.k_range(n) {
                Some((lo, hi)) => (lo..=hi).map(|k| self.entry(n, k).to_string()).collect(),
                None => Vec::new(),
            };
            writeln!(f, "n={n}: {} | {}", row.join(" "), self.bell(n))?;
        }
        Ok(())
    }
}

/// Arithmetic shared by the integer and rational recurrences.
trait Coef: Clone + Zero + One + AddAssign + Mul<Output = Self> + Div<Output = Self> + From<BigInt> {}
impl<T: Clone + Zero + One + AddAssign + Mul<Output = T> + Div<Output = T> + From<BigInt>> Coef for T {}

/// Rows of `S(n,k)` for `H = (a†)^d Σ α_l (a†)^l a^l` by
/// `S(n+1,k) = Σ_l α_l Σ_p C(l,p) (nd + k-l+p)^{\underline p} S(n, k-l+p)`.
fn homog_rows<T: Coef>(alpha: &[(u32, T)], d: i64, nmax: usize) -> Vec<Vec<T>> {
    let top = alpha.iter().map(|a| a.0).max().unwrap_or(0) as usize;
    let mut rows: Vec<Vec<T>> = vec![vec![T::one()]];
    for n in 0..nmax {
        let prev = &rows[n];
        let len = (n + 1) * top + 1;
        let mut next = vec![T::zero(); len];
        for (idx, s) in prev.iter().enumerate() {
            if s.is_zero() {
                continue;
            }
            let power = n as i64 * d + idx as i64;
            for (l, a) in alpha {
                for p in 0..=*l {
                    let k = idx + (*l - p) as usize;
                    let w = T::from(binomial(*l as usize, p as usize) * falling_int(power, p));
                    next[k] += a.clone() * w * s.clone();
                }
            }
        }
        rows.push(next);
    }
    rows
}

/// `S(n,k) = (1/k!) Σ_j C(k,j) (-1)^{k-j} Π_{i=1}^n e(j + (i-1)d)` where
/// `e(m) = Σ_l α_l m^{\underline l}` is the eigenvalue-like factor.
fn homog_explicit<T: Coef>(alpha: &[(u32, T)], d: i64, n: usize, k: usize) -> T {
    let mut acc = T::zero();
    for j in 0..=k {
        let mut prod = T::one();
        for i in 1..=n {
            let m = j as i64 + (i as i64 - 1) * d;
            let mut e = T::zero();
            for (l, a) in alpha {
                e += a.clone() * T::from(falling_int(m, *l));
            }
            prod = prod * e;
        }
        let mut c = binomial(k, j);
        if (k - j) % 2 == 1 {
            c = -c;
        }
        acc += T::from(c) * prod;
    }
    acc / T::from(factorial(k))
}

fn alpha_ints(spec: &HomogSpec) -> Vec<(u32, BigInt)> {
    spec.alpha.iter().map(|(k, c)| (*k, c.to_integer())).collect()
}

fn alpha_rats(spec: &HomogSpec) -> Vec<(u32, Rational)> {
    spec.alpha.iter().map(|(k, c)| (*k, c.clone())).collect()
}

fn homog_table(spec: &HomogSpec, family: Family, n: usize, method: Method) -> StirlingTable {
    let d = spec.d;
    let top = spec.top() as usize;
    if spec.is_integral() {
        let alpha = alpha_ints(spec);
        let rows = match method {
            Method::Recurrence => homog_rows(&alpha, d, n),
            Method::Explicit => (0..=n).map(|m| (0..=m * top).map(|k| homog_explicit(&alpha, d, m, k)).collect()).collect(),
        };
        StirlingTable::from_int_rows(family, d, rows)
    } else {
        let alpha = alpha_rats(spec);
        let rows = match method {
            Method::Recurrence => homog_rows(&alpha, d, n),
            Method::Explicit => (0..=n).map(|m| (0..=m * top).map(|k| homog_explicit(&alpha, d, m, k)).collect()).collect(),
        };
        StirlingTable::from_rational_rows(family, d, rows)
    }
}

/// Classic triangle `S(n,k)`, rows `0..=nmax`.
pub fn classic_table(nmax: usize) -> StirlingTable {
    let rows = (0..=nmax)
        .map(|n| (0..=n).map(|k| stirling2(n, k, Method::Recurrence)).collect())
        .collect();
    StirlingTable::from_int_rows(Family::Classic, 0, rows)
}

/// `S_α^d(n,k)` for rows `0..=n`.
pub fn homog_stirling(spec: &HomogSpec, n: usize, method: Method) -> Result<StirlingTable, StirlingError> {
    if spec.d < 0 {
        return Err(StirlingError::NegativeExcess(spec.d));
    }
    Ok(homog_table(spec, Family::Homog(spec.clone()), n, method))
}

/// `S_{r,s}(k)` of a single string: row 1 of the returned table.
pub fn string_coeffs(spec: &StringSpec, method: Method) -> Result<StirlingTable, StirlingError> {
    let total = spec.excess();
    if total < 0 {
        return Err(StirlingError::NegativeExcess(total));
    }
    let row = string_row(spec, method);
    let rows = vec![vec![BigInt::one()], row];
    Ok(StirlingTable::from_int_rows(Family::String(spec.clone()), total, rows))
}

fn string_row(spec: &StringSpec, method: Method) -> Vec<BigInt> {
    let (r, s) = (spec.r(), spec.s());
    let kmax: usize = s.iter().map(|&x| x as usize).sum();
    match method {
        Method::Recurrence => {
            // start from the rightmost block (a†)^{r_1} a^{s_1}
            let mut row = vec![BigInt::zero(); s[0] as usize + 1];
            row[s[0] as usize] = BigInt::one();
            let mut d = r[0] as i64 - s[0] as i64;
            for m in 1..spec.blocks() {
                let sp = s[m] as usize;
                let mut next = vec![BigInt::zero(); row.len() + sp];
                for (k, v) in row.iter().enumerate() {
                    if v.is_zero() {
                        continue;
                    }
                    for j in 0..=sp {
                        let w = binomial(sp, j) * falling_int(d + k as i64, (sp - j) as u32);
                        next[k + j] += w * v;
                    }
                }
                row = next;
                d += r[m] as i64 - sp as i64;
            }
            row.resize(kmax + 1, BigInt::zero());
            row
        }
        Method::Explicit => (0..=kmax)
            .map(|k| {
                let mut acc = BigInt::zero();
                for j in 0..=k {
                    let mut prod = BigInt::one();
                    for m in 0..spec.blocks() {
                        prod *= falling_int(spec.partial_excess(m) + j as i64, s[m]);
                    }
                    let t = binomial(k, j) * prod;
                    if (k - j).is_multiple_of(2) {
                        acc += t;
                    } else {
                        acc -= t;
                    }
                }
                acc / factorial(k)
            })
            .collect(),
    }
}

/// Rows `0..=n` for powers of a string, through its first normal form.
pub fn iterate_string(spec: &StringSpec, n: usize) -> Result<StirlingTable, StirlingError> {
    let first = string_coeffs(spec, Method::Recurrence)?;
    let alpha: BTreeMap<u32, Rational> = first.row(1).into_iter().enumerate().map(|(k, c)| (k as u32, c)).collect();
    let h = HomogSpec::new(spec.excess(), alpha)?;
    Ok(homog_table(&h, Family::Iterated(spec.clone()), n, Method::Recurrence))
}

/// A negative-excess operator handed to [`negative_excess`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NegativeInput {
    String(StringSpec),
    Homog(HomogSpec),
}

/// Tables for negative overall excess, via the conjugate problem
/// `S_{r,s} = S_{s̄,r̄}` and `S_α^{-d} = S_α^d`. The table keeps the negative
/// excess, so [`StirlingTable::normal_form`] places `a^{|d| n}` on the right.
pub fn negative_excess(input: &NegativeInput, n: usize) -> Result<StirlingTable, StirlingError> {
    match input {
        NegativeInput::String(spec) => {
            let d = spec.excess();
            if d >= 0 {
                return Err(StirlingError::NonNegativeExcess(d));
            }
            let conj = iterate_string(&spec.conjugate(), n)?;
            Ok(StirlingTable {
                family: Family::Conjugate(Box::new(Family::Iterated(spec.clone()))),
                excess: d,
                entries: conj.entries,
            })
        }
        NegativeInput::Homog(spec) => {
            if spec.d >= 0 {
                return Err(StirlingError::NonNegativeExcess(spec.d));
            }
            let mirrored = HomogSpec { d: -spec.d, alpha: spec.alpha.clone() };
            let t = homog_table(&mirrored, Family::Homog(mirrored.clone()), n, Method::Recurrence);
            Ok(StirlingTable {
                family: Family::Conjugate(Box::new(Family::Homog(spec.clone()))),
                excess: spec.d,
                entries: t.entries,
            })
        }
    }
}

/// `S_{r,s}(n,k)` for `((a†)^r a^s)^n`, rows `0..=n`.
pub fn rs_table(r: u32, s: u32, n: usize, method: Method) -> Result<StirlingTable, StirlingError> {
    if r == 0 || s == 0 {
        return Err(StirlingError::InvalidArgument(format!("rs family needs r, s >= 1, got r={r}, s={s}")));
    }
    let family = Family::Rs { r, s };
    if r < s {
        // symmetry: same numbers as (r', s') = (s, r), annihilators on the right
        let t = rs_table(s, r, n, method)?;
        return Ok(StirlingTable { family, excess: r as i64 - s as i64, entries: t.entries });
    }
    let d = (r - s) as i64;
    let rows = match (method, s) {
        (Method::Recurrence, 1) => {
            // S(n+1,k) = (n(r-1) + k) S(n,k) + S(n,k-1)
            let mut rows = vec![vec![BigInt::one()]];
            for m in 0..n {
                let prev = &rows[m];
                let mut next = vec![BigInt::zero(); prev.len() + 1];
                for (k, v) in prev.iter().enumerate() {
                    next[k] += v * BigInt::from(m as i64 * d + k as i64);
                    next[k + 1] += v;
                }
                rows.push(next);
            }
            rows
        }
        (Method::Recurrence, _) => {
            // S(n+1,k) = Σ_p C(s,p) (n(r-s) + k - s + p)^{\underline p} S(n, k-s+p)
            let mut rows = vec![vec![BigInt::one()]];
            let su = s as usize;
            for m in 0..n {
                let prev = &rows[m];
                let mut next = vec![BigInt::zero(); prev.len() + su];
                for k in 0..next.len() {
                    let mut acc = BigInt::zero();
                    for p in 0..=su {
                        let Some(idx) = (k + p).checked_sub(su) else { continue };
                        if let Some(v) = prev.get(idx) {
                            acc += binomial(su, p) * falling_int(m as i64 * d + idx as i64, p as u32) * v;
                        }
                    }
                    next[k] = acc;
                }
                rows.push(next);
            }
            rows
        }
        (Method::Explicit, _) if r == s => {
            // S_{r,r}(n,k) = ((-1)^k / k!) Σ_{p=r}^k (-1)^p C(k,p) (p^{\underline r})^n
            (0..=n)
                .map(|m| {
                    (0..=m * s as usize)
                        .map(|k| {
                            if m == 0 {
                                return if k == 0 { BigInt::one() } else { BigInt::zero() };
                            }
                            let mut acc = BigInt::zero();
                            for p in (s as usize)..=k {
                                let t = binomial(k, p) * num_traits::pow(falling_int(p as i64, s), m);
                                if (k + p) % 2 == 0 {
                                    acc += t;
                                } else {
                                    acc -= t;
                                }
                            }
                            acc / factorial(k)
                        })
                        .collect()
                })
                .collect()
        }
        (Method::Explicit, _) => {
            let alpha = vec![(s, BigInt::one())];
            (0..=n).map(|m| (0..=m * s as usize).map(|k| homog_explicit(&alpha, d, m, k)).collect()).collect()
        }
    };
    Ok(StirlingTable::from_int_rows(family, d, rows))
}

/// `B_{r,s}(0..=nmax)` streamed row by row; keeps only one row in memory.
pub fn bell_rs_sequence(r: u32, s: u32, nmax: usize) -> Vec<BigInt> {
    let (r, s) = if r >= s { (r, s) } else { (s, r) };
    let d = (r - s) as i64;
    let su = s as usize;
    let mut row = vec![BigInt::one()];
    let mut out = vec![BigInt::one()];
    for m in 0..nmax {
        let mut next = vec![BigInt::zero(); row.len() + su];
        for (idx, v) in row.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            for p in 0..=su {
                next[idx + su - p] += binomial(su, p) * falling_int(m as i64 * d + idx as i64, p as u32) * v;
            }
        }
        row = next;
        out.push(row.iter().sum());
    }
    out
}

/// Exponential generating function `Σ_n B_α^d(n,x) λ^n/n!`, truncated.
pub fn egf_eval(spec: &HomogSpec, lambda_order: usize, x_order: usize) -> Result<BivariateSeries, StirlingError> {
    let t = homog_stirling(spec, lambda_order, Method::Recurrence)?;
    Ok(BivariateSeries::from_fn(lambda_order, x_order, |n, m| t.entry(n, m) * big_rat(factorial(m))))
}

/// `exp(x(e^λ - 1))`.
pub fn bell_egf(lambda_order: usize, x_order: usize) -> Result<BivariateSeries, StirlingError> {
    let inner = BivariateSeries::from_fn(lambda_order, x_order, |n, m| if n >= 1 && m == 1 { rat(1) } else { rat(0) });
    Ok(inner.exp()?)
}

/// Closed form for `((a†)^r a)^n`: `exp(x((1 - (r-1)λ)^{-1/(r-1)} - 1))`,
/// reducing to [`bell_egf`] at `r = 1`.
pub fn rs1_closed_egf(r: u32, lambda_order: usize, x_order: usize) -> Result<BivariateSeries, StirlingError> {
    if r == 0 {
        return Err(StirlingError::InvalidArgument("r must be at least 1".into()));
    }
    if r == 1 {
        return bell_egf(lambda_order, x_order);
    }
    let c = rat(r as i64 - 1);
    let u = standard::binomial_power(&-c.clone(), &-(Rational::one() / c), lambda_order);
    let inner = BivariateSeries::from_fn(lambda_order, x_order, |n, m| {
        if m == 1 && n >= 1 {
            u.slot(n).clone()
        } else {
            Rational::zero()
        }
    });
    Ok(inner.exp()?)
}

/// Numeric generalized Dobiński sum
/// `e^{-x} Σ_l [Π_{i=1}^n Σ_k α_k (l+(i-1)d)^{\underline k}] x^l/l!`.
pub fn homog_dobinski(spec: &HomogSpec, n: usize, x: f64, terms: usize) -> DobinskiSum {
    let alpha: Vec<(u32, f64)> = spec.alpha.iter().map(|(k, c)| (*k, crate::series::to_f64(c))).collect();
    let mut weight = (-x).exp();
    let mut acc = 0.0;
    let (mut prev, mut last) = (0.0, 0.0);
    for l in 0..=terms {
        if l > 0 {
            weight *= x / l as f64;
        }
        let mut prod = 1.0;
        for i in 1..=n {
            let m = l as f64 + (i as f64 - 1.0) * spec.d as f64;
            prod *= alpha
                .iter()
                .map(|(k, a)| a * (0..*k).map(|j| m - j as f64).product::<f64>())
                .sum::<f64>();
        }
        let t = weight * prod;
        acc += t;
        prev = last;
        last = t;
    }
    DobinskiSum { value: acc, last_term: last.abs(), tail_bound: geometric_tail(prev.abs(), last.abs(), terms as f64 > x) }
}

/// Relative error of `B_{2r,r}(n) = (rn)!/(e r!) ₁F₁(rn+1; r+1; 1)` against the exact table value.
pub fn hyper_checks(r: u32, n: u32) -> Result<f64, StirlingError> {
    if r == 0 || n == 0 {
        return Err(StirlingError::InvalidArgument("hyper_checks needs r, n >= 1".into()));
    }
    let exact = rs_table(2 * r, r, n as usize, Method::Recurrence)?.bell(n as usize);
    let exact = crate::series::to_f64(&exact);
    let rn = (r * n) as usize;
    let prefactor = crate::series::to_f64(&(big_rat(factorial(rn)) / big_rat(factorial(r as usize))));
    let f = coherent::pfq(&[rn as f64 + 1.0], &[r as f64 + 1.0], 1.0, 1e-17)?;
    let value = prefactor * f / std::f64::consts::E;
    Ok(((value - exact) / exact).abs())
}

/// `Σ_k S(n,k) m^{\underline k}`, the connection-coefficient side of the
/// falling-factorial identity.
pub fn connection_lhs(table: &StirlingTable, n: usize, m: i64) -> Rational {
    table
        .row(n)
        .into_iter()
        .enumerate()
        .map(|(k, c)| c * big_rat(falling_int(m, k as u32)))
        .sum()
}

/// `Π_{i=1}^n Σ_k α_k (m + (i-1)d)^{\underline k}`.
pub fn connection_rhs(spec: &HomogSpec, n: usize, m: i64) -> Rational {
    (1..=n)
        .map(|i| {
            spec.alpha
                .iter()
                .map(|(k, c)| c * big_rat(falling_int(m + (i as i64 - 1) * spec.d, *k)))
                .sum::<Rational>()
        })
        .product()
}

/// Rows of a table as a univariate series in `x` per `n`.
pub fn bell_series_row(table: &StirlingTable, n: usize, order: usize) -> FormalPowerSeries {
    table.bell_polynomial(n).to_series(order)
}

/// Normal form of one word through its string coefficients.
pub fn word_normal_form(word: &[Gen]) -> Result<NormalForm, StirlingError> {
    if word.is_empty() {
        return Ok(NormalForm::identity());
    }
    let spec = StringSpec::from_word(word);
    let table = if spec.excess() >= 0 {
        string_coeffs(&spec, Method::Recurrence)?
    } else {
        negative_excess(&NegativeInput::String(spec), 1)?
    };
    Ok(table.normal_form(1))
}

/// Reads a homogeneous normal form back as a [`HomogSpec`].
pub fn homog_of(nf: &NormalForm) -> Option<HomogSpec> {
    let mut d = None;
    let mut alpha = BTreeMap::new();
    for (&(k, l), c) in nf.terms() {
        let e = k as i64 - l as i64;
        if *d.get_or_insert(e) != e {
            return None;
        }
        alpha.insert(k.min(l), c.clone());
    }
    HomogSpec::new(d?, alpha).ok()
}

fn check_size(nf: NormalForm, limits: &Limits) -> Result<NormalForm, StirlingError> {
    if nf.len() > limits.max_terms {
        return Err(AlgebraError::TooManyTerms { cap: limits.max_terms }.into());
    }
    Ok(nf)
}

/// The combinatorial engine: words through string coefficients, powers of
/// homogeneous operators through their Stirling tables, products through the
/// closed reordering formula. Never rewrites `a a†` pairs.
pub fn normal_order_stirling(e: &BosonExpr, limits: &Limits) -> Result<NormalForm, StirlingError> {
    let nf = match e {
        BosonExpr::Generator(g) => word_normal_form(&[*g])?,
        BosonExpr::Word(w) => {
            if w.len() > limits.max_word_len {
                return Err(AlgebraError::WordTooLong { len: w.len(), cap: limits.max_word_len }.into());
            }
            word_normal_form(w)?
        }
        BosonExpr::Product(fs) => {
            let mut acc = NormalForm::identity();
            for f in fs {
                acc = check_size(acc.mul(&normal_order_stirling(f, limits)?), limits)?;
            }
            acc
        }
        BosonExpr::Sum(ts) => {
            let mut acc = NormalForm::zero();
            for (c, t) in ts {
                acc = acc.add(&normal_order_stirling(t, limits)?.scale(c));
            }
            acc
        }
        BosonExpr::Power(base, n) => {
            let b = normal_order_stirling(base, limits)?;
            let n = *n as usize;
            match homog_of(&b) {
                _ if n == 0 => NormalForm::identity(),
                Some(h) if h.d() >= 0 => homog_stirling(&h, n, Method::Recurrence)?.normal_form(n),
                Some(h) => negative_excess(&NegativeInput::Homog(h), n)?.normal_form(n),
                None => {
                    let mut acc = NormalForm::identity();
                    for _ in 0..n {
                        acc = check_size(acc.mul(&b), limits)?;
                    }
                    acc
                }
            }
        }
    };
    check_size(nf, limits)
}

#[cfg(test)]
mod tests {
    #[test]
    fn combinatorial_engine_matches_rewriting() {
        let l = Limits::default();
        for text in ["a ad a a ad a", "(ad a)^3", "ad a", "(a a ad)^3", "(ad a + ad)^4", "2 (ad^2 a)^3 - 1/2 a ad^2 (a ad)^2", "(a + ad)^5", "1", "(a^2 ad)^0"] {
            let e = crate::algebra::parse_expr(text).unwrap();
            assert_eq!(normal_order_stirling(&e, &l).unwrap(), crate::algebra::normal_order_wick(&e, &l).unwrap(), "{text}");
        }
        let e = crate::algebra::parse_expr("a ad a a ad a").unwrap();
        assert_eq!(normal_order_stirling(&e, &l).unwrap().to_string(), "ad^2 a^4 + 4 ad a^3 + 2 a^2");
        let tiny = Limits { max_word_len: 64, max_terms: 3 };
        let e = crate::algebra::parse_expr("(a + ad)^6").unwrap();
        assert!(matches!(normal_order_stirling(&e, &tiny), Err(StirlingError::Algebra(AlgebraError::TooManyTerms { .. }))));
    }

    use super::*;
    use crate::algebra::{normal_order_wick, Limits};
    use crate::series::ratio;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn nonzero_row(t: &StirlingTable, n: usize) -> Vec<BigInt> {
        let (lo, hi) = t.k_range(n).unwrap();
        (lo..=hi).map(|k| t.int_entry(n, k).unwrap()).collect()
    }

    #[test]
    fn classic_values() {
        assert_eq!(stirling2(5, 3, Method::Recurrence), BigInt::from(25));
        assert_eq!(stirling2(4, 2, Method::Explicit), BigInt::from(7));
        for n in 0..=12 {
            assert_eq!(stirling2(n, n, Method::Recurrence), BigInt::one());
            for k in 0..=n {
                assert_eq!(stirling2(n, k, Method::Recurrence), stirling2(n, k, Method::Explicit));
            }
        }
    }

    #[test]
    fn bell_values() {
        assert_eq!(bell_poly(3, &rat(1)), rat(5));
        assert_eq!(bell_poly(0, &ratio(7, 3)), rat(1));
        assert_eq!(bell_polynomial(3), Polynomial::from_ints(&[0, 1, 3, 1]));
    }

    #[test]
    fn dobinski_examples() {
        assert!((dobinski_numeric(5, 1.0, 60).value - 52.0).abs() < 1e-10);
        assert!((dobinski_numeric(8, 1.0, 80).value - 4140.0).abs() < 1e-8);
        for x in [0.3, 1.0, 4.5] {
            let d = dobinski_numeric(0, x, 60);
            assert!((d.value - 1.0).abs() <= d.tail_bound.unwrap() + 1e-14);
        }
    }

    #[test]
    fn dobinski_error_decreases_past_x() {
        let x = 2.5;
        let exact = crate::series::to_f64(&bell_poly(6, &ratio(5, 2)));
        let mut prev = f64::INFINITY;
        for terms in 8..40 {
            let err = (dobinski_numeric(6, x, terms).value - exact).abs();
            if err < 1e-9 {
                break;
            }
            assert!(err <= prev, "terms={terms}");
            prev = err;
        }
    }

    #[test]
    fn string_examples() {
        let s = StringSpec::new(vec![1, 1], vec![1, 1]).unwrap();
        let t = string_coeffs(&s, Method::Recurrence).unwrap();
        assert_eq!(t.int_row(1).unwrap(), ints(&[0, 1, 1]));
        let single = StringSpec::new(vec![1], vec![1]).unwrap();
        assert_eq!(string_coeffs(&single, Method::Explicit).unwrap().int_row(1).unwrap(), ints(&[0, 1]));
        let odd = StringSpec::new(vec![1, 2], vec![1, 1]).unwrap();
        let t = string_coeffs(&odd, Method::Recurrence).unwrap();
        let oracle = normal_order_wick(&BosonExpr::Word(odd.to_word()), &Limits::default()).unwrap();
        assert_eq!(t.normal_form(1), oracle);
        assert!(matches!(
            string_coeffs(&StringSpec::new(vec![1], vec![2]).unwrap(), Method::Recurrence),
            Err(StirlingError::NegativeExcess(-1))
        ));
    }

    #[test]
    fn homog_examples() {
        let t = homog_stirling(&HomogSpec::monomial(2, 0), 3, Method::Recurrence).unwrap();
        assert_eq!(nonzero_row(&t, 3), ints(&[4, 32, 38, 12, 1]));
        let t = homog_stirling(&HomogSpec::monomial(2, 1), 2, Method::Explicit).unwrap();
        assert_eq!(nonzero_row(&t, 2), ints(&[6, 6, 1]));
        let t = homog_stirling(&HomogSpec::monomial(1, 0), 8, Method::Recurrence).unwrap();
        assert_eq!(t, StirlingTable { family: t.family.clone(), ..classic_table(8) });
        assert_eq!(HomogSpec::new(0, BTreeMap::new()), Err(StirlingError::EmptySupport));
    }

    #[test]
    fn iterate_examples() {
        let t = iterate_string(&StringSpec::new(vec![2], vec![1]).unwrap(), 4).unwrap();
        assert_eq!(nonzero_row(&t, 4), ints(&[24, 36, 12, 1]));
        assert_eq!(t.int_bell(4).unwrap(), BigInt::from(73));
        let spec = StringSpec::new(vec![1, 1], vec![1, 1]).unwrap();
        let t = iterate_string(&spec, 2).unwrap();
        let e = BosonExpr::power(BosonExpr::Word(spec.to_word()), 2);
        assert_eq!(t.normal_form(2), normal_order_wick(&e, &Limits::default()).unwrap());
        let once = iterate_string(&StringSpec::new(vec![2, 2, 1], vec![2, 1, 1]).unwrap(), 1).unwrap();
        let direct = string_coeffs(&StringSpec::new(vec![2, 2, 1], vec![2, 1, 1]).unwrap(), Method::Recurrence).unwrap();
        assert_eq!(once.row(1), direct.row(1));
    }

    #[test]
    fn negative_excess_examples() {
        let l = Limits::default();
        let spec = StringSpec::new(vec![1], vec![2]).unwrap();
        let t = negative_excess(&NegativeInput::String(spec.clone()), 1).unwrap();
        assert_eq!(t.normal_form(1), normal_order_wick(&BosonExpr::Word(spec.to_word()), &l).unwrap());
        let neg = negative_excess(&NegativeInput::Homog(HomogSpec::monomial(1, -1)), 2).unwrap();
        let pos = homog_stirling(&HomogSpec::monomial(1, 1), 2, Method::Recurrence).unwrap();
        assert_eq!(neg.row(2), pos.row(2));
        assert_eq!(neg.normal_form(2), normal_order_wick(&BosonExpr::power(HomogSpec::monomial(1, -1).to_expr(), 2), &l).unwrap());
        assert!(matches!(
            negative_excess(&NegativeInput::Homog(HomogSpec::monomial(1, 1)), 2),
            Err(StirlingError::NonNegativeExcess(1))
        ));
        // round trip through the conjugate string
        let s = StringSpec::new(vec![0, 1, 2], vec![2, 3, 0]).unwrap();
        let direct = negative_excess(&NegativeInput::String(s.clone()), 3).unwrap();
        let back = iterate_string(&s.conjugate(), 3).unwrap();
        assert_eq!(direct.row(3), back.row(3));
    }

    #[test]
    fn rs_examples() {
        let t = rs_table(3, 1, 4, Method::Recurrence).unwrap();
        assert_eq!(nonzero_row(&t, 4), ints(&[105, 87, 18, 1]));
        assert_eq!(t.int_bell(4).unwrap(), BigInt::from(211));
        let t = rs_table(3, 3, 2, Method::Explicit).unwrap();
        assert_eq!(nonzero_row(&t, 2), ints(&[6, 18, 9, 1]));
        assert_eq!(t.int_bell(2).unwrap(), BigInt::from(34));
        let t = rs_table(3, 2, 3, Method::Recurrence).unwrap();
        assert_eq!(nonzero_row(&t, 3), ints(&[72, 168, 96, 18, 1]));
        assert_eq!(t.int_bell(3).unwrap(), BigInt::from(355));
    }

    #[test]
    fn rs_agrees_with_homog_and_explicit() {
        for r in 1..=4u32 {
            for s in 1..=r {
                let h = homog_stirling(&HomogSpec::monomial(s, (r - s) as i64), 5, Method::Recurrence).unwrap();
                for method in [Method::Recurrence, Method::Explicit] {
                    let t = rs_table(r, s, 5, method).unwrap();
                    for n in 0..=5 {
                        assert_eq!(t.row(n), h.row(n), "r={r} s={s} n={n} {method:?}");
                    }
                }
                let seq = bell_rs_sequence(r, s, 5);
                for n in 0..=5 {
                    assert_eq!(big_rat(seq[n].clone()), h.bell(n));
                }
            }
        }
        let t = rs_table(1, 3, 3, Method::Recurrence).unwrap();
        assert_eq!(t.excess(), -2);
        let e = BosonExpr::power(BosonExpr::Word(vec![Gen::Ad, Gen::A, Gen::A, Gen::A]), 3);
        assert_eq!(t.normal_form(3), normal_order_wick(&e, &Limits::default()).unwrap());
    }

    #[test]
    fn egf_matches_closed_forms() {
        let classic = egf_eval(&HomogSpec::monomial(1, 0), 8, 8).unwrap();
        assert_eq!(classic, bell_egf(8, 8).unwrap());
        let r2 = egf_eval(&HomogSpec::monomial(1, 1), 6, 6).unwrap();
        let at_one = r2.eval_x(&rat(1));
        let expected = [1, 1, 3, 13, 73, 501, 4051];
        for (n, &v) in expected.iter().enumerate() {
            assert_eq!(at_one.slot(n), &rat(v));
        }
        for r in 2..=4 {
            let t = egf_eval(&HomogSpec::monomial(1, r as i64 - 1), 7, 7).unwrap();
            assert_eq!(t, rs1_closed_egf(r, 7, 7).unwrap(), "r={r}");
        }
        let spec = HomogSpec::from_ints(2, &[(1, 3), (2, -1)]).unwrap();
        let t = egf_eval(&spec, 4, 9).unwrap();
        for m in 0..=9 {
            assert_eq!(t.coeff(0, m), &rat(if m == 0 { 1 } else { 0 }));
        }
    }

    #[test]
    fn hypergeometric_checks() {
        assert!(hyper_checks(1, 3).unwrap() < 1e-10);
        assert!(hyper_checks(1, 1).unwrap() < 1e-10);
        assert!(hyper_checks(2, 2).unwrap() < 1e-8);
    }

    #[test]
    fn rational_alpha_stays_rational() {
        let spec = HomogSpec::new(1, BTreeMap::from([(1, ratio(1, 2)), (2, ratio(3, 4))])).unwrap();
        let rec = homog_stirling(&spec, 4, Method::Recurrence).unwrap();
        let exp = homog_stirling(&spec, 4, Method::Explicit).unwrap();
        assert!(!rec.is_integral());
        for n in 0..=4 {
            assert_eq!(rec.row(n), exp.row(n));
        }
        let e = BosonExpr::power(spec.to_expr(), 3);
        assert_eq!(rec.normal_form(3), normal_order_wick(&e, &Limits::default()).unwrap());
    }

    fn homog_strategy() -> impl Strategy<Value = HomogSpec> {
        (0i64..3, proptest::collection::btree_map(0u32..4, -3i64..4, 1..4)).prop_filter_map("empty support", |(d, m)| {
            HomogSpec::new(d, m.into_iter().map(|(k, c)| (k, rat(c))).collect()).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn recurrence_equals_explicit(spec in homog_strategy()) {
            let a = homog_stirling(&spec, 6, Method::Recurrence).unwrap();
            let b = homog_stirling(&spec, 6, Method::Explicit).unwrap();
            for n in 0..=6 { prop_assert_eq!(a.row(n), b.row(n)); }
        }

        #[test]
        fn connection_property(spec in homog_strategy(), m in 0i64..=10) {
            let t = homog_stirling(&spec, 5, Method::Recurrence).unwrap();
            for n in 0..=5 {
                prop_assert_eq!(connection_lhs(&t, n, m), connection_rhs(&spec, n, m));
            }
        }

        #[test]
        fn homog_matches_oracle(spec in homog_strategy()) {
            let t = homog_stirling(&spec, 3, Method::Recurrence).unwrap();
            let nf = normal_order_wick(&BosonExpr::power(spec.to_expr(), 3), &Limits::default()).unwrap();
            prop_assert_eq!(t.normal_form(3), nf);
        }

        #[test]
        fn sheffer_identity(xn in -9i64..10, xd in 1i64..5, yn in -9i64..10, yd in 1i64..5) {
            let (x, y) = (ratio(xn, xd), ratio(yn, yd));
            for n in 0..=8usize {
                let lhs = bell_poly(n, &(&x + &y));
                let rhs: Rational = (0..=n)
                    .map(|k| big_rat(binomial(n, k)) * bell_poly(k, &y) * bell_poly(n - k, &x))
                    .sum();
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn bell_recurrence(xn in -9i64..10, xd in 1i64..5) {
            let x = ratio(xn, xd);
            for n in 0..8usize {
                let rhs: Rational = (0..=n).map(|k| big_rat(binomial(n, k)) * bell_poly(k, &x)).sum();
                prop_assert_eq!(bell_poly(n + 1, &x), &x * rhs);
            }
        }

        #[test]
        fn string_recurrence_matches_explicit_and_oracle(
            blocks in proptest::collection::vec((0u32..3, 0u32..3), 1..4)
        ) {
            let spec = StringSpec::new(blocks.iter().map(|b| b.0).collect(), blocks.iter().map(|b| b.1).collect()).unwrap();
            prop_assume!(spec.excess() >= 0);
            let a = string_coeffs(&spec, Method::Recurrence).unwrap();
            let b = string_coeffs(&spec, Method::Explicit).unwrap();
            prop_assert_eq!(a.row(1), b.row(1));
            let nf = normal_order_wick(&BosonExpr::Word(spec.to_word()), &Limits::default()).unwrap();
            prop_assert_eq!(a.normal_form(1), nf);
            let (_, hi) = a.k_range(1).unwrap();
            prop_assert_eq!(a.entry(1, hi), rat(1));
        }
    }
}
