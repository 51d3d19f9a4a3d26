//! Deformed bosons `[A, A†] = [N+1] - [N]` with `A†A = [N]`.
//!
//! `(A†A)^n = Σ_k 𝒮_{n,k}(N) (A†)^k A^k`, where `𝒮_{n,k}` is a homogeneous
//! polynomial of degree `n - k` in `b_j = [N-j]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::algebra::NormalForm;
use crate::poly::Polynomial;
use crate::series::{ratio, rat, FormalPowerSeries, Rational};
use crate::stirling::{rs_table, Method};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeformedError {
    #[error("[N-{r}] and [N-{j}] coincide at N = {n}, so the partial-fraction formula is singular")]
    Collision { n: i64, r: usize, j: usize },
    #[error("box function has no value at {0}")]
    Undefined(i64),
    #[error("unknown box `{0}`")]
    UnknownBox(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Polynomial in `b_0, b_1, …`; a key lists exponents with trailing zeros stripped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BoxPolynomial {
    terms: BTreeMap<Vec<u32>, Rational>,
}

fn trim(mut e: Vec<u32>) -> Vec<u32> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

impl BoxPolynomial {
    pub fn zero() -> Self {
        BoxPolynomial::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    /// `b_j = [N-j]`.
    pub fn var(j: usize) -> Self {
        let mut e = vec![0; j + 1];
        e[j] = 1;
        let mut p = Self::zero();
        p.add_term(e, Rational::one());
        p
    }

    /// Monomial `c Π b_j^{e_j}`.
    pub fn monomial(exponents: &[u32], c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(exponents.to_vec(), c);
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let e = trim(e);
        let entry = self.terms.entry(e.clone()).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let len = ea.len().max(eb.len());
                let e = (0..len).map(|i| ea.get(i).unwrap_or(&0) + eb.get(i).unwrap_or(&0)).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Total degrees of the monomials present.
    pub fn degrees(&self) -> Vec<u32> {
        self.terms.keys().map(|e| e.iter().sum()).collect()
    }

    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.degrees().iter().all(|&d| d == degree)
    }

    /// Largest `j` with `b_j` present.
    pub fn max_var(&self) -> Option<usize> {
        self.terms.keys().filter_map(|e| e.len().checked_sub(1)).max()
    }

    /// Substitutes `b_j = values[j]`.
    pub fn eval(&self, values: &[Rational]) -> Rational {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(c.clone(), |acc, (j, &p)| acc * num_traits::pow(values[j].clone(), p as usize))
            })
            .sum()
    }

    /// Substitutes polynomials `b_j = values[j](N)`.
    pub fn eval_poly(&self, values: &[Polynomial]) -> Polynomial {
        let mut acc = Polynomial::zero();
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(c.clone());
            for (j, &p) in e.iter().enumerate() {
                t = t.mul(&values[j].pow(p as usize));
            }
            acc = acc.add(&t);
        }
        acc
    }
}

impl fmt::Display for BoxPolynomial {
    /// `3[N]^2-3[N][N-1]+[N-1]^2`: reversed lexicographic order of the
    /// exponent vectors puts higher powers of `[N]` first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { "-" } else { "+" })?;
            }
            first = false;
            let constant = e.is_empty();
            if constant || !mag.is_one() {
                write!(f, "{mag}")?;
                if !constant && !mag.is_integer() {
                    f.write_str("*")?;
                }
            }
            for (j, &p) in e.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                if j == 0 {
                    f.write_str("[N]")?;
                } else {
                    write!(f, "[N-{j}]")?;
                }
                if p > 1 {
                    write!(f, "^{p}")?;
                }
            }
        }
        Ok(())
    }
}

type Memo = RwLock<HashMap<(usize, usize), Arc<BoxPolynomial>>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `𝒮_{n,k}` from `𝒮_{n+1,k} = 𝒮_{n,k-1} + (b_0 - b_k) 𝒮_{n,k}`,
/// `𝒮_{0,0} = 1` and zero outside `1 ≤ k ≤ n`.
pub fn deformed_stirling(n: usize, k: usize) -> Arc<BoxPolynomial> {
    if k > n || (k == 0) != (n == 0) {
        return Arc::new(BoxPolynomial::zero());
    }
    if let Some(p) = memo().read().expect("memo lock").get(&(n, k)) {
        return p.clone();
    }
    let mut table = memo().write().expect("memo lock");
    table.entry((0, 0)).or_insert_with(|| Arc::new(BoxPolynomial::one()));
    let get = |t: &HashMap<(usize, usize), Arc<BoxPolynomial>>, n: usize, k: usize| -> BoxPolynomial {
        if k > n || (k == 0) != (n == 0) {
            BoxPolynomial::zero()
        } else {
            (*t[&(n, k)]).clone()
        }
    };
    for m in 1..=n {
        for j in 1..=m {
            if table.contains_key(&(m, j)) {
                continue;
            }
            let diff = BoxPolynomial::var(0).sub(&BoxPolynomial::var(j));
            let v = get(&table, m - 1, j - 1).add(&diff.mul(&get(&table, m - 1, j)));
            table.insert((m, j), Arc::new(v));
        }
    }
    table[&(n, k)].clone()
}

/// A rational-valued box function `n ↦ [n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoxFunction {
    /// `[n] = n`.
    Canonical,
    /// `[n] = -n(n-1)/2`.
    So3,
    /// `[n] = n(n-1)/2`.
    So21,
    Polynomial(Polynomial),
    /// Values on a finite set of arguments.
    Table(BTreeMap<i64, Rational>),
}

impl BoxFunction {
    pub fn parse(name: &str) -> Result<Self, DeformedError> {
        match name {
            "canonical" => Ok(BoxFunction::Canonical),
            "so3" => Ok(BoxFunction::So3),
            "so21" => Ok(BoxFunction::So21),
            _ => Err(DeformedError::UnknownBox(name.to_string())),
        }
    }

    /// The box as a polynomial in `N`, when it is one.
    pub fn polynomial(&self) -> Option<Polynomial> {
        let half = ratio(1, 2);
        match self {
            BoxFunction::Canonical => Some(Polynomial::variable()),
            BoxFunction::So3 => Some(Polynomial::new(vec![rat(0), half.clone(), -half])),
            BoxFunction::So21 => Some(Polynomial::new(vec![rat(0), -half.clone(), half])),
            BoxFunction::Polynomial(p) => Some(p.clone()),
            BoxFunction::Table(_) => None,
        }
    }

    pub fn eval(&self, n: i64) -> Result<Rational, DeformedError> {
        match self {
            BoxFunction::Table(t) => t.get(&n).cloned().ok_or(DeformedError::Undefined(n)),
            other => Ok(other.polynomial().expect("polynomial box").eval(&rat(n))),
        }
    }

    /// `[N], [N-1], …, [N-k]`.
    pub fn values(&self, n: i64, k: usize) -> Result<Vec<Rational>, DeformedError> {
        (0..=k as i64).map(|j| self.eval(n - j)).collect()
    }

    /// Strictly monotone on `lo..=hi`.
    pub fn is_monotone_on(&self, lo: i64, hi: i64) -> Result<bool, DeformedError> {
        let v: Vec<Rational> = (lo..=hi).map(|n| self.eval(n)).collect::<Result<_, _>>()?;
        let up = v.windows(2).all(|w| w[0] < w[1]);
        let down = v.windows(2).all(|w| w[0] > w[1]);
        Ok(up || down)
    }
}

/// Partial-fraction form
/// `Σ_r ([N]-[N-r])^{n-1} / Π_{j≠r} ([N-j]-[N-r])`.
pub fn deformed_explicit(n: usize, k: usize, bx: &BoxFunction, big_n: i64) -> Result<Rational, DeformedError> {
    if k > n || (k == 0) != (n == 0) {
        return Ok(Rational::zero());
    }
    if n == 0 {
        return Ok(Rational::one());
    }
    let b = bx.values(big_n, k)?;
    let mut acc = Rational::zero();
    for r in 1..=k {
        let mut den = Rational::one();
        for j in (1..=k).filter(|&j| j != r) {
            let d = &b[j] - &b[r];
            if d.is_zero() {
                return Err(DeformedError::Collision { n: big_n, r: r.min(j), j: r.max(j) });
            }
            den *= d;
        }
        acc += num_traits::pow(&b[0] - &b[r], n - 1) / den;
    }
    Ok(acc)
}

/// `Π_{j=1}^k x/(1 - ([N]-[N-j]) x)` through `x^order`, stored as an FPS
/// whose ordinary coefficients are `𝒮_{n,k}` at `N`.
pub fn deformed_ogf(k: usize, bx: &BoxFunction, big_n: i64, order: usize) -> Result<FormalPowerSeries, DeformedError> {
    if k == 0 {
        return Err(DeformedError::InvalidArgument("k must be at least 1".into()));
    }
    let b = bx.values(big_n, k)?;
    let mut coeffs = vec![Rational::zero(); order + 1];
    coeffs[0] = Rational::one();
    for j in 1..=k {
        let d = &b[0] - &b[j];
        // multiply by x Σ_m d^m x^m
        let mut next = vec![Rational::zero(); order + 1];
        for n in 1..=order {
            let mut acc = Rational::zero();
            let mut dp = Rational::one();
            for m in 0..n {
                acc += &dp * &coeffs[n - 1 - m];
                dp *= &d;
            }
            next[n] = acc;
        }
        coeffs = next;
    }
    Ok(FormalPowerSeries::from_ogf(&coeffs, order))
}

/// `𝒮_{n,k}` with `b_j = [N-j]` for a polynomial box, as a polynomial in `N`.
pub fn specialize_box(bx: &BoxFunction, n: usize, k: usize) -> Result<Polynomial, DeformedError> {
    let p = bx.polynomial().ok_or_else(|| DeformedError::InvalidArgument("box is not a polynomial".into()))?;
    let values: Vec<Polynomial> = (0..=k).map(|j| p.compose(&Polynomial::new(vec![rat(-(j as i64)), rat(1)]))).collect();
    Ok(deformed_stirling(n, k).eval_poly(&values))
}

pub fn specialize_named(name: &str, n: usize, k: usize) -> Result<Polynomial, DeformedError> {
    specialize_box(&BoxFunction::parse(name)?, n, k)
}

/// `(A†A)^n = Σ_k c_k(N) (A†)^k A^k` in the realization
/// `A = aa/(2√2)`, `N = (a†a + 1/2)/2`, with
/// `c_k = 8^{k-n} (S_{2,2}(n,2k) + S_{2,2}(n,2k+1)(2N - 2k - 1/2))`.
pub fn so21_realization(n: usize) -> Result<BTreeMap<usize, Polynomial>, DeformedError> {
    if n == 0 {
        return Err(DeformedError::InvalidArgument("n must be at least 1".into()));
    }
    let t = rs_table(2, 2, n, Method::Recurrence).map_err(|e| DeformedError::InvalidArgument(e.to_string()))?;
    let mut out = BTreeMap::new();
    for k in 1..=n {
        let scale = Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(8), n - k));
        let even = t.entry(n, 2 * k);
        let odd = t.entry(n, 2 * k + 1);
        let lin = Polynomial::new(vec![ratio(-(4 * k as i64) - 1, 2), rat(2)]).scale(&odd);
        let c = Polynomial::constant(even).add(&lin).scale(&scale);
        out.insert(k, c);
    }
    Ok(out)
}

/// Canonical-boson image of `Σ_k c_k(N) (A†)^k A^k` with `N` on the left.
pub fn realize_canonical(coeffs: &BTreeMap<usize, Polynomial>) -> NormalForm {
    // N = (a†a + 1/2)/2 as a normal form
    let number = NormalForm::term(1, 1, ratio(1, 2)).add(&NormalForm::term(0, 0, ratio(1, 4)));
    let mut out = NormalForm::zero();
    for (&k, c) in coeffs {
        let ak = NormalForm::term(2 * k as u32, 2 * k as u32, Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(8), k)));
        let mut power = NormalForm::identity();
        let mut poly = NormalForm::zero();
        for (j, cj) in c.coeffs().iter().enumerate() {
            if j > 0 {
                power = power.mul(&number);
            }
            poly = poly.add(&power.scale(cj));
        }
        out = out.add(&poly.mul(&ak));
    }
    out
}

/// `8^{-n} ((a†)^2 a^2)^n` through the exact `S_{2,2}` table.
pub fn canonical_so21_power(n: usize) -> NormalForm {
    let t = rs_table(2, 2, n, Method::Recurrence).expect("valid family");
    let scale = Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(8), n));
    t.normal_form(n).scale(&scale)
}

/// The general `𝒮_{n,k}` for a polynomial box, realized canonically.
pub fn deformed_realized(bx: &BoxFunction, n: usize) -> Result<NormalForm, DeformedError> {
    let coeffs = (1..=n).map(|k| specialize_box(bx, n, k).map(|p| (k, p))).collect::<Result<_, _>>()?;
    Ok(realize_canonical(&coeffs))
}

/// Row `n` of a named box as text, `N`-polynomials ordered by `k`.
pub fn render_row(bx: &BoxFunction, n: usize) -> Result<Vec<String>, DeformedError> {
    (1..=n).map(|k| specialize_box(bx, n, k).map(|p| p.render("N"))).collect()
}

/// Canonical reduction as an integer table check helper.
pub fn canonical_value(n: usize, k: usize, big_n: i64) -> Rational {
    let b: Vec<Rational> = (0..=k as i64).map(|j| rat(big_n - j)).collect();
    deformed_stirling(n, k).eval(&b)
}
