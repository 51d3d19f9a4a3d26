//! Boson expressions: AST, text parser, the rewrite-based normal-ordering
//! oracle, the double-dot operation, conjugation and coherent-state readout.
//!
//! Text syntax: `ad` (alias `a†`) is the creation operator, `a` the
//! annihilation operator. Factors juxtapose, `^n` raises to a power,
//! parentheses group, and terms carry optional rational coefficients:
//! `2 ad^2 a^2 - 3/2 (ad a)^3 + 1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::series::{big_rat, binomial, rat, to_f64, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gen {
    /// Annihilation operator `a`.
    A,
    /// Creation operator `a†`.
    Ad,
}

impl Gen {
    pub fn dagger(self) -> Gen {
        match self {
            Gen::A => Gen::Ad,
            Gen::Ad => Gen::A,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Gen::A => "a",
            Gen::Ad => "ad",
        }
    }
}

/// Creations minus annihilations.
pub fn excess(word: &[Gen]) -> i64 {
    word.iter().map(|g| if *g == Gen::Ad { 1 } else { -1 }).sum()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("negative exponent at byte {offset}")]
    NegativeExponent { offset: usize },
    #[error("word of length {len} exceeds the cap of {cap} generators")]
    WordTooLong { len: usize, cap: usize },
    #[error("expansion produced more than {cap} intermediate terms")]
    TooManyTerms { cap: usize },
}

/// Resource caps for expansion and rewriting. Exceeding one is an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_word_len: usize,
    pub max_terms: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_word_len: 64, max_terms: 2_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BosonExpr {
    Generator(Gen),
    Product(Vec<BosonExpr>),
    Power(Box<BosonExpr>, u32),
    Sum(Vec<(Rational, BosonExpr)>),
    Word(Vec<Gen>),
}

/// Finite linear combination of words.
pub type WordSum = BTreeMap<Vec<Gen>, Rational>;

impl BosonExpr {
    pub fn identity() -> Self {
        BosonExpr::Word(Vec::new())
    }

    pub fn word(gens: &[Gen]) -> Self {
        BosonExpr::Word(gens.to_vec())
    }

    pub fn power(base: BosonExpr, n: u32) -> Self {
        BosonExpr::Power(Box::new(base), n)
    }

    /// Builds a sum, dropping zero coefficients.
    pub fn sum(terms: Vec<(Rational, BosonExpr)>) -> Self {
        BosonExpr::Sum(terms.into_iter().filter(|(c, _)| !c.is_zero()).collect())
    }

    /// Expands into a linear combination of words.
    pub fn flatten(&self, limits: &Limits) -> Result<WordSum, AlgebraError> {
        let out = match self {
            BosonExpr::Generator(g) => single(vec![*g], limits)?,
            BosonExpr::Word(w) => single(w.clone(), limits)?,
            BosonExpr::Product(fs) => {
                let mut acc = single(Vec::new(), limits)?;
                for f in fs {
                    acc = multiply(&acc, &f.flatten(limits)?, limits)?;
                }
                acc
            }
            BosonExpr::Power(b, n) => {
                let base = b.flatten(limits)?;
                let mut acc = single(Vec::new(), limits)?;
                for _ in 0..*n {
                    acc = multiply(&acc, &base, limits)?;
                }
                acc
            }
            BosonExpr::Sum(terms) => {
                let mut acc = WordSum::new();
                for (c, e) in terms {
                    for (w, d) in e.flatten(limits)? {
                        *acc.entry(w).or_insert_with(Rational::zero) += c * d;
                    }
                    if acc.len() > limits.max_terms {
                        return Err(AlgebraError::TooManyTerms { cap: limits.max_terms });
                    }
                }
                acc.retain(|_, c| !c.is_zero());
                acc
            }
        };
        Ok(out)
    }
}

fn single(w: Vec<Gen>, limits: &Limits) -> Result<WordSum, AlgebraError> {
    if w.len() > limits.max_word_len {
        return Err(AlgebraError::WordTooLong { len: w.len(), cap: limits.max_word_len });
    }
    Ok(WordSum::from([(w, Rational::one())]))
}

fn multiply(a: &WordSum, b: &WordSum, limits: &Limits) -> Result<WordSum, AlgebraError> {
    let mut out = WordSum::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            let len = wa.len() + wb.len();
            if len > limits.max_word_len {
                return Err(AlgebraError::WordTooLong { len, cap: limits.max_word_len });
            }
            let mut w = wa.clone();
            w.extend_from_slice(wb);
            *out.entry(w).or_insert_with(Rational::zero) += ca * cb;
        }
        if out.len() > limits.max_terms {
            return Err(AlgebraError::TooManyTerms { cap: limits.max_terms });
        }
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

fn render_gens(gens: &[Gen], out: &mut Vec<String>) {
    let mut i = 0;
    while i < gens.len() {
        let g = gens[i];
        let mut j = i;
        while j < gens.len() && gens[j] == g {
            j += 1;
        }
        let run = j - i;
        if run == 1 {
            out.push(g.token().to_string());
        } else {
            out.push(format!("{}^{}", g.token(), run));
        }
        i = j;
    }
}

impl fmt::Display for BosonExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BosonExpr::Generator(g) => f.write_str(g.token()),
            BosonExpr::Word(w) => {
                if w.is_empty() {
                    return f.write_str("1");
                }
                let mut parts = Vec::new();
                render_gens(w, &mut parts);
                f.write_str(&parts.join(" "))
            }
            BosonExpr::Product(fs) => {
                if fs.is_empty() {
                    return f.write_str("1");
                }
                let parts: Vec<String> = fs
                    .iter()
                    .map(|e| match e {
                        BosonExpr::Sum(_) => format!("({e})"),
                        _ => e.to_string(),
                    })
                    .filter(|p| p != "1")
                    .collect();
                if parts.is_empty() {
                    return f.write_str("1");
                }
                f.write_str(&parts.join(" "))
            }
            BosonExpr::Power(b, n) => match **b {
                BosonExpr::Generator(g) => write!(f, "{}^{n}", g.token()),
                _ => write!(f, "({b})^{n}"),
            },
            BosonExpr::Sum(terms) => {
                if terms.is_empty() {
                    return f.write_str("0");
                }
                for (i, (c, e)) in terms.iter().enumerate() {
                    let neg = c.is_negative();
                    match (i, neg) {
                        (0, true) => f.write_str("-")?,
                        (0, false) => {}
                        (_, true) => f.write_str(" - ")?,
                        (_, false) => f.write_str(" + ")?,
                    }
                    let body = match e {
                        BosonExpr::Sum(_) => format!("({e})"),
                        _ => e.to_string(),
                    };
                    if body == "1" {
                        write!(f, "{}", c.abs())?;
                    } else {
                        write!(f, "{}*{}", c.abs(), body)?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Canonical `Σ c_{k,l} (a†)^k a^l`, keyed by `(k, l)`, zero coefficients never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NormalForm {
    terms: BTreeMap<(u32, u32), Rational>,
}

impl NormalForm {
    pub fn zero() -> Self {
        NormalForm { terms: BTreeMap::new() }
    }

    pub fn identity() -> Self {
        Self::term(0, 0, Rational::one())
    }

    pub fn term(k: u32, l: u32, c: Rational) -> Self {
        let mut nf = Self::zero();
        nf.add_term(k, l, c);
        nf
    }

    pub fn add_term(&mut self, k: u32, l: u32, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((k, l)).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(k, l));
        }
    }

    pub fn coeff(&self, k: u32, l: u32) -> Rational {
        self.terms.get(&(k, l)).cloned().unwrap_or_else(Rational::zero)
    }

    /// Terms in ascending `(k, l)` order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&(u32, u32), &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(k, l), c) in &other.terms {
            out.add_term(k, l, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero();
        for (&(k, l), d) in &self.terms {
            out.add_term(k, l, c * d);
        }
        out
    }

    /// Product of two normal forms via
    /// `a^l (a†)^m = Σ_j C(l,j) m(m-1)…(m-j+1) (a†)^{m-j} a^{l-j}`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(k, l), c) in &self.terms {
            for (&(m, n), d) in &other.terms {
                let mut coef = BigInt::one();
                for j in 0..=l.min(m) {
                    if j > 0 {
                        coef *= BigInt::from(m - j + 1);
                    }
                    let w = big_rat(binomial(l as usize, j as usize) * &coef);
                    out.add_term(k + m - j, l - j + n, c * d * w);
                }
            }
        }
        out
    }

    /// Every term has creation minus annihilation power equal to `d`.
    pub fn has_excess(&self, d: i64) -> bool {
        self.terms.keys().all(|&(k, l)| k as i64 - l as i64 == d)
    }

    /// `Σ c_{k,l} zbar^k w^l`, i.e. `⟨z|F|w⟩ / ⟨z|w⟩` with `zbar = z*`.
    pub fn cs_matrix_element(&self, zbar: Complex64, w: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(k, l), c)| zbar.powu(k) * w.powu(l) * to_f64(c))
            .sum()
    }

    /// Reads the normal form back as an expression.
    pub fn to_expr(&self) -> BosonExpr {
        BosonExpr::sum(
            self.terms
                .iter()
                .rev()
                .map(|(&(k, l), c)| (c.clone(), BosonExpr::Word(monomial_word(k, l))))
                .collect(),
        )
    }

    /// Action on the unnormalized number state `(a†)^m |0⟩`, as a map from
    /// level to coefficient.
    pub fn act_on_number_state(&self, m: u64) -> BTreeMap<u64, Rational> {
        let mut out = BTreeMap::new();
        for (&(k, l), c) in &self.terms {
            if (l as u64) > m {
                continue;
            }
            let f: BigInt = (0..l as u64).map(|j| BigInt::from(m - j)).product();
            let level = m - l as u64 + k as u64;
            *out.entry(level).or_insert_with(Rational::zero) += c * big_rat(f);
        }
        out.retain(|_, c: &mut Rational| !c.is_zero());
        out
    }

    fn render_with(&self, explicit: bool) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (&(k, l), c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let mag = c.abs();
            let mut parts = Vec::new();
            render_gens(&monomial_word(k, l), &mut parts);
            let mono = parts.join(" ");
            if mono.is_empty() {
                out.push_str(&mag.to_string());
            } else if explicit {
                out.push_str(&format!("{mag}*{mono}"));
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag} {mono}"));
            }
        }
        out
    }

    /// Rendering with every coefficient spelled out: `1*ad^2 a^4 + 4*ad a^3 + 2*a^2`.
    pub fn render_explicit(&self) -> String {
        self.render_with(true)
    }
}

/// Terms print highest `(k, l)` first, unit coefficients omitted:
/// `ad^2 a^4 + 4 ad a^3 + 2 a^2`.
impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(false))
    }
}

fn monomial_word(k: u32, l: u32) -> Vec<Gen> {
    let mut w = vec![Gen::Ad; k as usize];
    w.extend(std::iter::repeat_n(Gen::A, l as usize));
    w
}

/// Which `a a†` pair the rewrite picks next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewriteStrategy {
    Leftmost,
    Rightmost,
}

fn find_pair(w: &[Gen], strategy: RewriteStrategy) -> Option<usize> {
    let is_pair = |i: &usize| w[*i] == Gen::A && w[*i + 1] == Gen::Ad;
    let n = w.len().saturating_sub(1);
    match strategy {
        RewriteStrategy::Leftmost => (0..n).find(is_pair),
        RewriteStrategy::Rightmost => (0..n).rev().find(is_pair),
    }
}

/// Normal-orders a single word by repeated `a a† → a† a + 1` with integer coefficients.
pub fn normal_order_word(word: &[Gen], strategy: RewriteStrategy, limits: &Limits) -> Result<NormalForm, AlgebraError> {
    if word.len() > limits.max_word_len {
        return Err(AlgebraError::WordTooLong { len: word.len(), cap: limits.max_word_len });
    }
    let mut pending: HashMap<Vec<Gen>, BigInt> = HashMap::from([(word.to_vec(), BigInt::one())]);
    let mut done: BTreeMap<(u32, u32), BigInt> = BTreeMap::new();
    // Longest words first, so shorter descendants accumulate before being expanded.
    while let Some(w) = pending.keys().max_by_key(|w| w.len()).cloned() {
        let c = pending.remove(&w).expect("key just seen");
        if c.is_zero() {
            continue;
        }
        match find_pair(&w, strategy) {
            None => {
                let k = w.iter().filter(|g| **g == Gen::Ad).count() as u32;
                *done.entry((k, w.len() as u32 - k)).or_insert_with(BigInt::zero) += c;
            }
            Some(i) => {
                let mut swapped = w.clone();
                swapped.swap(i, i + 1);
                let mut contracted = w;
                contracted.drain(i..i + 2);
                *pending.entry(swapped).or_insert_with(BigInt::zero) += &c;
                *pending.entry(contracted).or_insert_with(BigInt::zero) += c;
                if pending.len() > limits.max_terms {
                    return Err(AlgebraError::TooManyTerms { cap: limits.max_terms });
                }
            }
        }
    }
    let mut nf = NormalForm::zero();
    for ((k, l), c) in done {
        nf.add_term(k, l, big_rat(c));
    }
    Ok(nf)
}

/// Normal form of a linear combination of words.
pub fn normal_order_words(words: &WordSum, limits: &Limits) -> Result<NormalForm, AlgebraError> {
    let mut nf = NormalForm::zero();
    for (w, c) in words {
        nf = nf.add(&normal_order_word(w, RewriteStrategy::Leftmost, limits)?.scale(c));
    }
    Ok(nf)
}

/// The rewrite oracle applied to an arbitrary expression.
pub fn normal_order_wick(e: &BosonExpr, limits: &Limits) -> Result<NormalForm, AlgebraError> {
    normal_order_words(&e.flatten(limits)?, limits)
}

/// `:e:`, moving every `a` to the right as if the generators commuted.
pub fn double_dot(e: &BosonExpr, limits: &Limits) -> Result<NormalForm, AlgebraError> {
    let mut nf = NormalForm::zero();
    for (w, c) in e.flatten(limits)? {
        let k = w.iter().filter(|g| **g == Gen::Ad).count() as u32;
        nf.add_term(k, w.len() as u32 - k, c);
    }
    Ok(nf)
}

/// Hermitian conjugate: words reversed, `a ↔ a†`; rational coefficients are real.
pub fn conjugate(e: &BosonExpr) -> BosonExpr {
    match e {
        BosonExpr::Generator(g) => BosonExpr::Generator(g.dagger()),
        BosonExpr::Word(w) => BosonExpr::Word(w.iter().rev().map(|g| g.dagger()).collect()),
        BosonExpr::Product(fs) => BosonExpr::Product(fs.iter().rev().map(conjugate).collect()),
        BosonExpr::Power(b, n) => BosonExpr::Power(Box::new(conjugate(b)), *n),
        BosonExpr::Sum(terms) => BosonExpr::Sum(terms.iter().map(|(c, t)| (c.clone(), conjugate(t))).collect()),
    }
}

/// Overlap `⟨z|w⟩` of normalized canonical coherent states.
pub fn cs_overlap(z: Complex64, w: Complex64) -> Complex64 {
    (z.conj() * w - 0.5 * w.norm_sqr() - 0.5 * z.norm_sqr()).exp()
}

pub fn cs_matrix_element(nf: &NormalForm, zbar: Complex64, w: Complex64) -> Complex64 {
    nf.cs_matrix_element(zbar, w)
}

/// Acts with a word on `(a†)^m |0⟩`: `a†` raises the level, `a` multiplies
/// by the current level and lowers it. `None` when the state is annihilated.
pub fn act_word_on_number_state(word: &[Gen], m: u64) -> Option<(BigInt, u64)> {
    let mut coef = BigInt::one();
    let mut level = m;
    for g in word.iter().rev() {
        match g {
            Gen::Ad => level += 1,
            Gen::A => {
                if level == 0 {
                    return None;
                }
                coef *= BigInt::from(level);
                level -= 1;
            }
        }
    }
    Some((coef, level))
}

/// The string `(a†)^{r_M} a^{s_M} … (a†)^{r_1} a^{s_1}`; index 0 of `r` and
/// `s` is the rightmost block.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StringSpec {
    r: Vec<u32>,
    s: Vec<u32>,
}

impl StringSpec {
    pub fn new(r: Vec<u32>, s: Vec<u32>) -> Option<Self> {
        if r.is_empty() || r.len() != s.len() {
            return None;
        }
        Some(StringSpec { r, s })
    }

    /// Splits a word into `(a†)^r a^s` blocks. The empty word is the block `(0, 0)`.
    pub fn from_word(word: &[Gen]) -> Self {
        let mut blocks: Vec<(u32, u32)> = Vec::new();
        let mut prev: Option<Gen> = None;
        for &g in word {
            if blocks.is_empty() || (g == Gen::Ad && prev == Some(Gen::A)) {
                blocks.push((0, 0));
            }
            let b = blocks.last_mut().expect("pushed above");
            match g {
                Gen::Ad => b.0 += 1,
                Gen::A => b.1 += 1,
            }
            prev = Some(g);
        }
        if blocks.is_empty() {
            blocks.push((0, 0));
        }
        blocks.reverse();
        StringSpec { r: blocks.iter().map(|b| b.0).collect(), s: blocks.iter().map(|b| b.1).collect() }
    }

    pub fn r(&self) -> &[u32] {
        &self.r
    }

    pub fn s(&self) -> &[u32] {
        &self.s
    }

    pub fn blocks(&self) -> usize {
        self.r.len()
    }

    /// `d_m = Σ_{i≤m} (r_i - s_i)`, with `d_0 = 0`.
    pub fn partial_excess(&self, m: usize) -> i64 {
        (0..m).map(|i| self.r[i] as i64 - self.s[i] as i64).sum()
    }

    pub fn excess(&self) -> i64 {
        self.partial_excess(self.blocks())
    }

    pub fn to_word(&self) -> Vec<Gen> {
        let mut w = Vec::new();
        for m in (0..self.blocks()).rev() {
            w.extend(std::iter::repeat_n(Gen::Ad, self.r[m] as usize));
            w.extend(std::iter::repeat_n(Gen::A, self.s[m] as usize));
        }
        w
    }

    /// The conjugate string `(s̄, r̄)`.
    pub fn conjugate(&self) -> Self {
        StringSpec { r: self.s.iter().rev().copied().collect(), s: self.r.iter().rev().copied().collect() }
    }
}

impl fmt::Display for StringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{}/{}", join(&self.r), join(&self.s))
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    A,
    Ad,
    Num(BigInt),
    Slash,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, AlgebraError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().expect("in bounds");
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            'a' => {
                let rest = &text[i + 1..];
                if rest.starts_with('d') {
                    toks.push((Tok::Ad, start));
                    i += 2;
                } else if rest.starts_with('†') {
                    toks.push((Tok::Ad, start));
                    i += 1 + '†'.len_utf8();
                } else {
                    toks.push((Tok::A, start));
                    i += 1;
                }
            }
            '0'..='9' => {
                while i < text.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = text[start..i].parse().expect("digits");
                toks.push((Tok::Num(n), start));
            }
            '/' => {
                toks.push((Tok::Slash, start));
                i += 1;
            }
            '+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, start));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            other => {
                return Err(AlgebraError::Syntax { offset: start, message: format!("unexpected character {other:?}") });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

enum Item {
    Gens(Vec<Gen>),
    Expr(BosonExpr),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end)
    }

    fn err<T>(&self, message: &str) -> Result<T, AlgebraError> {
        Err(AlgebraError::Syntax { offset: self.offset(), message: message.to_string() })
    }

    fn expr(&mut self) -> Result<BosonExpr, AlgebraError> {
        let mut sign = 1;
        let mut leading_sign = false;
        match self.peek() {
            Some(Tok::Plus) => {
                self.pos += 1;
                leading_sign = true;
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                sign = -1;
                leading_sign = true;
            }
            _ => {}
        }
        let mut terms = Vec::new();
        let mut explicit = leading_sign;
        loop {
            let (c, had_coeff, e) = self.term()?;
            explicit |= had_coeff;
            terms.push((c * rat(sign), e));
            match self.peek() {
                Some(Tok::Plus) => sign = 1,
                Some(Tok::Minus) => sign = -1,
                _ => break,
            }
            self.pos += 1;
        }
        if terms.len() == 1 && !explicit {
            return Ok(terms.pop().expect("one term").1);
        }
        Ok(BosonExpr::sum(terms))
    }

    fn coefficient(&mut self) -> Result<Option<Rational>, AlgebraError> {
        let Some(Tok::Num(n)) = self.peek().cloned() else {
            return Ok(None);
        };
        self.pos += 1;
        if self.peek() == Some(&Tok::Slash) {
            self.pos += 1;
            let Some(Tok::Num(d)) = self.peek().cloned() else {
                return self.err("expected a denominator");
            };
            if d.is_zero() {
                return self.err("zero denominator");
            }
            self.pos += 1;
            return Ok(Some(Rational::new(n, d)));
        }
        Ok(Some(big_rat(n)))
    }

    fn exponent(&mut self) -> Result<Option<u32>, AlgebraError> {
        if self.peek() != Some(&Tok::Caret) {
            return Ok(None);
        }
        self.pos += 1;
        match self.peek().cloned() {
            Some(Tok::Minus) => Err(AlgebraError::NegativeExponent { offset: self.offset() }),
            Some(Tok::Num(n)) => {
                let v: u32 = n.try_into().map_err(|_| AlgebraError::Syntax {
                    offset: self.offset(),
                    message: "exponent too large".to_string(),
                })?;
                self.pos += 1;
                Ok(Some(v))
            }
            _ => self.err("expected a natural-number exponent"),
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Some(Tok::A) | Some(Tok::Ad) | Some(Tok::LParen))
    }

    fn term(&mut self) -> Result<(Rational, bool, BosonExpr), AlgebraError> {
        let coeff = self.coefficient()?;
        let mut items: Vec<Item> = Vec::new();
        loop {
            if self.peek() == Some(&Tok::Star) && (coeff.is_some() || !items.is_empty()) {
                let save = self.pos;
                self.pos += 1;
                if !self.starts_factor() {
                    self.pos = save;
                    return self.err("expected a factor after '*'");
                }
            }
            if !self.starts_factor() {
                break;
            }
            match self.peek().cloned() {
                Some(Tok::A) | Some(Tok::Ad) => {
                    let g = if self.peek() == Some(&Tok::A) { Gen::A } else { Gen::Ad };
                    self.pos += 1;
                    let n = self.exponent()?.unwrap_or(1);
                    let run = std::iter::repeat_n(g, n as usize);
                    match items.last_mut() {
                        Some(Item::Gens(gs)) => gs.extend(run),
                        _ => items.push(Item::Gens(run.collect())),
                    }
                }
                Some(Tok::LParen) => {
                    self.pos += 1;
                    let inner = self.expr()?;
                    if self.peek() != Some(&Tok::RParen) {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    let e = match self.exponent()? {
                        Some(n) => BosonExpr::power(inner, n),
                        None => inner,
                    };
                    items.push(Item::Expr(e));
                }
                _ => unreachable!("starts_factor checked"),
            }
        }
        if coeff.is_none() && items.is_empty() {
            return self.err("expected a term");
        }
        let had_coeff = coeff.is_some();
        let c = coeff.unwrap_or_else(Rational::one);
        let e = if items.iter().all(|i| matches!(i, Item::Gens(_))) {
            BosonExpr::Word(
                items
                    .into_iter()
                    .flat_map(|i| match i {
                        Item::Gens(g) => g,
                        Item::Expr(_) => unreachable!(),
                    })
                    .collect(),
            )
        } else {
            let mut fs: Vec<BosonExpr> = items
                .into_iter()
                .map(|i| match i {
                    Item::Gens(g) => BosonExpr::Word(g),
                    Item::Expr(e) => e,
                })
                .collect();
            if fs.len() == 1 {
                fs.pop().expect("one factor")
            } else {
                BosonExpr::Product(fs)
            }
        };
        Ok((c, had_coeff, e))
    }
}

/// Parses the expression syntax described in the module docs.
pub fn parse_expr(text: &str) -> Result<BosonExpr, AlgebraError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(AlgebraError::Syntax { offset: 0, message: "empty expression".to_string() });
    }
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected token");
    }
    Ok(e)
}
