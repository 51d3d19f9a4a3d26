//! Family names accepted by `triangle` and `egf`.
//!
//! `classic`, `rs:<r>:<s>`, `homog:<d>:<k>=<α>,…`, `string:<r…>/<s…>`
//! (index 0 is the rightmost block), `word:<expression>` for a single word,
//! and `deformed:<box>` with box `general`, `canonical`, `so3` or `so21`.

use std::collections::BTreeMap;
use std::io::Write;

use bosonkit::algebra::{parse_expr, BosonExpr, Limits, StringSpec};
use bosonkit::deformed::{deformed_stirling, specialize_box, BoxFunction, BoxPolynomial};
use bosonkit::poly::Polynomial;
use bosonkit::series::{FormalPowerSeries, Rational};
use bosonkit::stirling::{
    classic_table, homog_stirling, iterate_string, negative_excess, rs_table, HomogSpec, Method, NegativeInput,
    StirlingTable,
};

use crate::commands::parse_rational;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Spec {
    Classic,
    Rs { r: u32, s: u32 },
    Homog(HomogSpec),
    String(StringSpec),
    Deformed(DeformedBox),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DeformedBox {
    /// Polynomials in `[N], [N-1], …`.
    General,
    Named(BoxFunction),
}

fn bad(text: &str, why: &str) -> CliError {
    CliError::Usage(format!("bad family `{text}`: {why}"))
}

fn parse_u32_list(text: &str, whole: &str) -> Result<Vec<u32>, CliError> {
    text.split(',').map(|t| t.trim().parse::<u32>().map_err(|_| bad(whole, "expected nonnegative integers"))).collect()
}

impl Spec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        let (head, rest) = text.split_once(':').unwrap_or((text, ""));
        match head {
            "classic" if rest.is_empty() => Ok(Spec::Classic),
            "rs" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [r, s] = parts[..] else { return Err(bad(text, "expected rs:<r>:<s>")) };
                let r = r.parse().map_err(|_| bad(text, "r must be a positive integer"))?;
                let s = s.parse().map_err(|_| bad(text, "s must be a positive integer"))?;
                if r == 0 || s == 0 {
                    return Err(bad(text, "r and s must be at least 1"));
                }
                Ok(Spec::Rs { r, s })
            }
            "homog" => {
                let (d, coeffs) = rest.split_once(':').ok_or_else(|| bad(text, "expected homog:<d>:<k>=<α>,…"))?;
                let d: i64 = d.parse().map_err(|_| bad(text, "d must be an integer"))?;
                let mut alpha = BTreeMap::new();
                for item in coeffs.split(',') {
                    let (k, c) = item.split_once('=').ok_or_else(|| bad(text, "coefficients are written k=α"))?;
                    let k: u32 = k.trim().parse().map_err(|_| bad(text, "k must be a nonnegative integer"))?;
                    alpha.insert(k, parse_rational(c)?);
                }
                HomogSpec::new(d, alpha).map(Spec::Homog).map_err(|e| bad(text, &e.to_string()))
            }
            "string" => {
                let (r, s) = rest.split_once('/').ok_or_else(|| bad(text, "expected string:<r…>/<s…>"))?;
                let spec = StringSpec::new(parse_u32_list(r, text)?, parse_u32_list(s, text)?)
                    .ok_or_else(|| bad(text, "r and s lists must have the same nonzero length"))?;
                Ok(Spec::String(spec))
            }
            "word" => {
                let e = parse_expr(rest)?;
                let words = e.flatten(&Limits::default())?;
                match words.iter().next() {
                    Some((w, c)) if words.len() == 1 && c == &Rational::from_integer(1.into()) && !w.is_empty() => {
                        Ok(Spec::String(StringSpec::from_word(w)))
                    }
                    _ => Err(bad(text, "a word family needs a single nonempty word")),
                }
            }
            "deformed" => match rest {
                "general" => Ok(Spec::Deformed(DeformedBox::General)),
                name => Ok(Spec::Deformed(DeformedBox::Named(BoxFunction::parse(name)?))),
            },
            _ => Err(bad(text, "unknown family")),
        }
    }

    /// Rows `0..=nmax` for every family except `deformed`.
    pub fn table(&self, nmax: usize) -> Result<StirlingTable, CliError> {
        Ok(match self {
            Spec::Classic => classic_table(nmax),
            Spec::Rs { r, s } => rs_table(*r, *s, nmax, Method::Recurrence)?,
            Spec::Homog(h) if h.d() >= 0 => homog_stirling(h, nmax, Method::Recurrence)?,
            Spec::Homog(h) => negative_excess(&NegativeInput::Homog(h.clone()), nmax)?,
            Spec::String(s) if s.excess() >= 0 => iterate_string(s, nmax)?,
            Spec::String(s) => negative_excess(&NegativeInput::String(s.clone()), nmax)?,
            Spec::Deformed(_) => return Err(CliError::Usage("deformed families have polynomial entries".into())),
        })
    }

    /// The operator whose powers the table describes, when there is one.
    pub fn operator(&self) -> Option<BosonExpr> {
        match self {
            Spec::Classic => parse_expr("ad a").ok(),
            Spec::Rs { r, s } => parse_expr(&format!("ad^{r} a^{s}")).ok(),
            Spec::Homog(h) => Some(h.to_expr()),
            Spec::String(s) => Some(BosonExpr::word(&s.to_word())),
            Spec::Deformed(_) => None,
        }
    }
}

/// `(n, k, value)` rows and `(n, bell)` rows, both for `n = 1..=nmax`.
pub type TriangleText = (Vec<(usize, usize, String)>, Vec<(usize, String)>);

pub fn triangle_text(spec: &Spec, nmax: usize) -> Result<TriangleText, CliError> {
    let mut rows = Vec::new();
    let mut bells = Vec::new();
    match spec {
        Spec::Deformed(DeformedBox::General) => {
            for n in 1..=nmax {
                let mut sum = BoxPolynomial::zero();
                for k in 1..=n {
                    let p = deformed_stirling(n, k);
                    rows.push((n, k, p.to_string()));
                    sum = sum.add(&p);
                }
                bells.push((n, sum.to_string()));
            }
        }
        Spec::Deformed(DeformedBox::Named(bx)) => {
            for n in 1..=nmax {
                let mut sum = Polynomial::zero();
                for k in 1..=n {
                    let p = specialize_box(bx, n, k)?;
                    rows.push((n, k, p.render("N")));
                    sum = sum.add(&p);
                }
                bells.push((n, sum.render("N")));
            }
        }
        _ => {
            let t = spec.table(nmax)?;
            rows = t.triangle_rows().into_iter().map(|(n, k, v)| (n, k, v.to_string())).collect();
            bells = (1..=nmax).map(|n| (n, t.bell(n).to_string())).collect();
        }
    }
    Ok((rows, bells))
}

/// The triangle CSV `family,n,k,value`, a blank line, then `family,n,bell`.
pub fn write_triangle(spec: &Spec, nmax: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let label = label(spec);
    let (rows, bells) = triangle_text(spec, nmax)?;
    {
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record(["family", "n", "k", "value"])?;
        for (n, k, v) in rows {
            w.write_record([label.as_str(), &n.to_string(), &k.to_string(), &v])?;
        }
        w.flush()?;
    }
    writeln!(out)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["family", "n", "bell"])?;
    for (n, b) in bells {
        w.write_record([label.as_str(), &n.to_string(), &b])?;
    }
    w.flush()?;
    Ok(())
}

/// Canonical family label.
pub fn label(spec: &Spec) -> String {
    match spec {
        Spec::Classic => "classic".into(),
        Spec::Rs { r, s } => format!("rs:{r}:{s}"),
        Spec::Homog(h) => h.label(),
        Spec::String(s) => format!("string:{s}"),
        Spec::Deformed(DeformedBox::General) => "deformed:general".into(),
        Spec::Deformed(DeformedBox::Named(bx)) => format!(
            "deformed:{}",
            match bx {
                BoxFunction::Canonical => "canonical",
                BoxFunction::So3 => "so3",
                BoxFunction::So21 => "so21",
                _ => "custom",
            }
        ),
    }
}

/// EGF `Σ_n B(n,x) λ^n/n!` through `order`.
pub fn egf(spec: &Spec, order: usize, x: &Rational) -> Result<FormalPowerSeries, CliError> {
    let t = spec.table(order)?;
    Ok(FormalPowerSeries::from_slots((0..=order).map(|n| t.bell_poly(n, x)).collect()))
}

pub fn write_egf(spec: &Spec, order: usize, x: &Rational, out: &mut dyn Write) -> Result<(), CliError> {
    let series = egf(spec, order, x)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "numerator", "denominator"])?;
    for (n, num, den) in series.csv_rows() {
        w.write_record([n.to_string(), num.to_string(), den.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_families() {
        assert_eq!(Spec::parse("classic").unwrap(), Spec::Classic);
        assert_eq!(Spec::parse("rs:3:2").unwrap(), Spec::Rs { r: 3, s: 2 });
        assert!(matches!(Spec::parse("rs:0:2"), Err(CliError::Usage(_))));
        assert!(matches!(Spec::parse("rs:2"), Err(CliError::Usage(_))));
        let h = Spec::parse("homog:1:0=1,1=2").unwrap();
        assert_eq!(h, Spec::Homog(HomogSpec::from_ints(1, &[(0, 1), (1, 2)]).unwrap()));
        assert_eq!(Spec::parse("word:ad a ad").unwrap(), Spec::parse("string:1,1/0,1").unwrap());
        assert!(Spec::parse("word:ad + a").is_err());
        assert_eq!(Spec::parse("deformed:so3").unwrap(), Spec::Deformed(DeformedBox::Named(BoxFunction::So3)));
        assert!(Spec::parse("deformed:su2").is_err());
        assert!(Spec::parse("pascal").is_err());
    }

    #[test]
    fn labels_round_trip() {
        for text in ["classic", "rs:2:1", "homog:1:0=1,1=2", "string:1,2/1,1", "deformed:general", "deformed:so21"] {
            assert_eq!(label(&Spec::parse(text).unwrap()), text);
        }
    }

    #[test]
    fn operators_match_tables() {
        let l = Limits::default();
        for text in ["classic", "rs:2:1", "rs:1:2", "homog:-1:1=1,2=-3", "string:1,2/2,0"] {
            let spec = Spec::parse(text).unwrap();
            let t = spec.table(4).unwrap();
            let h = spec.operator().unwrap();
            for n in 1..=4 {
                let wick = bosonkit::algebra::normal_order_wick(&BosonExpr::power(h.clone(), n as u32), &l).unwrap();
                assert_eq!(t.normal_form(n), wick, "{text} n={n}");
            }
        }
    }

    #[test]
    fn classic_egf_slots_are_bell_numbers() {
        let s = egf(&Spec::Classic, 6, &Rational::from_integer(1.into())).unwrap();
        let b: Vec<String> = s.slots().iter().map(|c| c.to_string()).collect();
        assert_eq!(b, ["1", "1", "2", "5", "15", "52", "203"]);
    }
}
