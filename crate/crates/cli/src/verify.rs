//! Invariant suites behind `verify`.
//!
//! Each check prints `ok <name>` or `FAIL <name>: <detail>`; the last line is
//! `summary: passed=<p> failed=<f>`.

use std::io::Write;

use rayon::prelude::*;

use bosonkit::algebra::{normal_order_wick, normal_order_word, parse_expr, BosonExpr, Gen, Limits, RewriteStrategy};
use bosonkit::coherent::moment_quadrature;
use bosonkit::series::{rat, FormalPowerSeries};
use bosonkit::sheffer::{
    catalog, direct_exponential, flow_group_law_check, monomiality_failure, solve_flow, solve_flow_lie, substitute_series,
    CatalogName, QVPair,
};
use bosonkit::stirling::{classic_table, normal_order_stirling, rs_table, stirling2, word_normal_form, Method};

use crate::CliError;

pub const SUITES: [&str; 3] = ["oracle", "sheffer", "moments"];

#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<(String, Result<(), String>)>,
}

impl Report {
    fn push(&mut self, name: impl Into<String>, result: Result<(), String>) {
        self.checks.push((name.into(), result));
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|(_, r)| r.is_err()).count()
    }

    pub fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (name, r) in &self.checks {
            match r {
                Ok(()) => writeln!(out, "ok {name}")?,
                Err(why) => writeln!(out, "FAIL {name}: {why}")?,
            }
        }
        writeln!(out, "summary: passed={} failed={}", self.checks.len() - self.failed(), self.failed())
    }
}

pub fn run_suite(suite: &str, parallel: bool) -> Result<Report, CliError> {
    let mut report = Report::default();
    match suite {
        "oracle" => oracle(&mut report, parallel),
        "sheffer" => sheffer(&mut report),
        "moments" => moments(&mut report),
        "all" => {
            oracle(&mut report, parallel);
            sheffer(&mut report);
            moments(&mut report);
        }
        _ => return Err(CliError::Usage(format!("unknown suite `{suite}`; expected all, {}", SUITES.join(", ")))),
    }
    Ok(report)
}

/// All `2^len` words over `{a, a†}` of the given length.
pub fn words(len: usize) -> Vec<Vec<Gen>> {
    (0..1u32 << len).map(|bits| (0..len).map(|i| if bits >> i & 1 == 1 { Gen::Ad } else { Gen::A }).collect()).collect()
}

fn word_check(w: &[Gen], limits: &Limits) -> Result<(), String> {
    let left = normal_order_word(w, RewriteStrategy::Leftmost, limits).map_err(|e| e.to_string())?;
    let right = normal_order_word(w, RewriteStrategy::Rightmost, limits).map_err(|e| e.to_string())?;
    let comb = word_normal_form(w).map_err(|e| e.to_string())?;
    if left != right {
        return Err(format!("{}: rewrite order matters ({left} vs {right})", BosonExpr::word(w)));
    }
    if left != comb {
        return Err(format!("{}: wick {left}, string coefficients {comb}", BosonExpr::word(w)));
    }
    Ok(())
}

/// Operators whose powers are checked against the combinatorial engine.
pub const POWER_BASES: [&str; 4] = ["ad a", "ad^2 a", "ad^2 a^2", "ad a + ad"];

fn oracle(report: &mut Report, parallel: bool) {
    let limits = Limits::default();
    for len in 0..=8 {
        let ws = words(len);
        let results: Vec<Result<(), String>> =
            if parallel { ws.par_iter().map(|w| word_check(w, &limits)).collect() } else { ws.iter().map(|w| word_check(w, &limits)).collect() };
        let first = results.into_iter().find(|r| r.is_err()).unwrap_or(Ok(()));
        report.push(format!("oracle/words-length-{len}"), first);
    }
    for base in POWER_BASES {
        let h = parse_expr(base).expect("fixed expression");
        for n in 1..=4 {
            let e = BosonExpr::power(h.clone(), n);
            let r = match (normal_order_wick(&e, &limits), normal_order_stirling(&e, &limits)) {
                (Ok(w), Ok(s)) if w == s => Ok(()),
                (Ok(w), Ok(s)) => Err(format!("wick {w}, stirling {s}")),
                (Err(e), _) => Err(e.to_string()),
                (_, Err(e)) => Err(e.to_string()),
            };
            report.push(format!("oracle/power ({base})^{n}"), r);
        }
    }
    let classic = classic_table(8);
    let agree = (0..=8).all(|n| (0..=n).all(|k| classic.int_entry(n, k) == Some(stirling2(n, k, Method::Explicit))));
    report.push("oracle/classic recurrence = explicit", if agree { Ok(()) } else { Err("S(n,k) differ".into()) });
    for (r, s) in [(2, 1), (3, 1), (2, 2), (3, 2), (3, 3), (1, 2)] {
        let res = match (rs_table(r, s, 6, Method::Recurrence), rs_table(r, s, 6, Method::Explicit)) {
            (Ok(a), Ok(b)) if a == b => Ok(()),
            (Ok(_), Ok(_)) => Err("tables differ".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        };
        report.push(format!("oracle/rs:{r}:{s} recurrence = explicit"), res);
    }
}

fn sheffer(report: &mut Report) {
    for name in CatalogName::ALL {
        let res = catalog(name, 8).map_err(|e| e.to_string()).and_then(|entry| {
            if let Some(why) = monomiality_failure(&entry.pair, &entry.ladder, 6).map_err(|e| e.to_string())? {
                return Err(why);
            }
            let egf = entry.pair.egf().map_err(|e| e.to_string())?;
            if egf != entry.expected_egf().map_err(|e| e.to_string())? {
                return Err("EGF differs from A(λ) exp(x B(λ))".into());
            }
            Ok(())
        });
        report.push(format!("sheffer/catalog {name}"), res);
    }
    let qs: [&[i64]; 3] = [&[1], &[0, 1], &[0, 0, 1]];
    let vs: [&[i64]; 3] = [&[], &[0, 1], &[0, 0, 1]];
    for q in qs {
        for v in vs {
            let qv = QVPair::from_ints(q, v);
            let res = match flow_group_law_check(&qv, 6, 6) {
                Ok(Ok(())) => Ok(()),
                Ok(Err(violation)) => Err(violation.to_string()),
                Err(e) => Err(e.to_string()),
            };
            report.push(format!("sheffer/group law q={q:?} v={v:?}"), res);
            let lie = match (solve_flow(&qv, 6, 6), solve_flow_lie(&qv, 6, 6)) {
                (Ok(a), Ok(b)) if a == b => Ok(()),
                (Ok(_), Ok(_)) => Err("flow differs from Lie series".into()),
                (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
            };
            report.push(format!("sheffer/flow = Lie series q={q:?} v={v:?}"), lie);
            let subst = (0..=6).try_for_each(|m| {
                let slots: Vec<_> = (0..=m).map(|j| rat((j == m) as i64)).collect();
                let f = FormalPowerSeries::polynomial(&slots, 12);
                let a = substitute_series(&qv, &f, 6, 6).map_err(|e| e.to_string())?;
                let b = direct_exponential(&qv, &f, 6, 6).map_err(|e| e.to_string())?;
                if a == b {
                    Ok(())
                } else {
                    Err(format!("differs on x^{m}"))
                }
            });
            report.push(format!("sheffer/substitution q={q:?} v={v:?}"), subst);
        }
    }
}

/// Relative tolerance of the moment suite.
pub const MOMENT_TOL: f64 = 1e-6;

fn moments(report: &mut Report) {
    for r in 1..=4 {
        for n in 0..=6 {
            let res = match moment_quadrature(r, n) {
                Ok(m) if m.rel_err < MOMENT_TOL => Ok(()),
                Ok(m) => Err(format!("rel. err {:.3e} (value {}, exact {})", m.rel_err, m.value, m.exact)),
                Err(e) => Err(e.to_string()),
            };
            report.push(format!("moments/r={r} n={n}"), res);
        }
    }
}
