//! The `sheffer`, `deformed` and `coherent` subcommands.

use std::io::Write;

use num_complex::Complex64;
use num_traits::Zero;

use bosonkit::coherent::{
    bell_r1, mandel_q, metric_factor, moment_quadrature, quadratures, snr_sigma, squeezing_params, BellMode,
    BellValue, RhoSequence,
};
use bosonkit::deformed::{deformed_explicit, deformed_stirling, specialize_box, BoxFunction};
use bosonkit::series::{FormalPowerSeries, Rational};
use bosonkit::sheffer::{ab_from_qv, catalog, coherent_sequence, parse_slots, sheffer_sequence, CatalogName, QVPair};

use crate::{Cli, CliError, CoherentArgs, CoherentQuantity, ShefferAction};

pub fn parse_rational(text: &str) -> Result<Rational, CliError> {
    text.trim().parse::<Rational>().map_err(|_| CliError::Usage(format!("`{text}` is not a rational number")))
}

fn slots(f: &FormalPowerSeries) -> String {
    f.slots().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

pub fn sheffer(action: &ShefferAction, cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match action {
        ShefferAction::Catalog { name } => {
            let entry = catalog(CatalogName::parse(name)?, cli.order)?;
            let (a, b) = entry.pair.transfer()?;
            writeln!(out, "name: {}", entry.name)?;
            writeln!(out, "A: {}", slots(&a))?;
            writeln!(out, "B: {}", slots(&b))?;
            writeln!(out, "lowering: {}", entry.ladder.render_lowering(4))?;
            writeln!(out, "raising: {}", entry.ladder.render_raising(4))?;
            for n in 0..=cli.order.min(8) {
                writeln!(out, "s_{n}: {}", sheffer_sequence(&entry.pair, n)?.render("x"))?;
            }
        }
        ShefferAction::Flow { q, v, center, z } => {
            let (q, v) = (parse_slots(q)?, parse_slots(v)?);
            let center = parse_rational(center)?;
            // slot lists are finite, so the padding below is exact
            let qv = if center.is_zero() {
                QVPair::polynomial(&q.ogf_coeffs(), &v.ogf_coeffs())
            } else {
                let pad = |f: &FormalPowerSeries| FormalPowerSeries::polynomial(f.slots(), cli.order + 1);
                QVPair::centered(pad(&q), pad(&v), center)
            };
            let (a, b) = ab_from_qv(&qv, cli.order)?;
            writeln!(out, "A: {}", slots(&a))?;
            writeln!(out, "B: {}", slots(&b))?;
            let seq = coherent_sequence(&qv, &parse_rational(z)?, cli.order)?;
            writeln!(out, "sequence: {}", seq.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))?;
        }
    }
    Ok(())
}

pub fn deformed(name: &str, nmax: usize, at: Option<i64>, out: &mut dyn Write) -> Result<(), CliError> {
    let bx = if name == "general" { None } else { Some(BoxFunction::parse(name)?) };
    for n in 1..=nmax {
        for k in 1..=n {
            let text = match (&bx, at) {
                (None, None) => deformed_stirling(n, k).to_string(),
                (None, Some(_)) => return Err(CliError::Usage("--at needs a named box".into())),
                (Some(b), None) => specialize_box(b, n, k)?.render("N"),
                (Some(b), Some(big_n)) => deformed_explicit(n, k, b, big_n)?.to_string(),
            };
            writeln!(out, "S({n},{k}) = {text}")?;
        }
    }
    Ok(())
}

fn rho(args: &CoherentArgs) -> Result<RhoSequence, CliError> {
    Ok(RhoSequence::bell_default(args.r, args.p)?)
}

pub fn coherent(quantity: &CoherentQuantity, cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let f = |v: f64| format!("{v:.12e}");
    match quantity {
        CoherentQuantity::Mandel(a) => writeln!(out, "Q = {}", f(mandel_q(&rho(a)?, a.x)?))?,
        CoherentQuantity::Metric(a) => writeln!(out, "omega = {}", f(metric_factor(&rho(a)?, a.x)?))?,
        CoherentQuantity::Squeeze(a) => {
            let r = rho(a)?;
            let z = Complex64::new(a.x, 0.0);
            let q = quadratures(&r, z)?;
            let (sq, sp) = squeezing_params(&r, z)?;
            writeln!(out, "var_Q = {}", f(q.var_q))?;
            writeln!(out, "var_P = {}", f(q.var_p))?;
            writeln!(out, "SQ = {}", f(sq))?;
            writeln!(out, "SP = {}", f(sp))?;
        }
        CoherentQuantity::Snr(a) => {
            let (sigma, sigma_bar) = snr_sigma(&rho(a)?, a.x)?;
            writeln!(out, "sigma = {}", f(sigma))?;
            writeln!(out, "sigma_bar = {}", f(sigma_bar))?;
        }
        CoherentQuantity::Bell { r, n } => {
            if let BellValue::Exact(b) = bell_r1(*r, *n, BellMode::Exact)? {
                writeln!(out, "exact = {b}")?;
            }
            let approx = bell_r1(*r, *n, BellMode::Dobinski { terms: cli.terms })?.as_f64();
            writeln!(out, "dobinski({}) = {}", cli.terms, f(approx))?;
        }
        CoherentQuantity::Moment { r, n } => {
            let m = moment_quadrature(*r, *n)?;
            writeln!(out, "moment = {}", f(m.value))?;
            writeln!(out, "exact = {}", f(m.exact))?;
            writeln!(out, "rel_err = {:.3e}", m.rel_err)?;
        }
    }
    Ok(())
}
