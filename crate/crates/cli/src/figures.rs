//! Figure CSVs, one file `fig_<kind>.csv` per kind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use bosonkit::coherent::{CoherentError, FigureKind, RhoSequence};

use crate::CliError;

fn kinds(which: &str) -> Result<Vec<FigureKind>, CliError> {
    if which == "all" {
        return Ok(FigureKind::ALL.to_vec());
    }
    FigureKind::parse(which).map(|k| vec![k]).ok_or_else(|| {
        let names: Vec<&str> = FigureKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("unknown figure `{which}`; expected all or one of {}", names.join(", ")))
    })
}

/// Rows of one figure in grid order.
pub fn figure_rows(kind: FigureKind, parallel: bool) -> Result<Vec<Vec<String>>, CliError> {
    let grid = kind.grid();
    let mut rhos: BTreeMap<u32, RhoSequence> = BTreeMap::new();
    for &(r, _) in &grid {
        if let std::collections::btree_map::Entry::Vacant(e) = rhos.entry(r) {
            e.insert(kind.rho(r)?);
        }
    }
    let row = |&(r, t): &(u32, f64)| kind.row_with(&rhos[&r], r, t);
    let rows: Result<Vec<_>, CoherentError> =
        if parallel { grid.par_iter().map(row).collect() } else { grid.iter().map(row).collect() };
    Ok(rows?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Writes the requested figures and returns the paths written.
pub fn write_figures(which: &str, out_dir: &Path, parallel: bool) -> Result<Vec<PathBuf>, CliError> {
    let kinds = kinds(which)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for kind in kinds {
        let rows = figure_rows(kind, parallel)?;
        let path = out_dir.join(format!("fig_{}.csv", kind.name()));
        let to_io = |e: csv::Error| CliError::Io { path: path.clone(), source: std::io::Error::other(e) };
        let mut w = csv::Writer::from_path(&path).map_err(to_io)?;
        w.write_record(kind.header()).map_err(to_io)?;
        for r in rows {
            w.write_record(&r).map_err(to_io)?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
