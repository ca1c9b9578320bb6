//! Atomic report writers and CSV layouts.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use eqvi::gamma::GammaMode;
use eqvi::{Field, Grid};
use serde::Serialize;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Fixed-width float formatting shared by every CSV.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn rows_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
}

/// `t,x,value` rows of a state field.
pub fn state_csv(grid: &Grid, x: &Field) -> Result<Vec<u8>> {
    let rows = (0..grid.nt)
        .flat_map(|n| (0..grid.nodes()).map(move |i| (n, i)))
        .map(|(n, i)| vec![fmt_f64(grid.t(n)), fmt_f64(grid.x(i)), fmt_f64(x.get(n, i))]);
    rows_csv(&["t", "x", "value"], rows)
}

/// `t,x,value` rows of a feedback field, restricted to the observed points.
pub fn feedback_csv(grid: &Grid, mode: &GammaMode, xi: &Field) -> Result<Vec<u8>> {
    let cols: Vec<(usize, f64)> = match mode {
        GammaMode::BoundaryTrace => vec![(0, grid.a), (1, grid.b)],
        GammaMode::Restriction { nodes } => nodes.iter().map(|&i| (i, grid.x(i))).collect(),
    };
    let rows = (0..grid.nt)
        .flat_map(|n| cols.iter().map(move |&(j, x)| (n, j, x)))
        .map(|(n, j, x)| vec![fmt_f64(grid.t(n)), fmt_f64(x), fmt_f64(xi.get(n, j))]);
    rows_csv(&["t", "x", "value"], rows)
}

/// Generic CSV from a header and preformatted rows.
pub fn table_csv(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    rows_csv(&h, rows.iter().cloned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqvi::BoundaryMode;

    #[test]
    fn state_csv_layout() {
        let g = Grid::new(1, 2, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        let x = Field::from_vec(2, 1, vec![0.25, -1.0]).unwrap();
        let s = String::from_utf8(state_csv(&g, &x).unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,x,value");
        assert_eq!(
            lines[1],
            "5.0000000000000000e-1,5.0000000000000000e-1,2.5000000000000000e-1"
        );
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn infinite_costs_print_as_words() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
