//! File formats: observation CSV, coefficient tables, plot grids, and
//! atomic writes.

use crate::dynamics::{ObservationRecord, TimeGrid};
use crate::error::{Error, Result};
use crate::spectral::{Basis, Dim, Mode, Point, SpectralField};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Points per axis of the plot grid.
pub const PLOT_POINTS: usize = 101;

/// Scientific notation with 17 significant digits, so every value parses
/// back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_f64(s: &str, line: u64) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: `{s}` is not a number")))
}

/// CSV with header `t,z_1,…,z_p`, one row per time node.
pub fn observations_csv(record: &ObservationRecord) -> Result<Vec<u8>> {
    let p = record.channels.len();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=p).map(|i| format!("z_{i}")))
        .collect();
    let rows = record.grid.nodes().iter().enumerate().map(|(k, t)| {
        std::iter::once(fmt_f64(*t))
            .chain(record.channels.iter().map(|c| fmt_f64(c[k])))
            .collect()
    });
    csv_bytes(&header, rows)
}

/// Reads an observation CSV. Cell weights are rebuilt from the nodes, so
/// the horizon must be given.
pub fn read_observations(text: &str, horizon: f64) -> Result<ObservationRecord> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(Error::Parse(
            "observation header must read `t,z_1,...,z_p`".into(),
        ));
    }
    for (i, h) in header.iter().enumerate().skip(1) {
        if h != format!("z_{i}") {
            return Err(Error::Parse(format!(
                "unexpected column `{h}`, expected `z_{i}`"
            )));
        }
    }
    let p = header.len() - 1;
    let mut nodes = Vec::new();
    let mut channels = vec![Vec::new(); p];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |pos| pos.line());
        if rec.len() != p + 1 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields",
                p + 1
            )));
        }
        nodes.push(parse_f64(&rec[0], line)?);
        for (c, cell) in channels.iter_mut().zip(rec.iter().skip(1)) {
            c.push(parse_f64(cell, line)?);
        }
    }
    let grid = TimeGrid::from_nodes(horizon, nodes)?;
    ObservationRecord::new(grid, channels, None)
}

/// Coefficient table with header `mode,value`; modes are written as
/// `m` or `m:n`.
pub fn coefficients_csv(field: &SpectralField) -> Result<Vec<u8>> {
    let header = vec!["mode".to_string(), "value".to_string()];
    let rows = field
        .basis()
        .modes()
        .iter()
        .zip(field.coeffs())
        .map(|(m, c)| {
            let label = match m {
                Mode::Line(j) => j.to_string(),
                Mode::Square(a, b) => format!("{a}:{b}"),
            };
            vec![label, fmt_f64(*c)]
        });
    csv_bytes(&header, rows)
}

pub fn read_coefficients(text: &str, basis: Arc<Basis>) -> Result<SpectralField> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let label = rec.get(0).unwrap_or("");
        let idx: std::result::Result<Vec<u32>, _> =
            label.split(':').map(|s| s.trim().parse()).collect();
        let idx = idx.map_err(|_| Error::Parse(format!("line {line}: bad mode `{label}`")))?;
        let mode = Mode::try_from(idx).map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let value = parse_f64(rec.get(1).unwrap_or(""), line)?;
        entries.push((mode, value));
    }
    SpectralField::from_modes(basis, &entries)
}

/// Uniform plot grid over the closed domain, `x1` varying slowest. In
/// one dimension `x2` is 0.
pub fn plot_points(dim: Dim) -> Vec<Point> {
    let step = 1.0 / (PLOT_POINTS - 1) as f64;
    match dim {
        Dim::One => (0..PLOT_POINTS).map(|i| [i as f64 * step, 0.0]).collect(),
        Dim::Two => (0..PLOT_POINTS)
            .flat_map(|i| (0..PLOT_POINTS).map(move |j| [i as f64 * step, j as f64 * step]))
            .collect(),
    }
}

/// `x1,x2,v` on the plot grid.
pub fn scalar_grid_csv(dim: Dim, f: impl Fn(Point) -> f64) -> Result<Vec<u8>> {
    let header = ["x1", "x2", "v"].map(String::from).to_vec();
    let rows = plot_points(dim)
        .into_iter()
        .map(|x| vec![fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(f(x))]);
    csv_bytes(&header, rows)
}

/// `x1,x2,g1,g2` on the plot grid.
pub fn vector_grid_csv(dim: Dim, g: impl Fn(Point) -> Point) -> Result<Vec<u8>> {
    let header = ["x1", "x2", "g1", "g2"].map(String::from).to_vec();
    let rows = plot_points(dim).into_iter().map(|x| {
        let v = g(x);
        vec![fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(v[0]), fmt_f64(v[1])]
    });
    csv_bytes(&header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_basis;

    #[test]
    fn formatting_keeps_every_bit() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn observations_round_trip() {
        let grid = TimeGrid::uniform(2.0, 5).unwrap();
        let channels = vec![vec![0.1, -0.2, 1.0 / 7.0, 3e-17, 5.0], vec![1.0; 5]];
        let rec = ObservationRecord::new(grid, channels, None).unwrap();
        let bytes = observations_csv(&rec).unwrap();
        let back = read_observations(std::str::from_utf8(&bytes).unwrap(), 2.0).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = read_observations("t,y_1\n0.5,1\n", 1.0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn coefficients_round_trip() {
        let basis = Arc::new(build_basis(Dim::Two, 3).unwrap());
        let coeffs: Vec<f64> = (0..basis.len()).map(|k| (k as f64).sin()).collect();
        let f = SpectralField::from_coeffs(basis.clone(), coeffs).unwrap();
        let bytes = coefficients_csv(&f).unwrap();
        let back = read_coefficients(std::str::from_utf8(&bytes).unwrap(), basis).unwrap();
        assert_eq!(back.coeffs(), f.coeffs());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(
            std::fs::read_dir(path.parent().unwrap()).unwrap().count(),
            1
        );
    }
}
