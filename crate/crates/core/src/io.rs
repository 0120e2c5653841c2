//! CSV and JSON emission. Numbers are written as `{:.10e}` so files are byte-stable.

use std::fs::{self, File, OpenOptions};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::envelope::{Envelope, EnvelopeKind, SpinWave};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

pub const STAGE_HEADER: [&str; 7] = [
    "t",
    "re_e_in",
    "im_e_in",
    "re_e_out",
    "im_e_out",
    "omega",
    "omega_phase",
];
pub const SPIN_HEADER: [&str; 3] = ["z", "re_s", "im_s"];

pub fn fmt(x: f64) -> String {
    format!("{x:.10e}")
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// One stage as a time series: boundary input, output at `z = 1`, and the control as magnitude and phase.
///
/// `input` may be `None` (zero columns); all envelopes must share the control's grid.
pub fn write_stage_csv(path: &Path, control: &Envelope, input: Option<&Envelope>, output: &Envelope) -> Result<()> {
    let grid = control.grid();
    for e in input.into_iter().chain(Some(output)) {
        if !e.grid().matches(grid) {
            return Err(Error::invalid("stage CSV columns must share one time grid"));
        }
    }
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STAGE_HEADER)?;
    let zero = Complex64::new(0.0, 0.0);
    for (i, t) in grid.times().enumerate() {
        let ein = input.map_or(zero, |e| e.samples()[i]);
        let eout = output.samples()[i];
        let om = control.samples()[i];
        let phase = if om.norm() > 0.0 { om.arg() } else { 0.0 };
        w.write_record([
            fmt(t),
            fmt(ein.re),
            fmt(ein.im),
            fmt(eout.re),
            fmt(eout.im),
            fmt(om.norm()),
            fmt(phase),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spin_csv(path: &Path, spin: &SpinWave) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SPIN_HEADER)?;
    for (z, s) in spin.grid().points().zip(spin.samples()) {
        w.write_record([fmt(z), fmt(s.re), fmt(s.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any table of floats under the given header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid("table row length differs from header"));
        }
        w.write_record(r.iter().map(|&x| fmt(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Appends string rows to a CSV, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, header: &[&str], rows: &[Vec<String>], overwrite: bool) -> Result<()> {
    ensure_parent(path)?;
    let fresh = overwrite || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = if overwrite {
        File::create(path)?
    } else {
        OpenOptions::new().create(true).append(true).open(path)?
    };
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads `(t, re, im)` rows and resamples them (linearly, zero outside) onto `grid`.
pub fn read_envelope_csv(path: &Path, grid: &TimeGrid, kind: EnvelopeKind) -> Result<Envelope> {
    let mut r = csv::Reader::from_path(path)?;
    let mut pts: Vec<(f64, Complex64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("0")
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number in column {k}: {e}", path.display())))
        };
        pts.push((
            num(0)?,
            Complex64::new(num(1)?, if rec.len() > 2 { num(2)? } else { 0.0 }),
        ));
    }
    if pts.len() < 2 {
        return Err(Error::Config(format!("{}: need at least two samples", path.display())));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Config(format!(
            "{}: times must be strictly increasing",
            path.display()
        )));
    }
    Envelope::from_fn(*grid, kind, |t| {
        if t < pts[0].0 || t > pts[pts.len() - 1].0 {
            return Complex64::new(0.0, 0.0);
        }
        let j = pts.partition_point(|p| p.0 <= t).clamp(1, pts.len() - 1);
        let ((t0, a), (t1, b)) = (pts[j - 1], pts[j]);
        let f = (t - t0) / (t1 - t0);
        a * (1.0 - f) + b * f
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceGrid;

    #[test]
    fn stage_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let c = Envelope::constant(g, Complex64::new(0.0, 2.0), EnvelopeKind::Control);
        let o = Envelope::constant(g, Complex64::new(1.0, -1.0), EnvelopeKind::Signal);
        let p = dir.path().join("a/stage.csv");
        write_stage_csv(&p, &c, None, &o).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,re_e_in,im_e_in,re_e_out,im_e_out,omega,omega_phase");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with(
            "0.0000000000e0,0.0000000000e0,0.0000000000e0,1.0000000000e0,-1.0000000000e0,2.0000000000e0,1.5707963268e0"
        ));
    }

    #[test]
    fn envelope_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TimeGrid::new(0.0, 2.0, 8).unwrap();
        let e = Envelope::from_fn(g, EnvelopeKind::Signal, |t| Complex64::new(t, 1.0 - t)).unwrap();
        let p = dir.path().join("e.csv");
        let rows: Vec<Vec<f64>> = g.times().zip(e.samples()).map(|(t, s)| vec![t, s.re, s.im]).collect();
        write_table(&p, &["t", "re", "im"], &rows).unwrap();
        let back = read_envelope_csv(&p, &g, EnvelopeKind::Signal).unwrap();
        for (a, b) in back.samples().iter().zip(e.samples()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let row = vec![vec!["x".to_string(), "1".to_string()]];
        append_rows(&p, &["id", "v"], &row, false).unwrap();
        append_rows(&p, &["id", "v"], &row, false).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "id,v\nx,1\nx,1\n");
        append_rows(&p, &["id", "v"], &row, true).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "id,v\nx,1\n");
    }

    #[test]
    fn spin_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let s = SpinWave::from_fn(SpaceGrid::new(3).unwrap(), |z| Complex64::new(z, 0.0));
        let p = dir.path().join("s.csv");
        write_spin_csv(&p, &s).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("5.0000000000e-1,5.0000000000e-1"));
    }

    #[test]
    fn bad_custom_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,re,im\n0,1,0\n0,2,0\n").unwrap();
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert!(read_envelope_csv(&p, &g, EnvelopeKind::Signal).is_err());
    }
}
