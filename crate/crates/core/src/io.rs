//! CSV and JSON export. Floats carry 17 significant digits; files are
//! written to a temporary sibling and renamed into place.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::SweepPoint;
use crate::curve::SurvivalCurve;
use crate::error::Result;
use crate::spectral::Spectrum;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn spectrum_csv(s: &Spectrum) -> Result<Vec<u8>> {
    csv_bytes(
        &["l", "epsilon", "gamma"],
        s.eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, e)| vec![(i + 1).to_string(), fmt_float(e.epsilon), fmt_float(e.gamma)]),
    )
}

pub fn curve_csv(c: &SurvivalCurve) -> Result<Vec<u8>> {
    let model = c.model.as_str();
    csv_bytes(
        &["t", "value", "model"],
        c.points().map(|(t, v)| vec![fmt_float(t), fmt_float(v), model.to_string()]),
    )
}

/// Several curves in long format, keyed by `label`.
pub fn family_csv(key: &str, curves: &[(String, &SurvivalCurve)]) -> Result<Vec<u8>> {
    csv_bytes(
        &[key, "t", "value", "model"],
        curves.iter().flat_map(|(label, c)| {
            c.points().map(move |(t, v)| {
                vec![label.clone(), fmt_float(t), fmt_float(v), c.model.as_str().to_string()]
            })
        }),
    )
}

/// `gamma,t_threshold`; the time is empty when the threshold is never reached.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    csv_bytes(
        &["gamma", "t_threshold"],
        points
            .iter()
            .map(|p| vec![fmt_float(p.gamma), p.t_threshold.map(fmt_float).unwrap_or_default()]),
    )
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &json_bytes(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CurveMeta, CurveModel};
    use crate::graph::C64;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 7.94e-6, 1e-300, 123456.789] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
        }
    }

    #[test]
    fn csv_layout() {
        let s = Spectrum::diagonal(&[C64::new(2.0, -0.5), C64::new(1.0, -0.25)]);
        let text = String::from_utf8(spectrum_csv(&s).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "l,epsilon,gamma");
        assert_eq!(lines[1], "1,2.0000000000000000e0,5.0000000000000000e-1");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn sweep_marks_missing_times() {
        let c = SurvivalCurve::new(vec![1.0, 2.0], vec![1.0, 1.0], CurveModel::Oracle, CurveMeta::default());
        let pts = vec![SweepPoint { gamma: 1.0, t_threshold: None, curve: c }];
        let text = String::from_utf8(sweep_csv(&pts).unwrap()).unwrap();
        assert_eq!(text, "gamma,t_threshold\n1.0000000000000000e0,\n");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("x.json");
        write_json(&path, &vec![1, 2]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "[\n  1,\n  2\n]\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
