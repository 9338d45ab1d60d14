//! CSV panels (`t,<id1>,<id2>,...`, one row per time point) and JSON
//! documents.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{GdfmSpec, Panel, ShockSeries};

/// Write a panel transposed to time-major rows. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_panel_csv(path: &Path, panel: &Panel) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["t".to_string()];
    header.extend(panel.series_ids().iter().cloned());
    w.write_record(&header)?;
    let v = panel.values();
    let mut rec = Vec::with_capacity(panel.n() + 1);
    for t in 0..panel.len() {
        rec.clear();
        rec.push((panel.t0() + t as i64).to_string());
        rec.extend(v.column(t).iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a panel written by [`write_panel_csv`]; time stamps must be
/// consecutive integers.
pub fn read_panel_csv(path: &Path) -> Result<Panel> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: expected header 't,<series ids>'",
            path.display()
        )));
    }
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    let mut data = Vec::new();
    let mut t0 = None;
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                k + 1,
                rec.len(),
                n + 1
            )));
        }
        let t: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad time stamp '{}'", path.display(), &rec[0])))?;
        let start = *t0.get_or_insert(t);
        if t != start + k as i64 {
            return Err(Error::Parse(format!(
                "{}: time stamps must be consecutive (row {} has t = {t})",
                path.display(),
                k + 1
            )));
        }
        for f in rec.iter().skip(1) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad number '{f}'", path.display())))?;
            data.push(v);
        }
    }
    let t_len = data.len() / n.max(1);
    if t_len == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    // data is time-major: column t holds series values
    let values = DMatrix::from_column_slice(n, t_len, &data);
    Panel::new(values, ids, t0.unwrap_or(0))
}

pub fn write_shocks_csv(path: &Path, eps: &ShockSeries) -> Result<()> {
    write_panel_csv(path, &eps.as_panel("e"))
}

pub fn read_shocks_csv(path: &Path, normalized: bool) -> Result<ShockSeries> {
    Ok(ShockSeries::from_panel(&read_panel_csv(path)?, normalized))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    serde_json::from_reader(r).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parse and validate a model spec file.
pub fn read_spec(path: &Path) -> Result<GdfmSpec> {
    let r = BufReader::new(File::open(path)?);
    serde_json::from_reader(r).map_err(|e| {
        let msg = e.to_string();
        if e.is_data() {
            Error::Spec(format!("{}: {msg}", path.display()))
        } else {
            Error::Parse(format!("{}: {msg}", path.display()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{example_panel, ExampleKind};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("gdfm-io-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn panel_roundtrip_is_exact() {
        let dir = tmp("panel");
        let sim = example_panel(ExampleKind::Eq7, 3, 50, 0.5, 1).unwrap();
        let p = dir.join("y.csv");
        write_panel_csv(&p, &sim.y).unwrap();
        let back = read_panel_csv(&p).unwrap();
        assert_eq!(back, sim.y);
        let first = std::fs::read_to_string(&p).unwrap();
        assert!(first.starts_with("t,s1,s2,s3\n0,"));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn shocks_keep_time_origin() {
        let dir = tmp("eps");
        let eps = ShockSeries::new(DMatrix::from_row_slice(1, 3, &[0.1, -2.5, 3.0]), true, 7).unwrap();
        let p = dir.join("eps.csv");
        write_shocks_csv(&p, &eps).unwrap();
        assert_eq!(read_shocks_csv(&p, true).unwrap(), eps);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn gaps_in_time_are_rejected() {
        let dir = tmp("gap");
        let p = dir.join("bad.csv");
        std::fs::write(&p, "t,s1\n0,1.0\n2,2.0\n").unwrap();
        assert!(matches!(read_panel_csv(&p), Err(Error::Parse(_))));
        std::fs::write(&p, "x,s1\n0,1.0\n").unwrap();
        assert!(matches!(read_panel_csv(&p), Err(Error::Parse(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn spec_q_mismatch_is_spec_error() {
        let dir = tmp("spec");
        let p = dir.join("spec.json");
        std::fs::write(
            &p,
            r#"{"q": 2, "filters": [[[1.0], [-0.5]]], "idio": {"ar": 0.5, "sigma": 1.0}, "seed": 1}"#,
        )
        .unwrap();
        assert!(matches!(read_spec(&p), Err(Error::Spec(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
