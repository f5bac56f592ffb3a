//! Output files. Every write goes to a temporary file in the target directory and is
//! renamed into place.

use std::io::{self, Write};
use std::path::Path;

use ncergo_core::{ConvergenceSeries, SeriesPoint};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Format;
use crate::error::CliError;

pub const CSV_HEADER: [&str; 4] = ["n", "dist_op", "dist_L1", "dist_L2"];

/// A float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Pretty JSON with every float written by [`fmt_f64`].
struct DigitsFormatter(PrettyFormatter<'static>);

impl Formatter for DigitsFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DigitsFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn series_to_csv(series: &ConvergenceSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for p in &series.points {
        w.write_record([
            p.n.to_string(),
            fmt_f64(p.dist_op),
            fmt_f64(p.dist_l1),
            fmt_f64(p.dist_l2),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV is UTF-8")
}

pub fn emit_series(series: &ConvergenceSeries, path: &Path, format: Format) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => series_to_csv(series),
        Format::Json => to_json(series),
    };
    write_atomic(path, text.as_bytes())
}

/// Reads a series written by [`emit_series`]. CSV files carry no label, so `label` is used.
pub fn parse_series(text: &str, format: Format, label: &str) -> Result<ConvergenceSeries, CliError> {
    let bad = |e: String| CliError::Config(format!("malformed series: {e}"));
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| bad(e.to_string())),
        Format::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header = r.headers().map_err(|e| bad(e.to_string()))?;
            if header.iter().ne(CSV_HEADER) {
                return Err(bad(format!("unexpected header {header:?}")));
            }
            let mut series = ConvergenceSeries::new(label);
            for rec in r.records() {
                let rec = rec.map_err(|e| bad(e.to_string()))?;
                let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
                let n = rec[0].parse::<usize>().map_err(|e| bad(e.to_string()))?;
                let point = SeriesPoint {
                    n,
                    dist_op: num(1)?,
                    dist_l1: num(2)?,
                    dist_l2: num(3)?,
                };
                series.push(point).map_err(|e| bad(e.to_string()))?;
            }
            Ok(series)
        }
    }
}

pub fn series_file_name(label: &str, format: Format) -> String {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    format!("{label}.{ext}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, 2.5e-300, f64::MAX, -7.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_floats_use_fixed_digits() {
        let text = to_json(&serde_json::json!({"a": 0.5, "b": [1, 2.0]}));
        assert!(text.contains("5.0000000000000000e-1"));
        assert!(text.contains("2.0000000000000000e0"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"], 0.5);
    }
}
