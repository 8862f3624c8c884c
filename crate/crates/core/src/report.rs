//! Deterministic JSON and CSV output.
//!
//! Every float is written in scientific notation with 17 significant digits,
//! so identical inputs give byte-identical files.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::isoparametric::VerificationReport;

/// `value` with 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn format_float(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        format!("{value}")
    }
}

struct FixedFloats<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty-printed JSON with fixed-precision floats. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats { inner: PrettyFormatter::new() });
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Header of the per-sample CSV for an `n`-dimensional scenario.
pub fn sample_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["scenario".to_string(), "level".to_string()];
    h.extend((1..=n).map(|i| format!("x_{i}")));
    h.push("fstar_df".into());
    h.push("laplacian".into());
    h.extend((1..n).map(|i| format!("k_{i}")));
    h
}

/// One row per sample point: scenario id, level, coordinates, `F*(df)`,
/// Laplacian and the sorted principal curvatures.
pub fn write_samples_csv<W: io::Write>(writer: W, scenario: &str, report: &VerificationReport) -> Result<()> {
    let n = report.dim;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(sample_csv_header(n))?;
    for level in &report.samples {
        let mut points: Vec<_> = level.points.iter().collect();
        points.sort_by_key(|p| p.direction_index);
        for p in points {
            let mut row = vec![scenario.to_string(), format_float(level.level)];
            row.extend(p.x.iter().map(|v| format_float(*v)));
            row.push(format_float(p.fstar));
            row.push(format_float(p.laplacian));
            row.extend((0..n - 1).map(|i| p.principal_curvatures.get(i).map_or(String::new(), |k| format_float(*k))));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
