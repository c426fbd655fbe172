//! CSV export of aggregate curves.
//!
//! Columns: `strategy,episode,mean_rms,ci_halfwidth`, one row per strategy
//! and episode, episodes counted from 1. Floats use the shortest decimal
//! that round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::aggregate::{AggregateCurve, StrategyCurve};
use crate::Result;

pub const HEADER: [&str; 4] = ["strategy", "episode", "mean_rms", "ci_halfwidth"];

pub fn write_csv_to<W: Write>(curve: &AggregateCurve, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(HEADER)?;
    for c in &curve.curves {
        for (e, (m, h)) in c.mean.iter().zip(&c.half_width).enumerate() {
            writer.write_record([c.label.clone(), (e + 1).to_string(), m.to_string(), h.to_string()])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn csv_bytes(curve: &AggregateCurve) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv_to(curve, &mut buf)?;
    Ok(buf)
}

pub fn write_csv(curve: &AggregateCurve, path: &Path) -> Result<()> {
    write_csv_to(curve, BufWriter::new(File::create(path)?))
}

/// Reads curves back from the CSV layout. Strategy order follows first
/// appearance; rows must be in episode order.
pub fn read_csv<R: Read>(input: R, confidence: f64) -> Result<AggregateCurve> {
    let mut reader = csv::Reader::from_reader(input);
    let mut curves: Vec<StrategyCurve> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let parse = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| crate::ExperimentError::Aggregate(format!("bad number `{}`", field(i))))
        };
        let label = field(0);
        let idx = match curves.iter().position(|c| c.label == label) {
            Some(i) => i,
            None => {
                curves.push(StrategyCurve { label: label.to_string(), mean: Vec::new(), half_width: Vec::new() });
                curves.len() - 1
            }
        };
        curves[idx].mean.push(parse(2)?);
        curves[idx].half_width.push(parse(3)?);
    }
    Ok(AggregateCurve { confidence, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AggregateCurve {
        AggregateCurve {
            confidence: 0.99,
            curves: vec![
                StrategyCurve {
                    label: "qsigma(sigma=0.5,decay=0.9)".into(),
                    mean: (0..200).map(|i| 1.0 / (i as f64 + 3.0)).collect(),
                    half_width: (0..200).map(|i| 0.1 / (i as f64 + 7.0)).collect(),
                },
                StrategyCurve {
                    label: "policy-atb".into(),
                    mean: (0..200).map(|i| (i as f64).sqrt() * 1e-3 + std::f64::consts::PI).collect(),
                    half_width: vec![0.0; 200],
                },
            ],
        }
    }

    #[test]
    fn shape_and_header() {
        let bytes = csv_bytes(&sample()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "strategy,episode,mean_rms,ci_halfwidth");
        assert_eq!(lines.len(), 401);
        assert!(lines[1].contains(",1,"));
        assert!(lines[200].ends_with(&format!(",200,{},{}", 1.0 / 202.0, 0.1 / 206.0)));
    }

    #[test]
    fn round_trip_is_exact() {
        let original = sample();
        let back = read_csv(csv_bytes(&original).unwrap().as_slice(), 0.99).unwrap();
        assert_eq!(back, original);
    }
}
