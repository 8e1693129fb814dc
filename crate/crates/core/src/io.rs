//! File formats: candidate and sample CSV, Gram CSV, greedy trace CSV, and
//! 16-bit binary PGM images.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::greedy::GreedyTrace;
use crate::kernel::Point;

pub const CANDIDATE_HEADER: [&str; 4] = ["kind", "r_or_x1", "theta_or_x2", "sample"];
pub const TRACE_HEADER: [&str; 9] = [
    "iter",
    "index",
    "indicator",
    "power",
    "residual",
    "fill_dual",
    "fill_param",
    "norm_sq",
    "ms",
];

/// Contents of a candidate CSV. `samples` is present iff the file has a
/// `sample` column.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFile {
    pub functionals: Vec<Functional>,
    pub samples: Option<Vec<f64>>,
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what} `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite {what}")));
    }
    Ok(v)
}

pub fn read_candidates<R: Read>(reader: R) -> Result<CandidateFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let with_samples = match names.as_slice() {
        [a, b, c] if [*a, *b, *c] == CANDIDATE_HEADER[..3] => false,
        [a, b, c, d] if [*a, *b, *c, *d] == CANDIDATE_HEADER => true,
        _ => {
            return Err(Error::Parse(format!(
                "expected header `{}` (sample optional), got `{}`",
                CANDIDATE_HEADER.join(","),
                names.join(",")
            )))
        }
    };
    let mut functionals = Vec::new();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = match rec[0].trim() {
            "radon" => Functional::radon(
                parse_f64(&rec[1], "r", line)?,
                parse_f64(&rec[2], "theta", line)?,
            )?,
            "point" => {
                let x1 = parse_f64(&rec[1], "x1", line)?;
                if rec[2].trim().is_empty() {
                    Functional::point(Point::new1(x1))?
                } else {
                    Functional::point(Point::new2(x1, parse_f64(&rec[2], "x2", line)?))?
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {line}: unknown functional kind `{other}`"
                )))
            }
        };
        functionals.push(f);
        if with_samples {
            samples.push(parse_f64(&rec[3], "sample", line)?);
        }
    }
    Ok(CandidateFile {
        functionals,
        samples: with_samples.then_some(samples),
    })
}

pub fn write_candidates<W: Write>(
    writer: W,
    functionals: &[Functional],
    samples: Option<&[f64]>,
) -> Result<()> {
    if let Some(s) = samples {
        if s.len() != functionals.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples for {} functionals",
                s.len(),
                functionals.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let cols = if samples.is_some() { 4 } else { 3 };
    w.write_record(&CANDIDATE_HEADER[..cols])?;
    for (i, f) in functionals.iter().enumerate() {
        let (kind, a, b) = match *f {
            Functional::RadonLine { r, theta } => ("radon", r.to_string(), theta.to_string()),
            Functional::PointEval(p) if p.dim() == 1 => ("point", p.x().to_string(), String::new()),
            Functional::PointEval(p) => ("point", p.x().to_string(), p.y().to_string()),
        };
        let mut row = vec![kind.to_string(), a, b];
        if let Some(s) = samples {
            row.push(s[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a Gram CSV: a first line holding `n`, then `n` rows of `n` values.
pub fn read_gram<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let head = records
        .next()
        .ok_or_else(|| Error::Parse("empty Gram file".into()))??;
    if head.len() != 1 {
        return Err(Error::Parse("Gram header must hold only n".into()));
    }
    let n: usize = head[0]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid Gram size `{}`", &head[0])))?;
    let mut values = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if i >= n {
            return Err(Error::Parse(format!("more than {n} Gram rows")));
        }
        if rec.len() != n {
            return Err(Error::Parse(format!(
                "Gram row {i} has {} entries, expected {n}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            values.push(parse_f64(field, "Gram entry", i as u64 + 2)?);
        }
    }
    if Some(values.len()) != n.checked_mul(n) {
        return Err(Error::Parse(format!(
            "expected {n} Gram rows, got {}",
            values.len() / n.max(1)
        )));
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

pub fn write_gram<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("Gram matrix must be square".into()));
    }
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record([m.nrows().to_string()])?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a greedy trace. The `ms` column stays empty unless
/// `include_timing`, so repeated runs produce identical files.
pub fn write_trace<W: Write>(writer: W, trace: &GreedyTrace, include_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.iter.to_string(),
            r.index.to_string(),
            r.indicator.to_string(),
            r.power.to_string(),
            r.residual.to_string(),
            r.fill_dual.to_string(),
            r.fill_param.map(|v| v.to_string()).unwrap_or_default(),
            r.norm_sq.to_string(),
            if include_timing {
                format!("{:.3}", r.ms)
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a `width x height` row-major image as a 16-bit binary PGM,
/// mapping `[lo, hi]` linearly onto the gray range and clipping outside it.
pub fn write_pgm<W: Write>(
    mut writer: W,
    width: usize,
    height: usize,
    values: &[f64],
    window: (f64, f64),
) -> Result<()> {
    if values.len() != width * height || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} pixels for a {width}x{height} image",
            values.len()
        )));
    }
    let (lo, hi) = window;
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(writer, "P5\n{width} {height}\n65535\n")?;
    let mut buf = Vec::with_capacity(2 * values.len());
    for &v in values {
        let t = if v.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        let g = (t * 65535.0).round() as u16;
        buf.extend_from_slice(&g.to_be_bytes());
    }
    writer.write_all(&buf)?;
    writer.flush()?;
    Ok(())
}

/// Smallest and largest finite value, or `(0, 1)` if there is none.
pub fn value_window(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= hi {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{StopReason, TraceRecord};

    #[test]
    fn candidate_round_trip() {
        let fs = vec![
            Functional::radon(0.1, 0.2).unwrap(),
            Functional::radon(-1.3, 3.0).unwrap(),
            Functional::point(Point::new2(0.25, -0.5)).unwrap(),
            Functional::point(Point::new1(0.7)).unwrap(),
        ];
        let ys = vec![1.0, -2.5, 1e-300, 0.1 + 0.2];
        let mut buf = Vec::new();
        write_candidates(&mut buf, &fs, Some(&ys)).unwrap();
        let back = read_candidates(buf.as_slice()).unwrap();
        assert_eq!(back.functionals, fs);
        assert_eq!(back.samples.unwrap(), ys);

        let mut buf = Vec::new();
        write_candidates(&mut buf, &fs, None).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("kind,r_or_x1,theta_or_x2\n"));
        let back = read_candidates(buf.as_slice()).unwrap();
        assert_eq!(back.functionals, fs);
        assert!(back.samples.is_none());
    }

    #[test]
    fn candidate_errors() {
        let bad = [
            "kind,r,theta\nradon,0,0\n",
            "kind,r_or_x1,theta_or_x2\nline,0,0\n",
            "kind,r_or_x1,theta_or_x2\nradon,abc,0\n",
            "kind,r_or_x1,theta_or_x2,sample\nradon,0,0,NaN\n",
            "kind,r_or_x1,theta_or_x2,sample\nradon,0,0\n",
            "kind,r_or_x1,theta_or_x2\nradon,inf,0\n",
        ];
        for text in bad {
            let err = read_candidates(text.as_bytes()).unwrap_err();
            assert!(matches!(err, Error::Parse(_)), "{text}: {err}");
        }
        let f = [Functional::radon(0.0, 0.0).unwrap()];
        assert!(write_candidates(Vec::new(), &f, Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn gram_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 2.0, -1e-20, 0.25, -1e-20, 3.0]);
        let mut buf = Vec::new();
        write_gram(&mut buf, &m).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("3\n"));
        assert_eq!(read_gram(buf.as_slice()).unwrap(), m);
        assert_eq!(read_gram("0\n".as_bytes()).unwrap().nrows(), 0);
        for bad in ["", "2\n1,2\n", "2\n1,2\n3\n", "1\n1\n2\n", "x\n", "1,2\n1\n", "1\nnan\n"] {
            assert!(read_gram(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn trace_columns() {
        let trace = GreedyTrace {
            rule: "p".into(),
            records: vec![TraceRecord {
                iter: 1,
                index: 4,
                indicator: 0.5,
                power: 0.5,
                residual: -1.0,
                fill_dual: 0.25,
                fill_param: None,
                max_residual: 0.1,
                norm_sq: 4.0,
                ms: 12.3456,
            }],
            exclusions: Vec::new(),
            stop: StopReason::MaxIterations,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,index,indicator,power,residual,fill_dual,fill_param,norm_sq,ms\n1,4,0.5,0.5,-1,0.25,,4,\n"
        );
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, true).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with(",4,12.346\n"));
    }

    #[test]
    fn pgm_layout() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 1, &[0.0, 2.0], (0.0, 1.0)).unwrap();
        assert_eq!(&buf[..14], b"P5\n2 1\n65535\n\x00");
        assert_eq!(&buf[13..], &[0, 0, 255, 255]);
        assert!(write_pgm(Vec::new(), 2, 2, &[0.0], (0.0, 1.0)).is_err());
        assert_eq!(value_window(&[3.0, f64::NAN, -1.0]), (-1.0, 3.0));
        assert_eq!(value_window(&[]), (0.0, 1.0));
    }
}
