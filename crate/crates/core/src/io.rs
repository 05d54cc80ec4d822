//! On-disk formats.
//!
//! `PTYC` (complex image): ASCII header line `PTYC rows cols\n`, then
//! `rows*cols` little-endian f64 pairs `(re, im)` in row-major order.
//!
//! `PTYD` (diffraction set): ASCII header line `PTYD os m count\n`, then per
//! shift an ASCII line `k l t1 t2\n` followed by `(os*m)^2` little-endian
//! f64 magnitudes in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::DiffractionSet;
use crate::image::ComplexImage;
use crate::recon::EpochRecord;
use crate::scan::ScanPattern;

fn read_header_line(reader: &mut impl Read) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Parse("unexpected end of file in header".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 256 {
            return Err(Error::Parse("header line too long".into()));
        }
    }
    String::from_utf8(line).map_err(|_| Error::Parse("header is not valid UTF-8".into()))
}

pub fn write_ptyc(path: &Path, image: &ComplexImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "PTYC {} {}", image.rows(), image.cols())?;
    for z in image.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ptyc(path: &Path) -> Result<ComplexImage> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_line(&mut r)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "PTYC" {
        return Err(Error::Parse(format!("bad PTYC header: {header:?}")));
    }
    let rows: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse("bad PTYC rows".into()))?;
    let cols: usize = parts[2]
        .parse()
        .map_err(|_| Error::Parse("bad PTYC cols".into()))?;
    let mut buf = vec![0u8; rows * cols * 16];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Parse("truncated PTYC payload".into()))?;
    let values: Vec<Complex64> = buf
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[0..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..16].try_into().unwrap()),
            )
        })
        .collect();
    ComplexImage::from_vec(rows, cols, values)
}

pub fn write_ptyd(path: &Path, data: &DiffractionSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "PTYD {} {} {}", data.os, data.m, data.frames.len())?;
    for ((k, l), frame) in data.pattern.indices().zip(data.frames.iter()) {
        let t = data.pattern.shift(k, l);
        writeln!(w, "{} {} {} {}", k, l, t.0, t.1)?;
        for v in frame.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a PTYD file. The scan structure (tau, q, kind, perturbations) is not
/// stored in the data file, so the generating pattern is supplied separately
/// and validated against the per-shift header lines.
pub fn read_ptyd(path: &Path, pattern: &ScanPattern) -> Result<DiffractionSet> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header_line(&mut r)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "PTYD" {
        return Err(Error::Parse(format!("bad PTYD header: {header:?}")));
    }
    let os: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse("bad PTYD os".into()))?;
    let m: usize = parts[2]
        .parse()
        .map_err(|_| Error::Parse("bad PTYD m".into()))?;
    let count: usize = parts[3]
        .parse()
        .map_err(|_| Error::Parse("bad PTYD count".into()))?;
    if count != pattern.len() {
        return Err(Error::Parse(format!(
            "PTYD holds {count} frames but the pattern has {}",
            pattern.len()
        )));
    }
    let side = os * m;
    let mut frames = Vec::with_capacity(count);
    for (k, l) in pattern.indices() {
        let line = read_header_line(&mut r)?;
        let vals: Vec<i64> = line
            .split_whitespace()
            .map(|s| s.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad PTYD shift line: {line:?}")))?;
        if vals.len() != 4 {
            return Err(Error::Parse(format!("bad PTYD shift line: {line:?}")));
        }
        let t = pattern.shift(k, l);
        if vals[0] as usize != k || vals[1] as usize != l || vals[2] != t.0 || vals[3] != t.1 {
            return Err(Error::Parse(format!(
                "PTYD shift line {line:?} does not match pattern entry ({k},{l}) -> {t:?}"
            )));
        }
        let mut buf = vec![0u8; side * side * 8];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Parse("truncated PTYD payload".into()))?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parse("PTYD magnitudes must be finite and >= 0".into()));
        }
        frames.push(
            Array2::from_shape_vec((side, side), values)
                .map_err(|e| Error::Parse(e.to_string()))?,
        );
    }
    Ok(DiffractionSet {
        os,
        m,
        pattern: pattern.clone(),
        frames,
    })
}

pub fn write_pattern(path: &Path, pattern: &ScanPattern) -> Result<()> {
    std::fs::write(path, pattern.to_text())?;
    Ok(())
}

pub fn read_pattern(path: &Path) -> Result<ScanPattern> {
    let text = std::fs::read_to_string(path)?;
    ScanPattern::from_text(&text)
}

/// Convergence log with the fixed column set
/// `epoch,data_residual,RE_object,RE_probe,wall_ms`.
pub fn write_convergence_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,data_residual,RE_object,RE_probe,wall_ms")?;
    for rec in history {
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
        writeln!(
            w,
            "{},{:.12e},{},{},{:.3}",
            rec.epoch,
            rec.data_residual,
            fmt_opt(rec.re_object),
            fmt_opt(rec.re_probe),
            rec.wall_ms
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a convergence CSV back into records (used by tests and tooling).
pub fn read_convergence_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))??;
    if header != "epoch,data_residual,RE_object,RE_probe,wall_ms" {
        return Err(Error::Parse(format!("bad CSV header: {header:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("bad CSV row: {line:?}")));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Parse(format!("bad CSV value {s:?}")))
            }
        };
        out.push(EpochRecord {
            epoch: fields[0]
                .parse()
                .map_err(|_| Error::Parse("bad epoch".into()))?,
            data_residual: fields[1]
                .parse()
                .map_err(|_| Error::Parse("bad residual".into()))?,
            re_object: parse_opt(fields[2])?,
            re_probe: parse_opt(fields[3])?,
            wall_ms: fields[4]
                .parse()
                .map_err(|_| Error::Parse("bad wall_ms".into()))?,
        });
    }
    Ok(out)
}
