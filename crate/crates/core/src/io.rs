//! CSV and 16-bit PGM files. All writers go through a temporary file in the
//! target directory that is renamed into place.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::RunLog;
use crate::varexp::ExponentMap;

/// Writes `path` via a sibling temporary file and an atomic rename.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Row-major matrix with `cols` values per line.
pub fn write_matrix_csv(path: &Path, data: &[f64], cols: usize) -> Result<()> {
    if cols == 0 || !data.len().is_multiple_of(cols) {
        return Err(Error::DimensionMismatch { expected: cols, found: data.len() });
    }
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in data.chunks(cols) {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()
    })
}

/// Reads a rectangular numeric CSV; returns `(values, rows, cols)`.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::parse(path, format!("line {}: ragged row", line + 1)));
        }
        for field in rec.iter() {
            let v: f64 =
                field.parse().map_err(|e| Error::parse(path, format!("line {}: {field:?}: {e}", line + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, "no data".to_string()))?;
    Ok((data, rows, cols))
}

/// Square image as `side` rows of `side` values.
pub fn write_image_csv(path: &Path, image: &[f64]) -> Result<()> {
    let side = (image.len() as f64).sqrt().round() as usize;
    if side * side != image.len() {
        return Err(Error::DimensionMismatch { expected: side * side, found: image.len() });
    }
    write_matrix_csv(path, image, side)
}

/// Reads any rectangular CSV as a flat row-major vector.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    read_matrix_csv(path).map(|(d, _, _)| d)
}

/// One exponent per line.
pub fn write_exponent_map(path: &Path, map: &ExponentMap) -> Result<()> {
    write_matrix_csv(path, map.values(), 1)
}

pub fn read_exponent_map(path: &Path) -> Result<ExponentMap> {
    ExponentMap::new(read_vector_csv(path)?)
}

pub fn write_runlog(path: &Path, log: &RunLog) -> Result<()> {
    write_atomic(path, |w| log.write_csv(w))
}

pub fn read_runlog(path: &Path) -> Result<RunLog> {
    RunLog::read_csv(open(path)?).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

/// Binary 16-bit PGM. Values are mapped linearly,
/// `stored = round(65535·(v − vmin)/(vmax − vmin))`, and `vmin`/`vmax` are
/// recorded in a comment so [`read_pgm`] can undo the scaling.
pub fn write_pgm(path: &Path, data: &[f64], width: usize, height: usize) -> Result<()> {
    if width * height != data.len() || data.is_empty() {
        return Err(Error::DimensionMismatch { expected: width * height, found: data.len() });
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (vmin, vmax) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = if vmax > vmin { 65535.0 / (vmax - vmin) } else { 0.0 };
    write_atomic(path, |w| {
        write!(w, "P5\n# vmin={vmin:e} vmax={vmax:e}\n{width} {height}\n65535\n")?;
        let mut bytes = Vec::with_capacity(2 * data.len());
        for v in data {
            let s = ((v - vmin) * scale).round().clamp(0.0, 65535.0) as u16;
            bytes.extend_from_slice(&s.to_be_bytes());
        }
        w.write_all(&bytes)
    })
}

/// Returns `(values, width, height)`; without a range comment values are
/// scaled to `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut r = open(path)?;
    let bad = |m: &str| Error::parse(path, m.to_string());
    let mut tokens: Vec<String> = Vec::new();
    let mut range = None;
    while tokens.len() < 4 {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("truncated header"));
        }
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut lo = None;
            let mut hi = None;
            for kv in comment.split_whitespace() {
                if let Some(v) = kv.strip_prefix("vmin=") {
                    lo = v.parse::<f64>().ok();
                } else if let Some(v) = kv.strip_prefix("vmax=") {
                    hi = v.parse::<f64>().ok();
                }
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                range = Some((lo, hi));
            }
            continue;
        }
        tokens.extend(line.split_whitespace().map(String::from));
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header field"));
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 65535 {
        return Err(bad("only 16-bit PGM is supported"));
    }
    let mut bytes = vec![0u8; 2 * width * height];
    r.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
    let (vmin, vmax) = range.unwrap_or((0.0, 1.0));
    let data = bytes
        .chunks_exact(2)
        .map(|c| vmin + (vmax - vmin) * u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
        .collect();
    Ok((data, width, height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::EpochRecord;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let data = vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0, 0.0, 1e10];
        write_matrix_csv(&p, &data, 3).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), (data, 2, 3));
        assert!(write_matrix_csv(&p, &[1.0; 5], 3).is_err());
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { .. })));
        std::fs::write(&p, "1,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { .. })));
        assert!(matches!(read_matrix_csv(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn exponent_map_and_runlog_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let m = ExponentMap::new(vec![1.05, 1.2, 1.25]).unwrap();
        write_exponent_map(&p, &m).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "1.05\n1.2\n1.25\n");
        assert_eq!(read_exponent_map(&p).unwrap(), m);

        let log = RunLog {
            records: vec![EpochRecord {
                epoch: 1,
                objective: 2.0,
                mae: None,
                psnr: None,
                ssim: None,
                step: 0.1,
                seconds: 0.5,
            }],
        };
        let l = dir.path().join("log.csv");
        write_runlog(&l, &log).unwrap();
        assert_eq!(read_runlog(&l).unwrap(), log);
    }

    #[test]
    fn pgm_round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.pgm");
        let data: Vec<f64> = (0..12).map(|i| -1.0 + i as f64 * 0.37).collect();
        write_pgm(&p, &data, 4, 3).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n# vmin="));
        let (back, w, h) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (4, 3));
        let step = (data[11] - data[0]) / 65535.0;
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() <= step);
        }
        assert_eq!(back[0], data[0]);
    }
}
