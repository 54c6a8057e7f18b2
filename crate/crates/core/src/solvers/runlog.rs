use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const RUNLOG_HEADER: [&str; 7] = ["epoch", "objective", "mae", "psnr", "ssim", "step", "seconds"];

/// One row per completed epoch. Metrics are absent without a ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub mae: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    /// Step size of the last inner iteration of the epoch.
    pub step: f64,
    /// Cumulative iteration time, excluding logging.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header `epoch,objective,mae,psnr,ssim,step,seconds`; floats are
    /// written in shortest round-trip form, absent metrics as empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(RUNLOG_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.epoch.to_string(),
                r.objective.to_string(),
                opt(r.mae),
                opt(r.psnr),
                opt(r.ssim),
                r.step.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let bad = |m: String| Error::parse("runlog", m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(RUNLOG_HEADER) {
            return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                row[i].parse::<f64>().map_err(|e| bad(format!("row {}: {}: {e}", line + 1, RUNLOG_HEADER[i])))
            };
            let maybe = |i: usize| -> Result<Option<f64>> {
                if row[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            records.push(EpochRecord {
                epoch: row[0].parse().map_err(|e| bad(format!("row {}: epoch: {e}", line + 1)))?,
                objective: num(1)?,
                mae: maybe(2)?,
                psnr: maybe(3)?,
                ssim: maybe(4)?,
                step: num(5)?,
                seconds: num(6)?,
            });
        }
        Ok(Self { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let log = RunLog {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    objective: 0.1 + 0.2,
                    mae: Some(1.0 / 3.0),
                    psnr: Some(300.0),
                    ssim: Some(-0.25),
                    step: 0.015 / 1.1,
                    seconds: 1e-7,
                },
                EpochRecord { epoch: 2, objective: 3.5, mae: None, psnr: None, ssim: None, step: 1.0, seconds: 2.0 },
            ],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,objective,mae,psnr,ssim,step,seconds\n"));
        assert!(text.contains("\n2,3.5,,,,1,2\n"));
        assert_eq!(RunLog::read_csv(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(RunLog::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
