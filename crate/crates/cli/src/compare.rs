//! Side-by-side summary of run logs.

use std::path::{Path, PathBuf};

use varlp::io::read_runlog;
use varlp::solvers::RunLog;
use varlp::{Error, Result};

pub const SUMMARY_HEADER: &str =
    "rank,label,epochs,best_psnr,best_epoch,mae,ssim,seconds_per_epoch,total_seconds";

/// One row of the summary; quality figures are taken at the epoch of best PSNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub epochs: usize,
    pub best_psnr: f64,
    pub best_epoch: usize,
    pub mae: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds_per_epoch: f64,
    pub total_seconds: f64,
}

pub fn summarise(label: &str, log: &RunLog) -> Result<SummaryRow> {
    let best = log
        .records
        .iter()
        .filter_map(|r| r.psnr.map(|v| (v, r)))
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or_else(|| Error::MismatchedLogs(format!("{label} has no PSNR values")))?;
    let total = log.records.last().map_or(0.0, |r| r.seconds);
    Ok(SummaryRow {
        label: label.to_string(),
        epochs: log.len(),
        best_psnr: best.0,
        best_epoch: best.1.epoch,
        mae: best.1.mae,
        ssim: best.1.ssim,
        seconds_per_epoch: total / log.len() as f64,
        total_seconds: total,
    })
}

/// Rows sorted by best PSNR, highest first; ties keep input order.
pub fn compare(logs: &[(String, RunLog)]) -> Result<Vec<SummaryRow>> {
    if logs.len() < 2 {
        return Err(Error::MismatchedLogs("need at least two run logs".into()));
    }
    let epochs = logs[0].1.len();
    if let Some((label, log)) = logs.iter().find(|(_, l)| l.len() != epochs) {
        return Err(Error::MismatchedLogs(format!(
            "{label} has {} epochs, {} has {epochs}",
            log.len(),
            logs[0].0
        )));
    }
    let mut rows = logs.iter().map(|(l, log)| summarise(l, log)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.best_psnr.total_cmp(&a.best_psnr));
    Ok(rows)
}

pub fn render(rows: &[SummaryRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = format!("{SUMMARY_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            r.label,
            r.epochs,
            r.best_psnr,
            r.best_epoch,
            opt(r.mae),
            opt(r.ssim),
            r.seconds_per_epoch,
            r.total_seconds
        ));
    }
    s
}

/// Labels are file stems.
pub fn cmd_compare(paths: &[PathBuf], output: Option<&Path>) -> Result<String> {
    let logs = paths
        .iter()
        .map(|p| {
            let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            read_runlog(p).map(|l| (label, l))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = compare(&logs)?;
    let text = render(&rows);
    match output {
        Some(path) => {
            varlp::io::write_atomic(path, |w| w.write_all(text.as_bytes()))?;
            Ok(format!(
                "compare: {} logs, best {} ({:.2} dB at epoch {}) -> {}",
                rows.len(),
                rows[0].label,
                rows[0].best_psnr,
                rows[0].best_epoch,
                path.display()
            ))
        }
        None => Ok(text.trim_end().to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use varlp::solvers::EpochRecord;

    fn log(psnr: &[f64]) -> RunLog {
        RunLog {
            records: psnr
                .iter()
                .enumerate()
                .map(|(i, &v)| EpochRecord {
                    epoch: i + 1,
                    objective: 1.0,
                    mae: Some(1.0 / v),
                    psnr: Some(v),
                    ssim: Some(v / 100.0),
                    step: 0.1,
                    seconds: 0.5 * (i + 1) as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn identical_logs_identical_rows() {
        let rows = compare(&[("a".into(), log(&[10.0, 12.0, 11.0])), ("b".into(), log(&[10.0, 12.0, 11.0]))])
            .unwrap();
        assert_eq!(rows[0].label, "a");
        let strip = |r: &SummaryRow| SummaryRow { label: String::new(), ..r.clone() };
        assert_eq!(strip(&rows[0]), strip(&rows[1]));
        assert_eq!((rows[0].best_epoch, rows[0].best_psnr), (2, 12.0));
        assert_eq!(rows[0].seconds_per_epoch, 0.5);
    }

    #[test]
    fn better_log_ranks_first() {
        let rows =
            compare(&[("worse".into(), log(&[10.0, 11.0])), ("better".into(), log(&[10.5, 11.5]))]).unwrap();
        assert_eq!(rows[0].label, "better");
        assert!(render(&rows).lines().nth(1).unwrap().starts_with("1,better,2,11.5,2,"));
    }

    #[test]
    fn mismatched_logs_rejected() {
        assert!(matches!(compare(&[("a".into(), log(&[1.0]))]), Err(Error::MismatchedLogs(_))));
        assert!(matches!(
            compare(&[("a".into(), log(&[1.0])), ("b".into(), log(&[1.0, 2.0]))]),
            Err(Error::MismatchedLogs(_))
        ));
        let mut no_psnr = log(&[1.0]);
        no_psnr.records[0].psnr = None;
        assert!(matches!(compare(&[("a".into(), log(&[1.0])), ("b".into(), no_psnr)]), Err(Error::MismatchedLogs(_))));
    }
}
