//! CSV output.
//!
//! Every writer goes through [`write_atomic`]: the file is written next to
//! its destination under a temporary name and renamed into place only once
//! complete, so a failed run never leaves a partial CSV behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::simulator::{MetricsSeries, MetricsSummary, PolicyRow, SweepRow};

pub const SERIES_HEADER: &str = "t,utility,backlog,virtual_backlog,delivered_total,obs_used,obs_avail,trans_used,trans_avail";
pub const SUMMARY_HEADER: &str = "policy,seed,avg_utility,avg_backlog,avg_virtual_backlog,min_flow_rate,obs_utilization,trans_utilization,obs_used,obs_avail,trans_used,trans_avail,total_delivered";
pub const SWEEP_HEADER: &str = "v,avg_utility,avg_backlog";
pub const COMPARE_HEADER: &str = "policy,avg_utility,avg_backlog,avg_virtual_backlog,min_flow_rate,obs_utilization,trans_utilization,obs_used,obs_avail,trans_used,trans_avail,total_delivered";

/// Writes `path` through a temporary sibling file and a rename.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut out = BufWriter::new(File::create(&tmp)?);
        fill(&mut out)?;
        out.flush()?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_series(out: &mut dyn Write, m: &MetricsSeries) -> std::io::Result<()> {
    writeln!(out, "{SERIES_HEADER}")?;
    for t in 0..m.len() {
        writeln!(
            out,
            "{t},{},{},{},{},{},{},{},{}",
            m.utility[t],
            m.backlog[t],
            m.virtual_backlog[t],
            m.delivered_total(t),
            m.obs_used[t],
            m.obs_avail[t],
            m.trans_used[t],
            m.trans_avail[t]
        )?;
    }
    Ok(())
}

fn summary_fields(s: &MetricsSummary) -> String {
    let min_rate = s.avg_rate.iter().copied().fold(f64::INFINITY, f64::min);
    let min_rate = if min_rate.is_finite() { min_rate } else { 0.0 };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        s.avg_utility,
        s.avg_backlog,
        s.avg_virtual_backlog,
        min_rate,
        s.obs_utilization,
        s.trans_utilization,
        s.obs_used,
        s.obs_avail,
        s.trans_used,
        s.trans_avail,
        s.total_delivered
    )
}

/// One summary row per `(policy, seed, summary)`.
pub fn write_summaries(out: &mut dyn Write, rows: &[(String, u64, MetricsSummary)]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for (policy, seed, s) in rows {
        writeln!(out, "{policy},{seed},{}", summary_fields(s))?;
    }
    Ok(())
}

pub fn write_sweep(out: &mut dyn Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.v, r.avg_utility, r.avg_backlog)?;
    }
    Ok(())
}

pub fn write_comparison(out: &mut dyn Write, rows: &[PolicyRow]) -> std::io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{}", r.policy, summary_fields(&r.summary))?;
    }
    Ok(())
}

/// A plain table of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn series_has_header_and_one_row_per_slot() {
        let mut m = MetricsSeries::with_capacity(2, 1);
        m.utility = vec![0.5, 1.0];
        m.backlog = vec![3.0, 4.0];
        m.virtual_backlog = vec![0.0, 0.0];
        m.arrivals = Array2::zeros((2, 1));
        m.delivered = Array2::from_shape_vec((2, 1), vec![0.0, 2.5]).unwrap();
        m.obs_used = vec![1, 0];
        m.obs_avail = vec![2, 2];
        m.trans_used = vec![0, 1];
        m.trans_avail = vec![1, 1];
        let mut buf = Vec::new();
        write_series(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![SERIES_HEADER, "0,0.5,3,0,0,1,2,0,1", "1,1,4,0,2.5,0,2,1,1"]);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = std::env::temp_dir().join(format!("report-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        let err = write_atomic(&path, |w| {
            writeln!(w, "partial")?;
            Err(std::io::Error::other("boom"))
        });
        assert!(err.is_err());
        assert!(!path.exists());
        assert!(!dir.join("out.csv.tmp").exists());

        write_atomic(&path, |w| writeln!(w, "a,b")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["k", "utility"]);
        t.push(["4", "1.5"]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,utility\n4,1.5\n");
    }
}
