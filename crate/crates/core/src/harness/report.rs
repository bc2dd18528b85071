use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::sweep::SweepRow;
use crate::detect::Method;
use crate::error::{Error, Result};
use crate::metrics::{box_stats, BoxStats};

/// Box statistics of every error measure for one (method, window) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRow {
    pub method: Method,
    pub t_obs: f64,
    /// Successful rows contributing to the statistics.
    pub n: usize,
    pub eta_error: BoxStats,
    pub h_error: BoxStats,
    pub tpr: BoxStats,
    pub fpr: BoxStats,
}

/// Groups successful rows by (method, t_obs) in method then window order.
pub fn box_table(rows: &[SweepRow]) -> Vec<BoxRow> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        if !keys.iter().any(|&(m, t)| m == r.method && t == r.t_obs) {
            keys.push((r.method, r.t_obs));
        }
    }
    keys.sort_by(|a, b| {
        let rank = |m: Method| Method::ALL.iter().position(|&x| x == m);
        rank(a.0).cmp(&rank(b.0)).then(a.1.total_cmp(&b.1))
    });
    keys.into_iter()
        .map(|(method, t_obs)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.is_ok() && r.method == method && r.t_obs == t_obs)
                .collect();
            let stats = |f: fn(&SweepRow) -> f64| {
                let v: Vec<f64> = group.iter().map(|r| f(r)).collect();
                box_stats(&v).expect("group is non-empty and finite")
            };
            BoxRow {
                method,
                t_obs,
                n: group.len(),
                eta_error: stats(SweepRow::eta_error),
                h_error: stats(SweepRow::h_error),
                tpr: stats(|r| r.tpr),
                fpr: stats(|r| r.fpr),
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_report_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    Ok(rows)
}

pub fn write_boxstats_csv(path: &Path, table: &[BoxRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["method".to_string(), "t_obs".into(), "n".into()];
    for q in ["eta_err", "hmax_err", "tpr", "fpr"] {
        for s in ["mean", "median", "q1", "q3", "iqr", "min", "max"] {
            header.push(format!("{q}_{s}"));
        }
    }
    w.write_record(&header)?;
    for b in table {
        let mut rec = vec![b.method.to_string(), b.t_obs.to_string(), b.n.to_string()];
        for s in [&b.eta_error, &b.h_error, &b.tpr, &b.fpr] {
            for v in [s.mean, s.median, s.q1, s.q3, s.iqr, s.min, s.max] {
                rec.push(v.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Which index a scatter table compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterKind {
    Eta,
    Hmax,
}

/// Predicted vs true values of one index, one line per successful row.
pub fn write_scatter_csv(path: &Path, rows: &[SweepRow], kind: ScatterKind) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "fold,scenario_id,method,t_obs,pred,true,t_arrv").map_err(io)?;
    for r in rows.iter().filter(|r| r.is_ok()) {
        let (p, t) = match kind {
            ScatterKind::Eta => (r.eta_pred, r.eta_true),
            ScatterKind::Hmax => (r.h_pred, r.h_true),
        };
        let arr = r.t_arrv.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{},{}", r.fold, r.scenario_id, r.method, r.t_obs, p, t, arr)
            .map_err(io)?;
    }
    out.flush().map_err(io)
}
