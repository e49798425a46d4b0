//! CSV emission and parsing. Floats are written with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::SweepRow;

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("'{s}' is not a number")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("'{s}' is not an index")))
}

/// Trajectory columns on a shared time axis, optionally tagged by solver.
///
/// Layout: header `t,traj_<i>,...` (or `t,solver,traj_<i>,...`), one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    /// Per-row solver tag, present only for oracle output.
    pub solver: Option<Vec<String>>,
    pub ranks: Vec<usize>,
    /// `columns[j][row]` belongs to trajectory `ranks[j]`.
    pub columns: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn new(times: Vec<f64>, ranks: Vec<usize>, columns: Vec<Vec<f64>>) -> Self {
        Self { times, solver: None, ranks, columns }
    }

    /// Stacks blocks that share ranks into one tagged table.
    pub fn tagged(blocks: Vec<(String, TrajectoryTable)>) -> Result<Self> {
        let mut iter = blocks.into_iter();
        let (tag, first) = iter.next().ok_or_else(|| Error::Validation("no oracle blocks".into()))?;
        let mut table = TrajectoryTable { solver: Some(vec![tag; first.times.len()]), ..first };
        for (tag, block) in iter {
            if block.ranks != table.ranks {
                return Err(Error::Validation("oracle blocks disagree on trajectory labels".into()));
            }
            table.solver.as_mut().unwrap().extend(std::iter::repeat_n(tag, block.times.len()));
            table.times.extend(block.times);
            for (col, extra) in table.columns.iter_mut().zip(block.columns) {
                col.extend(extra);
            }
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        if self.solver.is_some() {
            header.push("solver".into());
        }
        header.extend(self.ranks.iter().map(|i| format!("traj_{i}")));
        out.write_record(&header)?;
        for (row, t) in self.times.iter().enumerate() {
            let mut fields = vec![fmt_f64(*t)];
            if let Some(tags) = &self.solver {
                fields.push(tags[row].clone());
            }
            fields.extend(self.columns.iter().map(|c| fmt_f64(c[row])));
            out.write_record(&fields)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let names = input.headers()?.clone();
        if names.get(0) != Some("t") {
            return Err(Error::Parse("CSV header must start with 't'".into()));
        }
        let tagged = names.get(1) == Some("solver");
        let first_col = if tagged { 2 } else { 1 };
        let ranks = names
            .iter()
            .skip(first_col)
            .map(|name| {
                name.strip_prefix("traj_")
                    .and_then(|i| i.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad column name '{name}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let mut table = TrajectoryTable {
            times: Vec::new(),
            solver: tagged.then(Vec::new),
            columns: vec![Vec::new(); ranks.len()],
            ranks,
        };
        for record in input.records() {
            let record = record?;
            table.times.push(parse_f64(&record[0])?);
            if let Some(tags) = table.solver.as_mut() {
                tags.push(record[1].to_string());
            }
            for (col, field) in table.columns.iter_mut().zip(record.iter().skip(first_col)) {
                col.push(parse_f64(field)?);
            }
        }
        Ok(table)
    }
}

pub const SWEEP_HEADER: &str = "scenario,N,dt,seed,P,sup_error,rms_error,max_step_dx,two_l_over_n,status";

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow], length_scale: f64, time_scale: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER.split(','))?;
    for r in rows {
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        };
        out.write_record([
            r.scenario.clone(),
            r.n.to_string(),
            fmt_f64(r.dt * time_scale),
            r.seed.to_string(),
            fmt_f64(r.p),
            fmt_f64(r.sup_error * length_scale),
            fmt_f64(r.rms_error * length_scale),
            fmt_f64(r.max_step_dx * length_scale),
            fmt_f64(r.two_l_over_n * length_scale),
            status,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of `compare` output.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub p: f64,
    pub rank: usize,
    pub sup_error: f64,
    pub rms_error: f64,
    pub max_normalized_error: f64,
    pub max_step_dx: f64,
    pub two_l_over_n: f64,
}

pub const COMPARE_HEADER: &str = "P,traj,sup_error,rms_error,max_normalized_error,max_step_dx,two_l_over_n";

pub fn write_compare<W: Write>(w: W, rows: &[CompareRow], length_scale: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COMPARE_HEADER.split(','))?;
    for r in rows {
        out.write_record([
            fmt_f64(r.p),
            r.rank.to_string(),
            fmt_f64(r.sup_error * length_scale),
            fmt_f64(r.rms_error * length_scale),
            fmt_f64(r.max_normalized_error),
            fmt_f64(r.max_step_dx * length_scale),
            fmt_f64(r.two_l_over_n * length_scale),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_compare<R: Read>(r: R) -> Result<Vec<CompareRow>> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != COMPARE_HEADER {
        return Err(Error::Parse(format!("unexpected header '{header}'")));
    }
    input
        .records()
        .map(|record| {
            let f = record?;
            Ok(CompareRow {
                p: parse_f64(&f[0])?,
                rank: parse_usize(&f[1])?,
                sup_error: parse_f64(&f[2])?,
                rms_error: parse_f64(&f[3])?,
                max_normalized_error: parse_f64(&f[4])?,
                max_step_dx: parse_f64(&f[5])?,
                two_l_over_n: parse_f64(&f[6])?,
            })
        })
        .collect()
}

/// One KS check in `sample-test` output.
#[derive(Debug, Clone, PartialEq)]
pub struct KsRow {
    pub seed: u64,
    pub t: f64,
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
}

impl KsRow {
    pub fn passed(&self) -> bool {
        self.statistic < self.critical
    }
}

pub const KS_HEADER: &str = "seed,t,n,ks_statistic,critical,pass";

pub fn write_ks<W: Write>(w: W, rows: &[KsRow], time_scale: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(KS_HEADER.split(','))?;
    for r in rows {
        out.write_record([
            r.seed.to_string(),
            fmt_f64(r.t * time_scale),
            r.n.to_string(),
            fmt_f64(r.statistic),
            fmt_f64(r.critical),
            r.passed().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
