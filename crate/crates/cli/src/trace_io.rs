//! Comma-separated trace files.
//!
//! Records: `k,f,psi,F,delta,k_delta,step,d_norm_sq`, where `step` is
//! `alpha:<value>`, `coord:<index>` or empty, and `delta`/`k_delta` are
//! empty when no `F*` is available. Snapshots go to a sibling file with
//! columns `k,x_0,...,x_{n-1}`. Reals use shortest round-trip scientific
//! notation, so parsing reproduces them bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use convrate::oracle::Vector;
use convrate::solvers::{Record, Snapshot, Step, Trace};

use crate::error::{CliError, CliResult};

pub const RECORD_HEADER: [&str; 8] = [
    "k",
    "f",
    "psi",
    "F",
    "delta",
    "k_delta",
    "step",
    "d_norm_sq",
];

pub fn fmt_real(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_step(step: Option<Step>) -> String {
    match step {
        Some(Step::Alpha(a)) => format!("alpha:{}", fmt_real(a)),
        Some(Step::Coordinate(i)) => format!("coord:{i}"),
        None => String::new(),
    }
}

pub fn write_records<W: Write>(trace: &Trace, fstar: Option<f64>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in &trace.records {
        let (delta, kdelta) = match fstar {
            Some(fs) => {
                let d = r.objective - fs;
                (fmt_real(d), fmt_real(r.k as f64 * d))
            }
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.k.to_string(),
            fmt_real(r.f),
            fmt_real(r.psi),
            fmt_real(r.objective),
            delta,
            kdelta,
            fmt_step(r.step),
            r.d_norm_sq.map(fmt_real).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshots<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = trace.snapshots.first().map_or(0, |s| s.x.len());
    let mut header = vec!["k".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for s in &trace.snapshots {
        let mut row = vec![s.k.to_string()];
        row.extend(s.x.iter().map(|&v| fmt_real(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_cli(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        CliError::TraceFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Writes the record file and its snapshot sibling.
pub fn emit_trace(
    trace: &Trace,
    fstar: Option<f64>,
    records_path: &Path,
    snapshots_path: &Path,
) -> CliResult<()> {
    if trace.is_empty() {
        return Err(CliError::TraceFormat {
            path: records_path.to_path_buf(),
            message: "refusing to write an empty trace".into(),
        });
    }
    let open = |p: &Path| {
        File::create(p)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(p, e))
    };
    write_records(trace, fstar, open(records_path)?).map_err(|e| to_cli(records_path, e))?;
    write_snapshots(trace, open(snapshots_path)?).map_err(|e| to_cli(snapshots_path, e))
}

/// Records read back from a trace file, plus its `delta` column when filled.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub records: Vec<Record>,
    pub deltas: Option<Vec<f64>>,
}

fn field(row: &csv::StringRecord, i: usize) -> &str {
    row.get(i).unwrap_or("")
}

pub fn read_records<R: Read>(input: R) -> Result<TraceTable, String> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        ));
    }
    let mut records = Vec::new();
    let mut deltas = Vec::new();
    let mut all_deltas = true;
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let ctx = |what: &str| format!("row {}: bad {what}", line + 1);
        let real = |i: usize, what: &str| field(&row, i).parse::<f64>().map_err(|_| ctx(what));
        let k = field(&row, 0).parse::<usize>().map_err(|_| ctx("k"))?;
        let step = match field(&row, 6) {
            "" => None,
            s => match s.split_once(':') {
                Some(("alpha", a)) => Some(Step::Alpha(a.parse().map_err(|_| ctx("step"))?)),
                Some(("coord", i)) => Some(Step::Coordinate(i.parse().map_err(|_| ctx("step"))?)),
                _ => return Err(ctx("step")),
            },
        };
        let d_norm_sq = match field(&row, 7) {
            "" => None,
            _ => Some(real(7, "d_norm_sq")?),
        };
        match field(&row, 4) {
            "" => all_deltas = false,
            _ => deltas.push(real(4, "delta")?),
        }
        records.push(Record {
            k,
            f: real(1, "f")?,
            psi: real(2, "psi")?,
            objective: real(3, "F")?,
            step,
            d_norm_sq,
        });
    }
    Ok(TraceTable {
        records,
        deltas: all_deltas.then_some(deltas),
    })
}

pub fn read_snapshots<R: Read>(input: R) -> Result<Vec<Snapshot>, String> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let k = field(&row, 0)
            .parse::<usize>()
            .map_err(|_| format!("row {}: bad k", line + 1))?;
        let xs = row
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| format!("row {}: bad coordinate", line + 1))?;
        out.push(Snapshot {
            k,
            x: Vector::from_vec(xs),
        });
    }
    Ok(out)
}

pub fn load_trace_table(path: &Path) -> CliResult<TraceTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_records(file).map_err(|message| CliError::TraceFormat {
        path: path.to_path_buf(),
        message,
    })
}
