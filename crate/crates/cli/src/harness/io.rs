use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use balance_core::{NltaRunRecord, PidGains, SimTrace, StateVector, TraceSample};
use serde::Serialize;

pub const TRACE_HEADER: [&str; 10] = [
    "t", "theta", "theta_dot", "x", "x_dot", "u", "u_pid", "u_fb", "theta_ref", "x_ref",
];

pub const NLTA_LOG_HEADER: [&str; 6] = ["run", "iter", "omega", "cost_old", "cost_new", "accepted"];

/// Shortest exponent form that still round-trips (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sample_row(s: &TraceSample) -> [String; 10] {
    [
        s.t,
        s.state.theta,
        s.state.theta_dot,
        s.state.x,
        s.state.x_dot,
        s.u,
        s.u_pid,
        s.u_fb,
        s.theta_ref,
        s.x_ref,
    ]
    .map(fmt_f64)
}

/// Writes every `stride`-th sample, always keeping the last one.
pub fn write_trace<W: Write>(w: W, trace: &SimTrace, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    let n = trace.samples.len();
    for (k, s) in trace.samples.iter().enumerate() {
        if k % stride == 0 || k + 1 == n {
            out.write_record(sample_row(s))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &SimTrace, stride: usize) -> Result<()> {
    write_trace(create(path)?, trace, stride).with_context(|| format!("writing {}", path.display()))
}

pub fn read_trace<R: Read>(r: R) -> Result<SimTrace> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        bail!("unexpected trace header {header:?}");
    }
    let mut samples = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 10];
        for (k, field) in rec.iter().enumerate().take(10) {
            v[k] = field
                .parse()
                .with_context(|| format!("row {}: column {}", line + 1, TRACE_HEADER[k]))?;
        }
        samples.push(TraceSample {
            t: v[0],
            state: StateVector::new(v[1], v[2], v[3], v[4]),
            u: v[5],
            u_pid: v[6],
            u_fb: v[7],
            theta_ref: v[8],
            x_ref: v[9],
        });
    }
    Ok(SimTrace::new(samples))
}

pub fn write_nlta_log<W: Write>(w: W, runs: &[NltaRunRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(NLTA_LOG_HEADER)?;
    for r in runs {
        for e in &r.log {
            out.write_record([
                r.run_index.to_string(),
                e.iteration.to_string(),
                fmt_f64(e.omega),
                fmt_f64(e.cost_old),
                fmt_f64(e.cost_new),
                u8::from(e.accepted).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_nlta_log_file(path: &Path, runs: &[NltaRunRecord]) -> Result<()> {
    write_nlta_log(create(path)?, runs).with_context(|| format!("writing {}", path.display()))
}

/// One parsed row of an NLTA log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NltaLogRow {
    pub run: usize,
    pub iter: usize,
    pub omega: f64,
    pub cost_old: f64,
    pub cost_new: f64,
    pub accepted: bool,
}

pub fn read_nlta_log<R: Read>(r: R) -> Result<Vec<NltaLogRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 6 {
            bail!("NLTA log row has {} fields", rec.len());
        }
        rows.push(NltaLogRow {
            run: rec[0].parse()?,
            iter: rec[1].parse()?,
            omega: rec[2].parse()?,
            cost_old: rec[3].parse()?,
            cost_new: rec[4].parse()?,
            accepted: &rec[5] == "1",
        });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_gains(path: &Path, gains: &PidGains) -> Result<()> {
    write_json(path, gains)
}

pub fn read_gains(path: &Path) -> Result<PidGains> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let g: PidGains = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    g.validate()?;
    Ok(g)
}

/// Plain CSV table with preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}
