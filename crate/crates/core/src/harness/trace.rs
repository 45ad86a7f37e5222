//! Trace files: a `#`-prefixed header followed by a CSV table.
//!
//! ```text
//! # halpern-trace 1
//! # seed = 3
//! # L0 = 2.5
//! # ...
//! # config.begin
//! # [problem]
//! # ...
//! # config.end
//! k,res_norm,step_norm,potential,gamma_k,sigma_k,samples,cum_samples
//! 0,1.25,0.5,0.0,0.0,0.0,0,0
//! ```
//!
//! Missing values (the last row's step, potentials that were not computed)
//! are empty fields. Floats use Rust's shortest round-trip formatting, so
//! parsing a trace gives back the exact values that were written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::halpern::{IterationRecord, TraceSink};

use super::config::ExperimentConfig;

pub const TRACE_MAGIC: &str = "halpern-trace 1";
pub const TRACE_COLUMNS: [&str; 8] = [
    "k",
    "res_norm",
    "step_norm",
    "potential",
    "gamma_k",
    "sigma_k",
    "samples",
    "cum_samples",
];

/// Problem constants echoed in every trace header.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceConstants {
    pub l0: Option<f64>,
    pub l: f64,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub seed: u64,
    pub constants: TraceConstants,
    pub potential_kind: String,
    /// Free-form `key = value` lines (distance to a known root, etc.).
    pub extra: Vec<(String, String)>,
    pub config: Option<ExperimentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub res_norm: f64,
    pub step_norm: Option<f64>,
    pub potential: Option<f64>,
    pub gamma_k: f64,
    pub sigma_k: f64,
    pub samples: u64,
    pub cum_samples: u64,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        TraceRow {
            k: r.k,
            res_norm: r.res_norm,
            step_norm: r.step_norm,
            potential: r.potential,
            gamma_k: r.gamma_k,
            sigma_k: r.sigma_k,
            samples: r.samples,
            cum_samples: r.cum_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub rows: Vec<TraceRow>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn header_lines(h: &TraceHeader) -> Vec<String> {
    let mut out = vec![TRACE_MAGIC.to_string(), format!("seed = {}", h.seed)];
    let c = &h.constants;
    let mut kv = |k: &str, v: Option<f64>| {
        if let Some(v) = v {
            out.push(format!("{k} = {}", fmt_f(v)));
        }
    };
    kv("L0", c.l0);
    kv("L", Some(c.l));
    kv("alpha", c.alpha);
    kv("theta", c.theta);
    kv("kappa", c.kappa);
    out.push(format!("potential = {}", h.potential_kind));
    for (k, v) in &h.extra {
        out.push(format!("{k} = {v}"));
    }
    if let Some(cfg) = &h.config {
        out.push("config.begin".into());
        out.extend(cfg.to_toml().lines().map(str::to_string));
        out.push("config.end".into());
    }
    out
}

fn row_line(r: &TraceRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.k,
        fmt_f(r.res_norm),
        fmt_opt(r.step_norm),
        fmt_opt(r.potential),
        fmt_f(r.gamma_k),
        fmt_f(r.sigma_k),
        r.samples,
        r.cum_samples
    )
}

/// Streams rows to disk as the driver produces them.
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last_k: Option<usize>,
}

impl TraceWriter {
    pub fn create(path: &Path, header: &TraceHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        for line in header_lines(header) {
            if line.is_empty() {
                writeln!(out, "#")?;
            } else {
                writeln!(out, "# {line}")?;
            }
        }
        writeln!(out, "{}", TRACE_COLUMNS.join(","))?;
        out.flush()?;
        Ok(TraceWriter {
            path: path.to_path_buf(),
            out,
            last_k: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_row(&mut self, row: &TraceRow) -> Result<()> {
        if self.last_k.is_some_and(|k| row.k <= k) {
            return Err(Error::invalid(format!(
                "trace rows must increase in k ({} after {})",
                row.k,
                self.last_k.unwrap()
            )));
        }
        self.last_k = Some(row.k);
        writeln!(self.out, "{}", row_line(row))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl TraceSink for TraceWriter {
    fn record(&mut self, row: &IterationRecord) -> Result<()> {
        self.write_row(&TraceRow::from(row))
    }
}

pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<()> {
    let mut w = TraceWriter::create(path, &trace.header)?;
    for r in &trace.rows {
        w.write_row(r)?;
    }
    w.finish()
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let f = File::open(path)?;
    parse_trace(BufReader::new(f))
}

pub fn parse_trace<R: BufRead>(reader: R) -> Result<TraceFile> {
    let mut header = TraceHeader {
        seed: 0,
        constants: TraceConstants::default(),
        potential_kind: String::new(),
        extra: Vec::new(),
        config: None,
    };
    let mut saw_magic = false;
    let mut saw_l = false;
    let mut in_config = false;
    let mut config_text = String::new();
    let mut columns_seen = false;
    let mut rows: Vec<TraceRow> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let data_err = |m: String| Error::Data {
            line: lineno,
            message: m,
        };
        if let Some(rest) = line.strip_prefix('#') {
            if columns_seen {
                return Err(data_err("header line after the column row".into()));
            }
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            if in_config {
                if rest == "config.end" {
                    in_config = false;
                    let cfg = ExperimentConfig::from_toml_str(&config_text)
                        .map_err(|e| data_err(format!("config echo: {e}")))?;
                    header.config = Some(cfg);
                } else {
                    config_text.push_str(rest);
                    config_text.push('\n');
                }
                continue;
            }
            if rest == TRACE_MAGIC {
                saw_magic = true;
                continue;
            }
            if rest == "config.begin" {
                in_config = true;
                continue;
            }
            let Some((key, value)) = rest.split_once(" = ") else {
                return Err(data_err(format!("malformed header line '{rest}'")));
            };
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|e| data_err(format!("{key}: {e}")))
            };
            let c = &mut header.constants;
            match key {
                "seed" => {
                    header.seed = value
                        .parse()
                        .map_err(|e| data_err(format!("seed: {e}")))?
                }
                "L0" => c.l0 = Some(num()?),
                "L" => {
                    c.l = num()?;
                    saw_l = true;
                }
                "alpha" => c.alpha = Some(num()?),
                "theta" => c.theta = Some(num()?),
                "kappa" => c.kappa = Some(num()?),
                "potential" => header.potential_kind = value.to_string(),
                _ => header.extra.push((key.to_string(), value.to_string())),
            }
            continue;
        }
        if !columns_seen {
            if !saw_magic {
                return Err(data_err("missing trace header".into()));
            }
            if in_config {
                return Err(data_err("unterminated config echo".into()));
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != TRACE_COLUMNS {
                return Err(data_err(format!("unexpected columns '{line}'")));
            }
            columns_seen = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != TRACE_COLUMNS.len() {
            return Err(data_err(format!(
                "expected {} fields, found {}",
                TRACE_COLUMNS.len(),
                f.len()
            )));
        }
        let float = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| data_err(format!("{name}: {e}")))
        };
        let opt = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                float(s, name).map(Some)
            }
        };
        let int = |s: &str, name: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|e| data_err(format!("{name}: {e}")))
        };
        let row = TraceRow {
            k: int(f[0], "k")? as usize,
            res_norm: float(f[1], "res_norm")?,
            step_norm: opt(f[2], "step_norm")?,
            potential: opt(f[3], "potential")?,
            gamma_k: float(f[4], "gamma_k")?,
            sigma_k: float(f[5], "sigma_k")?,
            samples: int(f[6], "samples")?,
            cum_samples: int(f[7], "cum_samples")?,
        };
        if rows.last().is_some_and(|p| row.k <= p.k) {
            return Err(data_err("rows must be strictly increasing in k".into()));
        }
        rows.push(row);
    }
    if !saw_magic || !columns_seen {
        return Err(Error::Data {
            line: 0,
            message: "incomplete trace file".into(),
        });
    }
    if !saw_l {
        return Err(Error::Data {
            line: 0,
            message: "trace header lacks L".into(),
        });
    }
    Ok(TraceFile { header, rows })
}

/// Per-`k` statistics of `res_norm²` across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    /// Number of traces that reached `k`.
    pub count: usize,
    pub mean_res_sq: f64,
    /// Unbiased sample variance; 0 for a single trace.
    pub var_res_sq: f64,
    pub mean_cum_samples: f64,
}

/// Aggregates traces in the given order. Rows are matched by `k`.
pub fn aggregate(traces: &[TraceFile]) -> Vec<AggregateRow> {
    let max_len = traces.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(max_len);
    let mut cursors = vec![0usize; traces.len()];
    loop {
        let next_k = traces
            .iter()
            .zip(&cursors)
            .filter_map(|(t, &c)| t.rows.get(c).map(|r| r.k))
            .min();
        let Some(k) = next_k else { break };
        let mut vals = Vec::new();
        let mut cum = Vec::new();
        for (t, c) in traces.iter().zip(cursors.iter_mut()) {
            if let Some(r) = t.rows.get(*c).filter(|r| r.k == k) {
                vals.push(r.res_norm * r.res_norm);
                cum.push(r.cum_samples as f64);
                *c += 1;
            }
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        out.push(AggregateRow {
            k,
            count: vals.len(),
            mean_res_sq: mean,
            var_res_sq: var,
            mean_cum_samples: cum.iter().sum::<f64>() / n,
        });
    }
    out
}

pub const AGGREGATE_COLUMNS: [&str; 5] =
    ["k", "count", "mean_res_sq", "var_res_sq", "mean_cum_samples"];

pub fn write_aggregate(path: &Path, rows: &[AggregateRow], seeds: &[u64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    writeln!(out, "# seeds = {}", seeds.join(" "))?;
    writeln!(out, "{}", AGGREGATE_COLUMNS.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            r.count,
            fmt_f(r.mean_res_sq),
            fmt_f(r.var_res_sq),
            fmt_f(r.mean_cum_samples)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |m: String| Error::Data { line, message: m };
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| bad("short row".into()))?
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        rows.push(AggregateRow {
            k: f(0)? as usize,
            count: f(1)? as usize,
            mean_res_sq: f(2)?,
            var_res_sq: f(3)?,
            mean_cum_samples: f(4)?,
        });
    }
    Ok(rows)
}
