//! Trace, metadata, metrics and plot-data files.
//!
//! Trace CSV: header `k,transmitter,x_0..x_{n-1},y_0..y_{n-1},z_0..z_{n-1},V,delivered`,
//! one row per step. `transmitter` is empty on row 0. `delivered` is an
//! `n`-character string of `0`/`1`, character `i` standing for agent `i`.
//! Reals are written in shortest round-trip form, so re-reading is exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::median;
use crate::engine::{Observer, StepRecord, Trace, TraceRow};
use crate::error::{Error, Result};

/// A file written under a temporary name and renamed into place on commit.
/// Dropping it uncommitted removes the temporary.
pub struct AtomicFile {
    target: PathBuf,
    temp: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl AtomicFile {
    pub fn create(target: &Path) -> Result<Self> {
        let mut name = target
            .file_name()
            .ok_or_else(|| Error::Usage(format!("{} is not a file path", target.display())))?
            .to_os_string();
        name.push(".tmp");
        let temp = target.with_file_name(name);
        let writer = BufWriter::new(File::create(&temp)?);
        Ok(Self {
            target: target.to_path_buf(),
            temp,
            writer: Some(writer),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        self.writer.as_mut().expect("writer present until commit")
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        let mut writer = self.writer.take().expect("writer present until commit");
        writer.flush()?;
        writer.get_ref().sync_all()?;
        drop(writer);
        fs::rename(&self.temp, &self.target)?;
        Ok(self.target.clone())
    }
}

impl Drop for AtomicFile {
    fn drop(&mut self) {
        if self.writer.take().is_some() {
            let _ = fs::remove_file(&self.temp);
        }
    }
}

pub fn write_atomic(target: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let mut file = AtomicFile::create(target)?;
    file.writer().write_all(bytes)?;
    file.commit()
}

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string(), "transmitter".to_string()];
    for prefix in ["x", "y", "z"] {
        h.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    h.push("V".into());
    h.push("delivered".into());
    h
}

fn delivered_mask(n: usize, delivered: &[usize]) -> String {
    let mut mask = vec![b'0'; n];
    for &i in delivered {
        mask[i] = b'1';
    }
    String::from_utf8(mask).expect("ascii")
}

fn record_fields(r: &StepRecord<'_>) -> Vec<String> {
    let n = r.x.len();
    let mut f = Vec::with_capacity(3 * n + 4);
    f.push(r.k.to_string());
    f.push(r.transmitter.map(|j| j.to_string()).unwrap_or_default());
    for series in [r.x, r.y, r.z] {
        f.extend(series.iter().map(f64::to_string));
    }
    f.push(r.lyapunov.to_string());
    f.push(delivered_mask(n, r.delivered));
    f
}

/// Streams trace rows to a CSV file as the run progresses.
pub struct TraceCsvWriter {
    file: AtomicFile,
    n: usize,
    header_written: bool,
    error: Option<Error>,
}

impl TraceCsvWriter {
    pub fn create(path: &Path, n: usize) -> Result<Self> {
        Ok(Self {
            file: AtomicFile::create(path)?,
            n,
            header_written: false,
            error: None,
        })
    }

    fn write_line(&mut self, fields: &[String]) -> std::io::Result<()> {
        let w = self.file.writer();
        w.write_all(fields.join(",").as_bytes())?;
        w.write_all(b"\n")
    }

    pub fn finish(self) -> Result<PathBuf> {
        if let Some(e) = self.error {
            return Err(e);
        }
        self.file.commit()
    }
}

impl Observer for TraceCsvWriter {
    fn observe(&mut self, r: &StepRecord<'_>) {
        if self.error.is_some() {
            return;
        }
        let mut result = Ok(());
        if !self.header_written {
            result = self.write_line(&trace_header(self.n));
            self.header_written = true;
        }
        if result.is_ok() {
            result = self.write_line(&record_fields(r));
        }
        if let Err(e) = result {
            self.error = Some(e.into());
        }
    }
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<PathBuf> {
    let mut w = TraceCsvWriter::create(path, trace.n)?;
    for row in &trace.rows {
        w.observe(&StepRecord {
            k: row.k,
            transmitter: row.transmitter,
            delivered: &row.delivered,
            x: &row.x,
            y: &row.y,
            z: &row.z,
            lyapunov: row.lyapunov,
            band_violations: &row.band_violations,
        });
    }
    w.finish()
}

/// Sidecar describing how a trace was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub format_version: u32,
    pub generator: String,
    pub scenario_name: String,
    pub n: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub drop_probability: f64,
    /// `2 alpha / r_i`; violation flags are recomputed from these on read.
    pub y_bands: Vec<f64>,
    /// The scenario as it was run, in scenario-file form.
    pub scenario: toml::Value,
}

pub const TRACE_FORMAT_VERSION: u32 = 1;

pub fn generator_tag() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_metadata(path: &Path) -> Result<TraceMetadata> {
    let text = fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads a trace CSV back; `y_bands` come from the sidecar.
pub fn read_trace_csv(path: &Path, y_bands: &[f64]) -> Result<Trace> {
    let n = y_bands.len();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != trace_header(n) {
        return Err(Error::parse(
            path,
            format!("header does not describe {n} agents"),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let line = line + 2;
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let bad = |what: &str| Error::parse(path, format!("line {line}: bad {what}"));
        let real = |idx: usize| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|_| bad(&trace_header(n)[idx]))
        };
        let k = record[0].parse::<usize>().map_err(|_| bad("k"))?;
        let transmitter = match &record[1] {
            "" => None,
            s => Some(s.parse::<usize>().map_err(|_| bad("transmitter"))?),
        };
        let series = |offset: usize| (0..n).map(|i| real(offset + i)).collect::<Result<Vec<_>>>();
        let x = series(2)?;
        let y = series(2 + n)?;
        let z = series(2 + 2 * n)?;
        let lyapunov = real(2 + 3 * n)?;
        let mask = &record[3 + 3 * n];
        if mask.len() != n || !mask.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(bad("delivered mask"));
        }
        let delivered = mask
            .bytes()
            .enumerate()
            .filter(|(_, b)| *b == b'1')
            .map(|(i, _)| i)
            .collect();
        let band_violations = y.iter().zip(y_bands).map(|(v, b)| v.abs() > *b).collect();
        rows.push(TraceRow {
            k,
            transmitter,
            delivered,
            x,
            y,
            z,
            lyapunov,
            band_violations,
        });
    }
    Ok(Trace {
        n,
        y_bands: y_bands.to_vec(),
        rows,
    })
}

/// Reads `trace.csv` together with its `trace.meta.json` sidecar.
pub fn read_trace(csv_path: &Path, meta_path: &Path) -> Result<Trace> {
    let meta = read_metadata(meta_path)?;
    read_trace_csv(csv_path, &meta.y_bands)
}

/// Plot-ready series, decimated to every `stride`-th row (the last row is
/// always kept).
pub struct PlotWriter {
    stride: usize,
    total_rows: usize,
    alpha_over_r: Vec<f64>,
    band: Option<f64>,
    x: AtomicFile,
    y: AtomicFile,
    z: AtomicFile,
    v: AtomicFile,
    started: bool,
    error: Option<Error>,
}

/// Upper bound on rows per plot file.
pub const MAX_PLOT_ROWS: usize = 20_000;

impl PlotWriter {
    /// `alpha_over_r` are the expected stationary `|y_i|`; `band` is the
    /// instability band drawn next to the Lyapunov series, when defined.
    pub fn create(
        dir: &Path,
        total_steps: usize,
        alpha_over_r: Vec<f64>,
        band: Option<f64>,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let total_rows = total_steps + 1;
        Ok(Self {
            stride: total_rows.div_ceil(MAX_PLOT_ROWS).max(1),
            total_rows,
            alpha_over_r,
            band,
            x: AtomicFile::create(&dir.join("x.csv"))?,
            y: AtomicFile::create(&dir.join("y.csv"))?,
            z: AtomicFile::create(&dir.join("z.csv"))?,
            v: AtomicFile::create(&dir.join("lyapunov.csv"))?,
            started: false,
            error: None,
        })
    }

    fn headers(&mut self, n: usize) -> std::io::Result<()> {
        let names = |p: &str| {
            (0..n)
                .map(|i| format!("{p}_{i}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(self.x.writer(), "k,{},median_low,median_high", names("x"))?;
        let refs = (0..n)
            .map(|i| format!("alpha_over_r_{i}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(self.y.writer(), "k,{},{refs}", names("y"))?;
        writeln!(self.z.writer(), "k,{},median", names("z"))?;
        writeln!(self.v.writer(), "k,V,spread_x,instability_band")
    }

    fn row(&mut self, r: &StepRecord<'_>) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let m = median(r.z).expect("finite measurements");
        writeln!(
            self.x.writer(),
            "{},{},{},{}",
            r.k,
            join(r.x),
            m.low,
            m.high
        )?;
        let refs = join(&self.alpha_over_r);
        writeln!(self.y.writer(), "{},{},{refs}", r.k, join(r.y))?;
        writeln!(self.z.writer(), "{},{},{}", r.k, join(r.z), m.point)?;
        let spread = r.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - r.x.iter().copied().fold(f64::INFINITY, f64::min);
        let band = self.band.map(|b| b.to_string()).unwrap_or_default();
        writeln!(self.v.writer(), "{},{},{spread},{band}", r.k, r.lyapunov)
    }

    pub fn finish(self) -> Result<Vec<PathBuf>> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(vec![
            self.x.commit()?,
            self.y.commit()?,
            self.z.commit()?,
            self.v.commit()?,
        ])
    }
}

impl Observer for PlotWriter {
    fn observe(&mut self, r: &StepRecord<'_>) {
        if self.error.is_some() {
            return;
        }
        if !(r.k.is_multiple_of(self.stride) || r.k + 1 == self.total_rows) {
            return;
        }
        let mut result = Ok(());
        if !self.started {
            self.started = true;
            result = self.headers(r.x.len());
        }
        if result.is_ok() {
            result = self.row(r);
        }
        if let Err(e) = result {
            self.error = Some(e.into());
        }
    }
}
