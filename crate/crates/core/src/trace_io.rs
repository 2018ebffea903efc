//! Trace persistence: one comma-separated file per run with a versioned first
//! line, plus a JSON sidecar holding the run metadata.
//!
//! Floats are written in Rust's shortest round-trip form, so reading and
//! rewriting a trace reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::simulator::{Record, RunMeta, RunTrace};

pub const FORMAT_LINE: &str = "# asyncbo-trace v1";

/// Column names for a `dim`-dimensional trace.
pub fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["sim_time".to_string(), "worker_id".to_string()];
    h.extend((0..dim).map(|j| format!("x_{j}")));
    h.extend(["y_raw", "incumbent", "delta", "mean_lengthscale", "delta_lengthscale"].map(String::from));
    h.extend((0..dim).map(|j| format!("ls_{j}")));
    h.extend(["signal_variance", "noise_variance"].map(String::from));
    h
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::TraceFormat { line, msg: e.to_string() }
}

/// Trace rows as text.
pub fn records_to_string(records: &[Record], dim: usize) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header(dim)).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.sim_time.to_string(), r.worker_id.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend([r.y_raw, r.incumbent, r.delta, r.mean_lengthscale, r.delta_lengthscale].map(|v| v.to_string()));
        row.extend(r.lengthscales.iter().map(f64::to_string));
        row.extend([r.signal_variance, r.noise_variance].map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!("{FORMAT_LINE}\n{}", String::from_utf8(body).expect("ascii output")))
}

/// Parses trace rows; the dimension is taken from the header.
pub fn records_from_str(text: &str) -> Result<(usize, Vec<Record>)> {
    let first = text.lines().next().unwrap_or("");
    if first != FORMAT_LINE {
        return Err(Error::TraceFormat { line: 1, msg: format!("expected '{FORMAT_LINE}', found '{first}'") });
    }
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let cols: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let dim = cols.iter().filter(|c| c.starts_with("x_")).count();
    if cols != header(dim) {
        return Err(Error::TraceFormat { line: 2, msg: format!("unexpected columns {cols:?}") });
    }
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|e| Error::TraceFormat { line, msg: format!("column {}: {e}", cols[i]) })
        };
        let worker_id =
            row[1].parse::<i64>().map_err(|e| Error::TraceFormat { line, msg: format!("worker_id: {e}") })?;
        let x = (0..dim).map(|j| num(2 + j)).collect::<Result<Vec<_>>>()?;
        let o = 2 + dim;
        let ls = (0..dim).map(|j| num(o + 5 + j)).collect::<Result<Vec<_>>>()?;
        records.push(Record {
            sim_time: num(0)?,
            worker_id,
            x,
            y_raw: num(o)?,
            incumbent: num(o + 1)?,
            delta: num(o + 2)?,
            mean_lengthscale: num(o + 3)?,
            delta_lengthscale: num(o + 4)?,
            lengthscales: ls,
            signal_variance: num(o + 5 + dim)?,
            noise_variance: num(o + 6 + dim)?,
        });
    }
    Ok((dim, records))
}

pub fn meta_to_string(meta: &RunMeta) -> Result<String> {
    let mut s = serde_json::to_string_pretty(meta).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn meta_from_str(text: &str) -> Result<RunMeta> {
    serde_json::from_str(text).map_err(|e| Error::TraceFormat { line: e.line(), msg: e.to_string() })
}

/// Sidecar path for a trace file: `run.csv` → `run.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes `csv_path` and its metadata sidecar.
pub fn save_trace(trace: &RunTrace, csv_path: &Path) -> Result<()> {
    fs::write(csv_path, records_to_string(&trace.records, trace.meta.dim)?)?;
    fs::write(meta_path(csv_path), meta_to_string(&trace.meta)?)?;
    Ok(())
}

pub fn load_trace(csv_path: &Path) -> Result<RunTrace> {
    let (dim, records) = records_from_str(&fs::read_to_string(csv_path)?)?;
    let meta = meta_from_str(&fs::read_to_string(meta_path(csv_path))?)?;
    if meta.dim != dim {
        return Err(Error::DimensionMismatch { expected: meta.dim, got: dim });
    }
    Ok(RunTrace { meta, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Rule;
    use crate::optimizer::OptimizerConfig;
    use crate::simulator::{run_async, RunConfig};

    fn small_trace() -> RunTrace {
        let mut c = RunConfig::new("branin-2", Rule::Ucb, 2, 9).with_evals(4);
        c.optimizer = OptimizerConfig { num_candidates_per_dim: 50, num_restarts: 2, ..Default::default() };
        run_async(&c).unwrap()
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            header(2).join(","),
            "sim_time,worker_id,x_0,x_1,y_raw,incumbent,delta,mean_lengthscale,delta_lengthscale,ls_0,ls_1,signal_variance,noise_variance"
        );
    }

    #[test]
    fn text_roundtrip_is_byte_identical() {
        let t = small_trace();
        let text = records_to_string(&t.records, 2).unwrap();
        assert!(text.starts_with(FORMAT_LINE));
        let (dim, back) = records_from_str(&text).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(records_to_string(&back, 2).unwrap(), text);
        let meta = meta_to_string(&t.meta).unwrap();
        assert_eq!(meta_to_string(&meta_from_str(&meta).unwrap()).unwrap(), meta);
    }

    #[test]
    fn file_roundtrip() {
        let t = small_trace();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.csv");
        save_trace(&t, &p).unwrap();
        assert!(dir.path().join("run.meta.json").exists());
        let back = load_trace(&p).unwrap();
        assert_eq!(back.meta, t.meta);
        assert_eq!(records_to_string(&back.records, 2).unwrap(), records_to_string(&t.records, 2).unwrap());
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(records_from_str("sim_time\n"), Err(Error::TraceFormat { line: 1, .. })));
        let bad = format!("{FORMAT_LINE}\nsim_time,worker_id\n");
        assert!(matches!(records_from_str(&bad), Err(Error::TraceFormat { line: 2, .. })));
        let t = small_trace();
        let text = records_to_string(&t.records, 2).unwrap().replacen("0,-1,", "0,abc,", 1);
        assert!(matches!(records_from_str(&text), Err(Error::TraceFormat { .. })));
    }
}
