//! Trace persistence. Column layout is fixed (`k,t,r,y,u,e`); floats are
//! written shortest-round-trip so parsing a file reproduces the in-memory
//! trace exactly. An aborted run appends a `#`-prefixed marker line after
//! the last complete row.

use nnctl_core::metrics::{ControlTrace, TraceRow};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const TRACE_HEADER: &str = "k,t,r,y,u,e";

pub fn write_trace_csv(path: &Path, trace: &ControlTrace, abort_marker: Option<&str>) -> io::Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{TRACE_HEADER}")?;
    for row in &trace.rows {
        writeln!(w, "{},{},{},{},{},{}", row.k, row.t, row.r, row.y, row.u, row.e)?;
    }
    if let Some(marker) = abort_marker {
        writeln!(w, "# aborted: {marker}")?;
    }
    w.flush()
}

/// Parse a trace file; returns the rows and the abort marker, if any.
pub fn read_trace_csv(path: &Path) -> io::Result<(ControlTrace, Option<String>)> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let header = lines.next().ok_or_else(|| bad("empty trace file".into()))??;
    if header != TRACE_HEADER {
        return Err(bad(format!("unexpected trace header: {header}")));
    }
    let mut trace = ControlTrace::default();
    let mut marker = None;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# aborted: ") {
            marker = Some(rest.to_string());
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad float {s}: {e}")));
        trace.push(TraceRow {
            k: fields[0].parse().map_err(|e| bad(format!("bad index: {e}")))?,
            t: parse(fields[1])?,
            r: parse(fields[2])?,
            y: parse(fields[3])?,
            u: parse(fields[4])?,
            e: parse(fields[5])?,
        });
    }
    Ok((trace, marker))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> ControlTrace {
        let mut trace = ControlTrace::default();
        for k in 0..50u64 {
            let t = k as f64 * 0.001;
            let r = (t * 7.3).sin() / 3.0;
            let y = r - 1.0 / (k as f64 + 3.7);
            let u = (k as f64).sqrt() * 0.371;
            trace.push(TraceRow { k, t, r, y, u, e: r - y });
        }
        trace
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = sample_trace();
        write_trace_csv(&path, &trace, None).unwrap();
        let (read, marker) = read_trace_csv(&path).unwrap();
        assert_eq!(trace, read);
        assert!(marker.is_none());
    }

    #[test]
    fn abort_marker_survives_the_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &sample_trace(), Some("singular denominator at step 31")).unwrap();
        let (read, marker) = read_trace_csv(&path).unwrap();
        assert_eq!(read.len(), 50);
        assert_eq!(marker.as_deref(), Some("singular denominator at step 31"));
    }

    #[test]
    fn header_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &sample_trace(), None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,t,r,y,u,e\n"));
    }
}
