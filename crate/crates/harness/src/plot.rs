//! Static SVG line charts regenerated from trace data: reference versus
//! both outputs, and per-controller absolute error, over a requested time
//! range. Pure file output.

use crate::run::{AMPC_ID, HDLNNC_ID};
use nnctl_core::metrics::ControlTrace;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
/// Polylines are decimated to at most this many points.
const MAX_POINTS: usize = 2000;

struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if let (Some(&last), Some(&tail)) = (out.last(), points.last()) {
        if last != tail {
            out.push(tail);
        }
    }
    out
}

fn render_chart(title: &str, series: &[Series]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !(y_max > y_min) {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
    let sx = (WIDTH - 2.0 * MARGIN) / (x_max - x_min).max(1e-12);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y_max - y_min);
    let map = |x: f64, y: f64| -> (f64, f64) {
        (MARGIN + (x - x_min) * sx, HEIGHT - MARGIN - (y - y_min) * sy)
    };

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // Axes.
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{MARGIN}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{x_min:.2}</text>\n",
        HEIGHT - MARGIN / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{x_max:.2}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{y0}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{y_min:.3}</text>\n",
        MARGIN - 6.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{MARGIN}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{y_max:.3}</text>\n",
        MARGIN - 6.0
    ));
    // Series and legend.
    for (i, s) in series.iter().enumerate() {
        let pts: String = decimate(&s.points)
            .iter()
            .map(|&(x, y)| {
                let (px, py) = map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{pts}\"/>\n",
            s.color
        ));
        let ly = MARGIN + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            WIDTH - MARGIN - 150.0,
            WIDTH - MARGIN - 120.0,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN - 112.0,
            ly + 4.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn range_tag(range: (f64, f64)) -> String {
    let fmt = |v: f64| format!("{v:.2}").replace('.', "p").replace('-', "m");
    format!("{}_{}", fmt(range.0), fmt(range.1))
}

fn window_points(trace: &ControlTrace, range: (f64, f64), value: impl Fn(&nnctl_core::metrics::TraceRow) -> f64) -> Vec<(f64, f64)> {
    trace
        .rows
        .iter()
        .filter(|row| row.t >= range.0 - 1e-9 && row.t <= range.1 + 1e-9)
        .map(|row| (row.t, value(row)))
        .collect()
}

/// Write the outputs chart and the absolute-error chart for one time range.
/// Fails with a message when the range is outside any trace.
pub fn emit_plots(
    out_dir: &Path,
    traces: &BTreeMap<String, ControlTrace>,
    range: (f64, f64),
) -> Result<Vec<PathBuf>, String> {
    if !(range.0 < range.1) {
        return Err(format!("empty plot range [{}, {}]", range.0, range.1));
    }
    for (id, trace) in traces {
        let span = match (trace.rows.first(), trace.rows.last()) {
            (Some(first), Some(last)) => (first.t, last.t),
            _ => return Err(format!("{id}: empty trace")),
        };
        if range.0 < span.0 - 1e-9 || range.1 > span.1 + 1e-9 {
            return Err(format!(
                "plot range [{}, {}] outside trace span [{}, {}]",
                range.0, range.1, span.0, span.1
            ));
        }
    }

    let hdl = &traces[HDLNNC_ID];
    let ampc = &traces[AMPC_ID];
    let outputs = vec![
        Series {
            label: "reference".into(),
            color: "#555555",
            points: window_points(hdl, range, |r| r.r),
        },
        Series {
            label: HDLNNC_ID.into(),
            color: "#c0392b",
            points: window_points(hdl, range, |r| r.y),
        },
        Series {
            label: AMPC_ID.into(),
            color: "#2471a3",
            points: window_points(ampc, range, |r| r.y),
        },
    ];
    let errors = vec![
        Series {
            label: format!("|e| {HDLNNC_ID}"),
            color: "#c0392b",
            points: window_points(hdl, range, |r| r.e.abs()),
        },
        Series {
            label: format!("|e| {AMPC_ID}"),
            color: "#2471a3",
            points: window_points(ampc, range, |r| r.e.abs()),
        },
    ];

    let tag = range_tag(range);
    let outputs_path = out_dir.join(format!("plot_{tag}_outputs.svg"));
    let errors_path = out_dir.join(format!("plot_{tag}_abs_error.svg"));
    let title = format!("reference and outputs, {}..{} s", range.0, range.1);
    std::fs::write(&outputs_path, render_chart(&title, &outputs)).map_err(|e| e.to_string())?;
    let title = format!("absolute error, {}..{} s", range.0, range.1);
    std::fs::write(&errors_path, render_chart(&title, &errors)).map_err(|e| e.to_string())?;
    Ok(vec![outputs_path, errors_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nnctl_core::metrics::TraceRow;

    fn trace(n: u64) -> ControlTrace {
        let mut t = ControlTrace::default();
        for k in 0..=n {
            let time = k as f64 * 0.01;
            t.push(TraceRow {
                k,
                t: time,
                r: (time).sin(),
                y: (time - 0.05).sin(),
                u: 0.1,
                e: (time).sin() - (time - 0.05).sin(),
            });
        }
        t
    }

    fn traces() -> BTreeMap<String, ControlTrace> {
        let mut m = BTreeMap::new();
        m.insert(HDLNNC_ID.to_string(), trace(1000));
        m.insert(AMPC_ID.to_string(), trace(1000));
        m
    }

    /// Minimal well-formedness check: tags balance and attributes are quoted.
    fn assert_well_formed_xml(text: &str) {
        assert!(text.starts_with("<?xml"));
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('<') {
            rest = &rest[open + 1..];
            if rest.starts_with('?') {
                continue;
            }
            let end = rest.find('>').expect("unterminated tag");
            let tag = &rest[..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let top = stack.pop().unwrap_or_else(|| panic!("unmatched </{name}>"));
                assert_eq!(top, name, "mismatched closing tag");
            } else if !tag.ends_with('/') {
                let name: String =
                    tag.chars().take_while(|c| !c.is_whitespace() && *c != '>').collect();
                stack.push(name);
            }
            // Quoted attributes come in pairs of double quotes.
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn plots_are_written_and_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plots(dir.path(), &traces(), (2.0, 6.0)).unwrap();
        assert_eq!(paths.len(), 2);
        for path in paths {
            let text = std::fs::read_to_string(path).unwrap();
            assert_well_formed_xml(&text);
            assert!(text.contains("<polyline"));
        }
    }

    #[test]
    fn out_of_span_range_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plots(dir.path(), &traces(), (5.0, 50.0)).unwrap_err();
        assert!(err.contains("outside trace span"));
    }

    #[test]
    fn decimation_caps_point_count_and_keeps_endpoints() {
        let points: Vec<(f64, f64)> = (0..10_000).map(|i| (i as f64, (i as f64).sin())).collect();
        let thin = decimate(&points);
        assert!(thin.len() <= MAX_POINTS + 1);
        assert_eq!(thin.first(), points.first().as_ref().copied());
        assert_eq!(thin.last(), points.last().as_ref().copied());
    }
}
