//! Report emission: the windowed indices as JSON for machines and as a
//! fixed-width text table for humans, the smaller value of each
//! controller pair flagged with `*`.

use crate::run::{AMPC_ID, HDLNNC_ID};
use nnctl_core::metrics::IcqiReport;
use std::io;
use std::path::Path;

pub fn write_report_json(path: &Path, report: &IcqiReport) -> io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report).expect("report serializes"))
}

fn format_cell(value: Option<f64>, winner: bool) -> String {
    match value {
        Some(v) => format!("{v:.4e}{}", if winner { "*" } else { " " }),
        None => "-".into(),
    }
}

/// Fixed-width table, one row per window. Column order: window, then
/// IAE/ISE/ITAE each as a (hdlnnc, ampc) pair.
pub fn render_text_table(report: &IcqiReport, windows: &[(f64, f64)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14}{:<14}{:<14}{:<14}{:<14}{:<14}{:<14}\n",
        "window_s", "iae_hdlnnc", "iae_ampc", "ise_hdlnnc", "ise_ampc", "itae_hdlnnc", "itae_ampc",
    ));
    for &window in windows {
        let h = report.entry(HDLNNC_ID, window);
        let a = report.entry(AMPC_ID, window);
        let label = format!("{}:{}", window.0, window.1);
        let pair = |hv: Option<f64>, av: Option<f64>| -> (String, String) {
            let h_wins = matches!((hv, av), (Some(x), Some(y)) if x <= y);
            let a_wins = matches!((hv, av), (Some(x), Some(y)) if y <= x);
            (format_cell(hv, h_wins), format_cell(av, a_wins))
        };
        let (iae_h, iae_a) = pair(h.map(|e| e.iae), a.map(|e| e.iae));
        let (ise_h, ise_a) = pair(h.map(|e| e.ise), a.map(|e| e.ise));
        let (itae_h, itae_a) = pair(h.map(|e| e.itae), a.map(|e| e.itae));
        out.push_str(&format!(
            "{label:<14}{iae_h:<14}{iae_a:<14}{ise_h:<14}{ise_a:<14}{itae_h:<14}{itae_a:<14}\n"
        ));
    }
    out
}

pub fn write_report_text(path: &Path, report: &IcqiReport, windows: &[(f64, f64)]) -> io::Result<()> {
    std::fs::write(path, render_text_table(report, windows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nnctl_core::metrics::IcqiEntry;

    fn sample_report() -> IcqiReport {
        IcqiReport {
            entries: vec![
                IcqiEntry {
                    window: (0.0, 8.0),
                    controller: HDLNNC_ID.into(),
                    iae: 4.32e-2,
                    ise: 4.08e-4,
                    itae: 1.58e-1,
                },
                IcqiEntry {
                    window: (0.0, 8.0),
                    controller: AMPC_ID.into(),
                    iae: 7.53e-2,
                    ise: 4.45e-2,
                    itae: 2.86e-2,
                },
            ],
        }
    }

    #[test]
    fn text_table_matches_the_golden_layout() {
        let table = render_text_table(&sample_report(), &[(0.0, 8.0)]);
        let expected = "\
window_s      iae_hdlnnc    iae_ampc      ise_hdlnnc    ise_ampc      itae_hdlnnc   itae_ampc     \n\
0:8           4.3200e-2*    7.5300e-2     4.0800e-4*    4.4500e-2     1.5800e-1     2.8600e-2*    \n";
        assert_eq!(table, expected);
    }

    #[test]
    fn empty_window_list_renders_header_only() {
        let table = render_text_table(&sample_report(), &[]);
        assert_eq!(table.lines().count(), 1);
    }

    #[test]
    fn report_cells_pass_through_metric_values() {
        let report = sample_report();
        let entry = report.entry(HDLNNC_ID, (0.0, 8.0)).unwrap();
        assert_eq!(entry.iae, 4.32e-2);
        assert_eq!(entry.ise, 4.08e-4);
        assert_eq!(entry.itae, 1.58e-1);
    }
}
