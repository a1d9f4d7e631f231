use super::{AnalysisError, MetricTable};
use crate::model::round_sig9;
use std::fmt::Write as _;
use std::path::Path;

/// Nine significant digits, shortest form.
pub fn format_value(v: f64) -> String {
    round_sig9(v).to_string()
}

/// Header row is `nranks,benchmark` followed by one `name [unit]` column per series.
pub fn to_csv(table: &MetricTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let unit = table.metric.unit();
    let mut header = vec!["nranks".to_string(), "benchmark".to_string()];
    header.extend(table.columns.iter().map(|c| format!("{c} [{unit}]")));
    w.write_record(&header).expect("in-memory write");
    for row in &table.rows {
        let mut rec = vec![row.nranks.to_string(), row.benchmark.clone()];
        rec.extend(
            row.cells
                .iter()
                .map(|c| c.as_ref().map(|c| format_value(c.value)).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

pub fn emit_csv(table: &MetricTable, path: &Path) -> Result<(), AnalysisError> {
    std::fs::write(path, to_csv(table)).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Line chart with one polyline per column, rows spaced evenly along x.
pub fn to_svg(table: &MetricTable) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let ymax = table
        .rows
        .iter()
        .flat_map(|r| r.cells.iter().flatten().map(|c| c.value))
        .fold(0.0_f64, f64::max);
    let ymax = if ymax > 0.0 { ymax } else { 1.0 };
    let n = table.rows.len();
    let x_at = |i: usize| {
        if n <= 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| top + plot_h * (1.0 - v / ymax);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(table.metric.as_str()));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let (x0, y0, x1) = (left, top + plot_h, left + plot_w);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{top}" x2="{x0}" y2="{y0}" stroke="black"/>"#);
    for (i, row) in table.rows.iter().enumerate() {
        let x = x_at(i);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            row.nranks
        );
    }
    for k in 0..=4 {
        let v = ymax * f64::from(k) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            y_at(v) + 4.0,
            escape(&format_value(v))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">nranks</text>"#,
        left + plot_w / 2.0,
        h - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(table.metric.unit())
    );
    for (c, name) in table.columns.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        let points: Vec<(f64, f64)> = table
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.cells[c].as_ref().map(|cell| (x_at(i), y_at(cell.value))))
            .collect();
        let joined: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            joined.join(" ")
        );
        for (x, y) in &points {
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 16.0 * c as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            w - right + 12.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(table: &MetricTable, path: &Path) -> Result<(), AnalysisError> {
    std::fs::write(path, to_svg(table)).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}
