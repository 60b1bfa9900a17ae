//! Static SVG charts of benchmark metrics: a TDR-vs-FDR scatter and an RMSE
//! strip chart per (scenario, internal sample size).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{BenchMethod, MetricsRow, Scenario};

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
];

fn method_order(name: &str) -> (usize, String) {
    let rank = name.parse::<BenchMethod>().ok().and_then(|m| BenchMethod::TABLE.iter().position(|t| *t == m));
    (rank.unwrap_or(usize::MAX), name.to_string())
}

fn methods_of(rows: &[&MetricsRow]) -> Vec<String> {
    let set: BTreeSet<(usize, String)> = rows.iter().map(|r| method_order(&r.method)).collect();
    set.into_iter().map(|(_, m)| m).collect()
}

fn color(methods: &[String], m: &str) -> &'static str {
    PALETTE[methods.iter().position(|x| x == m).unwrap_or(0) % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    y_max: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    fn new(y_max: f64) -> Self {
        Frame {
            y_max,
            plot_w: WIDTH - LEFT - RIGHT,
            plot_h: HEIGHT - TOP - BOTTOM,
        }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + v * self.plot_w
    }

    fn y(&self, v: f64) -> f64 {
        TOP + self.plot_h * (1.0 - v / self.y_max)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0 - RIGHT / 2.0 + LEFT / 2.0,
        escape(title)
    );
}

fn legend(out: &mut String, methods: &[String]) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, m) in methods.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<circle cx="{x}" cy="{y}" r="5" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            color(methods, m),
            x + 10.0,
            y + 4.0,
            escape(m)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) {
    let (x0, x1, y0, y1) = (f.x(0.0), f.x(1.0), f.y(0.0), f.y(f.y_max));
    let _ = writeln!(
        out,
        r#"<g class="axes" data-y-min="0" data-y-max="{}" stroke="black">"#,
        f.y_max
    );
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(out, "</g>");
    for (v, label) in x_ticks {
        let x = f.x(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            escape(label)
        );
    }
    for i in 0..=4 {
        let v = f.y_max * i as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            trim(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

fn usable<'a>(rows: &'a [MetricsRow], scenario: &str, n: usize) -> Vec<&'a MetricsRow> {
    rows.iter()
        .filter(|r| r.ok() && r.scenario == scenario && r.n_internal == n)
        .collect()
}

/// TDR against FDR, one marker per row; both axes span [0, 1].
pub fn scatter_svg(rows: &[MetricsRow], scenario: &str, n_internal: usize) -> String {
    let rows: Vec<&MetricsRow> = usable(rows, scenario, n_internal)
        .into_iter()
        .filter(|r| r.fdr.is_finite() && r.tdr.is_finite())
        .collect();
    let methods = methods_of(&rows);
    let f = Frame::new(1.0);
    let mut out = String::new();
    header(&mut out, &format!("TDR vs FDR: {scenario}, n = {n_internal}"));
    let ticks: Vec<(f64, String)> = (0..=4).map(|i| (i as f64 / 4.0, trim(i as f64 / 4.0))).collect();
    axes(&mut out, &f, "FDR", "TDR", &ticks);
    let _ = writeln!(out, r#"<g class="data" data-x-min="0" data-x-max="1">"#);
    for r in &rows {
        let _ = writeln!(
            out,
            r#"<circle class="marker" data-method="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{}" fill-opacity="0.6"/>"#,
            escape(&r.method),
            f.x(r.fdr.clamp(0.0, 1.0)),
            f.y(r.tdr.clamp(0.0, 1.0)),
            color(&methods, &r.method)
        );
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, &methods);
    out.push_str("</svg>\n");
    out
}

/// RMSE per method, one marker per row, y-axis from 0.
pub fn rmse_svg(rows: &[MetricsRow], scenario: &str, n_internal: usize) -> String {
    let rows: Vec<&MetricsRow> = usable(rows, scenario, n_internal)
        .into_iter()
        .filter(|r| r.rmse.is_finite())
        .collect();
    let methods = methods_of(&rows);
    let top = rows.iter().map(|r| r.rmse).fold(0.0, f64::max);
    let y_max = if top > 0.0 { nice_ceiling(top) } else { 1.0 };
    let f = Frame::new(y_max);
    let slot = |i: usize| (i as f64 + 0.5) / methods.len().max(1) as f64;
    let ticks: Vec<(f64, String)> = methods.iter().enumerate().map(|(i, m)| (slot(i), m.clone())).collect();
    let mut out = String::new();
    header(&mut out, &format!("RMSE: {scenario}, n = {n_internal}"));
    axes(&mut out, &f, "method", "RMSE", &ticks);
    let _ = writeln!(out, r#"<g class="data">"#);
    for (i, m) in methods.iter().enumerate() {
        let vals: Vec<f64> = rows.iter().filter(|r| &r.method == m).map(|r| r.rmse).collect();
        let cx = f.x(slot(i));
        for (j, v) in vals.iter().enumerate() {
            // deterministic horizontal jitter
            let jitter = ((j * 37) % 21) as f64 - 10.0;
            let _ = writeln!(
                out,
                r#"<circle class="marker" data-method="{}" cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.5"/>"#,
                escape(m),
                cx + jitter,
                f.y(*v),
                color(&methods, m)
            );
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let _ = writeln!(
            out,
            r#"<line class="mean" x1="{:.2}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - 16.0,
            cx + 16.0,
            f.y(mean),
            f.y(mean)
        );
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, &methods);
    out.push_str("</svg>\n");
    out
}

fn nice_ceiling(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * mag >= v {
            return step * mag;
        }
    }
    10.0 * mag
}

/// Writes both charts for every (scenario, n) present in `rows`.
pub fn write_report(rows: &[MetricsRow], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("metrics table is empty".into()));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cells: BTreeSet<(usize, usize, String)> = rows
        .iter()
        .map(|r| {
            let order = r.scenario.parse::<Scenario>().map_or(usize::MAX, |s| s.number());
            (order, r.n_internal, r.scenario.clone())
        })
        .collect();
    let mut written = Vec::new();
    for (_, n, scenario) in cells {
        let safe: String = scenario.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        for (kind, svg) in [
            ("tdr_fdr", scatter_svg(rows, &scenario, n)),
            ("rmse", rmse_svg(rows, &scenario, n)),
        ] {
            let p = dir.join(format!("{kind}_{safe}_n{n}.svg"));
            std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}
