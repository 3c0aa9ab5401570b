//! Static SVG line charts, one panel per series, sharing the step axis.

use std::fmt::Write as _;

use super::MetricTrajectory;

const WIDTH: f64 = 640.0;
const PANEL: f64 = 150.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const PAD: f64 = 22.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(traj: &MetricTrajectory, title: &str) -> String {
    let panels: Vec<(String, Vec<(u64, f64)>)> = traj
        .series_names()
        .into_iter()
        .map(|n| {
            let s = traj.series(&n);
            (n, s)
        })
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let steps = traj.steps();
    let (x0, x1) = (steps[0] as f64, *steps.last().expect("non-empty") as f64);
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let height = 40.0 + panels.len() as f64 * PANEL;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{MARGIN_L}" y="20" font-size="14">{}</text>"#, escape(title));
    for (k, (name, series)) in panels.iter().enumerate() {
        let top = 40.0 + k as f64 * PANEL;
        let plot_h = PANEL - 2.0 * PAD;
        let lo = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let yspan = if hi > lo { hi - lo } else { 1.0 };
        let px = |s: u64| MARGIN_L + (s as f64 - x0) / xspan * plot_w;
        let py = |v: f64| top + PAD + plot_h - (v - lo) / yspan * plot_h;

        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_L}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
            top + PAD
        );
        let _ = writeln!(out, r#"<text x="{MARGIN_L}" y="{}">{}</text>"#, top + PAD - 6.0, escape(name));
        let _ = writeln!(out, r#"<text x="4" y="{}">{hi:.4}</text>"#, top + PAD + 10.0);
        let _ = writeln!(out, r#"<text x="4" y="{}">{lo:.4}</text>"#, top + PAD + plot_h);
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN_L}" y="{}">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            top + PAD + plot_h + 14.0,
            steps[0],
            WIDTH - MARGIN_R,
            top + PAD + plot_h + 14.0,
            steps.last().expect("non-empty")
        );
        let points: Vec<String> = series
            .iter()
            .map(|&(s, v)| format!("{:.2},{:.2}", px(s), py(v)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
            points.join(" ")
        );
        for &(s, v) in series {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4"/>"##, px(s), py(v));
        }
    }
    out.push_str("</svg>\n");
    out
}
