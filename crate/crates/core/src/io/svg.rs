//! Deterministic SVG plots with a fixed viewport.

use std::fmt::Write as _;

use crate::formulation::Solution;
use crate::model::ProblemInstance;
use crate::sweep::{ParetoPoint, SweepRun};

const W: f64 = 800.0;
const H: f64 = 600.0;
const MARGIN: f64 = 60.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from `[lo, hi]` onto `[a, b]`; a degenerate range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi - lo <= 0.0 {
        (a + b) / 2.0
    } else {
        a + (v - lo) / (hi - lo) * (b - a)
    }
}

fn axes(s: &mut String, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(s, r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000"/>"##);
    let _ = writeln!(s, r##"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000"/>"##);
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 + f * (y1 - y0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#, y0 + 18.0, x.0 + f * (x.1 - x.0));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#, x0 - 6.0, py + 4.0, y.0 + f * (y.1 - y.0));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Stations, spills and assignment edges for scenario `k`.
pub fn scenario_svg(instance: &ProblemInstance, solution: &Solution, k: usize) -> String {
    let lons = instance.stations.iter().map(|s| s.lon).chain(instance.spills.iter().map(|s| s.lon));
    let lats = instance.stations.iter().map(|s| s.lat).chain(instance.spills.iter().map(|s| s.lat));
    let (lon0, lon1) = lons.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lat0, lat1) = lats.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let px = |lon: f64| scale(lon, lon0, lon1, MARGIN, W - MARGIN);
    let py = |lat: f64| scale(lat, lat0, lat1, H - MARGIN, MARGIN);

    let covered = solution.assignment.get(k).map_or(0, |a| a.iter().flatten().count());
    let mut s = header(&format!("Scenario {}: {} of {} spills covered", k + 1, covered, instance.num_spills()));
    let sc = &instance.scenarios[k];
    let vmax = sc.spill_volume.iter().copied().fold(0.0, f64::max).max(1e-12);
    if let Some(assign) = solution.assignment.get(k) {
        for (o, a) in assign.iter().enumerate() {
            if let Some(i) = a {
                let st = &instance.stations[*i];
                let sp = &instance.spills[o];
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#2b6cb0" stroke-width="1.5"/>"##,
                    px(st.lon),
                    py(st.lat),
                    px(sp.lon),
                    py(sp.lat)
                );
            }
        }
    }
    for (o, sp) in instance.spills.iter().enumerate() {
        let r = 3.0 + 9.0 * (sc.spill_volume[o] / vmax).sqrt();
        let is_covered = solution.assignment.get(k).is_some_and(|a| a[o].is_some());
        let fill = if is_covered { "#38a169" } else { "#e53e3e" };
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="{fill}" fill-opacity="0.7" stroke="#000" stroke-width="0.5"/>"##,
            px(sp.lon),
            py(sp.lat)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#, px(sp.lon) + r + 1.0, py(sp.lat) + 3.0, sp.id);
    }
    for (i, st) in instance.stations.iter().enumerate() {
        let open = solution.open.get(i).copied().unwrap_or(false);
        let fill = if open { "#1a202c" } else { "#ffffff" };
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{fill}" stroke="#1a202c" stroke-width="1.5"/>"##,
            px(st.lon) - 6.0,
            py(st.lat) - 6.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px(st.lon) + 9.0, py(st.lat) - 8.0, escape(&st.name));
    }
    s.push_str("</svg>\n");
    s
}

/// Mean coverage per k1 with a one-standard-deviation band.
pub fn k1_coverage_svg(series: &[(f64, f64, f64)]) -> String {
    let mut s = header("Weighted coverage by k1");
    let x = (0.0, 1.0);
    let ymax = series.iter().map(|(_, m, sd)| m + sd).fold(0.0, f64::max).max(1e-12);
    let ymin = series.iter().map(|(_, m, sd)| m - sd).fold(0.0, f64::min);
    let y = (ymin, ymax);
    axes(&mut s, "k1", "coverage value", x, y);
    let px = |v: f64| scale(v, x.0, x.1, MARGIN, W - MARGIN);
    let py = |v: f64| scale(v, y.0, y.1, H - MARGIN, MARGIN);
    if !series.is_empty() {
        let mut band: Vec<String> = series.iter().map(|(k, m, sd)| format!("{:.2},{:.2}", px(*k), py(m + sd))).collect();
        band.extend(series.iter().rev().map(|(k, m, sd)| format!("{:.2},{:.2}", px(*k), py(m - sd))));
        let _ = writeln!(s, r##"<polygon points="{}" fill="#90cdf4" fill-opacity="0.5" stroke="none"/>"##, band.join(" "));
        let line: Vec<String> = series.iter().map(|(k, m, _)| format!("{:.2},{:.2}", px(*k), py(*m))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#2b6cb0" stroke-width="2"/>"##, line.join(" "));
        for (k, m, _) in series {
            let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#2b6cb0"/>"##, px(*k), py(*m));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Normalized cost against normalized coverage, frontier highlighted.
pub fn pareto_svg(runs: &[SweepRun], frontier: &[ParetoPoint]) -> String {
    let mut s = header("Coverage-cost trade-off");
    let x = (0.0, 1.0);
    let y = (0.0, 1.0);
    axes(&mut s, "normalized cost", "normalized coverage", x, y);
    let px = |v: f64| scale(v, x.0, x.1, MARGIN, W - MARGIN);
    let py = |v: f64| scale(v, y.0, y.1, H - MARGIN, MARGIN);
    for r in runs.iter().filter(|r| r.succeeded()) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#a0aec0"/>"##,
            px(r.normalized_cost),
            py(r.normalized_coverage)
        );
    }
    if !frontier.is_empty() {
        let line: Vec<String> = frontier
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.normalized_cost), py(p.normalized_coverage)))
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c53030" stroke-width="2"/>"##, line.join(" "));
        for p in frontier {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#c53030"/>"##,
                px(p.normalized_cost),
                py(p.normalized_coverage)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
