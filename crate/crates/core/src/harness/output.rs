use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::Policy;
use super::sweep::{SweepResult, SweepRow};
use crate::error::HarnessError;

pub const CSV_HEADER: &str = "policy,n_sources,seed,throughput_bps,loss_rate,mean_delay_s";

pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows().len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in result.rows() {
        writeln!(
            out,
            "{},{},{},{:.0},{:.6},{:.6}",
            r.policy, r.n_sources, r.seed, r.throughput_bps, r.loss_rate, r.mean_delay_s
        )
        .expect("write to String");
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    if result.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    write_file(path, &csv_string(result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Throughput,
    LossRate,
}

impl Metric {
    pub fn value(self, r: &SweepRow) -> f64 {
        match self {
            Metric::Throughput => r.throughput_bps,
            Metric::LossRate => r.loss_rate,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput (bit/s)",
            Metric::LossRate => "packet loss rate",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::LossRate => "loss_rate",
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn color(p: Policy) -> &'static str {
    match p {
        Policy::Sp => "#d62728",
        Policy::Dnn => "#1f77b4",
    }
}

fn tick_label(v: f64, metric: Metric) -> String {
    match metric {
        Metric::Throughput if v >= 1e9 => format!("{:.2}G", v / 1e9),
        Metric::Throughput if v >= 1e6 => format!("{:.0}M", v / 1e6),
        Metric::Throughput => format!("{v:.0}"),
        Metric::LossRate => format!("{v:.3}"),
    }
}

/// Line chart of the per-n mean of `metric`, one polyline per policy. The
/// y axis spans `[0, max observed]`.
pub fn plot_svg(result: &SweepResult, metric: Metric) -> Result<String, HarnessError> {
    let mut ns: Vec<usize> = result.rows().iter().map(|r| r.n_sources).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(HarnessError::InsufficientPoints(ns.len()));
    }
    let (x0, x1) = (ns[0] as f64, ns[ns.len() - 1] as f64);
    let curves: Vec<(Policy, Vec<(usize, f64)>)> = result
        .policies()
        .into_iter()
        .map(|p| (p, result.mean_curve(p, |r| metric.value(r))))
        .collect();
    let y_max = curves
        .iter()
        .flat_map(|(_, c)| c.iter().map(|&(_, v)| v))
        .fold(0.0, f64::max);
    let y_top = if y_max > 0.0 { y_max } else { 1.0 };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |n: f64| LEFT + (n - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + ph - v / y_top * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        b = TOP + ph,
        r = LEFT + pw
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}" stroke="black"/>"#,
        b = TOP + ph
    );
    for &n in &ns {
        let x = sx(n as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{b}" x2="{x:.1}" y2="{b2}" stroke="black"/><text x="{x:.1}" y="{t}" text-anchor="middle">{n}</text>"#,
            b = TOP + ph,
            b2 = TOP + ph + 5.0,
            t = TOP + ph + 18.0
        );
    }
    for k in 0..=4 {
        let v = y_top * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{a}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{t}" y="{ty:.1}" text-anchor="end">{label}</text>"#,
            a = LEFT - 5.0,
            t = LEFT - 8.0,
            ty = y + 4.0,
            label = tick_label(v, metric)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" text-anchor="middle">number of source nodes</text>"#,
        x = LEFT + pw / 2.0,
        y = H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">{label}</text>"#,
        y = TOP + ph / 2.0,
        label = metric.label()
    );
    for (p, curve) in &curves {
        let pts: Vec<String> = curve
            .iter()
            .map(|&(n, v)| format!("{:.1},{:.1}", sx(n as f64), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{pts}"><title>{p}</title></polyline>"#,
            c = color(*p),
            pts = pts.join(" ")
        );
    }
    for (i, (p, _)) in curves.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = LEFT + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{ry}" width="14" height="4" fill="{c}"/><text x="{tx}" y="{ty}">{p}</text>"#,
            ry = y - 4.0,
            c = color(*p),
            tx = x + 20.0,
            ty = y + 2.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(result: &SweepResult, metric: Metric, path: &Path) -> Result<(), HarnessError> {
    write_file(path, &plot_svg(result, metric)?)
}
