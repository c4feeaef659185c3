use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::motion::nyquist_limit;

use super::AggregateRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Which ratio a chart shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    Rpe,
    Ssim,
}

impl ChartKind {
    fn title(self) -> &'static str {
        match self {
            Self::Rpe => "RPE ratio (after / before)",
            Self::Ssim => "SSIM ratio (after / before)",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Rpe => "rpe_ratio.svg",
            Self::Ssim => "ssim_ratio.svg",
        }
    }

    fn value(self, r: &AggregateRow) -> (f64, f64) {
        match self {
            Self::Rpe => (r.rpe_ratio_mean, r.rpe_ratio_ci95),
            Self::Ssim => (r.ssim_ratio_mean, r.ssim_ratio_ci95),
        }
    }
}

/// Log-scaled x axis and linear y axis mapped onto the plot area.
struct Axes {
    log_lo: f64,
    log_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Axes {
    fn x(&self, f: f64) -> f64 {
        LEFT + (f.log10() - self.log_lo) / (self.log_hi - self.log_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Renders one self-contained SVG chart of a ratio against the cutoff
/// frequency: one series per node count with a shaded 95% band, gray dashed
/// lines at each node count's Nyquist limit and at 0.5, and a reference line
/// at ratio 1.
pub fn render_chart(rows: &[AggregateRow], node_counts: &[usize], n_projections: usize, kind: ChartKind) -> String {
    let mut verticals: Vec<f64> = node_counts.iter().map(|&n| nyquist_limit(n, n_projections)).collect();
    verticals.push(0.5);
    let xs = rows.iter().map(|r| r.cutoff).chain(verticals.iter().copied());
    let (f_lo, f_hi) = xs.fold((f64::INFINITY, 0.0_f64), |(a, b), f| (a.min(f), b.max(f)));
    let (f_lo, f_hi) = if f_lo.is_finite() && f_hi > f_lo { (f_lo, f_hi) } else { (1e-3, 0.5) };
    let mut y_lo: f64 = 1.0;
    let mut y_hi: f64 = 1.0;
    for r in rows {
        let (m, h) = kind.value(r);
        if m.is_finite() {
            y_lo = y_lo.min(m - h);
            y_hi = y_hi.max(m + h);
        }
    }
    let pad = 0.08 * (y_hi - y_lo).max(0.1);
    let axes = Axes {
        log_lo: f_lo.log10() - 0.05,
        log_hi: f_hi.log10() + 0.05,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        kind.title()
    );
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);

    // decade ticks and their 2x, 5x subdivisions
    let mut decade = axes.log_lo.floor() as i32;
    while (decade as f64) <= axes.log_hi {
        for m in [1.0, 2.0, 5.0] {
            let f = m * 10f64.powi(decade);
            let lf = f.log10();
            if lf < axes.log_lo || lf > axes.log_hi {
                continue;
            }
            let x = axes.x(f);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{f}</text>"#, y1 + 18.0);
        }
        decade += 1;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">cutoff frequency f_c (cycles per projection, log scale)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    for k in 0..=5 {
        let v = axes.y_lo + (axes.y_hi - axes.y_lo) * k as f64 / 5.0;
        let y = axes.y(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, x0 - 8.0, y + 4.0);
    }
    let y_one = axes.y(1.0);
    let _ = writeln!(s, r#"<line class="unity" x1="{x0}" y1="{y_one:.2}" x2="{x1}" y2="{y_one:.2}" stroke="black" stroke-width="0.5"/>"#);
    for f in &verticals {
        let x = axes.x(*f);
        let _ = writeln!(
            s,
            r##"<line class="nyquist" data-f="{f}" x1="{x:.4}" y1="{y0}" x2="{x:.4}" y2="{y1}" stroke="#888888" stroke-dasharray="6,4"/>"##
        );
    }

    for (i, &n) in node_counts.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter(|r| r.n_nodes == n)
            .map(|r| {
                let (m, h) = kind.value(r);
                (r.cutoff, m, h)
            })
            .filter(|p| p.1.is_finite())
            .collect();
        if pts.is_empty() {
            log::warn!("no aggregate rows for {n} nodes; series omitted");
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let upper = pts.iter().map(|&(f, m, h)| format!("{:.4},{:.4}", axes.x(f), axes.y(m + h)));
        let lower = pts.iter().rev().map(|&(f, m, h)| format!("{:.4},{:.4}", axes.x(f), axes.y(m - h)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="ci" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = pts.iter().map(|&(f, m, _)| format!("{:.4},{:.4}", axes.x(f), axes.y(m))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-nodes="{n}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        for &(f, m, _) in &pts {
            let _ = writeln!(
                s,
                r#"<circle class="point" data-nodes="{n}" data-f="{f}" cx="{:.4}" cy="{:.4}" r="3" fill="{color}"/>"#,
                axes.x(f),
                axes.y(m)
            );
        }
        let ly = y0 + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{n} nodes</text>"#,
            x1 - 110.0,
            x1 - 85.0,
            x1 - 80.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the RPE and SSIM ratio charts into `dir`; returns their paths.
pub fn emit_plots(rows: &[AggregateRow], node_counts: &[usize], n_projections: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot: no aggregate rows".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for kind in [ChartKind::Rpe, ChartKind::Ssim] {
        let path = dir.join(kind.file_name());
        std::fs::write(&path, render_chart(rows, node_counts, n_projections, kind)).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cutoff: f64, n_nodes: usize, m: f64) -> AggregateRow {
        AggregateRow {
            cutoff,
            n_nodes,
            n_runs: 3,
            rpe_ratio_mean: m,
            rpe_ratio_ci95: 0.05,
            ssim_ratio_mean: 2.0 - m,
            ssim_ratio_ci95: 0.02,
        }
    }

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!(" {name}=\"");
        let start = tag.find(&key).unwrap() + key.len();
        tag[start..].split('"').next().unwrap().parse().unwrap()
    }

    fn rows() -> Vec<AggregateRow> {
        let fs = [0.005, 0.01, 0.03, 0.1, 0.5];
        let mut v: Vec<_> = fs.iter().map(|&f| row(f, 10, 0.5 + f)).collect();
        v.extend(fs.iter().map(|&f| row(f, 30, 0.4 + f)));
        v
    }

    #[test]
    fn layout_has_series_and_dashed_lines() {
        let svg = render_chart(&rows(), &[10, 30], 120, ChartKind::Rpe);
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
        assert_eq!(svg.matches("class=\"ci\"").count(), 2);
        assert_eq!(svg.matches("class=\"nyquist\"").count(), 3);
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn point_x_is_affine_in_log_frequency() {
        let svg = render_chart(&rows(), &[10, 30], 120, ChartKind::Ssim);
        let pts: Vec<(f64, f64)> = svg
            .lines()
            .filter(|l| l.contains("class=\"point\""))
            .map(|l| (attr(l, "data-f").log10(), attr(l, "cx")))
            .collect();
        assert_eq!(pts.len(), 10);
        let (a, b) = (pts[0], pts[4]);
        let slope = (b.1 - a.1) / (b.0 - a.0);
        assert!(slope > 0.0);
        for p in &pts {
            assert!((a.1 + slope * (p.0 - a.0) - p.1).abs() < 1e-3);
        }
        for l in svg.lines().filter(|l| l.contains("class=\"nyquist\"")) {
            let x = attr(l, "x1");
            assert!((a.1 + slope * (attr(l, "data-f").log10() - a.0) - x).abs() < 1e-3);
        }
    }

    #[test]
    fn missing_series_still_renders() {
        let only10: Vec<_> = rows().into_iter().filter(|r| r.n_nodes == 10).collect();
        let svg = render_chart(&only10, &[10, 30], 120, ChartKind::Rpe);
        assert_eq!(svg.matches("class=\"series\"").count(), 1);
        assert_eq!(svg.matches("class=\"nyquist\"").count(), 3);
    }

    #[test]
    fn emit_writes_two_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&rows(), &[10, 30], 120, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files.iter().all(|f| f.exists()));
        assert!(emit_plots(&[], &[10], 120, dir.path()).is_err());
    }
}
