//! Minimal SVG writer and the report plots built on it.

use std::fmt::Write;

use ctrlsel_agent::episode::ErrorKind;
use ctrlsel_core::environment::Obstacle;
use ctrlsel_core::{ScenarioSpec, Trajectory};

use crate::batch::BatchReport;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) -> &mut Self {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="{stroke}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
        self
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, stroke: &str) -> &mut Self {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" stroke="{stroke}"/>"#
        );
        self
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str) -> &mut Self {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}"/>"#,
            a.0, a.1, b.0, b.1
        );
        self
    }

    pub fn polyline(
        &mut self,
        points: &[(f64, f64)],
        stroke: &str,
        width: f64,
        dashed: bool,
    ) -> &mut Self {
        if points.is_empty() {
            return self;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let dash = if dashed {
            r#" stroke-dasharray="4 3""#
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            pts.join(" ")
        );
        self
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) -> &mut Self {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
        self
    }

    pub fn finish(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Plot frame mapping data coordinates into a pixel box.
struct Frame {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (x - self.x.0) / (self.x.1 - self.x.0).max(1e-12);
        let sy = (y - self.y.0) / (self.y.1 - self.y.0).max(1e-12);
        (self.left + sx * self.w, self.top + (1.0 - sy) * self.h)
    }

    fn scale(&self) -> f64 {
        self.w / (self.x.1 - self.x.0).max(1e-12)
    }

    fn axes(&self, svg: &mut Svg, y_ticks: &[f64], y_label: impl Fn(f64) -> String) {
        let (l, t, b) = (self.left, self.top, self.top + self.h);
        svg.line((l, t), (l, b), "black")
            .line((l, b), (l + self.w, b), "black");
        for &v in y_ticks {
            let (_, py) = self.px(self.x.0, v);
            svg.line((l - 4.0, py), (l, py), "black");
            svg.text(l - 6.0, py + 4.0, 10.0, "end", &y_label(v));
        }
    }
}

fn title(svg: &mut Svg, width: f64, s: &str) {
    svg.text(width / 2.0, 20.0, 14.0, "middle", s);
}

pub fn success_bars(report: &BatchReport) -> String {
    let n = report.kinds.len().max(1);
    let width = 120.0 + 90.0 * n as f64;
    let mut svg = Svg::new(width, 320.0);
    title(&mut svg, width, "Success rate per scenario kind");
    let f = Frame {
        left: 60.0,
        top: 40.0,
        w: width - 90.0,
        h: 220.0,
        x: (0.0, n as f64),
        y: (0.0, 1.0),
    };
    f.axes(&mut svg, &[0.0, 0.25, 0.5, 0.75, 1.0], |v| {
        format!("{v:.2}")
    });
    for (i, s) in report.kinds.iter().enumerate() {
        let (x0, y0) = f.px(i as f64 + 0.2, s.success_rate);
        let (x1, yb) = f.px(i as f64 + 0.8, 0.0);
        svg.rect(x0, y0, x1 - x0, yb - y0, PALETTE[i % PALETTE.len()], "none");
        svg.text(
            (x0 + x1) / 2.0,
            y0 - 4.0,
            10.0,
            "middle",
            &format!("{:.2}", s.success_rate),
        );
        svg.text((x0 + x1) / 2.0, yb + 16.0, 10.0, "middle", s.kind.name());
        let rounds = s
            .avg_rounds_to_success
            .map(|r| format!("{r:.2} rounds"))
            .unwrap_or_else(|| "-".into());
        svg.text((x0 + x1) / 2.0, yb + 30.0, 9.0, "middle", &rounds);
    }
    svg.finish()
}

pub fn round_curves(report: &BatchReport) -> String {
    let rounds = report.max_rounds.max(1);
    let width = 480.0;
    let mut svg = Svg::new(width, 340.0);
    title(&mut svg, width, "Cumulative success rate by round");
    let f = Frame {
        left: 60.0,
        top: 40.0,
        w: 260.0,
        h: 240.0,
        x: (1.0, rounds.max(2) as f64),
        y: (0.0, 1.0),
    };
    f.axes(&mut svg, &[0.0, 0.25, 0.5, 0.75, 1.0], |v| {
        format!("{v:.2}")
    });
    for r in 1..=rounds {
        let (px, py) = f.px(r as f64, 0.0);
        svg.text(px, py + 16.0, 10.0, "middle", &r.to_string());
    }
    svg.text(
        f.left + f.w / 2.0,
        f.top + f.h + 34.0,
        11.0,
        "middle",
        "round",
    );
    for (i, s) in report.kinds.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .cumulative_success
            .iter()
            .enumerate()
            .map(|(r, &v)| f.px(r as f64 + 1.0, v))
            .collect();
        svg.polyline(&pts, color, 2.0, false);
        for p in &pts {
            svg.circle(p.0, p.1, 2.5, color, "none");
        }
        let ly = 60.0 + 16.0 * i as f64;
        svg.line((340.0, ly - 4.0), (360.0, ly - 4.0), color);
        svg.text(366.0, ly, 10.0, "start", s.kind.name());
    }
    svg.finish()
}

pub fn error_histogram(report: &BatchReport) -> String {
    let n = report.kinds.len().max(1);
    let width = 160.0 + 140.0 * n as f64;
    let mut svg = Svg::new(width, 340.0);
    title(&mut svg, width, "Errors by kind");
    let top = report
        .kinds
        .iter()
        .flat_map(|s| ErrorKind::ALL.map(|k| s.errors.get(k)))
        .max()
        .unwrap_or(0)
        .max(1);
    let f = Frame {
        left: 60.0,
        top: 40.0,
        w: 140.0 * n as f64,
        h: 220.0,
        x: (0.0, n as f64),
        y: (0.0, top as f64),
    };
    let ticks: Vec<f64> = (0..=4).map(|i| top as f64 * i as f64 / 4.0).collect();
    f.axes(&mut svg, &ticks, |v| format!("{v:.0}"));
    for (i, s) in report.kinds.iter().enumerate() {
        for (j, k) in ErrorKind::ALL.iter().enumerate() {
            let c = s.errors.get(*k);
            let a = i as f64 + 0.1 + 0.2 * j as f64;
            let (x0, y0) = f.px(a, c as f64);
            let (x1, yb) = f.px(a + 0.18, 0.0);
            svg.rect(x0, y0, x1 - x0, yb - y0, PALETTE[j], "none");
            if c > 0 {
                svg.text((x0 + x1) / 2.0, y0 - 3.0, 9.0, "middle", &c.to_string());
            }
        }
        let (cx, yb) = f.px(i as f64 + 0.5, 0.0);
        svg.text(cx, yb + 16.0, 10.0, "middle", s.kind.name());
    }
    for (j, k) in ErrorKind::ALL.iter().enumerate() {
        let ly = 60.0 + 16.0 * j as f64;
        let lx = f.left + f.w + 16.0;
        svg.rect(lx, ly - 9.0, 10.0, 10.0, PALETTE[j], "none");
        svg.text(lx + 14.0, ly, 10.0, "start", k.title());
    }
    svg.finish()
}

fn draw_world(svg: &mut Svg, f: &Frame, spec: &ScenarioSpec) {
    let ws = spec.workspace;
    let (x0, y0) = f.px(ws.min[0], ws.max[1]);
    svg.rect(
        x0,
        y0,
        ws.width() * f.scale(),
        ws.height() * f.scale(),
        "#fafafa",
        "black",
    );
    for region in &spec.stl_regions {
        let (rx, ry) = f.px(region.rect.min[0], region.rect.max[1]);
        svg.rect(
            rx,
            ry,
            region.rect.width() * f.scale(),
            region.rect.height() * f.scale(),
            "#dbeafe",
            "#3b82f6",
        );
        svg.text(rx + 2.0, ry + 9.0, 7.0, "start", &region.name);
    }
    for o in &spec.obstacles {
        match *o {
            Obstacle::Circle { center, radius } => {
                let (cx, cy) = f.px(center[0], center[1]);
                svg.circle(cx, cy, radius * f.scale(), "#888888", "none");
            }
            Obstacle::Rect { min, max } => {
                let (rx, ry) = f.px(min[0], max[1]);
                svg.rect(
                    rx,
                    ry,
                    (max[0] - min[0]) * f.scale(),
                    (max[1] - min[1]) * f.scale(),
                    "#888888",
                    "none",
                );
            }
        }
    }
    if let Some(goal) = &spec.goal {
        let (cx, cy) = f.px(goal.center[0], goal.center[1]);
        svg.circle(cx, cy, goal.radius * f.scale(), "#bbf7d0", "#16a34a");
    }
    if let Some(r) = &spec.reference {
        let pts: Vec<(f64, f64)> = r.positions().map(|p| f.px(p[0], p[1])).collect();
        svg.polyline(&pts, "#6b7280", 1.0, true);
    }
    let s = spec.start_position();
    let (sx, sy) = f.px(s[0], s[1]);
    svg.circle(sx, sy, 3.0, "black", "none");
}

/// Grid of workspace panels, one per episode, with the executed trajectory
/// where there is one.
pub fn episode_panels(title_text: &str, episodes: &[(ScenarioSpec, Option<Trajectory>)]) -> String {
    let panel = 200.0;
    let cols = episodes.len().clamp(1, 5);
    let rows = episodes.len().div_ceil(cols).max(1);
    let width = cols as f64 * (panel + 20.0) + 20.0;
    let height = rows as f64 * (panel + 36.0) + 40.0;
    let mut svg = Svg::new(width, height);
    title(&mut svg, width, title_text);
    if episodes.is_empty() {
        svg.text(
            width / 2.0,
            height / 2.0 + 10.0,
            12.0,
            "middle",
            "no episodes",
        );
    }
    for (i, (spec, traj)) in episodes.iter().enumerate() {
        let (c, r) = (i % cols, i / cols);
        let ws = spec.workspace;
        let side = ws.width().max(ws.height());
        let f = Frame {
            left: 20.0 + c as f64 * (panel + 20.0),
            top: 40.0 + r as f64 * (panel + 36.0),
            w: panel,
            h: panel,
            x: (ws.min[0], ws.min[0] + side),
            y: (ws.min[1], ws.min[1] + side),
        };
        draw_world(&mut svg, &f, spec);
        if let Some(t) = traj {
            let pts: Vec<(f64, f64)> = t.positions().map(|p| f.px(p[0], p[1])).collect();
            svg.polyline(&pts, "#dc2626", 1.6, false);
        }
        svg.text(
            f.left + panel / 2.0,
            f.top + panel + 14.0,
            10.0,
            "middle",
            &spec.id(),
        );
    }
    svg.finish()
}
