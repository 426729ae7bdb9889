//! SVG figures of the return-time partitions and the period-4 geometry.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certifier::lemmas::{construct_gamma2, g2_b2};
use crate::certifier::periodic::periodic_point_with;
use crate::certifier::trace::Tracer;
use crate::error::{LtmError, Result};
use crate::geometry::{clip_segment_to_polygon, Polygon, Segment, Vec2};
use crate::partition::{
    accumulation_points, build_partition, singularity_segment, AccumulationId, LineFamily, LineKind, Partition,
};
use crate::torus::{MapId, Params};

/// Side of the square viewBox.
pub const VIEW: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    /// Partition of S by return time under F.
    Fig2,
    /// Partition of S by return time under G.
    Fig3a,
    /// Sides of S and a v-segment in `G^2(B_2)`.
    Fig3b,
    /// Close-up near `p2` with the period-4 manifolds and M.
    Fig4,
}

impl FigureId {
    pub const ALL: [FigureId; 4] = [FigureId::Fig2, FigureId::Fig3a, FigureId::Fig3b, FigureId::Fig4];

    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3a => "fig3a",
            FigureId::Fig3b => "fig3b",
            FigureId::Fig4 => "fig4",
        }
    }

    pub fn from_name(s: &str) -> Option<FigureId> {
        FigureId::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Parameter used for the illustrations.
    pub fn default_alpha(&self) -> f64 {
        match self {
            FigureId::Fig4 => 2.15,
            _ => 2.8,
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub id: FigureId,
    pub alpha: f64,
    pub out: PathBuf,
}

struct Svg {
    lo: Vec2,
    hi: Vec2,
    window: Polygon,
    body: String,
}

impl Svg {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        Self {
            lo,
            hi,
            window: Polygon::rectangle(lo.x, lo.y, hi.x, hi.y),
            body: String::new(),
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let x = (p.x - self.lo.x) / (self.hi.x - self.lo.x) * VIEW;
        let y = VIEW - (p.y - self.lo.y) / (self.hi.y - self.lo.y) * VIEW;
        (x, y)
    }

    fn points(&self, pts: &[Vec2]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn polygon(&mut self, poly: &Polygon, class: &str, label: Option<&str>, fill: &str) {
        let pts = self.points(poly.vertices());
        let data = label
            .map(|l| format!(" data-label=\"{}\"", escape(l)))
            .unwrap_or_default();
        let _ = writeln!(
            self.body,
            "<polygon class=\"{class}\"{data} points=\"{pts}\" fill=\"{fill}\"/>"
        );
    }

    /// Draws the part of `seg` inside the window.
    fn segment(&mut self, seg: &Segment, class: &str) {
        let Some(c) = clip_segment_to_polygon(seg, &self.window) else {
            return;
        };
        let (x0, y0) = self.map(c.segment.p0);
        let (x1, y1) = self.map(c.segment.p1);
        let _ = writeln!(
            self.body,
            "<line class=\"{class}\" x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y1:.3}\"/>"
        );
    }

    fn text(&mut self, at: Vec2, text: &str, size: f64, class: &str) {
        let (x, y) = self.map(at);
        let _ = writeln!(
            self.body,
            "<text class=\"{class}\" x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"{size:.2}\">{}</text>",
            escape(text)
        );
    }

    fn dot(&mut self, at: Vec2, class: &str) {
        let (x, y) = self.map(at);
        let _ = writeln!(
            self.body,
            "<circle class=\"{class}\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\"/>"
        );
    }

    fn finish(self, id: FigureId, params: &Params) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
        let _ = writeln!(
            s,
            "<!-- ltm {} alpha={} window=[{}, {}]x[{}, {}] version={} -->",
            id.name(),
            params.alpha,
            self.lo.x,
            self.hi.x,
            self.lo.y,
            self.hi.y,
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEW} {VIEW}\" width=\"{VIEW}\" height=\"{VIEW}\">"
        );
        s.push_str(STYLE);
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

const STYLE: &str = "<style>
.cell { stroke: #222; stroke-width: 0.4; }
.tail { fill: #000; stroke: none; }
.label { font-family: sans-serif; text-anchor: middle; dominant-baseline: middle; fill: #000; }
.side { font-family: sans-serif; font-size: 14px; fill: #333; }
.border { stroke: #000; stroke-width: 1.5; fill: none; }
.family-L { stroke: #c0392b; stroke-width: 1.2; }
.family-Lk { stroke: #1f4e9c; stroke-width: 0.9; }
.family-Lk2 { stroke: #2e8b57; stroke-width: 0.7; }
.family-I { stroke: #8e44ad; stroke-width: 0.9; }
.family-M { stroke: #d35400; stroke-width: 1.2; }
.reflected { stroke: #555; stroke-width: 1; stroke-dasharray: 6 3; }
.gamma { stroke: #000; stroke-width: 2.2; }
.unstable { stroke: #000; stroke-width: 2; }
.stable { stroke: #000; stroke-width: 2; stroke-dasharray: 8 4; }
.region { stroke: #555; stroke-width: 0.8; }
.point { fill: #000; }
</style>
";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fill color by return time.
fn fill_for(k: u32, starred: bool) -> String {
    const PALETTE: [&str; 8] = [
        "#f7d08a", "#a8d5e2", "#f4a3a8", "#b9e3b0", "#d7bde2", "#f9e79f", "#aed6f1", "#f5cba7",
    ];
    let base = PALETTE[((k - 1) as usize) % PALETTE.len()];
    if starred {
        // same hue, lighter
        format!("{base}b0")
    } else {
        base.to_string()
    }
}

fn draw_partition(svg: &mut Svg, part: &Partition) {
    let total = part.params.inv_alpha * part.params.inv_alpha;
    for cell in &part.cells {
        let label = cell.label.to_string();
        svg.polygon(
            &cell.polygon,
            "cell",
            Some(&label),
            &fill_for(cell.label.k, cell.label.starred),
        );
    }
    for t in &part.tail {
        svg.polygon(t, "tail", None, "#000");
    }
    for cell in &part.cells {
        let rel = (cell.polygon.area() / total).sqrt();
        let size = (rel * 60.0).clamp(2.0, 16.0);
        svg.text(cell.polygon.centroid(), &cell.label.to_string(), size, "label");
    }
}

fn draw_border(svg: &mut Svg, params: &Params) -> Result<()> {
    for j in 1..=4u8 {
        svg.segment(&singularity_segment(&LineFamily::bd(j), params)?, "border");
    }
    Ok(())
}

fn draw_accumulation(svg: &mut Svg, params: &Params, ids: &[AccumulationId]) {
    let w = params.inv_alpha;
    for a in accumulation_points(params).into_iter().filter(|a| ids.contains(&a.id)) {
        svg.dot(a.location, "point");
        let name = match a.id {
            AccumulationId::P1 => "p1",
            AccumulationId::P1Star => "p1*",
            AccumulationId::P2 => "p2",
            AccumulationId::P2Star => "p2*",
            AccumulationId::Q1 => "q1",
            AccumulationId::Q1Star => "q1*",
            AccumulationId::Q2 => "q2",
            AccumulationId::Q2Star => "q2*",
        };
        // nudge labels into the square
        let at = Vec2::new(
            a.location.x.clamp(0.04 * w, 0.96 * w),
            a.location.y.clamp(0.03 * w, 0.97 * w),
        );
        svg.text(at, name, 13.0, "side");
    }
}

fn fig_partition(id: FigureId, params: &Params) -> Result<String> {
    let map = if id == FigureId::Fig2 { MapId::F } else { MapId::G };
    let part = build_partition(map, 15, params)?;
    let w = params.inv_alpha;
    let mut svg = Svg::new(Vec2::new(0.0, 0.0), Vec2::new(w, w));
    draw_partition(&mut svg, &part);
    let (l, lk, class_l) = if map == MapId::F {
        (LineFamily::scr_l(), LineKind::ScrLk, "family-L")
    } else {
        (LineFamily::scr_i(), LineKind::ScrIk, "family-I")
    };
    for f in [l, l.star()] {
        svg.segment(&singularity_segment(&f, params)?, class_l);
    }
    for k in 2..=6 {
        let f = LineFamily::indexed(lk, k);
        for g in [f, f.star()] {
            svg.segment(&singularity_segment(&g, params)?, "family-Lk");
        }
    }
    draw_border(&mut svg, params)?;
    use AccumulationId::*;
    let ids: &[AccumulationId] = if map == MapId::F {
        &[P1, P1Star, P2, P2Star]
    } else {
        &[Q1, Q1Star, Q2, Q2Star]
    };
    draw_accumulation(&mut svg, params, ids);
    Ok(svg.finish(id, params))
}

fn fig3b(params: &Params) -> Result<String> {
    let tracer = Tracer::new(params, 15)?;
    let w = params.inv_alpha;
    let mut svg = Svg::new(Vec2::new(0.0, 0.0), Vec2::new(w, w));
    let region = g2_b2(&tracer)?;
    svg.polygon(&region, "region", Some("G2(B2)"), "#d0d0d0");
    for f in [
        LineFamily::new(LineKind::ReflectedI2),
        LineFamily::new(LineKind::ReflectedI2).star(),
    ] {
        svg.segment(&singularity_segment(&f, params)?, "reflected");
    }
    svg.segment(&singularity_segment(&LineFamily::scr_l(), params)?, "family-L");
    for k in [2, 3] {
        svg.segment(&singularity_segment(&LineFamily::scr_lk(k), params)?, "family-Lk");
    }
    let gamma = construct_gamma2(&tracer, 0.5 * w)?;
    svg.segment(&gamma, "gamma");
    draw_border(&mut svg, params)?;
    svg.text(Vec2::new(0.03 * w, 0.5 * w), "dS1", 14.0, "side");
    svg.text(Vec2::new(0.9 * w, 0.5 * w), "dS2", 14.0, "side");
    svg.text(Vec2::new(0.5 * w, 0.03 * w), "dS3", 14.0, "side");
    svg.text(Vec2::new(0.5 * w, 0.97 * w), "dS4", 14.0, "side");
    svg.text(gamma.point_at(0.8) + Vec2::new(0.03 * w, 0.0), "Γ''", 14.0, "side");
    Ok(svg.finish(FigureId::Fig3b, params))
}

fn fig4(params: &Params) -> Result<String> {
    let part_f = build_partition(MapId::F, 15, params)?;
    let part_g = build_partition(MapId::G, 15, params)?;
    let pd = periodic_point_with(params, &part_f, &part_g)?;
    let w = params.inv_alpha;
    let bar = singularity_segment(&LineFamily::new(LineKind::BarScrL), params)?;

    // square window around M and p2
    let mut pts: Vec<Vec2> = pd.m_polygon.vertices().to_vec();
    pts.push(Vec2::new(0.0, 0.5 * w));
    let (lo, hi) = pts.iter().fold(
        (
            Vec2::new(f64::INFINITY, f64::INFINITY),
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(l, h), p| {
            (
                Vec2::new(l.x.min(p.x), l.y.min(p.y)),
                Vec2::new(h.x.max(p.x), h.y.max(p.y)),
            )
        },
    );
    let side = (hi.x - lo.x).max(hi.y - lo.y) * 1.3;
    let c = (lo + hi) * 0.5;
    let lo = Vec2::new(-0.05 * side, c.y - 0.5 * side);
    let hi = lo + Vec2::new(side, side);
    let mut svg = Svg::new(lo, hi);

    svg.polygon(&pd.m_polygon, "region", Some("M"), "#c8c8c8");
    for k in (3..=41).step_by(2) {
        if let Ok(s) = singularity_segment(&LineFamily::scr_lk2(k), params) {
            svg.segment(&s, "family-Lk2");
        }
    }
    svg.segment(&bar, "family-L");
    svg.segment(&singularity_segment(&LineFamily::scr_lk(2), params)?, "family-Lk");
    for kind in [LineKind::M1, LineKind::M2] {
        svg.segment(&singularity_segment(&LineFamily::new(kind), params)?, "family-M");
    }
    svg.segment(&pd.gamma_u, "unstable");
    svg.segment(&pd.gamma_s, "stable");
    draw_border(&mut svg, params)?;
    svg.dot(pd.z_p, "point");
    svg.text(pd.z_p + Vec2::new(0.04 * side, 0.0), "z_p", 13.0, "side");
    svg.dot(Vec2::new(0.0, 0.5 * w), "point");
    svg.text(Vec2::new(0.03 * side, 0.5 * w + 0.03 * side), "p2", 13.0, "side");
    Ok(svg.finish(FigureId::Fig4, params))
}

/// SVG text of a figure.
pub fn render_svg(id: FigureId, params: &Params) -> Result<String> {
    params.require_strict("render_figure")?;
    match id {
        FigureId::Fig2 | FigureId::Fig3a => fig_partition(id, params),
        FigureId::Fig3b => fig3b(params),
        FigureId::Fig4 => fig4(params),
    }
}

/// Writes the figure to `spec.out`.
pub fn render_figure(spec: &FigureSpec) -> Result<()> {
    let params = Params::new(spec.alpha)?;
    let svg = render_svg(spec.id, &params)?;
    write_file(&spec.out, &svg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(LtmError::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_has_one_polygon_per_cell() {
        let params = Params::new(2.8).unwrap();
        let svg = render_svg(FigureId::Fig2, &params).unwrap();
        let part = build_partition(MapId::F, 15, &params).unwrap();
        assert_eq!(svg.matches("<polygon class=\"cell\"").count(), part.cells.len());
        assert!(svg.contains("data-label=\"A1\"") && svg.contains("data-label=\"A2\""));
        assert!(svg.starts_with("<?xml"));
    }

    #[test]
    fn extended_alpha_is_rejected() {
        let params = Params::new(3.2).unwrap();
        assert!(matches!(
            render_svg(FigureId::Fig2, &params),
            Err(LtmError::ExtendedDomain { .. })
        ));
    }

    #[test]
    fn fig4_draws_both_manifolds() {
        let params = Params::new(2.15).unwrap();
        let svg = render_svg(FigureId::Fig4, &params).unwrap();
        assert_eq!(svg.matches("class=\"unstable\"").count(), 1);
        assert_eq!(svg.matches("class=\"stable\"").count(), 1);
    }
}
