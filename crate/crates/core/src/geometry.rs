//! Planar geometry in a fundamental-domain chart: lines, closed segments,
//! convex polygons and cone membership.
//!
//! Segments keep un-reduced planar coordinates. Wrapping around the torus is
//! explicit through [`split_mod1`].

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::torus::{Matrix2, Params};

/// Points closer than this to a line are on it.
pub const EPS_GEO: f64 = 1e-10;

/// Determinants below this mark parallel lines.
pub const EPS_PARALLEL: f64 = 1e-12;

const EPS_CONE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// `z -> linear * z + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub linear: Matrix2,
    pub offset: Vec2,
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        linear: Matrix2::IDENTITY,
        offset: Vec2::new(0.0, 0.0),
    };

    pub fn new(linear: Matrix2, offset: Vec2) -> Self {
        Self { linear, offset }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.linear.apply(p) + self.offset
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Affine2) -> Affine2 {
        Affine2 {
            linear: self.linear.mul(&inner.linear),
            offset: self.linear.apply(inner.offset) + self.offset,
        }
    }

    pub fn inverse(&self) -> Option<Affine2> {
        let inv = self.linear.inverse()?;
        Some(Affine2 {
            linear: inv,
            offset: -inv.apply(self.offset),
        })
    }
}

/// The line `a*x + b*y = c`, normalized so that `a^2 + b^2 = 1` and the first
/// nonzero of `(a, b)` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if n < 1e-300 || !n.is_finite() || !c.is_finite() {
            return Err(LtmError::InvalidArgument(format!(
                "line coefficients ({a}, {b}, {c}) do not define a line"
            )));
        }
        let (mut a, mut b, mut c) = (a / n, b / n, c / n);
        if a < 0.0 || (a == 0.0 && b < 0.0) {
            a = -a;
            b = -b;
            c = -c;
        }
        Ok(Self { a, b, c })
    }

    pub fn through(p: Vec2, q: Vec2) -> Result<Self> {
        let d = q - p;
        if d.norm() == 0.0 {
            return Err(LtmError::DegenerateSegment { x: p.x, y: p.y });
        }
        Line::new(-d.y, d.x, -d.y * p.x + d.x * p.y)
    }

    /// The line `y = slope * (x - x0) + y0`.
    pub fn point_slope(p: Vec2, slope: f64) -> Result<Self> {
        Line::new(-slope, 1.0, p.y - slope * p.x)
    }

    /// Line through `p` parallel to `dir`.
    pub fn point_direction(p: Vec2, dir: Vec2) -> Result<Self> {
        Line::through(p, p + dir)
    }

    pub fn vertical(x: f64) -> Self {
        Line { a: 1.0, b: 0.0, c: x }
    }

    pub fn horizontal(y: f64) -> Self {
        Line { a: 0.0, b: 1.0, c: y }
    }

    pub fn is_normalized(&self) -> bool {
        ((self.a * self.a + self.b * self.b) - 1.0).abs() < 1e-12 && (self.a > 0.0 || (self.a == 0.0 && self.b > 0.0))
    }

    /// Signed distance, positive on the side the normal `(a, b)` points to.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.a * p.x + self.b * p.y - self.c
    }

    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        self.signed_distance(p).abs() <= eps
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::new(-self.b, self.a)
    }

    /// `y` on the line at abscissa `x`, if the line is not vertical.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        (self.b.abs() > EPS_PARALLEL).then(|| (self.c - self.a * x) / self.b)
    }

    pub fn x_at(&self, y: f64) -> Option<f64> {
        (self.a.abs() > EPS_PARALLEL).then(|| (self.c - self.b * y) / self.a)
    }

    /// Image under an invertible affine map.
    pub fn map_affine(&self, t: &Affine2) -> Result<Line> {
        let p = self.point();
        let d = self.direction();
        let q = t.apply(p);
        let e = t.linear.apply(d);
        Line::point_direction(q, e)
    }

    /// Foot of the perpendicular from the origin.
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.a * self.c, self.b * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intersection {
    Point(Vec2),
    Parallel,
}

pub fn line_intersect(l1: &Line, l2: &Line) -> Intersection {
    let det = l1.a * l2.b - l1.b * l2.a;
    if det.abs() < EPS_PARALLEL {
        return Intersection::Parallel;
    }
    let x = (l1.c * l2.b - l1.b * l2.c) / det;
    let y = (l1.a * l2.c - l1.c * l2.a) / det;
    Intersection::Point(Vec2::new(x, y))
}

/// Closed segment in the planar chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p0: Vec2,
    pub p1: Vec2,
    pub parent: Line,
}

impl Segment {
    pub fn new(p0: Vec2, p1: Vec2) -> Result<Self> {
        if p0.dist(p1) < 1e-15 {
            return Err(LtmError::DegenerateSegment { x: p0.x, y: p0.y });
        }
        Ok(Self {
            p0,
            p1,
            parent: Line::through(p0, p1)?,
        })
    }

    pub fn length(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    pub fn direction(&self) -> Vec2 {
        self.p1 - self.p0
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.p0.lerp(self.p1, t)
    }

    pub fn midpoint(&self) -> Vec2 {
        self.point_at(0.5)
    }

    pub fn reversed(&self) -> Segment {
        Segment {
            p0: self.p1,
            p1: self.p0,
            parent: self.parent,
        }
    }

    /// Sub-segment between parameters `t0 < t1`.
    pub fn sub(&self, t0: f64, t1: f64) -> Result<Segment> {
        Segment::new(self.point_at(t0), self.point_at(t1))
    }

    pub fn map_affine(&self, t: &Affine2) -> Result<Segment> {
        Segment::new(t.apply(self.p0), t.apply(self.p1))
    }

    /// Height and width: the extents of the projections on the y and x axes.
    pub fn heights(&self) -> (f64, f64) {
        segment_heights(self)
    }

    /// `max(ell_v, ell_h)`.
    pub fn diameter(&self) -> f64 {
        let (v, h) = self.heights();
        v.max(h)
    }

    /// Parameter of the closest point of the parent line to `p`, unclamped.
    pub fn project(&self, p: Vec2) -> f64 {
        let d = self.direction();
        (p - self.p0).dot(d) / d.dot(d)
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let t = self.project(p).clamp(0.0, 1.0);
        self.point_at(t).dist(p)
    }

    /// Intersection point with another segment, with endpoints allowed to
    /// touch within `eps`.
    pub fn intersect(&self, other: &Segment, eps: f64) -> Option<Vec2> {
        match line_intersect(&self.parent, &other.parent) {
            Intersection::Point(p) => {
                (self.distance_to_point(p) <= eps && other.distance_to_point(p) <= eps).then_some(p)
            }
            Intersection::Parallel => {
                // collinear overlap
                if self.parent.signed_distance(other.p0).abs() > eps {
                    return None;
                }
                [other.p0, other.p1, self.p0, self.p1]
                    .into_iter()
                    .find(|&q| self.distance_to_point(q) <= eps && other.distance_to_point(q) <= eps)
            }
        }
    }

    /// Crossing point with a line, if the line meets the segment.
    pub fn cross_line(&self, line: &Line, eps: f64) -> Option<Vec2> {
        let d0 = line.signed_distance(self.p0);
        let d1 = line.signed_distance(self.p1);
        if d0.abs() <= eps {
            return Some(self.p0);
        }
        if d1.abs() <= eps {
            return Some(self.p1);
        }
        if (d0 < 0.0) == (d1 < 0.0) {
            return None;
        }
        Some(self.point_at(d0 / (d0 - d1)))
    }

    /// Ratio `v1 / v2` of the direction, infinite for horizontal segments.
    pub fn slope_ratio(&self) -> f64 {
        let d = self.direction();
        d.x / d.y
    }
}

pub fn segment_heights(seg: &Segment) -> (f64, f64) {
    let d = seg.direction();
    (d.y.abs(), d.x.abs())
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let mut v = dedup_vertices(vertices);
        if v.len() < 3 {
            return Err(LtmError::InvalidPolygon);
        }
        let a = signed_area(&v);
        if a.abs() < 1e-300 {
            return Err(LtmError::InvalidPolygon);
        }
        if a < 0.0 {
            v.reverse();
        }
        let poly = Polygon { vertices: v };
        if !poly.is_convex() {
            return Err(LtmError::InvalidPolygon);
        }
        Ok(poly)
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            vertices: vec![
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ],
        }
    }

    /// The square S = [0, 1/alpha]^2.
    pub fn square_s(params: &Params) -> Self {
        let w = params.inv_alpha;
        Polygon::rectangle(0.0, 0.0, w, w)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn edge_segments(&self) -> Vec<Segment> {
        self.edges().filter_map(|(a, b)| Segment::new(a, b).ok()).collect()
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            (b - a).cross(c - b) >= -1e-12
        })
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut a = 0.0;
        let mut c = Vec2::default();
        let o = self.vertices[0];
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let w = p.cross(q);
            a += w;
            c = c + (p + q) * w;
        }
        o + c * (1.0 / (3.0 * a))
    }

    /// Smallest signed distance to the edge lines, positive inside.
    pub fn inward_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.cross(p - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        self.inward_distance(p) >= -eps
    }

    /// Distance to the polygon boundary (for points inside or near it).
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edge_segments()
            .iter()
            .map(|s| s.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Part of the polygon where `line.signed_distance >= 0` (`keep_positive`)
    /// or `<= 0`.
    pub fn clip_halfplane(&self, line: &Line, keep_positive: bool) -> Option<Polygon> {
        let s = if keep_positive { 1.0 } else { -1.0 };
        let side = |p: Vec2| s * line.signed_distance(p);
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 2);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let da = side(a);
            let db = side(b);
            if da >= 0.0 {
                out.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                out.push(a.lerp(b, t));
            }
        }
        Polygon::new(out).ok()
    }

    /// Part of the polygon in the slab `lo <= a*x + b*y <= hi` for the
    /// direction `(a, b)` (not necessarily normalized).
    pub fn clip_slab(&self, a: f64, b: f64, lo: f64, hi: f64) -> Option<Polygon> {
        let lower = Line::new(a, b, lo).ok()?;
        let upper = Line::new(a, b, hi).ok()?;
        // orientation of the normalized lines may have flipped
        let flip = if a < 0.0 || (a == 0.0 && b < 0.0) { -1.0 } else { 1.0 };
        self.clip_halfplane(&lower, flip > 0.0)?
            .clip_halfplane(&upper, flip < 0.0)
    }

    pub fn intersect(&self, other: &Polygon) -> Option<Polygon> {
        let mut cur = self.clone();
        for (a, b) in other.edges() {
            let line = Line::through(a, b).ok()?;
            // interior of a CCW polygon lies to the left of each edge
            let left = Vec2::new(-(b - a).y, (b - a).x);
            let keep_positive = line.a * left.x + line.b * left.y > 0.0;
            cur = cur.clip_halfplane(&line, keep_positive)?;
        }
        Some(cur)
    }

    pub fn map_affine(&self, t: &Affine2) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().map(|&v| t.apply(v)).collect())
    }

    pub fn translate(&self, d: Vec2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
        }
    }

    /// Convex hull of the union of both vertex sets.
    pub fn hull_with(&self, other: &Polygon) -> Result<Polygon> {
        let mut pts: Vec<Vec2> = self.vertices.iter().chain(other.vertices.iter()).copied().collect();
        Polygon::new(convex_hull(&mut pts))
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    let o = v[0];
    let mut a = 0.0;
    for i in 0..n {
        a += (v[i] - o).cross(v[(i + 1) % n] - o);
    }
    0.5 * a
}

fn dedup_vertices(v: Vec<Vec2>) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(v.len());
    for p in v {
        if out.last().is_none_or(|q| q.dist(p) > 1e-14) {
            out.push(p);
        }
    }
    while out.len() > 1 && out[0].dist(*out.last().unwrap()) <= 1e-14 {
        out.pop();
    }
    // drop collinear vertices
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        let n = out.len();
        for i in 0..n {
            let a = out[(i + n - 1) % n];
            let b = out[i];
            let c = out[(i + 1) % n];
            let e = c - a;
            if e.norm() > 0.0 && (e.cross(b - a) / e.norm()).abs() < 1e-15 {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

fn convex_hull(pts: &mut [Vec2]) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in pts.iter() {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 1]) <= 1e-18
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 1]) <= 1e-18
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// The three cone fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeId {
    /// Unstable cone: `L <= v1/v2 <= 0`.
    C,
    /// Image cone under F: `v1/v2 >= L + alpha`.
    Cprime,
    /// Stable cone: `L <= v2/v1 <= 0`.
    Cs,
}

pub fn cone_contains(cone: ConeId, v: Vec2, params: &Params) -> Result<bool> {
    if v.x == 0.0 && v.y == 0.0 {
        return Err(LtmError::InvalidArgument("zero vector has no direction".into()));
    }
    let l = params.cone_slope;
    let within = |r: f64, lo: f64, hi: f64| r >= lo - EPS_CONE * (1.0 + lo.abs()) && r <= hi + EPS_CONE;
    Ok(match cone {
        ConeId::C => v.y != 0.0 && within(v.x / v.y, l, 0.0),
        ConeId::Cs => v.x != 0.0 && within(v.y / v.x, l, 0.0),
        ConeId::Cprime => {
            if v.y == 0.0 {
                true
            } else {
                within(v.x / v.y, l + params.alpha, f64::INFINITY)
            }
        }
    })
}

/// Result of clipping a segment to a convex polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedSegment {
    pub segment: Segment,
    /// Parameter interval on the input segment.
    pub t0: f64,
    pub t1: f64,
    pub start_on_boundary: bool,
    pub end_on_boundary: bool,
}

/// Intersection of a segment with a convex polygon; `None` when it is empty
/// or a single point.
pub fn clip_segment_to_polygon(seg: &Segment, poly: &Polygon) -> Option<ClippedSegment> {
    let d = seg.direction();
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let mut start_hit = false;
    let mut end_hit = false;
    for (a, b) in poly.edges() {
        let e = b - a;
        let len = e.norm();
        // inward distance along the segment: num + t * den
        let num = e.cross(seg.p0 - a) / len;
        let den = e.cross(d) / len;
        if den.abs() < 1e-300 {
            if num < -EPS_GEO * 1e-2 {
                return None;
            }
            continue;
        }
        let t = -num / den;
        if den > 0.0 {
            if t > t0 {
                t0 = t;
                start_hit = true;
            }
        } else if t < t1 {
            t1 = t;
            end_hit = true;
        }
    }
    if t1 - t0 <= 1e-14 {
        return None;
    }
    let segment = Segment::new(seg.point_at(t0), seg.point_at(t1)).ok()?;
    Some(ClippedSegment {
        segment,
        t0,
        t1,
        start_on_boundary: start_hit || poly.boundary_distance(segment.p0) <= EPS_GEO,
        end_on_boundary: end_hit || poly.boundary_distance(segment.p1) <= EPS_GEO,
    })
}

/// Cuts the segment `p0 -> p1` where it crosses integer grid lines and
/// translates every piece into `[0, 1]^2`, in order along the segment.
pub fn split_mod1(p0: Vec2, p1: Vec2) -> Result<Vec<Segment>> {
    if p0.dist(p1) < 1e-15 {
        return Err(LtmError::DegenerateSegment { x: p0.x, y: p0.y });
    }
    let d = p1 - p0;
    let mut cuts = vec![0.0, 1.0];
    for (a, da) in [(p0.x, d.x), (p0.y, d.y)] {
        if da == 0.0 {
            continue;
        }
        let (lo, hi) = if da > 0.0 { (a, a + da) } else { (a + da, a) };
        let mut k = lo.floor() + 1.0;
        while k < hi {
            cuts.push((k - a) / da);
            k += 1.0;
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut out = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if (tb - ta) * d.norm() < 1e-15 {
            continue;
        }
        let mid = p0.lerp(p1, 0.5 * (ta + tb));
        let shift = Vec2::new(-mid.x.floor(), -mid.y.floor());
        out.push(Segment::new(p0.lerp(p1, ta) + shift, p0.lerp(p1, tb) + shift)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn axes_intersect_at_origin() {
        let x0 = Line::vertical(0.0);
        let y0 = Line::horizontal(0.0);
        assert_eq!(line_intersect(&x0, &y0), Intersection::Point(Vec2::new(0.0, 0.0)));
        assert_eq!(line_intersect(&x0, &Line::vertical(1.0)), Intersection::Parallel);
    }

    #[test]
    fn line_normalization() {
        let l = Line::new(-3.0, -4.0, 5.0).unwrap();
        assert!(l.is_normalized());
        assert!(close(l.a, 0.6, 1e-15) && close(l.b, 0.8, 1e-15) && close(l.c, -1.0, 1e-15));
        let v = Line::new(0.0, -2.0, 1.0).unwrap();
        assert!(v.is_normalized() && v.b == 1.0 && v.c == -0.5);
        assert!(Line::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cone_boundaries() {
        let params = Params::new(2.5).unwrap();
        assert!(cone_contains(ConeId::C, Vec2::new(0.0, 1.0), &params).unwrap());
        let l = params.cone_slope;
        assert!(cone_contains(ConeId::C, Vec2::new(l * 0.7, 0.7), &params).unwrap());
        assert!(!cone_contains(ConeId::C, Vec2::new(0.1, 1.0), &params).unwrap());
        assert!(cone_contains(ConeId::C, Vec2::new(0.0, 0.0), &params).is_err());

        let params = Params::new(2.8).unwrap();
        let v = Matrix2::shear_f(&params).apply(Vec2::new(-0.2, 1.0));
        assert!(close(v.x, 2.6, 1e-15));
        assert!(cone_contains(ConeId::Cprime, v, &params).unwrap());
        assert!(cone_contains(ConeId::Cs, Vec2::new(1.0, l * 0.5), &params).unwrap());
    }

    #[test]
    fn heights_of_segments() {
        let s = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(0.3, 0.1)).unwrap();
        let (v, h) = segment_heights(&s);
        assert!(close(v, 0.1, 1e-15) && close(h, 0.3, 1e-15));
        let flat = Segment::new(Vec2::new(0.0, 0.2), Vec2::new(0.3, 0.2)).unwrap();
        assert_eq!(flat.heights().0, 0.0);
        let params = Params::new(2.8).unwrap();
        let w = params.inv_alpha;
        let vseg = Segment::new(Vec2::new(0.1, 0.0), Vec2::new(0.05, w)).unwrap();
        assert!(close(vseg.heights().0, 0.357_142_857, 1e-9));
    }

    #[test]
    fn degenerate_segment_rejected() {
        let p = Vec2::new(0.1, 0.1);
        assert!(matches!(Segment::new(p, p), Err(LtmError::DegenerateSegment { .. })));
    }

    #[test]
    fn clipping_examples() {
        let unit = Polygon::rectangle(0.0, 0.0, 1.0, 1.0);
        let s = Segment::new(Vec2::new(-0.5, 0.25), Vec2::new(1.5, 0.75)).unwrap();
        let c = clip_segment_to_polygon(&s, &unit).unwrap();
        assert!(close(c.segment.p0.x, 0.0, 1e-15) && close(c.segment.p1.x, 1.0, 1e-15));
        assert!(c.start_on_boundary && c.end_on_boundary);

        let inner = Segment::new(Vec2::new(0.2, 0.2), Vec2::new(0.4, 0.7)).unwrap();
        let c = clip_segment_to_polygon(&inner, &unit).unwrap();
        assert_eq!(c.segment, inner);
        assert!(!c.start_on_boundary && !c.end_on_boundary);

        let params = Params::new(2.8).unwrap();
        let s = Segment::new(Vec2::new(-0.1, 0.05), Vec2::new(0.2, 0.05)).unwrap();
        let c = clip_segment_to_polygon(&s, &Polygon::square_s(&params)).unwrap();
        assert!(c.segment.p0.dist(Vec2::new(0.0, 0.05)) < 1e-15);
        assert!(c.segment.p1.dist(Vec2::new(0.2, 0.05)) < 1e-15);

        let outside = Segment::new(Vec2::new(2.0, 2.0), Vec2::new(3.0, 2.5)).unwrap();
        assert!(clip_segment_to_polygon(&outside, &unit).is_none());
        // touching a corner only
        let touch = Segment::new(Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)).unwrap();
        assert!(clip_segment_to_polygon(&touch, &unit).is_none());
    }

    #[test]
    fn split_single_wrap() {
        let pieces = split_mod1(Vec2::new(0.8, 0.2), Vec2::new(1.3, 0.2)).unwrap();
        assert_eq!(pieces.len(), 2);
        assert!(pieces[0].p0.dist(Vec2::new(0.8, 0.2)) < 1e-15);
        assert!(pieces[0].p1.dist(Vec2::new(1.0, 0.2)) < 1e-15);
        assert!(pieces[1].p0.dist(Vec2::new(0.0, 0.2)) < 1e-15);
        assert!(pieces[1].p1.dist(Vec2::new(0.3, 0.2)) < 1e-12);
        let one = split_mod1(Vec2::new(0.1, 0.1), Vec2::new(0.2, 0.3)).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn split_raw_shear_image_with_two_wraps() {
        // F^3 without reduction on the segment (0.05, 0.1)-(0.3, 0.3) at alpha = 2.8:
        // x runs from 0.05 + 0.84 = 0.89 to 0.3 + 2.52 = 2.82, crossing 1 and 2
        let a = 2.8;
        let p0 = Vec2::new(0.05 + 3.0 * a * 0.1, 0.1);
        let p1 = Vec2::new(0.3 + 3.0 * a * 0.3, 0.3);
        let pieces = split_mod1(p0, p1).unwrap();
        assert_eq!(pieces.len(), 3);
        let total: f64 = pieces.iter().map(Segment::length).sum();
        assert!(close(total, p0.dist(p1), 1e-12));
    }

    #[test]
    fn polygon_basics() {
        let sq = Polygon::rectangle(0.0, 0.0, 2.0, 1.0);
        assert!(close(sq.area(), 2.0, 1e-15));
        assert!(sq.centroid().dist(Vec2::new(1.0, 0.5)) < 1e-15);
        let cw = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert!(cw.is_convex());
        assert!(Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.2),
            Vec2::new(1.0, 2.0)
        ])
        .is_err());
        let half = sq.clip_halfplane(&Line::vertical(0.5), true).unwrap();
        assert!(close(half.area(), 1.5, 1e-15));
        let slab = sq.clip_slab(1.0, 0.0, 0.5, 1.0).unwrap();
        assert!(close(slab.area(), 0.5, 1e-15));
        let slab = sq.clip_slab(-1.0, 0.0, -1.0, -0.5).unwrap();
        assert!(close(slab.area(), 0.5, 1e-15));
    }
}
