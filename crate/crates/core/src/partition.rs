//! Return-time partition of S under F (and under G through `I3`), the
//! singularity line families and a brute-force return-time oracle.
//!
//! A point of S returns to S under F after `k` steps where `k` is the least
//! integer with `frac(x + k*alpha*y) <= 1/alpha`. Cells are the sets of
//! constant `(k, n)` with `n = floor(x + k*alpha*y)`, on which
//! `F^k(x, y) = (x + k*alpha*y - n, y)`. The builder refines S by the strips
//! `n <= x + j*alpha*y <= n + 1/alpha` for `j = 1..=k_max`; whatever is left
//! has return time above `k_max` and is kept as the tail.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::{Affine2, Line, Polygon, Segment, Vec2, EPS_GEO};
use crate::torus::{apply_map, step, MapId, Matrix2, Params, TorusPoint};

/// Pieces smaller than this are rounding slivers.
const MIN_PIECE_AREA: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// Return to S under F; cells `A`.
    F,
    /// Return to S under G; cells `B`.
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// `A_k`, bounded by the `L_k` lines.
    Primary,
    /// `A_k^2` for odd `k`, bounded by the `L_k^2` lines.
    Secondary,
    /// A strip index outside the two families; never produced for 2 < alpha < 3.
    Irregular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellLabel {
    pub side: Side,
    pub family: Family,
    pub k: u32,
    pub n: i64,
    pub starred: bool,
}

impl CellLabel {
    /// Label of the cell with return time `k` and strip index `n`.
    pub fn from_strip(side: Side, k: u32, n: i64) -> Self {
        let ki = k as i64;
        let (family, starred) = match (k, n) {
            (1, 0) => (Family::Primary, false),
            (1, 1) => (Family::Primary, true),
            (2, 1) => (Family::Primary, false),
            (_, 1) => (Family::Primary, false),
            (_, m) if m == ki - 1 => (Family::Primary, true),
            (_, m) if ki % 2 == 1 && m == (ki - 1) / 2 => (Family::Secondary, false),
            (_, m) if ki % 2 == 1 && m == (ki + 1) / 2 => (Family::Secondary, true),
            _ => (Family::Irregular, false),
        };
        CellLabel {
            side,
            family,
            k,
            n,
            starred,
        }
    }

    pub fn primary(side: Side, k: u32, starred: bool) -> Self {
        let n = match (k, starred) {
            (1, false) => 0,
            (1, true) => 1,
            (_, false) => 1,
            (_, true) => k as i64 - 1,
        };
        CellLabel::from_strip(side, k, n)
    }

    pub fn secondary(side: Side, k: u32, starred: bool) -> Self {
        let ki = k as i64;
        let n = if starred { (ki + 1) / 2 } else { (ki - 1) / 2 };
        CellLabel::from_strip(side, k, n)
    }

    /// Label of the `I1` image.
    pub fn starred_counterpart(&self) -> Self {
        CellLabel::from_strip(self.side, self.k, self.k as i64 - self.n)
    }

    /// Branch of `F^k` (or `G^k`) on the cell.
    pub fn branch(&self, params: &Params) -> Affine2 {
        let s = self.k as f64 * params.alpha;
        let n = self.n as f64;
        match self.side {
            Side::F => Affine2::new(Matrix2::new(1.0, s, 0.0, 1.0), Vec2::new(-n, 0.0)),
            Side::G => Affine2::new(Matrix2::new(1.0, 0.0, -s, 1.0), Vec2::new(0.0, n)),
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.side {
            Side::F => 'A',
            Side::G => 'B',
        };
        let star = if self.starred { "*" } else { "" };
        match self.family {
            Family::Primary => write!(f, "{letter}{}{star}", self.k),
            Family::Secondary => write!(f, "{letter}{}^2{star}", self.k),
            Family::Irregular => write!(f, "{letter}{}[n={}]", self.k, self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub label: CellLabel,
    pub polygon: Polygon,
    bbox: (Vec2, Vec2),
}

impl PartitionCell {
    fn new(label: CellLabel, polygon: Polygon) -> Self {
        let bbox = polygon.bounding_box();
        Self { label, polygon, bbox }
    }

    pub fn k(&self) -> u32 {
        self.label.k
    }

    pub fn branch(&self, params: &Params) -> Affine2 {
        self.label.branch(params)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        self.bbox
    }

    fn bbox_contains(&self, p: Vec2, eps: f64) -> bool {
        p.x >= self.bbox.0.x - eps
            && p.x <= self.bbox.1.x + eps
            && p.y >= self.bbox.0.y - eps
            && p.y <= self.bbox.1.y + eps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub side: Side,
    pub k_max: u32,
    pub params: Params,
    pub cells: Vec<PartitionCell>,
    /// Region with return time above `k_max`.
    pub tail: Vec<Polygon>,
}

impl Partition {
    pub fn tail_area(&self) -> f64 {
        self.tail.iter().map(Polygon::area).sum()
    }

    pub fn covered_area(&self) -> f64 {
        self.cells.iter().map(|c| c.polygon.area()).sum()
    }

    pub fn cells_with_label(&self, label: CellLabel) -> impl Iterator<Item = &PartitionCell> {
        self.cells.iter().filter(move |c| c.label == label)
    }

    /// First cell carrying `label`.
    pub fn cell(&self, label: CellLabel) -> Option<&PartitionCell> {
        self.cells_with_label(label).next()
    }

    pub fn labels(&self) -> Vec<CellLabel> {
        let mut v: Vec<CellLabel> = self.cells.iter().map(|c| c.label).collect();
        v.sort();
        v.dedup();
        v
    }

    /// One CSV row per cell: `label,side,k,n,area,vertices` with vertices as
    /// `x y` pairs separated by `;`.
    pub fn write_csv<W: Write>(&self, out: W, header_comment: &str) -> Result<()> {
        let mut out = out;
        for line in header_comment.lines() {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "side", "k", "n", "area", "vertices"])?;
        for c in &self.cells {
            let verts: Vec<String> = c
                .polygon
                .vertices()
                .iter()
                .map(|v| format!("{:.12} {:.12}", v.x, v.y))
                .collect();
            w.write_record([
                c.label.to_string(),
                format!("{:?}", c.label.side),
                c.label.k.to_string(),
                c.label.n.to_string(),
                format!("{:.6e}", c.polygon.area()),
                verts.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The affine map `I3(x, y) = (y, 1/alpha - x)` on the planar chart.
pub fn i3_affine(params: &Params) -> Affine2 {
    Affine2::new(Matrix2::new(0.0, 1.0, -1.0, 0.0), Vec2::new(0.0, params.inv_alpha))
}

/// `I1(x, y) = (1/alpha - x, 1/alpha - y)`.
pub fn i1_affine(params: &Params) -> Affine2 {
    let w = params.inv_alpha;
    Affine2::new(Matrix2::new(-1.0, 0.0, 0.0, -1.0), Vec2::new(w, w))
}

/// `I2(x, y) = (x, 1/alpha - y)`.
pub fn i2_affine(params: &Params) -> Affine2 {
    Affine2::new(Matrix2::new(1.0, 0.0, 0.0, -1.0), Vec2::new(0.0, params.inv_alpha))
}

/// `I4(x, y) = (y, x)`.
pub fn i4_affine() -> Affine2 {
    Affine2::new(Matrix2::new(0.0, 1.0, 1.0, 0.0), Vec2::new(0.0, 0.0))
}

fn merge_pieces(mut pieces: Vec<Polygon>) -> Vec<Polygon> {
    let mut merged = true;
    while merged && pieces.len() > 1 {
        merged = false;
        'outer: for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                let Ok(hull) = pieces[i].hull_with(&pieces[j]) else {
                    continue;
                };
                let sum = pieces[i].area() + pieces[j].area();
                if (hull.area() - sum).abs() <= 1e-12 * sum.max(1e-12) {
                    pieces[i] = hull;
                    pieces.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    pieces
}

fn build_f_partition(k_max: u32, params: &Params) -> (Vec<PartitionCell>, Vec<Polygon>) {
    let w = params.inv_alpha;
    let mut active = vec![Polygon::square_s(params)];
    let mut cells = Vec::new();
    for j in 1..=k_max {
        let s = j as f64 * params.alpha;
        let mut next_active = Vec::new();
        let mut found: Vec<(i64, Polygon)> = Vec::new();
        for poly in &active {
            let (lo, hi) = poly
                .vertices()
                .iter()
                .map(|v| v.x + s * v.y)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(u), b.max(u)));
            let mut n = lo.floor() as i64;
            while (n as f64) < hi {
                let nf = n as f64;
                if let Some(piece) = poly.clip_slab(1.0, s, nf, nf + w) {
                    if piece.area() > MIN_PIECE_AREA {
                        found.push((n, piece));
                    }
                }
                if let Some(rest) = poly.clip_slab(1.0, s, nf + w, nf + 1.0) {
                    if rest.area() > MIN_PIECE_AREA {
                        next_active.push(rest);
                    }
                }
                n += 1;
            }
        }
        let mut ns: Vec<i64> = found.iter().map(|(n, _)| *n).collect();
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            let group: Vec<Polygon> = found.iter().filter(|(m, _)| *m == n).map(|(_, p)| p.clone()).collect();
            let label = CellLabel::from_strip(Side::F, j, n);
            for poly in merge_pieces(group) {
                cells.push(PartitionCell::new(label, poly));
            }
        }
        active = merge_pieces(next_active);
    }
    (cells, active)
}

/// Builds the return-time partition of S under F (`A` cells) or G (`B` cells,
/// the `I3` images of the `A` cells).
pub fn build_partition(map: MapId, k_max: u32, params: &Params) -> Result<Partition> {
    params.require_strict("build_partition")?;
    if k_max < 5 {
        return Err(LtmError::PartitionTooSmall { k_max });
    }
    let side = match map {
        MapId::F => Side::F,
        MapId::G => Side::G,
        _ => return Err(LtmError::InvalidArgument("partitions exist for F and G only".into())),
    };
    let (cells, tail) = build_f_partition(k_max, params);
    for c in &cells {
        if c.label.family == Family::Irregular {
            log::warn!("unexpected strip index for cell {}", c.label);
        }
    }
    let (cells, tail) = match side {
        Side::F => (cells, tail),
        Side::G => {
            let t = i3_affine(params);
            let cells = cells
                .into_iter()
                .map(|c| {
                    let poly = c.polygon.map_affine(&t)?;
                    let label = CellLabel {
                        side: Side::G,
                        ..c.label
                    };
                    Ok(PartitionCell::new(label, poly))
                })
                .collect::<Result<Vec<_>>>()?;
            let tail = tail.iter().map(|p| p.map_affine(&t)).collect::<Result<Vec<_>>>()?;
            (cells, tail)
        }
    };
    Ok(Partition {
        side,
        k_max,
        params: *params,
        cells,
        tail,
    })
}

/// Return time and strip index of `p` under F, by the strip criterion.
pub fn f_return_strip(p: Vec2, params: &Params, max_k: u32) -> Option<(u32, i64)> {
    for k in 1..=max_k {
        let u = p.x + k as f64 * params.alpha * p.y;
        let n = u.floor();
        if u - n <= params.inv_alpha {
            return Some((k, n as i64));
        }
    }
    None
}

/// Return time and strip index of `p` under G.
pub fn g_return_strip(p: Vec2, params: &Params, max_k: u32) -> Option<(u32, i64)> {
    // G-return of p equals F-return of I3^{-1}(p) = (1/alpha - y, x)
    f_return_strip(Vec2::new(params.inv_alpha - p.y, p.x), params, max_k)
}

/// Cell label of `p` by the strip criterion, with no partition needed.
pub fn strip_label(p: Vec2, side: Side, params: &Params, max_k: u32) -> Option<CellLabel> {
    let (k, n) = match side {
        Side::F => f_return_strip(p, params, max_k)?,
        Side::G => g_return_strip(p, params, max_k)?,
    };
    Some(CellLabel::from_strip(side, k, n))
}

/// Smallest `i >= 1` with `map^i(p)` in S, by direct iteration; `None` when
/// the orbit does not return within `max_iter` steps.
pub fn return_time_oracle(p: TorusPoint, map: MapId, max_iter: u32, params: &Params) -> Result<Option<u32>> {
    if !matches!(map, MapId::F | MapId::G | MapId::H) {
        return Err(LtmError::InvalidArgument("oracle supports F, G and H".into()));
    }
    let mut q = apply_map(map, 0, p, params)?;
    for i in 1..=max_iter {
        q = step(map, q, params);
        if q.in_s(params) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Cell(CellLabel),
    /// Within `EPS_GEO` of a cell edge.
    Boundary,
    /// In the region with return time above `k_max`.
    Tail,
}

/// Cell containing `p`. Cells are open: points within `EPS_GEO` of an edge
/// are flagged instead of assigned.
pub fn classify(p: TorusPoint, partition: &Partition, params: &Params) -> Classification {
    let _ = params;
    let v = p.to_vec();
    let mut near_edge = false;
    for c in &partition.cells {
        if !c.bbox_contains(v, EPS_GEO) {
            continue;
        }
        let d = c.polygon.inward_distance(v);
        if d > EPS_GEO {
            return Classification::Cell(c.label);
        }
        if d >= -EPS_GEO {
            near_edge = true;
        }
    }
    if near_edge {
        return Classification::Boundary;
    }
    for t in &partition.tail {
        if t.inward_distance(v) > EPS_GEO {
            return Classification::Tail;
        }
    }
    Classification::Boundary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub x: f64,
    pub y: f64,
    pub label: String,
    pub oracle: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub samples: u64,
    pub agreed: u64,
    pub disagreed: u64,
    pub boundary_flagged: u64,
    pub tail_flagged: u64,
    /// Tail points whose oracle return time is at most `k_max`.
    pub tail_mismatch: u64,
    pub worst: Option<Disagreement>,
}

impl PartitionReport {
    /// Agreement over points that were neither boundary- nor tail-flagged;
    /// 1 when there are none.
    pub fn agreement(&self) -> f64 {
        let checked = self.agreed + self.disagreed;
        if checked == 0 {
            1.0
        } else {
            self.agreed as f64 / checked as f64
        }
    }

    fn merge(mut self, other: PartitionReport) -> PartitionReport {
        self.samples += other.samples;
        self.agreed += other.agreed;
        self.disagreed += other.disagreed;
        self.boundary_flagged += other.boundary_flagged;
        self.tail_flagged += other.tail_flagged;
        self.tail_mismatch += other.tail_mismatch;
        if self.worst.is_none() {
            self.worst = other.worst;
        }
        self
    }
}

const CHUNK: u64 = 4096;

/// Deterministic per-chunk generator, independent of the thread count.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut z = seed ^ chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn oracle_map(side: Side) -> MapId {
    match side {
        Side::F => MapId::F,
        Side::G => MapId::G,
    }
}

/// Compares the analytic classification with the iterated oracle at
/// uniform random points of S. A cell agrees when the oracle return time
/// equals its `k` and the cell branch lands where the iterated orbit does.
pub fn validate_partition(partition: &Partition, n_samples: u64, seed: u64, params: &Params) -> PartitionReport {
    let map = oracle_map(partition.side);
    let max_iter = 4 * partition.k_max + 200;
    let n_chunks = n_samples.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n_samples);
            let mut rep = PartitionReport::default();
            for _ in start..end {
                let p = TorusPoint::new(rng.gen::<f64>() * params.inv_alpha, rng.gen::<f64>() * params.inv_alpha);
                rep.samples += 1;
                let oracle = return_time_oracle(p, map, max_iter, params).ok().flatten();
                match classify(p, partition, params) {
                    Classification::Boundary => rep.boundary_flagged += 1,
                    Classification::Tail => {
                        rep.tail_flagged += 1;
                        if oracle.is_some_and(|k| k <= partition.k_max) {
                            rep.tail_mismatch += 1;
                        }
                    }
                    Classification::Cell(label) => {
                        let ok = oracle == Some(label.k) && {
                            let image = TorusPoint::from_vec(label.branch(params).apply(p.to_vec()));
                            let iterated = apply_map(map, label.k as i64, p, params);
                            iterated.is_ok_and(|q| q.torus_distance(&image) < 1e-9)
                        };
                        if ok {
                            rep.agreed += 1;
                        } else {
                            rep.disagreed += 1;
                            if rep.worst.is_none() {
                                rep.worst = Some(Disagreement {
                                    x: p.x,
                                    y: p.y,
                                    label: label.to_string(),
                                    oracle,
                                });
                            }
                        }
                    }
                }
            }
            rep
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(PartitionReport::default(), PartitionReport::merge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineKind {
    /// `x + alpha*y = 1/alpha`, in `F^-1(dS2)`.
    ScrL,
    /// `x + k*alpha*y = 1`, in `F^-k(dS1)`.
    ScrLk,
    /// `x + k*alpha*y = (k-1)/2 + 1/alpha` for odd `k`, in `F^-k(dS2)`.
    ScrLk2,
    /// `y = alpha*x`, the `I3` image of `ScrL`.
    ScrI,
    /// `y = k*alpha*x - 1 + 1/alpha`, the `I3` image of `ScrLk`.
    ScrIk,
    /// Sides of S: 1 is `x = 0`, 2 is `x = 1/alpha`, 3 is `y = 0`, 4 is `y = 1/alpha`.
    BdS(u8),
    /// Boundaries of the region around the period-4 point.
    M1,
    M2,
    /// The part of `ScrL` with `y2 < y <= 1/alpha^2`.
    TildeScrL,
    /// The part of `ScrL` with `y >= ybar`.
    BarScrL,
    /// `I2` image of `ScrIk` with `k = 2` (starred or not).
    ReflectedI2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineFamily {
    pub kind: LineKind,
    pub k: Option<u32>,
    pub starred: bool,
}

impl LineFamily {
    pub fn new(kind: LineKind) -> Self {
        Self {
            kind,
            k: None,
            starred: false,
        }
    }

    pub fn indexed(kind: LineKind, k: u32) -> Self {
        Self {
            kind,
            k: Some(k),
            starred: false,
        }
    }

    pub fn star(self) -> Self {
        Self { starred: true, ..self }
    }

    pub fn scr_l() -> Self {
        Self::new(LineKind::ScrL)
    }

    pub fn scr_lk(k: u32) -> Self {
        Self::indexed(LineKind::ScrLk, k)
    }

    pub fn scr_lk2(k: u32) -> Self {
        Self::indexed(LineKind::ScrLk2, k)
    }

    pub fn scr_i() -> Self {
        Self::new(LineKind::ScrI)
    }

    pub fn scr_ik(k: u32) -> Self {
        Self::indexed(LineKind::ScrIk, k)
    }

    pub fn bd(j: u8) -> Self {
        Self::new(LineKind::BdS(j))
    }
}

impl fmt::Display for LineFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            LineKind::ScrL => "L".to_string(),
            LineKind::ScrLk => format!("L{}", self.k.unwrap_or(0)),
            LineKind::ScrLk2 => format!("L{}^2", self.k.unwrap_or(0)),
            LineKind::ScrI => "I".to_string(),
            LineKind::ScrIk => format!("I{}", self.k.unwrap_or(0)),
            LineKind::BdS(j) => format!("dS{j}"),
            LineKind::M1 => "M1".to_string(),
            LineKind::M2 => "M2".to_string(),
            LineKind::TildeScrL => "L~".to_string(),
            LineKind::BarScrL => "L-".to_string(),
            LineKind::ReflectedI2 => "I2(I2)".to_string(),
        };
        write!(f, "{base}{}", if self.starred { "*" } else { "" })
    }
}

fn require_index(spec: &LineFamily, min: u32, odd: bool, family: &'static str) -> Result<u32> {
    match spec.k {
        Some(k) if k >= min && (!odd || k % 2 == 1) => Ok(k),
        Some(k) => Err(LtmError::InvalidIndex { family, k: k as i64 }),
        None => Err(LtmError::InvalidIndex { family, k: -1 }),
    }
}

/// `y_k = (1/alpha - 1/alpha^2) / k`, the height of `L_k` on `dS2`.
pub fn y_k(k: u32, params: &Params) -> f64 {
    let w = params.inv_alpha;
    (w - w * w) / k as f64
}

/// `Y_k`, the height of `L_k^2` on `dS1`.
pub fn big_y_k(k: u32, params: &Params) -> f64 {
    let a = params.alpha;
    ((k as f64 - 1.0) * a + 2.0) / (2.0 * k as f64 * a * a)
}

/// `ybar`, where `F^3` of `ScrL` meets `I2`.
pub fn y_bar(params: &Params) -> f64 {
    let a = params.alpha;
    (a - 1.0) / (2.0 * a * a - a)
}

/// `xbar = 1/alpha - alpha * ybar`.
pub fn x_bar(params: &Params) -> f64 {
    let a = params.alpha;
    (-a * a + 3.0 * a - 1.0) / (2.0 * a * a - a)
}

/// The composite branch `F∘G∘F^3` along the orbit of the period-4 point:
/// `F^3` on `A3`, `G` on `B1*`, `F` on `A1*`.
pub fn period4_prefix(params: &Params) -> Affine2 {
    let f3 = CellLabel::primary(Side::F, 3, false).branch(params);
    let g1s = CellLabel::primary(Side::G, 1, true).branch(params);
    let f1s = CellLabel::primary(Side::F, 1, true).branch(params);
    f1s.compose(&g1s.compose(&f3))
}

fn base_line(kind: LineKind, k: Option<u32>, spec: &LineFamily, params: &Params) -> Result<Line> {
    let a = params.alpha;
    let w = params.inv_alpha;
    match kind {
        LineKind::ScrL | LineKind::TildeScrL | LineKind::BarScrL => Line::new(1.0, a, w),
        LineKind::ScrLk => {
            let k = require_index(spec, 2, false, "L_k")?;
            Line::new(1.0, k as f64 * a, 1.0)
        }
        LineKind::ScrLk2 => {
            let k = require_index(spec, 3, true, "L_k^2")?;
            Line::new(1.0, k as f64 * a, (k as f64 - 1.0) / 2.0 + w)
        }
        LineKind::ScrI => Line::new(a, -1.0, 0.0),
        LineKind::ScrIk => {
            let k = require_index(spec, 2, false, "I_k")?;
            // y = k a x - 1 + 1/a
            Line::new(k as f64 * a, -1.0, 1.0 - w)
        }
        LineKind::BdS(j) => match j {
            1 => Ok(Line::vertical(0.0)),
            2 => Ok(Line::vertical(w)),
            3 => Ok(Line::horizontal(0.0)),
            4 => Ok(Line::horizontal(w)),
            _ => Err(LtmError::InvalidIndex {
                family: "dS",
                k: j as i64,
            }),
        },
        LineKind::M1 => {
            let t = period4_prefix(params).inverse().ok_or(LtmError::InvalidPolygon)?;
            Line::vertical(0.0).map_affine(&t)
        }
        LineKind::M2 => {
            let t = period4_prefix(params).inverse().ok_or(LtmError::InvalidPolygon)?;
            Line::new(a, -1.0, 0.0)?.map_affine(&t)
        }
        LineKind::ReflectedI2 => {
            let _ = k;
            // I2 of y = 2 a x - 1 + 1/a is y = 1 - 2 a x
            Line::new(2.0 * a, 1.0, 1.0)
        }
    }
}

/// The line carrying a singularity family.
pub fn boundary_line(spec: &LineFamily, params: &Params) -> Result<Line> {
    let line = base_line(spec.kind, spec.k, spec, params)?;
    if !spec.starred {
        return Ok(line);
    }
    match spec.kind {
        LineKind::ReflectedI2 => {
            // I2 of y = 2 a x - 1, reduced into S: y = 1 + 1/a - 2 a x
            Line::new(2.0 * params.alpha, 1.0, 1.0 + params.inv_alpha)
        }
        LineKind::BdS(_) | LineKind::M1 | LineKind::M2 => Err(LtmError::InvalidArgument(format!(
            "{} has no starred variant",
            LineFamily {
                starred: false,
                ..*spec
            }
        ))),
        _ => line.map_affine(&i1_affine(params)),
    }
}

fn point_on(l1: &Line, l2: &Line) -> Result<Vec2> {
    match crate::geometry::line_intersect(l1, l2) {
        crate::geometry::Intersection::Point(p) => Ok(p),
        crate::geometry::Intersection::Parallel => Err(LtmError::ConstructionFailure(
            "parallel lines where an intersection was expected".into(),
        )),
    }
}

/// The singularity segment carried by a family inside S.
pub fn singularity_segment(spec: &LineFamily, params: &Params) -> Result<Segment> {
    params.require_strict("singularity_segment")?;
    let w = params.inv_alpha;
    let a = params.alpha;
    let base = LineFamily {
        starred: false,
        ..*spec
    };
    let seg = match spec.kind {
        LineKind::ScrL => Segment::new(Vec2::new(0.0, w * w), Vec2::new(w, 0.0))?,
        LineKind::ScrLk => {
            let k = require_index(spec, 2, false, "L_k")?;
            if k == 2 {
                Segment::new(Vec2::new(w, y_k(2, params)), Vec2::new(0.0, 0.5 * w))?
            } else {
                let y = y_k(k - 1, params);
                Segment::new(Vec2::new(w - a * y, y), Vec2::new(w, y_k(k, params)))?
            }
        }
        LineKind::ScrLk2 => {
            let k = require_index(spec, 3, true, "L_k^2")?;
            let l = boundary_line(&base, params)?;
            let end = point_on(&l, &boundary_line(&LineFamily::scr_lk(2), params)?)?;
            Segment::new(Vec2::new(0.0, big_y_k(k, params)), end)?
        }
        LineKind::ScrI | LineKind::ScrIk => {
            let pre = match spec.kind {
                LineKind::ScrI => LineFamily::scr_l(),
                _ => LineFamily::scr_lk(require_index(spec, 2, false, "I_k")?),
            };
            singularity_segment(&pre, params)?.map_affine(&i3_affine(params))?
        }
        LineKind::BdS(j) => match j {
            1 => Segment::new(Vec2::new(0.0, 0.0), Vec2::new(0.0, w))?,
            2 => Segment::new(Vec2::new(w, 0.0), Vec2::new(w, w))?,
            3 => Segment::new(Vec2::new(0.0, 0.0), Vec2::new(w, 0.0))?,
            4 => Segment::new(Vec2::new(0.0, w), Vec2::new(w, w))?,
            _ => {
                return Err(LtmError::InvalidIndex {
                    family: "dS",
                    k: j as i64,
                })
            }
        },
        LineKind::TildeScrL => {
            let y2 = y_k(2, params);
            Segment::new(Vec2::new(w - a * y2, y2), Vec2::new(0.0, w * w))?
        }
        LineKind::BarScrL => Segment::new(Vec2::new(x_bar(params), y_bar(params)), Vec2::new(0.0, w * w))?,
        LineKind::ReflectedI2 => {
            let l = boundary_line(spec, params)?;
            let lo = l.x_at(0.0).ok_or(LtmError::InvalidPolygon)?;
            let hi = l.x_at(w).ok_or(LtmError::InvalidPolygon)?;
            return Segment::new(Vec2::new(lo, 0.0), Vec2::new(hi, w));
        }
        LineKind::M1 | LineKind::M2 => {
            let l = boundary_line(spec, params)?;
            let s = crate::geometry::clip_segment_to_polygon(
                &Segment::new(l.point() - l.direction() * 10.0, l.point() + l.direction() * 10.0)?,
                &Polygon::square_s(params),
            )
            .ok_or_else(|| LtmError::ConstructionFailure(format!("{spec} misses S")))?;
            return Ok(s.segment);
        }
    };
    if spec.starred && !matches!(spec.kind, LineKind::BdS(_)) {
        return seg.map_affine(&i1_affine(params));
    }
    Ok(seg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccumulationId {
    P1,
    P1Star,
    P2,
    P2Star,
    Q1,
    Q1Star,
    Q2,
    Q2Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccumulationPoint {
    pub id: AccumulationId,
    pub location: Vec2,
}

/// Boundary points of S where return times diverge.
pub fn accumulation_points(params: &Params) -> Vec<AccumulationPoint> {
    use AccumulationId::*;
    let w = params.inv_alpha;
    let p = [
        (P1, Vec2::new(w, 0.0)),
        (P1Star, Vec2::new(0.0, w)),
        (P2, Vec2::new(0.0, 0.5 * w)),
        (P2Star, Vec2::new(w, 0.5 * w)),
    ];
    let t = i3_affine(params);
    let q = [Q1, Q1Star, Q2, Q2Star];
    p.iter()
        .map(|&(id, location)| AccumulationPoint { id, location })
        .chain(p.iter().zip(q).map(|(&(_, loc), id)| AccumulationPoint {
            id,
            location: t.apply(loc),
        }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn line_examples() {
        let params = Params::new(2.8).unwrap();
        let l = boundary_line(&LineFamily::scr_l(), &params).unwrap();
        assert!(l.contains(Vec2::new(0.0, 0.127_551_020_4), 1e-10));
        assert!(l.contains(Vec2::new(params.inv_alpha, 0.0), 1e-14));
        let l3 = boundary_line(&LineFamily::scr_lk(3), &params).unwrap();
        assert!(close(l3.y_at(params.inv_alpha).unwrap(), 0.076_530_6, 1e-7));
        let i2 = boundary_line(&LineFamily::scr_ik(2), &params).unwrap();
        let yb = y_bar(&params);
        assert!(close(yb, 0.139_751_6, 1e-7));
        assert!(i2.contains(Vec2::new(yb, yb), 1e-14));
        assert!(boundary_line(&LineFamily::scr_lk2(4), &params).is_err());
        assert!(boundary_line(&LineFamily::scr_lk(1), &params).is_err());
    }

    #[test]
    fn starred_lines_are_i1_images() {
        let params = Params::new(2.5).unwrap();
        let star = boundary_line(&LineFamily::scr_l().star(), &params).unwrap();
        // L*: x + alpha y = 1
        assert!(star.contains(Vec2::new(1.0, 0.0), 1e-14));
        assert!(star.contains(Vec2::new(0.0, 0.4), 1e-14));
        let i2s = boundary_line(&LineFamily::scr_ik(2).star(), &params).unwrap();
        // I2*: y = 2 alpha x - 1
        assert!(i2s.contains(Vec2::new(0.3, 0.5), 1e-14));
    }

    #[test]
    fn labels_follow_strip_indices() {
        assert_eq!(CellLabel::from_strip(Side::F, 1, 0).to_string(), "A1");
        assert_eq!(CellLabel::from_strip(Side::F, 1, 1).to_string(), "A1*");
        assert_eq!(CellLabel::from_strip(Side::F, 2, 1).to_string(), "A2");
        assert_eq!(CellLabel::from_strip(Side::F, 3, 2).to_string(), "A3*");
        assert_eq!(CellLabel::from_strip(Side::F, 7, 3).to_string(), "A7^2");
        assert_eq!(CellLabel::from_strip(Side::F, 7, 4).to_string(), "A7^2*");
        assert_eq!(CellLabel::from_strip(Side::G, 6, 5).to_string(), "B6*");
        assert_eq!(CellLabel::from_strip(Side::F, 7, 2).family, Family::Irregular);
        let a5 = CellLabel::secondary(Side::F, 5, false);
        assert_eq!(a5.starred_counterpart(), CellLabel::secondary(Side::F, 5, true));
    }

    #[test]
    fn oracle_examples() {
        let params = Params::new(2.8).unwrap();
        let r = return_time_oracle(TorusPoint::new(0.05, 0.05), MapId::F, 100, &params).unwrap();
        assert_eq!(r, Some(1));
        // on the period-2 segment y = 1/(2 alpha), x and x + 1/2 both avoid Q
        let l2 = TorusPoint::new(0.4, 0.5 * params.inv_alpha);
        assert_eq!(return_time_oracle(l2, MapId::F, 10_000, &params).unwrap(), None);
        // just below L2 near p2 (x = 0.01 would sit above L2, inside A2)
        let near = TorusPoint::new(0.001, 0.5 * params.inv_alpha - 0.001);
        let k = return_time_oracle(near, MapId::F, 10_000, &params).unwrap().unwrap();
        assert!(k >= 3 && k % 2 == 1, "k = {k}");
    }

    #[test]
    fn partition_small_k_max_rejected() {
        let params = Params::new(2.8).unwrap();
        assert!(matches!(
            build_partition(MapId::F, 4, &params),
            Err(LtmError::PartitionTooSmall { .. })
        ));
        let ext = Params::new(3.2).unwrap();
        assert!(build_partition(MapId::F, 10, &ext).is_err());
    }

    #[test]
    fn partition_examples_at_2_8() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 12, &params).unwrap();
        let a2 = part.cell(CellLabel::primary(Side::F, 2, false)).unwrap();
        assert_eq!(a2.polygon.vertices().len(), 4);
        let c = TorusPoint::from_vec(a2.polygon.centroid());
        assert_eq!(return_time_oracle(c, MapId::F, 100, &params).unwrap(), Some(2));

        let a1 = part.cell(CellLabel::primary(Side::F, 1, false)).unwrap();
        let w = params.inv_alpha;
        assert!(a1
            .polygon
            .vertices()
            .iter()
            .any(|v| v.dist(Vec2::new(0.0, w * w)) < 1e-12));

        let a5 = part.cell(CellLabel::secondary(Side::F, 5, false)).unwrap();
        let y5 = big_y_k(5, &params);
        assert!(close(y5, 0.168_367_3, 1e-7));
        assert!(a5.polygon.vertices().iter().any(|v| v.dist(Vec2::new(0.0, y5)) < 1e-12));

        let total = part.covered_area() + part.tail_area();
        assert!(close(total, w * w, 1e-12));
    }

    #[test]
    fn classify_examples() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 15, &params).unwrap();
        let a3 = part.cell(CellLabel::primary(Side::F, 3, false)).unwrap();
        let c = TorusPoint::from_vec(a3.polygon.centroid());
        assert_eq!(classify(c, &part, &params), Classification::Cell(a3.label));
        let p2 = TorusPoint::new(0.0, 0.5 * params.inv_alpha);
        assert!(matches!(
            classify(p2, &part, &params),
            Classification::Boundary | Classification::Tail
        ));
        assert_eq!(
            classify(TorusPoint::new(0.05, 0.05), &part, &params),
            Classification::Cell(CellLabel::primary(Side::F, 1, false))
        );
    }

    #[test]
    fn zero_samples_give_empty_report() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 8, &params).unwrap();
        let rep = validate_partition(&part, 0, 1, &params);
        assert_eq!(rep.samples, 0);
        assert_eq!(rep.agreement(), 1.0);
    }

    #[test]
    fn secondary_lines_meet_boundaries_at_closed_forms() {
        let params = Params::new(2.3).unwrap();
        for k in (3..=15).step_by(2) {
            let l = boundary_line(&LineFamily::scr_lk2(k), &params).unwrap();
            assert!(close(l.y_at(0.0).unwrap(), big_y_k(k, &params), 1e-12));
            if k >= 5 {
                let l2 = boundary_line(&LineFamily::scr_lk(2), &params).unwrap();
                let p = point_on(&l, &l2).unwrap();
                assert!(close(p.y, big_y_k(k - 2, &params), 1e-12));
                let a = params.alpha;
                assert!(close(p.x, (a - 2.0) / ((k as f64 - 2.0) * a), 1e-12));
            }
        }
    }

    #[test]
    fn accumulation_points_at_2_5() {
        let params = Params::new(2.5).unwrap();
        let pts = accumulation_points(&params);
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[2].location, Vec2::new(0.0, 0.2));
        // q2 = I3(p2) = (1/(2 alpha), 1/alpha)
        assert!(pts[6].location.dist(Vec2::new(0.2, 0.4)) < 1e-15);
    }
}
