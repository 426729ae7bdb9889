//! Images of segments under the return maps `F_S` and `G_S`.
//!
//! A segment is cut into pieces of constant return time, each piece is sent
//! through the affine branch of its cell. [`map_segment_through`] uses the
//! polygon partition and leaves parts in the truncation tail unmapped;
//! [`map_segment_exact`] resolves those parts along the segment itself,
//! where the strip criterion is one-dimensional and any return time works.

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::{clip_segment_to_polygon, Segment, Vec2};
use crate::partition::{CellLabel, Partition, Side};
use crate::torus::{MapId, Params};

/// Parameter gaps below this between adjacent clipped pieces are rounding,
/// not tail.
const GAP_EPS: f64 = 1e-12;

/// Return times searched by the one-dimensional resolver.
pub const STRIP_MAX_K: u32 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedPiece {
    /// `None` for a piece in the truncation tail.
    pub label: Option<CellLabel>,
    /// Parameter interval on the input segment.
    pub t0: f64,
    pub t1: f64,
    pub source: Segment,
    /// Image under the branch of the cell; `None` for tail pieces.
    pub image: Option<Segment>,
}

impl MappedPiece {
    pub fn is_tail(&self) -> bool {
        self.image.is_none()
    }

    pub fn return_time(&self) -> Option<u32> {
        self.label.map(|l| l.k)
    }
}

fn side_of(map: MapId) -> Result<Side> {
    match map {
        MapId::F => Ok(Side::F),
        MapId::G => Ok(Side::G),
        _ => Err(LtmError::InvalidArgument("segments are mapped by F_S or G_S".into())),
    }
}

fn require_in_s(seg: &Segment, params: &Params) -> Result<()> {
    let w = params.inv_alpha;
    for p in [seg.p0, seg.p1] {
        let tol = 1e-9;
        if p.x < -tol || p.y < -tol || p.x > w + tol || p.y > w + tol {
            return Err(LtmError::OutsideDomain {
                x: p.x,
                y: p.y,
                region: "S",
            });
        }
    }
    Ok(())
}

fn make_piece(seg: &Segment, t0: f64, t1: f64, label: Option<CellLabel>, params: &Params) -> Option<MappedPiece> {
    let source = seg.sub(t0, t1).ok()?;
    let image = match label {
        Some(l) => {
            let b = l.branch(params);
            Some(Segment::new(b.apply(source.p0), b.apply(source.p1)).ok()?)
        }
        None => None,
    };
    Some(MappedPiece {
        label,
        t0,
        t1,
        source,
        image,
    })
}

/// Clips `seg` to every cell of `partition` and maps each piece by its
/// branch. Parts of the segment in the tail come back as unmapped pieces.
pub fn map_segment_through(
    seg: &Segment,
    map: MapId,
    params: &Params,
    partition: &Partition,
) -> Result<Vec<MappedPiece>> {
    let side = side_of(map)?;
    if side != partition.side {
        return Err(LtmError::InvalidArgument(
            "partition side does not match the map".into(),
        ));
    }
    require_in_s(seg, params)?;
    let (lo, hi) = (
        Vec2::new(seg.p0.x.min(seg.p1.x), seg.p0.y.min(seg.p1.y)),
        Vec2::new(seg.p0.x.max(seg.p1.x), seg.p0.y.max(seg.p1.y)),
    );
    let mut hits: Vec<(f64, f64, CellLabel)> = Vec::new();
    for cell in &partition.cells {
        let (blo, bhi) = cell.bbox();
        if bhi.x < lo.x - 1e-12 || blo.x > hi.x + 1e-12 || bhi.y < lo.y - 1e-12 || blo.y > hi.y + 1e-12 {
            continue;
        }
        if let Some(c) = clip_segment_to_polygon(seg, &cell.polygon) {
            hits.push((c.t0.max(0.0), c.t1.min(1.0), cell.label));
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut intervals: Vec<(f64, f64, Option<CellLabel>)> = Vec::new();
    let mut cursor = 0.0;
    for (t0, t1, label) in hits {
        if t1 <= cursor {
            continue;
        }
        let start = if t0 > cursor + GAP_EPS {
            intervals.push((cursor, t0, None));
            t0
        } else {
            // rounding gap or overlap at a shared edge
            cursor
        };
        intervals.push((start, t1, Some(label)));
        cursor = t1;
    }
    if cursor < 1.0 - GAP_EPS {
        intervals.push((cursor, 1.0, None));
    } else if let Some(last) = intervals.last_mut() {
        last.1 = 1.0;
    }
    Ok(intervals
        .into_iter()
        .filter_map(|(t0, t1, label)| make_piece(seg, t0, t1, label, params))
        .collect())
}

/// Coordinates `(a, b)` with the return criterion `frac(a + k*alpha*b) <= 1/alpha`.
fn strip_coords(p: Vec2, side: Side, params: &Params) -> (f64, f64) {
    match side {
        Side::F => (p.x, p.y),
        Side::G => (params.inv_alpha - p.y, p.x),
    }
}

/// Parameter interval on a segment with the cell it lies in.
pub type LabeledInterval = (f64, f64, CellLabel);

/// Splits the parameter interval `[t0, t1]` of `seg` by return time using the
/// strip criterion along the segment. Returns the labelled sub-intervals in
/// order and whatever remains unresolved after `max_k`.
pub fn strip_pieces(
    seg: &Segment,
    side: Side,
    t0: f64,
    t1: f64,
    params: &Params,
    max_k: u32,
) -> (Vec<LabeledInterval>, Vec<(f64, f64)>) {
    let w = params.inv_alpha;
    let (a0, b0) = strip_coords(seg.p0, side, params);
    let (a1, b1) = strip_coords(seg.p1, side, params);
    let min_len = 1e-15 / seg.length().max(1e-300);
    let mut resolved = Vec::new();
    let mut open = vec![(t0, t1)];
    for k in 1..=max_k {
        if open.is_empty() {
            break;
        }
        let s = k as f64 * params.alpha;
        let u = |t: f64| (a0 + s * b0) + t * ((a1 - a0) + s * (b1 - b0));
        let du = (a1 - a0) + s * (b1 - b0);
        let mut next = Vec::new();
        for (ta, tb) in open {
            let (ua, ub) = (u(ta), u(tb));
            if du.abs() < 1e-300 || (ub - ua).abs() < 1e-300 {
                let n = ua.floor();
                if ua - n <= w {
                    resolved.push((ta, tb, CellLabel::from_strip(side, k, n as i64)));
                } else {
                    next.push((ta, tb));
                }
                continue;
            }
            let (umin, umax) = if ua < ub { (ua, ub) } else { (ub, ua) };
            let t_of = |v: f64| ta + (v - ua) / (ub - ua) * (tb - ta);
            let mut n = umin.floor();
            while n <= umax {
                // the returning band [n, n + w] and the band (n + w, n + 1)
                for (lo, hi, ret) in [(n, n + w, true), (n + w, n + 1.0, false)] {
                    let (v0, v1) = (lo.max(umin), hi.min(umax));
                    if v1 <= v0 {
                        continue;
                    }
                    let (mut sa, mut sb) = (t_of(v0), t_of(v1));
                    if sa > sb {
                        std::mem::swap(&mut sa, &mut sb);
                    }
                    let (sa, sb) = (sa.max(ta), sb.min(tb));
                    if sb - sa <= min_len {
                        continue;
                    }
                    if ret {
                        resolved.push((sa, sb, CellLabel::from_strip(side, k, n as i64)));
                    } else {
                        next.push((sa, sb));
                    }
                }
                n += 1.0;
            }
        }
        open = next;
    }
    resolved.sort_by(|a, b| a.0.total_cmp(&b.0));
    (resolved, open)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentImage {
    pub side: Side,
    /// Mapped pieces in order along the input.
    pub pieces: Vec<MappedPiece>,
    /// Parts whose return time exceeds [`STRIP_MAX_K`].
    pub unresolved: Vec<(f64, f64)>,
    /// Number of pieces that came from the partition tail.
    pub tail_pieces: usize,
}

impl SegmentImage {
    pub fn return_times(&self) -> Vec<u32> {
        self.pieces.iter().filter_map(MappedPiece::return_time).collect()
    }
}

/// Like [`map_segment_through`], with tail pieces resolved exactly.
pub fn map_segment_exact(seg: &Segment, params: &Params, partition: &Partition) -> Result<SegmentImage> {
    let side = partition.side;
    let map = match side {
        Side::F => MapId::F,
        Side::G => MapId::G,
    };
    let raw = map_segment_through(seg, map, params, partition)?;
    let mut pieces = Vec::with_capacity(raw.len());
    let mut unresolved = Vec::new();
    let mut tail_pieces = 0;
    for p in raw {
        if !p.is_tail() {
            pieces.push(p);
            continue;
        }
        tail_pieces += 1;
        let (res, open) = strip_pieces(seg, side, p.t0, p.t1, params, STRIP_MAX_K);
        pieces.extend(
            res.into_iter()
                .filter_map(|(a, b, l)| make_piece(seg, a, b, Some(l), params)),
        );
        unresolved.extend(open);
    }
    pieces.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    Ok(SegmentImage {
        side,
        pieces,
        unresolved,
        tail_pieces,
    })
}

/// Reference decomposition by the strip criterion alone.
pub fn map_segment_strip(seg: &Segment, side: Side, params: &Params) -> Result<SegmentImage> {
    require_in_s(seg, params)?;
    let (res, open) = strip_pieces(seg, side, 0.0, 1.0, params, STRIP_MAX_K);
    Ok(SegmentImage {
        side,
        pieces: res
            .into_iter()
            .filter_map(|(a, b, l)| make_piece(seg, a, b, Some(l), params))
            .collect(),
        unresolved: open,
        tail_pieces: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cone_contains, ConeId};
    use crate::partition::{big_y_k, build_partition, strip_label, Family};

    #[test]
    fn segment_inside_a1() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 15, &params).unwrap();
        let l = params.cone_slope;
        let seg = Segment::new(Vec2::new(0.05, 0.02), Vec2::new(0.05 + 0.5 * l * 0.03, 0.05)).unwrap();
        let out = map_segment_through(&seg, MapId::F, &params, &part).unwrap();
        assert_eq!(out.len(), 1);
        let img = out[0].image.unwrap();
        assert!(cone_contains(ConeId::Cprime, img.direction(), &params).unwrap());
        let e1 = params.alpha + l;
        assert!(img.heights().1 >= e1 * seg.heights().0 - 1e-15);
    }

    #[test]
    fn segment_near_ds1_between_secondary_lines() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 15, &params).unwrap();
        let (y3, y5) = (big_y_k(3, &params), big_y_k(5, &params));
        let seg = Segment::new(Vec2::new(1e-4, y3 - 0.01), Vec2::new(1e-4, y5 + 0.002)).unwrap();
        let out = map_segment_exact(&seg, &params, &part).unwrap();
        for p in &out.pieces {
            let mid = p.source.midpoint();
            assert_eq!(p.label, strip_label(mid, Side::F, &params, 1000));
        }
        let labels: Vec<String> = out.pieces.iter().map(|p| p.label.unwrap().to_string()).collect();
        assert!(
            labels.contains(&"A5^2".to_string()) && labels.contains(&"A3".to_string()),
            "{labels:?}"
        );
    }

    #[test]
    fn cell_clipping_agrees_with_strip_reference() {
        let params = Params::new(2.5).unwrap();
        let part = build_partition(MapId::F, 15, &params).unwrap();
        let seg = Segment::new(Vec2::new(0.02, 0.01), Vec2::new(0.0, 0.39)).unwrap();
        let a = map_segment_exact(&seg, &params, &part).unwrap();
        let b = map_segment_strip(&seg, Side::F, &params).unwrap();
        assert_eq!(a.pieces.len(), b.pieces.len());
        for (p, q) in a.pieces.iter().zip(&b.pieces) {
            assert_eq!(p.label, q.label);
            assert!((p.t0 - q.t0).abs() < 1e-9 && (p.t1 - q.t1).abs() < 1e-9);
        }
        assert!(a.pieces.iter().any(|p| p.label.unwrap().family == Family::Secondary));
    }

    #[test]
    fn tail_pieces_are_marked() {
        let params = Params::new(2.8).unwrap();
        let part = build_partition(MapId::F, 6, &params).unwrap();
        let w = params.inv_alpha;
        let seg = Segment::new(Vec2::new(0.0, 0.5 * w - 0.01), Vec2::new(0.0, 0.5 * w - 0.001)).unwrap();
        let out = map_segment_through(&seg, MapId::F, &params, &part).unwrap();
        assert!(out.iter().any(MappedPiece::is_tail));
        let exact = map_segment_exact(&seg, &params, &part).unwrap();
        assert!(exact.pieces.iter().all(|p| p.image.is_some()));
        assert!(exact.unresolved.is_empty());
    }
}
