//! Tracing cone-aligned segments through alternating `F_S` and `G_S`
//! images, classified by the growth trichotomy.
//!
//! Each step looks at the current segment (in `C` before `F_S`, in `C'`
//! before `G_S`) and checks, in order:
//!
//! * (C3) a singularity pattern known to lead to a v-segment, confirmed by a
//!   beam search over images that ends in an actual v-segment;
//! * (C2) a bridge between consecutive lines `L_{k-1}`, `L_k` (or starred);
//! * (C1) the growth condition `sum 1/E_k < 1` over the crossed cells, with
//!   the margin of the widest image.
//!
//! Segments on the G side are tested through `I3^{-1}`, which carries the
//! `I` families onto the `L` families.

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::{Affine2, Segment, Vec2, EPS_GEO};
use crate::partition::{
    build_partition, i1_affine, i3_affine, singularity_segment, CellLabel, LineFamily, Partition, Side,
};
use crate::torus::{apply_map, MapId, Params, TorusPoint};

use super::expansion::growth_sum;
use super::periodic::periodic_point_with;
use super::segment_map::{map_segment_exact, MappedPiece};

/// Largest `k` checked for a bridge `L_{k-1}`, `L_k`.
pub const MAX_BRIDGE_K: u32 = 200;

pub const DEFAULT_BUDGET: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// A piece of the image is wider than the segment is tall, by `1 + delta`.
    C1,
    /// The segment bridges consecutive singularity lines.
    C2,
    /// A v-segment was produced.
    C3,
    /// Undecided within the budget.
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceMode {
    /// Stop at the first step that satisfies one of (C1)-(C3).
    FirstDecision,
    /// Continue through (C1) steps until (C2), (C3) or the budget.
    UntilBridge,
}

/// Singularity patterns that lead to a v-segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum C3Trigger {
    /// Crosses `L_2` and `L_2*`.
    L2L2Star,
    /// Crosses `L_2` and `L_3` (or both starred).
    L2L3,
    /// Crosses `L_3` and `L_3^2` (or both starred).
    L3L32,
    /// Crosses `L` and `L_2` (or both starred).
    LL2,
    /// Crosses the local stable segment of the period-4 point.
    StableSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Map applied at this step.
    pub side: Side,
    /// Return time of the piece carried forward.
    pub power: u32,
    /// Cells crossed by the input, in order.
    pub crossed: Vec<CellLabel>,
    /// Segments in the truncation tail or beyond the strip resolver.
    pub tail_pieces: usize,
    pub input: Segment,
    /// Image of the piece carried forward.
    pub image: Segment,
    /// Growth sum over the crossed cells.
    pub growth_sum: Option<f64>,
    /// Outcome decided at this step, if any.
    pub decision: Option<Outcome>,
}

/// A v-segment (or h-segment for traces rooted on the G side) together with
/// the orbit data that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VWitness {
    pub produced: Segment,
    /// Segment in S where the iterate count starts.
    pub anchor: Segment,
    /// Parameter interval on `anchor` of the points that land on `produced`.
    pub origin: (f64, f64),
    /// Number of `H` iterates (`calH` when rooted on the G side).
    pub iterates: u64,
    /// Cells visited, one per return-map step.
    pub path: Vec<CellLabel>,
    /// Affine map from anchor coordinates to `produced`.
    pub branch: Affine2,
    /// Largest torus distance between `H^iterates` and `branch` at sample points.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub outcome: Outcome,
    /// Expansion margin when the outcome is (C1).
    pub delta: Option<f64>,
    /// `k` of the bridge `L_{k-1}`, `L_k` when (C2).
    pub k_bridge: Option<u32>,
    pub bridge_starred: bool,
    /// Side of the segment that bridges, when (C2).
    pub bridge_side: Option<Side>,
    pub trigger: Option<C3Trigger>,
    pub steps: Vec<TraceStep>,
    pub produced: Option<Segment>,
    pub witness: Option<VWitness>,
    /// Tail pieces seen along the way.
    pub tail_pieces: usize,
    pub note: Option<String>,
}

impl TraceResult {
    pub fn is_classified(&self) -> bool {
        self.outcome != Outcome::Budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Return-map steps explored.
    pub levels: usize,
    /// Nodes kept per level.
    pub beam: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { levels: 24, beam: 12 }
    }
}

#[derive(Debug, Clone)]
struct Node {
    seg: Segment,
    side: Side,
    origin: (f64, f64),
    branch: Affine2,
    iterates: u64,
    pending: Option<u32>,
    path: Vec<CellLabel>,
}

/// Singularity segments used by the pattern checks, cached per parameter.
#[derive(Debug, Clone)]
struct Lines {
    scr_l: [Segment; 2],
    lk: Vec<[Segment; 2]>,
    l32: [Segment; 2],
    stable: Option<[Segment; 2]>,
}

impl Lines {
    fn new(params: &Params, stable: Option<Segment>) -> Result<Self> {
        let both = |f: LineFamily| -> Result<[Segment; 2]> {
            Ok([
                singularity_segment(&f, params)?,
                singularity_segment(&f.star(), params)?,
            ])
        };
        let lk = (2..=MAX_BRIDGE_K)
            .map(|k| both(LineFamily::scr_lk(k)))
            .collect::<Result<Vec<_>>>()?;
        let stable = match stable {
            Some(s) => Some([s, s.map_affine(&i1_affine(params))?]),
            None => None,
        };
        Ok(Self {
            scr_l: both(LineFamily::scr_l())?,
            lk,
            l32: both(LineFamily::scr_lk2(3))?,
            stable,
        })
    }

    fn lk(&self, k: u32) -> &[Segment; 2] {
        &self.lk[(k - 2) as usize]
    }
}

fn crosses(seg: &Segment, line: &Segment) -> bool {
    seg.intersect(line, EPS_GEO).is_some()
}

/// Crosses in the relative interior of `seg`.
fn crosses_interior(seg: &Segment, line: &Segment) -> bool {
    match seg.intersect(line, EPS_GEO) {
        Some(p) => {
            let t = seg.project(p);
            t > 1e-9 && t < 1.0 - 1e-9
        }
        None => false,
    }
}

fn bbox_overlap(a: &Segment, b: &Segment) -> bool {
    let lo = |s: &Segment| Vec2::new(s.p0.x.min(s.p1.x), s.p0.y.min(s.p1.y));
    let hi = |s: &Segment| Vec2::new(s.p0.x.max(s.p1.x), s.p0.y.max(s.p1.y));
    let (al, ah, bl, bh) = (lo(a), hi(a), lo(b), hi(b));
    al.x <= bh.x + EPS_GEO && bl.x <= ah.x + EPS_GEO && al.y <= bh.y + EPS_GEO && bl.y <= ah.y + EPS_GEO
}

/// Traces segments for one parameter value.
#[derive(Debug, Clone)]
pub struct Tracer {
    pub params: Params,
    pub part_f: Partition,
    pub part_g: Partition,
    pub search: SearchConfig,
    lines: Lines,
    i3_inv: Affine2,
}

impl Tracer {
    pub fn new(params: &Params, k_max: u32) -> Result<Self> {
        let part_f = build_partition(MapId::F, k_max, params)?;
        let part_g = build_partition(MapId::G, k_max, params)?;
        Self::with_partitions(params, part_f, part_g)
    }

    pub fn with_partitions(params: &Params, part_f: Partition, part_g: Partition) -> Result<Self> {
        params.require_strict("trace_segment")?;
        if part_f.side != Side::F || part_g.side != Side::G {
            return Err(LtmError::InvalidArgument("expected an F and a G partition".into()));
        }
        // the stable segment is a trigger only where the period-4 pattern holds
        let stable = periodic_point_with(params, &part_f, &part_g).ok().map(|pd| pd.gamma_s);
        let lines = Lines::new(params, stable)?;
        let i3_inv = i3_affine(params).inverse().ok_or(LtmError::InvalidPolygon)?;
        Ok(Self {
            params: *params,
            part_f,
            part_g,
            search: SearchConfig::default(),
            lines,
            i3_inv,
        })
    }

    fn partition(&self, side: Side) -> &Partition {
        match side {
            Side::F => &self.part_f,
            Side::G => &self.part_g,
        }
    }

    /// The segment in F-side coordinates.
    fn f_view(&self, seg: &Segment, side: Side) -> Result<Segment> {
        match side {
            Side::F => Ok(*seg),
            Side::G => seg.map_affine(&self.i3_inv),
        }
    }

    /// Pattern checks on an F-side view.
    pub fn c3_triggers(&self, g: &Segment) -> Vec<C3Trigger> {
        let ln = &self.lines;
        let mut out = Vec::new();
        let l2 = ln.lk(2);
        let l3 = ln.lk(3);
        if crosses(g, &l2[0]) && crosses(g, &l2[1]) {
            out.push(C3Trigger::L2L2Star);
        }
        if (0..2).any(|s| crosses(g, &l2[s]) && crosses(g, &l3[s])) {
            out.push(C3Trigger::L2L3);
        }
        if (0..2).any(|s| crosses(g, &l3[s]) && crosses(g, &ln.l32[s])) {
            out.push(C3Trigger::L3L32);
        }
        if (0..2).any(|s| crosses(g, &ln.scr_l[s]) && crosses(g, &l2[s])) {
            out.push(C3Trigger::LL2);
        }
        if let Some(st) = &ln.stable {
            if st.iter().any(|s| crosses_interior(g, s)) {
                out.push(C3Trigger::StableSegment);
            }
        }
        out
    }

    /// Smallest `k >= 3` with `g` crossing `L_{k-1}` and `L_k` (or both
    /// starred), on an F-side view.
    pub fn bridge(&self, g: &Segment) -> Option<(u32, bool)> {
        for star in [false, true] {
            let s = star as usize;
            let mut prev = crosses(g, &self.lines.lk(2)[s]);
            for k in 3..=MAX_BRIDGE_K {
                let line = &self.lines.lk(k)[s];
                let hit = bbox_overlap(g, line) && crosses(g, line);
                if prev && hit {
                    return Some((k, star));
                }
                prev = hit;
            }
        }
        None
    }

    fn target_reached(&self, seg: &Segment, root: Side) -> bool {
        let w = self.params.inv_alpha;
        let (a, b) = match root {
            Side::F => (seg.p0.y, seg.p1.y),
            Side::G => (seg.p0.x, seg.p1.x),
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo.abs() <= EPS_GEO && (hi - w).abs() <= EPS_GEO
    }

    fn expand(&self, node: &Node, root: Side) -> Result<Vec<Node>> {
        let image = map_segment_exact(&node.seg, &self.params, self.partition(node.side))?;
        let mut out = Vec::new();
        for p in &image.pieces {
            let (Some(label), Some(img)) = (p.label, p.image) else {
                continue;
            };
            let branch = label.branch(&self.params).compose(&node.branch);
            let span = node.origin.1 - node.origin.0;
            let origin = (node.origin.0 + p.t0 * span, node.origin.0 + p.t1 * span);
            let (iterates, pending) = match node.pending {
                None => (node.iterates, Some(label.k)),
                Some(k) => (node.iterates + (k + label.k - 1) as u64, None),
            };
            let mut path = node.path.clone();
            path.push(label);
            out.push(Node {
                seg: img,
                side: other(node.side),
                origin,
                branch,
                iterates,
                pending,
                path,
            });
        }
        let _ = root;
        Ok(out)
    }

    /// Beam search for a v-segment (h-segment when `root` is G) in the
    /// images of `start`.
    fn search_target(&self, start: Node, anchor: &Segment, root: Side) -> Result<Option<VWitness>> {
        let mut level = vec![start];
        for _ in 0..self.search.levels {
            let mut next = Vec::new();
            for node in &level {
                next.extend(self.expand(node, root)?);
            }
            let mut hits: Vec<&Node> = next
                .iter()
                .filter(|n| n.pending.is_none() && self.target_reached(&n.seg, root))
                .collect();
            hits.sort_by(|a, b| {
                a.iterates
                    .cmp(&b.iterates)
                    .then(b.seg.length().total_cmp(&a.seg.length()))
            });
            for hit in hits {
                if let Some(w) = self.witness(hit, anchor, root)? {
                    return Ok(Some(w));
                }
            }
            next.sort_by(|a, b| b.seg.diameter().total_cmp(&a.seg.diameter()));
            next.truncate(self.search.beam);
            if next.is_empty() {
                break;
            }
            level = next;
        }
        Ok(None)
    }

    /// Confirms a node against direct iteration of `H` (or `calH`).
    fn witness(&self, node: &Node, anchor: &Segment, root: Side) -> Result<Option<VWitness>> {
        let map = match root {
            Side::F => MapId::H,
            Side::G => MapId::CalH,
        };
        let growth = node.seg.length() / (anchor.length() * (node.origin.1 - node.origin.0)).max(1e-300);
        let tol = 1e-12 * growth.max(1.0) + 1e-10;
        let mut residual: f64 = 0.0;
        for f in [0.02, 0.5, 0.98] {
            let t = node.origin.0 + f * (node.origin.1 - node.origin.0);
            let p = anchor.point_at(t);
            let q = apply_map(map, node.iterates as i64, TorusPoint::from_vec(p), &self.params)?;
            let expect = TorusPoint::from_vec(node.branch.apply(p));
            residual = residual.max(q.torus_distance(&expect));
        }
        if residual > tol {
            log::debug!(
                "witness rejected, residual {residual:e} after {} iterates",
                node.iterates
            );
            return Ok(None);
        }
        Ok(Some(VWitness {
            produced: node.seg,
            anchor: *anchor,
            origin: node.origin,
            iterates: node.iterates,
            path: node.path.clone(),
            branch: node.branch,
            residual,
        }))
    }

    /// Looks for a v-segment in the images of `seg`, which sits on `side`.
    /// `anchor` is where the iterate count starts: `seg` itself when it is on
    /// the root side, otherwise the input of the previous step, with `seg`
    /// the image of `anchor[origin]` under `prev`.
    fn confirm_c3(
        &self,
        seg: &Segment,
        side: Side,
        root: Side,
        prev: Option<(&Segment, (f64, f64), CellLabel)>,
    ) -> Result<Option<VWitness>> {
        match prev {
            None => {
                let start = Node {
                    seg: *seg,
                    side,
                    origin: (0.0, 1.0),
                    branch: Affine2::IDENTITY,
                    iterates: 0,
                    pending: None,
                    path: Vec::new(),
                };
                self.search_target(start, seg, root)
            }
            Some((anchor, origin, label)) => {
                let start = Node {
                    seg: *seg,
                    side,
                    origin,
                    branch: label.branch(&self.params),
                    iterates: 0,
                    pending: Some(label.k),
                    path: vec![label],
                };
                self.search_target(start, anchor, root)
            }
        }
    }

    /// Traces `seg` (in `C`, on the F side) under the default budget.
    pub fn trace_segment(&self, seg: &Segment, budget: u32) -> Result<TraceResult> {
        self.trace(seg, Side::F, budget, TraceMode::FirstDecision)
    }

    /// Traces `seg` starting with the return map of `side`.
    pub fn trace(&self, seg: &Segment, side: Side, budget: u32, mode: TraceMode) -> Result<TraceResult> {
        if budget == 0 {
            return Err(LtmError::InvalidArgument("budget must be at least 1".into()));
        }
        let root = side;
        let mut result = TraceResult {
            outcome: Outcome::Budget,
            delta: None,
            k_bridge: None,
            bridge_starred: false,
            bridge_side: None,
            trigger: None,
            steps: Vec::new(),
            produced: None,
            witness: None,
            tail_pieces: 0,
            note: None,
        };
        let mut cur = *seg;
        let mut cur_side = side;
        // the previous input on the root side and the piece that led here
        let mut prev: Option<(Segment, (f64, f64), CellLabel)> = None;
        for _ in 0..budget {
            let view = self.f_view(&cur, cur_side)?;

            let triggers = self.c3_triggers(&view);
            if !triggers.is_empty() {
                let p = prev.as_ref().map(|(a, o, l)| (a, *o, *l));
                if let Some(w) = self.confirm_c3(&cur, cur_side, root, p)? {
                    result.outcome = Outcome::C3;
                    result.trigger = Some(triggers[0]);
                    result.produced = Some(w.produced);
                    result.witness = Some(w);
                    return Ok(result);
                }
                log::debug!("pattern {:?} not confirmed", triggers);
            }

            if let Some((k, star)) = self.bridge(&view) {
                result.outcome = Outcome::C2;
                result.k_bridge = Some(k);
                result.bridge_starred = star;
                result.bridge_side = Some(cur_side);
                return Ok(result);
            }

            let image = map_segment_exact(&cur, &self.params, self.partition(cur_side))?;
            let mapped: Vec<&MappedPiece> = image.pieces.iter().filter(|p| p.image.is_some()).collect();
            let tails = image.unresolved.len();
            result.tail_pieces += tails;
            if mapped.is_empty() {
                result.note = Some("every piece lies in the tail".into());
                return Ok(result);
            }
            let crossed: Vec<CellLabel> = mapped.iter().filter_map(|p| p.label).collect();
            let ks: Vec<u32> = crossed.iter().map(|l| l.k).collect();
            let sum = growth_sum(&ks, &self.params)?;

            // widest image on the F side, tallest on the G side
            let gain = |p: &MappedPiece| -> f64 {
                let (v, h) = p.image.map(|s| s.heights()).unwrap_or((0.0, 0.0));
                match cur_side {
                    Side::F => h,
                    Side::G => v,
                }
            };
            let best = mapped
                .iter()
                .copied()
                .max_by(|a, b| {
                    gain(a)
                        .total_cmp(&gain(b))
                        .then_with(|| b.label.map(|l| l.k).cmp(&a.label.map(|l| l.k)))
                })
                .expect("nonempty");
            let (in_v, in_h) = cur.heights();
            let base = match cur_side {
                Side::F => in_v,
                Side::G => in_h,
            };
            let delta = gain(best) / base - 1.0;
            let label = best.label.expect("mapped piece has a label");
            let img = best.image.expect("mapped piece has an image");
            let decided = sum < 1.0 && tails == 0 && delta > 0.0;
            result.steps.push(TraceStep {
                side: cur_side,
                power: label.k,
                crossed,
                tail_pieces: tails,
                input: cur,
                image: img,
                growth_sum: Some(sum),
                decision: decided.then_some(Outcome::C1),
            });
            if decided && mode == TraceMode::FirstDecision {
                result.outcome = Outcome::C1;
                result.delta = Some(delta);
                return Ok(result);
            }
            if decided {
                result.delta = Some(result.delta.map_or(delta, |d: f64| d.min(delta)));
            }

            prev = if cur_side == root {
                Some((cur, (best.t0, best.t1), label))
            } else {
                None
            };
            cur = img;
            cur_side = other(cur_side);
        }
        result.note = Some(format!("undecided after {budget} steps"));
        Ok(result)
    }
}

fn other(side: Side) -> Side {
    match side {
        Side::F => Side::G,
        Side::G => Side::F,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cone_contains, ConeId};
    use crate::partition::y_k;

    fn tracer(a: f64) -> (Params, Tracer) {
        let params = Params::new(a).unwrap();
        let t = Tracer::new(&params, 15).unwrap();
        (params, t)
    }

    #[test]
    fn l2_to_l3_gives_v_segment_in_four_iterates() {
        let (params, t) = tracer(2.15);
        let w = params.inv_alpha;
        let a = params.alpha;
        // vertical segment near dS2 from below L3 to above L2
        let x = w - 0.01;
        let y3 = (1.0 - x) / (3.0 * a);
        let y2 = (1.0 - x) / (2.0 * a);
        let seg = Segment::new(Vec2::new(x, y3 - 0.002), Vec2::new(x, y2 + 0.002)).unwrap();
        let r = t.trace_segment(&seg, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.outcome, Outcome::C3);
        let w = r.witness.unwrap();
        assert!(w.iterates <= 4, "{}", w.iterates);
        assert!(w.produced.p0.y.min(w.produced.p1.y).abs() < EPS_GEO);
    }

    #[test]
    fn single_cell_segment_is_c1() {
        let (params, t) = tracer(2.5);
        let seg = Segment::new(
            Vec2::new(0.05, 0.02),
            Vec2::new(0.05 + 0.5 * params.cone_slope * 0.01, 0.03),
        )
        .unwrap();
        let r = t.trace_segment(&seg, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.outcome, Outcome::C1);
        assert!(r.delta.unwrap() > 0.0);
        assert_eq!(r.steps.len(), 1);
        assert!(r.steps[0].growth_sum.unwrap() < 1.0);
    }

    #[test]
    fn segment_near_p1_bridges() {
        let (params, t) = tracer(2.5);
        let w = params.inv_alpha;
        let seg = Segment::new(Vec2::new(w - 1e-3, 0.0), Vec2::new(w - 1e-3, y_k(6, &params))).unwrap();
        let r = t.trace_segment(&seg, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.outcome, Outcome::C2);
        assert!(r.k_bridge.unwrap() >= 3);
    }

    #[test]
    fn images_alternate_cones() {
        let (params, t) = tracer(2.5);
        let seg = Segment::new(Vec2::new(0.3, 0.1), Vec2::new(0.3 - 0.3 * 1e-3, 0.1 + 1e-3)).unwrap();
        let r = t.trace(&seg, Side::F, 12, TraceMode::UntilBridge).unwrap();
        for s in &r.steps {
            let (cin, cout) = match s.side {
                Side::F => (ConeId::C, ConeId::Cprime),
                Side::G => (ConeId::Cprime, ConeId::C),
            };
            assert!(cone_contains(cin, s.input.direction(), &params).unwrap());
            assert!(cone_contains(cout, s.image.direction(), &params).unwrap());
        }
    }
}
