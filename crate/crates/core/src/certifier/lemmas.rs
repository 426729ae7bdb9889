//! Monte Carlo and constructive verifiers for the mapping lemmas, the growth
//! trichotomy and the composition pipeline.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::{clip_segment_to_polygon, Affine2, Polygon, Segment, Vec2, EPS_GEO};
use crate::partition::{
    boundary_line, chunk_rng, i3_affine, i4_affine, singularity_segment, y_k, CellLabel, LineFamily, LineKind, Side,
};
use crate::torus::{apply_map, MapId, Params, TorusPoint};

use super::report::VerifyReport;
use super::segment_map::map_segment_exact;
use super::trace::{Outcome, TraceMode, Tracer};

/// Samples per parallel chunk; each chunk draws from its own seeded stream.
const CHUNK: u64 = 256;

/// Draws a segment in S with direction `(s, 1)`, `s` uniform in `[L, 0]`,
/// length uniform in `[1e-4, 1e-2]` and base point uniform in S, clipped to S.
pub fn random_cone_segment<R: Rng>(rng: &mut R, params: &Params) -> Segment {
    let w = params.inv_alpha;
    let square = Polygon::square_s(params);
    loop {
        let p = Vec2::new(rng.gen::<f64>() * w, rng.gen::<f64>() * w);
        let s = rng.gen_range(params.cone_slope..=0.0);
        let len = rng.gen_range(1e-4..=1e-2);
        let d = Vec2::new(s, 1.0);
        let Ok(seg) = Segment::new(p, p + d * (len / d.norm())) else {
            continue;
        };
        if let Some(c) = clip_segment_to_polygon(&seg, &square) {
            if c.segment.length() > 1e-6 {
                return c.segment;
            }
        }
    }
}

fn chunked<F>(id: &str, n_samples: u64, seed: u64, params: &Params, f: F) -> VerifyReport
where
    F: Fn(u64, &mut rand_chacha::ChaCha8Rng, &mut VerifyReport) + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut rep = VerifyReport::new(id, params.alpha, seed);
            let lo = c * CHUNK;
            for i in lo..(lo + CHUNK).min(n_samples) {
                f(i, &mut rng, &mut rep);
            }
            rep
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(VerifyReport::new(id, params.alpha, seed), VerifyReport::merge)
}

/// Extends `seg` by `frac` of its length at both ends, clipped to S.
fn extend_in_s(seg: &Segment, frac: f64, params: &Params) -> Result<Segment> {
    let d = seg.direction() * frac;
    let long = Segment::new(seg.p0 - d, seg.p1 + d)?;
    clip_segment_to_polygon(&long, &Polygon::square_s(params))
        .map(|c| c.segment)
        .ok_or_else(|| LtmError::ConstructionFailure("segment leaves S".into()))
}

/// A cone-aligned segment from a random point of `L_{k-1}` down to `L_k`,
/// slightly extended past both.
pub fn bridging_segment<R: Rng>(k: u32, rng: &mut R, params: &Params) -> Result<(Segment, f64)> {
    let upper = singularity_segment(&LineFamily::scr_lk(k - 1), params)?;
    let lower = singularity_segment(&LineFamily::scr_lk(k), params)?;
    for _ in 0..10_000 {
        let z = upper.point_at(rng.gen::<f64>());
        let s = rng.gen_range(params.cone_slope..=0.0);
        let ray = Segment::new(z, z - Vec2::new(s, 1.0))?;
        let Some(q) = ray.cross_line(&lower.parent, 0.0) else {
            continue;
        };
        if lower.distance_to_point(q) > 1e-12 || q.x > params.inv_alpha {
            continue;
        }
        let Ok(seg) = Segment::new(q, z) else { continue };
        return Ok((extend_in_s(&seg, 0.01, params)?, z.y));
    }
    Err(LtmError::ConstructionFailure(format!(
        "no segment bridges L{} and L{k}",
        k - 1
    )))
}

/// Lemma 1 for `k >= 4`: the `A_k` piece of a segment bridging `L_{k-1}`,
/// `L_k` maps under `F_S` onto a segment crossing `I_{k-2}` and `I_{k-1}`.
/// With `conjugate` the samples are carried by `I3` and mapped by `G_S`,
/// and the image must cross `L*_{k-2}` and `L*_{k-1}`.
pub fn verify_lemma1(k: u32, n_samples: u64, seed: u64, tracer: &Tracer, conjugate: bool) -> Result<VerifyReport> {
    if k < 4 {
        return Err(LtmError::InvalidIndex {
            family: "Lemma 1",
            k: k as i64,
        });
    }
    let params = &tracer.params;
    let id = if conjugate { "lemma1-conjugate" } else { "lemma1" };
    // fail early when no bridging segment exists at all
    bridging_segment(k, &mut chunk_rng(seed, u64::MAX), params)?;
    let (side, targets) = if conjugate {
        (
            Side::G,
            [
                singularity_segment(&LineFamily::scr_lk(k - 2).star(), params)?,
                singularity_segment(&LineFamily::scr_lk(k - 1).star(), params)?,
            ],
        )
    } else {
        (
            Side::F,
            [
                singularity_segment(&LineFamily::scr_ik(k - 2), params)?,
                singularity_segment(&LineFamily::scr_ik(k - 1), params)?,
            ],
        )
    };
    let i3 = i3_affine(params);
    let label = CellLabel::primary(side, k, false);
    let (y_lo, y_hi) = (y_k(k - 1, params), y_k(k - 2, params));
    let part = match side {
        Side::F => &tracer.part_f,
        Side::G => &tracer.part_g,
    };
    let mut rep = chunked(id, n_samples, seed, params, |i, rng, rep| {
        let (gamma, y) = match bridging_segment(k, rng, params) {
            Ok(v) => v,
            Err(e) => return rep.fail(i, e.to_string(), None),
        };
        let seg = match side {
            Side::F => gamma,
            Side::G => match gamma.map_affine(&i3) {
                Ok(s) => s,
                Err(e) => return rep.fail(i, e.to_string(), None),
            },
        };
        if !(y_lo - 1e-15..=y_hi + 1e-15).contains(&y) {
            return rep.fail(
                i,
                format!("endpoint height {y} outside [y_{}, y_{}]", k - 1, k - 2),
                Some(seg),
            );
        }
        let image = match map_segment_exact(&seg, params, part) {
            Ok(im) => im,
            Err(e) => return rep.fail(i, e.to_string(), Some(seg)),
        };
        let piece = image
            .pieces
            .iter()
            .find(|p| p.label == Some(label))
            .and_then(|p| p.image);
        match piece {
            Some(img) if targets.iter().all(|t| img.intersect(t, EPS_GEO).is_some()) => rep.pass(),
            Some(_) => rep.fail(i, format!("image of the {label} piece misses a target line"), Some(seg)),
            None => rep.fail(i, format!("no {label} piece"), Some(seg)),
        }
    });
    rep.metrics.insert("k".into(), k as f64);
    rep.notes.push(format!(
        "endpoint heights bounded by y_{} = {y_lo:.10} and y_{} = {y_hi:.10}",
        k - 1,
        k - 2
    ));
    Ok(rep)
}

/// A cone-aligned segment from a random point of `L` up to `L_2`.
pub fn l_to_l2_segment<R: Rng>(rng: &mut R, params: &Params) -> Result<Segment> {
    let a = params.alpha;
    let w = params.inv_alpha;
    let l2 = singularity_segment(&LineFamily::scr_lk(2), params)?;
    for _ in 0..10_000 {
        let y = rng.gen_range(0.0..w * w);
        let p = Vec2::new(w - a * y, y);
        let s = rng.gen_range(params.cone_slope..=0.0);
        let ray = Segment::new(p, p + Vec2::new(s, 1.0))?;
        let Some(q) = ray.cross_line(&l2.parent, 0.0) else {
            continue;
        };
        if l2.distance_to_point(q) > 1e-12 || q.x < 0.0 {
            continue;
        }
        if let Ok(seg) = Segment::new(p, q) {
            return Ok(seg);
        }
    }
    Err(LtmError::ConstructionFailure("no segment joins L and L2".into()))
}

/// Lemma 3: segments joining `L` to `L_2` reach a v-segment.
pub fn verify_lemma3(n_samples: u64, seed: u64, tracer: &Tracer, budget: u32) -> Result<VerifyReport> {
    let params = &tracer.params;
    l_to_l2_segment(&mut chunk_rng(seed, u64::MAX), params)?;
    let mut rep = chunked("lemma3", n_samples, seed, params, |i, rng, rep| {
        let seg = match l_to_l2_segment(rng, params) {
            Ok(s) => s,
            Err(e) => return rep.fail(i, e.to_string(), None),
        };
        match tracer.trace(&seg, Side::F, budget, TraceMode::FirstDecision) {
            Ok(r) if r.outcome == Outcome::C3 => {
                rep.pass();
                if let Some(w) = r.witness {
                    rep.add_metric("iterates_total", w.iterates as f64);
                }
            }
            Ok(r) => rep.fail(i, format!("outcome {:?}", r.outcome), Some(seg)),
            Err(e) => rep.fail(i, e.to_string(), Some(seg)),
        }
    });
    if rep.samples > 0 {
        let total = rep.metrics.remove("iterates_total").unwrap_or(0.0);
        rep.metrics.insert("mean_iterates".into(), total / rep.samples as f64);
    }
    Ok(rep)
}

/// Growth trichotomy on random cone-aligned segments. A sample passes when
/// it is classified within `budget` steps, and a (C1) classification also
/// needs `delta > 0` and a growth sum below 1.
pub fn verify_growth(n_samples: u64, seed: u64, tracer: &Tracer, budget: u32) -> VerifyReport {
    let params = &tracer.params;
    chunked("growth", n_samples, seed, params, |i, rng, rep| {
        let seg = random_cone_segment(rng, params);
        match tracer.trace(&seg, Side::F, budget, TraceMode::FirstDecision) {
            Ok(r) => {
                let ok = match r.outcome {
                    Outcome::C1 => {
                        let sum = r.steps.last().and_then(|s| s.growth_sum).unwrap_or(f64::INFINITY);
                        r.delta.is_some_and(|d| d > 0.0) && sum < 1.0
                    }
                    Outcome::C2 | Outcome::C3 => true,
                    Outcome::Budget => false,
                };
                let name = match r.outcome {
                    Outcome::C1 => "c1",
                    Outcome::C2 => "c2",
                    Outcome::C3 => "c3",
                    Outcome::Budget => "budget",
                };
                rep.add_metric(name, 1.0);
                rep.add_metric("tail_pieces", r.tail_pieces as f64);
                if ok {
                    rep.pass();
                } else {
                    rep.fail(i, format!("outcome {:?}, note {:?}", r.outcome, r.note), Some(seg));
                }
            }
            Err(e) => rep.fail(i, e.to_string(), Some(seg)),
        }
    })
}

/// A segment with the affine data that produced it from an anchor segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub segment: Segment,
    /// Parameter interval on the anchor.
    pub origin: (f64, f64),
    pub branch: Affine2,
    /// `H` iterates from the anchor.
    pub iterates: u64,
    pub path: Vec<CellLabel>,
}

impl Chain {
    fn start(seg: Segment) -> Self {
        Self {
            segment: seg,
            origin: (0.0, 1.0),
            branch: Affine2::IDENTITY,
            iterates: 0,
            path: Vec::new(),
        }
    }

    /// Applies the return map of `label.side` to the piece of the segment in
    /// the cell `label`.
    fn through(&self, label: CellLabel, tracer: &Tracer) -> Result<Chain> {
        let part = match label.side {
            Side::F => &tracer.part_f,
            Side::G => &tracer.part_g,
        };
        let image = map_segment_exact(&self.segment, &tracer.params, part)?;
        let piece = image
            .pieces
            .iter()
            .filter(|p| p.label == Some(label) && p.image.is_some())
            .max_by(|a, b| (a.t1 - a.t0).total_cmp(&(b.t1 - b.t0)))
            .ok_or_else(|| LtmError::ConstructionFailure(format!("segment misses {label}")))?;
        let span = self.origin.1 - self.origin.0;
        let mut path = self.path.clone();
        path.push(label);
        Ok(Chain {
            segment: piece.image.expect("filtered"),
            origin: (self.origin.0 + piece.t0 * span, self.origin.0 + piece.t1 * span),
            branch: label.branch(&tracer.params).compose(&self.branch),
            iterates: self.iterates,
            path,
        })
    }

    /// An F step with return `k` followed by a G step with return `l`.
    fn pair(&self, f: CellLabel, g: CellLabel, tracer: &Tracer) -> Result<Chain> {
        let mut c = self.through(f, tracer)?.through(g, tracer)?;
        c.iterates += (f.k + g.k - 1) as u64;
        Ok(c)
    }

    /// Largest torus distance between `H^iterates` and the branch, at three
    /// points of the origin interval on `anchor`.
    pub fn residual(&self, anchor: &Segment, params: &Params) -> Result<f64> {
        let mut r: f64 = 0.0;
        for f in [0.02, 0.5, 0.98] {
            let p = anchor.point_at(self.origin.0 + f * (self.origin.1 - self.origin.0));
            let q = apply_map(MapId::H, self.iterates as i64, TorusPoint::from_vec(p), params)?;
            r = r.max(q.torus_distance(&TorusPoint::from_vec(self.branch.apply(p))));
        }
        Ok(r)
    }

    /// Same check for the reversed map on the `I4` images.
    pub fn reversed_residual(&self, anchor: &Segment, params: &Params) -> Result<f64> {
        let i4 = i4_affine();
        let mut r: f64 = 0.0;
        for f in [0.02, 0.5, 0.98] {
            let p = anchor.point_at(self.origin.0 + f * (self.origin.1 - self.origin.0));
            let q = apply_map(
                MapId::H,
                -(self.iterates as i64),
                TorusPoint::from_vec(i4.apply(p)),
                params,
            )?;
            r = r.max(q.torus_distance(&TorusPoint::from_vec(i4.apply(self.branch.apply(p)))));
        }
        Ok(r)
    }
}

fn is_v_segment(s: &Segment, params: &Params) -> bool {
    let (lo, hi) = (s.p0.y.min(s.p1.y), s.p0.y.max(s.p1.y));
    lo.abs() <= EPS_GEO && (hi - params.inv_alpha).abs() <= EPS_GEO
}

fn is_h_segment(s: &Segment, params: &Params) -> bool {
    let (lo, hi) = (s.p0.x.min(s.p1.x), s.p0.x.max(s.p1.x));
    lo.abs() <= EPS_GEO && (hi - params.inv_alpha).abs() <= EPS_GEO
}

fn b2() -> CellLabel {
    CellLabel::primary(Side::G, 2, false)
}

/// `G^2(B_2)`.
pub fn g2_b2(tracer: &Tracer) -> Result<Polygon> {
    let label = b2();
    let cell = tracer
        .part_g
        .cell(label)
        .ok_or_else(|| LtmError::ConstructionFailure("cell B2 missing".into()))?;
    cell.polygon.map_affine(&label.branch(&tracer.params))
}

/// The v-segment `G^2(F^2(V ∩ A_2) ∩ B_2)` for the vertical v-segment `V` at `x0`.
pub fn construct_gamma2(tracer: &Tracer, x0: f64) -> Result<Segment> {
    let w = tracer.params.inv_alpha;
    let v = Segment::new(Vec2::new(x0, 0.0), Vec2::new(x0, w))?;
    let h = Chain::start(v).through(CellLabel::primary(Side::F, 2, false), tracer)?;
    if !is_h_segment(&h.segment, &tracer.params) {
        return Err(LtmError::ConstructionFailure(
            "F^2 of the A2 piece is not an h-segment".into(),
        ));
    }
    let g = h.through(b2(), tracer)?;
    if !is_v_segment(&g.segment, &tracer.params) {
        return Err(LtmError::ConstructionFailure(
            "G^2 of the B2 piece is not a v-segment".into(),
        ));
    }
    Ok(g.segment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineWitness {
    pub m: u64,
    /// Route lengths in order, each 3 or 4.
    pub routes: Vec<u8>,
    pub chain: Chain,
    pub residual: f64,
    /// `I4` image of the produced segment, an h-segment for the reversed map.
    pub reversed: Segment,
    pub reversed_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub gamma2: Segment,
    pub meets_l2: bool,
    pub meets_l3: bool,
    /// `L_3 ∩ L`.
    pub l3_on_l: Vec2,
    /// Family carrying the left edge of `G^2(B_2)`.
    pub left_boundary: Option<LineFamily>,
    pub l3_left_of_region: bool,
    pub witnesses: Vec<PipelineWitness>,
    pub report: VerifyReport,
}

/// Route sequence for `m = 3a + 4b`, or `None` when `m` has no such form.
pub fn route_plan(m: u64) -> Option<Vec<u8>> {
    (0..=m / 4).rev().find_map(|b| {
        let rest = m - 4 * b;
        rest.is_multiple_of(3).then(|| {
            let mut v = vec![4u8; b as usize];
            v.extend(std::iter::repeat_n(3u8, (rest / 3) as usize));
            v
        })
    })
}

/// The composition pipeline from a v-segment `gamma2` in `G^2(B_2)`: it
/// meets `L_2` and `L_3`, and the 3-step (`A_2` then `B_2`) and 4-step
/// (`A_3` then `B_2`) routes reproduce v-segments in `G^2(B_2)` for every
/// `m = 3a + 4b <= max_m`.
pub fn verify_pipeline(gamma2: &Segment, tracer: &Tracer, max_m: u64) -> Result<PipelineResult> {
    let params = &tracer.params;
    let mut rep = VerifyReport::new("pipeline", params.alpha, 0);
    let region = g2_b2(tracer)?;

    rep.check(is_v_segment(gamma2, params), "input is not a v-segment");
    rep.check(region.contains(gamma2.midpoint(), EPS_GEO), "input is not in G^2(B2)");
    let meets =
        |f: LineFamily| -> Result<bool> { Ok(gamma2.intersect(&singularity_segment(&f, params)?, EPS_GEO).is_some()) };
    let meets_l2 = meets(LineFamily::scr_lk(2))?;
    let meets_l3 = meets(LineFamily::scr_lk(3))?;
    rep.check(meets_l2, "input misses L2");
    rep.check(meets_l3, "input misses L3");

    // every v-segment in G^2(B2) lies right of its left edge, so it meets L3
    // when L3 ∩ L lies left of that edge
    let y2 = y_k(2, params);
    let l3_on_l = Vec2::new(params.inv_alpha - params.alpha * y2, y2);
    let mut left_boundary: Option<(LineFamily, f64)> = None;
    for fam in [
        LineFamily::new(LineKind::ReflectedI2),
        LineFamily::new(LineKind::ReflectedI2).star(),
    ] {
        let line = boundary_line(&fam, params)?;
        let on_edge = region
            .edges()
            .any(|(a, b)| line.contains(a, 1e-9) && line.contains(b, 1e-9));
        if let (true, Some(x)) = (on_edge, line.x_at(y2)) {
            if left_boundary.is_none_or(|(_, xl)| x < xl) {
                left_boundary = Some((fam, x));
            }
        }
    }
    let l3_left_of_region = left_boundary.is_some_and(|(_, x)| l3_on_l.x < x);
    let left_boundary = left_boundary.map(|(f, _)| f);
    rep.check(left_boundary.is_some(), "no reflected I2 line bounds G^2(B2)");
    rep.check(l3_left_of_region, "L3 ∩ L is not left of G^2(B2)");

    let a2 = CellLabel::primary(Side::F, 2, false);
    let a3 = CellLabel::primary(Side::F, 3, false);
    let b2 = b2();
    let mut witnesses = Vec::new();
    for m in 1..=max_m {
        let Some(plan) = route_plan(m) else { continue };
        let mut c = Chain::start(*gamma2);
        let mut failed = None;
        for &r in &plan {
            let next = if r == 3 {
                c.pair(a2, b2, tracer)
            } else {
                c.pair(a3, b2, tracer)
            };
            match next {
                Ok(n) if is_v_segment(&n.segment, params) && region.contains(n.segment.midpoint(), EPS_GEO) => c = n,
                Ok(_) => {
                    failed = Some(format!("route {r} does not give a v-segment in G^2(B2)"));
                    break;
                }
                Err(e) => {
                    failed = Some(e.to_string());
                    break;
                }
            }
        }
        if let Some(msg) = failed {
            rep.fail(m, format!("m = {m}: {msg}"), None);
            continue;
        }
        let growth = c.segment.length() / (gamma2.length() * (c.origin.1 - c.origin.0));
        let tol = 1e-12 * growth.max(1.0) + 1e-10;
        let residual = c.residual(gamma2, params)?;
        let reversed = c.segment.map_affine(&i4_affine())?;
        let reversed_residual = c.reversed_residual(gamma2, params)?;
        let ok = c.iterates == m && residual <= tol && is_h_segment(&reversed, params) && reversed_residual <= tol;
        if ok {
            rep.pass();
        } else {
            rep.fail(
                m,
                format!(
                    "m = {m}: iterates {}, residual {residual:e}, reversed residual {reversed_residual:e}",
                    c.iterates
                ),
                Some(c.segment),
            );
        }
        witnesses.push(PipelineWitness {
            m,
            routes: plan,
            chain: c,
            residual,
            reversed,
            reversed_residual,
        });
    }
    rep.metrics.insert("witnesses".into(), witnesses.len() as f64);
    Ok(PipelineResult {
        gamma2: *gamma2,
        meets_l2,
        meets_l3,
        l3_on_l,
        left_boundary,
        l3_left_of_region,
        witnesses,
        report: rep,
    })
}
