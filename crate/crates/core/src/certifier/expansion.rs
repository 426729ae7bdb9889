//! Expansion factors and the inductive margin near the accumulation point p2.

use crate::error::{LtmError, Result};
use crate::geometry::{line_intersect, Intersection, Line, Vec2};
use crate::partition::{big_y_k, boundary_line, LineFamily};
use crate::torus::Params;

/// `E_k = k*alpha + L`, the least sup-norm expansion of cone vectors under `DF^k`.
pub fn expansion_factor(k: u32, params: &Params) -> f64 {
    k as f64 * params.alpha + params.cone_slope
}

/// `sum 1/E_k` over the return times in `ks`.
pub fn growth_sum(ks: &[u32], params: &Params) -> Result<f64> {
    if ks.is_empty() {
        return Err(LtmError::InvalidArgument("growth sum over an empty list".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(LtmError::InvalidIndex {
            family: "return time",
            k: k as i64,
        });
    }
    Ok(ks.iter().map(|&k| 1.0 / expansion_factor(k, params)).sum())
}

pub(crate) fn intersect(l1: &Line, l2: &Line) -> Result<Vec2> {
    match line_intersect(l1, l2) {
        Intersection::Point(p) => Ok(p),
        Intersection::Parallel => Err(LtmError::ConstructionFailure("parallel lines".into())),
    }
}

/// `L_k^2 ∩ L_2`.
pub fn secondary_on_l2(k: u32, params: &Params) -> Result<Vec2> {
    intersect(
        &boundary_line(&LineFamily::scr_lk2(k), params)?,
        &boundary_line(&LineFamily::scr_lk(2), params)?,
    )
}

/// Line of gradient `1/L` (the steepest cone boundary) through `p`.
pub fn cone_edge_line(p: Vec2, params: &Params) -> Result<Line> {
    Line::point_direction(p, Vec2::new(params.cone_slope, 1.0))
}

/// `y_l`: where the gradient-`1/L` line through `L_k^2 ∩ L_2` meets `L_{k-4}^2`,
/// built from the lines themselves.
pub fn y_l(k: u32, params: &Params) -> Result<f64> {
    if k < 7 || k.is_multiple_of(2) {
        return Err(LtmError::InvalidIndex {
            family: "f_alpha",
            k: k as i64,
        });
    }
    let start = secondary_on_l2(k, params)?;
    let edge = cone_edge_line(start, params)?;
    Ok(intersect(&edge, &boundary_line(&LineFamily::scr_lk2(k - 4), params)?)?.y)
}

/// The displayed closed form of `y_l`, used as a cross-check.
pub fn y_l_closed_form(k: u32, params: &Params) -> f64 {
    let a = params.alpha;
    let l = params.cone_slope;
    let kf = k as f64;
    ((kf - 4.0) * a * big_y_k(k - 4, params) - (a - 2.0) / ((kf - 2.0) * a) + l * big_y_k(k - 2, params))
        / (l + (kf - 4.0) * a)
}

/// Inductive margin `f_alpha(k) = (Y_k - Y_{k-2}) E_k - (1/(1 - 1/E_2)) (1/(2 alpha) - y_l)`.
pub fn f_alpha(k: u32, params: &Params) -> Result<f64> {
    let yl = y_l(k, params)?;
    Ok(margin(k, yl, params))
}

/// `(Y_k - Y_{k-2}) E_k - (1/(1 - 1/E_2)) (1/(2 alpha) - y)`.
pub(crate) fn margin(k: u32, y: f64, params: &Params) -> f64 {
    let e2 = expansion_factor(2, params);
    (big_y_k(k, params) - big_y_k(k - 2, params)) * expansion_factor(k, params)
        - (0.5 * params.inv_alpha - y) / (1.0 - 1.0 / e2)
}
