//! Parameter thresholds as roots of scalar functions assembled from the
//! live constructions, solved by bisection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::partition::{boundary_line, x_bar, y_k, LineFamily};
use crate::torus::Params;

use super::expansion::{cone_edge_line, expansion_factor, f_alpha, growth_sum, intersect, margin, secondary_on_l2};
use super::periodic::{periodic_point, PeriodicData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdId {
    Alpha0,
    Alpha1,
    Alpha2,
    Alpha3,
    Alpha4,
    Alpha5,
    Alpha7,
    Alpha8,
}

impl ThresholdId {
    pub const ALL: [ThresholdId; 8] = [
        ThresholdId::Alpha0,
        ThresholdId::Alpha1,
        ThresholdId::Alpha2,
        ThresholdId::Alpha3,
        ThresholdId::Alpha4,
        ThresholdId::Alpha5,
        ThresholdId::Alpha7,
        ThresholdId::Alpha8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ThresholdId::Alpha0 => "alpha0",
            ThresholdId::Alpha1 => "alpha1",
            ThresholdId::Alpha2 => "alpha2",
            ThresholdId::Alpha3 => "alpha3",
            ThresholdId::Alpha4 => "alpha4",
            ThresholdId::Alpha5 => "alpha5",
            ThresholdId::Alpha7 => "alpha7",
            ThresholdId::Alpha8 => "alpha8",
        }
    }

    /// What the defining function measures.
    pub fn description(&self) -> &'static str {
        match self {
            ThresholdId::Alpha0 => "1/E1 + 1/E3 + 1/E4 - 1",
            ThresholdId::Alpha1 => "2a^3 - 4a^2 - a + 1",
            ThresholdId::Alpha2 => "(y_u - 1/a + 1)/a - (1/a + 1/a^2)/2, y_u = gamma_u ∩ L",
            ThresholdId::Alpha3 => "y_u - y_2",
            ThresholdId::Alpha4 => "y_u - (1/a + a x_u' - 1), x_u' from the F^3 branch on A3",
            ThresholdId::Alpha5 => "xbar - x_s, x_s = gamma_s ∩ L2",
            ThresholdId::Alpha7 => "(Y5 - Y3) E5 - (1/(1 - 1/E2)) (1/(2a) - y_m)",
            ThresholdId::Alpha8 => "f_a(7)",
        }
    }

    /// Sign-change interval.
    pub fn bracket(&self) -> (f64, f64) {
        match self {
            ThresholdId::Alpha0 => (2.05, 2.5),
            ThresholdId::Alpha1 => (2.05, 2.5),
            ThresholdId::Alpha2 => (2.08, 2.3),
            ThresholdId::Alpha3 => (2.5, 2.9),
            ThresholdId::Alpha4 => (2.08, 2.3),
            ThresholdId::Alpha5 => (2.08, 2.3),
            ThresholdId::Alpha7 => (2.03, 2.11),
            ThresholdId::Alpha8 => (2.001, 2.05),
        }
    }

    /// Published approximation and the tolerance it is quoted to.
    pub fn stated(&self) -> (f64, f64) {
        match self {
            ThresholdId::Alpha0 => (2.1319, 5e-5),
            ThresholdId::Alpha1 => (2.125, 5e-4),
            ThresholdId::Alpha2 => (2.127, 5e-4),
            ThresholdId::Alpha3 => (2.694, 5e-4),
            ThresholdId::Alpha4 => (2.1239, 5e-5),
            ThresholdId::Alpha5 => (2.124, 5e-4),
            ThresholdId::Alpha7 => (2.072, 5e-4),
            ThresholdId::Alpha8 => (2.012, 5e-4),
        }
    }

    pub fn from_name(s: &str) -> Option<ThresholdId> {
        ThresholdId::ALL.into_iter().find(|id| id.name() == s)
    }
}

impl fmt::Display for ThresholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `(x_u, y_u)`: the unstable line through `z_p` meets `L`.
pub fn unstable_on_l(pd: &PeriodicData, params: &Params) -> Result<(f64, f64)> {
    let p = pd.unstable_meets(&boundary_line(&LineFamily::scr_l(), params)?)?;
    Ok((p.x, p.y))
}

/// `x_u'`: abscissa of `F^3(x_u, y_u)` through the `A3` branch.
pub fn x_u_prime(x_u: f64, y_u: f64, params: &Params) -> f64 {
    x_u + 3.0 * params.alpha * y_u - 1.0
}

/// `x_s`: the stable line through `z_p` meets `L2`.
pub fn x_s(pd: &PeriodicData, params: &Params) -> Result<f64> {
    Ok(pd.stable_meets(&boundary_line(&LineFamily::scr_lk(2), params)?)?.x)
}

/// `y_m`: the stable line meets the gradient-`1/L` line through `L5^2 ∩ L2`.
pub fn y_m(pd: &PeriodicData, params: &Params) -> Result<f64> {
    let edge = cone_edge_line(secondary_on_l2(5, params)?, params)?;
    Ok(intersect(&pd.stable_line()?, &edge)?.y)
}

/// The displayed closed form of `y_m`, used as a cross-check.
pub fn y_m_closed_form(pd: &PeriodicData, params: &Params) -> f64 {
    let a = params.alpha;
    let l = params.cone_slope;
    let y3 = crate::partition::big_y_k(3, params);
    let g = pd.g_minus;
    (g * (1.0 - 2.0 * a * y3 - pd.z_p.x - l * y3) + pd.z_p.y) / (1.0 - l * g)
}

/// Value of the defining function of `id` at `alpha`.
pub fn defining_function(id: ThresholdId, alpha: f64) -> Result<f64> {
    let params = Params::new(alpha)?;
    let a = alpha;
    let w = params.inv_alpha;
    Ok(match id {
        ThresholdId::Alpha0 => growth_sum(&[1, 3, 4], &params)? - 1.0,
        ThresholdId::Alpha1 => 2.0 * a * a * a - 4.0 * a * a - a + 1.0,
        ThresholdId::Alpha2 => {
            let pd = periodic_point(&params)?;
            let (_, yu) = unstable_on_l(&pd, &params)?;
            (yu - w + 1.0) / a - 0.5 * (w + w * w)
        }
        ThresholdId::Alpha3 => {
            let pd = periodic_point(&params)?;
            let (_, yu) = unstable_on_l(&pd, &params)?;
            yu - y_k(2, &params)
        }
        ThresholdId::Alpha4 => {
            let pd = periodic_point(&params)?;
            let (xu, yu) = unstable_on_l(&pd, &params)?;
            yu - (w + a * x_u_prime(xu, yu, &params) - 1.0)
        }
        ThresholdId::Alpha5 => {
            let pd = periodic_point(&params)?;
            x_bar(&params) - x_s(&pd, &params)?
        }
        ThresholdId::Alpha7 => {
            let pd = periodic_point(&params)?;
            margin(5, y_m(&pd, &params)?, &params)
        }
        ThresholdId::Alpha8 => f_alpha(7, &params)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub id: ThresholdId,
    pub value: f64,
    /// `|f(value)|`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
}

/// Bisection on `[lo, hi]` until the midpoint coincides with an endpoint;
/// returns the endpoint with the smaller `|f|`.
pub fn bisect<F>(id: &'static str, mut f: F, lo: f64, hi: f64) -> Result<(f64, f64, u32)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok((lo, 0.0, 0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0, 0));
    }
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return Err(LtmError::NoBracket { id, lo, hi, f_lo, f_hi });
    }
    let mut f_hi = f_hi;
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok((mid, 0.0, iterations));
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        Ok((lo, f_lo.abs(), iterations))
    } else {
        Ok((hi, f_hi.abs(), iterations))
    }
}

pub fn solve_threshold(id: ThresholdId) -> Result<ThresholdSolution> {
    let bracket = id.bracket();
    let (value, residual, iterations) = bisect(id.name(), |a| defining_function(id, a), bracket.0, bracket.1)?;
    Ok(ThresholdSolution {
        id,
        value,
        residual,
        bracket,
        iterations,
    })
}

pub fn solve_all() -> Result<Vec<ThresholdSolution>> {
    ThresholdId::ALL.iter().map(|&id| solve_threshold(id)).collect()
}

/// `E_k` for display next to thresholds.
pub fn expansion_table(params: &Params, ks: &[u32]) -> Vec<(u32, f64)> {
    ks.iter().map(|&k| (k, expansion_factor(k, params))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let (r, res, _) = bisect("sqrt2", |x| Ok(x * x - 2.0), 1.0, 2.0).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(res < 1e-15);
        assert!(matches!(
            bisect("none", |x| Ok(x * x + 1.0), 0.0, 1.0),
            Err(LtmError::NoBracket { .. })
        ));
    }

    #[test]
    fn cubic_threshold() {
        let s = solve_threshold(ThresholdId::Alpha1).unwrap();
        assert!((s.value - 2.125).abs() < 5e-4);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn growth_threshold() {
        let s = solve_threshold(ThresholdId::Alpha0).unwrap();
        assert!((s.value - 2.1319).abs() < 5e-5);
        assert!((growth_sum(&[1, 3, 4], &Params::new(s.value).unwrap()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn y_m_matches_closed_form() {
        for a in [2.05, 2.072, 2.2, 2.5] {
            let params = Params::new(a).unwrap();
            let pd = periodic_point(&params).unwrap();
            assert!((y_m(&pd, &params).unwrap() - y_m_closed_form(&pd, &params)).abs() < 1e-12);
        }
    }
}
