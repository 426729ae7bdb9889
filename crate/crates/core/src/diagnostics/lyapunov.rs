//! Lyapunov exponents from renormalized tangent-vector growth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::Vec2;
use crate::partition::chunk_rng;
use crate::torus::{MapId, Params, TorusPoint, EPS_BOUNDARY};

/// Steps between renormalizations of the tangent vector.
pub const RENORM_INTERVAL: u64 = 16;

/// Draws per restart before giving up on finding a regular orbit.
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean growth rate per iterate, in nats.
    pub lambda: f64,
    pub n_iter: u64,
    /// 95% half-width from the spread across restarts.
    pub ci_halfwidth: f64,
    /// `max - min` over restarts.
    pub spread: f64,
    /// One rate per restart.
    pub samples: Vec<f64>,
}

impl LyapunovEstimate {
    /// Rate per return to S. The mean return time of H to S is `2*alpha - 1`
    /// (Kac), so this is the exponent of the induced map `H_S`.
    pub fn per_return_to_s(&self, params: &Params) -> f64 {
        self.lambda * (2.0 * params.alpha - 1.0)
    }
}

fn shear_f(p: TorusPoint, v: Vec2, params: &Params, step: u64) -> Result<(TorusPoint, Vec2)> {
    if p.near_p_boundary(params, EPS_BOUNDARY) {
        return Err(LtmError::SingularOrbit {
            step: step as usize,
            x: p.x,
            y: p.y,
        });
    }
    if p.in_p(params) {
        let a = params.alpha;
        Ok((TorusPoint::new(p.x + a * p.y, p.y), Vec2::new(v.x + a * v.y, v.y)))
    } else {
        Ok((p, v))
    }
}

fn shear_g(p: TorusPoint, v: Vec2, params: &Params, step: u64) -> Result<(TorusPoint, Vec2)> {
    if p.near_q_boundary(params, EPS_BOUNDARY) {
        return Err(LtmError::SingularOrbit {
            step: step as usize,
            x: p.x,
            y: p.y,
        });
    }
    if p.in_q(params) {
        let a = params.alpha;
        Ok((TorusPoint::new(p.x, p.y - a * p.x), Vec2::new(v.x, v.y - a * v.x)))
    } else {
        Ok((p, v))
    }
}

/// Growth rate of the tangent vector `v0` along the orbit of `p` under `map`
/// (`F`, `G` or `H`).
pub fn lyapunov_orbit(p: TorusPoint, v0: Vec2, n_iter: u64, map: MapId, params: &Params) -> Result<f64> {
    if n_iter == 0 {
        return Err(LtmError::InvalidArgument("n_iter must be positive".into()));
    }
    if !matches!(map, MapId::F | MapId::G | MapId::H) {
        return Err(LtmError::InvalidArgument("Lyapunov runs support F, G and H".into()));
    }
    if !p.in_r(params) {
        return Err(LtmError::OutsideDomain {
            x: p.x,
            y: p.y,
            region: "R",
        });
    }
    let mut q = p;
    let mut v = v0 * (1.0 / v0.norm());
    let mut log_sum = 0.0;
    for i in 0..n_iter {
        if matches!(map, MapId::F | MapId::H) {
            (q, v) = shear_f(q, v, params, i)?;
        }
        if matches!(map, MapId::G | MapId::H) {
            (q, v) = shear_g(q, v, params, i)?;
        }
        if (i + 1) % RENORM_INTERVAL == 0 || i + 1 == n_iter {
            let n = v.norm();
            log_sum += n.ln();
            v = v * (1.0 / n);
        }
    }
    Ok(log_sum / n_iter as f64)
}

/// Single-orbit estimate from `p` with a horizontal initial tangent vector.
pub fn lyapunov(p: TorusPoint, n_iter: u64, params: &Params) -> Result<f64> {
    lyapunov_orbit(p, Vec2::new(1.0, 0.0), n_iter, MapId::H, params)
}

fn random_point_in_r<R: Rng>(rng: &mut R, params: &Params) -> TorusPoint {
    loop {
        let p = TorusPoint::new(rng.gen(), rng.gen());
        if p.in_r(params) {
            return p;
        }
    }
}

/// Mean over `restarts` orbits of `H` from seeded random points of R.
/// An orbit that meets a region boundary is redrawn from the same stream.
pub fn lyapunov_ensemble(restarts: u32, n_iter: u64, seed: u64, params: &Params) -> Result<LyapunovEstimate> {
    if restarts < 2 {
        return Err(LtmError::InvalidArgument("need at least two restarts".into()));
    }
    use rayon::prelude::*;
    let samples = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = chunk_rng(seed, r as u64);
            let mut last = None;
            for _ in 0..MAX_REDRAWS {
                let p = random_point_in_r(&mut rng, params);
                let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let v = Vec2::new(angle.cos(), angle.sin());
                match lyapunov_orbit(p, v, n_iter, MapId::H, params) {
                    Ok(l) => return Ok(l),
                    Err(e @ LtmError::SingularOrbit { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("at least one draw"))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    Ok(LyapunovEstimate {
        lambda: mean,
        n_iter,
        ci_halfwidth: 1.96 * (var / n).sqrt(),
        spread: hi - lo,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_only_orbit_on_l2_has_zero_rate() {
        let params = Params::new(2.8).unwrap();
        // L2 (y = 1/2 outside S) is F-periodic; any x works since F never leaves P
        let p = TorusPoint::new(0.4, 0.5 * params.inv_alpha);
        let l = lyapunov_orbit(p, Vec2::new(0.0, 1.0), 100_000, MapId::F, &params).unwrap();
        assert!((0.0..2e-4).contains(&l), "{l}");
    }

    #[test]
    fn ensemble_is_reproducible() {
        let params = Params::new(2.5).unwrap();
        let a = lyapunov_ensemble(4, 5_000, 9, &params).unwrap();
        let b = lyapunov_ensemble(4, 5_000, 9, &params).unwrap();
        assert_eq!(a, b);
        assert!(a.lambda > 0.05);
    }

    #[test]
    fn induced_rate_grows_with_alpha() {
        // the rate per H step is nearly flat on (2.5, 2.9); per return to S it is not
        let lo = Params::new(2.5).unwrap();
        let hi = Params::new(2.9).unwrap();
        let a = lyapunov_ensemble(8, 100_000, 42, &lo).unwrap();
        let b = lyapunov_ensemble(8, 100_000, 42, &hi).unwrap();
        assert!(b.per_return_to_s(&hi) > a.per_return_to_s(&lo) + 10.0 * (a.ci_halfwidth + b.ci_halfwidth));
    }

    #[test]
    fn rejects_points_outside_r() {
        let params = Params::new(2.5).unwrap();
        let p = TorusPoint::new(0.7, 0.7);
        assert!(matches!(lyapunov(p, 100, &params), Err(LtmError::OutsideDomain { .. })));
    }
}
