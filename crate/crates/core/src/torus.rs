//! The counter-twisting linked twist map on the torus.
//!
//! The annuli are `P = {0 <= y <= 1/alpha}` and `Q = {0 <= x <= 1/alpha}`,
//! `R = P ∪ Q` and `S = P ∩ Q`. The shears are
//!
//! ```text
//! F(x, y) = (x + alpha*y, y)   on P, identity elsewhere
//! G(x, y) = (x, y - alpha*x)   on Q, identity elsewhere
//! ```
//!
//! with all coordinates taken mod 1. `H = G∘F` is the linked twist map and
//! `calH = F∘G` its conjugate under the involution `I3`.

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::Vec2;

/// Values within this distance of 1 are snapped to 0 by [`mod1`].
pub const MOD1_SNAP: f64 = 1e-13;

/// Width of the band around region boundaries where the Jacobian is
/// considered ambiguous.
pub const EPS_BOUNDARY: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    /// 2 < alpha < 3: the window in which the return-time structure is derived.
    Strict,
    /// alpha >= 3: maps are well defined but partitions and certificates are refused.
    Extended,
}

/// Shear strength and the constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    /// Width of the annuli P and Q.
    pub inv_alpha: f64,
    /// Boundary slope of the unstable cone, the root of `L^2 + alpha*L + 1 = 0`
    /// in (-1, 0).
    pub cone_slope: f64,
    pub domain: DomainTag,
}

impl Params {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(LtmError::InvalidAlpha {
                alpha,
                reason: "not finite",
            });
        }
        if alpha <= 2.0 {
            return Err(LtmError::InvalidAlpha {
                alpha,
                reason: "hyperbolicity is lost for alpha <= 2",
            });
        }
        let domain = if alpha < 3.0 {
            DomainTag::Strict
        } else {
            log::warn!("alpha = {alpha} >= 3: extended mode, partition and certifier are unavailable");
            DomainTag::Extended
        };
        let cone_slope = 0.5 * (-alpha + (alpha * alpha - 4.0).sqrt());
        Ok(Self {
            alpha,
            inv_alpha: 1.0 / alpha,
            cone_slope,
            domain,
        })
    }

    pub fn require_strict(&self, what: &'static str) -> Result<()> {
        match self.domain {
            DomainTag::Strict => Ok(()),
            DomainTag::Extended => Err(LtmError::ExtendedDomain {
                alpha: self.alpha,
                what,
            }),
        }
    }

    /// Residual of the characteristic quadratic at the stored cone slope.
    pub fn cone_slope_residual(&self) -> f64 {
        let l = self.cone_slope;
        l * l + self.alpha * l + 1.0
    }
}

/// Canonical representative in `[0, 1)`.
pub fn mod1(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 - MOD1_SNAP {
        0.0
    } else {
        r
    }
}

/// Signed distance from `a` to `b` on the circle, in `[-0.5, 0.5)`.
pub fn circle_diff(a: f64, b: f64) -> f64 {
    let d = mod1(b - a);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

fn near_circle(v: f64, target: f64, eps: f64) -> bool {
    circle_diff(v, target).abs() < eps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: mod1(x), y: mod1(y) }
    }

    pub fn from_vec(v: Vec2) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn to_vec(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn in_p(&self, params: &Params) -> bool {
        self.y <= params.inv_alpha
    }

    pub fn in_q(&self, params: &Params) -> bool {
        self.x <= params.inv_alpha
    }

    pub fn in_s(&self, params: &Params) -> bool {
        self.in_p(params) && self.in_q(params)
    }

    pub fn in_r(&self, params: &Params) -> bool {
        self.in_p(params) || self.in_q(params)
    }

    /// Membership in R allowing for rounding just outside the closed annuli.
    pub fn in_r_tol(&self, params: &Params, eps: f64) -> bool {
        self.y <= params.inv_alpha + eps || self.x <= params.inv_alpha + eps || self.x > 1.0 - eps || self.y > 1.0 - eps
    }

    /// True when `y` is within `eps` of a boundary circle of P.
    pub fn near_p_boundary(&self, params: &Params, eps: f64) -> bool {
        near_circle(self.y, 0.0, eps) || near_circle(self.y, params.inv_alpha, eps)
    }

    /// True when `x` is within `eps` of a boundary circle of Q.
    pub fn near_q_boundary(&self, params: &Params, eps: f64) -> bool {
        near_circle(self.x, 0.0, eps) || near_circle(self.x, params.inv_alpha, eps)
    }

    /// Sup-norm distance on the torus.
    pub fn torus_distance(&self, other: &TorusPoint) -> f64 {
        circle_diff(self.x, other.x)
            .abs()
            .max(circle_diff(self.y, other.y).abs())
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Matrix2([[a, b], [c, d]])
    }

    /// Jacobian of F on P.
    pub fn shear_f(params: &Params) -> Self {
        Self::new(1.0, params.alpha, 0.0, 1.0)
    }

    /// Jacobian of G on Q.
    pub fn shear_g(params: &Params) -> Self {
        Self::new(1.0, 0.0, -params.alpha, 1.0)
    }

    pub fn mul(&self, rhs: &Matrix2) -> Matrix2 {
        let a = &self.0;
        let b = &rhs.0;
        Matrix2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn pow(&self, n: u32) -> Matrix2 {
        (0..n).fold(Matrix2::IDENTITY, |acc, _| self.mul(&acc))
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn inverse(&self) -> Option<Matrix2> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return None;
        }
        let m = &self.0;
        Some(Matrix2::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d))
    }

    /// Real eigenvalues in decreasing order, if the discriminant is positive.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let t = self.trace();
        let disc = t * t - 4.0 * self.det();
        if disc <= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some(((t + s) / 2.0, (t - s) / 2.0))
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapId {
    F,
    G,
    /// `H = G∘F`.
    H,
    HInv,
    /// `calH = F∘G`.
    CalH,
}

fn f_step(p: TorusPoint, params: &Params) -> TorusPoint {
    if p.in_p(params) {
        TorusPoint::new(p.x + params.alpha * p.y, p.y)
    } else {
        p
    }
}

fn f_inv_step(p: TorusPoint, params: &Params) -> TorusPoint {
    if p.in_p(params) {
        TorusPoint::new(p.x - params.alpha * p.y, p.y)
    } else {
        p
    }
}

fn g_step(p: TorusPoint, params: &Params) -> TorusPoint {
    if p.in_q(params) {
        TorusPoint::new(p.x, p.y - params.alpha * p.x)
    } else {
        p
    }
}

fn g_inv_step(p: TorusPoint, params: &Params) -> TorusPoint {
    if p.in_q(params) {
        TorusPoint::new(p.x, p.y + params.alpha * p.x)
    } else {
        p
    }
}

/// One forward step of `map`, with no domain check.
pub fn step(map: MapId, p: TorusPoint, params: &Params) -> TorusPoint {
    match map {
        MapId::F => f_step(p, params),
        MapId::G => g_step(p, params),
        MapId::H => g_step(f_step(p, params), params),
        MapId::HInv => f_inv_step(g_inv_step(p, params), params),
        MapId::CalH => f_step(g_step(p, params), params),
    }
}

/// One step of the inverse of `map`, with no domain check.
pub fn step_inverse(map: MapId, p: TorusPoint, params: &Params) -> TorusPoint {
    match map {
        MapId::F => f_inv_step(p, params),
        MapId::G => g_inv_step(p, params),
        MapId::H => f_inv_step(g_inv_step(p, params), params),
        MapId::HInv => g_step(f_step(p, params), params),
        MapId::CalH => g_inv_step(f_inv_step(p, params), params),
    }
}

fn require_r(p: &TorusPoint, params: &Params) -> Result<()> {
    if p.in_r_tol(params, EPS_BOUNDARY) {
        Ok(())
    } else {
        Err(LtmError::OutsideDomain {
            x: p.x,
            y: p.y,
            region: "R",
        })
    }
}

/// Applies `map^power` to `p`; negative powers apply the inverse.
pub fn apply_map(map: MapId, power: i64, p: TorusPoint, params: &Params) -> Result<TorusPoint> {
    require_r(&p, params)?;
    let mut q = p;
    if power >= 0 {
        for _ in 0..power {
            q = step(map, q, params);
        }
    } else {
        for _ in 0..(-power) {
            q = step_inverse(map, q, params);
        }
    }
    Ok(q)
}

enum Shear {
    F,
    FInv,
    G,
    GInv,
}

fn shear_sequence(map: MapId) -> &'static [Shear] {
    match map {
        MapId::F => &[Shear::F],
        MapId::G => &[Shear::G],
        MapId::H => &[Shear::F, Shear::G],
        MapId::HInv => &[Shear::GInv, Shear::FInv],
        MapId::CalH => &[Shear::G, Shear::F],
    }
}

/// Product of the per-step Jacobians along the first `n` steps of the orbit of `p`.
pub fn jacobian_along_orbit(map: MapId, n: usize, p: TorusPoint, params: &Params) -> Result<Matrix2> {
    if n == 0 {
        return Err(LtmError::InvalidArgument("orbit length must be at least 1".into()));
    }
    require_r(&p, params)?;
    let a = params.alpha;
    let mut jac = Matrix2::IDENTITY;
    let mut q = p;
    for i in 0..n {
        for shear in shear_sequence(map) {
            let (ambiguous, active) = match shear {
                Shear::F | Shear::FInv => (q.near_p_boundary(params, EPS_BOUNDARY), q.in_p(params)),
                Shear::G | Shear::GInv => (q.near_q_boundary(params, EPS_BOUNDARY), q.in_q(params)),
            };
            if ambiguous {
                return Err(LtmError::SingularOrbit {
                    step: i,
                    x: q.x,
                    y: q.y,
                });
            }
            if active {
                let d = match shear {
                    Shear::F => Matrix2::new(1.0, a, 0.0, 1.0),
                    Shear::FInv => Matrix2::new(1.0, -a, 0.0, 1.0),
                    Shear::G => Matrix2::new(1.0, 0.0, -a, 1.0),
                    Shear::GInv => Matrix2::new(1.0, 0.0, a, 1.0),
                };
                jac = d.mul(&jac);
                q = match shear {
                    Shear::F => f_step(q, params),
                    Shear::FInv => f_inv_step(q, params),
                    Shear::G => g_step(q, params),
                    Shear::GInv => g_inv_step(q, params),
                };
            }
        }
    }
    Ok(jac)
}

/// The involutions `I1..I4`.
pub fn involution(i: u8, p: TorusPoint, params: &Params) -> Result<TorusPoint> {
    require_r(&p, params)?;
    involution_unchecked(i, p, params)
}

pub(crate) fn involution_unchecked(i: u8, p: TorusPoint, params: &Params) -> Result<TorusPoint> {
    let w = params.inv_alpha;
    match i {
        1 => Ok(TorusPoint::new(w - p.x, w - p.y)),
        2 => Ok(TorusPoint::new(p.x, w - p.y)),
        3 => Ok(TorusPoint::new(p.y, w - p.x)),
        4 => Ok(TorusPoint::new(p.y, p.x)),
        _ => Err(LtmError::InvalidIndex {
            family: "involution",
            k: i as i64,
        }),
    }
}

/// Inverse of `I3`: `(x, y) -> (1/alpha - y, x)`.
pub fn involution3_inverse(p: TorusPoint, params: &Params) -> TorusPoint {
    TorusPoint::new(params.inv_alpha - p.y, p.x)
}

/// The symmetry relations between involutions and maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// `I1` commutes with F, G and H.
    A,
    /// `I2∘G = G^-1∘I2`.
    B,
    /// `I3∘F = G∘I3`.
    C,
    /// `I3∘H = calH∘I3`.
    D,
    /// `I4∘H = H^-1∘I4`.
    E,
}

impl Relation {
    pub const ALL: [Relation; 5] = [Relation::A, Relation::B, Relation::C, Relation::D, Relation::E];
}

/// Torus distance between the two sides of `rel` evaluated at `p` with the
/// given power of the maps.
pub fn check_relation(rel: Relation, p: TorusPoint, power: i64, params: &Params) -> Result<f64> {
    require_r(&p, params)?;
    let inv = |i: u8, q: TorusPoint| involution_unchecked(i, q, params);
    let pw = |m: MapId, k: i64, q: TorusPoint| apply_map(m, k, q, params);
    let residual = match rel {
        Relation::A => {
            let mut worst: f64 = 0.0;
            for m in [MapId::F, MapId::G, MapId::H] {
                let lhs = inv(1, pw(m, power, p)?)?;
                let rhs = pw(m, power, inv(1, p)?)?;
                worst = worst.max(lhs.torus_distance(&rhs));
            }
            worst
        }
        Relation::B => {
            let lhs = inv(2, pw(MapId::G, power, p)?)?;
            let rhs = pw(MapId::G, -power, inv(2, p)?)?;
            lhs.torus_distance(&rhs)
        }
        Relation::C => {
            let lhs = inv(3, pw(MapId::F, power, p)?)?;
            let rhs = pw(MapId::G, power, inv(3, p)?)?;
            lhs.torus_distance(&rhs)
        }
        Relation::D => {
            let lhs = inv(3, pw(MapId::H, power, p)?)?;
            let rhs = pw(MapId::CalH, power, inv(3, p)?)?;
            lhs.torus_distance(&rhs)
        }
        Relation::E => {
            let lhs = inv(4, pw(MapId::H, power, p)?)?;
            let rhs = pw(MapId::H, -power, inv(4, p)?)?;
            lhs.torus_distance(&rhs)
        }
    };
    Ok(residual)
}

/// True when some point along either side of `rel` comes within the
/// ambiguity band of a region boundary.
pub fn relation_orbit_ambiguous(rel: Relation, p: TorusPoint, power: i64, params: &Params) -> bool {
    let near = |q: &TorusPoint| q.near_p_boundary(params, EPS_BOUNDARY) || q.near_q_boundary(params, EPS_BOUNDARY);
    let orbit_hits = |m: MapId, k: i64, start: TorusPoint| -> bool {
        let mut q = start;
        if near(&q) {
            return true;
        }
        for _ in 0..k.unsigned_abs() {
            // intermediate points of composite maps matter as well
            let mid = if k >= 0 {
                match m {
                    MapId::H => Some(f_step(q, params)),
                    MapId::CalH => Some(g_step(q, params)),
                    _ => None,
                }
            } else {
                match m {
                    MapId::H => Some(g_inv_step(q, params)),
                    MapId::CalH => Some(f_inv_step(q, params)),
                    _ => None,
                }
            };
            if mid.as_ref().is_some_and(near) {
                return true;
            }
            q = if k >= 0 {
                step(m, q, params)
            } else {
                step_inverse(m, q, params)
            };
            if near(&q) {
                return true;
            }
        }
        false
    };
    let Ok(images) = (1..=4u8)
        .map(|i| involution_unchecked(i, p, params))
        .collect::<Result<Vec<_>>>()
    else {
        return true;
    };
    match rel {
        Relation::A => [MapId::F, MapId::G, MapId::H]
            .iter()
            .any(|&m| orbit_hits(m, power, p) || orbit_hits(m, power, images[0])),
        Relation::B => orbit_hits(MapId::G, power, p) || orbit_hits(MapId::G, -power, images[1]),
        Relation::C => orbit_hits(MapId::F, power, p) || orbit_hits(MapId::G, power, images[2]),
        Relation::D => orbit_hits(MapId::H, power, p) || orbit_hits(MapId::CalH, power, images[2]),
        Relation::E => orbit_hits(MapId::H, power, p) || orbit_hits(MapId::H, -power, images[3]),
    }
}
