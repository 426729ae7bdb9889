//! The period-4 point `z_p`, its hyperbolic derivative and the local stable
//! and unstable segments.

use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::geometry::{clip_segment_to_polygon, Affine2, Line, Polygon, Segment, Vec2};
use crate::partition::{build_partition, strip_label, CellLabel, Partition, Side};
use crate::torus::{apply_map, jacobian_along_orbit, MapId, Matrix2, Params, TorusPoint};

use super::expansion::intersect;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicData {
    pub z_p: Vec2,
    /// `DH^4` composed along the orbit.
    pub dh4: Matrix2,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Slope of the expanding eigenvector `(1, g_plus)`.
    pub g_plus: f64,
    pub g_minus: f64,
    pub gamma_u: Segment,
    pub gamma_s: Segment,
    /// Points of `A3` following the same four cells as `z_p`.
    pub m_polygon: Polygon,
    /// `H^4(M)`.
    pub h4_m_polygon: Polygon,
    /// The affine branch of `H^4` on M.
    pub h4_branch: Affine2,
    /// `|H^4(z_p) - z_p|` on the torus.
    pub closure_residual: f64,
}

/// Closed form of `z_p`.
pub fn z_p_closed_form(params: &Params) -> Vec2 {
    let a = params.alpha;
    let d = 3.0 * a * a * a - 8.0 * a;
    Vec2::new((2.0 * a - 4.0) / d, (a * a + a - 4.0) / d)
}

/// The paper's closed form `g± = (4 - 2a^2) / (3a^3 - 6a ∓ sqrt(D))`.
pub fn g_closed_form(params: &Params) -> (f64, f64) {
    let a = params.alpha;
    let a2 = a * a;
    let d = 9.0 * a2 * a2 * a2 - 48.0 * a2 * a2 + 76.0 * a2 - 32.0;
    let num = 4.0 - 2.0 * a2;
    let base = 3.0 * a2 * a - 6.0 * a;
    (num / (base - d.sqrt()), num / (base + d.sqrt()))
}

/// The four cells visited by `z_p`: `A3`, `B1*`, `A1*`, `B1`.
pub fn orbit_pattern() -> [CellLabel; 4] {
    [
        CellLabel::primary(Side::F, 3, false),
        CellLabel::primary(Side::G, 1, true),
        CellLabel::primary(Side::F, 1, true),
        CellLabel::primary(Side::G, 1, false),
    ]
}

fn preimage(poly: &Polygon, t: &Affine2) -> Result<Polygon> {
    let inv = t.inverse().ok_or(LtmError::InvalidPolygon)?;
    poly.map_affine(&inv)
}

fn long_segment(p: Vec2, dir: Vec2) -> Result<Segment> {
    let d = dir * (10.0 / dir.norm());
    Segment::new(p - d, p + d)
}

/// Builds the period-4 data from the cell partitions.
pub fn periodic_point_with(params: &Params, part_f: &Partition, part_g: &Partition) -> Result<PeriodicData> {
    params.require_strict("periodic_point")?;
    let z = z_p_closed_form(params);
    let pattern = orbit_pattern();

    // follow the orbit through the return maps and check the cell pattern
    let mut w = z;
    let mut branch = Affine2::IDENTITY;
    let mut m_poly: Option<Polygon> = None;
    for (i, expected) in pattern.iter().enumerate() {
        let found = strip_label(w, expected.side, params, 64);
        if found != Some(*expected) {
            return Err(LtmError::OrbitPatternMismatch {
                step: i,
                expected: expected.to_string(),
                found: found.map_or("no return".to_string(), |l| l.to_string()),
            });
        }
        let part = match expected.side {
            Side::F => part_f,
            Side::G => part_g,
        };
        let cell = part
            .cell(*expected)
            .ok_or_else(|| LtmError::ConstructionFailure(format!("cell {expected} missing")))?;
        let pulled = preimage(&cell.polygon, &branch)?;
        m_poly = Some(match m_poly {
            None => pulled,
            Some(m) => m
                .intersect(&pulled)
                .ok_or_else(|| LtmError::ConstructionFailure("region M is empty".into()))?,
        });
        let b = expected.branch(params);
        branch = b.compose(&branch);
        w = b.apply(w);
    }
    let m_polygon = m_poly.ok_or(LtmError::InvalidPolygon)?;

    let tz = TorusPoint::from_vec(z);
    let back = apply_map(MapId::H, 4, tz, params)?;
    let closure_residual = back.torus_distance(&tz);
    let dh4 = jacobian_along_orbit(MapId::H, 4, tz, params)?;

    let (lambda_plus, lambda_minus) = dh4
        .real_eigenvalues()
        .ok_or_else(|| LtmError::ConstructionFailure("DH^4 is not hyperbolic".into()))?;
    let [[a, b], _] = dh4.0;
    let g_plus = (lambda_plus - a) / b;
    let g_minus = (lambda_minus - a) / b;

    let h4_m_polygon = m_polygon.map_affine(&branch)?;
    let clip = |poly: &Polygon, g: f64, what: &str| -> Result<Segment> {
        let long = long_segment(z, Vec2::new(1.0, g))?;
        clip_segment_to_polygon(&long, poly)
            .map(|c| c.segment)
            .ok_or_else(|| LtmError::ConstructionFailure(format!("{what} misses its region")))
    };
    let gamma_u = clip(&h4_m_polygon, g_plus, "unstable segment")?;
    let gamma_s = clip(&m_polygon, g_minus, "stable segment")?;

    Ok(PeriodicData {
        z_p: z,
        dh4,
        lambda_plus,
        lambda_minus,
        g_plus,
        g_minus,
        gamma_u,
        gamma_s,
        m_polygon,
        h4_m_polygon,
        h4_branch: branch,
        closure_residual,
    })
}

/// Builds the period-4 data, constructing the small partitions it needs.
pub fn periodic_point(params: &Params) -> Result<PeriodicData> {
    let part_f = build_partition(MapId::F, 5, params)?;
    let part_g = build_partition(MapId::G, 5, params)?;
    periodic_point_with(params, &part_f, &part_g)
}

impl PeriodicData {
    pub fn unstable_line(&self) -> Result<Line> {
        Line::point_direction(self.z_p, Vec2::new(1.0, self.g_plus))
    }

    pub fn stable_line(&self) -> Result<Line> {
        Line::point_direction(self.z_p, Vec2::new(1.0, self.g_minus))
    }

    /// Where the unstable line meets `line`.
    pub fn unstable_meets(&self, line: &Line) -> Result<Vec2> {
        intersect(&self.unstable_line()?, line)
    }

    pub fn stable_meets(&self, line: &Line) -> Result<Vec2> {
        intersect(&self.stable_line()?, line)
    }

    /// Residual of the eigen-relation `DH4 (1, g) = lambda (1, g)`.
    pub fn eigen_residual(&self) -> f64 {
        let r = |g: f64, l: f64| {
            let v = self.dh4.apply(Vec2::new(1.0, g));
            (v - Vec2::new(1.0, g) * l).norm() / l.abs().max(1.0)
        };
        r(self.g_plus, self.lambda_plus).max(r(self.g_minus, self.lambda_minus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{boundary_line, LineFamily};

    #[test]
    fn z_p_at_2_4() {
        let params = Params::new(2.4).unwrap();
        let pd = periodic_point(&params).unwrap();
        assert!(pd.z_p.dist(Vec2::new(0.035_919_5, 0.186_781_6)) < 1e-7);
        assert!(pd.closure_residual < 1e-12);
        let a = 2.4f64;
        let tr = 3.0 * a.powi(4) - 8.0 * a * a + 2.0;
        assert!((pd.dh4.trace() - tr).abs() < 1e-9);
        assert!((pd.dh4.det() - 1.0).abs() < 1e-10);
        let disc = a * a * (9.0 * a.powi(6) - 48.0 * a.powi(4) + 76.0 * a * a - 32.0);
        assert!((tr * tr - 4.0 - disc).abs() < 1e-6 * tr * tr);
    }

    #[test]
    fn composed_matrix_has_corrected_entry() {
        let params = Params::new(2.3).unwrap();
        let pd = periodic_point(&params).unwrap();
        let a = 2.3f64;
        let expect = Matrix2::new(
            1.0 - a * a,
            4.0 * a - 3.0 * a.powi(3),
            a.powi(3) - 2.0 * a,
            3.0 * a.powi(4) - 7.0 * a * a + 1.0,
        );
        assert!(pd.dh4.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn eigen_slopes_match_closed_form() {
        for a in [2.05, 2.3, 2.7, 2.95] {
            let params = Params::new(a).unwrap();
            let pd = periodic_point(&params).unwrap();
            let (gp, gm) = g_closed_form(&params);
            assert!((pd.g_plus - gp).abs() < 1e-9);
            assert!((pd.g_minus - gm).abs() < 1e-9);
            assert!(pd.eigen_residual() < 1e-9);
            assert!((pd.lambda_plus * pd.lambda_minus - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stable_segment_ends_on_ds1_and_l2_at_2_15() {
        let params = Params::new(2.15).unwrap();
        let pd = periodic_point(&params).unwrap();
        let l2 = boundary_line(&LineFamily::scr_lk(2), &params).unwrap();
        let ends = [pd.gamma_s.p0, pd.gamma_s.p1];
        assert!(ends.iter().any(|p| p.x.abs() < 1e-10));
        assert!(ends.iter().any(|p| l2.contains(*p, 1e-10)));
    }

    #[test]
    fn boundary_lines_of_m_match_displayed_forms() {
        for a in [2.1, 2.4, 2.8] {
            let params = Params::new(a).unwrap();
            let m1 = boundary_line(&LineFamily::new(crate::partition::LineKind::M1), &params).unwrap();
            let s1 = (a * a - 1.0) / (-3.0 * a.powi(3) + 4.0 * a);
            let c1 = 1.0 / (a + 1.0) + 1.0;
            for x in [0.0, 0.3] {
                assert!(m1.contains(Vec2::new(x, s1 * (x - c1)), 1e-12), "M1 at a = {a}");
            }
            let m2 = boundary_line(&LineFamily::new(crate::partition::LineKind::M2), &params).unwrap();
            let s2 = (2.0 * a - a.powi(3)) / (1.0 - 7.0 * a * a + 3.0 * a.powi(4));
            let c2 = (-a * a + a + 1.0) / (2.0 * a - a.powi(3)) + 1.0;
            for x in [0.0, 0.3] {
                assert!(m2.contains(Vec2::new(x, s2 * (x - c2)), 1e-12), "M2 at a = {a}");
            }
        }
    }
}
