//! Dirichlet Green function of the Laplacian: closed form on the unit disk,
//! harmonic-extension backed on general domains.

use crate::elliptic::DirichletOperator;
use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::geometry::{Domain, Vec2};
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

/// G(x, y) = (1/2π) ln(1/|x-y|) + H(x, y), with -Δ_x G = δ_y and G = 0 on
/// the boundary; H is the smooth (regular) part.
pub struct GreenEvaluator {
    mode: Mode,
}

enum Mode {
    AnalyticDisk,
    Numeric {
        op: Rc<DirichletOperator>,
        /// Harmonic extensions keyed by quantized source point.
        cache: RefCell<HashMap<(i64, i64), Rc<ScalarField>>>,
    },
}

fn quantize(p: Vec2) -> (i64, i64) {
    ((p.x / 1e-9).round() as i64, (p.y / 1e-9).round() as i64)
}

impl GreenEvaluator {
    /// Exact evaluator on the unit disk.
    pub fn analytic_disk() -> Self {
        GreenEvaluator { mode: Mode::AnalyticDisk }
    }

    /// Mesh-backed evaluator for arbitrary domains: the regular part of each
    /// source is the harmonic extension of (1/2π) ln|x - y| boundary data.
    pub fn numeric(op: Rc<DirichletOperator>) -> Self {
        GreenEvaluator { mode: Mode::Numeric { op, cache: RefCell::new(HashMap::new()) } }
    }

    pub fn operator(&self) -> Result<Rc<DirichletOperator>> {
        match &self.mode {
            Mode::AnalyticDisk => Err(CoreError::NoNumericBacking),
            Mode::Numeric { op, .. } => Ok(Rc::clone(op)),
        }
    }

    fn check_inside(&self, p: Vec2) -> Result<()> {
        let inside = match &self.mode {
            Mode::AnalyticDisk => Domain::UnitDisk.contains(p),
            Mode::Numeric { op, .. } => op.mesh().domain.contains(p),
        };
        if inside {
            Ok(())
        } else {
            Err(CoreError::OutsideDomain { x: p.x, y: p.y })
        }
    }

    fn extension(&self, y: Vec2) -> Result<Rc<ScalarField>> {
        match &self.mode {
            Mode::AnalyticDisk => unreachable!("extension is only used in numeric mode"),
            Mode::Numeric { op, cache } => {
                let key = quantize(y);
                if let Some(f) = cache.borrow().get(&key) {
                    return Ok(Rc::clone(f));
                }
                let field =
                    Rc::new(op.harmonic_extension(|x| (x - y).norm().ln() / (2.0 * PI)));
                cache.borrow_mut().insert(key, Rc::clone(&field));
                Ok(field)
            }
        }
    }

    /// Regular part H(x, y).
    pub fn regular_part(&self, x: Vec2, y: Vec2) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        match &self.mode {
            Mode::AnalyticDisk => Ok(disk_regular(x, y)),
            Mode::Numeric { op, .. } => {
                let f = self.extension(y)?;
                Ok(f.value_at_clamped(op.mesh(), x))
            }
        }
    }

    /// Robin function H(x, x).
    pub fn robin(&self, x: Vec2) -> Result<f64> {
        self.regular_part(x, x)
    }

    /// Full Green function G(x, y); the points must be distinct.
    pub fn value(&self, x: Vec2, y: Vec2) -> Result<f64> {
        let r = x.dist(y);
        if r == 0.0 {
            return Err(CoreError::CoincidentPoints);
        }
        Ok(-r.ln() / (2.0 * PI) + self.regular_part(x, y)?)
    }

    /// Gradient of H in its first argument.
    pub fn grad1_regular(&self, x: Vec2, y: Vec2) -> Result<Vec2> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        match &self.mode {
            Mode::AnalyticDisk => Ok(disk_regular_grad1(x, y)),
            Mode::Numeric { op, .. } => {
                let f = self.extension(y)?;
                op.gradient_at(&f, x)
            }
        }
    }

    /// Gradient of G in its first argument; the points must be distinct.
    pub fn grad1(&self, x: Vec2, y: Vec2) -> Result<Vec2> {
        let d = x - y;
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            return Err(CoreError::CoincidentPoints);
        }
        Ok(self.grad1_regular(x, y)? - d / (2.0 * PI * r2))
    }

    /// Interaction weight at `x` for vortices at `points`:
    /// prod_i |x - ξ_i|^2 exp(-4π H(x, ξ_i)), equal to exp(-4π Σ_i G(x, ξ_i)).
    pub fn vortex_weight(&self, x: Vec2, points: &[Vec2]) -> Result<f64> {
        let mut w = 1.0;
        for &xi in points {
            let r2 = (x - xi).norm_sq();
            w *= r2 * (-4.0 * PI * self.regular_part(x, xi)?).exp();
        }
        Ok(w)
    }

    /// Vortex weight evaluated at a batch of quadrature points given as
    /// (triangle, barycentric, weight) records on `mesh`, with `pts` the
    /// corresponding physical positions. When the evaluator is backed by the
    /// same mesh, the regular parts are interpolated straight from the cached
    /// extensions instead of relocating every point.
    pub fn vortex_weight_table(
        &self,
        mesh: &crate::mesh::Mesh,
        pts: &[Vec2],
        quad: &[(usize, [f64; 3], f64)],
        points: &[Vec2],
    ) -> Result<Vec<f64>> {
        assert_eq!(pts.len(), quad.len());
        match &self.mode {
            Mode::AnalyticDisk => pts
                .iter()
                .map(|&p| self.vortex_weight(p, points))
                .collect(),
            Mode::Numeric { op, .. } => {
                if !std::ptr::eq(op.mesh() as *const _, mesh as *const _) {
                    return pts.iter().map(|&p| self.vortex_weight(p, points)).collect();
                }
                let mut table = vec![1.0; pts.len()];
                for &xi in points {
                    self.check_inside(xi)?;
                    let ext = self.extension(xi)?;
                    for (j, ((t, bary, _), &p)) in quad.iter().zip(pts).enumerate() {
                        let tri = mesh.tris[*t];
                        let h = bary[0] * ext.values[tri[0]]
                            + bary[1] * ext.values[tri[1]]
                            + bary[2] * ext.values[tri[2]];
                        let r2 = (p - xi).norm_sq();
                        table[j] *= r2 * (-4.0 * PI * h).exp();
                    }
                }
                Ok(table)
            }
        }
    }
}

/// Unit-disk regular part: H(x, y) = (1/4π) ln(|x|²|y|² - 2x·y + 1).
fn disk_regular(x: Vec2, y: Vec2) -> f64 {
    (x.norm_sq() * y.norm_sq() - 2.0 * x.dot(y) + 1.0).ln() / (4.0 * PI)
}

fn disk_regular_grad1(x: Vec2, y: Vec2) -> Vec2 {
    let denom = x.norm_sq() * y.norm_sq() - 2.0 * x.dot(y) + 1.0;
    (x * (2.0 * y.norm_sq()) - y * 2.0) / (4.0 * PI * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    const P: Vec2 = Vec2 { x: 0.5, y: 0.0 };
    const Q: Vec2 = Vec2 { x: -0.5, y: 0.0 };

    #[test]
    fn disk_closed_forms_hit_reference_values() {
        let g = GreenEvaluator::analytic_disk();
        // H((1/2, 0), (1/2, 0)) = ln(3/4) / 2π
        let want_h = 0.75f64.ln() / (2.0 * PI);
        assert!((g.robin(P).unwrap() - want_h).abs() < 1e-15);
        // G((1/2, 0), (-1/2, 0)) = ln(5/4) / 2π
        let want_g = 1.25f64.ln() / (2.0 * PI);
        assert!((g.value(P, Q).unwrap() - want_g).abs() < 1e-15);
        // Centered source: G(x, 0) = ln(1/|x|)/2π, so ln(2)/2π at |x| = 1/2.
        let want_c = 2.0f64.ln() / (2.0 * PI);
        assert!((g.value(P, Vec2::ZERO).unwrap() - want_c).abs() < 1e-15);
        // H(x, 0) vanishes identically.
        assert!(g.regular_part(Vec2::new(0.3, -0.7), Vec2::ZERO).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gradient_of_regular_part_matches_finite_differences() {
        let g = GreenEvaluator::analytic_disk();
        let x = Vec2::new(0.3, 0.0);
        let grad = g.grad1_regular(x, x).unwrap();
        // (1/4π)(2x|y|² - 2y)/(|x|²|y|² - 2x·y + 1) at x = y = (0.3, 0)
        // reduces to -15/(91π).
        assert!((grad.x - (-15.0 / (91.0 * PI))).abs() < 1e-15, "{}", grad.x);
        assert!(grad.y.abs() < 1e-15);
        // Central differences on H(., y) about a generic pair.
        let y = Vec2::new(0.2, -0.4);
        let x = Vec2::new(-0.1, 0.35);
        let e = 1e-6;
        let fd = Vec2::new(
            (disk_regular(x + Vec2::new(e, 0.0), y) - disk_regular(x - Vec2::new(e, 0.0), y))
                / (2.0 * e),
            (disk_regular(x + Vec2::new(0.0, e), y) - disk_regular(x - Vec2::new(0.0, e), y))
                / (2.0 * e),
        );
        let grad = g.grad1_regular(x, y).unwrap();
        assert!((grad - fd).norm() < 1e-9);
    }

    #[test]
    fn numeric_mode_agrees_with_disk_closed_form() {
        let op = Rc::new(
            DirichletOperator::new(Rc::new(Mesh::unit_disk(0.06).unwrap())).unwrap(),
        );
        let num = GreenEvaluator::numeric(op);
        let exact = GreenEvaluator::analytic_disk();
        let pairs = [(P, Q), (Vec2::new(0.3, 0.0), Vec2::new(0.3, 0.0)), (Vec2::new(-0.2, 0.4), Vec2::new(0.1, 0.1))];
        for (x, y) in pairs {
            let a = num.regular_part(x, y).unwrap();
            let b = exact.regular_part(x, y).unwrap();
            assert!((a - b).abs() < 5e-3, "H({x:?},{y:?}): {a} vs {b}");
        }
        // Symmetry defect of the numeric regular part stays small.
        let s1 = num.regular_part(P, Vec2::new(0.1, 0.3)).unwrap();
        let s2 = num.regular_part(Vec2::new(0.1, 0.3), P).unwrap();
        assert!((s1 - s2).abs() < 1e-3, "symmetry defect {}", (s1 - s2).abs());
    }

    #[test]
    fn vortex_weight_equals_exponential_form() {
        let g = GreenEvaluator::analytic_disk();
        let points = [Vec2::new(0.4, 0.1), Vec2::new(-0.3, -0.2)];
        for x in [Vec2::new(0.12, -0.33), Vec2::new(-0.6, 0.05)] {
            let direct = g.vortex_weight(x, &points).unwrap();
            let via_g: f64 = points
                .iter()
                .map(|&xi| g.value(x, xi).unwrap())
                .sum();
            let alt = (-4.0 * PI * via_g).exp();
            assert!(
                (direct - alt).abs() < 1e-12 * direct.max(1.0),
                "weight {direct} vs {alt}"
            );
        }
        // The weight vanishes quadratically at a vortex point.
        let w = g.vortex_weight(points[0], &points).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let g = GreenEvaluator::analytic_disk();
        assert!(matches!(g.value(P, P), Err(CoreError::CoincidentPoints)));
        assert!(matches!(g.grad1(P, P), Err(CoreError::CoincidentPoints)));
    }
}
