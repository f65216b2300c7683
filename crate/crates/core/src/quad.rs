//! Quadrature rules on triangles plus the radial reference integrals used as oracles.

use crate::geometry::Vec2;

/// A triangle rule as barycentric points with weights summing to 1.
#[derive(Debug, Clone, Copy)]
pub struct TriRule {
    pub points: &'static [([f64; 3], f64)],
}

/// Edge-midpoint rule: 3 points, exact for quadratics. This is the rule the
/// piecewise-linear mass assembly is built on.
pub const MID3: TriRule = TriRule {
    points: &[
        ([0.5, 0.5, 0.0], 1.0 / 3.0),
        ([0.0, 0.5, 0.5], 1.0 / 3.0),
        ([0.5, 0.0, 0.5], 1.0 / 3.0),
    ],
};

const RADON_A1: f64 = 0.059_715_871_789_769_820;
const RADON_B1: f64 = 0.470_142_064_105_115_090;
const RADON_W1: f64 = 0.132_394_152_788_506_180;
const RADON_A2: f64 = 0.797_426_985_353_087_320;
const RADON_B2: f64 = 0.101_286_507_323_456_340;
const RADON_W2: f64 = 0.125_939_180_544_827_150;

/// Radon's 7-point rule, exact for quintics. Used wherever the integrand has
/// exponential nonlinearities: sharp bubble profiles punish low-order rules.
pub const RADON7: TriRule = TriRule {
    points: &[
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([RADON_A1, RADON_B1, RADON_B1], RADON_W1),
        ([RADON_B1, RADON_A1, RADON_B1], RADON_W1),
        ([RADON_B1, RADON_B1, RADON_A1], RADON_W1),
        ([RADON_A2, RADON_B2, RADON_B2], RADON_W2),
        ([RADON_B2, RADON_A2, RADON_B2], RADON_W2),
        ([RADON_B2, RADON_B2, RADON_A2], RADON_W2),
    ],
};

impl TriRule {
    /// Integrate `f` over the physical triangle (a, b, c).
    pub fn integrate(&self, a: Vec2, b: Vec2, c: Vec2, mut f: impl FnMut(Vec2) -> f64) -> f64 {
        let area = 0.5 * (b - a).cross(c - a);
        let mut acc = 0.0;
        for &(bary, w) in self.points {
            let p = a * bary[0] + b * bary[1] + c * bary[2];
            acc += w * f(p);
        }
        acc * area
    }

    /// Visit every quadrature point with its physical weight (w * area).
    pub fn for_each(&self, a: Vec2, b: Vec2, c: Vec2, mut visit: impl FnMut(Vec2, [f64; 3], f64)) {
        let area = 0.5 * (b - a).cross(c - a);
        for &(bary, w) in self.points {
            let p = a * bary[0] + b * bary[1] + c * bary[2];
            visit(p, bary, w * area);
        }
    }
}

/// Composite Gauss-Legendre (5 nodes per panel) on [a, b].
pub fn gauss_legendre_panels(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    // 5-point nodes/weights on [-1, 1].
    const X: [f64; 5] = [
        -0.906_179_845_938_663_9,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_663_9,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];
    let hp = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * hp;
        let mid = lo + 0.5 * hp;
        for i in 0..5 {
            acc += W[i] * f(mid + 0.5 * hp * X[i]);
        }
    }
    acc * 0.5 * hp
}

/// Integral of (1 + |y|^2)^{-2} over the whole plane.
pub const BUBBLE_MASS_FULL: f64 = std::f64::consts::PI;

/// Integral of (1 + |y|^2)^{-2} over the disk of radius `r`: pi r^2/(1 + r^2).
pub fn bubble_mass_truncated(r: f64) -> f64 {
    std::f64::consts::PI * r * r / (1.0 + r * r)
}

/// Integral of y_1^2 (1 + |y|^2)^{-3} over the whole plane (= pi/4 by symmetry
/// from the radial integral of r^3/(1+r^2)^3).
pub const SECOND_MOMENT_FULL: f64 = std::f64::consts::PI / 4.0;

/// Same second moment truncated to the disk of radius `r`.
pub fn second_moment_truncated(r: f64) -> f64 {
    let s = 1.0 + r * r;
    (std::f64::consts::PI / 2.0) * (0.5 - 1.0 / s + 0.5 / (s * s))
}

/// Integral of log(1 + |y|^2) (1 + |y|^2)^{-2} over the whole plane.
pub const LOG_MOMENT_FULL: f64 = std::f64::consts::PI;

/// Same log moment truncated to the disk of radius `r`.
pub fn log_moment_truncated(r: f64) -> f64 {
    let s = 1.0 + r * r;
    std::f64::consts::PI * (1.0 - (1.0 + s.ln()) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const REF_TRI: (Vec2, Vec2, Vec2) = (
        Vec2 { x: 0.0, y: 0.0 },
        Vec2 { x: 1.0, y: 0.0 },
        Vec2 { x: 0.0, y: 1.0 },
    );

    #[test]
    fn weights_sum_to_one() {
        for rule in [MID3, RADON7] {
            let s: f64 = rule.points.iter().map(|&(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mid3_exact_through_degree_two() {
        let (a, b, c) = REF_TRI;
        // x^2 over the reference triangle = 1/12, xy = 1/24.
        assert!((MID3.integrate(a, b, c, |p| p.x * p.x) - 1.0 / 12.0).abs() < 1e-15);
        assert!((MID3.integrate(a, b, c, |p| p.x * p.y) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn radon7_exact_through_degree_five() {
        let (a, b, c) = REF_TRI;
        // Monomial integrals over the reference triangle follow the beta
        // formula a! b! / (a + b + 2)!: x^5 gives 1/42, x^3 y^2 gives 1/420.
        assert!((RADON7.integrate(a, b, c, |p| p.x.powi(5)) - 1.0 / 42.0).abs() < 1e-14);
        assert!(
            (RADON7.integrate(a, b, c, |p| p.x.powi(3) * p.y * p.y) - 1.0 / 420.0).abs() < 1e-14
        );
    }

    /// Piecewise radial quadrature: fine panels where the integrand curves,
    /// coarser ones on the algebraic tail.
    fn radial(r: f64, f: impl Fn(f64) -> f64 + Copy) -> f64 {
        let split = r.min(10.0);
        let mut acc = gauss_legendre_panels(0.0, split, 2000, f);
        if r > split {
            acc += gauss_legendre_panels(split, r, 2000, f);
        }
        2.0 * PI * acc
    }

    #[test]
    fn truncated_masses_match_direct_radial_quadrature() {
        for r in [1.0, 10.0, 1000.0] {
            let direct = radial(r, |t| t / (1.0 + t * t).powi(2));
            assert!((direct - bubble_mass_truncated(r)).abs() < 1e-10 * (1.0 + direct));
        }
        let m2 = 2.0 * PI
            * gauss_legendre_panels(0.0, 50.0, 4000, |t| 0.5 * t.powi(3) / (1.0 + t * t).powi(3));
        assert!((m2 - second_moment_truncated(50.0)).abs() < 1e-10);
    }

    #[test]
    fn log_moment_closes_on_pi() {
        // Quadrature out to R plus the analytic tail must recover pi.
        let r = 100.0;
        let inner = 2.0 * PI
            * gauss_legendre_panels(0.0, r, 8000, |t| {
                t * (1.0 + t * t).ln() / (1.0 + t * t).powi(2)
            });
        let tail = LOG_MOMENT_FULL - log_moment_truncated(r);
        assert!((inner + tail - PI).abs() < 1e-9);
        // And the pure closed form converges to pi as R grows.
        assert!((log_moment_truncated(1e6) - PI).abs() < 1e-9);
    }

    #[test]
    fn truncation_deficit_is_visible_at_moderate_radius() {
        // At R = 1000 the mass deficit is pi/(1+R^2) ~ 3.1e-6: big enough that
        // tests must compare against the truncated value, not the full one.
        let deficit = BUBBLE_MASS_FULL - bubble_mass_truncated(1000.0);
        assert!(deficit > 1e-6 && deficit < 1e-5);
    }
}
