//! Planar domains and the little vector algebra the solvers need.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product; twice the signed area of (0, self, o).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            self / n
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Bounded planar domain with zero Dirichlet boundary.
///
/// Polygons are given as a counter-clockwise simple loop; the disk is the
/// unit disk centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    UnitDisk,
    Rectangle { width: f64, height: f64 },
    Polygon { vertices: Vec<Vec2> },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::UnitDisk => Ok(()),
            Domain::Rectangle { width, height } => {
                if *width > 0.0 && *height > 0.0 && width.is_finite() && height.is_finite() {
                    Ok(())
                } else {
                    Err(CoreError::InvalidDomain(format!(
                        "rectangle sides must be positive and finite, got {width} x {height}"
                    )))
                }
            }
            Domain::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(CoreError::InvalidDomain(
                        "polygon needs at least three vertices".into(),
                    ));
                }
                let area = polygon_signed_area(vertices);
                if area <= 0.0 {
                    return Err(CoreError::InvalidDomain(
                        "polygon must be a counter-clockwise loop with positive area".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Exact area of the domain.
    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitDisk => std::f64::consts::PI,
            Domain::Rectangle { width, height } => width * height,
            Domain::Polygon { vertices } => polygon_signed_area(vertices),
        }
    }

    /// Rectangle is laid out as [0,w] x [0,h]; the disk is centered at 0.
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Domain::UnitDisk => p.norm_sq() < 1.0,
            Domain::Rectangle { width, height } => {
                p.x > 0.0 && p.x < *width && p.y > 0.0 && p.y < *height
            }
            Domain::Polygon { vertices } => winding_contains(vertices, p),
        }
    }

    /// Closest boundary point, used to keep refined boundary nodes exact.
    pub fn snap_to_boundary(&self, p: Vec2) -> Vec2 {
        match self {
            Domain::UnitDisk => {
                let n = p.norm();
                if n == 0.0 {
                    Vec2::new(1.0, 0.0)
                } else {
                    p / n
                }
            }
            Domain::Rectangle { width, height } => {
                // Snap to whichever side is nearest.
                let candidates = [
                    Vec2::new(p.x.clamp(0.0, *width), 0.0),
                    Vec2::new(p.x.clamp(0.0, *width), *height),
                    Vec2::new(0.0, p.y.clamp(0.0, *height)),
                    Vec2::new(*width, p.y.clamp(0.0, *height)),
                ];
                nearest_of(p, &candidates)
            }
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                let mut best = vertices[0];
                let mut best_d = f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let ab = b - a;
                    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
                    let q = a + ab * t;
                    let d = p.dist(q);
                    if d < best_d {
                        best_d = d;
                        best = q;
                    }
                }
                best
            }
        }
    }

    /// Distance from an interior point to the boundary (clamped at 0).
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        match self {
            Domain::UnitDisk => (1.0 - p.norm()).max(0.0),
            Domain::Rectangle { width, height } => p
                .x
                .min(width - p.x)
                .min(p.y)
                .min(height - p.y)
                .max(0.0),
            Domain::Polygon { vertices } => {
                let mut d = f64::INFINITY;
                let n = vertices.len();
                for i in 0..n {
                    d = d.min(dist_to_segment(p, vertices[i], vertices[(i + 1) % n]));
                }
                d
            }
        }
    }
}

pub fn polygon_signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut a = 0.0;
    for i in 0..n {
        a += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * a
}

fn winding_contains(vertices: &[Vec2], p: Vec2) -> bool {
    // Even-odd ray casting along +x.
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let xc = a.x + t * (b.x - a.x);
            if xc > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

fn nearest_of(p: Vec2, candidates: &[Vec2]) -> Vec2 {
    let mut best = candidates[0];
    let mut best_d = f64::INFINITY;
    for &c in candidates {
        let d = p.dist(c);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

pub fn dist_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
