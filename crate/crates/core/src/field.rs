//! Nodal scalar fields on a mesh, with interpolation and cross-mesh transfer.

use crate::error::Result;
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// Piecewise-linear field stored by node value. The mesh is passed to each
/// operation rather than captured, so a field can outlive solver plumbing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField { values: vec![0.0; n] }
    }

    /// Sample `f` at every node.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Self {
        ScalarField { values: mesh.nodes.iter().map(|&p| f(p)).collect() }
    }

    /// Sample `f` at interior nodes, pinning boundary nodes to zero.
    pub fn from_fn_zero_trace(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Self {
        ScalarField {
            values: mesh
                .nodes
                .iter()
                .enumerate()
                .map(|(i, &p)| if mesh.boundary[i] { 0.0 } else { f(p) })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_at(&self, mesh: &Mesh, p: Vec2) -> Result<f64> {
        Ok(mesh.interp(mesh.locate(p)?, &self.values))
    }

    /// Interpolated value with graceful clamping just outside the mesh hull.
    pub fn value_at_clamped(&self, mesh: &Mesh, p: Vec2) -> f64 {
        mesh.interp(mesh.locate_clamped(p), &self.values)
    }

    pub fn integrate(&self, mesh: &Mesh) -> f64 {
        mesh.integrate_p1(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Move the field onto another mesh of the same domain. Target nodes in
    /// the sliver outside the source hull take clamped values; target
    /// boundary nodes are pinned to zero when `zero_trace` is set.
    pub fn transfer(&self, from: &Mesh, to: &Mesh, zero_trace: bool) -> ScalarField {
        let values = to
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if zero_trace && to.boundary[i] {
                    0.0
                } else {
                    self.value_at_clamped(from, p)
                }
            })
            .collect();
        ScalarField { values }
    }

    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }
}
