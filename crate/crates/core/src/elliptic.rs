//! Dirichlet Laplacian on a mesh: assembly, cached factorization, norms.

use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::geometry::Vec2;
use crate::mesh::Mesh;
use crate::quad::{TriRule, RADON7};
use crate::sparse::{SpdFactor, TripletList};
use faer::sparse::SparseColMat;
use std::rc::Rc;

/// Relative weak-residual level that triggers one round of iterative
/// refinement after a direct solve.
const REFINE_RESIDUAL_REL: f64 = 1e-13;

/// Stiffness and mass matrices of a mesh with a cached Cholesky
/// factorization of the interior block, shared by every solver stage.
pub struct DirichletOperator {
    mesh: Rc<Mesh>,
    stiffness: SparseColMat<usize, f64>,
    mass: SparseColMat<usize, f64>,
    interior: Vec<usize>,
    /// node id -> interior slot, or -1 for boundary nodes.
    interior_slot: Vec<i64>,
    factor: SpdFactor,
}

impl DirichletOperator {
    pub fn new(mesh: Rc<Mesh>) -> Result<Self> {
        let n = mesh.num_nodes();
        let mut k = TripletList::with_capacity(n, n, 9 * mesh.num_tris());
        let mut m = TripletList::with_capacity(n, n, 9 * mesh.num_tris());
        for t in 0..mesh.num_tris() {
            let (grads, area) = mesh.tri_grads(t);
            let tri = mesh.tris[t];
            for i in 0..3 {
                for j in 0..3 {
                    k.push(tri[i], tri[j], area * grads[i].dot(grads[j]));
                    let mij = if i == j { area / 6.0 } else { area / 12.0 };
                    m.push(tri[i], tri[j], mij);
                }
            }
        }
        let stiffness = k.to_mat()?;
        let mass = m.to_mat()?;
        let interior: Vec<usize> = (0..n).filter(|&i| !mesh.boundary[i]).collect();
        let mut interior_slot = vec![-1i64; n];
        for (s, &i) in interior.iter().enumerate() {
            interior_slot[i] = s as i64;
        }
        // Interior stiffness block.
        let mut kii = TripletList::new(interior.len(), interior.len());
        for col in 0..n {
            let cs = interior_slot[col];
            if cs < 0 {
                continue;
            }
            let rows = stiffness.row_idx_of_col_raw(col);
            let vals = stiffness.val_of_col(col);
            for (r, v) in rows.iter().zip(vals) {
                let rs = interior_slot[*r];
                if rs >= 0 {
                    kii.push(rs as usize, cs as usize, *v);
                }
            }
        }
        let factor = SpdFactor::new(&kii.to_mat()?)?;
        Ok(DirichletOperator { mesh, stiffness, mass, interior, interior_slot, factor })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_rc(&self) -> Rc<Mesh> {
        Rc::clone(&self.mesh)
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        let s = self.interior_slot[node];
        (s >= 0).then_some(s as usize)
    }

    /// Full stiffness product y = A u over all nodes.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        crate::sparse::spmv(&self.stiffness, u, &mut y);
        y
    }

    /// Full consistent-mass product y = M u.
    pub fn apply_mass(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        crate::sparse::spmv(&self.mass, u, &mut y);
        y
    }

    /// Dirichlet energy product u' A v.
    pub fn energy_product(&self, u: &[f64], v: &[f64]) -> f64 {
        crate::sparse::dot(&self.apply_stiffness(u), v)
    }

    /// H1 seminorm sqrt(u' A u); the natural norm for zero-trace fields.
    pub fn h1_seminorm(&self, u: &[f64]) -> f64 {
        self.energy_product(u, u).max(0.0).sqrt()
    }

    /// Restrict a full-length vector to interior slots.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }

    /// Scatter interior values into a full-length zero-trace vector.
    pub fn prolong(&self, int: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_nodes()];
        for (s, &i) in self.interior.iter().enumerate() {
            full[i] = int[s];
        }
        full
    }

    /// Solve A_II x = b with one round of iterative refinement.
    pub fn solve_interior(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve(b);
        let full = self.prolong(&x);
        let ax = self.restrict(&self.apply_stiffness(&full));
        let bnorm = crate::sparse::norm2(b);
        let mut r = vec![0.0; b.len()];
        for i in 0..b.len() {
            r[i] = b[i] - ax[i];
        }
        if crate::sparse::norm2(&r) > REFINE_RESIDUAL_REL * bnorm.max(1e-300) {
            let dx = self.factor.solve(&r);
            for i in 0..b.len() {
                x[i] += dx[i];
            }
        }
        x
    }

    /// Solve -Δu = f, u = 0 on the boundary, with f sampled at nodes.
    pub fn solve_poisson_nodal(&self, f: &[f64]) -> ScalarField {
        let load = self.apply_mass(f);
        self.solve_with_load(&load)
    }

    /// Solve -Δu = f with the load integrated pointwise (degree-5 rule), for
    /// right-hand sides that are far from piecewise linear.
    pub fn solve_poisson_fn(&self, f: impl Fn(Vec2) -> f64) -> ScalarField {
        let load = self.assemble_load(&f);
        self.solve_with_load(&load)
    }

    /// Load vector (∫ f φ_i) for all nodes by degree-5 quadrature.
    pub fn assemble_load(&self, f: &impl Fn(Vec2) -> f64) -> Vec<f64> {
        let mut load = vec![0.0; self.mesh.num_nodes()];
        let tris = &self.mesh.tris;
        self.mesh.for_each_quad(RADON7, |t, p, bary, w| {
            let fv = f(p) * w;
            let tri = tris[t];
            for s in 0..3 {
                load[tri[s]] += fv * bary[s];
            }
        });
        load
    }

    /// Solve with a pre-assembled load (full-length vector).
    pub fn solve_with_load(&self, load: &[f64]) -> ScalarField {
        let b = self.restrict(load);
        let x = self.solve_interior(&b);
        ScalarField { values: self.prolong(&x) }
    }

    /// Harmonic extension: Δu = 0 inside, u = g on the boundary.
    pub fn harmonic_extension(&self, g: impl Fn(Vec2) -> f64) -> ScalarField {
        let n = self.mesh.num_nodes();
        let mut u = vec![0.0; n];
        for i in 0..n {
            if self.mesh.boundary[i] {
                u[i] = g(self.mesh.nodes[i]);
            }
        }
        let coupled = self.apply_stiffness(&u);
        let b: Vec<f64> = self.interior.iter().map(|&i| -coupled[i]).collect();
        let x = self.solve_interior(&b);
        for (s, &i) in self.interior.iter().enumerate() {
            u[i] = x[s];
        }
        ScalarField { values: u }
    }

    /// Stiffness entries of the interior block as (row slot, col slot,
    /// value), for embedding into larger coupled systems.
    pub fn interior_stiffness_entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.mesh.num_nodes();
        let mut out = Vec::new();
        for col in 0..n {
            let Some(cs) = self.interior_slot(col) else { continue };
            let rows = self.stiffness.row_idx_of_col_raw(col);
            let vals = self.stiffness.val_of_col(col);
            for (r, v) in rows.iter().zip(vals) {
                if let Some(rs) = self.interior_slot(*r) {
                    out.push((rs, cs, *v));
                }
            }
        }
        out
    }

    /// Dual norm sqrt(r' A^{-1} r) of a residual load vector; boundary
    /// entries are ignored since test functions vanish there.
    pub fn dual_norm(&self, load: &[f64]) -> f64 {
        let r = self.restrict(load);
        let x = self.solve_interior(&r);
        crate::sparse::dot(&r, &x).max(0.0).sqrt()
    }

    /// L^p norm of the interpolated field by degree-5 quadrature; `p` must
    /// be >= 1 and finite (use `max_abs` for the sup norm).
    pub fn lp_norm(&self, u: &ScalarField, p: f64) -> f64 {
        assert!(p >= 1.0 && p.is_finite());
        let vals = &u.values;
        let tris = &self.mesh.tris;
        let mut acc = 0.0;
        self.mesh.for_each_quad(RADON7, |t, _, bary, w| {
            let tri = tris[t];
            let v = bary[0] * vals[tri[0]] + bary[1] * vals[tri[1]] + bary[2] * vals[tri[2]];
            acc += w * v.abs().powf(p);
        });
        acc.powf(1.0 / p)
    }

    /// Recovered gradient of a nodal field at `p`: per-vertex area-weighted
    /// averages of element gradients, interpolated across the containing
    /// triangle. Refuses points whose patch touches the boundary layer.
    pub fn gradient_at(&self, u: &ScalarField, p: Vec2) -> Result<Vec2> {
        let loc = self.mesh.locate(p)?;
        let tri = self.mesh.tris[loc.tri];
        let local_h = {
            let [a, b, c] = self.mesh.tri_nodes(loc.tri);
            a.dist(b).max(b.dist(c)).max(c.dist(a))
        };
        let dist = self.mesh.domain.boundary_distance(p);
        if dist < local_h {
            return Err(CoreError::TooNearBoundary {
                x: p.x,
                y: p.y,
                dist,
                margin: local_h,
            });
        }
        let mut g = Vec2::ZERO;
        for s in 0..3 {
            g = g + self.recovered_node_gradient(u, tri[s]) * loc.bary[s];
        }
        Ok(g)
    }

    fn recovered_node_gradient(&self, u: &ScalarField, node: usize) -> Vec2 {
        let mut g = Vec2::ZERO;
        let mut wsum = 0.0;
        for &t in self.mesh.node_triangles(node) {
            let (grads, area) = self.mesh.tri_grads(t as usize);
            let tri = self.mesh.tris[t as usize];
            let mut gt = Vec2::ZERO;
            for s in 0..3 {
                gt = gt + grads[s] * u.values[tri[s]];
            }
            g = g + gt * area;
            wsum += area;
        }
        g / wsum
    }

    /// Element-constant gradient of a nodal field on triangle `t`.
    pub fn element_gradient(&self, u: &[f64], t: usize) -> Vec2 {
        let (grads, _) = self.mesh.tri_grads(t);
        let tri = self.mesh.tris[t];
        let mut g = Vec2::ZERO;
        for s in 0..3 {
            g = g + grads[s] * u[tri[s]];
        }
        g
    }

    /// Integrate with the degree-5 rule (convenience passthrough).
    pub fn integrate_fn(&self, f: impl FnMut(Vec2) -> f64) -> f64 {
        self.mesh.integrate_fn(RADON7, f)
    }

    pub fn integrate_fn_with(&self, rule: TriRule, f: impl FnMut(Vec2) -> f64) -> f64 {
        self.mesh.integrate_fn(rule, f)
    }
}
