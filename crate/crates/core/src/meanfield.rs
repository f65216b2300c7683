//! Weighted mean field problem over fixed concentration points: damped
//! Newton minimization of the coercive energy and spectral diagnostics.

use crate::elliptic::DirichletOperator;
use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::geometry::Vec2;
use crate::green::GreenEvaluator;
use crate::quad::RADON7;
use crate::sparse::{dot, pcg};
use std::f64::consts::PI;
use std::rc::Rc;

/// Coercivity threshold: the energy is bounded below for rho2 < 4π.
pub const RHO2_COERCIVE_LIMIT: f64 = 4.0 * PI;

const GRAD_TOL: f64 = 1e-10;
/// Gradient level still accepted when the line search hits the floating-point
/// floor of the energy; warm starts land here instead of GRAD_TOL because the
/// final Armijo decreases fall below machine noise.
const STAGNATION_TOL: f64 = 1e-7;
const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 60;
const ENERGY_FLOOR: f64 = -1e10;

/// Minimize I(z) = 1/2 ∫|∇z|² - 2 rho2 log ∫ h e^z over zero-trace fields,
/// where h is the vortex interaction weight of the given points.
pub struct MeanFieldProblem {
    op: Rc<DirichletOperator>,
    points: Vec<Vec2>,
    rho2: f64,
    /// Weight h sampled at every degree-5 quadrature point, in mesh order.
    h_at_quad: Vec<f64>,
    /// (triangle, barycentric, weight) in the same order.
    quad: Vec<(usize, [f64; 3], f64)>,
}

pub struct MeanFieldSolution {
    pub z: ScalarField,
    /// Energy I at the solution.
    pub energy: f64,
    /// log ∫ h e^z at the solution.
    pub log_mass: f64,
    pub iterations: usize,
    /// Dual norm of the final gradient.
    pub grad_norm: f64,
    /// Per-iteration record (iteration, energy, gradient norm, step length).
    pub trace: Vec<(usize, f64, f64, f64)>,
}

/// Smallest eigenvalue of the energy Hessian against the mass matrix; a
/// strictly positive value certifies a nondegenerate minimizer.
pub struct NondegeneracyReport {
    pub smallest_eigenvalue: f64,
    pub iterations: usize,
    pub positive: bool,
}

impl MeanFieldProblem {
    pub fn new(
        op: Rc<DirichletOperator>,
        green: &GreenEvaluator,
        points: &[Vec2],
        rho2: f64,
    ) -> Result<Self> {
        Self::with_options(op, green, points, rho2, false)
    }

    /// `allow_supercritical` skips the coercivity gate, for deliberate
    /// experiments past the 4π threshold.
    pub fn with_options(
        op: Rc<DirichletOperator>,
        green: &GreenEvaluator,
        points: &[Vec2],
        rho2: f64,
        allow_supercritical: bool,
    ) -> Result<Self> {
        if !(rho2 >= 0.0) || !rho2.is_finite() {
            return Err(CoreError::InvalidConfiguration(format!(
                "rho2 must be finite and nonnegative, got {rho2}"
            )));
        }
        if rho2 >= RHO2_COERCIVE_LIMIT && !allow_supercritical {
            return Err(CoreError::SupercriticalRho { rho2, limit: RHO2_COERCIVE_LIMIT });
        }
        for (i, &p) in points.iter().enumerate() {
            if !op.mesh().domain.contains(p) {
                return Err(CoreError::OutsideDomain { x: p.x, y: p.y });
            }
            for &q in &points[..i] {
                if p.dist(q) == 0.0 {
                    return Err(CoreError::CoincidentPoints);
                }
            }
        }
        let mut quad = Vec::new();
        let mut pts = Vec::new();
        op.mesh().for_each_quad(RADON7, |t, p, bary, w| {
            quad.push((t, bary, w));
            pts.push(p);
        });
        let h_at_quad = green.vortex_weight_table(op.mesh(), &pts, &quad, points)?;
        Ok(MeanFieldProblem { op, points: points.to_vec(), rho2, h_at_quad, quad })
    }

    pub fn operator(&self) -> &DirichletOperator {
        &self.op
    }

    pub fn operator_rc(&self) -> Rc<DirichletOperator> {
        Rc::clone(&self.op)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    /// Quadrature records (triangle, barycentric, weight) shared by every
    /// integral this problem evaluates.
    pub fn quad(&self) -> &[(usize, [f64; 3], f64)] {
        &self.quad
    }

    /// Vortex weight h at each quadrature point, aligned with [`Self::quad`].
    pub fn weight_at_quad(&self) -> &[f64] {
        &self.h_at_quad
    }

    /// ∫ h over the domain (mass of the bare weight).
    pub fn weight_mass(&self) -> f64 {
        self.quad.iter().zip(&self.h_at_quad).map(|((_, _, w), h)| w * h).sum()
    }

    /// Mass S(z) = ∫ h e^z and load b_g = ∫ h e^z φ_g (full-length).
    fn mass_and_load(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let tris = &self.op.mesh().tris;
        let mut s = 0.0;
        let mut b = vec![0.0; z.len()];
        for ((t, bary, w), &h) in self.quad.iter().zip(&self.h_at_quad) {
            let tri = tris[*t];
            let zq = bary[0] * z[tri[0]] + bary[1] * z[tri[1]] + bary[2] * z[tri[2]];
            let dens = w * h * zq.exp();
            s += dens;
            for k in 0..3 {
                b[tri[k]] += dens * bary[k];
            }
        }
        (s, b)
    }

    fn mass_only(&self, z: &[f64]) -> f64 {
        let tris = &self.op.mesh().tris;
        let mut s = 0.0;
        for ((t, bary, w), &h) in self.quad.iter().zip(&self.h_at_quad) {
            let tri = tris[*t];
            let zq = bary[0] * z[tri[0]] + bary[1] * z[tri[1]] + bary[2] * z[tri[2]];
            s += w * h * zq.exp();
        }
        s
    }

    /// Weighted mass-matrix product y = M̃ x with M̃_ij = ∫ h e^z φ_i φ_j,
    /// applied without assembling the matrix.
    fn weighted_mass_apply(&self, z: &[f64], x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let tris = &self.op.mesh().tris;
        for ((t, bary, w), &h) in self.quad.iter().zip(&self.h_at_quad) {
            let tri = tris[*t];
            let zq = bary[0] * z[tri[0]] + bary[1] * z[tri[1]] + bary[2] * z[tri[2]];
            let xq = bary[0] * x[tri[0]] + bary[1] * x[tri[1]] + bary[2] * x[tri[2]];
            let dens = w * h * zq.exp() * xq;
            for k in 0..3 {
                y[tri[k]] += dens * bary[k];
            }
        }
    }

    /// Energy I(z) of a zero-trace nodal field.
    pub fn energy(&self, z: &ScalarField) -> f64 {
        let quadratic = 0.5 * self.op.energy_product(&z.values, &z.values);
        if self.rho2 == 0.0 {
            return quadratic;
        }
        quadratic - 2.0 * self.rho2 * self.mass_only(&z.values).ln()
    }

    pub fn solve(&self) -> Result<MeanFieldSolution> {
        self.solve_from(ScalarField::zeros(self.op.num_nodes()))
    }

    /// Damped Newton from a warm start. Directions come from the exact
    /// Hessian via Sherman-Morrison over the bulk operator; the bulk solves
    /// use stiffness-preconditioned CG with a curvature guard, falling back
    /// to the full Hessian and then to preconditioned descent.
    pub fn solve_from(&self, z0: ScalarField) -> Result<MeanFieldSolution> {
        let n = self.op.num_nodes();
        assert_eq!(z0.len(), n);
        let mut z = z0.values;
        // Clean trace for safety: the algebra below assumes zero trace.
        for i in 0..n {
            if self.op.mesh().boundary[i] {
                z[i] = 0.0;
            }
        }
        let mut energy = self.energy_raw(&z);
        let mut trace: Vec<(usize, f64, f64, f64)> = Vec::new();
        let mut stall_streak = 0usize;
        for iter in 0..MAX_NEWTON {
            if energy < ENERGY_FLOOR {
                return Err(CoreError::CoercivityLoss { rho2: self.rho2, floor: ENERGY_FLOOR });
            }
            let (s, b) = if self.rho2 > 0.0 {
                self.mass_and_load(&z)
            } else {
                (1.0, vec![0.0; n])
            };
            // gradient g = A z - (2 rho2 / S) b
            let mut g = self.op.apply_stiffness(&z);
            let cb = 2.0 * self.rho2 / s;
            for i in 0..n {
                g[i] -= cb * b[i];
            }
            let g_int = self.op.restrict(&g);
            let grad_norm = {
                let ainv_g = self.op.solve_interior(&g_int);
                dot(&g_int, &ainv_g).max(0.0).sqrt()
            };
            if grad_norm <= GRAD_TOL * (1.0 + energy.abs()) {
                let log_mass = self.mass_only(&z).ln();
                trace.push((iter, energy, grad_norm, 0.0));
                return Ok(MeanFieldSolution {
                    z: ScalarField { values: z },
                    energy,
                    log_mass,
                    iterations: iter,
                    grad_norm,
                    trace,
                });
            }
            let dir = self.newton_direction(&z, s, &b, &g_int);
            // Line search on the energy (Armijo).
            let slope = dot(&self.op.restrict(&self.full_from_dir(&dir)), &g_int);
            let (dir, slope) = if slope < 0.0 {
                (dir, slope)
            } else {
                // Not a descent direction; fall back to preconditioned descent.
                let d = self.op.solve_interior(&g_int);
                let d: Vec<f64> = d.iter().map(|v| -v).collect();
                let sl = dot(&d, &g_int);
                (d, sl)
            };
            let e_prev = energy;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let trial = self.step(&z, &dir, t);
                let e_new = self.energy_raw(&trial);
                if e_new <= energy + 1e-4 * t * slope {
                    z = trial;
                    energy = e_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            trace.push((iter, energy, grad_norm, t));
            // Progress below machine noise means the energy floor has been
            // reached; two such iterations in a row (or an exhausted line
            // search) end the iteration. A negligible gradient there is
            // convergence to the floating-point floor — warm starts land on
            // it routinely — while a decisive gradient is a genuine failure.
            let noise = 4.0 * f64::EPSILON * (1.0 + energy.abs());
            if !accepted || e_prev - energy <= noise {
                stall_streak += 1;
            } else {
                stall_streak = 0;
            }
            if !accepted || stall_streak >= 2 {
                if grad_norm <= STAGNATION_TOL * (1.0 + energy.abs()) {
                    let log_mass = self.mass_only(&z).ln();
                    return Ok(MeanFieldSolution {
                        z: ScalarField { values: z },
                        energy,
                        log_mass,
                        iterations: iter + 1,
                        grad_norm,
                        trace,
                    });
                }
                return Err(CoreError::MeanFieldDiverged(format!(
                    "line search stalled at iteration {iter} (grad norm {grad_norm:.3e})"
                )));
            }
        }
        Err(CoreError::MeanFieldDiverged(format!(
            "no convergence within {MAX_NEWTON} Newton iterations"
        )))
    }

    fn energy_raw(&self, z: &[f64]) -> f64 {
        let quadratic = 0.5 * self.op.energy_product(z, z);
        if self.rho2 == 0.0 {
            quadratic
        } else {
            quadratic - 2.0 * self.rho2 * self.mass_only(z).ln()
        }
    }

    fn full_from_dir(&self, dir: &[f64]) -> Vec<f64> {
        self.op.prolong(dir)
    }

    fn step(&self, z: &[f64], dir_int: &[f64], t: f64) -> Vec<f64> {
        let mut out = z.to_vec();
        for (slot, &i) in self.op.interior().iter().enumerate() {
            out[i] += t * dir_int[slot];
        }
        out
    }

    /// Apply the bulk operator K = A - (2 rho2/S) M̃ on interior vectors.
    fn bulk_apply(&self, z: &[f64], s: f64, x_int: &[f64], y_int: &mut [f64]) {
        let x_full = self.op.prolong(x_int);
        let ax = self.op.apply_stiffness(&x_full);
        let mut mx = vec![0.0; x_full.len()];
        if self.rho2 > 0.0 {
            self.weighted_mass_apply(z, &x_full, &mut mx);
        }
        let c = 2.0 * self.rho2 / s;
        for (slot, &i) in self.op.interior().iter().enumerate() {
            y_int[slot] = ax[i] - c * mx[i];
        }
    }

    /// Newton direction d solving (K + σ b bᵀ) d = -g via Sherman-Morrison,
    /// with staged fallbacks when curvature checks fail.
    fn newton_direction(&self, z: &[f64], s: f64, b_full: &[f64], g_int: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = g_int.iter().map(|v| -v).collect();
        if self.rho2 == 0.0 {
            return self.op.solve_interior(&rhs);
        }
        let sigma = 2.0 * self.rho2 / (s * s);
        let b_int = self.op.restrict(b_full);
        let precond = |r: &[f64]| self.op.solve_interior(r);
        let k_apply = |x: &[f64], y: &mut [f64]| self.bulk_apply(z, s, x, y);
        let tol = 1e-10;
        let sol_rhs = pcg(k_apply, precond, &rhs, tol, 400);
        let sol_b = pcg(k_apply, precond, &b_int, tol, 400);
        if sol_rhs.converged && sol_b.converged {
            // d = K⁻¹rhs - σ (bᵀK⁻¹rhs)/(1 + σ bᵀK⁻¹b) K⁻¹b
            let bk_rhs = dot(&b_int, &sol_rhs.x);
            let bk_b = dot(&b_int, &sol_b.x);
            let denom = 1.0 + sigma * bk_b;
            if denom.abs() > 1e-14 {
                let coef = sigma * bk_rhs / denom;
                return sol_rhs
                    .x
                    .iter()
                    .zip(&sol_b.x)
                    .map(|(r, bb)| r - coef * bb)
                    .collect();
            }
        }
        // Full-Hessian CG: H = K + σ b bᵀ is positive definite near the
        // minimizer even when K alone is not.
        let h_apply = |x: &[f64], y: &mut [f64]| {
            self.bulk_apply(z, s, x, y);
            let bx = dot(&b_int, x);
            for (yi, bi) in y.iter_mut().zip(&b_int) {
                *yi += sigma * bx * bi;
            }
        };
        let sol_h = pcg(h_apply, precond, &rhs, tol, 400);
        if sol_h.converged {
            return sol_h.x;
        }
        // Last resort: preconditioned steepest descent.
        self.op.solve_interior(&rhs)
    }

    /// Inverse-power iteration for the smallest eigenvalue of the Hessian
    /// pencil (H, M) at a solution; positive means nondegenerate minimum.
    pub fn nondegeneracy(&self, sol: &MeanFieldSolution) -> Result<NondegeneracyReport> {
        let z = &sol.z.values;
        let (s, b_full) = if self.rho2 > 0.0 {
            self.mass_and_load(z)
        } else {
            (1.0, vec![0.0; z.len()])
        };
        let sigma = 2.0 * self.rho2 / (s * s);
        let b_int = self.op.restrict(&b_full);
        let n_int = self.op.num_interior();
        // Try increasing diagonal shifts until H + τM is positive definite.
        for &tau in &[0.0, 10.0, 1e3] {
            let shifted_apply = |x: &[f64], y: &mut [f64]| {
                self.bulk_apply(z, s, x, y);
                let x_full = self.op.prolong(x);
                let mx = self.op.apply_mass(&x_full);
                let mx_int = self.op.restrict(&mx);
                let bx = dot(&b_int, x);
                for i in 0..y.len() {
                    y[i] += sigma * bx * b_int[i] + tau * mx_int[i];
                }
            };
            let precond = |r: &[f64]| self.op.solve_interior(r);
            let mut v = vec![1.0; n_int];
            let mut mu_prev = f64::INFINITY;
            let mut ok = true;
            let mut iters = 0;
            for it in 0..200 {
                iters = it + 1;
                // w = M v
                let v_full = self.op.prolong(&v);
                let w = self.op.restrict(&self.op.apply_mass(&v_full));
                let sol_step = pcg(shifted_apply, precond, &w, 1e-10, 500);
                if sol_step.indefinite || !sol_step.converged {
                    ok = false;
                    break;
                }
                let u = sol_step.x;
                // Rayleigh quotient on the pencil (H + τM, M).
                let mut hu = vec![0.0; n_int];
                shifted_apply(&u, &mut hu);
                let u_full = self.op.prolong(&u);
                let mu_den = dot(&self.op.restrict(&self.op.apply_mass(&u_full)), &u);
                let mu = dot(&hu, &u) / mu_den;
                let scale = 1.0 / mu_den.sqrt();
                v = u.iter().map(|x| x * scale).collect();
                if (mu - mu_prev).abs() <= 1e-9 * mu.abs().max(1e-12) {
                    return Ok(NondegeneracyReport {
                        smallest_eigenvalue: mu - tau,
                        iterations: iters,
                        positive: mu - tau > 0.0,
                    });
                }
                mu_prev = mu;
            }
            if ok {
                // Slow convergence: report the last estimate honestly.
                return Ok(NondegeneracyReport {
                    smallest_eigenvalue: mu_prev - tau,
                    iterations: iters,
                    positive: mu_prev - tau > 0.0,
                });
            }
        }
        Err(CoreError::LinearSolve(
            "Hessian pencil stayed indefinite under all shifts".into(),
        ))
    }
}
