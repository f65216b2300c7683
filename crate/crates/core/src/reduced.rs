//! Reduced energy landscape over concentration points: value, exact
//! gradient, and critical-configuration search with honest stall reporting.

use crate::elliptic::DirichletOperator;
use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::geometry::{Domain, Vec2};
use crate::green::GreenEvaluator;
use crate::meanfield::MeanFieldProblem;
use crate::mesh::{Mesh, SizeField};
use crate::sparse::{jacobi_eigen, solve_small};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::rc::Rc;

const DEFAULT_MESH_SIZE: f64 = 0.08;
const DEFAULT_MARGIN: f64 = 0.05;
const DEFAULT_SEPARATION: f64 = 0.05;
/// Context meshes stay valid while points drift less than this from the
/// well centers they were built around.
const CTX_DRIFT_LIMIT: f64 = 0.06;
const WELL_RADIUS: f64 = 0.12;
const MAX_DESCENT_ITERS: usize = 200;
const MAX_STARTS: usize = 8;
const POLISH_THRESHOLD: f64 = 0.5;

/// Value of the reduced energy at one configuration, split into the parts
/// that define it; their sum reproduces `value` exactly.
pub struct LambdaBreakdown {
    pub value: f64,
    /// Half the mean field energy at its minimizer.
    pub half_mean_field: f64,
    /// -16π² Σ_i H(ξ_i, ξ_i).
    pub robin_part: f64,
    /// -16π² Σ_{i≠j} G(ξ_i, ξ_j).
    pub interaction_part: f64,
    /// Exact gradient, one vector per concentration point.
    pub gradient: Vec<Vec2>,
    pub mean_field_iterations: usize,
    pub mean_field_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Minimum,
    Maximum,
    Saddle,
    /// An eigenvalue sits too close to zero to call.
    Unresolved,
}

#[derive(Debug)]
pub struct CriticalPoint {
    pub points: Vec<Vec2>,
    pub value: f64,
    pub grad_norm: f64,
    pub classification: Classification,
    /// Eigenvalues of the finite-difference Hessian, ascending.
    pub hessian_eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub starts_tried: usize,
}

/// Reusable evaluation state: one graded mesh (wells at the configuration
/// it was centered on), its operator and Green backend, and a warm start
/// for the mean field solve. Finite-difference stencils must stay inside
/// one context so the discretization error cancels in the differences.
pub struct EvalContext {
    kind: CtxKind,
    centers: Vec<Vec2>,
}

enum CtxKind {
    /// Unit disk with rho2 = 0: everything is closed-form, no mesh at all.
    Meshless,
    Meshed { op: Rc<DirichletOperator>, green: GreenEvaluator, warm: RefCell<Option<ScalarField>> },
}

/// The reduced energy Λ over k-point configurations of a domain, at a fixed
/// second-component mass rho2.
pub struct ReducedEnergy {
    domain: Domain,
    rho2: f64,
    mesh_size: f64,
    margin: f64,
    separation: f64,
}

impl ReducedEnergy {
    pub fn new(domain: Domain, rho2: f64) -> Result<Self> {
        domain.validate()?;
        if !(rho2 >= 0.0) || !rho2.is_finite() {
            return Err(CoreError::InvalidConfiguration(format!(
                "rho2 must be finite and nonnegative, got {rho2}"
            )));
        }
        Ok(ReducedEnergy {
            domain,
            rho2,
            mesh_size: DEFAULT_MESH_SIZE,
            margin: DEFAULT_MARGIN,
            separation: DEFAULT_SEPARATION,
        })
    }

    pub fn with_mesh_size(mut self, h: f64) -> Self {
        self.mesh_size = h;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// A configuration is admissible when every point keeps the boundary
    /// margin and pairwise separations stay positive.
    pub fn validate(&self, points: &[Vec2]) -> Result<()> {
        if points.is_empty() {
            return Err(CoreError::InvalidConfiguration("no concentration points".into()));
        }
        for (i, &p) in points.iter().enumerate() {
            if !self.domain.contains(p) {
                return Err(CoreError::OutsideDomain { x: p.x, y: p.y });
            }
            let d = self.domain.boundary_distance(p);
            if d < self.margin {
                return Err(CoreError::TooNearBoundary { x: p.x, y: p.y, dist: d, margin: self.margin });
            }
            for &q in &points[..i] {
                if p.dist(q) == 0.0 {
                    return Err(CoreError::CoincidentPoints);
                }
            }
        }
        Ok(())
    }

    fn is_meshless(&self) -> bool {
        matches!(self.domain, Domain::UnitDisk) && self.rho2 == 0.0
    }

    /// Build an evaluation context centered at `points`.
    pub fn context(&self, points: &[Vec2]) -> Result<EvalContext> {
        self.validate(points)?;
        if self.is_meshless() {
            return Ok(EvalContext { kind: CtxKind::Meshless, centers: points.to_vec() });
        }
        let mut size = SizeField::uniform(self.mesh_size);
        for &p in points {
            size.add_well(p, self.mesh_size / 3.0, WELL_RADIUS);
        }
        let mesh = Rc::new(Mesh::build(&self.domain, &size)?);
        let op = Rc::new(DirichletOperator::new(mesh)?);
        let green = match self.domain {
            Domain::UnitDisk => GreenEvaluator::analytic_disk(),
            _ => GreenEvaluator::numeric(Rc::clone(&op)),
        };
        Ok(EvalContext {
            kind: CtxKind::Meshed { op, green, warm: RefCell::new(None) },
            centers: points.to_vec(),
        })
    }

    fn ctx_still_valid(&self, ctx: &EvalContext, points: &[Vec2]) -> bool {
        ctx.centers.len() == points.len()
            && ctx.centers.iter().zip(points).all(|(c, p)| c.dist(*p) <= CTX_DRIFT_LIMIT)
    }

    /// Reduced energy value with parts, gradient, and solver diagnostics.
    pub fn lambda(&self, points: &[Vec2]) -> Result<LambdaBreakdown> {
        let ctx = self.context(points)?;
        self.lambda_in(&ctx, points)
    }

    pub fn lambda_in(&self, ctx: &EvalContext, points: &[Vec2]) -> Result<LambdaBreakdown> {
        self.validate(points)?;
        match &ctx.kind {
            CtxKind::Meshless => {
                let green = GreenEvaluator::analytic_disk();
                let (robin, inter) = self.pair_parts(&green, points)?;
                let gradient = self.gradient_points_only(&green, points, None)?;
                Ok(LambdaBreakdown {
                    value: robin + inter,
                    half_mean_field: 0.0,
                    robin_part: robin,
                    interaction_part: inter,
                    gradient,
                    mean_field_iterations: 0,
                    mean_field_grad_norm: 0.0,
                })
            }
            CtxKind::Meshed { op, green, warm } => {
                let (robin, inter) = self.pair_parts(green, points)?;
                if self.rho2 == 0.0 {
                    let gradient = self.gradient_points_only(green, points, None)?;
                    return Ok(LambdaBreakdown {
                        value: robin + inter,
                        half_mean_field: 0.0,
                        robin_part: robin,
                        interaction_part: inter,
                        gradient,
                        mean_field_iterations: 0,
                        mean_field_grad_norm: 0.0,
                    });
                }
                let problem = MeanFieldProblem::new(Rc::clone(op), green, points, self.rho2)?;
                let start = warm
                    .borrow()
                    .clone()
                    .unwrap_or_else(|| ScalarField::zeros(op.num_nodes()));
                let sol = problem.solve_from(start)?;
                *warm.borrow_mut() = Some(sol.z.clone());
                let half = 0.5 * sol.energy;
                let gradient = self.gradient_points_only(green, points, Some((op, &sol.z)))?;
                Ok(LambdaBreakdown {
                    value: half + robin + inter,
                    half_mean_field: half,
                    robin_part: robin,
                    interaction_part: inter,
                    gradient,
                    mean_field_iterations: sol.iterations,
                    mean_field_grad_norm: sol.grad_norm,
                })
            }
        }
    }

    /// -16π² (Σ H(ξ_i, ξ_i), Σ_{i≠j} G(ξ_i, ξ_j)).
    fn pair_parts(&self, green: &GreenEvaluator, points: &[Vec2]) -> Result<(f64, f64)> {
        let c = -16.0 * PI * PI;
        let mut robin = 0.0;
        for &p in points {
            robin += green.robin(p)?;
        }
        let mut inter = 0.0;
        for (i, &p) in points.iter().enumerate() {
            for (j, &q) in points.iter().enumerate() {
                if i != j {
                    inter += green.value(p, q)?;
                }
            }
        }
        Ok((c * robin, c * inter))
    }

    /// Exact gradient: per point j, 2π ∇z(ξ_j) - 32π² (∂₁H(ξ_j, ξ_j) +
    /// Σ_{i≠j} ∂₁G(ξ_j, ξ_i)). `z` is the mean field minimizer when rho2 > 0.
    fn gradient_points_only(
        &self,
        green: &GreenEvaluator,
        points: &[Vec2],
        z: Option<(&DirichletOperator, &ScalarField)>,
    ) -> Result<Vec<Vec2>> {
        let mut out = Vec::with_capacity(points.len());
        for (j, &p) in points.iter().enumerate() {
            let mut g = green.grad1_regular(p, p)?;
            for (i, &q) in points.iter().enumerate() {
                if i != j {
                    g = g + green.grad1(p, q)?;
                }
            }
            let mut total = g * (-32.0 * PI * PI);
            if let Some((op, zf)) = z {
                total = total + op.gradient_at(zf, p)? * (2.0 * PI);
            }
            out.push(total);
        }
        Ok(out)
    }

    /// Exact gradient at `points` (fresh context).
    pub fn gradient(&self, points: &[Vec2]) -> Result<Vec<Vec2>> {
        let ctx = self.context(points)?;
        Ok(self.lambda_in(&ctx, points)?.gradient)
    }

    /// Central-difference gradient of Λ. The whole stencil is evaluated in
    /// one fixed context so mesh error cancels between the two sides.
    pub fn gradient_fd(&self, points: &[Vec2], step: f64) -> Result<Vec<Vec2>> {
        assert!((1e-4..=1e-2).contains(&step), "step {step} outside sane range");
        let ctx = self.context(points)?;
        let mut out = Vec::with_capacity(points.len());
        for j in 0..points.len() {
            let mut g = Vec2::ZERO;
            for (axis, unit) in [(0, Vec2::new(1.0, 0.0)), (1, Vec2::new(0.0, 1.0))] {
                let mut plus = points.to_vec();
                plus[j] = plus[j] + unit * step;
                let mut minus = points.to_vec();
                minus[j] = minus[j] - unit * step;
                let vp = self.lambda_in(&ctx, &plus)?.value;
                let vm = self.lambda_in(&ctx, &minus)?.value;
                let d = (vp - vm) / (2.0 * step);
                if axis == 0 {
                    g.x = d;
                } else {
                    g.y = d;
                }
            }
            out.push(g);
        }
        Ok(out)
    }

    fn search_tolerance(&self) -> f64 {
        if self.is_meshless() {
            1e-7
        } else {
            1e-3
        }
    }

    /// Random multistart search for a critical configuration of k points.
    /// Reports `SearchStalled` when every start gets pinned against the
    /// admissible-set boundary with a decisively nonzero gradient.
    pub fn find_critical(&self, k: usize, seed: u64) -> Result<CriticalPoint> {
        if k == 0 {
            return Err(CoreError::InvalidConfiguration("k must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last_err: Option<CoreError> = None;
        for start_idx in 0..MAX_STARTS {
            let points = self.sample_configuration(k, &mut rng)?;
            match self.find_critical_from(&points) {
                Ok(mut cp) => {
                    cp.starts_tried = start_idx + 1;
                    return Ok(cp);
                }
                // A stalled descent or a diverging mean-field solve both mean
                // "this start was bad"; structural errors still abort.
                Err(e @ (CoreError::SearchStalled(_) | CoreError::MeanFieldDiverged(_))) => {
                    last_err = Some(e)
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            CoreError::SearchStalled("no admissible start produced a critical point".into())
        }))
    }

    fn sample_configuration(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec2>> {
        let bounds = match &self.domain {
            Domain::UnitDisk => (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)),
            Domain::Rectangle { width, height } => (Vec2::ZERO, Vec2::new(*width, *height)),
            Domain::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        };
        let mut points: Vec<Vec2> = Vec::with_capacity(k);
        for _ in 0..10_000 {
            let p = Vec2::new(
                rng.gen_range(bounds.0.x..bounds.1.x),
                rng.gen_range(bounds.0.y..bounds.1.y),
            );
            if !self.domain.contains(p) || self.domain.boundary_distance(p) < 1.5 * self.margin {
                continue;
            }
            if points.iter().any(|q| q.dist(p) < 2.0 * self.separation) {
                continue;
            }
            points.push(p);
            if points.len() == k {
                return Ok(points);
            }
        }
        Err(CoreError::InvalidConfiguration(format!(
            "could not sample {k} admissible points (margin {})",
            self.margin
        )))
    }

    /// Descent with boundary/separation clipping, then a Newton polish on
    /// the finite-difference Hessian once the gradient is small.
    pub fn find_critical_from(&self, start: &[Vec2]) -> Result<CriticalPoint> {
        self.validate(start)?;
        let tol = self.search_tolerance();
        let mut points = start.to_vec();
        let mut ctx = self.context(&points)?;
        let mut eval = self.lambda_in(&ctx, &points)?;
        let mut pinned_streak = 0usize;
        let mut iterations = 0;
        for _ in 0..MAX_DESCENT_ITERS {
            iterations += 1;
            let gnorm = grad_norm(&eval.gradient);
            if gnorm <= tol {
                return self.finish(&ctx, points, eval, iterations);
            }
            let mut cand: Option<(Vec<Vec2>, LambdaBreakdown)> = None;
            // Newton on the FD Hessian once the gradient is already small.
            if gnorm < POLISH_THRESHOLD {
                if let Some(step) = self.newton_step(&ctx, &points, &eval.gradient)? {
                    let (trial, clipped) = self.clip(&points, &step);
                    if !clipped {
                        if !self.ctx_still_valid(&ctx, &trial) {
                            ctx = self.context(&trial)?;
                        }
                        let t_eval = self.lambda_in(&ctx, &trial)?;
                        if grad_norm(&t_eval.gradient) < gnorm {
                            cand = Some((trial, t_eval));
                        }
                    }
                }
            }
            if cand.is_none() {
                // Backtracking descent on the value.
                let mut t = (0.05 / gnorm).min(0.1);
                let mut accepted = false;
                for _ in 0..12 {
                    let step: Vec<Vec2> = eval.gradient.iter().map(|g| *g * (-t)).collect();
                    let (trial, clipped) = self.clip(&points, &step);
                    if !self.ctx_still_valid(&ctx, &trial) {
                        ctx = self.context(&trial)?;
                    }
                    let t_eval = self.lambda_in(&ctx, &trial)?;
                    if t_eval.value < eval.value - 1e-12 * (1.0 + eval.value.abs()) {
                        pinned_streak = if clipped { pinned_streak + 1 } else { 0 };
                        cand = Some((trial, t_eval));
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    pinned_streak += 1;
                }
            }
            if let Some((p, e)) = cand {
                points = p;
                eval = e;
            }
            if pinned_streak >= 6 {
                let gnorm = grad_norm(&eval.gradient);
                return Err(CoreError::SearchStalled(format!(
                    "descent pinned against the admissible-set boundary with |grad| = {gnorm:.3e} \
                     (tolerance {tol:.1e}); no interior critical configuration found from this start"
                )));
            }
        }
        let gnorm = grad_norm(&eval.gradient);
        if gnorm <= tol {
            return self.finish(&ctx, points, eval, iterations);
        }
        Err(CoreError::SearchStalled(format!(
            "no convergence in {MAX_DESCENT_ITERS} iterations; |grad| = {gnorm:.3e} vs tolerance {tol:.1e}"
        )))
    }

    /// Full Newton step -H⁻¹g from the FD Hessian, or None when H is not
    /// usable (singular or the step is wildly long).
    fn newton_step(
        &self,
        ctx: &EvalContext,
        points: &[Vec2],
        gradient: &[Vec2],
    ) -> Result<Option<Vec<Vec2>>> {
        let h = self.fd_hessian(ctx, points)?;
        let n = 2 * points.len();
        let mut rhs = vec![0.0; n];
        for (j, g) in gradient.iter().enumerate() {
            rhs[2 * j] = -g.x;
            rhs[2 * j + 1] = -g.y;
        }
        let Ok(step) = solve_small(&h, &rhs) else { return Ok(None) };
        let len: f64 = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !len.is_finite() || len > 0.3 {
            return Ok(None);
        }
        Ok(Some(
            (0..points.len()).map(|j| Vec2::new(step[2 * j], step[2 * j + 1])).collect(),
        ))
    }

    /// Symmetrized central-difference Hessian of Λ from the exact gradient.
    fn fd_hessian(&self, ctx: &EvalContext, points: &[Vec2]) -> Result<Vec<Vec<f64>>> {
        let n = 2 * points.len();
        let step = if self.is_meshless() { 1e-6 } else { 1e-3 };
        let mut cols = Vec::with_capacity(n);
        for col in 0..n {
            let mut plus = points.to_vec();
            let mut minus = points.to_vec();
            let (j, axis) = (col / 2, col % 2);
            if axis == 0 {
                plus[j].x += step;
                minus[j].x -= step;
            } else {
                plus[j].y += step;
                minus[j].y -= step;
            }
            let gp = self.lambda_in(ctx, &plus)?.gradient;
            let gm = self.lambda_in(ctx, &minus)?.gradient;
            let mut colv = vec![0.0; n];
            for i in 0..points.len() {
                colv[2 * i] = (gp[i].x - gm[i].x) / (2.0 * step);
                colv[2 * i + 1] = (gp[i].y - gm[i].y) / (2.0 * step);
            }
            cols.push(colv);
        }
        let mut h = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in 0..n {
                h[r][c] = 0.5 * (cols[c][r] + cols[r][c]);
            }
        }
        Ok(h)
    }

    /// Apply `step`, then push points back to honor the boundary margin and
    /// pairwise separation floor. Returns whether any clipping fired.
    fn clip(&self, points: &[Vec2], step: &[Vec2]) -> (Vec<Vec2>, bool) {
        let mut out: Vec<Vec2> = points.iter().zip(step).map(|(p, s)| *p + *s).collect();
        let mut clipped = false;
        for p in out.iter_mut() {
            let inside = self.domain.contains(*p);
            let d = self.domain.boundary_distance(*p);
            if !inside || d < self.margin {
                let b = self.domain.snap_to_boundary(*p);
                let dir = if inside && (*p - b).norm() > 1e-12 {
                    (*p - b).normalized()
                } else {
                    // Outside or on the rim: pull towards the domain interior.
                    (self.interior_anchor() - b).normalized()
                };
                *p = b + dir * self.margin;
                clipped = true;
            }
        }
        let k = out.len();
        for i in 0..k {
            for j in (i + 1)..k {
                let d = out[j] - out[i];
                let dist = d.norm();
                if dist < self.separation {
                    let axis = if dist > 1e-12 { d / dist } else { Vec2::new(1.0, 0.0) };
                    let push = axis * (0.5 * (self.separation - dist));
                    out[i] = out[i] - push;
                    out[j] = out[j] + push;
                    clipped = true;
                }
            }
        }
        (out, clipped)
    }

    fn interior_anchor(&self) -> Vec2 {
        match &self.domain {
            Domain::UnitDisk => Vec2::ZERO,
            Domain::Rectangle { width, height } => Vec2::new(width / 2.0, height / 2.0),
            Domain::Polygon { vertices } => {
                let mut c = Vec2::ZERO;
                for v in vertices {
                    c = c + *v;
                }
                c / vertices.len() as f64
            }
        }
    }

    fn finish(
        &self,
        ctx: &EvalContext,
        points: Vec<Vec2>,
        eval: LambdaBreakdown,
        iterations: usize,
    ) -> Result<CriticalPoint> {
        let h = self.fd_hessian(ctx, &points)?;
        let (eigs, _) = jacobi_eigen(&h);
        let scale = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1e-30);
        let fuzzy = 1e-6 * scale;
        let classification = if eigs.iter().any(|e| e.abs() <= fuzzy) {
            Classification::Unresolved
        } else if eigs.iter().all(|&e| e > 0.0) {
            Classification::Minimum
        } else if eigs.iter().all(|&e| e < 0.0) {
            Classification::Maximum
        } else {
            Classification::Saddle
        };
        Ok(CriticalPoint {
            grad_norm: grad_norm(&eval.gradient),
            value: eval.value,
            points,
            classification,
            hessian_eigenvalues: eigs,
            iterations,
            starts_tried: 1,
        })
    }
}

fn grad_norm(g: &[Vec2]) -> f64 {
    g.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL_CLOSED_FORM: f64 = 1e-12;

    #[test]
    fn disk_single_point_matches_closed_form() {
        // rho2 = 0: Λ(ξ) = -8π ln(1 - |ξ|²), so Λ(0) = 0 and the value climbs
        // monotonically towards the rim.
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        let at_origin = le.lambda(&[Vec2::ZERO]).unwrap();
        assert!(at_origin.value.abs() < TOL_CLOSED_FORM);
        let p = Vec2::new(0.3, 0.0);
        let eval = le.lambda(&[p]).unwrap();
        let want = -8.0 * PI * (1.0 - 0.09f64).ln();
        assert!((eval.value - want).abs() < TOL_CLOSED_FORM, "{} vs {want}", eval.value);
        // The breakdown must reassemble the value exactly.
        let sum = eval.half_mean_field + eval.robin_part + eval.interaction_part;
        assert_eq!(eval.value, sum);
        // Monotone ladder in |ξ|.
        let mut prev = at_origin.value;
        for r in [0.2, 0.4, 0.6, 0.8, 0.9] {
            let v = le.lambda(&[Vec2::new(r, 0.0)]).unwrap().value;
            assert!(v > prev, "Λ must increase with |ξ|: {v} after {prev}");
            prev = v;
        }
    }

    #[test]
    fn disk_gradient_matches_robin_derivative() {
        // dΛ/dξ₁ at (0.3, 0) is 16π·0.3/0.91 = 480π/91.
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        let g = le.gradient(&[Vec2::new(0.3, 0.0)]).unwrap();
        let want = 480.0 * PI / 91.0;
        assert!((g[0].x - want).abs() < 1e-12, "{} vs {want}", g[0].x);
        assert!(g[0].y.abs() < 1e-12);
        // Central differences of the closed form agree.
        let fd = le.gradient_fd(&[Vec2::new(0.3, 0.0)], 1e-4).unwrap();
        assert!((fd[0].x - want).abs() < 1e-5, "{} vs {want}", fd[0].x);
    }

    #[test]
    fn mirrored_pair_has_mirrored_gradients() {
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        let p = Vec2::new(0.4, 0.1);
        let g = le.gradient(&[p, -p]).unwrap();
        // Under x ↦ -x the configuration maps to itself with the labels
        // swapped, so g₂ = -g₁ exactly.
        assert!((g[0] + g[1]).norm() < 1e-12, "{:?} vs {:?}", g[0], g[1]);
    }

    #[test]
    fn meanfield_term_gradient_agrees_with_differences() {
        // rho2 > 0 engages the mean field envelope term; the exact formula
        // must track the finite-difference oracle on the same mesh.
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.5).unwrap().with_mesh_size(0.1);
        let pts = [Vec2::new(0.3, 0.0)];
        let exact = le.gradient(&pts).unwrap();
        let fd = le.gradient_fd(&pts, 1e-3).unwrap();
        let rel = (exact[0] - fd[0]).norm() / fd[0].norm();
        assert!(rel < 0.02, "exact {:?} vs fd {:?} (rel {rel})", exact[0], fd[0]);
    }

    #[test]
    fn critical_search_lands_on_disk_center() {
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        let cp = le.find_critical(1, 7).unwrap();
        assert!(cp.points[0].norm() < 1e-6, "found {:?}", cp.points[0]);
        assert!(cp.grad_norm < 1e-7);
        assert_eq!(cp.classification, Classification::Minimum);
        assert!(cp.value.abs() < 1e-10);
    }

    #[test]
    fn critical_search_with_meanfield_stays_near_center() {
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.5).unwrap().with_mesh_size(0.12);
        let cp = le.find_critical_from(&[Vec2::new(0.25, 0.1)]).unwrap();
        assert!(
            cp.points[0].norm() < 0.12,
            "expected the symmetric point near 0, got {:?}",
            cp.points[0]
        );
        assert_eq!(cp.classification, Classification::Minimum);
    }

    #[test]
    fn two_point_search_reports_the_collapse_honestly() {
        // On the disk the pair energy decreases without bound as the points
        // merge, so the search must stall on the separation floor instead of
        // fabricating a critical point.
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        let got = le.find_critical_from(&[Vec2::new(0.35, 0.0), Vec2::new(-0.35, 0.0)]);
        assert!(
            matches!(got, Err(CoreError::SearchStalled(_))),
            "expected SearchStalled, got {got:?}"
        );
    }

    #[test]
    fn inadmissible_configurations_are_rejected() {
        let le = ReducedEnergy::new(Domain::UnitDisk, 0.0).unwrap();
        assert!(matches!(
            le.lambda(&[Vec2::new(0.999, 0.0)]),
            Err(CoreError::TooNearBoundary { .. })
        ));
        let p = Vec2::new(0.2, 0.2);
        assert!(matches!(le.lambda(&[p, p]), Err(CoreError::CoincidentPoints)));
    }
}
