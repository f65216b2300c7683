//! Coupled two-component Newton solver and continuation down a ladder of
//! coupling strengths, built on the sharp/smooth split of the ansatz.

use crate::ansatz::Ansatz;
use crate::elliptic::DirichletOperator;
use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::geometry::{Domain, Vec2};
use crate::green::GreenEvaluator;
use crate::meanfield::{MeanFieldProblem, RHO2_COERCIVE_LIMIT};
use crate::mesh::{Mesh, SizeField};
use crate::reduced::ReducedEnergy;
use crate::sparse::{dot, LuFactor, TripletList};
use std::f64::consts::PI;
use std::rc::Rc;

const MAX_HALVINGS: usize = 40;
const SIGMA_POWER_ITERS: usize = 30;
/// Corrections to a well-prepared ansatz measure well below one in H¹; a
/// correction this large means the iteration left the intended solution
/// family (typically collapsing toward the vacuum state, where the densities
/// underflow and the system turns spuriously linear).
const MAX_DEVIATION: f64 = 100.0;

/// Parameters of a continuation run.
#[derive(Debug, Clone)]
pub struct TodaParams {
    pub rho2: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    /// Multiplicative rung factor in (0, 1).
    pub ladder_shrink: f64,
    pub h_background: f64,
    /// Dual-norm residual tolerance of the inner Newton solve.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for TodaParams {
    fn default() -> Self {
        TodaParams {
            rho2: 0.5,
            lambda_start: 0.1,
            lambda_end: 1e-5,
            ladder_shrink: 0.5,
            h_background: 0.15,
            newton_tol: 1e-9,
            max_newton: 30,
        }
    }
}

/// Solver state: the approximation skeleton plus the two nodal updates.
/// u₁ = Σ_i Pw_i - z/2 + v₁ and u₂ = -Σ_i Pw_i/2 + z + v₂, where the sharp
/// parts of Pw are kept in closed form. With rho2 = 0 the second component
/// is pinned to zero and the first equation is solved on its own.
pub struct TodaState {
    pub ansatz: Rc<Ansatz>,
    pub v1: ScalarField,
    pub v2: ScalarField,
}

impl TodaState {
    pub fn new(ansatz: Rc<Ansatz>) -> TodaState {
        let n = ansatz.operator().num_nodes();
        TodaState { ansatz, v1: ScalarField::zeros(n), v2: ScalarField::zeros(n) }
    }

    pub fn scalar(&self) -> bool {
        self.ansatz.rho2 == 0.0
    }

    pub fn u1_nodal(&self) -> ScalarField {
        let mut f = self.ansatz.w1_nodal();
        f.axpy(1.0, &self.v1);
        f
    }

    /// Second component; identically zero in the decoupled rho2 = 0 limit.
    pub fn u2_nodal(&self) -> ScalarField {
        if self.scalar() {
            return ScalarField::zeros(self.v2.len());
        }
        let mut f = self.ansatz.w2_nodal();
        f.axpy(1.0, &self.v2);
        f
    }

    /// Energy-norm distance from the bare ansatz, (|v₁|²_A + |v₂|²_A)^{1/2}.
    pub fn deviation(&self) -> f64 {
        let op = self.ansatz.operator();
        let a1 = op.energy_product(&self.v1.values, &self.v1.values);
        let a2 = op.energy_product(&self.v2.values, &self.v2.values);
        (a1 + a2).max(0.0).sqrt()
    }
}

pub struct TodaSolve {
    pub state: TodaState,
    pub iterations: usize,
    pub residual_dual: f64,
    /// Smallest singular value of the final Jacobian (Euclidean scale).
    pub sigma_min: f64,
}

/// Fixed per-solve data: quadrature positions, sharp sums, bubble loads.
struct QuadCache {
    /// Physical position of each quadrature point.
    pos: Vec<Vec2>,
    /// Σ_i w_i at each quadrature point (exact).
    sharp: Vec<f64>,
    /// (triangle, barycentric, weight) mirror of the problem quadrature.
    quad: Vec<(usize, [f64; 3], f64)>,
    /// Σ_i b_i: combined load of Σ e^{w_i}.
    b_sum: Vec<f64>,
    /// Base smooth parts of the two components (without v).
    s1_base: Vec<f64>,
    s2_base: Vec<f64>,
}

impl QuadCache {
    fn new(ansatz: &Ansatz) -> QuadCache {
        let op = ansatz.operator();
        let mesh = op.mesh();
        let quad = ansatz.quad_records().to_vec();
        let mut pos = Vec::with_capacity(quad.len());
        let mut sharp = Vec::with_capacity(quad.len());
        for &(t, bary, _) in &quad {
            let tri = mesh.tris[t];
            let p = mesh.nodes[tri[0]] * bary[0]
                + mesh.nodes[tri[1]] * bary[1]
                + mesh.nodes[tri[2]] * bary[2];
            pos.push(p);
            sharp.push(ansatz.sharp_sum(p));
        }
        let mut b_sum = vec![0.0; op.num_nodes()];
        for b in &ansatz.bubbles {
            for (acc, v) in b_sum.iter_mut().zip(&b.load) {
                *acc += v;
            }
        }
        QuadCache {
            pos,
            sharp,
            quad,
            b_sum,
            s1_base: ansatz.smooth_one().values,
            s2_base: ansatz.smooth_two().values,
        }
    }
}

/// Densities and loads of one Newton iterate.
struct Iterate {
    /// e^{u₁} and e^{u₂} at quadrature points.
    e1: Vec<f64>,
    e2: Vec<f64>,
    /// Load m₂ = ∫ e^{u₂} φ (full length), kept for the rank-one tail.
    m2: Vec<f64>,
    int_e1: f64,
    s2_total: f64,
    /// Residual loads of the two equations (full length).
    res1: Vec<f64>,
    res2: Vec<f64>,
}

fn assemble_iterate(
    op: &DirichletOperator,
    cache: &QuadCache,
    lambda: f64,
    rho2: f64,
    v1: &[f64],
    v2: &[f64],
) -> Iterate {
    let mesh = op.mesh();
    let n = op.num_nodes();
    let nq = cache.quad.len();
    let mut e1 = Vec::with_capacity(nq);
    let mut e2 = Vec::with_capacity(nq);
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut int_e1 = 0.0;
    let mut s2_total = 0.0;
    let scalar = rho2 == 0.0;
    for (q, &(t, bary, w)) in cache.quad.iter().enumerate() {
        let tri = mesh.tris[t];
        let mut s1q = 0.0;
        let mut s2q = 0.0;
        for k in 0..3 {
            let i = tri[k];
            s1q += bary[k] * (cache.s1_base[i] + v1[i]);
            if !scalar {
                s2q += bary[k] * (cache.s2_base[i] + v2[i]);
            }
        }
        let d1 = (cache.sharp[q] + s1q).exp();
        e1.push(d1);
        int_e1 += w * d1;
        let wd1 = w * d1;
        for k in 0..3 {
            m1[tri[k]] += wd1 * bary[k];
        }
        if scalar {
            e2.push(0.0);
        } else {
            let d2 = (-0.5 * cache.sharp[q] + s2q).exp();
            e2.push(d2);
            s2_total += w * d2;
            let wd2 = w * d2;
            for k in 0..3 {
                m2[tri[k]] += wd2 * bary[k];
            }
        }
    }
    // res₁ = Σb + A s₁ - 2λ m₁ + (rho2/S₂) m₂
    // res₂ = -Σb/2 + A s₂ - 2(rho2/S₂) m₂ + λ m₁
    let s1_full: Vec<f64> = (0..n).map(|i| cache.s1_base[i] + v1[i]).collect();
    let a_s1 = op.apply_stiffness(&s1_full);
    let mut res1 = vec![0.0; n];
    let c2 = if scalar { 0.0 } else { rho2 / s2_total };
    for i in 0..n {
        res1[i] = cache.b_sum[i] + a_s1[i] - 2.0 * lambda * m1[i] + c2 * m2[i];
    }
    let res2 = if scalar {
        vec![0.0; n]
    } else {
        let s2_full: Vec<f64> = (0..n).map(|i| cache.s2_base[i] + v2[i]).collect();
        let a_s2 = op.apply_stiffness(&s2_full);
        (0..n)
            .map(|i| -0.5 * cache.b_sum[i] + a_s2[i] - 2.0 * c2 * m2[i] + lambda * m1[i])
            .collect()
    };
    Iterate { e1, e2, m2, int_e1, s2_total, res1, res2 }
}

fn merit(op: &DirichletOperator, it: &Iterate, scalar: bool) -> f64 {
    let r1 = op.dual_norm(&it.res1);
    if scalar {
        r1 * r1
    } else {
        let r2 = op.dual_norm(&it.res2);
        r1 * r1 + r2 * r2
    }
}

/// Accumulate per-triangle weighted mass blocks Σ_q w e[q] φ_a φ_b into
/// `push(row_node, col_node, value)`.
fn weighted_mass_blocks(
    mesh: &Mesh,
    quad: &[(usize, [f64; 3], f64)],
    density: &[f64],
    mut push: impl FnMut(usize, usize, f64),
) {
    let mut t_cur = usize::MAX;
    let mut local = [[0.0f64; 3]; 3];
    let flush = |t: usize, local: &mut [[f64; 3]; 3], push: &mut dyn FnMut(usize, usize, f64)| {
        if t == usize::MAX {
            return;
        }
        let tri = mesh.tris[t];
        for a in 0..3 {
            for b in 0..3 {
                if local[a][b] != 0.0 {
                    push(tri[a], tri[b], local[a][b]);
                    local[a][b] = 0.0;
                }
            }
        }
    };
    for (q, &(t, bary, w)) in quad.iter().enumerate() {
        if t != t_cur {
            flush(t_cur, &mut local, &mut push);
            t_cur = t;
        }
        let wd = w * density[q];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] += wd * bary[a] * bary[b];
            }
        }
    }
    flush(t_cur, &mut local, &mut push);
}

/// The sparse part S of the Jacobian plus the rank-one tail u vᵀ coming
/// from the normalization ∂(1/S₂). Solves use LU of S and the
/// Sherman-Morrison update.
struct JacobianLu {
    lu: LuFactor,
    /// Rank-one factors (empty in the scalar path).
    u: Vec<f64>,
    v: Vec<f64>,
    dim: usize,
}

impl JacobianLu {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.lu.solve(b);
        if self.u.is_empty() {
            return x;
        }
        let su = self.lu.solve(&self.u);
        let denom = 1.0 + dot(&self.v, &su);
        let coef = dot(&self.v, &x) / denom;
        x.iter().zip(&su).map(|(xi, si)| xi - coef * si).collect()
    }

    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let x = self.lu.solve_transpose(b);
        if self.u.is_empty() {
            return x;
        }
        let sv = self.lu.solve_transpose(&self.v);
        let denom = 1.0 + dot(&self.u, &sv);
        let coef = dot(&self.u, &x) / denom;
        x.iter().zip(&sv).map(|(xi, si)| xi - coef * si).collect()
    }

    /// Smallest singular value by inverse power iteration on JᵀJ.
    fn sigma_min(&self) -> f64 {
        let n = self.dim;
        // Deterministic start vector with no special structure.
        let mut x: Vec<f64> = (0..n)
            .map(|i| ((i.wrapping_mul(2654435761) % 10007) as f64) / 10007.0 - 0.5)
            .collect();
        let nrm = dot(&x, &x).sqrt();
        for xi in x.iter_mut() {
            *xi /= nrm;
        }
        let mut lam_prev = 0.0;
        for _ in 0..SIGMA_POWER_ITERS {
            let jt = self.solve_transpose(&x);
            let y = self.solve(&jt);
            let lam = dot(&x, &y);
            let ynorm = dot(&y, &y).sqrt();
            if !(ynorm > 0.0) || !lam.is_finite() {
                return f64::NAN;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / ynorm;
            }
            if (lam - lam_prev).abs() <= 1e-6 * lam.abs() {
                lam_prev = lam;
                break;
            }
            lam_prev = lam;
        }
        if lam_prev > 0.0 {
            1.0 / lam_prev.sqrt()
        } else {
            f64::NAN
        }
    }
}

fn build_jacobian(
    op: &DirichletOperator,
    cache: &QuadCache,
    it: &Iterate,
    lambda: f64,
    rho2: f64,
) -> Result<JacobianLu> {
    let ni = op.num_interior();
    let scalar = rho2 == 0.0;
    let dim = if scalar { ni } else { 2 * ni };
    let mut trips = TripletList::with_capacity(dim, dim, 8 * dim);
    // Stiffness on both diagonal blocks.
    for (r, c, v) in op.interior_stiffness_entries() {
        trips.push(r, c, v);
        if !scalar {
            trips.push(ni + r, ni + c, v);
        }
    }
    let slot = |node: usize| op.interior_slot(node);
    // M₁ feeds (0,0) with -2λ and (1,0) with +λ.
    weighted_mass_blocks(op.mesh(), &cache.quad, &it.e1, |rn, cn, v| {
        if let (Some(r), Some(c)) = (slot(rn), slot(cn)) {
            trips.push(r, c, -2.0 * lambda * v);
            if !scalar {
                trips.push(ni + r, c, lambda * v);
            }
        }
    });
    let mut u = Vec::new();
    let mut vv = Vec::new();
    if !scalar {
        let c2 = rho2 / it.s2_total;
        // M₂ feeds (0,1) with +c2 and (1,1) with -2 c2.
        weighted_mass_blocks(op.mesh(), &cache.quad, &it.e2, |rn, cn, v| {
            if let (Some(r), Some(c)) = (slot(rn), slot(cn)) {
                trips.push(r, ni + c, c2 * v);
                trips.push(ni + r, ni + c, -2.0 * c2 * v);
            }
        });
        // Rank-one tail from ∂(1/S₂): u vᵀ with
        // u = [-(rho2/S₂²) m₂ ; 2(rho2/S₂²) m₂], v = [0 ; m₂].
        let m2_int = op.restrict(&it.m2);
        let c2s = rho2 / (it.s2_total * it.s2_total);
        u = vec![0.0; dim];
        vv = vec![0.0; dim];
        for (s, &m) in m2_int.iter().enumerate() {
            u[s] = -c2s * m;
            u[ni + s] = 2.0 * c2s * m;
            vv[ni + s] = m;
        }
    }
    let lu = LuFactor::new(&trips.to_mat()?)?;
    Ok(JacobianLu { lu, u, v: vv, dim })
}

/// Damped Newton iteration on the coupled system from the given state.
pub fn toda_newton(mut state: TodaState, tol: f64, max_iter: usize) -> Result<TodaSolve> {
    let ansatz = Rc::clone(&state.ansatz);
    let op = ansatz.operator();
    let cache = QuadCache::new(&ansatz);
    let lambda = ansatz.lambda;
    let rho2 = ansatz.rho2;
    let scalar = rho2 == 0.0;
    // Residual scale: the sharp loads set the natural size of the system.
    let scale = 1.0 + op.dual_norm(&cache.b_sum);
    let mut it = assemble_iterate(op, &cache, lambda, rho2, &state.v1.values, &state.v2.values);
    let mut m = merit(op, &it, scalar);
    let mut jac: Option<JacobianLu> = None;
    for iter in 0..max_iter {
        let residual_dual = m.sqrt();
        if residual_dual <= tol * scale {
            let j = match jac {
                Some(j) => j,
                None => build_jacobian(op, &cache, &it, lambda, rho2)?,
            };
            return Ok(TodaSolve {
                state,
                iterations: iter,
                residual_dual,
                sigma_min: j.sigma_min(),
            });
        }
        let j = build_jacobian(op, &cache, &it, lambda, rho2)?;
        // rhs = -[res₁; res₂] on interior slots.
        let r1 = op.restrict(&it.res1);
        let ni = r1.len();
        let mut rhs: Vec<f64> = r1.iter().map(|v| -v).collect();
        if !scalar {
            rhs.extend(op.restrict(&it.res2).iter().map(|v| -v));
        }
        let step = j.solve(&rhs);
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let mut v1 = state.v1.values.clone();
            for (s, &i) in op.interior().iter().enumerate() {
                v1[i] += t * step[s];
            }
            let mut v2 = state.v2.values.clone();
            if !scalar {
                for (s, &i) in op.interior().iter().enumerate() {
                    v2[i] += t * step[ni + s];
                }
            }
            let it_new = assemble_iterate(op, &cache, lambda, rho2, &v1, &v2);
            let m_new = merit(op, &it_new, scalar);
            if m_new < m * (1.0 - 1e-4 * t) {
                state.v1.values = v1;
                state.v2.values = v2;
                it = it_new;
                m = m_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(CoreError::NewtonStalled(format!(
                "line search exhausted at iteration {iter}; residual {:.3e} (tolerance {:.3e})",
                m.sqrt(),
                tol * scale
            )));
        }
        let deviation = state.deviation();
        if !(it.int_e1 > 0.0) || (!scalar && !(it.s2_total > 0.0)) || deviation > MAX_DEVIATION {
            return Err(CoreError::BasinEscape(format!(
                "iterate degenerated at iteration {iter}: correction norm {deviation:.3e}, \
                 first density mass {:.3e}",
                it.int_e1
            )));
        }
        jac = Some(j);
    }
    let residual_dual = m.sqrt();
    Err(CoreError::NewtonStalled(format!(
        "no convergence in {max_iter} iterations; residual {residual_dual:.3e} vs {:.3e}",
        tol * scale
    )))
}

/// Total energy of a state: J = Q/3 - λ ∫e^{u₁} - rho2 ln ∫e^{u₂}, with
/// Q = |∇u₁|² + |∇u₂|² + ∇u₁·∇u₂ assembled so the sharp bubble parts never
/// meet the stiffness matrix (their pairings go through the load identity).
pub fn energy(state: &TodaState) -> f64 {
    let ansatz = &state.ansatz;
    let op = ansatz.operator();
    let mesh = op.mesh();
    let cache = QuadCache::new(ansatz);
    let lambda = ansatz.lambda;
    let rho2 = ansatz.rho2;
    let scalar = state.scalar();
    // a(Pw_i, Pw_j) ≈ ∫ e^{w_i} (w_j + c_j), symmetrized.
    let nb = ansatz.bubbles.len();
    let mut cross = vec![vec![0.0; nb]; nb];
    for (q, &(t, bary, w)) in cache.quad.iter().enumerate() {
        let tri = mesh.tris[t];
        let p = cache.pos[q];
        for (j, bj) in ansatz.bubbles.iter().enumerate() {
            let cj = bary[0] * bj.correction.values[tri[0]]
                + bary[1] * bj.correction.values[tri[1]]
                + bary[2] * bj.correction.values[tri[2]];
            let pw_j = crate::ansatz::bubble(bj.center, bj.delta, p) + cj;
            for (i, bi) in ansatz.bubbles.iter().enumerate() {
                cross[i][j] += w * crate::ansatz::bubble_exp(bi.center, bi.delta, p) * pw_j;
            }
        }
    }
    let mut app = 0.0;
    for i in 0..nb {
        for j in 0..nb {
            app += 0.5 * (cross[i][j] + cross[j][i]);
        }
    }
    // Companion decomposition u₁ = ΣPw_i + σ₁, u₂ = -ΣPw_i/2 + σ₂ with the
    // zero-trace remainders σ₁ = -z/2 + v₁ and σ₂ = z + v₂, so every
    // sharp pairing goes through the load identity a(Pw_i, φ) = ∫e^{w_i}φ.
    let n = op.num_nodes();
    let z = &ansatz.z.values;
    let sig1: Vec<f64> = (0..n).map(|i| -0.5 * z[i] + state.v1.values[i]).collect();
    let it = assemble_iterate(op, &cache, lambda, rho2, &state.v1.values, &state.v2.values);
    if scalar {
        // u₂ ≡ 0: Q = |∇u₁|² = app + 2 Σbᵀσ₁ + σ₁ᵀAσ₁.
        let q = app + 2.0 * dot(&cache.b_sum, &sig1) + op.energy_product(&sig1, &sig1);
        return q / 3.0 - lambda * it.int_e1;
    }
    let sig2: Vec<f64> = (0..n).map(|i| z[i] + state.v2.values[i]).collect();
    // Q = 3/4 app + 3/2 Σbᵀσ₁ + σ₁ᵀAσ₁ + σ₂ᵀAσ₂ + σ₁ᵀAσ₂ (the Σbᵀσ₂
    // pairings cancel between |∇u₂|² and ∇u₁·∇u₂).
    let q = 0.75 * app
        + 1.5 * dot(&cache.b_sum, &sig1)
        + op.energy_product(&sig1, &sig1)
        + op.energy_product(&sig2, &sig2)
        + op.energy_product(&sig1, &sig2);
    q / 3.0 - lambda * it.int_e1 - rho2 * it.s2_total.ln()
}

/// λ ∫ e^{u₁} of a state.
pub fn concentrating_mass(state: &TodaState) -> f64 {
    let ansatz = &state.ansatz;
    let op = ansatz.operator();
    let cache = QuadCache::new(ansatz);
    let it = assemble_iterate(
        op,
        &cache,
        ansatz.lambda,
        ansatz.rho2,
        &state.v1.values,
        &state.v2.values,
    );
    ansatz.lambda * it.int_e1
}

/// Independent single-equation Newton loop for the rho2 = 0 limit:
/// a(u, φ) = 2λ ∫ e^u φ with the same sharp/smooth representation. Used as
/// an oracle against the coupled solver's scalar path.
pub fn scalar_liouville_newton(
    ansatz: &Ansatz,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, usize)> {
    assert_eq!(ansatz.rho2, 0.0, "the scalar oracle only covers rho2 = 0");
    let op = ansatz.operator();
    let mesh = op.mesh();
    let cache = QuadCache::new(ansatz);
    let lambda = ansatz.lambda;
    let n = op.num_nodes();
    let ni = op.num_interior();
    let mut v = vec![0.0; n];
    let scale = 1.0 + op.dual_norm(&cache.b_sum);
    for iter in 0..max_iter {
        let mut e1 = Vec::with_capacity(cache.quad.len());
        let mut m1 = vec![0.0; n];
        for (q, &(t, bary, w)) in cache.quad.iter().enumerate() {
            let tri = mesh.tris[t];
            let mut sq = 0.0;
            for k in 0..3 {
                sq += bary[k] * (cache.s1_base[tri[k]] + v[tri[k]]);
            }
            let d = (cache.sharp[q] + sq).exp();
            e1.push(d);
            let wd = w * d;
            for k in 0..3 {
                m1[tri[k]] += wd * bary[k];
            }
        }
        let s_full: Vec<f64> = (0..n).map(|i| cache.s1_base[i] + v[i]).collect();
        let a_s = op.apply_stiffness(&s_full);
        let res: Vec<f64> =
            (0..n).map(|i| cache.b_sum[i] + a_s[i] - 2.0 * lambda * m1[i]).collect();
        let rd = op.dual_norm(&res);
        if rd <= tol * scale {
            return Ok((ScalarField { values: v }, iter));
        }
        let mut trips = TripletList::with_capacity(ni, ni, 8 * ni);
        for (r, c, val) in op.interior_stiffness_entries() {
            trips.push(r, c, val);
        }
        weighted_mass_blocks(mesh, &cache.quad, &e1, |rn, cn, val| {
            if let (Some(r), Some(c)) = (op.interior_slot(rn), op.interior_slot(cn)) {
                trips.push(r, c, -2.0 * lambda * val);
            }
        });
        let lu = LuFactor::new(&trips.to_mat()?)?;
        let rhs: Vec<f64> = op.restrict(&res).iter().map(|x| -x).collect();
        let step = lu.solve(&rhs);
        for (s, &i) in op.interior().iter().enumerate() {
            v[i] += step[s];
        }
    }
    Err(CoreError::NewtonStalled(format!(
        "scalar oracle did not converge in {max_iter} iterations"
    )))
}

/// One row of a continuation branch.
#[derive(Debug, Clone)]
pub struct BranchRow {
    pub lambda: f64,
    /// λ ∫ e^{u₁}.
    pub rho1: f64,
    pub energy: f64,
    /// J + 4πk ln λ - Λ(ξ*) + 8π(1 - ln 2); meaningful on rho2 > 0 branches.
    pub defect: f64,
    pub newton_iters: usize,
    /// Energy-norm distance from the ansatz.
    pub deviation: f64,
    pub sigma_min: f64,
    pub residual_dual: f64,
    /// H¹ seminorm of the second component (zero in the scalar limit).
    pub u2_norm: f64,
    pub nodes: usize,
}

pub struct BranchResult {
    pub rows: Vec<BranchRow>,
    pub completed: bool,
    pub stop_reason: String,
    /// Reduced energy Λ(ξ*) used by the defect column.
    pub lambda_star: f64,
    /// Solver state at the last completed rung.
    pub final_state: Option<TodaState>,
}

/// Continuation down the λ ladder at fixed concentration points: each rung
/// re-meshes to the shrinking bubble widths, rebuilds the ansatz, transfers
/// the previous correction as a warm start, and Newton-solves.
pub fn continuation_branch(
    domain: &Domain,
    points: &[Vec2],
    params: &TodaParams,
) -> Result<BranchResult> {
    domain.validate()?;
    if points.is_empty() {
        return Err(CoreError::InvalidConfiguration("no concentration points".into()));
    }
    if !(params.ladder_shrink > 0.0 && params.ladder_shrink < 1.0) {
        return Err(CoreError::InvalidConfiguration(format!(
            "ladder shrink factor must lie in (0, 1), got {}",
            params.ladder_shrink
        )));
    }
    if !(params.lambda_end > 0.0 && params.lambda_start >= params.lambda_end) {
        return Err(CoreError::InvalidConfiguration(format!(
            "need lambda_start >= lambda_end > 0, got {} and {}",
            params.lambda_start, params.lambda_end
        )));
    }
    if params.rho2 < 0.0 || params.rho2 >= RHO2_COERCIVE_LIMIT {
        return Err(CoreError::SupercriticalRho {
            rho2: params.rho2,
            limit: RHO2_COERCIVE_LIMIT,
        });
    }
    let k = points.len() as f64;
    // Λ(ξ*) for the defect column, computed once on its own mesh.
    let lambda_star = ReducedEnergy::new(domain.clone(), params.rho2)?
        .with_mesh_size(params.h_background.min(0.1))
        .lambda(points)?
        .value;
    let green_for = |op: &Rc<DirichletOperator>| match domain {
        Domain::UnitDisk => GreenEvaluator::analytic_disk(),
        _ => GreenEvaluator::numeric(Rc::clone(op)),
    };
    // Pilot: d factors at the first rung from a moderately graded mesh.
    let mut d_factors = {
        let mut size = SizeField::uniform(params.h_background);
        for &p in points {
            size.add_well(p, params.h_background / 3.0, 0.1);
        }
        let mesh = Rc::new(Mesh::build(domain, &size)?);
        let op = Rc::new(DirichletOperator::new(mesh)?);
        let green = green_for(&op);
        let problem = MeanFieldProblem::new(Rc::clone(&op), &green, points, params.rho2)?;
        Ansatz::build(&problem, &green, params.lambda_start)?.d_factors
    };

    let mut rows: Vec<BranchRow> = Vec::new();
    let mut warm: Option<(Rc<Mesh>, ScalarField, ScalarField)> = None;
    let mut result = BranchResult {
        rows: Vec::new(),
        completed: true,
        stop_reason: "reached the end of the ladder".into(),
        lambda_star,
        final_state: None,
    };
    let mut lambda = params.lambda_start;
    loop {
        let rung = (|| -> Result<(TodaSolve, Rc<Mesh>)> {
            let mut size = SizeField::uniform(params.h_background);
            for (&p, &d) in points.iter().zip(&d_factors) {
                let delta = 0.5 * (lambda * d).sqrt();
                size.add_well(p, delta / 4.0, 10.0 * delta);
            }
            let mesh = Rc::new(Mesh::build(domain, &size)?);
            let op = Rc::new(DirichletOperator::new(Rc::clone(&mesh))?);
            let green = green_for(&op);
            let problem = MeanFieldProblem::new(Rc::clone(&op), &green, points, params.rho2)?;
            let ansatz = Rc::new(Ansatz::build(&problem, &green, lambda)?);
            let mut state = TodaState::new(Rc::clone(&ansatz));
            if let Some((old_mesh, v1, v2)) = &warm {
                state.v1 = v1.transfer(old_mesh, &mesh, true);
                state.v2 = v2.transfer(old_mesh, &mesh, true);
            }
            let solve = toda_newton(state, params.newton_tol, params.max_newton)?;
            Ok((solve, mesh))
        })();
        match rung {
            Ok((solve, mesh)) => {
                let TodaSolve { state, iterations, residual_dual, sigma_min } = solve;
                let j = energy(&state);
                let rho1 = concentrating_mass(&state);
                let defect =
                    j + 4.0 * PI * k * lambda.ln() - lambda_star + 8.0 * PI * (1.0 - 2.0f64.ln());
                let u2 = state.u2_nodal();
                rows.push(BranchRow {
                    lambda,
                    rho1,
                    energy: j,
                    defect,
                    newton_iters: iterations,
                    deviation: state.deviation(),
                    sigma_min,
                    residual_dual,
                    u2_norm: state.ansatz.operator().h1_seminorm(&u2.values),
                    nodes: mesh.num_nodes(),
                });
                d_factors = state.ansatz.d_factors.clone();
                warm = Some((mesh, state.v1.clone(), state.v2.clone()));
                result.final_state = Some(state);
            }
            Err(e) => {
                if rows.is_empty() {
                    return Err(CoreError::FirstRungDiverged(format!(
                        "lambda = {lambda}: {e}"
                    )));
                }
                result.completed = false;
                result.stop_reason = format!("newton stalled at lambda = {lambda:.6e}: {e}");
                break;
            }
        }
        if lambda <= params.lambda_end * (1.0 + 1e-12) {
            break;
        }
        lambda = (lambda * params.ladder_shrink).max(params.lambda_end);
    }
    result.rows = rows;
    Ok(result)
}
