//! Projected concentration profiles and their residuals: how well the
//! bubble-plus-background approximation satisfies the coupled system.

use crate::elliptic::DirichletOperator;
use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::fitting::fit_loglog;
use crate::geometry::{Domain, Vec2};
use crate::green::GreenEvaluator;
use crate::meanfield::MeanFieldProblem;
use crate::mesh::{Mesh, SizeField};
use std::f64::consts::PI;
use std::rc::Rc;

/// The radial profile w(x) = ln(8δ² / (δ² + |x-ξ|²)²) solving -Δw = e^w
/// with total plane mass 8π.
pub fn bubble(center: Vec2, delta: f64, x: Vec2) -> f64 {
    let r2 = (x - center).norm_sq();
    (8.0 * delta * delta).ln() - 2.0 * (delta * delta + r2).ln()
}

/// e^w without the cancellation of logs: 8δ²/(δ² + |x-ξ|²)².
pub fn bubble_exp(center: Vec2, delta: f64, x: Vec2) -> f64 {
    let r2 = (x - center).norm_sq();
    let s = delta * delta + r2;
    8.0 * delta * delta / (s * s)
}

/// Zero-mode profiles of the linearized bubble: index 0 is the dilation
/// mode (δ²-r²)/(δ²+r²), 1 and 2 the translations (x_j-ξ_j)/(δ²+r²).
pub fn bubble_mode(center: Vec2, delta: f64, index: usize, x: Vec2) -> f64 {
    let d = x - center;
    let s = delta * delta + d.norm_sq();
    match index {
        0 => (2.0 * delta * delta - s) / s,
        1 => d.x / s,
        2 => d.y / s,
        _ => panic!("bubble mode index must be 0, 1 or 2"),
    }
}

/// A bubble adapted to the domain: the sharp profile stays closed-form,
/// while the boundary mismatch is absorbed by a discrete harmonic
/// correction c (so w + c vanishes on the boundary exactly).
pub struct ProjectedBubble {
    pub center: Vec2,
    pub delta: f64,
    /// Harmonic extension of -w restricted to the boundary.
    pub correction: ScalarField,
    /// Load vector ∫ e^w φ_g with the integrand evaluated in closed form.
    pub load: Vec<f64>,
    /// ∫_Ω e^w under the same quadrature.
    pub mass: f64,
}

impl ProjectedBubble {
    pub fn new(op: &DirichletOperator, center: Vec2, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(CoreError::InvalidConfiguration(format!(
                "bubble width must be positive, got {delta}"
            )));
        }
        if !op.mesh().domain.contains(center) {
            return Err(CoreError::OutsideDomain { x: center.x, y: center.y });
        }
        let correction = op.harmonic_extension(|p| -bubble(center, delta, p));
        let load = op.assemble_load(&|p| bubble_exp(center, delta, p));
        let mass = load.iter().sum();
        Ok(ProjectedBubble { center, delta, correction, load, mass })
    }

    /// Nodal values of the projected profile w + c (zero on the boundary).
    pub fn nodal(&self, mesh: &Mesh) -> ScalarField {
        let mut values = Vec::with_capacity(mesh.num_nodes());
        for (i, &p) in mesh.nodes.iter().enumerate() {
            if mesh.boundary[i] {
                values.push(0.0);
            } else {
                values.push(bubble(self.center, self.delta, p) + self.correction.values[i]);
            }
        }
        ScalarField { values }
    }

    /// Energy norm of the projected zero mode: a(PZ, PZ)^{1/2} where PZ
    /// solves a(PZ, X) = ∫ e^w Z X (integration by parts of -ΔZ = e^w Z).
    pub fn mode_energy_norm(&self, op: &DirichletOperator, index: usize) -> f64 {
        let load = op.assemble_load(&|p| {
            bubble_exp(self.center, self.delta, p) * bubble_mode(self.center, self.delta, index, p)
        });
        let pz = op.solve_with_load(&load);
        let mut a = 0.0;
        for (l, v) in load.iter().zip(&pz.values) {
            a += l * v;
        }
        a.max(0.0).sqrt()
    }
}

/// Max-norm defects of the two projection expansions at each width in
/// `deltas`: the remainder of Pw = w - ln(8δ²) + 8πH(·, ξ) + O(δ²) and of
/// PZ⁰ = Z⁰ + 1 + O(δ²). Both remainders are discrete harmonic extensions
/// of O(δ²) boundary data, so the mesh error scales out of the ratios.
pub fn projection_expansion_defects(
    op: &DirichletOperator,
    center: Vec2,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !op.mesh().domain.contains(center) {
        return Err(CoreError::OutsideDomain { x: center.x, y: center.y });
    }
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let d2 = delta * delta;
        // Pw - [w - ln(8δ²) + 8πH] is harmonic with data 2 ln(1 + δ²/r²).
        let exp_field = op.harmonic_extension(|p| {
            let r2 = (p - center).norm_sq();
            2.0 * (1.0 + d2 / r2).ln()
        });
        // PZ⁰ - Z⁰ - 1 is harmonic with data -2δ²/(r² + δ²).
        let z0_field = op.harmonic_extension(|p| {
            let r2 = (p - center).norm_sq();
            -2.0 * d2 / (r2 + d2)
        });
        out.push((exp_field.max_abs(), z0_field.max_abs()));
    }
    Ok(out)
}

/// The full two-component approximation at one coupling strength λ:
/// u₁ ≈ Σ_i Pw_i - z/2 and u₂ ≈ -Σ_i Pw_i/2 + z, with widths locked to
/// the concentration points through 4δ_i² = λ d_i.
pub struct Ansatz {
    op: Rc<DirichletOperator>,
    pub lambda: f64,
    pub rho2: f64,
    pub points: Vec<Vec2>,
    pub bubbles: Vec<ProjectedBubble>,
    /// Mean field background (zero when rho2 = 0).
    pub z: ScalarField,
    /// d_i = exp[8πH(ξ_i,ξ_i) + Σ_{j≠i} 8πG(ξ_j,ξ_i) - z(ξ_i)/2].
    pub d_factors: Vec<f64>,
    /// Vortex weight at quadrature points (the mean field reference density).
    h_at_quad: Vec<f64>,
    quad: Vec<(usize, [f64; 3], f64)>,
    pub mean_field_iterations: usize,
}

/// Residual sizes of one ansatz: the first-equation defect E in L^p, the
/// normalized second-equation defect E₀ in max norm, the combined error
/// term R̃ = E + E₀/2, and the energy norms of the projected profiles.
pub struct ResidualReport {
    pub lambda: f64,
    pub e_l12: f64,
    pub e_l15: f64,
    pub e0_max: f64,
    pub rt_l12: f64,
    /// max_i |Pw_i|_{H¹}, via a(Pw_i, Pw_i) = ∫ e^{w_i}(w_i + c_i).
    pub pw_h1: f64,
    /// max_i |PZ_i¹|_{H¹}: the translation-mode projection norm, ~ 1/δ.
    pub pz_h1: f64,
    /// λ ∫ e^{u₁}: the concentrating mass, 4πk in the limit.
    pub rho1: f64,
}

impl Ansatz {
    /// Build the approximation on the problem's mesh at coupling λ.
    pub fn build(
        problem: &MeanFieldProblem,
        green: &GreenEvaluator,
        lambda: f64,
    ) -> Result<Ansatz> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(CoreError::InvalidConfiguration(format!(
                "coupling strength must be positive, got {lambda}"
            )));
        }
        let op = problem.operator();
        let points = problem.points().to_vec();
        let sol = problem.solve()?;
        let mesh = op.mesh();
        let mut d_factors = Vec::with_capacity(points.len());
        let mut bubbles = Vec::with_capacity(points.len());
        for (i, &xi) in points.iter().enumerate() {
            let mut expo = 8.0 * PI * green.robin(xi)?;
            for (j, &xj) in points.iter().enumerate() {
                if j != i {
                    expo += 8.0 * PI * green.value(xj, xi)?;
                }
            }
            expo -= 0.5 * sol.z.value_at(mesh, xi)?;
            let d = expo.exp();
            let delta = 0.5 * (lambda * d).sqrt();
            d_factors.push(d);
            bubbles.push(ProjectedBubble::new(op, xi, delta)?);
        }
        Ok(Ansatz {
            op: problem.operator_rc(),
            lambda,
            rho2: problem.rho2(),
            points,
            bubbles,
            z: sol.z,
            d_factors,
            h_at_quad: problem.weight_at_quad().to_vec(),
            quad: problem.quad().to_vec(),
            mean_field_iterations: sol.iterations,
        })
    }

    pub fn operator(&self) -> &DirichletOperator {
        &self.op
    }

    pub fn operator_rc(&self) -> Rc<DirichletOperator> {
        Rc::clone(&self.op)
    }

    /// Shared quadrature records (triangle, barycentric, weight).
    pub fn quad_records(&self) -> &[(usize, [f64; 3], f64)] {
        &self.quad
    }

    /// Sum of sharp profiles Σ w_i at a point, in closed form.
    pub fn sharp_sum(&self, x: Vec2) -> f64 {
        self.bubbles.iter().map(|b| bubble(b.center, b.delta, x)).sum()
    }

    /// Smooth (nodal) part of u₁: Σ c_i - z/2.
    pub fn smooth_one(&self) -> ScalarField {
        let n = self.op.num_nodes();
        let mut values = vec![0.0; n];
        for b in &self.bubbles {
            for (v, c) in values.iter_mut().zip(&b.correction.values) {
                *v += c;
            }
        }
        for (v, z) in values.iter_mut().zip(&self.z.values) {
            *v -= 0.5 * z;
        }
        ScalarField { values }
    }

    /// Smooth (nodal) part of u₂: -Σ c_i/2 + z.
    pub fn smooth_two(&self) -> ScalarField {
        let n = self.op.num_nodes();
        let mut values = vec![0.0; n];
        for b in &self.bubbles {
            for (v, c) in values.iter_mut().zip(&b.correction.values) {
                *v -= 0.5 * c;
            }
        }
        for (v, z) in values.iter_mut().zip(&self.z.values) {
            *v += z;
        }
        ScalarField { values }
    }

    /// Nodal values of the full first component W₁ (sharp part interpolated).
    pub fn w1_nodal(&self) -> ScalarField {
        let mut f = self.smooth_one();
        for (i, &p) in self.op.mesh().nodes.iter().enumerate() {
            if !self.op.mesh().boundary[i] {
                f.values[i] += self.sharp_sum(p);
            } else {
                f.values[i] = 0.0;
            }
        }
        f
    }

    /// Nodal values of the full second component W₂.
    pub fn w2_nodal(&self) -> ScalarField {
        let mut f = self.smooth_two();
        for (i, &p) in self.op.mesh().nodes.iter().enumerate() {
            if !self.op.mesh().boundary[i] {
                f.values[i] -= 0.5 * self.sharp_sum(p);
            } else {
                f.values[i] = 0.0;
            }
        }
        f
    }

    /// Residual norms. The first-equation residual is
    /// E = Σ e^{w_i} - 2λ e^{W₁}; the second is the normalized density gap
    /// E₀ = 2 rho2 (e^{W₂}/∫e^{W₂} - h e^z/∫h e^z).
    pub fn residual_report(&self) -> ResidualReport {
        let mesh = self.op.mesh();
        let tris = &mesh.tris;
        let s1 = self.smooth_one();
        let s2 = self.smooth_two();
        let nq = self.quad.len();
        // Pass 1: densities and their masses.
        let mut e_w1 = Vec::with_capacity(nq);
        let mut e_w2 = Vec::with_capacity(nq);
        let mut sharp_exp_sum = Vec::with_capacity(nq);
        let mut mass_w1 = 0.0;
        let mut mass_w2 = 0.0;
        let mut mass_ref = 0.0;
        let mut pw_acc = vec![0.0; self.bubbles.len()];
        for (q, &(t, bary, w)) in self.quad.iter().enumerate() {
            let tri = tris[t];
            let p = mesh.nodes[tri[0]] * bary[0]
                + mesh.nodes[tri[1]] * bary[1]
                + mesh.nodes[tri[2]] * bary[2];
            let sharp: f64 = self.sharp_sum(p);
            let sm1 = bary[0] * s1.values[tri[0]]
                + bary[1] * s1.values[tri[1]]
                + bary[2] * s1.values[tri[2]];
            let sm2 = bary[0] * s2.values[tri[0]]
                + bary[1] * s2.values[tri[1]]
                + bary[2] * s2.values[tri[2]];
            let zq = bary[0] * self.z.values[tri[0]]
                + bary[1] * self.z.values[tri[1]]
                + bary[2] * self.z.values[tri[2]];
            let ew1 = (sharp + sm1).exp();
            let ew2 = (-0.5 * sharp + sm2).exp();
            let mut sharp_exp = 0.0;
            for (i, b) in self.bubbles.iter().enumerate() {
                let ei = bubble_exp(b.center, b.delta, p);
                sharp_exp += ei;
                let ci = bary[0] * b.correction.values[tri[0]]
                    + bary[1] * b.correction.values[tri[1]]
                    + bary[2] * b.correction.values[tri[2]];
                pw_acc[i] += w * ei * (bubble(b.center, b.delta, p) + ci);
            }
            e_w1.push(ew1);
            e_w2.push(ew2);
            sharp_exp_sum.push(sharp_exp);
            mass_w1 += w * ew1;
            mass_w2 += w * ew2;
            mass_ref += w * self.h_at_quad[q] * zq.exp();
        }
        // Pass 2: norms.
        let (p12, p15) = (1.2, 1.5);
        let mut acc12 = 0.0;
        let mut acc15 = 0.0;
        let mut acc_rt = 0.0;
        let mut e0_max: f64 = 0.0;
        for (q, &(t, bary, w)) in self.quad.iter().enumerate() {
            let tri = tris[t];
            let e = sharp_exp_sum[q] - 2.0 * self.lambda * e_w1[q];
            acc12 += w * e.abs().powf(p12);
            acc15 += w * e.abs().powf(p15);
            let mut e0 = 0.0;
            if self.rho2 > 0.0 {
                let zq = bary[0] * self.z.values[tri[0]]
                    + bary[1] * self.z.values[tri[1]]
                    + bary[2] * self.z.values[tri[2]];
                let gap = e_w2[q] / mass_w2 - self.h_at_quad[q] * zq.exp() / mass_ref;
                e0 = 2.0 * self.rho2 * gap;
                e0_max = e0_max.max(e0.abs());
            }
            acc_rt += w * (e + 0.5 * e0).abs().powf(p12);
        }
        let pw_h1 = pw_acc.iter().fold(0.0f64, |m, &a| m.max(a.max(0.0).sqrt()));
        let pz_h1 = self
            .bubbles
            .iter()
            .map(|b| b.mode_energy_norm(&self.op, 1))
            .fold(0.0f64, f64::max);
        ResidualReport {
            lambda: self.lambda,
            e_l12: acc12.powf(1.0 / p12),
            e_l15: acc15.powf(1.0 / p15),
            e0_max,
            rt_l12: acc_rt.powf(1.0 / p12),
            pw_h1,
            pz_h1,
            rho1: self.lambda * mass_w1,
        }
    }
}

/// One row of the residual scaling experiment.
pub struct ScalingRow {
    pub lambda: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub e_l12: f64,
    pub e_l15: f64,
    pub e0_max: f64,
    pub rt_l12: f64,
    pub pw_h1: f64,
    pub pz_h1: f64,
    pub rho1: f64,
    pub nodes: usize,
}

/// Residual norms along a λ ladder with log-log slopes fitted at the end.
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    pub slope_l12: f64,
    pub slope_l15: f64,
    pub slope_e0: f64,
    pub slope_rt12: f64,
}

/// Run the residual scaling experiment: for each λ build a mesh graded to
/// the bubble widths, assemble the ansatz, and record its residual norms.
/// Needs at least three λ samples spanning two decades for the fits.
pub fn norm_scaling_study(
    domain: &Domain,
    points: &[Vec2],
    rho2: f64,
    lambdas: &[f64],
    h_background: f64,
) -> Result<ScalingStudy> {
    let decades = if lambdas.is_empty() {
        0.0
    } else {
        let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lambdas.iter().cloned().fold(0.0f64, f64::max);
        (hi / lo).log10()
    };
    if lambdas.len() < 3 || decades < 2.0 {
        return Err(CoreError::InsufficientSamples {
            need: 3,
            decades: 2.0,
            got: lambdas.len(),
        });
    }
    // Pilot mesh to estimate the d factors (they vary little with λ).
    let green_for = |op: &Rc<DirichletOperator>| match domain {
        Domain::UnitDisk => GreenEvaluator::analytic_disk(),
        _ => GreenEvaluator::numeric(Rc::clone(op)),
    };
    let mut pilot_size = SizeField::uniform(h_background);
    for &p in points {
        pilot_size.add_well(p, h_background / 3.0, 0.1);
    }
    let pilot_mesh = Rc::new(Mesh::build(domain, &pilot_size)?);
    let pilot_op = Rc::new(DirichletOperator::new(pilot_mesh)?);
    let pilot_green = green_for(&pilot_op);
    let pilot = MeanFieldProblem::new(Rc::clone(&pilot_op), &pilot_green, points, rho2)?;
    let pilot_ansatz = Ansatz::build(&pilot, &pilot_green, lambdas[0])?;
    let d_factors = pilot_ansatz.d_factors.clone();

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut size = SizeField::uniform(h_background);
        let mut delta_min = f64::INFINITY;
        let mut delta_max: f64 = 0.0;
        for (&p, &d) in points.iter().zip(&d_factors) {
            let delta = 0.5 * (lambda * d).sqrt();
            delta_min = delta_min.min(delta);
            delta_max = delta_max.max(delta);
            size.add_well(p, delta / 4.0, 10.0 * delta);
        }
        let mesh = Rc::new(Mesh::build(domain, &size)?);
        let op = Rc::new(DirichletOperator::new(mesh)?);
        let green = green_for(&op);
        let problem = MeanFieldProblem::new(Rc::clone(&op), &green, points, rho2)?;
        let ansatz = Ansatz::build(&problem, &green, lambda)?;
        let report = ansatz.residual_report();
        rows.push(ScalingRow {
            lambda,
            delta_min,
            delta_max,
            e_l12: report.e_l12,
            e_l15: report.e_l15,
            e0_max: report.e0_max,
            rt_l12: report.rt_l12,
            pw_h1: report.pw_h1,
            pz_h1: report.pz_h1,
            rho1: report.rho1,
            nodes: op.num_nodes(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let fit = |get: fn(&ScalingRow) -> f64| -> f64 {
        let ys: Vec<f64> = rows.iter().map(get).collect();
        if ys.iter().all(|&y| y > 0.0) {
            fit_loglog(&xs, &ys).0
        } else {
            f64::NAN
        }
    };
    Ok(ScalingStudy {
        slope_l12: fit(|r| r.e_l12),
        slope_l15: fit(|r| r.e_l15),
        slope_e0: fit(|r| r.e0_max),
        slope_rt12: fit(|r| r.rt_l12),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{log_moment_truncated, LOG_MOMENT_FULL};

    fn disk_op_with_well(h: f64, center: Vec2, delta: f64) -> Rc<DirichletOperator> {
        let mut size = SizeField::uniform(h);
        size.add_well(center, delta / 4.0, 10.0 * delta);
        let mesh = Rc::new(Mesh::build(&Domain::UnitDisk, &size).unwrap());
        Rc::new(DirichletOperator::new(mesh).unwrap())
    }

    #[test]
    fn bubble_mass_accounts_for_truncation() {
        // ∫_disk e^w for a centered bubble is 8π/(1+δ²), not 8π.
        let delta = 0.1;
        let op = disk_op_with_well(0.1, Vec2::ZERO, delta);
        let b = ProjectedBubble::new(&op, Vec2::ZERO, delta).unwrap();
        let want = 8.0 * PI / (1.0 + delta * delta);
        let rel = (b.mass - want).abs() / want;
        assert!(rel < 2e-3, "mass {} vs {want} (rel {rel})", b.mass);
        // Plugging the full-plane value instead is a visible mistake.
        assert!((b.mass - 8.0 * PI).abs() / (8.0 * PI) > 5e-3);
    }

    #[test]
    fn centered_correction_is_the_exact_constant() {
        // For ξ = 0 the boundary data of -w is constant, so the discrete
        // harmonic extension is that constant at every node.
        let delta = 0.07;
        let op = disk_op_with_well(0.12, Vec2::ZERO, delta);
        let b = ProjectedBubble::new(&op, Vec2::ZERO, delta).unwrap();
        let want = -(8.0 * delta * delta).ln() + 2.0 * (1.0 + delta * delta).ln();
        for (i, &c) in b.correction.values.iter().enumerate() {
            assert!(
                (c - want).abs() < 1e-10,
                "node {i}: correction {c} vs constant {want}"
            );
        }
    }

    #[test]
    fn projected_profile_looks_like_a_green_function_far_out() {
        // Away from the core Pw ≈ 8π G(·, ξ) up to O(δ²/r²).
        let delta = 0.05;
        let xi = Vec2::new(0.3, 0.0);
        let op = disk_op_with_well(0.08, xi, delta);
        let b = ProjectedBubble::new(&op, xi, delta).unwrap();
        let nodal = b.nodal(op.mesh());
        let green = GreenEvaluator::analytic_disk();
        let probe = Vec2::new(-0.4, 0.2);
        let got = nodal.value_at(op.mesh(), probe).unwrap();
        let want = 8.0 * PI * green.value(probe, xi).unwrap();
        assert!((got - want).abs() < 0.03, "{got} vs {want}");
    }

    #[test]
    fn log_weighted_bubble_integral_matches_closed_form() {
        // ∫ e^w w over the disk: 8[π_R ln(8/δ²) - 2 L_R] with the truncated
        // mass π_R and log moment L_R at R = 1/δ.
        let delta = 0.08;
        let op = disk_op_with_well(0.1, Vec2::ZERO, delta);
        let quad_val = op.integrate_fn(|p| {
            bubble_exp(Vec2::ZERO, delta, p) * bubble(Vec2::ZERO, delta, p)
        });
        let r = 1.0 / delta;
        let mass_r = crate::quad::bubble_mass_truncated(r);
        let want = 8.0 * (mass_r * (8.0 / (delta * delta)).ln() - 2.0 * log_moment_truncated(r));
        let full = 8.0 * (PI * (8.0 / (delta * delta)).ln() - 2.0 * LOG_MOMENT_FULL);
        let rel = (quad_val - want).abs() / want.abs();
        assert!(rel < 2e-3, "quad {quad_val} vs truncated {want} (rel {rel})");
        // The truncation correction itself is visible at this width.
        assert!((want - full).abs() > 10.0 * (quad_val - want).abs());
    }

    #[test]
    fn translation_mode_energy_norm_scales_inversely_with_width() {
        // a(PZ¹, PZ¹) ≈ ∫|∇Z¹|² = 2π/(3δ²).
        let delta = 0.06;
        let op = disk_op_with_well(0.1, Vec2::ZERO, delta);
        let b = ProjectedBubble::new(&op, Vec2::ZERO, delta).unwrap();
        let got = b.mode_energy_norm(&op, 1);
        let want = (2.0 * PI / 3.0).sqrt() / delta;
        let rel = (got - want).abs() / want;
        assert!(rel < 0.05, "norm {got} vs {want} (rel {rel})");
    }

    #[test]
    fn expansion_defects_shrink_quadratically() {
        let xi = Vec2::new(0.2, 0.1);
        let op = disk_op_with_well(0.1, xi, 0.05);
        let deltas = [0.2, 0.1, 0.05, 0.025];
        let defects = projection_expansion_defects(&op, xi, &deltas).unwrap();
        for pair in defects.windows(2) {
            let (e0, z0) = pair[0];
            let (e1, z1) = pair[1];
            assert!(e0 / e1 >= 3.0, "profile defect ratio {} too small", e0 / e1);
            assert!(z0 / z1 >= 3.0, "mode defect ratio {} too small", z0 / z1);
        }
    }

    #[test]
    fn residuals_shrink_with_coupling_strength() {
        // A two-point mini ladder: both residual norms must drop and the
        // concentrating mass must approach 4π for a single bubble.
        let points = [Vec2::ZERO];
        let study = norm_scaling_study(
            &Domain::UnitDisk,
            &points,
            0.5,
            &[1e-2, 1e-3, 1e-4],
            0.15,
        )
        .unwrap();
        assert!(study.rows[2].e_l12 < study.rows[0].e_l12);
        assert!(study.rows[2].e0_max < study.rows[0].e0_max);
        let rho1 = study.rows[2].rho1;
        assert!((rho1 - 4.0 * PI).abs() < 0.5, "rho1 {rho1} vs 4π");
        assert!(study.slope_l12 > 0.0);
        assert!(study.slope_e0 > 0.5);
    }

    #[test]
    fn too_few_samples_are_rejected() {
        let got = norm_scaling_study(&Domain::UnitDisk, &[Vec2::ZERO], 0.0, &[1e-2, 1e-3], 0.2);
        assert!(matches!(got, Err(CoreError::InsufficientSamples { .. })));
    }
}
