//! Batch command-line front end over the solver library: one TOML config in,
//! deterministic CSV/JSON reports and a checksum manifest out.

mod config;
mod report;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use config::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use report::{field_dump, fnum, json_object, Csv, Jv, OutDir};
use std::path::PathBuf;
use std::rc::Rc;
use todalab_core::{
    ansatz::norm_scaling_study, toda::continuation_branch, Classification, DirichletOperator,
    Domain, GreenEvaluator, MeanFieldProblem, Mesh, ReducedEnergy, SizeField, TodaParams, Vec2,
};

#[derive(Parser)]
#[command(
    name = "todalab",
    version,
    about = "Laboratory for coupled mean field systems: Green functions, reduced \
             energy landscapes, bubble ansatz diagnostics, and Newton continuation"
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides out_dir from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker count. The kernels are single-threaded; values above 1 idle.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// 0 quiet, 1 stage progress, 2 adds solver traces and field dumps.
    #[arg(long, global = true, default_value_t = 1)]
    verbosity: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compare the mesh-based Green function on the disk against the closed form.
    GreenCheck,
    /// Solve the weighted mean field problem at the configured points.
    Meanfield,
    /// Sample the reduced energy along the ray t -> t * points.
    LambdaScan,
    /// Search for a critical configuration of the reduced energy.
    FindCritical,
    /// Ansatz residual norms along the lambda ladder, with fitted slopes.
    ResidualScan,
    /// Newton continuation of the coupled system down the lambda ladder.
    Branch,
    /// find-critical, then residual-scan and branch at the critical points.
    FullPipeline,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref().ok_or_else(|| anyhow!("--config is required"))?;
    let cfg = Config::load(config_path)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out_path = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| anyhow!("no output directory: pass --out or set out_dir in the config"))?;
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    if cli.threads > 1 && cli.verbosity >= 1 {
        eprintln!("note: compute kernels are single-threaded; {} extra workers idle", cli.threads - 1);
    }
    let config_text = cfg.canonical_toml();
    let mut out = OutDir::create(&out_path, seed, &config_text)?;
    out.write("config.toml", &config_text)?;
    let result = dispatch(cli.command, &cfg, &mut out, seed, cli.verbosity);
    out.finish()?;
    result
}

fn dispatch(cmd: Command, cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<()> {
    match cmd {
        Command::GreenCheck => run_stage(out, "green-check", |o| green_check(cfg, o, seed, verbosity)),
        Command::Meanfield => run_stage(out, "meanfield", |o| meanfield(cfg, o, seed, verbosity)),
        Command::LambdaScan => run_stage(out, "lambda-scan", |o| lambda_scan(cfg, o, seed, verbosity)),
        Command::FindCritical => {
            run_stage(out, "find-critical", |o| find_critical(cfg, o, seed, verbosity).map(|_| "ok".into()))
        }
        Command::ResidualScan => {
            let points = cfg
                .explicit_points()
                .ok_or_else(|| anyhow!("residual-scan needs explicit model.points"))
                .context("stage residual-scan failed")?;
            run_stage(out, "residual-scan", |o| residual_scan(cfg, o, seed, verbosity, &points))
        }
        Command::Branch => {
            let points = cfg
                .explicit_points()
                .ok_or_else(|| anyhow!("branch needs explicit model.points"))
                .context("stage branch failed")?;
            run_stage(out, "branch", |o| branch(cfg, o, seed, verbosity, &points))
        }
        Command::FullPipeline => full_pipeline(cfg, out, seed, verbosity),
    }
}

/// Run one named stage; record its status and name it in any error.
fn run_stage(
    out: &mut OutDir,
    name: &str,
    stage: impl FnOnce(&mut OutDir) -> Result<String>,
) -> Result<()> {
    match stage(out) {
        Ok(status) => {
            out.stage(name, &status);
            Ok(())
        }
        Err(e) => {
            out.stage(name, "failed");
            Err(e.context(format!("stage {name} failed")))
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1).max(1) as f64).collect()
}

/// Uniform sample from the disk of the given radius.
fn disk_sample(rng: &mut ChaCha8Rng, radius: f64) -> Vec2 {
    loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        if x * x + y * y < 1.0 {
            return Vec2::new(radius * x, radius * y);
        }
    }
}

/// Least-squares slope of ln(err) against ln(h).
fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Mesh graded toward the concentration points, as the reduced-energy
/// evaluations grade theirs.
fn graded_operator(domain: &Domain, points: &[Vec2], h: f64) -> Result<Rc<DirichletOperator>> {
    let mut size = SizeField::uniform(h);
    for &p in points {
        size.add_well(p, h / 3.0, 0.12);
    }
    let mesh = Rc::new(Mesh::build(domain, &size)?);
    Ok(Rc::new(DirichletOperator::new(mesh)?))
}

fn green_for(domain: &Domain, op: &Rc<DirichletOperator>) -> GreenEvaluator {
    match domain {
        Domain::UnitDisk => GreenEvaluator::analytic_disk(),
        _ => GreenEvaluator::numeric(Rc::clone(op)),
    }
}

fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Minimum => "minimum",
        Classification::Maximum => "maximum",
        Classification::Saddle => "saddle",
        Classification::Unresolved => "unresolved",
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn green_check(cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<String> {
    let domain = cfg.domain()?;
    if domain != Domain::UnitDisk {
        bail!("green-check needs domain.kind = \"disk\": the closed-form reference lives there");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec2, Vec2)> =
        (0..50).map(|_| (disk_sample(&mut rng, 0.85), disk_sample(&mut rng, 0.85))).collect();
    let exact = GreenEvaluator::analytic_disk();

    let levels: Vec<f64> = (0..=cfg.mesh.refinements)
        .map(|l| cfg.mesh.h_target * (1 << (cfg.mesh.refinements - l)) as f64)
        .collect();
    let hash = out.config_hash.clone();
    let mut csv = Csv::new(
        seed,
        &hash,
        &["level", "h", "pair", "x1", "x2", "y1", "y2", "numeric", "exact", "abs_err"],
    );
    let mut max_errs = Vec::with_capacity(levels.len());
    for (level, &h) in levels.iter().enumerate() {
        let mesh = Rc::new(Mesh::unit_disk(h)?);
        let op = Rc::new(DirichletOperator::new(mesh)?);
        let numeric = GreenEvaluator::numeric(op);
        let mut max_err = 0.0f64;
        for (p, (x, y)) in pairs.iter().enumerate() {
            let approx = numeric.regular_part(*x, *y)?;
            let reference = exact.regular_part(*x, *y)?;
            let err = (approx - reference).abs();
            max_err = max_err.max(err);
            csv.row(&[
                level.to_string(),
                fnum(h),
                p.to_string(),
                fnum(x.x),
                fnum(x.y),
                fnum(y.x),
                fnum(y.y),
                fnum(approx),
                fnum(reference),
                fnum(err),
            ]);
        }
        if verbosity >= 1 {
            println!("green-check: h = {h:.4}, max error {max_err:.3e}");
        }
        max_errs.push(max_err);
    }
    let order = fitted_order(&levels, &max_errs);
    out.write("green_check.csv", &csv.into_string())?;
    out.write(
        "green_check.json",
        &json_object(&[
            ("pairs", Jv::Int(pairs.len() as i64)),
            ("h", Jv::NumList(levels.clone())),
            ("max_err", Jv::NumList(max_errs.clone())),
            ("order", Jv::Num(order)),
            ("max_err_finest", Jv::Num(*max_errs.last().unwrap())),
            ("seed", Jv::Int(seed as i64)),
        ]),
    )?;
    Ok("ok".into())
}

fn meanfield(cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<String> {
    let domain = cfg.domain()?;
    let points =
        cfg.explicit_points().ok_or_else(|| anyhow!("meanfield needs explicit model.points"))?;
    let op = graded_operator(&domain, &points, cfg.mesh.h_target)?;
    let green = green_for(&domain, &op);
    let problem = MeanFieldProblem::new(Rc::clone(&op), &green, &points, cfg.model.rho2)?;
    let sol = problem.solve()?;
    let nondeg = problem.nondegeneracy(&sol)?;
    if verbosity >= 1 {
        println!(
            "meanfield: energy {:.6}, {} iterations, smallest eigenvalue {:.3e}",
            sol.energy, sol.iterations, nondeg.smallest_eigenvalue
        );
    }
    out.write(
        "meanfield.json",
        &json_object(&[
            ("energy", Jv::Num(sol.energy)),
            ("log_mass", Jv::Num(sol.log_mass)),
            ("iterations", Jv::Int(sol.iterations as i64)),
            ("grad_norm", Jv::Num(sol.grad_norm)),
            ("smallest_eigenvalue", Jv::Num(nondeg.smallest_eigenvalue)),
            ("nondegenerate", Jv::Bool(nondeg.positive)),
            ("nodes", Jv::Int(op.mesh().num_nodes() as i64)),
            ("seed", Jv::Int(seed as i64)),
        ]),
    )?;
    out.write("z.field", &field_dump(op.mesh(), &sol.z.values))?;
    if verbosity >= 2 {
        let hash = out.config_hash.clone();
        let mut trace = Csv::new(seed, &hash, &["iteration", "energy", "grad_norm", "step"]);
        for &(it, e, g, t) in &sol.trace {
            trace.row(&[it.to_string(), fnum(e), fnum(g), fnum(t)]);
        }
        out.write("meanfield_trace.csv", &trace.into_string())?;
    }
    Ok("ok".into())
}

fn lambda_scan(cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<String> {
    let domain = cfg.domain()?;
    let points =
        cfg.explicit_points().ok_or_else(|| anyhow!("lambda-scan needs explicit model.points"))?;
    let k = points.len();
    let re = ReducedEnergy::new(domain, cfg.model.rho2)?.with_mesh_size(cfg.mesh.h_target);

    let mut columns: Vec<String> = vec!["t".into()];
    for i in 0..k {
        columns.push(format!("xi{i}_x"));
        columns.push(format!("xi{i}_y"));
    }
    columns.extend(["lambda", "half_mean_field", "robin_part", "interaction_part"].map(String::from));
    for i in 0..k {
        columns.push(format!("grad{i}_x"));
        columns.push(format!("grad{i}_y"));
    }
    columns.push("mf_iterations".into());
    let col_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let hash = out.config_hash.clone();
    let mut csv = Csv::new(seed, &hash, &col_refs);

    let mut written = 0usize;
    for t in linspace(cfg.scan.t_min, cfg.scan.t_max, cfg.scan.samples) {
        let pts: Vec<Vec2> = points.iter().map(|&p| Vec2::new(t * p.x, t * p.y)).collect();
        let breakdown = match re.lambda(&pts) {
            Ok(b) => b,
            Err(e) => {
                if verbosity >= 1 {
                    println!("lambda-scan: skipping t = {t:.4} ({e})");
                }
                continue;
            }
        };
        let mut cells = vec![fnum(t)];
        for p in &pts {
            cells.push(fnum(p.x));
            cells.push(fnum(p.y));
        }
        cells.push(fnum(breakdown.value));
        cells.push(fnum(breakdown.half_mean_field));
        cells.push(fnum(breakdown.robin_part));
        cells.push(fnum(breakdown.interaction_part));
        for g in &breakdown.gradient {
            cells.push(fnum(g.x));
            cells.push(fnum(g.y));
        }
        cells.push(breakdown.mean_field_iterations.to_string());
        csv.row(&cells);
        written += 1;
        if verbosity >= 2 {
            println!("lambda-scan: t = {t:.4}, value {:.6}", breakdown.value);
        }
    }
    if written == 0 {
        bail!("no scan sample produced a valid configuration");
    }
    out.write("lambda_scan.csv", &csv.into_string())?;
    Ok("ok".into())
}

fn find_critical(cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<Vec<Vec2>> {
    let domain = cfg.domain()?;
    let re = ReducedEnergy::new(domain, cfg.model.rho2)?.with_mesh_size(cfg.mesh.h_target);
    let cp = match cfg.explicit_points() {
        Some(points) => re.find_critical_from(&points)?,
        None => re.find_critical(cfg.k(), seed)?,
    };
    if verbosity >= 1 {
        let coords: Vec<String> = cp.points.iter().map(|p| format!("({:.4}, {:.4})", p.x, p.y)).collect();
        println!(
            "find-critical: {} at [{}], gradient norm {:.3e}",
            classification_name(cp.classification),
            coords.join(", "),
            cp.grad_norm
        );
    }
    let mut xi = Vec::with_capacity(2 * cp.points.len());
    for p in &cp.points {
        xi.push(p.x);
        xi.push(p.y);
    }
    out.write(
        "critical.json",
        &json_object(&[
            ("xi", Jv::NumList(xi)),
            ("value", Jv::Num(cp.value)),
            ("grad_norm", Jv::Num(cp.grad_norm)),
            ("classification", Jv::Str(classification_name(cp.classification).into())),
            ("hessian_eigenvalues", Jv::NumList(cp.hessian_eigenvalues.clone())),
            ("iterations", Jv::Int(cp.iterations as i64)),
            ("starts_tried", Jv::Int(cp.starts_tried as i64)),
            ("seed", Jv::Int(seed as i64)),
        ]),
    )?;
    Ok(cp.points)
}

fn residual_scan(
    cfg: &Config,
    out: &mut OutDir,
    seed: u64,
    verbosity: u8,
    points: &[Vec2],
) -> Result<String> {
    let domain = cfg.domain()?;
    let study = norm_scaling_study(
        &domain,
        points,
        cfg.model.rho2,
        &cfg.scan.lambdas,
        cfg.ladder.h_background,
    )?;
    let hash = out.config_hash.clone();
    let mut csv = Csv::new(
        seed,
        &hash,
        &["lambda", "delta_min", "e_l12", "e_l15", "e0_max", "rt_l12", "pw_h1", "pz_h1", "rho1", "nodes"],
    );
    for row in &study.rows {
        csv.row(&[
            fnum(row.lambda),
            fnum(row.delta_min),
            fnum(row.e_l12),
            fnum(row.e_l15),
            fnum(row.e0_max),
            fnum(row.rt_l12),
            fnum(row.pw_h1),
            fnum(row.pz_h1),
            fnum(row.rho1),
            row.nodes.to_string(),
        ]);
        if verbosity >= 2 {
            println!("residual-scan: lambda = {:.2e}, |E|_1.2 = {:.4e}", row.lambda, row.e_l12);
        }
    }
    csv.footer_json(&json_object(&[
        ("slope_l12", Jv::Num(study.slope_l12)),
        ("slope_l15", Jv::Num(study.slope_l15)),
        ("slope_e0", Jv::Num(study.slope_e0)),
        ("slope_rt12", Jv::Num(study.slope_rt12)),
    ]));
    if verbosity >= 1 {
        println!(
            "residual-scan: fitted slopes {:.3} (L1.2), {:.3} (L1.5), {:.3} (max)",
            study.slope_l12, study.slope_l15, study.slope_e0
        );
    }
    out.write("residual_scan.csv", &csv.into_string())?;
    Ok("ok".into())
}

fn branch(
    cfg: &Config,
    out: &mut OutDir,
    seed: u64,
    verbosity: u8,
    points: &[Vec2],
) -> Result<String> {
    let domain = cfg.domain()?;
    let params = TodaParams {
        rho2: cfg.model.rho2,
        lambda_start: cfg.ladder.lambda_start,
        lambda_end: cfg.ladder.lambda_min,
        ladder_shrink: cfg.ladder.shrink,
        h_background: cfg.ladder.h_background,
        newton_tol: cfg.ladder.newton_tol,
        max_newton: cfg.ladder.max_newton,
    };
    let result = continuation_branch(&domain, points, &params)?;
    let hash = out.config_hash.clone();
    let mut csv = Csv::new(
        seed,
        &hash,
        &[
            "lambda",
            "rho1",
            "energy",
            "defect",
            "newton_iters",
            "deviation",
            "sigma_min",
            "residual_dual",
            "u2_norm",
            "nodes",
        ],
    );
    for row in &result.rows {
        csv.row(&[
            fnum(row.lambda),
            fnum(row.rho1),
            fnum(row.energy),
            fnum(row.defect),
            row.newton_iters.to_string(),
            fnum(row.deviation),
            fnum(row.sigma_min),
            fnum(row.residual_dual),
            fnum(row.u2_norm),
            row.nodes.to_string(),
        ]);
        if verbosity >= 2 {
            println!(
                "branch: lambda = {:.3e}, rho1 = {:.6}, defect = {:.3e}",
                row.lambda, row.rho1, row.defect
            );
        }
    }
    out.write("branch.csv", &csv.into_string())?;
    let last = result.rows.last().expect("a completed first rung");
    out.write(
        "branch.json",
        &json_object(&[
            ("completed", Jv::Bool(result.completed)),
            ("stop_reason", Jv::Str(result.stop_reason.clone())),
            ("lambda_star", Jv::Num(result.lambda_star)),
            ("rungs", Jv::Int(result.rows.len() as i64)),
            ("final_lambda", Jv::Num(last.lambda)),
            ("final_rho1", Jv::Num(last.rho1)),
            ("final_defect", Jv::Num(last.defect)),
            ("seed", Jv::Int(seed as i64)),
        ]),
    )?;
    if let Some(state) = &result.final_state {
        if verbosity >= 2 {
            let mesh = state.ansatz.operator().mesh();
            out.write("u1.field", &field_dump(mesh, &state.u1_nodal().values))?;
            out.write("u2.field", &field_dump(mesh, &state.u2_nodal().values))?;
        }
    }
    if verbosity >= 1 {
        println!(
            "branch: {} rungs, final rho1 = {:.6} (target {:.6})",
            result.rows.len(),
            last.rho1,
            4.0 * std::f64::consts::PI * points.len() as f64
        );
    }
    if result.completed {
        Ok("ok".into())
    } else {
        Ok(format!("truncated: {}", result.stop_reason))
    }
}

fn full_pipeline(cfg: &Config, out: &mut OutDir, seed: u64, verbosity: u8) -> Result<()> {
    let mut critical: Option<Vec<Vec2>> = None;
    run_stage(out, "find-critical", |o| {
        critical = Some(find_critical(cfg, o, seed, verbosity)?);
        Ok("ok".into())
    })?;
    let points = critical.expect("critical points from a successful stage");
    run_stage(out, "residual-scan", |o| residual_scan(cfg, o, seed, verbosity, &points))?;
    run_stage(out, "branch", |o| branch(cfg, o, seed, verbosity, &points))?;
    let mut xi = Vec::with_capacity(2 * points.len());
    for p in &points {
        xi.push(p.x);
        xi.push(p.y);
    }
    out.write(
        "pipeline.json",
        &json_object(&[
            ("xi", Jv::NumList(xi)),
            ("mass_target", Jv::Num(4.0 * std::f64::consts::PI * points.len() as f64)),
            ("seed", Jv::Int(seed as i64)),
        ]),
    )?;
    Ok(())
}
