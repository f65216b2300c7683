use todalab_core::{Domain, ReducedEnergy, Vec2};

fn main() {
    for (sx, sy) in [(0.3, 0.0), (0.05, 0.02), (-0.147, 0.053)] {
        let re = ReducedEnergy::new(Domain::UnitDisk, 0.5)
            .expect("reduced energy")
            .with_mesh_size(0.08);
        let t = std::time::Instant::now();
        match re.find_critical_from(&[Vec2::new(sx, sy)]) {
            Ok(cp) => println!(
                "start ({sx:+.3}, {sy:+.3}) -> |xi*| {:.2e}, grad {:.2e}, {:?}, iters {}, {:.1}s",
                cp.points[0].norm(),
                cp.grad_norm,
                cp.classification,
                cp.iterations,
                t.elapsed().as_secs_f64()
            ),
            Err(e) => println!("start ({sx:+.3}, {sy:+.3}) -> {e} [{:.1}s]", t.elapsed().as_secs_f64()),
        }
    }
}
