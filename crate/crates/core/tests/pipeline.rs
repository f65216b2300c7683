//! End-to-end run on a non-disk domain, exercising the numeric Green path.

use std::rc::Rc;
use todalab_core::toda::{toda_newton, TodaState};
use todalab_core::{
    Ansatz, DirichletOperator, Domain, GreenEvaluator, MeanFieldProblem, Mesh, SizeField, Vec2,
};

#[test]
fn rectangle_single_bubble_rung() {
    let domain = Domain::Rectangle { width: 2.0, height: 1.6 };
    let center = Vec2::new(1.0, 0.8);
    let lambda = 0.05;
    let mut size = SizeField::uniform(0.14);
    size.add_well(center, 0.14 / 3.0, 0.12);
    let mesh = Rc::new(Mesh::build(&domain, &size).unwrap());
    let op = Rc::new(DirichletOperator::new(mesh).unwrap());
    let green = GreenEvaluator::numeric(Rc::clone(&op));
    let problem = MeanFieldProblem::new(Rc::clone(&op), &green, &[center], 0.3).unwrap();
    let ansatz = Rc::new(Ansatz::build(&problem, &green, lambda).unwrap());
    let report = ansatz.residual_report();
    assert!(report.e_l12.is_finite() && report.e_l12 > 0.0);
    assert!((report.rho1 - 4.0 * std::f64::consts::PI).abs() < 2.0);

    let solve = toda_newton(TodaState::new(Rc::clone(&ansatz)), 1e-9, 30).unwrap();
    assert!(solve.iterations <= 15, "{} iterations", solve.iterations);
    assert!(solve.sigma_min > 0.0);
    // The solved state stays in the neighborhood of the ansatz.
    assert!(solve.state.deviation() < 5.0, "deviation {}", solve.state.deviation());
    let rho1 = todalab_core::toda::concentrating_mass(&solve.state);
    assert!((rho1 - 4.0 * std::f64::consts::PI).abs() < 2.0, "rho1 {rho1}");
    let j = todalab_core::toda::energy(&solve.state);
    assert!(j.is_finite());
}
