//! Numerical laboratory for coupled Liouville-type mean field systems on
//! planar domains: P1 finite elements on graded triangulations, Dirichlet
//! Green functions, a singular mean field solver, reduced-energy landscapes
//! over concentration points, bubble ansatz diagnostics, and Newton
//! continuation of the coupled system down a ladder of coupling strengths.

pub mod error;
pub mod geometry;
pub mod quad;
pub mod mesh;
pub mod field;
pub mod sparse;
pub mod elliptic;
pub mod green;
pub mod meanfield;
pub mod fitting;
pub mod reduced;
pub mod ansatz;
pub mod toda;

pub use error::{CoreError, Result};
pub use geometry::{Domain, Vec2};
pub use mesh::{Mesh, PointLocation, SizeField};
pub use field::ScalarField;
pub use elliptic::DirichletOperator;
pub use green::GreenEvaluator;
pub use meanfield::{MeanFieldProblem, MeanFieldSolution, NondegeneracyReport};
pub use reduced::{Classification, CriticalPoint, EvalContext, LambdaBreakdown, ReducedEnergy};
pub use ansatz::{Ansatz, ProjectedBubble, ResidualReport, ScalingRow, ScalingStudy};
pub use toda::{BranchResult, BranchRow, TodaParams, TodaSolve, TodaState};
