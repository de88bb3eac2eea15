//! Discrete generalized moment problems and their optimality certificates.
//!
//! A moment problem minimizes `∫ c dP` over probability measures `P` on a
//! finite grid that annihilate a family of test functions. Marginal,
//! multi-marginal and martingale transport are special cases. Besides the
//! LP solver the crate checks optimality combinatorially (better competitors,
//! cyclical monotonicity) and builds the quantile couplings that are optimal
//! for concave costs of a weighted sum.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common choices.

#![allow(clippy::needless_range_loop)]

pub mod constraints;
pub mod couplings;
pub mod error;
pub mod expr;
pub mod gmp;
pub mod lp;
pub mod measures;
pub mod monotonicity;
pub mod pass;
pub mod scalar;

pub use constraints::{
    evaluate_moment, martingale_family, multi_marginal_family, validate_growth_bound,
    ConstraintFamily, FunctionKind, PointTable, TestFunction,
};
pub use couplings::{
    is_monotone_set, plans_equal_on_rectangles, quantile_coupling, rectangle_mass, LevelPolicy,
    QuantilePlanSpec,
};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use gmp::{
    build_instance, solve_gmp, solve_gmp_lexicographic, verify_refined_solution, verify_solution,
    ConcaveFn, CostSpec, GmpInstance, GmpOutcome, Infeasibility, Solution,
};
pub use lp::{
    lexicographic_solve, solve_lp, verify_certificate, CertificateReport, LinearProgram, LpResult,
    LpStatus, Tolerances,
};
pub use measures::{
    convex_order, marginal, product_grid, DiscreteDistribution, DiscreteMeasure, GroundPoint,
    TransportPlan,
};
pub use monotonicity::{
    cheapest_reweighted_competitor, check_cyclical_monotone, find_better_competitor,
    is_finitely_minimal, monotone_swap, CompetitorQuery, MinimalityOptions, Verdict, VerdictStatus,
    Witness,
};
pub use pass::{
    compare_with_lp, continuum_quantile_plan, dyadic_partitions, pass_cost, phi_n, riemann_sum,
    riemann_sum_h, MarginalFamily, Partition, PassComparison,
};
pub use scalar::Scalar;

pub type Distribution = DiscreteDistribution<f64>;
pub type Measure = DiscreteMeasure<f64>;
pub type Point = GroundPoint<f64>;
pub type Plan = TransportPlan<f64>;
pub type Family = ConstraintFamily<f64>;
pub type Cost = CostSpec<f64>;
pub type Instance = GmpInstance<f64>;
pub type Lp = LinearProgram<f64>;

pub type Distribution32 = DiscreteDistribution<f32>;
pub type Measure32 = DiscreteMeasure<f32>;
pub type Point32 = GroundPoint<f32>;
pub type Plan32 = TransportPlan<f32>;
pub type Family32 = ConstraintFamily<f32>;
pub type Cost32 = CostSpec<f32>;
pub type Instance32 = GmpInstance<f32>;
pub type Lp32 = LinearProgram<f32>;
