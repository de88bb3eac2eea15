//! Time-discretized continuum-marginal problem: minimize `∫ h(∫ f dt) dP`
//! over path laws with prescribed time marginals, on dyadic time grids.
//!
//! Paths are sampled at the partition points `t_1 < … < t_N` (the left
//! endpoint `t_0 = 0` is excluded) and integrated with the right-endpoint
//! rule.

use serde::{Deserialize, Serialize};

use crate::constraints::multi_marginal_family;
use crate::couplings::{
    plans_equal_on_rectangles, quantile_coupling, LevelPolicy, QuantilePlanSpec,
};
use crate::error::{Error, Result};
use crate::gmp::{
    build_instance, solve_gmp, solve_gmp_lexicographic, ConcaveFn, CostSpec, GmpOutcome,
};
use crate::lp::Tolerances;
use crate::measures::{product_grid, DiscreteDistribution, TransportPlan};
use crate::scalar::{compensated_sum, Scalar};

/// Dense LP budget for [`compare_with_lp`], in grid points.
pub const LP_VARIABLE_BUDGET: usize = 10_000;

/// Time marginals `μ_t` of a path law on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily<T>", into = "RawFamily<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct MarginalFamily<T> {
    times: Vec<T>,
    marginals: Vec<DiscreteDistribution<T>>,
    horizon: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
struct RawFamily<T> {
    times: Vec<T>,
    marginals: Vec<DiscreteDistribution<T>>,
    horizon: T,
}

impl<T: Scalar> TryFrom<RawFamily<T>> for MarginalFamily<T> {
    type Error = Error;

    fn try_from(r: RawFamily<T>) -> Result<Self> {
        MarginalFamily::new(r.times, r.marginals, r.horizon)
    }
}

impl<T: Scalar> From<MarginalFamily<T>> for RawFamily<T> {
    fn from(f: MarginalFamily<T>) -> Self {
        RawFamily {
            times: f.times,
            marginals: f.marginals,
            horizon: f.horizon,
        }
    }
}

impl<T: Scalar> MarginalFamily<T> {
    pub fn new(times: Vec<T>, marginals: Vec<DiscreteDistribution<T>>, horizon: T) -> Result<Self> {
        if !horizon.is_finite() || horizon <= T::zero() {
            return Err(Error::Domain(format!("horizon {horizon} must be positive")));
        }
        if times.len() != marginals.len() {
            return Err(Error::Domain(format!(
                "{} times but {} marginals",
                times.len(),
                marginals.len()
            )));
        }
        if times.iter().any(|&t| !(t >= T::zero() && t <= horizon)) {
            return Err(Error::Domain(format!("times must lie in [0, {horizon}]")));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("times must be strictly increasing".into()));
        }
        Ok(MarginalFamily {
            times,
            marginals,
            horizon,
        })
    }

    /// `μ_t` = law of `t · X` at every point of `part`, for `X ~ base`.
    pub fn scaled(base: &DiscreteDistribution<T>, part: &Partition<T>) -> Result<Self> {
        let marginals = part
            .points()
            .iter()
            .map(|&t| {
                DiscreteDistribution::new(
                    base.atoms().iter().map(|&a| t * a).collect(),
                    base.weights().to_vec(),
                )
            })
            .collect::<Result<_>>()?;
        MarginalFamily::new(part.points().to_vec(), marginals, part.horizon())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn marginals(&self) -> &[DiscreteDistribution<T>] {
        &self.marginals
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// The marginal at time `t`, matched up to round-off.
    pub fn marginal_at(&self, t: T) -> Option<&DiscreteDistribution<T>> {
        let tol = T::merge_tol() * self.horizon.max(T::one());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| &self.marginals[i])
    }

    /// Marginals at `t_1, …, t_N` of the partition.
    pub fn marginals_on(&self, part: &Partition<T>) -> Result<Vec<DiscreteDistribution<T>>> {
        part.sample_times()
            .iter()
            .map(|&t| {
                self.marginal_at(t).cloned().ok_or_else(|| {
                    Error::Instance(format!("no marginal given at partition time {t}"))
                })
            })
            .collect()
    }
}

/// `0 = t_0 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct Partition<T> {
    points: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<T>> for Partition<T> {
    type Error = Error;

    fn try_from(points: Vec<T>) -> Result<Self> {
        Partition::new(points)
    }
}

impl<T: Scalar> From<Partition<T>> for Vec<T> {
    fn from(p: Partition<T>) -> Self {
        p.points
    }
}

impl<T: Scalar> Partition<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain(
                "a partition needs at least two points".into(),
            ));
        }
        if points[0] != T::zero() {
            return Err(Error::Domain("a partition starts at 0".into()));
        }
        if points.iter().any(|t| !t.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "partition points must be finite and strictly increasing".into(),
            ));
        }
        Ok(Partition { points })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn horizon(&self) -> T {
        self.points[self.points.len() - 1]
    }

    /// Number of intervals `N`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `t_1, …, t_N`.
    pub fn sample_times(&self) -> &[T] {
        &self.points[1..]
    }

    /// `t_i - t_{i-1}` for `i = 1..N`.
    pub fn increments(&self) -> Vec<T> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Whether every point of `self` is a point of `finer`.
    pub fn is_refined_by(&self, finer: &Partition<T>) -> bool {
        self.points.iter().all(|t| finer.points.contains(t))
    }
}

/// `{k T / 2ⁿ : k = 0..2ⁿ}`. Division by a power of two is exact, so the
/// partitions are nested in floating point as well.
pub fn dyadic_partitions<T: Scalar>(horizon: T, n: u32) -> Result<Partition<T>> {
    if !horizon.is_finite() || horizon <= T::zero() {
        return Err(Error::Domain(format!("horizon {horizon} must be positive")));
    }
    if n > 30 {
        return Err(Error::Domain(format!("dyadic depth {n} is too large")));
    }
    let count = 1usize << n;
    let scale = T::lit(2.0).powi(n as i32);
    let points = (0..=count)
        .map(|k| T::from_usize_lossy(k) * horizon / scale)
        .collect();
    Partition::new(points)
}

fn check_path<T: Scalar>(path: &[T], part: &Partition<T>) -> Result<()> {
    if path.len() != part.len() {
        return Err(Error::Domain(format!(
            "path has {} samples but the partition has {} intervals",
            path.len(),
            part.len()
        )));
    }
    Ok(())
}

/// `Σ_i f(t_i) (t_i - t_{i-1})`.
pub fn riemann_sum<T: Scalar>(path: &[T], part: &Partition<T>) -> Result<T> {
    check_path(path, part)?;
    Ok(compensated_sum(
        path.iter().zip(part.increments()).map(|(&f, dt)| f * dt),
    ))
}

/// `Σ_i h(f(t_i)) (t_i - t_{i-1})`.
pub fn riemann_sum_h<T: Scalar>(path: &[T], part: &Partition<T>, h: &ConcaveFn<T>) -> Result<T> {
    check_path(path, part)?;
    let terms: Result<Vec<T>> = path
        .iter()
        .zip(part.increments())
        .map(|(&f, dt)| Ok(h.eval(f)? * dt))
        .collect();
    Ok(compensated_sum(terms?))
}

/// `max_k s_k(f)` over the given nested partitions `P_n ⊆ … ⊆ P_N`, with
/// the path sampled on the finest one `P_N`.
pub fn phi_n<T: Scalar>(path: &[T], partitions: &[Partition<T>]) -> Result<T> {
    let Some(finest) = partitions.last() else {
        return Err(Error::Domain("phi_n needs at least one partition".into()));
    };
    check_path(path, finest)?;
    let times = finest.sample_times();
    let mut best = T::neg_infinity();
    for part in partitions {
        let restricted: Vec<T> = part
            .sample_times()
            .iter()
            .map(|t| {
                times
                    .iter()
                    .position(|s| s == t)
                    .map(|i| path[i])
                    .ok_or_else(|| {
                        Error::Domain(format!("time {t} is not a point of the finest partition"))
                    })
            })
            .collect::<Result<_>>()?;
        best = best.max(riemann_sum(&restricted, part)?);
    }
    Ok(best)
}

/// Quantile paths `(q_{t_1}(u), …, q_{t_N}(u))` at the levels of `policy`.
pub fn continuum_quantile_plan<T: Scalar>(
    fam: &MarginalFamily<T>,
    part: &Partition<T>,
    policy: LevelPolicy,
) -> Result<TransportPlan<T>> {
    let marginals = fam.marginals_on(part)?;
    Ok(quantile_coupling(&QuantilePlanSpec::with_policy(
        marginals, policy,
    )?))
}

/// `Σ_paths mass · h(s(path))`.
pub fn pass_cost<T: Scalar>(
    plan: &TransportPlan<T>,
    part: &Partition<T>,
    h: &ConcaveFn<T>,
) -> Result<T> {
    let terms: Result<Vec<T>> = plan
        .iter()
        .map(|(path, m)| Ok(m * h.eval(riemann_sum(path.coords(), part)?)?))
        .collect();
    Ok(compensated_sum(terms?))
}

/// The pass cost as a grid cost `h(Σ Δ_i z_i)`.
pub fn pass_cost_spec<T: Scalar>(part: &Partition<T>, h: ConcaveFn<T>) -> CostSpec<T> {
    CostSpec::concave_of_sum(h, part.increments())
}

/// Quantile plan against the LP optimum on one time grid.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct PassComparison<T> {
    pub variables: usize,
    pub lp_objective: T,
    pub pi_star_cost: T,
    /// `|lp_objective - pi_star_cost|`.
    pub gap: T,
    /// Whether the LP plan equals the quantile plan on all rectangles.
    pub rectangles_equal: bool,
    pub strictly_concave: bool,
    /// For non-strictly concave `h`: whether refining the tie with `-s²`
    /// recovers the quantile plan.
    pub refined_rectangles_equal: Option<bool>,
    pub certificate_passed: bool,
    pub lp_plan: TransportPlan<T>,
}

/// Builds the multi-marginal grid instance with cost `h(Σ Δ_i z_i)`, solves
/// it and compares the optimum with the breakpoint quantile plan.
pub fn compare_with_lp<T: Scalar>(
    fam: &MarginalFamily<T>,
    part: &Partition<T>,
    h: ConcaveFn<T>,
    tol: &Tolerances<T>,
) -> Result<PassComparison<T>> {
    let marginals = fam.marginals_on(part)?;
    let variables = marginals
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(d.len()))
        .unwrap_or(usize::MAX);
    if variables > LP_VARIABLE_BUDGET {
        let mut coarser = part.len();
        let mut count = variables;
        while count > LP_VARIABLE_BUDGET && coarser > 1 {
            coarser /= 2;
            let atoms = marginals.iter().map(|d| d.len()).max().unwrap_or(1);
            count = atoms.checked_pow(coarser as u32).unwrap_or(usize::MAX);
        }
        return Err(Error::Budget {
            variables,
            budget: LP_VARIABLE_BUDGET,
            suggestion: format!("use a partition with at most {coarser} intervals"),
        });
    }

    let grid = product_grid(&marginals);
    let family = multi_marginal_family(&marginals, &grid)?;
    let cost = pass_cost_spec(part, h);
    let instance = build_instance(grid, cost, family)?;
    let solution = match solve_gmp(&instance, tol)? {
        GmpOutcome::Optimal(s) => s,
        GmpOutcome::Infeasible(_) => {
            return Err(Error::Internal(
                "product-grid marginal problem reported infeasible".into(),
            ))
        }
    };

    let pi_star = quantile_coupling(&QuantilePlanSpec::new(marginals)?);
    let pi_star_cost = pass_cost(&pi_star, part, &h)?;
    let rect_tol = T::lit(1e-8).max(T::default_tol());
    let strictly_concave = h.is_strictly_concave();
    let refined_rectangles_equal = if strictly_concave {
        None
    } else {
        let refinement = pass_cost_spec(part, ConcaveFn::NegSquare);
        match solve_gmp_lexicographic(&instance, &[refinement], tol)? {
            GmpOutcome::Optimal(r) => Some(plans_equal_on_rectangles(&r.plan, &pi_star, rect_tol)),
            GmpOutcome::Infeasible(_) => Some(false),
        }
    };

    Ok(PassComparison {
        variables,
        lp_objective: solution.objective,
        pi_star_cost,
        gap: (solution.objective - pi_star_cost).abs(),
        rectangles_equal: plans_equal_on_rectangles(&solution.plan, &pi_star, rect_tol),
        strictly_concave,
        refined_rectangles_equal,
        certificate_passed: solution.certificate.passed,
        lp_plan: solution.plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{marginal, DiscreteMeasure, GroundPoint};

    fn part(points: &[f64]) -> Partition<f64> {
        Partition::new(points.to_vec()).unwrap()
    }

    fn uniform(atoms: &[f64]) -> DiscreteDistribution<f64> {
        DiscreteDistribution::uniform(atoms.to_vec()).unwrap()
    }

    #[test]
    fn dyadic_partitions_examples() {
        assert_eq!(dyadic_partitions(1.0, 0).unwrap().points(), &[0.0, 1.0]);
        assert_eq!(
            dyadic_partitions(1.0, 1).unwrap().points(),
            &[0.0, 0.5, 1.0]
        );
        assert_eq!(dyadic_partitions(1.0, 2).unwrap().points().len(), 5);
        for n in 0..8 {
            let a = dyadic_partitions(3.0, n).unwrap();
            let b = dyadic_partitions(3.0, n + 1).unwrap();
            assert!(a.is_refined_by(&b));
            assert_eq!(b.horizon(), 3.0);
        }
        assert!(dyadic_partitions(0.0, 1).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 1.0, 1.0]).is_err());
        let p: Partition<f64> = serde_json::from_str("[0, 0.5, 1]").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.sample_times(), &[0.5, 1.0]);
    }

    #[test]
    fn riemann_sum_examples() {
        assert_eq!(
            riemann_sum(&[1.0; 4], &dyadic_partitions(1.0, 2).unwrap()).unwrap(),
            1.0
        );
        assert_eq!(
            riemann_sum(&[0.0, 1.0], &part(&[0.0, 0.5, 1.0])).unwrap(),
            0.5
        );
        assert_eq!(
            riemann_sum(&[0.0, 0.0], &part(&[0.0, 0.5, 1.0])).unwrap(),
            0.0
        );
        assert!(riemann_sum(&[1.0], &part(&[0.0, 0.5, 1.0])).is_err());
    }

    #[test]
    fn riemann_sum_h_examples() {
        let h = ConcaveFn::NegSquare;
        assert_eq!(
            riemann_sum_h(&[2.0, 2.0], &part(&[0.0, 0.5, 1.0]), &h).unwrap(),
            -4.0
        );
        assert_eq!(
            riemann_sum_h(&[0.0, 0.0], &part(&[0.0, 0.5, 1.0]), &h).unwrap(),
            0.0
        );
        assert_eq!(
            riemann_sum_h(&[0.0, 1.0], &part(&[0.0, 0.5, 1.0]), &h).unwrap(),
            -0.5
        );
    }

    #[test]
    fn phi_n_examples() {
        let parts: Vec<_> = (0..3).map(|n| dyadic_partitions(1.0, n).unwrap()).collect();
        assert_eq!(phi_n(&[3.0; 4], &parts).unwrap(), 3.0);
        // f(t) = t: s_k = 1/2 + 2^-(k+1), largest on the coarsest grid
        let path = [0.25, 0.5, 0.75, 1.0];
        assert_eq!(phi_n(&path, &parts).unwrap(), 1.0);
        assert_eq!(phi_n(&path, &parts[2..]).unwrap(), 0.625);
        // f(t) = 1 - t: sums increase with refinement, max is s_N
        let path = [0.75, 0.5, 0.25, 0.0];
        assert_eq!(phi_n(&path, &parts).unwrap(), 0.375);
        assert!(phi_n(&path, &[]).is_err());
        assert!(phi_n(
            &[1.0, 1.0, 1.0],
            &[part(&[0.0, 0.3, 1.0]), part(&[0.0, 0.5, 0.7, 1.0])]
        )
        .is_err());
    }

    #[test]
    fn continuum_plan_examples() {
        let fam = MarginalFamily::new(
            vec![0.5, 1.0],
            vec![uniform(&[0.0, 0.5]), uniform(&[0.0, 1.0])],
            1.0,
        )
        .unwrap();
        let p = part(&[0.0, 0.5, 1.0]);
        let plan = continuum_quantile_plan(&fam, &p, LevelPolicy::Stratified(2)).unwrap();
        let expected = DiscreteMeasure::new(
            vec![GroundPoint(vec![0.0, 0.0]), GroundPoint(vec![0.5, 1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(plan, expected);
        assert_eq!(
            pass_cost(&plan, &p, &ConcaveFn::NegSquare).unwrap(),
            -9.0 / 32.0
        );

        let single = MarginalFamily::new(vec![1.0], vec![uniform(&[2.0])], 1.0).unwrap();
        let trivial =
            continuum_quantile_plan(&single, &part(&[0.0, 1.0]), LevelPolicy::Breakpoints).unwrap();
        assert_eq!(trivial.points(), &[GroundPoint(vec![2.0])]);
        assert_eq!(
            pass_cost(&trivial, &part(&[0.0, 1.0]), &ConcaveFn::NegSquare).unwrap(),
            -4.0
        );

        let missing = part(&[0.0, 0.25, 1.0]);
        assert!(matches!(
            continuum_quantile_plan(&fam, &missing, LevelPolicy::Breakpoints),
            Err(Error::Instance(_))
        ));
    }

    #[test]
    fn identical_marginals_give_constant_paths() {
        let p = dyadic_partitions(1.0, 2).unwrap();
        let mu = uniform(&[-1.0, 0.0, 4.0]);
        let fam = MarginalFamily::new(p.points().to_vec(), vec![mu; 5], 1.0).unwrap();
        let plan = continuum_quantile_plan(&fam, &p, LevelPolicy::Breakpoints).unwrap();
        assert!(plan
            .points()
            .iter()
            .all(|z| z.0.iter().all(|&v| v == z.0[0])));
        let cmp = compare_with_lp(&fam, &p, ConcaveFn::NegSquare, &Tolerances::default()).unwrap();
        assert!(cmp.gap < 1e-10);
        assert!(cmp.rectangles_equal);
    }

    #[test]
    fn lp_comparison_two_times() {
        let fam = MarginalFamily::new(
            vec![0.5, 1.0],
            vec![
                DiscreteDistribution::new(vec![0.0, 3.0], vec![0.3, 0.7]).unwrap(),
                uniform(&[-1.0, 2.0]),
            ],
            1.0,
        )
        .unwrap();
        let p = part(&[0.0, 0.5, 1.0]);
        let cmp = compare_with_lp(&fam, &p, ConcaveFn::NegSquare, &Tolerances::default()).unwrap();
        assert!(cmp.gap <= 1e-8, "{}", cmp.gap);
        assert!(cmp.rectangles_equal);
        assert!(cmp.certificate_passed);
        assert_eq!(cmp.variables, 4);
    }

    #[test]
    fn affine_h_ties_and_refinement_recovers_pi_star() {
        let fam = MarginalFamily::new(
            vec![0.5, 1.0],
            vec![uniform(&[0.0, 1.0]), uniform(&[0.0, 2.0])],
            1.0,
        )
        .unwrap();
        let p = part(&[0.0, 0.5, 1.0]);
        let cmp = compare_with_lp(
            &fam,
            &p,
            ConcaveFn::Affine(1.0, 0.0),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(cmp.gap < 1e-12);
        assert!(!cmp.strictly_concave);
        assert_eq!(cmp.refined_rectangles_equal, Some(true));
    }

    #[test]
    fn budget_is_enforced() {
        let p = dyadic_partitions(1.0, 4).unwrap();
        let fam = MarginalFamily::scaled(&uniform(&[0.0, 1.0, 2.0]), &p).unwrap();
        match compare_with_lp(&fam, &p, ConcaveFn::NegSquare, &Tolerances::default()) {
            Err(Error::Budget {
                variables,
                budget,
                suggestion,
            }) => {
                assert_eq!(variables, 3usize.pow(16));
                assert_eq!(budget, LP_VARIABLE_BUDGET);
                assert!(suggestion.contains("8"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaled_family_has_closed_form_cost() {
        // paths t·X with X uniform on {0,1,2}: s_n = X (1/2 + 2^-(n+1))
        let base = uniform(&[0.0, 1.0, 2.0]);
        for n in 0..6 {
            let p = dyadic_partitions(1.0, n).unwrap();
            let fam = MarginalFamily::scaled(&base, &p).unwrap();
            let plan = continuum_quantile_plan(&fam, &p, LevelPolicy::Stratified(3)).unwrap();
            let s = 0.5 + 0.5f64.powi(n as i32 + 1);
            let want = -(5.0 / 3.0) * s * s;
            assert!((pass_cost(&plan, &p, &ConcaveFn::NegSquare).unwrap() - want).abs() < 1e-12);
            for (axis, &t) in p.sample_times().iter().enumerate() {
                assert_eq!(
                    marginal(&plan, axis).unwrap().0,
                    *fam.marginal_at(t).unwrap()
                );
            }
        }
    }

    #[test]
    fn family_json_round_trip() {
        let fam = MarginalFamily::new(
            vec![0.5, 1.0],
            vec![uniform(&[0.0, 0.5]), uniform(&[0.0, 1.0])],
            1.0,
        )
        .unwrap();
        let back: MarginalFamily<f64> =
            serde_json::from_str(&serde_json::to_string(&fam).unwrap()).unwrap();
        assert_eq!(back, fam);
        assert!(serde_json::from_str::<MarginalFamily<f64>>(
            r#"{"times": [1, 0.5], "marginals": [{"atoms":[0],"weights":[1]},{"atoms":[0],"weights":[1]}], "horizon": 1}"#
        )
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_n_is_nonincreasing_in_n(path in prop::collection::vec(-5.0f64..5.0, 16)) {
                let parts: Vec<_> = (0..5).map(|n| dyadic_partitions(1.0, n).unwrap()).collect();
                let mut prev = f64::INFINITY;
                for n in 0..5 {
                    let v = phi_n(&path, &parts[n..]).unwrap();
                    prop_assert!(v <= prev);
                    prev = v;
                }
            }

            #[test]
            fn riemann_sum_is_linear(
                a in prop::collection::vec(-5.0f64..5.0, 8),
                b in prop::collection::vec(-5.0f64..5.0, 8),
                lambda in -3.0f64..3.0,
            ) {
                let p = dyadic_partitions(2.0, 3).unwrap();
                let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + lambda * y).collect();
                let lhs = riemann_sum(&combo, &p).unwrap();
                let rhs = riemann_sum(&a, &p).unwrap() + lambda * riemann_sum(&b, &p).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }

            #[test]
            fn breakpoint_plan_has_exact_time_marginals(
                raw in prop::collection::vec(prop::collection::vec((-5i32..5, 1u32..4), 1..4), 4),
            ) {
                let p = dyadic_partitions(1.0, 2).unwrap();
                let mut marginals = vec![DiscreteDistribution::point_mass(0.0)];
                for atoms in raw {
                    let (a, w): (Vec<f64>, Vec<f64>) = atoms.into_iter().map(|(a, w)| (a as f64, w as f64)).unzip();
                    marginals.push(DiscreteDistribution::from_unnormalized(a, w).unwrap());
                }
                let fam = MarginalFamily::new(p.points().to_vec(), marginals, 1.0).unwrap();
                let plan = continuum_quantile_plan(&fam, &p, LevelPolicy::Breakpoints).unwrap();
                for (axis, &t) in p.sample_times().iter().enumerate() {
                    let (got, _) = marginal(&plan, axis).unwrap();
                    let want = fam.marginal_at(t).unwrap();
                    prop_assert_eq!(got.atoms(), want.atoms());
                    for (x, y) in got.weights().iter().zip(want.weights()) {
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
