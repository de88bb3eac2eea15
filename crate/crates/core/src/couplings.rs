//! Quantile (comonotone) couplings and rectangle-mass comparison of plans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    cartesian, sorted_unique, DiscreteDistribution, DiscreteMeasure, GroundPoint, TransportPlan,
};
use crate::scalar::{compensated_sum, Scalar};

/// Marginals together with the quantile levels at which they are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec<T>", into = "RawSpec<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct QuantilePlanSpec<T> {
    marginals: Vec<DiscreteDistribution<T>>,
    levels: Vec<T>,
    weights: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
struct RawSpec<T> {
    marginals: Vec<DiscreteDistribution<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<T>>,
}

impl<T: Scalar> TryFrom<RawSpec<T>> for QuantilePlanSpec<T> {
    type Error = Error;

    fn try_from(raw: RawSpec<T>) -> Result<Self> {
        match (raw.levels, raw.weights) {
            (None, None) => QuantilePlanSpec::new(raw.marginals),
            (Some(levels), None) => {
                let m = levels.len();
                let w = vec![T::one() / T::from_usize_lossy(m.max(1)); m];
                QuantilePlanSpec::with_levels(raw.marginals, levels, w)
            }
            (Some(levels), Some(weights)) => {
                QuantilePlanSpec::with_levels(raw.marginals, levels, weights)
            }
            (None, Some(_)) => Err(Error::Domain("weights given without levels".into())),
        }
    }
}

impl<T: Scalar> From<QuantilePlanSpec<T>> for RawSpec<T> {
    fn from(s: QuantilePlanSpec<T>) -> Self {
        RawSpec {
            marginals: s.marginals,
            levels: Some(s.levels),
            weights: Some(s.weights),
        }
    }
}

/// How quantile levels are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelPolicy {
    /// Midpoints between consecutive breakpoints of all marginal CDFs.
    Breakpoints,
    /// `u_k = (2k - 1) / 2m`, each with weight `1/m`.
    Stratified(usize),
}

fn check_marginals<T: Scalar>(marginals: &[DiscreteDistribution<T>]) -> Result<()> {
    if marginals.is_empty() {
        return Err(Error::Domain(
            "a quantile coupling needs at least one marginal".into(),
        ));
    }
    Ok(())
}

impl<T: Scalar> QuantilePlanSpec<T> {
    /// Levels at the midpoints of the union of the marginals' CDF
    /// breakpoints, weighted by the interval lengths. Every quantile function
    /// is constant between breakpoints, so the coupling has exact marginals.
    pub fn new(marginals: Vec<DiscreteDistribution<T>>) -> Result<Self> {
        check_marginals(&marginals)?;
        let mut cuts = sorted_unique(
            marginals
                .iter()
                .flat_map(|d| d.cumulative())
                .filter(|&c| c > T::merge_tol() && c < T::one() - T::merge_tol()),
        );
        cuts.dedup_by(|a, b| (*a - *b).abs() <= T::merge_tol());
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(T::zero());
        bounds.extend(cuts);
        bounds.push(T::one());
        let half = T::lit(0.5);
        let levels = bounds.windows(2).map(|w| (w[0] + w[1]) * half).collect();
        let weights = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(QuantilePlanSpec {
            marginals,
            levels,
            weights,
        })
    }

    /// `m` stratified midpoints `(2k - 1) / 2m` with weights `1/m`.
    pub fn stratified(marginals: Vec<DiscreteDistribution<T>>, m: usize) -> Result<Self> {
        check_marginals(&marginals)?;
        if m == 0 {
            return Err(Error::Domain("level count must be positive".into()));
        }
        let mm = T::from_usize_lossy(m);
        let two = T::lit(2.0);
        let levels = (1..=m)
            .map(|k| (two * T::from_usize_lossy(k) - T::one()) / (two * mm))
            .collect();
        Ok(QuantilePlanSpec {
            marginals,
            levels,
            weights: vec![T::one() / mm; m],
        })
    }

    pub fn with_policy(
        marginals: Vec<DiscreteDistribution<T>>,
        policy: LevelPolicy,
    ) -> Result<Self> {
        match policy {
            LevelPolicy::Breakpoints => Self::new(marginals),
            LevelPolicy::Stratified(m) => Self::stratified(marginals, m),
        }
    }

    /// Explicit levels in `(0, 1)`, strictly increasing, with positive
    /// weights summing to one.
    pub fn with_levels(
        marginals: Vec<DiscreteDistribution<T>>,
        levels: Vec<T>,
        weights: Vec<T>,
    ) -> Result<Self> {
        check_marginals(&marginals)?;
        if levels.is_empty() || levels.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} levels and {} weights",
                levels.len(),
                weights.len()
            )));
        }
        if levels.iter().any(|&u| !(u > T::zero() && u < T::one())) {
            return Err(Error::Domain("levels must lie in (0, 1)".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("levels must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w <= T::zero()) {
            return Err(Error::Domain("level weights must be positive".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - T::one()).abs() > T::default_tol() {
            return Err(Error::Domain(format!(
                "level weights sum to {total}, not 1"
            )));
        }
        Ok(QuantilePlanSpec {
            marginals,
            levels,
            weights,
        })
    }

    pub fn marginals(&self) -> &[DiscreteDistribution<T>] {
        &self.marginals
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// `Σ_k w_k δ_(q_1(u_k), …, q_n(u_k))` with coinciding atoms merged.
pub fn quantile_coupling<T: Scalar>(spec: &QuantilePlanSpec<T>) -> TransportPlan<T> {
    let points = spec
        .levels
        .iter()
        .map(|&u| {
            GroundPoint(
                spec.marginals
                    .iter()
                    .map(|d| d.quantile(u).expect("levels lie in (0, 1)"))
                    .collect(),
            )
        })
        .collect();
    DiscreteMeasure::with_dim(spec.marginals.len(), points, spec.weights.clone())
        .expect("quantile paths are finite and weights positive")
}

/// Whether the points form a chain for the componentwise order.
pub fn is_monotone_set<T: Scalar>(points: &[GroundPoint<T>]) -> bool {
    let Some(first) = points.first() else {
        return true;
    };
    if points.iter().any(|p| p.dim() != first.dim()) {
        return false;
    }
    let mut sorted: Vec<&GroundPoint<T>> = points.iter().collect();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    sorted.windows(2).all(|w| w[0].le(w[1]))
}

/// Mass of the atoms `z` with `z ≤ a` componentwise.
pub fn rectangle_mass<T: Scalar>(plan: &TransportPlan<T>, a: &GroundPoint<T>) -> T {
    debug_assert_eq!(plan.dim(), a.dim());
    compensated_sum(plan.iter().filter(|(z, _)| z.le(a)).map(|(_, m)| m))
}

/// Above this many corners the comparison falls back to atom masses, which
/// determine the same equality on finite supports.
const CORNER_LIMIT: usize = 200_000;

/// Compares the two plans on every lower orthant whose corner is built from
/// the per-axis union of atom coordinates.
pub fn plans_equal_on_rectangles<T: Scalar>(
    p1: &TransportPlan<T>,
    p2: &TransportPlan<T>,
    tol: T,
) -> bool {
    if p1.dim() != p2.dim() {
        return false;
    }
    let axes: Vec<Vec<T>> = (0..p1.dim())
        .map(|axis| sorted_unique(p1.points().iter().chain(p2.points()).map(|p| p.coord(axis))))
        .collect();
    let corners = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len().max(1)));
    match corners {
        Some(c) if c <= CORNER_LIMIT => cartesian(&axes)
            .iter()
            .all(|a| (rectangle_mass(p1, a) - rectangle_mass(p2, a)).abs() <= tol),
        _ => {
            p1.points()
                .iter()
                .all(|z| (p1.mass_at(z) - p2.mass_at(z)).abs() <= tol)
                && p2
                    .points()
                    .iter()
                    .all(|z| (p1.mass_at(z) - p2.mass_at(z)).abs() <= tol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::multi_marginal_family;
    use crate::gmp::{build_instance, solve_gmp, ConcaveFn, CostSpec};
    use crate::lp::Tolerances;
    use crate::measures::{marginal, product_grid};

    fn d(atoms: &[f64], weights: &[f64]) -> DiscreteDistribution<f64> {
        DiscreteDistribution::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    fn pt(c: &[f64]) -> GroundPoint<f64> {
        GroundPoint(c.to_vec())
    }

    fn plan(points: &[&[f64]], masses: &[f64]) -> TransportPlan<f64> {
        DiscreteMeasure::new(points.iter().map(|p| pt(p)).collect(), masses.to_vec()).unwrap()
    }

    #[test]
    fn identical_marginals_give_the_diagonal() {
        let mu = d(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let p = quantile_coupling(&QuantilePlanSpec::new(vec![mu.clone(), mu]).unwrap());
        assert!(p.points().iter().all(|z| z.0[0] == z.0[1]));
        for (got, want) in p.masses().iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_marginals_at_quartiles() {
        let spec = QuantilePlanSpec::with_levels(
            vec![d(&[0.0, 1.0], &[0.5, 0.5]), d(&[0.0, 2.0], &[0.5, 0.5])],
            vec![0.25, 0.75],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            quantile_coupling(&spec),
            plan(&[&[0.0, 0.0], &[1.0, 2.0]], &[0.5, 0.5])
        );
    }

    #[test]
    fn three_uniform_binary_marginals() {
        let b = d(&[0.0, 1.0], &[0.5, 0.5]);
        let spec = QuantilePlanSpec::stratified(vec![b.clone(), b.clone(), b], 2).unwrap();
        assert_eq!(
            quantile_coupling(&spec),
            plan(&[&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]], &[0.5, 0.5])
        );
    }

    #[test]
    fn breakpoint_levels_for_uniform_marginals_are_stratified() {
        let u = d(&[0.0, 1.0, 2.0, 5.0], &[0.25; 4]);
        let a = QuantilePlanSpec::new(vec![u.clone(), u.clone()]).unwrap();
        let b = QuantilePlanSpec::stratified(vec![u.clone(), u], 4).unwrap();
        assert_eq!(a.levels(), b.levels());
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn spec_validation() {
        let b = d(&[0.0, 1.0], &[0.5, 0.5]);
        assert!(QuantilePlanSpec::<f64>::new(vec![]).is_err());
        assert!(QuantilePlanSpec::stratified(vec![b.clone()], 0).is_err());
        assert!(
            QuantilePlanSpec::with_levels(vec![b.clone()], vec![0.5, 0.25], vec![0.5, 0.5])
                .is_err()
        );
        assert!(QuantilePlanSpec::with_levels(vec![b.clone()], vec![0.0], vec![1.0]).is_err());
        assert!(QuantilePlanSpec::with_levels(vec![b], vec![0.25, 0.75], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn spec_json_defaults_to_breakpoints() {
        let spec: QuantilePlanSpec<f64> =
            serde_json::from_str(r#"{"marginals": [{"atoms": [0, 1], "weights": [0.25, 0.75]}]}"#)
                .unwrap();
        assert_eq!(spec.levels(), &[0.125, 0.625]);
        let back: QuantilePlanSpec<f64> =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn monotone_set_examples() {
        assert!(is_monotone_set(&[
            pt(&[0.0, 0.0]),
            pt(&[2.0, 5.0]),
            pt(&[1.0, 1.0])
        ]));
        assert!(!is_monotone_set(&[pt(&[0.0, 1.0]), pt(&[1.0, 0.0])]));
        assert!(is_monotone_set(&[pt(&[3.0, -1.0])]));
        assert!(is_monotone_set::<f64>(&[]));
        assert!(is_monotone_set(&[pt(&[0.0, 0.0]), pt(&[0.0, 1.0])]));
    }

    #[test]
    fn rectangle_mass_examples() {
        let diag = plan(&[&[0.0, 0.0], &[1.0, 1.0]], &[0.5, 0.5]);
        assert_eq!(rectangle_mass(&diag, &pt(&[-1.0, -1.0])), 0.0);
        assert_eq!(rectangle_mass(&diag, &pt(&[9.0, 9.0])), 1.0);
        assert_eq!(rectangle_mass(&diag, &pt(&[0.0, 5.0])), 0.5);
    }

    #[test]
    fn rectangle_equality_examples() {
        let diag = plan(&[&[0.0, 0.0], &[1.0, 1.0]], &[0.5, 0.5]);
        let anti = plan(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.5, 0.5]);
        assert!(plans_equal_on_rectangles(&diag, &diag, 1e-12));
        assert!(!plans_equal_on_rectangles(&diag, &anti, 1e-12));
        let split = plan(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]], &[0.25, 0.25, 0.5]);
        assert!(plans_equal_on_rectangles(&diag, &split, 1e-12));
        assert!(!plans_equal_on_rectangles(
            &diag,
            &DiscreteMeasure::empty(3),
            1e-12
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn marginal_strategy(max_atoms: usize) -> impl Strategy<Value = DiscreteDistribution<f64>> {
            prop::collection::btree_set(-20i32..20, 1..=max_atoms).prop_flat_map(|atoms| {
                let n = atoms.len();
                (Just(atoms), prop::collection::vec(1u32..8, n)).prop_map(|(atoms, w)| {
                    DiscreteDistribution::from_unnormalized(
                        atoms.into_iter().map(f64::from).collect(),
                        w.into_iter().map(f64::from).collect(),
                    )
                    .unwrap()
                })
            })
        }

        fn uniform_strategy() -> impl Strategy<Value = Vec<DiscreteDistribution<f64>>> {
            (1usize..=5, 1usize..=4).prop_flat_map(|(m, n)| {
                prop::collection::vec(prop::collection::btree_set(-20i32..20, m..=m), n).prop_map(
                    |sets| {
                        sets.into_iter()
                            .map(|s| {
                                DiscreteDistribution::uniform(
                                    s.into_iter().map(f64::from).collect(),
                                )
                                .unwrap()
                            })
                            .collect()
                    },
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn stratified_levels_reproduce_uniform_marginals(mus in uniform_strategy()) {
                let m = mus[0].len();
                let p = quantile_coupling(&QuantilePlanSpec::stratified(mus.clone(), m).unwrap());
                for (axis, mu) in mus.iter().enumerate() {
                    let (got, _) = marginal(&p, axis).unwrap();
                    prop_assert_eq!(got.atoms(), mu.atoms());
                    for (a, b) in got.weights().iter().zip(mu.weights()) {
                        prop_assert!((a - b).abs() < 1e-12);
                    }
                }
            }

            #[test]
            fn breakpoint_levels_reproduce_any_marginals(mus in prop::collection::vec(marginal_strategy(5), 1..4)) {
                let p = quantile_coupling(&QuantilePlanSpec::new(mus.clone()).unwrap());
                prop_assert!(is_monotone_set(p.points()));
                for (axis, mu) in mus.iter().enumerate() {
                    let (got, _) = marginal(&p, axis).unwrap();
                    prop_assert_eq!(got.atoms(), mu.atoms());
                    for (a, b) in got.weights().iter().zip(mu.weights()) {
                        prop_assert!((a - b).abs() < 1e-12);
                    }
                }
            }

            #[test]
            fn monotone_set_matches_pairwise_definition(
                pts in prop::collection::vec(prop::collection::vec(0i32..4, 2), 0..7),
            ) {
                let pts: Vec<_> = pts.into_iter().map(|c| GroundPoint(c.into_iter().map(f64::from).collect())).collect();
                let pairwise = pts.iter().all(|f| pts.iter().all(|g| f.le(g) || g.le(f)));
                prop_assert_eq!(is_monotone_set(&pts), pairwise);
            }

            #[test]
            fn concave_optimizer_is_the_quantile_coupling(mus in prop::collection::vec(marginal_strategy(4), 2..4)) {
                let grid = product_grid(&mus);
                let fam = multi_marginal_family(&mus, &grid).unwrap();
                let cost = CostSpec::concave_of_sum(ConcaveFn::NegSquare, vec![]);
                let inst = build_instance(grid, cost.clone(), fam).unwrap();
                let sol = solve_gmp(&inst, &Tolerances::default()).unwrap().optimal().unwrap();
                let pi = quantile_coupling(&QuantilePlanSpec::new(mus).unwrap());
                prop_assert!(is_monotone_set(sol.plan.points()));
                prop_assert!(plans_equal_on_rectangles(&sol.plan, &pi, 1e-9));
                prop_assert!((sol.objective - cost.integrate(&pi).unwrap()).abs() < 1e-8);
            }
        }
    }
}
