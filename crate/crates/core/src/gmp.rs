//! The discrete generalized moment problem: minimize `∫ c dP` over
//! probability measures `P` on a finite grid with `∫ f dP = 0` for every `f`
//! of a constraint family.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constraints::{evaluate_moment, ConstraintFamily, PointTable};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lp::{
    lexicographic_solve, solve_lp, verify_certificate, CertificateReport, LinearProgram, LpResult,
    LpStatus, Tolerances,
};
use crate::measures::{convex_order, DiscreteMeasure, GroundPoint, PointKey, TransportPlan};
use crate::scalar::{compensated_sum, Scalar};

/// Built-in concave functions `h` for costs of the form `h(Σ Δ_i z_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcaveFn<T> {
    /// `-s²`.
    NegSquare,
    /// `-|s|^(1+p)` for `p ∈ (0, 1]`.
    NegAbsPow(T),
    /// `ln(s + κ)`, defined for `s > -κ`.
    LogShift(T),
    /// `a·s + b`; concave but not strictly.
    Affine(T, T),
}

impl<T: Scalar> ConcaveFn<T> {
    pub fn eval(&self, s: T) -> Result<T> {
        let v = match *self {
            ConcaveFn::NegSquare => -(s * s),
            ConcaveFn::NegAbsPow(p) => -s.abs().powf(T::one() + p),
            ConcaveFn::LogShift(kappa) => {
                if s + kappa <= T::zero() {
                    return Err(Error::Evaluation(format!(
                        "log_shift:{kappa} undefined at {s}"
                    )));
                }
                (s + kappa).ln()
            }
            ConcaveFn::Affine(a, b) => a * s + b,
        };
        Ok(v)
    }

    pub fn is_strictly_concave(&self) -> bool {
        !matches!(self, ConcaveFn::Affine(..))
    }
}

impl<T: Scalar> fmt::Display for ConcaveFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveFn::NegSquare => write!(f, "neg_square"),
            ConcaveFn::NegAbsPow(p) => write!(f, "neg_abs_p:{p}"),
            ConcaveFn::LogShift(k) => write!(f, "log_shift:{k}"),
            ConcaveFn::Affine(a, b) => write!(f, "affine:{a},{b}"),
        }
    }
}

impl<T: Scalar> FromStr for ConcaveFn<T> {
    type Err = Error;

    /// Accepts `neg_square`, `neg_abs_p:<p>`, `log_shift:<κ>`, `affine` and
    /// `affine:<a>,<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: &str| -> Result<T> {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::Domain(format!("bad parameter `{a}` in `{s}`")))
        };
        match (name, arg) {
            ("neg_square", None) => Ok(ConcaveFn::NegSquare),
            ("neg_abs_p", Some(a)) => {
                let p = num(a)?;
                if !(p > T::zero() && p <= T::one()) {
                    return Err(Error::Domain(format!(
                        "neg_abs_p needs p in (0,1], got {p}"
                    )));
                }
                Ok(ConcaveFn::NegAbsPow(p))
            }
            ("log_shift", Some(a)) => Ok(ConcaveFn::LogShift(num(a)?)),
            ("affine", None) => Ok(ConcaveFn::Affine(T::one(), T::zero())),
            ("affine", Some(a)) => {
                let (x, y) = a
                    .split_once(',')
                    .ok_or_else(|| Error::Domain(format!("affine needs `a,b`, got `{a}`")))?;
                Ok(ConcaveFn::Affine(num(x)?, num(y)?))
            }
            _ => Err(Error::Domain(format!("unknown concave function `{s}`"))),
        }
    }
}

impl<T: Scalar> Serialize for ConcaveFn<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ConcaveFn<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A cost function on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub enum CostSpec<T> {
    Tabulated {
        #[serde(flatten)]
        table: PointTable<T>,
    },
    Expression {
        expr: Expr,
    },
    /// `h(Σ_i Δ_i z_i)`; empty weights mean `Δ ≡ 1`.
    ConcaveOfSum {
        h: ConcaveFn<T>,
        #[serde(default)]
        weights: Vec<T>,
    },
}

impl<T: Scalar> CostSpec<T> {
    pub fn tabulated(table: PointTable<T>) -> Self {
        CostSpec::Tabulated { table }
    }

    pub fn expression(expr: Expr) -> Self {
        CostSpec::Expression { expr }
    }

    pub fn concave_of_sum(h: ConcaveFn<T>, weights: Vec<T>) -> Self {
        CostSpec::ConcaveOfSum { h, weights }
    }

    pub fn eval(&self, z: &GroundPoint<T>) -> Result<T> {
        let v = match self {
            CostSpec::Tabulated { table } => table.get(z).ok_or_else(|| {
                Error::Evaluation(format!("tabulated cost undefined at {:?}", z.0))
            })?,
            CostSpec::Expression { expr } => expr.eval(&z.0)?,
            CostSpec::ConcaveOfSum { h, weights } => {
                let s = if weights.is_empty() {
                    compensated_sum(z.0.iter().copied())
                } else {
                    if weights.len() != z.dim() {
                        return Err(Error::Evaluation(format!(
                            "{} weights for a point of dimension {}",
                            weights.len(),
                            z.dim()
                        )));
                    }
                    compensated_sum(weights.iter().zip(&z.0).map(|(&w, &x)| w * x))
                };
                h.eval(s)?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("cost not finite at {:?}", z.0)))
        }
    }

    /// `∫ c dm`.
    pub fn integrate(&self, m: &DiscreteMeasure<T>) -> Result<T> {
        let terms: Result<Vec<T>> = m.iter().map(|(z, w)| Ok(w * self.eval(z)?)).collect();
        Ok(compensated_sum(terms?))
    }

    /// Tabulates `factor · c` on the given points.
    pub fn tabulate_scaled(&self, points: &[GroundPoint<T>], factor: T) -> Result<Self> {
        let values: Result<Vec<T>> = points.iter().map(|z| Ok(factor * self.eval(z)?)).collect();
        Ok(CostSpec::tabulated(PointTable::new(
            points.to_vec(),
            values?,
        )?))
    }

    /// Whether the cost is `h(Σ Δ z)` with strictly concave `h`.
    pub fn strictly_concave_of_sum(&self) -> bool {
        matches!(self, CostSpec::ConcaveOfSum { h, .. } if h.is_strictly_concave())
    }
}

/// A validated grid instance together with its LP.
#[derive(Debug, Clone)]
pub struct GmpInstance<T> {
    grid: Vec<GroundPoint<T>>,
    cost: CostSpec<T>,
    family: ConstraintFamily<T>,
    cost_values: Vec<T>,
    lp: LinearProgram<T>,
}

/// Checks that grid points are nonempty, finite, distinct and of one dimension.
pub(crate) fn validate_grid<T: Scalar>(grid: &[GroundPoint<T>]) -> Result<usize> {
    let Some(first) = grid.first() else {
        return Err(Error::Instance("empty grid".into()));
    };
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::Instance(
            "grid points must have dimension at least 1".into(),
        ));
    }
    let mut seen = HashMap::with_capacity(grid.len());
    for (i, z) in grid.iter().enumerate() {
        if z.dim() != dim {
            return Err(Error::Instance(format!(
                "grid point {i} has dimension {} instead of {dim}",
                z.dim()
            )));
        }
        if z.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::Instance(format!("grid point {i} is not finite")));
        }
        if let Some(j) = seen.insert(z.key(), i) {
            return Err(Error::Instance(format!("grid points {j} and {i} coincide")));
        }
    }
    Ok(dim)
}

/// Validates an instance and assembles its LP: one variable per grid point,
/// one row per family function and a final total-mass row `Σ x = 1`.
pub fn build_instance<T: Scalar>(
    grid: Vec<GroundPoint<T>>,
    cost: CostSpec<T>,
    family: ConstraintFamily<T>,
) -> Result<GmpInstance<T>> {
    validate_grid(&grid)?;
    let to_instance = |e: Error| match e {
        Error::Evaluation(msg) => Error::Instance(msg),
        other => other,
    };
    let mut rows = family.evaluate_rows(&grid).map_err(to_instance)?;
    rows.push(vec![T::one(); grid.len()]);
    let mut b = vec![T::zero(); family.len()];
    b.push(T::one());
    let cost_values: Vec<T> = grid
        .iter()
        .map(|z| cost.eval(z))
        .collect::<Result<_>>()
        .map_err(to_instance)?;
    let lp = LinearProgram::new(rows, b, cost_values.clone())?;
    Ok(GmpInstance {
        grid,
        cost,
        family,
        cost_values,
        lp,
    })
}

impl<T: Scalar> GmpInstance<T> {
    pub fn grid(&self) -> &[GroundPoint<T>] {
        &self.grid
    }

    pub fn cost(&self) -> &CostSpec<T> {
        &self.cost
    }

    pub fn family(&self) -> &ConstraintFamily<T> {
        &self.family
    }

    pub fn cost_values(&self) -> &[T] {
        &self.cost_values
    }

    pub fn lp(&self) -> &LinearProgram<T> {
        &self.lp
    }

    fn plan_from(&self, x: &[T]) -> Result<TransportPlan<T>> {
        let (points, masses): (Vec<_>, Vec<_>) = self
            .grid
            .iter()
            .zip(x)
            .filter(|(_, &m)| m > T::merge_tol())
            .map(|(z, &m)| (z.clone(), m))
            .unzip();
        DiscreteMeasure::with_dim(self.grid[0].dim(), points, masses)
    }

    /// Plan masses as an LP vector over the grid. Fails when the plan charges
    /// a point off the grid.
    pub fn vector_of(&self, plan: &DiscreteMeasure<T>) -> Result<Vec<T>> {
        let index: HashMap<PointKey, usize> = self
            .grid
            .iter()
            .enumerate()
            .map(|(i, z)| (z.key(), i))
            .collect();
        let mut x = vec![T::zero(); self.grid.len()];
        for (z, m) in plan.iter() {
            let i = index
                .get(&z.key())
                .ok_or_else(|| Error::Instance(format!("plan charges off-grid point {:?}", z.0)))?;
            x[*i] = x[*i] + m;
        }
        Ok(x)
    }

    /// `max_f |∫ f dP|` over the family.
    pub fn residual(&self, plan: &DiscreteMeasure<T>) -> Result<T> {
        let mut worst = T::zero();
        for f in &self.family.functions {
            worst = worst.max(evaluate_moment(f, plan)?.abs());
        }
        Ok(worst)
    }

    fn solution(
        &self,
        program: &LinearProgram<T>,
        result: LpResult<T>,
        tol: &Tolerances<T>,
        stage_values: Option<Vec<T>>,
    ) -> Result<Solution<T>> {
        let plan = self.plan_from(&result.x)?;
        let certificate = verify_certificate(program, &result, tol);
        Ok(Solution {
            objective: self.lp.objective_value(&result.x),
            residual: self.residual(&plan)?,
            plan,
            certificate,
            duals: result.y.clone(),
            stage_values,
            lp: result,
        })
    }

    fn infeasibility(&self, result: LpResult<T>, tol: &Tolerances<T>) -> Infeasibility<T> {
        let mut convex_order_checks = Vec::new();
        if self.family.has_martingale() {
            let marginals = self.family.implied_marginals();
            let axes: Vec<_> = marginals.keys().copied().collect();
            for pair in axes.windows(2) {
                let holds = convex_order(&marginals[&pair[0]], &marginals[&pair[1]], tol.feas);
                convex_order_checks.push(ConvexOrderCheck {
                    earlier_axis: pair[0],
                    later_axis: pair[1],
                    holds,
                });
            }
        }
        let farkas = result.farkas.unwrap_or_default();
        let message = if convex_order_checks.iter().any(|c| !c.holds) {
            "no martingale measure: marginals are not in convex order".to_string()
        } else {
            "the constraint family admits no probability measure on this grid".to_string()
        };
        Infeasibility {
            farkas,
            convex_order: convex_order_checks,
            message,
        }
    }
}

/// Optimal plan of a grid instance with its LP certificate.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Solution<T> {
    pub plan: TransportPlan<T>,
    pub objective: T,
    /// `max_f |∫ f dP|` over the family.
    pub residual: T,
    pub certificate: CertificateReport<T>,
    /// Dual multipliers: one per family function, then the total-mass row
    /// (followed by pinning rows for lexicographic solves).
    pub duals: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_values: Option<Vec<T>>,
    #[serde(skip)]
    pub lp: LpResult<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexOrderCheck {
    pub earlier_axis: usize,
    pub later_axis: usize,
    pub holds: bool,
}

/// Diagnostic for an empty feasible set.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Infeasibility<T> {
    /// `y` with `Aᵀy ≤ 0` and `bᵀy > 0` over the family rows and the mass row.
    pub farkas: Vec<T>,
    /// Convex-order tests of consecutive constrained axes (martingale families).
    pub convex_order: Vec<ConvexOrderCheck>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub enum GmpOutcome<T> {
    Optimal(Solution<T>),
    Infeasible(Infeasibility<T>),
}

impl<T: Scalar> GmpOutcome<T> {
    pub fn optimal(self) -> Option<Solution<T>> {
        match self {
            GmpOutcome::Optimal(s) => Some(s),
            GmpOutcome::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, GmpOutcome::Optimal(_))
    }
}

/// Solves the grid instance.
pub fn solve_gmp<T: Scalar>(
    instance: &GmpInstance<T>,
    tol: &Tolerances<T>,
) -> Result<GmpOutcome<T>> {
    let result = solve_lp(&instance.lp, tol)?;
    match result.status {
        LpStatus::Optimal => Ok(GmpOutcome::Optimal(instance.solution(
            &instance.lp,
            result,
            tol,
            None,
        )?)),
        LpStatus::Infeasible => Ok(GmpOutcome::Infeasible(instance.infeasibility(result, tol))),
        LpStatus::Unbounded => Err(Error::Internal(
            "bounded moment problem reported unbounded".into(),
        )),
    }
}

/// Minimizes the instance cost, then each refinement cost in turn over the
/// optimizers of the previous stages.
pub fn solve_gmp_lexicographic<T: Scalar>(
    instance: &GmpInstance<T>,
    refinement_costs: &[CostSpec<T>],
    tol: &Tolerances<T>,
) -> Result<GmpOutcome<T>> {
    if refinement_costs.is_empty() {
        return solve_gmp(instance, tol);
    }
    let mut objectives = vec![instance.cost_values.clone()];
    for cost in refinement_costs {
        let values: Vec<T> = instance
            .grid
            .iter()
            .map(|z| cost.eval(z))
            .collect::<Result<_>>()?;
        objectives.push(values);
    }
    let lex = lexicographic_solve(&instance.lp, &objectives, tol)?;
    match lex.result.status {
        LpStatus::Optimal => Ok(GmpOutcome::Optimal(instance.solution(
            &lex.program,
            lex.result,
            tol,
            Some(lex.stage_values),
        )?)),
        LpStatus::Infeasible if lex.stage_values.is_empty() => Ok(GmpOutcome::Infeasible(
            instance.infeasibility(lex.result, tol),
        )),
        LpStatus::Infeasible => Err(Error::Solver(
            "pinned lexicographic stage became infeasible".into(),
        )),
        LpStatus::Unbounded => Err(Error::Internal(
            "bounded moment problem reported unbounded".into(),
        )),
    }
}

/// Re-verifies a stored solution against its instance without re-solving.
pub fn verify_solution<T: Scalar>(
    instance: &GmpInstance<T>,
    plan: &DiscreteMeasure<T>,
    objective: T,
    duals: &[T],
    tol: &Tolerances<T>,
) -> Result<(CertificateReport<T>, T)> {
    let x = instance.vector_of(plan)?;
    let result = LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
        y: duals.to_vec(),
        basis: Vec::new(),
        farkas: None,
        iterations: 0,
    };
    let report = verify_certificate(&instance.lp, &result, tol);
    Ok((report, instance.residual(plan)?))
}

/// Re-verifies a lexicographic solution: the final-stage program is rebuilt
/// from the refinement costs and the stored stage values, then checked
/// against the stored duals.
pub fn verify_refined_solution<T: Scalar>(
    instance: &GmpInstance<T>,
    refinement_costs: &[CostSpec<T>],
    plan: &DiscreteMeasure<T>,
    stage_values: &[T],
    duals: &[T],
    tol: &Tolerances<T>,
) -> Result<(CertificateReport<T>, T)> {
    if refinement_costs.is_empty() {
        let objective = stage_values
            .first()
            .copied()
            .ok_or_else(|| Error::Domain("no stage values to verify".into()))?;
        return verify_solution(instance, plan, objective, duals, tol);
    }
    if stage_values.len() != refinement_costs.len() + 1 {
        return Err(Error::Domain(format!(
            "{} stage values for {} stages",
            stage_values.len(),
            refinement_costs.len() + 1
        )));
    }
    let mut objectives = vec![instance.cost_values.clone()];
    for cost in refinement_costs {
        objectives.push(
            instance
                .grid
                .iter()
                .map(|z| cost.eval(z))
                .collect::<Result<_>>()?,
        );
    }
    let mut program = instance.lp.clone();
    for k in 1..objectives.len() {
        program = program
            .with_row(&objectives[k - 1], stage_values[k - 1])?
            .with_objective(objectives[k].clone())?;
    }
    let result = LpResult {
        status: LpStatus::Optimal,
        x: instance.vector_of(plan)?,
        objective: stage_values[stage_values.len() - 1],
        y: duals.to_vec(),
        basis: Vec::new(),
        farkas: None,
        iterations: 0,
    };
    let report = verify_certificate(&program, &result, tol);
    Ok((report, instance.residual(plan)?))
}
