//! Constraint families: finite generating sets of test functions `f` on a
//! grid, each centered so that the constraint reads `∫ f dP = 0`.
//!
//! Bounded continuous test classes are replaced by indicator generating
//! sets on the grid. On a finite support every bounded function is a linear
//! combination of indicators, so the reduction is exact there.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::measures::{DiscreteDistribution, DiscreteMeasure, GroundPoint, PointKey};
use crate::scalar::{compensated_sum, Scalar};

/// A function tabulated on finitely many points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTable<T>", into = "RawTable<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct PointTable<T> {
    points: Vec<GroundPoint<T>>,
    values: Vec<T>,
    index: HashMap<PointKey, usize>,
}

impl<T: PartialEq> PartialEq for PointTable<T> {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.values == other.values
    }
}

#[derive(Serialize, Deserialize)]
struct RawTable<T> {
    points: Vec<Vec<T>>,
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<RawTable<T>> for PointTable<T> {
    type Error = Error;

    fn try_from(raw: RawTable<T>) -> Result<Self> {
        PointTable::new(
            raw.points.into_iter().map(GroundPoint).collect(),
            raw.values,
        )
    }
}

impl<T: Scalar> From<PointTable<T>> for RawTable<T> {
    fn from(t: PointTable<T>) -> Self {
        RawTable {
            points: t.points.into_iter().map(|p| p.0).collect(),
            values: t.values,
        }
    }
}

impl<T: Scalar> PointTable<T> {
    pub fn new(points: Vec<GroundPoint<T>>, values: Vec<T>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Instance(format!(
                "table has {} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instance("table contains non-finite values".into()));
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.key(), i).is_some() {
                return Err(Error::Instance(format!("duplicate table point {:?}", p.0)));
            }
        }
        Ok(PointTable {
            points,
            values,
            index,
        })
    }

    /// Tabulates `f` on the given points.
    pub fn from_fn(points: &[GroundPoint<T>], f: impl Fn(&GroundPoint<T>) -> T) -> Result<Self> {
        let values = points.iter().map(&f).collect();
        Self::new(points.to_vec(), values)
    }

    pub fn get(&self, point: &GroundPoint<T>) -> Option<T> {
        self.index.get(&point.key()).map(|&i| self.values[i])
    }

    pub fn points(&self) -> &[GroundPoint<T>] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind<T> {
    /// `1{z_axis = atom}`.
    MarginalIndicator {
        axis: usize,
        atom: T,
    },
    /// `(z_{l+1} - z_l) * 1{(z_1..z_l) = prefix}` with one-based `level = l`.
    MartingaleIncrement {
        level: usize,
        prefix: Vec<T>,
    },
    Tabulated(PointTable<T>),
    Expression(Expr),
}

/// A test function minus its centering constant (the target moment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRepr<T>", into = "FunctionRepr<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct TestFunction<T> {
    pub kind: FunctionKind<T>,
    pub center: T,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
enum FunctionRepr<T> {
    MarginalIndicator {
        axis: usize,
        atom: T,
        #[serde(default)]
        center: T,
    },
    MartingaleIncrement {
        level: usize,
        prefix: Vec<T>,
        #[serde(default)]
        center: T,
    },
    Tabulated {
        #[serde(flatten)]
        table: PointTable<T>,
        #[serde(default)]
        center: T,
    },
    Expression {
        expr: Expr,
        #[serde(default)]
        center: T,
    },
}

impl<T: Scalar> TryFrom<FunctionRepr<T>> for TestFunction<T> {
    type Error = Error;

    fn try_from(r: FunctionRepr<T>) -> Result<Self> {
        let (kind, center) = match r {
            FunctionRepr::MarginalIndicator { axis, atom, center } => {
                (FunctionKind::MarginalIndicator { axis, atom }, center)
            }
            FunctionRepr::MartingaleIncrement {
                level,
                prefix,
                center,
            } => {
                if level == 0 || prefix.len() != level {
                    return Err(Error::Instance(format!(
                        "martingale increment of level {level} needs a prefix of that length"
                    )));
                }
                (FunctionKind::MartingaleIncrement { level, prefix }, center)
            }
            FunctionRepr::Tabulated { table, center } => (FunctionKind::Tabulated(table), center),
            FunctionRepr::Expression { expr, center } => (FunctionKind::Expression(expr), center),
        };
        Ok(TestFunction { kind, center })
    }
}

impl<T: Scalar> From<TestFunction<T>> for FunctionRepr<T> {
    fn from(f: TestFunction<T>) -> Self {
        let center = f.center;
        match f.kind {
            FunctionKind::MarginalIndicator { axis, atom } => {
                FunctionRepr::MarginalIndicator { axis, atom, center }
            }
            FunctionKind::MartingaleIncrement { level, prefix } => {
                FunctionRepr::MartingaleIncrement {
                    level,
                    prefix,
                    center,
                }
            }
            FunctionKind::Tabulated(table) => FunctionRepr::Tabulated { table, center },
            FunctionKind::Expression(expr) => FunctionRepr::Expression { expr, center },
        }
    }
}

impl<T: Scalar> TestFunction<T> {
    pub fn new(kind: FunctionKind<T>, center: T) -> Self {
        TestFunction { kind, center }
    }

    pub fn marginal_indicator(axis: usize, atom: T, center: T) -> Self {
        Self::new(FunctionKind::MarginalIndicator { axis, atom }, center)
    }

    pub fn martingale_increment(prefix: Vec<T>) -> Self {
        Self::new(
            FunctionKind::MartingaleIncrement {
                level: prefix.len(),
                prefix,
            },
            T::zero(),
        )
    }

    pub fn tabulated(table: PointTable<T>, center: T) -> Self {
        Self::new(FunctionKind::Tabulated(table), center)
    }

    pub fn expression(expr: Expr, center: T) -> Self {
        Self::new(FunctionKind::Expression(expr), center)
    }

    /// Value of the uncentered function at `z`.
    pub fn raw(&self, z: &GroundPoint<T>) -> Result<T> {
        match &self.kind {
            FunctionKind::MarginalIndicator { axis, atom } => {
                let v = *z.0.get(*axis).ok_or_else(|| {
                    Error::Evaluation(format!("axis {axis} out of range for {:?}", z.0))
                })?;
                Ok(if v == *atom { T::one() } else { T::zero() })
            }
            FunctionKind::MartingaleIncrement { level, prefix } => {
                let l = *level;
                if l == 0 || l >= z.dim() {
                    return Err(Error::Evaluation(format!(
                        "martingale level {l} invalid for dimension {}",
                        z.dim()
                    )));
                }
                if z.0[..l] == prefix[..] {
                    Ok(z.0[l] - z.0[l - 1])
                } else {
                    Ok(T::zero())
                }
            }
            FunctionKind::Tabulated(table) => table.get(z).ok_or_else(|| {
                Error::Evaluation(format!("tabulated function undefined at {:?}", z.0))
            }),
            FunctionKind::Expression(e) => e.eval(&z.0),
        }
    }

    /// Centered value `f(z) - center`.
    pub fn eval(&self, z: &GroundPoint<T>) -> Result<T> {
        Ok(self.raw(z)? - self.center)
    }
}

/// A finite family of test functions with a tabulated growth bound `g`
/// (`g ≡ 1` when absent).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "FamilyRepr<T>", into = "FamilyRepr<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct ConstraintFamily<T> {
    pub functions: Vec<TestFunction<T>>,
    pub growth_bound: Option<PointTable<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
enum FamilyRepr<T> {
    Bare(Vec<TestFunction<T>>),
    Full {
        functions: Vec<TestFunction<T>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        growth_bound: Option<PointTable<T>>,
    },
}

impl<T: Scalar> From<FamilyRepr<T>> for ConstraintFamily<T> {
    fn from(r: FamilyRepr<T>) -> Self {
        match r {
            FamilyRepr::Bare(functions) => ConstraintFamily {
                functions,
                growth_bound: None,
            },
            FamilyRepr::Full {
                functions,
                growth_bound,
            } => ConstraintFamily {
                functions,
                growth_bound,
            },
        }
    }
}

impl<T: Scalar> From<ConstraintFamily<T>> for FamilyRepr<T> {
    fn from(f: ConstraintFamily<T>) -> Self {
        match f.growth_bound {
            None => FamilyRepr::Bare(f.functions),
            Some(g) => FamilyRepr::Full {
                functions: f.functions,
                growth_bound: Some(g),
            },
        }
    }
}

impl<T: Scalar> ConstraintFamily<T> {
    pub fn new(functions: Vec<TestFunction<T>>) -> Self {
        ConstraintFamily {
            functions,
            growth_bound: None,
        }
    }

    pub fn with_growth_bound(mut self, g: PointTable<T>) -> Self {
        self.growth_bound = Some(g);
        self
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn extend(&mut self, other: ConstraintFamily<T>) {
        self.functions.extend(other.functions);
    }

    pub fn push(&mut self, f: TestFunction<T>) {
        self.functions.push(f);
    }

    pub fn has_martingale(&self) -> bool {
        self.functions
            .iter()
            .any(|f| matches!(f.kind, FunctionKind::MartingaleIncrement { .. }))
    }

    /// Per-axis marginals implied by the indicator functions of the family,
    /// read off their centering constants.
    pub fn implied_marginals(&self) -> BTreeMap<usize, DiscreteDistribution<T>> {
        let mut per_axis: BTreeMap<usize, (Vec<T>, Vec<T>)> = BTreeMap::new();
        for f in &self.functions {
            if let FunctionKind::MarginalIndicator { axis, atom } = f.kind {
                let e = per_axis.entry(axis).or_default();
                e.0.push(atom);
                e.1.push(f.center);
            }
        }
        per_axis
            .into_iter()
            .filter_map(|(axis, (a, w))| {
                DiscreteDistribution::from_unnormalized(a, w)
                    .ok()
                    .map(|d| (axis, d))
            })
            .collect()
    }

    fn growth_at(&self, z: &GroundPoint<T>) -> Option<T> {
        match &self.growth_bound {
            None => Some(T::one()),
            Some(g) => g.get(z),
        }
    }

    /// Centered values of every function on every grid point, one row per function.
    pub fn evaluate_rows(&self, grid: &[GroundPoint<T>]) -> Result<Vec<Vec<T>>> {
        self.functions
            .iter()
            .map(|f| grid.iter().map(|z| f.eval(z)).collect())
            .collect()
    }
}

/// Indicator functions `1{z_axis = a} - dist({a})` for every atom `a`.
pub fn axis_marginal_functions<T: Scalar>(
    axis: usize,
    dist: &DiscreteDistribution<T>,
) -> Vec<TestFunction<T>> {
    dist.atoms()
        .iter()
        .zip(dist.weights())
        .map(|(&a, &w)| TestFunction::marginal_indicator(axis, a, w))
        .collect()
}

/// Generating set of the multi-marginal constraints on a grid.
pub fn multi_marginal_family<T: Scalar>(
    marginals: &[DiscreteDistribution<T>],
    grid: &[GroundPoint<T>],
) -> Result<ConstraintFamily<T>> {
    for z in grid {
        if z.dim() != marginals.len() {
            return Err(Error::Instance(format!(
                "grid point {:?} has dimension {} but {} marginals are given",
                z.0,
                z.dim(),
                marginals.len()
            )));
        }
        for (axis, (&v, mu)) in z.0.iter().zip(marginals).enumerate() {
            if !mu.atoms().contains(&v) {
                return Err(Error::Instance(format!(
                    "grid coordinate {v} on axis {axis} is not an atom of its marginal"
                )));
            }
        }
    }
    Ok(ConstraintFamily::new(
        marginals
            .iter()
            .enumerate()
            .flat_map(|(axis, mu)| axis_marginal_functions(axis, mu))
            .collect(),
    ))
}

/// Martingale increments for every level and every prefix present in the grid.
pub fn martingale_family<T: Scalar>(grid: &[GroundPoint<T>]) -> Result<ConstraintFamily<T>> {
    let n = grid.first().map_or(0, GroundPoint::dim);
    if n < 2 {
        return Err(Error::Instance(format!(
            "martingale constraints need dimension at least 2, got {n}"
        )));
    }
    if grid.iter().any(|z| z.dim() != n) {
        return Err(Error::Instance("grid points have mixed dimensions".into()));
    }
    let mut functions = Vec::new();
    for level in 1..n {
        let mut seen = HashSet::new();
        for z in grid {
            let prefix = &z.0[..level];
            if seen.insert(PointKey::of(prefix)) {
                functions.push(TestFunction::martingale_increment(prefix.to_vec()));
            }
        }
    }
    Ok(ConstraintFamily::new(functions))
}

/// `∫ f dm`, with the centering constant weighted by the total mass.
pub fn evaluate_moment<T: Scalar>(f: &TestFunction<T>, m: &DiscreteMeasure<T>) -> Result<T> {
    let terms: Result<Vec<T>> = m.iter().map(|(z, w)| Ok(w * f.eval(z)?)).collect();
    Ok(compensated_sum(terms?))
}

/// Constants `a_f = max_z |f(z)| / g(z)` for each function of a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport<T> {
    /// `None` where no finite constant exists on the grid.
    pub bounds: Vec<Option<T>>,
    pub valid: bool,
}

pub fn validate_growth_bound<T: Scalar>(
    family: &ConstraintFamily<T>,
    grid: &[GroundPoint<T>],
) -> GrowthReport<T> {
    let bounds: Vec<Option<T>> = family
        .functions
        .iter()
        .map(|f| {
            let mut a = T::zero();
            for z in grid {
                let v = f.eval(z).ok()?.abs();
                let g = family.growth_at(z)?;
                if g < T::zero() {
                    return None;
                }
                if v == T::zero() {
                    continue;
                }
                if g == T::zero() {
                    return None;
                }
                a = a.max(v / g);
            }
            Some(a)
        })
        .collect();
    let valid = bounds.iter().all(Option::is_some);
    GrowthReport { bounds, valid }
}
