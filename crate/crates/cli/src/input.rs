//! Input schemas. See docs/formats.md.

use std::fs;
use std::io::Read;
use std::path::Path;

use gmpot::constraints::axis_marginal_functions;
use gmpot::{
    martingale_family, parse_expression, ConstraintFamily, CostSpec, DiscreteDistribution,
    DiscreteMeasure, GroundPoint,
};
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Reads and parses a JSON file, `-` meaning standard input.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// A cost given either as an expression string or as a tagged cost object.
#[derive(Debug, Clone)]
pub struct CostInput(pub CostSpec<f64>);

impl<'de> Deserialize<'de> for CostInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => parse_expression(&s)
                .map(|e| CostInput(CostSpec::expression(e)))
                .map_err(D::Error::custom),
            other => CostSpec::deserialize(other)
                .map(CostInput)
                .map_err(D::Error::custom),
        }
    }
}

/// One axis: a prescribed law, or a bare support left unconstrained.
#[derive(Debug, Clone)]
pub enum AxisInput {
    Law(DiscreteDistribution<f64>),
    Support(Vec<f64>),
}

impl AxisInput {
    pub fn support(&self) -> Vec<f64> {
        match self {
            AxisInput::Law(d) => d.atoms().to_vec(),
            AxisInput::Support(s) => {
                let mut s = s.clone();
                s.sort_by(f64::total_cmp);
                s.dedup();
                s
            }
        }
    }
}

impl<'de> Deserialize<'de> for AxisInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        if let Some(support) = v.get("support") {
            let s: Vec<f64> = Vec::deserialize(support.clone()).map_err(D::Error::custom)?;
            if s.is_empty() || s.iter().any(|x| !x.is_finite()) {
                return Err(D::Error::custom(
                    "support must be a nonempty list of finite numbers",
                ));
            }
            return Ok(AxisInput::Support(s));
        }
        DiscreteDistribution::deserialize(v)
            .map(AxisInput::Law)
            .map_err(D::Error::custom)
    }
}

/// Grid instance: explicit grid and family, or axes that generate both.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceInput {
    pub cost: CostInput,
    #[serde(default)]
    pub grid: Option<Vec<GroundPoint<f64>>>,
    #[serde(default)]
    pub family: Option<ConstraintFamily<f64>>,
    #[serde(default)]
    pub marginals: Option<Vec<AxisInput>>,
    #[serde(default)]
    pub martingale: bool,
    #[serde(default)]
    pub refine: Vec<CostInput>,
}

/// Cartesian product of the given axis supports.
pub fn product_of(axes: &[Vec<f64>]) -> Vec<GroundPoint<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(GroundPoint).collect()
}

/// Indicator rows for every axis that carries a law.
pub fn marginal_rows(axes: &[AxisInput]) -> ConstraintFamily<f64> {
    ConstraintFamily::new(
        axes.iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                AxisInput::Law(d) => Some(axis_marginal_functions(i, d)),
                AxisInput::Support(_) => None,
            })
            .flatten()
            .collect(),
    )
}

impl InstanceInput {
    /// Grid and constraint family described by the input.
    pub fn grid_and_family(&self) -> CliResult<(Vec<GroundPoint<f64>>, ConstraintFamily<f64>)> {
        let grid = match (&self.grid, &self.marginals) {
            (Some(g), _) => g.clone(),
            (None, Some(axes)) => {
                product_of(&axes.iter().map(AxisInput::support).collect::<Vec<_>>())
            }
            (None, None) => {
                return Err(CliError::Input(
                    "an instance needs a \"grid\" or \"marginals\" to build one from".into(),
                ))
            }
        };
        let mut family = self.family.clone().unwrap_or_default();
        if let Some(axes) = &self.marginals {
            if let Some(dim) = grid.first().map(GroundPoint::dim) {
                if dim != axes.len() {
                    return Err(CliError::Input(format!(
                        "{} marginals for grid points of dimension {dim}",
                        axes.len()
                    )));
                }
            }
            family.extend(marginal_rows(axes));
        }
        if self.martingale {
            family.extend(martingale_family(&grid)?);
        }
        Ok((grid, family))
    }

    pub fn refinements(&self) -> Vec<CostSpec<f64>> {
        self.refine.iter().map(|c| c.0.clone()).collect()
    }
}

/// A solution as emitted by `solve`.
#[derive(Debug, Deserialize)]
pub struct StoredSolution {
    pub plan: DiscreteMeasure<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    #[serde(default)]
    pub stage_values: Option<Vec<f64>>,
}

/// Pairs for `check-monotone`, given directly or as a plan's support.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsInput {
    #[serde(default)]
    pub pairs: Option<Vec<GroundPoint<f64>>>,
    #[serde(default)]
    pub plan: Option<DiscreteMeasure<f64>>,
    #[serde(default)]
    pub cost: Option<CostInput>,
}

/// Marginals for competitor search: explicit laws, or those of the plan.
#[derive(Debug, Clone)]
pub enum MarginalSource {
    Laws(Vec<DiscreteDistribution<f64>>),
    FromPlan,
}

impl<'de> Deserialize<'de> for MarginalSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "from_plan" => Ok(MarginalSource::FromPlan),
            other => Vec::deserialize(other)
                .map(MarginalSource::Laws)
                .map_err(D::Error::custom),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitorInput {
    pub cost: CostInput,
    #[serde(default)]
    pub plan: Option<DiscreteMeasure<f64>>,
    #[serde(default)]
    pub alpha: Option<DiscreteMeasure<f64>>,
    #[serde(default)]
    pub candidates: Option<Vec<GroundPoint<f64>>>,
    #[serde(default)]
    pub family: Option<ConstraintFamily<f64>>,
    #[serde(default)]
    pub marginals: Option<MarginalSource>,
    #[serde(default)]
    pub martingale: bool,
}

/// Time marginals for `pass-demo`.
#[derive(Debug, Clone)]
pub enum PassFamilyInput {
    Explicit(gmpot::MarginalFamily<f64>),
    /// `μ_t` = law of `t · X`, built at every depth.
    Scaled {
        base: DiscreteDistribution<f64>,
        horizon: f64,
    },
}

impl<'de> Deserialize<'de> for PassFamilyInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        if let Some(base) = v.get("scaled") {
            let base = DiscreteDistribution::deserialize(base.clone()).map_err(D::Error::custom)?;
            let horizon = v.get("horizon").and_then(Value::as_f64).unwrap_or(1.0);
            return Ok(PassFamilyInput::Scaled { base, horizon });
        }
        gmpot::MarginalFamily::deserialize(v)
            .map(PassFamilyInput::Explicit)
            .map_err(D::Error::custom)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotInput {
    pub marginals: Vec<AxisInput>,
    pub cost: CostInput,
    #[serde(default)]
    pub family: Option<ConstraintFamily<f64>>,
}
