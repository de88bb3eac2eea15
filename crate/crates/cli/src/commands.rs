use std::path::Path;

use gmpot::monotonicity::candidate_grid;
use gmpot::pass::LP_VARIABLE_BUDGET;
use gmpot::{
    build_instance, check_cyclical_monotone, compare_with_lp, continuum_quantile_plan,
    dyadic_partitions, find_better_competitor, is_finitely_minimal, marginal, martingale_family,
    pass_cost, quantile_coupling, solve_gmp, solve_gmp_lexicographic, verify_refined_solution,
    verify_solution, CompetitorQuery, ConcaveFn, ConstraintFamily, CostSpec, DiscreteDistribution,
    DiscreteMeasure, GmpOutcome, GroundPoint, LevelPolicy, MarginalFamily, MinimalityOptions,
    QuantilePlanSpec, Tolerances, VerdictStatus,
};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::input::{
    marginal_rows, product_of, read_json, AxisInput, CompetitorInput, CostInput, InstanceInput,
    MarginalSource, MotInput, PairsInput, PassFamilyInput, StoredSolution,
};
use crate::output::{emit, emit_json, plan_csv};
use crate::{Format, TolArgs};

const OK: u8 = 0;
const VERDICT: u8 = 1;
const NUMERICAL: u8 = 3;

fn outcome_json(outcome: &GmpOutcome<f64>) -> CliResult<Value> {
    let (status, body) = match outcome {
        GmpOutcome::Optimal(s) => ("optimal", serde_json::to_value(s)?),
        GmpOutcome::Infeasible(i) => ("infeasible", serde_json::to_value(i)?),
    };
    let mut body = body;
    body.as_object_mut()
        .expect("solutions serialize as objects")
        .insert("status".into(), status.into());
    Ok(body)
}

fn certificate_code(outcome: &GmpOutcome<f64>) -> u8 {
    match outcome {
        GmpOutcome::Optimal(s) if !s.certificate.passed => {
            eprintln!(
                "gmpot: certificate check failed: {}",
                s.certificate.failures.join("; ")
            );
            NUMERICAL
        }
        GmpOutcome::Optimal(_) => OK,
        GmpOutcome::Infeasible(i) => {
            eprintln!("gmpot: infeasible: {}", i.message);
            VERDICT
        }
    }
}

pub fn solve(path: &Path, csv: Option<&Path>, tol: &TolArgs, out: Option<&Path>) -> CliResult<u8> {
    let input: InstanceInput = read_json(path)?;
    let (grid, family) = input.grid_and_family()?;
    let instance = build_instance(grid, input.cost.0.clone(), family)?;
    let tolerances = Tolerances::from(*tol);
    let refine = input.refinements();
    let outcome = solve_gmp_lexicographic(&instance, &refine, &tolerances)?;
    emit_json(out, &outcome_json(&outcome)?)?;
    if let (Some(csv), GmpOutcome::Optimal(s)) = (csv, &outcome) {
        emit(Some(csv), &plan_csv(&s.plan)?)?;
    }
    Ok(certificate_code(&outcome))
}

pub fn verify(
    instance_path: &Path,
    solution_path: &Path,
    tol: &TolArgs,
    out: Option<&Path>,
) -> CliResult<u8> {
    let input: InstanceInput = read_json(instance_path)?;
    let stored: StoredSolution = read_json(solution_path)?;
    let (grid, family) = input.grid_and_family()?;
    let instance = build_instance(grid, input.cost.0.clone(), family)?;
    let tolerances = Tolerances::from(*tol);
    let refine = input.refinements();
    let (report, residual) = match (&stored.stage_values, refine.is_empty()) {
        (Some(stages), false) => verify_refined_solution(
            &instance,
            &refine,
            &stored.plan,
            stages,
            &stored.duals,
            &tolerances,
        )?,
        (None, false) => {
            return Err(CliError::Input(
                "the instance has refinement costs but the solution carries no stage_values".into(),
            ))
        }
        (_, true) => verify_solution(
            &instance,
            &stored.plan,
            stored.objective,
            &stored.duals,
            &tolerances,
        )?,
    };
    let cost = instance.cost().integrate(&stored.plan)?;
    let objective_ok =
        (cost - stored.objective).abs() <= tol.opt_tol * (1.0 + stored.objective.abs());
    let passed = report.passed && residual <= tol.feas_tol && objective_ok;
    emit_json(
        out,
        &json!({
            "status": if passed { "verified" } else { "failed" },
            "residual": residual,
            "recomputed_objective": cost,
            "certificate": report,
        }),
    )?;
    Ok(if passed { OK } else { VERDICT })
}

pub fn check_monotone(
    path: &Path,
    cost: Option<&str>,
    tol: &TolArgs,
    out: Option<&Path>,
) -> CliResult<u8> {
    let input: PairsInput = read_json(path)?;
    let cost = match (cost, input.cost) {
        (Some(text), _) => CostSpec::expression(gmpot::parse_expression(text)?),
        (None, Some(CostInput(c))) => c,
        (None, None) => {
            return Err(CliError::Input(
                "no cost given (input \"cost\" or --cost)".into(),
            ))
        }
    };
    let pairs = match (input.pairs, input.plan) {
        (Some(p), None) => p,
        (None, Some(plan)) => plan.points().to_vec(),
        _ => {
            return Err(CliError::Input(
                "give exactly one of \"pairs\" or \"plan\"".into(),
            ))
        }
    };
    let verdict = check_cyclical_monotone(&pairs, &cost, tol.max_cycle_slack)?;
    emit_json(out, &verdict)?;
    Ok(if verdict.is_certified() { OK } else { VERDICT })
}

pub struct SearchArgs {
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub extend: bool,
}

fn competitor_family(
    input: &CompetitorInput,
    measure: &DiscreteMeasure<f64>,
    grid: &[GroundPoint<f64>],
) -> CliResult<ConstraintFamily<f64>> {
    let mut family = input.family.clone().unwrap_or_default();
    let laws = match &input.marginals {
        None => None,
        Some(MarginalSource::Laws(laws)) => Some(laws.clone()),
        Some(MarginalSource::FromPlan) => Some(
            (0..measure.dim())
                .map(|axis| marginal(measure, axis).map(|(d, _)| d))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    if let Some(laws) = laws {
        if laws.len() != measure.dim() {
            return Err(CliError::Input(format!(
                "{} marginals for a measure of dimension {}",
                laws.len(),
                measure.dim()
            )));
        }
        family.extend(marginal_rows(
            &laws.into_iter().map(AxisInput::Law).collect::<Vec<_>>(),
        ));
    }
    if input.martingale {
        family.extend(martingale_family(grid)?);
    }
    Ok(family)
}

pub fn competitor_search(
    path: &Path,
    args: &SearchArgs,
    tol: &TolArgs,
    out: Option<&Path>,
) -> CliResult<u8> {
    let input: CompetitorInput = read_json(path)?;
    let tolerances = Tolerances::from(*tol);
    match (&input.alpha, &input.plan) {
        (Some(alpha), None) => {
            let grid = match &input.candidates {
                Some(c) => c.clone(),
                None => candidate_grid(alpha, None),
            };
            let family = competitor_family(&input, alpha, &grid)?;
            let query = CompetitorQuery {
                alpha,
                candidate_points: &grid,
                cost: &input.cost.0,
                family: &family,
                improvement_tol: tol.improve_tol,
                lp_tol: tolerances,
            };
            match find_better_competitor(&query)? {
                Some(c) => {
                    emit_json(
                        out,
                        &json!({
                            "status": "violated",
                            "competitor": c.measure,
                            "competitor_cost": c.cost,
                            "alpha_cost": c.baseline,
                            "improvement": c.baseline - c.cost,
                        }),
                    )?;
                    Ok(VERDICT)
                }
                None => {
                    emit_json(out, &json!({ "status": "certified" }))?;
                    Ok(OK)
                }
            }
        }
        (None, Some(plan)) => {
            if input.candidates.is_some() {
                return Err(CliError::Input(
                    "\"candidates\" applies to a single \"alpha\"; use --extend for plans".into(),
                ));
            }
            let grid = candidate_grid(plan, Some(plan));
            let family = competitor_family(&input, plan, &grid)?;
            let opts = MinimalityOptions {
                k: args.k,
                trials: args.trials,
                seed: args.seed,
                extend_candidates: args.extend,
                improvement_tol: tol.improve_tol,
                lp_tol: tolerances,
                ..MinimalityOptions::default()
            };
            let verdict = is_finitely_minimal(plan, &input.cost.0, &family, &opts)?;
            emit_json(out, &verdict)?;
            if verdict.certificate_failures > 0 {
                eprintln!(
                    "gmpot: {} competitor LPs failed their certificate check",
                    verdict.certificate_failures
                );
            }
            Ok(match verdict.status {
                VerdictStatus::Violated => VERDICT,
                VerdictStatus::Certified if verdict.certificate_failures > 0 => NUMERICAL,
                VerdictStatus::Certified => OK,
            })
        }
        _ => Err(CliError::Input(
            "give exactly one of \"alpha\" or \"plan\"".into(),
        )),
    }
}

pub fn coupling(
    path: &Path,
    levels: Option<usize>,
    format: Format,
    out: Option<&Path>,
) -> CliResult<u8> {
    let raw: Value = read_json(path)?;
    let spec = match (raw, levels) {
        (Value::Array(items), levels) => {
            let laws: Vec<DiscreteDistribution<f64>> = serde_json::from_value(Value::Array(items))?;
            match levels {
                Some(m) => QuantilePlanSpec::stratified(laws, m)?,
                None => QuantilePlanSpec::new(laws)?,
            }
        }
        (obj, Some(m)) => {
            let laws: Vec<DiscreteDistribution<f64>> = serde_json::from_value(
                obj.get("marginals")
                    .cloned()
                    .ok_or_else(|| CliError::Input("missing \"marginals\"".into()))?,
            )?;
            QuantilePlanSpec::stratified(laws, m)?
        }
        (obj, None) => serde_json::from_value(obj)?,
    };
    let plan = quantile_coupling(&spec);
    match format {
        Format::Json => emit_json(out, &plan)?,
        Format::Csv => emit(out, &plan_csv(&plan)?)?,
    }
    Ok(OK)
}

pub struct PassArgs {
    pub depth: u32,
    pub from_depth: u32,
    pub levels: Option<usize>,
    pub h: String,
    pub lp_max_depth: Option<u32>,
}

pub fn pass_demo(path: &Path, args: &PassArgs, tol: &TolArgs, out: Option<&Path>) -> CliResult<u8> {
    let family: PassFamilyInput = read_json(path)?;
    let h: ConcaveFn<f64> = args.h.parse()?;
    if args.from_depth > args.depth {
        return Err(CliError::Input("--from-depth exceeds --depth".into()));
    }
    let policy = match args.levels {
        Some(m) => LevelPolicy::Stratified(m),
        None => LevelPolicy::Breakpoints,
    };
    let tolerances = Tolerances::from(*tol);
    let horizon = match &family {
        PassFamilyInput::Explicit(f) => f.horizon(),
        PassFamilyInput::Scaled { horizon, .. } => *horizon,
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "depth",
        "intervals",
        "pi_star_cost",
        "lp_cost",
        "gap",
        "rectangles_equal",
        "step",
    ])?;
    let mut prev: Option<f64> = None;
    let mut code = OK;
    for n in args.from_depth..=args.depth {
        let part = dyadic_partitions(horizon, n)?;
        let fam = match &family {
            PassFamilyInput::Explicit(f) => f.clone(),
            PassFamilyInput::Scaled { base, .. } => MarginalFamily::scaled(base, &part)?,
        };
        let plan = continuum_quantile_plan(&fam, &part, policy)?;
        let cost = pass_cost(&plan, &part, &h)?;
        let step = prev.map(|p| (cost - p).abs());
        prev = Some(cost);

        let want_lp = args.lp_max_depth.is_none_or(|d| n <= d);
        let (lp_cost, gap, rect) = if want_lp {
            match compare_with_lp(&fam, &part, h, &tolerances) {
                Ok(cmp) => {
                    if !cmp.certificate_passed {
                        code = NUMERICAL;
                    }
                    let gap = (cmp.lp_objective - cost).abs();
                    (
                        Some(cmp.lp_objective),
                        Some(gap),
                        Some(cmp.rectangles_equal),
                    )
                }
                Err(gmpot::Error::Budget { variables, .. }) => {
                    eprintln!(
                        "gmpot: depth {n}: {variables} grid points exceed the LP budget of {LP_VARIABLE_BUDGET}"
                    );
                    (None, None, None)
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            (None, None, None)
        };
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        w.write_record([
            n.to_string(),
            part.len().to_string(),
            cost.to_string(),
            opt(lp_cost),
            opt(gap),
            rect.map_or(String::new(), |b| b.to_string()),
            opt(step),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    emit(out, &String::from_utf8(bytes).expect("csv output is UTF-8"))?;
    Ok(code)
}

pub fn mot(path: &Path, csv: Option<&Path>, tol: &TolArgs, out: Option<&Path>) -> CliResult<u8> {
    let input: MotInput = read_json(path)?;
    if input.marginals.len() < 2 {
        return Err(CliError::Input(
            "martingale transport needs at least two marginals".into(),
        ));
    }
    let grid = product_of(
        &input
            .marginals
            .iter()
            .map(AxisInput::support)
            .collect::<Vec<_>>(),
    );
    let mut family = input.family.clone().unwrap_or_default();
    family.extend(marginal_rows(&input.marginals));
    family.extend(martingale_family(&grid)?);
    let tolerances = Tolerances::from(*tol);

    let cost = input.cost.0;
    let lower = build_instance(grid.clone(), cost.clone(), family.clone())?;
    let min = solve_gmp(&lower, &tolerances)?;
    let negated = cost.tabulate_scaled(&grid, -1.0)?;
    let upper = build_instance(grid, negated, family)?;
    let max = solve_gmp(&upper, &tolerances)?;

    let mut max_json = outcome_json(&max)?;
    if let (GmpOutcome::Optimal(s), Some(obj)) = (&max, max_json.as_object_mut()) {
        obj.insert("objective".into(), json!(-s.objective));
        obj.insert("cost".into(), json!(cost.integrate(&s.plan)?));
    }
    let status = if min.is_feasible() {
        "optimal"
    } else {
        "infeasible"
    };
    emit_json(
        out,
        &json!({ "status": status, "min": outcome_json(&min)?, "max": max_json }),
    )?;
    if let Some(prefix) = csv {
        for (tag, outcome) in [("min", &min), ("max", &max)] {
            if let GmpOutcome::Optimal(s) = outcome {
                let mut name = prefix.as_os_str().to_owned();
                name.push(format!(".{tag}.csv"));
                emit(Some(Path::new(&name)), &plan_csv(&s.plan)?)?;
            }
        }
    }
    Ok(certificate_code(&min).max(certificate_code(&max)))
}
