use super::{solve_lp, LinearProgram, LpResult, LpStatus, Tolerances};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of a lexicographic solve.
#[derive(Debug, Clone)]
pub struct LexicographicResult<T> {
    /// Result of the last stage that ran.
    pub result: LpResult<T>,
    /// Optimal value of each completed stage.
    pub stage_values: Vec<T>,
    /// Program of the last stage, including the pinning rows.
    pub program: LinearProgram<T>,
}

/// Minimizes `objectives[0]`, then `objectives[1]` over the optimizers of the
/// first, and so on. Each finished stage is pinned by one equality row
/// `objectives[k]ᵀx = v_k` before the next stage runs.
pub fn lexicographic_solve<T: Scalar>(
    base: &LinearProgram<T>,
    objectives: &[Vec<T>],
    tol: &Tolerances<T>,
) -> Result<LexicographicResult<T>> {
    let Some(first) = objectives.first() else {
        return Err(Error::Domain(
            "lexicographic solve needs an objective".into(),
        ));
    };
    let mut program = base.with_objective(first.clone())?;
    let mut stage_values = Vec::with_capacity(objectives.len());
    let mut result = solve_lp(&program, tol)?;
    for (k, objective) in objectives.iter().enumerate() {
        if k > 0 {
            let prev = &objectives[k - 1];
            let pinned = program.with_row(prev, *stage_values.last().unwrap())?;
            program = pinned.with_objective(objective.clone())?;
            result = solve_lp(&program, tol)?;
        }
        if result.status != LpStatus::Optimal {
            break;
        }
        stage_values.push(result.objective);
    }
    Ok(LexicographicResult {
        result,
        stage_values,
        program,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex2() -> LinearProgram<f64> {
        LinearProgram::new(vec![vec![1.0, 1.0]], vec![1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn single_objective_matches_plain_solve() {
        let tol = Tolerances::default();
        let base = simplex2();
        let lex = lexicographic_solve(&base, &[vec![2.0, 1.0]], &tol).unwrap();
        let plain = solve_lp(&base.with_objective(vec![2.0, 1.0]).unwrap(), &tol).unwrap();
        assert_eq!(lex.result.x, plain.x);
        assert_eq!(lex.stage_values, vec![plain.objective]);
    }

    #[test]
    fn flat_first_stage_defers_to_second() {
        let lex = lexicographic_solve(
            &simplex2(),
            &[vec![0.0, 0.0], vec![0.0, 1.0]],
            &Tolerances::default(),
        )
        .unwrap();
        assert!((lex.result.x[0] - 1.0).abs() < 1e-12);
        assert!(lex.result.x[1].abs() < 1e-12);
    }

    #[test]
    fn second_stage_breaks_ties() {
        let lex = lexicographic_solve(
            &simplex2(),
            &[vec![1.0, 1.0], vec![-1.0, 0.0]],
            &Tolerances::default(),
        )
        .unwrap();
        assert!((lex.result.x[0] - 1.0).abs() < 1e-12);
        assert!((lex.stage_values[0] - 1.0).abs() < 1e-12);
        assert!((lex.stage_values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn requires_an_objective() {
        assert!(lexicographic_solve(&simplex2(), &[], &Tolerances::default()).is_err());
    }
}
