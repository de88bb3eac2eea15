use serde::Serialize;

use super::{LinearProgram, LpResult, LpStatus, Tolerances};
use crate::scalar::{compensated_sum, Scalar};

/// Independent re-check of an optimal LP result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport<T> {
    pub passed: bool,
    /// `max_i |(Ax - b)_i|`.
    pub primal_residual: T,
    /// Most negative primal entry (zero when `x ≥ 0`).
    pub primal_negativity: T,
    /// Most negative reduced cost `c_j - a_jᵀy` (zero when dual feasible).
    pub dual_violation: T,
    /// `max_j |x_j (c_j - a_jᵀy)|`.
    pub complementarity: T,
    /// `|objective - bᵀy|`.
    pub duality_gap: T,
    /// `|objective - cᵀx|`.
    pub objective_mismatch: T,
    pub failures: Vec<String>,
}

/// Recomputes feasibility, dual feasibility, complementary slackness and the
/// duality gap of `result` from the raw LP data.
pub fn verify_certificate<T: Scalar>(
    lp: &LinearProgram<T>,
    result: &LpResult<T>,
    tol: &Tolerances<T>,
) -> CertificateReport<T> {
    let mut failures = Vec::new();
    if result.status != LpStatus::Optimal {
        failures.push(format!("status is {:?}, not optimal", result.status));
    }
    if result.x.len() != lp.cols() || result.y.len() != lp.rows() {
        failures.push("solution vectors do not match the LP dimensions".into());
        let nan = T::nan();
        return CertificateReport {
            passed: false,
            primal_residual: nan,
            primal_negativity: nan,
            dual_violation: nan,
            complementarity: nan,
            duality_gap: nan,
            objective_mismatch: nan,
            failures,
        };
    }
    let x = &result.x;
    let y = &result.y;

    let primal_residual = (0..lp.rows())
        .map(|i| {
            let ax = compensated_sum(lp.row(i).iter().zip(x).map(|(&a, &x)| a * x));
            (ax - lp.b()[i]).abs()
        })
        .fold(T::zero(), T::max);
    let primal_negativity = x.iter().copied().fold(T::zero(), T::min);

    let mut dual_violation = T::zero();
    let mut complementarity = T::zero();
    for j in 0..lp.cols() {
        let aty = compensated_sum((0..lp.rows()).map(|i| lp.a(i, j) * y[i]));
        let d = lp.c()[j] - aty;
        dual_violation = dual_violation.min(d);
        complementarity = complementarity.max((x[j] * d).abs());
    }

    let by = compensated_sum(lp.b().iter().zip(y).map(|(&b, &y)| b * y));
    let cx = lp.objective_value(x);
    let duality_gap = (result.objective - by).abs();
    let objective_mismatch = (result.objective - cx).abs();
    let gap_bound = tol.opt * (T::one() + result.objective.abs());

    if primal_residual > tol.feas {
        failures.push(format!(
            "primal residual {primal_residual} exceeds {}",
            tol.feas
        ));
    }
    if primal_negativity < -tol.feas {
        failures.push(format!("negative primal entry {primal_negativity}"));
    }
    if dual_violation < -tol.opt {
        failures.push(format!("negative reduced cost {dual_violation}"));
    }
    if complementarity > tol.opt {
        failures.push(format!(
            "complementary slackness violated by {complementarity}"
        ));
    }
    if duality_gap > gap_bound {
        failures.push(format!("duality gap {duality_gap} exceeds {gap_bound}"));
    }
    if objective_mismatch > gap_bound {
        failures.push(format!(
            "reported objective differs from cᵀx by {objective_mismatch}"
        ));
    }

    CertificateReport {
        passed: failures.is_empty(),
        primal_residual,
        primal_negativity,
        dual_violation,
        complementarity,
        duality_gap,
        objective_mismatch,
        failures,
    }
}
