//! Dense linear programming in equality standard form
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`.

mod certificate;
mod lexicographic;
mod simplex;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use certificate::{verify_certificate, CertificateReport};
pub use lexicographic::{lexicographic_solve, LexicographicResult};
pub use simplex::solve_lp;

/// `min cᵀx` subject to `Ax = b`, `x ≥ 0`, with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    rows: usize,
    cols: usize,
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(a: Vec<Vec<T>>, b: Vec<T>, c: Vec<T>) -> Result<Self> {
        let rows = a.len();
        let cols = c.len();
        if b.len() != rows {
            return Err(Error::Domain(format!(
                "constraint matrix has {rows} rows but b has length {}",
                b.len()
            )));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, row) in a.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Domain(format!(
                    "row {i} has length {} but there are {cols} variables",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        let lp = LinearProgram {
            rows,
            cols,
            a: flat,
            b,
            c,
        };
        if lp
            .a
            .iter()
            .chain(&lp.b)
            .chain(&lp.c)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("non-finite LP data".into()));
        }
        Ok(lp)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn a(&self, i: usize, j: usize) -> T {
        self.a[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    /// Copy of this program with the objective replaced.
    pub fn with_objective(&self, c: Vec<T>) -> Result<Self> {
        if c.len() != self.cols {
            return Err(Error::Domain("objective length mismatch".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite objective".into()));
        }
        Ok(LinearProgram { c, ..self.clone() })
    }

    /// Copy of this program with one extra equality row.
    pub fn with_row(&self, row: &[T], rhs: T) -> Result<Self> {
        if row.len() != self.cols {
            return Err(Error::Domain("row length mismatch".into()));
        }
        let mut out = self.clone();
        out.a.extend_from_slice(row);
        out.b.push(rhs);
        out.rows += 1;
        Ok(out)
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        crate::scalar::compensated_sum(self.c.iter().zip(x).map(|(&c, &x)| c * x))
    }

    /// Plain-text dump: one line `a_i1 .. a_in | b_i` per row, then `c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{} | {}", row.join(" "), self.b[i]);
        }
        let c: Vec<String> = self.c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "c: {}", c.join(" "));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. For `Optimal`, `x` is primal optimal and `y` the duals of
/// the equality rows; for `Infeasible`, `farkas` holds `y` with `Aᵀy ≤ 0`
/// and `bᵀy > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpResult<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub y: Vec<T>,
    pub basis: Vec<usize>,
    pub farkas: Option<Vec<T>>,
    pub iterations: usize,
}

impl<T: Scalar> LpResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Primal feasibility and optimality tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub feas: T,
    pub opt: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            feas: T::default_tol(),
            opt: T::default_tol(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shapes() {
        assert!(LinearProgram::new(vec![vec![1.0, 2.0]], vec![1.0], vec![1.0]).is_err());
        assert!(LinearProgram::new(vec![vec![1.0]], vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(LinearProgram::new(vec![vec![f64::NAN]], vec![1.0], vec![1.0]).is_err());
        let lp = LinearProgram::new(vec![vec![1.0, 1.0]], vec![1.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(lp.to_text(), "1 1 | 1\nc: 2 3\n");
    }
}
