//! Two-phase revised simplex with an explicit dense basis inverse.
//!
//! Pricing is Dantzig's rule until a run of degenerate pivots trips the
//! degeneracy counter; the solver then switches to Bland's rule until the
//! next nondegenerate step. The inverse is rebuilt from scratch every
//! [`REFACTOR_EVERY`] pivots and before optimality is declared.

use super::{LinearProgram, LpResult, LpStatus, Tolerances};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const REFACTOR_EVERY: usize = 40;
const DEGENERACY_LIMIT: usize = 30;

enum Phase {
    One,
    Two,
}

enum StepOutcome {
    Optimal,
    Unbounded,
}

struct Solver<'a, T> {
    lp: &'a LinearProgram<T>,
    m: usize,
    n: usize,
    /// Row signs making the right-hand side nonnegative.
    sign: Vec<T>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<T>,
    xb: Vec<T>,
    tol: Tolerances<T>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a, T: Scalar> Solver<'a, T> {
    fn new(lp: &'a LinearProgram<T>, tol: Tolerances<T>) -> Self {
        let m = lp.rows();
        let n = lp.cols();
        let sign: Vec<T> = lp
            .b()
            .iter()
            .map(|&b| if b < T::zero() { -T::one() } else { T::one() })
            .collect();
        let rhs: Vec<T> = lp.b().iter().map(|b| b.abs()).collect();
        let mut binv = vec![T::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = T::one();
        }
        let mut is_basic = vec![false; n + m];
        for flag in &mut is_basic[n..] {
            *flag = true;
        }
        Solver {
            lp,
            m,
            n,
            sign,
            xb: rhs.clone(),
            rhs,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            tol,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn entry(&self, i: usize, j: usize) -> T {
        if j < self.n {
            self.sign[i] * self.lp.a(i, j)
        } else if j - self.n == i {
            T::one()
        } else {
            T::zero()
        }
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        if j >= self.n {
            let r = j - self.n;
            return (0..m).map(|k| self.binv[k * m + r]).collect();
        }
        let col: Vec<T> = (0..m).map(|i| self.entry(i, j)).collect();
        (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                row.iter()
                    .zip(&col)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    fn cost(&self, phase: &Phase, j: usize) -> T {
        match phase {
            Phase::One => {
                if j >= self.n {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Phase::Two => {
                if j < self.n {
                    self.lp.c()[j]
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Simplex multipliers `c_Bᵀ B⁻¹` in the sign-adjusted row space.
    fn duals(&self, phase: &Phase) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = self.cost(phase, j);
            if cb == T::zero() {
                continue;
            }
            let row = &self.binv[k * m..(k + 1) * m];
            for (yi, &b) in y.iter_mut().zip(row) {
                *yi = *yi + cb * b;
            }
        }
        y
    }

    fn reduced_cost(&self, phase: &Phase, y: &[T], j: usize) -> T {
        let mut d = self.cost(phase, j);
        for (i, &yi) in y.iter().enumerate() {
            d = d - yi * self.entry(i, j);
        }
        d
    }

    /// Rebuilds `B⁻¹` by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut mat = vec![T::zero(); m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                mat[i * m + k] = self.entry(i, j);
            }
        }
        let mut inv = vec![T::zero(); m * m];
        for i in 0..m {
            inv[i * m + i] = T::one();
        }
        for col in 0..m {
            let (piv, best) = (col..m)
                .map(|r| (r, mat[r * m + col].abs()))
                .fold((col, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= T::epsilon() {
                return Err(Error::Solver("basis matrix became singular".into()));
            }
            if piv != col {
                for k in 0..m {
                    mat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] = mat[col * m + k] / p;
                inv[col * m + k] = inv[col * m + k] / p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[r * m + col];
                if f == T::zero() {
                    continue;
                }
                for k in 0..m {
                    mat[r * m + k] = mat[r * m + k] - f * mat[col * m + k];
                    inv[r * m + k] = inv[r * m + k] - f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        self.xb = (0..m)
            .map(|k| {
                let row = &self.binv[k * m..(k + 1) * m];
                row.iter()
                    .zip(&self.rhs)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[T]) {
        let m = self.m;
        let wr = w[r];
        let theta = self.xb[r] / wr;
        for i in 0..m {
            if i != r {
                self.xb[i] = self.xb[i] - theta * w[i];
            }
        }
        self.xb[r] = theta;
        for k in 0..m {
            self.binv[r * m + k] = self.binv[r * m + k] / wr;
        }
        for i in 0..m {
            if i == r || w[i] == T::zero() {
                continue;
            }
            let f = w[i];
            for k in 0..m {
                self.binv[i * m + k] = self.binv[i * m + k] - f * self.binv[r * m + k];
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn run(&mut self, phase: Phase) -> Result<StepOutcome> {
        let cap = 100 * (self.m + self.n) + 1000;
        let start = self.iterations;
        let mut degenerate_run = 0usize;
        let mut verified = false;
        loop {
            if self.iterations - start > cap {
                return Err(Error::Solver(format!("no convergence within {cap} pivots")));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = degenerate_run >= DEGENERACY_LIMIT;
            let y = self.duals(&phase);
            let mut entering: Option<(usize, T)> = None;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let d = self.reduced_cost(&phase, &y, j);
                if d < -self.tol.opt {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                if verified || self.since_refactor == 0 {
                    return Ok(StepOutcome::Optimal);
                }
                // re-price on a fresh factorization before declaring optimality
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;

            let w = self.ftran(q);
            let scale = w.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
            let piv = T::pivot_tol() * scale;
            // artificials left after phase one sit on redundant rows
            let skip = |i: usize| matches!(phase, Phase::Two) && self.basis[i] >= self.n;
            let mut best_ratio: Option<T> = None;
            for i in 0..self.m {
                if w[i] > piv && !skip(i) {
                    let r = self.xb[i].max(T::zero()) / w[i];
                    if best_ratio.is_none_or(|b| r < b) {
                        best_ratio = Some(r);
                    }
                }
            }
            let Some(min_ratio) = best_ratio else {
                return Ok(StepOutcome::Unbounded);
            };
            let slack = T::merge_tol() * (T::one() + min_ratio);
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                if w[i] <= piv || skip(i) {
                    continue;
                }
                let r = self.xb[i].max(T::zero()) / w[i];
                if r > min_ratio + slack {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) if bland && self.basis[i] < self.basis[l] => Some(i),
                    Some(l) if !bland && w[i] > w[l] => Some(i),
                    keep => keep,
                };
            }
            let r = leave.expect("ratio test found a candidate");
            if self.xb[r] < T::zero() {
                self.xb[r] = T::zero();
            }
            if min_ratio <= T::merge_tol() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &w);
        }
    }

    /// Pivots basic artificials out wherever a structural column can replace
    /// them; the rest sit on redundant rows and stay at zero.
    fn expel_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let v = (0..m).fold(T::zero(), |acc, i| acc + row[i] * self.entry(i, j));
                if v.abs() > T::lit(1e3) * T::pivot_tol()
                    && best.is_none_or(|(_, b)| v.abs() > b.abs())
                {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let w = self.ftran(q);
                self.pivot(r, q, &w);
            }
        }
    }

    fn unsign(&self, y: Vec<T>) -> Vec<T> {
        y.into_iter().zip(&self.sign).map(|(v, &s)| v * s).collect()
    }

    fn primal(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.xb[k].max(T::zero());
            }
        }
        x
    }

    fn result(&self, status: LpStatus, y: Vec<T>, farkas: Option<Vec<T>>) -> LpResult<T> {
        let x = self.primal();
        LpResult {
            status,
            objective: self.lp.objective_value(&x),
            x,
            y,
            basis: self.basis.clone(),
            farkas,
            iterations: self.iterations,
        }
    }
}

/// Solves `min cᵀx, Ax = b, x ≥ 0` by the two-phase revised simplex method.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>, tol: &Tolerances<T>) -> Result<LpResult<T>> {
    let mut s = Solver::new(lp, *tol);

    s.run(Phase::One)?;
    s.refactor()?;
    let infeasibility = s
        .basis
        .iter()
        .zip(&s.xb)
        .filter(|(&j, _)| j >= s.n)
        .fold(T::zero(), |acc, (_, &v)| acc + v.max(T::zero()));
    if infeasibility > tol.feas {
        let farkas = s.unsign(s.duals(&Phase::One));
        return Ok(s.result(LpStatus::Infeasible, vec![T::zero(); s.m], Some(farkas)));
    }

    s.expel_artificials();
    s.refactor()?;
    match s.run(Phase::Two)? {
        StepOutcome::Unbounded => Ok(s.result(LpStatus::Unbounded, vec![T::zero(); s.m], None)),
        StepOutcome::Optimal => {
            s.refactor()?;
            let y = s.unsign(s.duals(&Phase::Two));
            Ok(s.result(LpStatus::Optimal, y, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> LinearProgram<f64> {
        LinearProgram::new(a, b, c).unwrap()
    }

    fn solve(p: &LinearProgram<f64>) -> LpResult<f64> {
        solve_lp(p, &Tolerances::default()).unwrap()
    }

    #[test]
    fn single_variable() {
        let r = solve(&lp(vec![vec![1.0]], vec![1.0], vec![1.0]));
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_objective_on_simplex() {
        let r = solve(&lp(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]));
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unique_feasible_point() {
        let r = solve(&lp(
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
        ));
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 0.5).abs() < 1e-12 && (r.x[1] - 0.5).abs() < 1e-12);
        assert!((r.objective + 0.5).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility_with_farkas_ray() {
        // x1 + x2 = 1 and x1 + x2 = 2
        let p = lp(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
        );
        let r = solve(&p);
        assert_eq!(r.status, LpStatus::Infeasible);
        let y = r.farkas.unwrap();
        let by: f64 = p.b().iter().zip(&y).map(|(b, y)| b * y).sum();
        assert!(by > 0.0);
        for j in 0..2 {
            let aty: f64 = (0..2).map(|i| p.a(i, j) * y[i]).sum();
            assert!(aty <= 1e-9);
        }
    }

    #[test]
    fn negative_rhs_rows() {
        // -x1 = -2
        let r = solve(&lp(vec![vec![-1.0, 0.0]], vec![-2.0], vec![1.0, 1.0]));
        assert!((r.x[0] - 2.0).abs() < 1e-12);
        assert!((r.y[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_unboundedness() {
        // x1 - x2 = 0, minimize -x1
        let r = solve(&lp(vec![vec![1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]));
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let r = solve(&lp(
            vec![
                vec![1.0, 1.0, 0.0],
                vec![2.0, 2.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 1.0],
        ));
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_constraint_set() {
        let r = solve(&lp(vec![], vec![], vec![1.0, 0.0]));
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.objective, 0.0);
        let r = solve(&lp(vec![], vec![], vec![-1.0]));
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classical cycling instance in equality form with slacks
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let r = solve(&lp(
            a,
            vec![0.0, 0.0, 1.0],
            vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0],
        ));
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn single_precision_solve() {
        let p = LinearProgram::<f32>::new(
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
        )
        .unwrap();
        let r = solve_lp(&p, &Tolerances::default()).unwrap();
        assert!((r.objective + 0.5).abs() < 1e-5);
    }
}
