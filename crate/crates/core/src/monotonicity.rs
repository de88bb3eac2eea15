//! Finitistic optimality certificates.
//!
//! A competitor of a finite measure `α` is a measure `α'` with the same total
//! mass and the same integrals against every function of the family; it is
//! better when `∫ c dα' < ∫ c dα`. A plan is finitely minimal when no finite
//! sub-measure of it has a better competitor. For two-marginal transport this
//! reduces to cyclical monotonicity of the support, which is checked here by
//! negative-cycle detection.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::{evaluate_moment, ConstraintFamily};
use crate::error::{Error, Result};
use crate::gmp::CostSpec;
use crate::lp::{solve_lp, verify_certificate, LinearProgram, LpStatus, Tolerances};
use crate::measures::{cartesian, sorted_unique, DiscreteMeasure, GroundPoint};
use crate::scalar::Scalar;

/// One competitor search: is there a better competitor of `alpha`
/// supported on `candidate_points`?
#[derive(Debug, Clone, Copy)]
pub struct CompetitorQuery<'a, T> {
    pub alpha: &'a DiscreteMeasure<T>,
    pub candidate_points: &'a [GroundPoint<T>],
    pub cost: &'a CostSpec<T>,
    pub family: &'a ConstraintFamily<T>,
    /// Relative threshold: an improvement must exceed `tol · (1 + |∫ c dα|)`.
    pub improvement_tol: T,
    pub lp_tol: Tolerances<T>,
}

/// The cheapest competitor on the candidate grid.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Competitor<T> {
    pub measure: DiscreteMeasure<T>,
    pub cost: T,
    /// `∫ c dα` of the measure being challenged.
    pub baseline: T,
    /// Whether the competitor LP passed its certificate re-check.
    pub certified_lp: bool,
}

impl<T: Scalar> Competitor<T> {
    pub fn improvement(&self) -> T {
        self.baseline - self.cost
    }
}

/// Solves the competitor LP and returns its optimizer together with a flag
/// telling whether it improves on `alpha` beyond the threshold.
pub fn cheapest_competitor<T: Scalar>(q: &CompetitorQuery<'_, T>) -> Result<(Competitor<T>, bool)> {
    let mut seen = std::collections::HashSet::new();
    let candidates: Vec<&GroundPoint<T>> = q
        .candidate_points
        .iter()
        .filter(|z| seen.insert(z.key()))
        .collect();
    for z in q.alpha.points() {
        if !seen.contains(&z.key()) {
            return Err(Error::Instance(format!(
                "candidate grid does not contain the atom {:?}",
                z.0
            )));
        }
    }

    let mass = q.alpha.total_mass();
    let mut rows = vec![vec![T::one(); candidates.len()]];
    let mut rhs = vec![mass];
    for f in &q.family.functions {
        let row: Result<Vec<T>> = candidates.iter().map(|z| f.eval(z)).collect();
        rows.push(row?);
        rhs.push(evaluate_moment(f, q.alpha)?);
    }
    let costs: Result<Vec<T>> = candidates.iter().map(|z| q.cost.eval(z)).collect();
    let lp = LinearProgram::new(rows, rhs, costs?)?;
    let result = solve_lp(&lp, &q.lp_tol)?;
    if result.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "competitor LP is {:?} although alpha itself is feasible",
            result.status
        )));
    }
    let certified_lp = verify_certificate(&lp, &result, &q.lp_tol).passed;
    let (points, masses): (Vec<_>, Vec<_>) = candidates
        .iter()
        .zip(&result.x)
        .filter(|(_, &m)| m > T::merge_tol())
        .map(|(z, &m)| ((*z).clone(), m))
        .unzip();
    let measure = DiscreteMeasure::with_dim(q.alpha.dim(), points, masses)?;
    let baseline = q.cost.integrate(q.alpha)?;
    let threshold = q.improvement_tol * (T::one() + baseline.abs());
    let improves = result.objective < baseline - threshold;
    Ok((
        Competitor {
            measure,
            cost: result.objective,
            baseline,
            certified_lp,
        },
        improves,
    ))
}

/// Like [`cheapest_competitor`], but the weights of `q.alpha` are free:
/// searches all probability measures on the support of `q.alpha` together
/// with their competitors for the largest cost improvement. Returns the
/// challenged measure, its cheapest competitor and the improvement flag.
pub fn cheapest_reweighted_competitor<T: Scalar>(
    q: &CompetitorQuery<'_, T>,
) -> Result<(DiscreteMeasure<T>, Competitor<T>, bool)> {
    let mut seen = std::collections::HashSet::new();
    let candidates: Vec<&GroundPoint<T>> = q
        .candidate_points
        .iter()
        .filter(|z| seen.insert(z.key()))
        .collect();
    let support = q.alpha.points();
    if let Some(z) = support.iter().find(|z| !seen.contains(&z.key())) {
        return Err(Error::Instance(format!(
            "candidate grid does not contain the atom {:?}",
            z.0
        )));
    }

    // columns: weights on the support, then competitor masses
    let (s, m) = (support.len(), candidates.len());
    let mut mass_alpha = vec![T::one(); s];
    mass_alpha.resize(s + m, T::zero());
    let mut mass_comp = vec![T::zero(); s];
    mass_comp.resize(s + m, T::one());
    let mut rows = vec![mass_alpha, mass_comp];
    for f in &q.family.functions {
        let mut row = Vec::with_capacity(s + m);
        for z in support {
            row.push(-f.eval(z)?);
        }
        for z in &candidates {
            row.push(f.eval(z)?);
        }
        rows.push(row);
    }
    let mut rhs = vec![T::one(), T::one()];
    rhs.resize(rows.len(), T::zero());
    let mut costs = Vec::with_capacity(s + m);
    for z in support {
        costs.push(-q.cost.eval(z)?);
    }
    for z in &candidates {
        costs.push(q.cost.eval(z)?);
    }
    let lp = LinearProgram::new(rows, rhs, costs)?;
    let result = solve_lp(&lp, &q.lp_tol)?;
    if result.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "reweighted competitor LP is {:?} although it is bounded and feasible",
            result.status
        )));
    }
    let certified_lp = verify_certificate(&lp, &result, &q.lp_tol).passed;
    let keep = |points: Vec<GroundPoint<T>>, x: &[T]| -> Result<DiscreteMeasure<T>> {
        let (p, w): (Vec<_>, Vec<_>) = points
            .into_iter()
            .zip(x)
            .filter(|(_, &w)| w > T::merge_tol())
            .map(|(z, &w)| (z, w))
            .unzip();
        DiscreteMeasure::with_dim(q.alpha.dim(), p, w)
    };
    let alpha = keep(support.to_vec(), &result.x[..s])?;
    let measure = keep(candidates.into_iter().cloned().collect(), &result.x[s..])?;
    let baseline = q.cost.integrate(&alpha)?;
    let cost = q.cost.integrate(&measure)?;
    let threshold = q.improvement_tol * (T::one() + baseline.abs());
    let improves = cost < baseline - threshold;
    Ok((
        alpha,
        Competitor {
            measure,
            cost,
            baseline,
            certified_lp,
        },
        improves,
    ))
}

/// Returns a better competitor of `q.alpha` on the candidate grid, if any.
pub fn find_better_competitor<T: Scalar>(
    q: &CompetitorQuery<'_, T>,
) -> Result<Option<Competitor<T>>> {
    let (c, improves) = cheapest_competitor(q)?;
    Ok(improves.then_some(c))
}

/// Cartesian product of the per-axis projections of `alpha`'s support,
/// optionally widened by the projections of `extend_with`.
pub fn candidate_grid<T: Scalar>(
    alpha: &DiscreteMeasure<T>,
    extend_with: Option<&DiscreteMeasure<T>>,
) -> Vec<GroundPoint<T>> {
    let axes: Vec<Vec<T>> = (0..alpha.dim())
        .map(|axis| {
            let own = alpha.points().iter().map(|p| p.coord(axis));
            match extend_with {
                Some(m) => sorted_unique(own.chain(m.points().iter().map(|p| p.coord(axis)))),
                None => sorted_unique(own),
            }
        })
        .collect();
    cartesian(&axes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Certified,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub enum Witness<T> {
    /// A sub-measure of the plan and a better competitor of it.
    Competitor {
        alpha: DiscreteMeasure<T>,
        competitor: DiscreteMeasure<T>,
        alpha_cost: T,
        competitor_cost: T,
    },
    /// Pairs `(x_i, y_i)` in cycle order; rerouting sends `x_i` to `y_{i+1}`.
    Cycle {
        pairs: Vec<GroundPoint<T>>,
        original_cost: T,
        rerouted_cost: T,
    },
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct Verdict<T> {
    pub status: VerdictStatus,
    pub witness: Option<Witness<T>>,
    /// Largest cost improvement found; positive and above the threshold
    /// exactly when the status is `Violated`.
    pub margin: T,
    /// Number of sub-measures (or cycles) examined.
    pub checked: usize,
    /// Whether every sub-measure of the requested size was examined.
    pub exhaustive: bool,
    pub lp_solves: usize,
    /// Competitor LPs whose certificate re-check failed.
    pub certificate_failures: usize,
}

impl<T: Scalar> Verdict<T> {
    pub fn is_certified(&self) -> bool {
        self.status == VerdictStatus::Certified
    }
}

/// Settings for [`is_finitely_minimal`].
#[derive(Debug, Clone, Copy)]
pub struct MinimalityOptions<T> {
    /// Atom budget of the tested sub-measures.
    pub k: usize,
    /// Random subsets drawn when exhaustive enumeration is too large.
    pub trials: usize,
    pub seed: u64,
    /// Widen each candidate grid by the plan's full per-axis projections.
    pub extend_candidates: bool,
    pub improvement_tol: T,
    pub lp_tol: Tolerances<T>,
    /// Enumerate all subsets when there are at most this many.
    pub exhaustive_limit: usize,
}

impl<T: Scalar> Default for MinimalityOptions<T> {
    fn default() -> Self {
        MinimalityOptions {
            k: 2,
            trials: 1000,
            seed: 0,
            extend_candidates: false,
            improvement_tol: T::lit(1e-8).max(T::default_tol()),
            lp_tol: Tolerances::default(),
            exhaustive_limit: 10_000,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Searches for a sub-measure of `plan` on at most `k` atoms that has a
/// better competitor.
///
/// Only subsets of exactly `min(k, |supp|)` atoms are examined: if a smaller
/// sub-measure `α ≤ β` has a better competitor `α'`, then `β - α + α'` is a
/// better competitor of `β` on a candidate grid containing that of `α`.
/// The weights of each tested sub-measure are optimized over all probability
/// measures on the chosen atoms, not inherited from the plan.
pub fn is_finitely_minimal<T: Scalar>(
    plan: &DiscreteMeasure<T>,
    cost: &CostSpec<T>,
    family: &ConstraintFamily<T>,
    opts: &MinimalityOptions<T>,
) -> Result<Verdict<T>> {
    if opts.k < 2 {
        return Err(Error::Domain(format!(
            "atom budget k = {} must be at least 2",
            opts.k
        )));
    }
    let s = plan.len();
    let size = opts.k.min(s);
    let total = binomial(s, size);
    let exhaustive = total <= opts.exhaustive_limit;

    let mut verdict = Verdict {
        status: VerdictStatus::Certified,
        witness: None,
        margin: T::neg_infinity(),
        checked: 0,
        exhaustive,
        lp_solves: 0,
        certificate_failures: 0,
    };
    if s == 0 {
        verdict.margin = T::zero();
        return Ok(verdict);
    }

    let extension = opts.extend_candidates.then_some(plan);
    let check = |indices: &[usize], verdict: &mut Verdict<T>| -> Result<bool> {
        let atoms = plan.restrict(indices);
        let grid = candidate_grid(&atoms, extension);
        let query = CompetitorQuery {
            alpha: &atoms,
            candidate_points: &grid,
            cost,
            family,
            improvement_tol: opts.improvement_tol,
            lp_tol: opts.lp_tol,
        };
        let (alpha, best, improves) = cheapest_reweighted_competitor(&query)?;
        verdict.checked += 1;
        verdict.lp_solves += 1;
        if !best.certified_lp {
            verdict.certificate_failures += 1;
        }
        verdict.margin = verdict.margin.max(best.improvement());
        if improves {
            verdict.status = VerdictStatus::Violated;
            verdict.margin = best.improvement();
            verdict.witness = Some(Witness::Competitor {
                alpha_cost: best.baseline,
                competitor_cost: best.cost,
                alpha,
                competitor: best.measure,
            });
            return Ok(true);
        }
        Ok(false)
    };

    if exhaustive {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if check(&idx, &mut verdict)? {
                return Ok(verdict);
            }
            if !next_combination(&mut idx, s) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.trials {
            let mut idx = sample(&mut rng, s, size).into_vec();
            idx.sort_unstable();
            if check(&idx, &mut verdict)? {
                return Ok(verdict);
            }
        }
    }
    Ok(verdict)
}

/// Checks c-cyclical monotonicity of a finite set of pairs `(x, y)`.
///
/// Builds the complete digraph on the pairs with `w(p → q) = c(x_p, y_q) -
/// c(x_p, y_p)` and runs Bellman-Ford from a virtual source. A cycle of
/// total weight below `-slack` is a cyclic reassignment that lowers the cost.
pub fn check_cyclical_monotone<T: Scalar>(
    pairs: &[GroundPoint<T>],
    cost: &CostSpec<T>,
    slack: T,
) -> Result<Verdict<T>> {
    if let Some(p) = pairs.iter().find(|p| p.dim() != 2) {
        return Err(Error::Domain(format!(
            "cyclical monotonicity needs pairs (x, y), got a point of dimension {}",
            p.dim()
        )));
    }
    let mut keys = std::collections::HashSet::new();
    if !pairs.iter().all(|p| keys.insert(p.key())) {
        return Err(Error::Domain("pairs must be distinct".into()));
    }
    let n = pairs.len();
    let at = |x: T, y: T| cost.eval(&GroundPoint(vec![x, y]));
    let mut own = Vec::with_capacity(n);
    for p in pairs {
        own.push(at(p.0[0], p.0[1])?);
    }
    let mut w = vec![T::zero(); n * n];
    for p in 0..n {
        for q in 0..n {
            if p != q {
                w[p * n + q] = at(pairs[p].0[0], pairs[q].0[1])? - own[p];
            }
        }
    }

    let witness_of = |cycle: &[usize]| -> (T, T) {
        let original = cycle.iter().fold(T::zero(), |acc, &p| acc + own[p]);
        let rerouted = cycle.iter().enumerate().fold(T::zero(), |acc, (i, &p)| {
            let q = cycle[(i + 1) % cycle.len()];
            acc + w[p * n + q] + own[p]
        });
        (original, rerouted)
    };
    let violated = |cycle: Vec<usize>, checked: usize| -> Verdict<T> {
        let (original, rerouted) = witness_of(&cycle);
        Verdict {
            status: VerdictStatus::Violated,
            witness: Some(Witness::Cycle {
                pairs: cycle.iter().map(|&p| pairs[p].clone()).collect(),
                original_cost: original,
                rerouted_cost: rerouted,
            }),
            margin: original - rerouted,
            checked,
            exhaustive: true,
            lp_solves: 0,
            certificate_failures: 0,
        }
    };
    let certified = |checked: usize| Verdict {
        status: VerdictStatus::Certified,
        witness: None,
        margin: T::zero(),
        checked,
        exhaustive: true,
        lp_solves: 0,
        certificate_failures: 0,
    };
    if n < 2 {
        return Ok(certified(0));
    }

    // relaxing only by more than tau keeps every surviving cycle above -slack
    let tau = slack / T::from_usize_lossy(n);
    let mut dist = vec![T::zero(); n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let max_rounds = n * n + n;
    for round in 0..max_rounds {
        let mut last = None;
        for p in 0..n {
            for q in 0..n {
                if p != q && dist[p] + w[p * n + q] < dist[q] - tau {
                    dist[q] = dist[p] + w[p * n + q];
                    pred[q] = Some(p);
                    last = Some(q);
                }
            }
        }
        let Some(v) = last else {
            return Ok(certified(round + 1));
        };
        if round + 1 >= n {
            if let Some(cycle) = predecessor_cycle(&pred, v, n) {
                let total = cycle.iter().enumerate().fold(T::zero(), |acc, (i, &p)| {
                    acc + w[p * n + cycle[(i + 1) % cycle.len()]]
                });
                if total < -slack {
                    return Ok(violated(cycle, round + 1));
                }
            }
        }
    }
    // Relaxations kept going without exposing a cycle below -slack through
    // the predecessor graph; settle it with an all-pairs search.
    match most_negative_cycle(&w, n) {
        Some((cycle, total)) if total < -slack => Ok(violated(cycle, max_rounds)),
        _ => Ok(certified(max_rounds)),
    }
}

/// Cycle of the predecessor graph reached by walking back from `v`, in
/// forward edge order.
fn predecessor_cycle(pred: &[Option<usize>], v: usize, n: usize) -> Option<Vec<usize>> {
    let mut u = v;
    for _ in 0..n {
        u = pred[u]?;
    }
    let start = u;
    let mut cycle = vec![start];
    let mut cur = pred[start]?;
    while cur != start {
        cycle.push(cur);
        cur = pred[cur]?;
        if cycle.len() > n {
            return None;
        }
    }
    cycle.reverse();
    Some(cycle)
}

/// Floyd-Warshall search for the cycle with the most negative closing weight.
fn most_negative_cycle<T: Scalar>(w: &[T], n: usize) -> Option<(Vec<usize>, T)> {
    let mut d: Vec<T> = (0..n * n)
        .map(|i| if i / n == i % n { T::infinity() } else { w[i] })
        .collect();
    let mut next: Vec<usize> = (0..n * n).map(|i| i % n).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                    next[i * n + j] = next[i * n + k];
                }
            }
        }
    }
    let i = (0..n).min_by(|&a, &b| {
        d[a * n + a]
            .partial_cmp(&d[b * n + b])
            .unwrap_or(std::cmp::Ordering::Equal)
    })?;
    if d[i * n + i] >= T::zero() {
        return None;
    }
    let mut cycle = vec![i];
    let mut cur = next[i * n + i];
    while cur != i && cycle.len() <= n {
        cycle.push(cur);
        cur = next[cur * n + i];
    }
    let total = cycle.iter().enumerate().fold(T::zero(), |acc, (k, &p)| {
        acc + w[p * n + cycle[(k + 1) % cycle.len()]]
    });
    Some((cycle, total))
}

/// `f' = max(f, g)` and `g' = min(f, g)` on the coordinates in `subset`,
/// `f` and `g` unchanged elsewhere.
pub fn monotone_swap<T: Scalar>(
    f: &GroundPoint<T>,
    g: &GroundPoint<T>,
    subset: &[usize],
) -> Result<(GroundPoint<T>, GroundPoint<T>)> {
    if f.dim() != g.dim() {
        return Err(Error::Domain(
            "monotone swap of points of different dimension".into(),
        ));
    }
    let mut hi = f.clone();
    let mut lo = g.clone();
    for &i in subset {
        if i >= f.dim() {
            return Err(Error::Domain(format!("coordinate {i} out of range")));
        }
        hi.0[i] = f.0[i].max(g.0[i]);
        lo.0[i] = f.0[i].min(g.0[i]);
    }
    Ok((hi, lo))
}

/// Whether two points are comparable in the componentwise order.
pub fn comparable<T: Scalar>(f: &GroundPoint<T>, g: &GroundPoint<T>) -> bool {
    f.le(g) || g.le(f)
}
