//! One-dimensional discrete laws and finitely supported measures on grids.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};

/// A point of the ground space: a vector in `R^n`, or a path sampled on a
/// time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundPoint<T>(pub Vec<T>);

impl<T: Scalar> GroundPoint<T> {
    pub fn new(coords: Vec<T>) -> Self {
        GroundPoint(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn coord(&self, axis: usize) -> T {
        self.0[axis]
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub(crate) fn key(&self) -> PointKey {
        PointKey::of(&self.0)
    }

    /// Lexicographic order on coordinates; NaN never appears in a validated point.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.partial_cmp(b).unwrap_or(Ordering::Equal) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl<T: Scalar> From<Vec<T>> for GroundPoint<T> {
    fn from(v: Vec<T>) -> Self {
        GroundPoint(v)
    }
}

/// Exact hash key for a point: the bit patterns of its coordinates with
/// negative zero folded onto zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct PointKey(Vec<u64>);

impl PointKey {
    pub(crate) fn of<T: Scalar>(coords: &[T]) -> Self {
        PointKey(
            coords
                .iter()
                .map(|c| {
                    let v = c.as_f64();
                    if v == 0.0 {
                        0u64
                    } else {
                        v.to_bits()
                    }
                })
                .collect(),
        )
    }
}

/// A probability law on finitely many real atoms.
///
/// Atoms are strictly increasing; atoms closer than [`Scalar::merge_tol`]
/// are merged and zero-weight atoms dropped, so two equal laws always have
/// identical representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution<T>", into = "RawDistribution<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DiscreteDistribution<T> {
    atoms: Vec<T>,
    weights: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution<T> {
    atoms: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> TryFrom<RawDistribution<T>> for DiscreteDistribution<T> {
    type Error = Error;

    fn try_from(raw: RawDistribution<T>) -> Result<Self> {
        DiscreteDistribution::new(raw.atoms, raw.weights)
    }
}

impl<T: Scalar> From<DiscreteDistribution<T>> for RawDistribution<T> {
    fn from(d: DiscreteDistribution<T>) -> Self {
        RawDistribution {
            atoms: d.atoms,
            weights: d.weights,
        }
    }
}

impl<T: Scalar> DiscreteDistribution<T> {
    /// Builds a distribution from atoms and probabilities. The weights must
    /// be nonnegative and sum to one within the merge tolerance.
    pub fn new(atoms: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let d = Self::canonical(atoms, weights)?;
        let total = compensated_sum(d.weights.iter().copied());
        if (total - T::one()).abs() > T::merge_tol() {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(d)
    }

    /// Builds a distribution from arbitrary positive weights, normalizing them.
    pub fn from_unnormalized(atoms: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let mut d = Self::canonical(atoms, weights)?;
        let total = compensated_sum(d.weights.iter().copied());
        if total <= T::zero() {
            return Err(Error::Degenerate("distribution has zero mass".into()));
        }
        for w in &mut d.weights {
            *w = *w / total;
        }
        Ok(d)
    }

    pub fn uniform(atoms: Vec<T>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(Error::Degenerate("uniform law on no atoms".into()));
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::from_unnormalized(atoms, vec![w; n])
    }

    pub fn point_mass(x: T) -> Self {
        DiscreteDistribution {
            atoms: vec![x],
            weights: vec![T::one()],
        }
    }

    fn canonical(atoms: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::Degenerate("distribution without atoms".into()));
        }
        let mut pairs = Vec::with_capacity(atoms.len());
        for (a, w) in atoms.into_iter().zip(weights) {
            if !a.is_finite() || !w.is_finite() {
                return Err(Error::Domain("non-finite atom or weight".into()));
            }
            if w < T::zero() {
                return Err(Error::Domain(format!("negative weight {w}")));
            }
            pairs.push((a, w));
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));

        let mut atoms: Vec<T> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<T> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&last) if (a - last).abs() <= T::merge_tol() => {
                    *weights.last_mut().unwrap() = *weights.last().unwrap() + w;
                }
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        let (atoms, weights): (Vec<T>, Vec<T>) = atoms
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > T::zero())
            .unzip();
        if atoms.is_empty() {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
        Ok(DiscreteDistribution { atoms, weights })
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weight of the atom equal to `x`, zero if `x` is not an atom.
    pub fn weight_of(&self, x: T) -> T {
        self.atoms
            .iter()
            .position(|&a| a == x)
            .map_or(T::zero(), |i| self.weights[i])
    }

    pub fn mean(&self) -> T {
        compensated_sum(self.atoms.iter().zip(&self.weights).map(|(&a, &w)| a * w))
    }

    /// Cumulative weights `F(a_1), ..., F(a_n)`; the last entry is 1 up to rounding.
    pub fn cumulative(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.weights
            .iter()
            .map(|&w| {
                acc = acc + w;
                acc
            })
            .collect()
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, y: T) -> T {
        compensated_sum(
            self.atoms
                .iter()
                .zip(&self.weights)
                .take_while(|(&a, _)| a <= y)
                .map(|(_, &w)| w),
        )
    }

    /// Left-continuous generalized inverse of the CDF:
    /// `inf { y : F(y) >= u }`, for `u` in the open unit interval.
    pub fn quantile(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::Domain(format!("quantile level {u} outside (0,1)")));
        }
        let mut acc = T::zero();
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            acc = acc + w;
            if acc >= u {
                return Ok(a);
            }
        }
        // cumulative weight fell short of 1 by rounding
        Ok(*self.atoms.last().unwrap())
    }

    /// Call-type potential `k -> sum_i w_i |x_i - k|`.
    pub fn potential(&self, k: T) -> T {
        compensated_sum(
            self.atoms
                .iter()
                .zip(&self.weights)
                .map(|(&a, &w)| w * (a - k).abs()),
        )
    }
}

/// Quantile function evaluated at `u`; see [`DiscreteDistribution::quantile`].
pub fn quantile<T: Scalar>(dist: &DiscreteDistribution<T>, u: T) -> Result<T> {
    dist.quantile(u)
}

pub fn cdf<T: Scalar>(dist: &DiscreteDistribution<T>, y: T) -> T {
    dist.cdf(y)
}

/// Convex-order test `mu <=_c nu` on discrete supports.
///
/// Requires equal means and `U_mu(k) <= U_nu(k) + tol` at every atom of
/// `nu` and at both means. `U_nu` is piecewise linear with kinks only at its
/// atoms while `U_mu` is convex, so these points suffice.
pub fn convex_order<T: Scalar>(
    mu: &DiscreteDistribution<T>,
    nu: &DiscreteDistribution<T>,
    tol: T,
) -> bool {
    let (m_mu, m_nu) = (mu.mean(), nu.mean());
    if (m_mu - m_nu).abs() > tol {
        return false;
    }
    nu.atoms()
        .iter()
        .copied()
        .chain([m_mu, m_nu])
        .all(|k| mu.potential(k) <= nu.potential(k) + tol)
}

/// A nonnegative measure concentrated on finitely many points of a common
/// dimension. Points are kept distinct and sorted lexicographically; zero
/// masses are pruned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure<T>", into = "RawMeasure<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DiscreteMeasure<T> {
    dim: usize,
    points: Vec<GroundPoint<T>>,
    masses: Vec<T>,
}

/// A probability-normalized [`DiscreteMeasure`].
pub type TransportPlan<T> = DiscreteMeasure<T>;

#[derive(Serialize, Deserialize)]
struct RawMeasure<T> {
    points: Vec<Vec<T>>,
    masses: Vec<T>,
}

impl<T: Scalar> TryFrom<RawMeasure<T>> for DiscreteMeasure<T> {
    type Error = Error;

    fn try_from(raw: RawMeasure<T>) -> Result<Self> {
        let dim = raw.points.first().map_or(0, Vec::len);
        DiscreteMeasure::with_dim(
            dim,
            raw.points.into_iter().map(GroundPoint).collect(),
            raw.masses,
        )
    }
}

impl<T: Scalar> From<DiscreteMeasure<T>> for RawMeasure<T> {
    fn from(m: DiscreteMeasure<T>) -> Self {
        RawMeasure {
            points: m.points.into_iter().map(|p| p.0).collect(),
            masses: m.masses,
        }
    }
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Builds a measure; the dimension is taken from the first point.
    pub fn new(points: Vec<GroundPoint<T>>, masses: Vec<T>) -> Result<Self> {
        let dim = points.first().map_or(0, GroundPoint::dim);
        Self::with_dim(dim, points, masses)
    }

    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure {
            dim,
            points: Vec::new(),
            masses: Vec::new(),
        }
    }

    pub fn unit_mass(point: GroundPoint<T>) -> Self {
        DiscreteMeasure {
            dim: point.dim(),
            points: vec![point],
            masses: vec![T::one()],
        }
    }

    pub fn with_dim(dim: usize, points: Vec<GroundPoint<T>>, masses: Vec<T>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::Domain(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        let mut index: HashMap<PointKey, usize> = HashMap::with_capacity(points.len());
        let mut merged: Vec<(GroundPoint<T>, T)> = Vec::with_capacity(points.len());
        for (p, m) in points.into_iter().zip(masses) {
            if p.dim() != dim {
                return Err(Error::Domain(format!(
                    "point of dimension {} in a measure of dimension {dim}",
                    p.dim()
                )));
            }
            if !m.is_finite() || p.0.iter().any(|c| !c.is_finite()) {
                return Err(Error::Domain("non-finite point or mass".into()));
            }
            if m < T::zero() {
                return Err(Error::Domain(format!("negative mass {m}")));
            }
            match index.get(&p.key()) {
                Some(&i) => merged[i].1 = merged[i].1 + m,
                None => {
                    index.insert(p.key(), merged.len());
                    merged.push((p, m));
                }
            }
        }
        merged.retain(|(_, m)| *m > T::zero());
        merged.sort_by(|a, b| a.0.lex_cmp(&b.0));
        let (points, masses) = merged.into_iter().unzip();
        Ok(DiscreteMeasure {
            dim,
            points,
            masses,
        })
    }

    /// Independent coupling of one-dimensional laws (mass products).
    pub fn product(marginals: &[DiscreteDistribution<T>]) -> Result<Self> {
        let grid = product_grid(marginals);
        let masses = grid
            .iter()
            .map(|p| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, d)| d.weight_of(p.coord(i)))
                    .fold(T::one(), |acc, w| acc * w)
            })
            .collect();
        Self::with_dim(marginals.len(), grid, masses)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[GroundPoint<T>] {
        &self.points
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundPoint<T>, T)> + '_ {
        self.points.iter().zip(self.masses.iter().copied())
    }

    pub fn total_mass(&self) -> T {
        compensated_sum(self.masses.iter().copied())
    }

    pub fn is_probability(&self, tol: T) -> bool {
        (self.total_mass() - T::one()).abs() <= tol
    }

    pub fn mass_at(&self, point: &GroundPoint<T>) -> T {
        let key = point.key();
        self.points
            .iter()
            .position(|p| p.key() == key)
            .map_or(T::zero(), |i| self.masses[i])
    }

    /// `factor * self`; a zero factor yields the empty measure.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::with_dim(
            self.dim,
            self.points.clone(),
            self.masses.iter().map(|&m| m * factor).collect(),
        )
    }

    /// Sum of two measures of the same dimension.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if !self.is_empty() && !other.is_empty() && self.dim != other.dim {
            return Err(Error::Domain("dimension mismatch in measure sum".into()));
        }
        let dim = if self.is_empty() { other.dim } else { self.dim };
        let points = self.points.iter().chain(&other.points).cloned().collect();
        let masses = self.masses.iter().chain(&other.masses).copied().collect();
        Self::with_dim(dim, points, masses)
    }

    /// Restriction to the atoms with the given indices.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        DiscreteMeasure {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            masses: indices.iter().map(|&i| self.masses[i]).collect(),
        }
    }

    /// Sorted distinct coordinate values on one axis.
    pub fn axis_values(&self, axis: usize) -> Vec<T> {
        sorted_unique(self.points.iter().map(|p| p.coord(axis)))
    }
}

/// Pushforward of the normalized measure under projection on `axis`,
/// together with the total mass before normalization.
pub fn marginal<T: Scalar>(
    m: &DiscreteMeasure<T>,
    axis: usize,
) -> Result<(DiscreteDistribution<T>, T)> {
    if axis >= m.dim() {
        return Err(Error::Domain(format!(
            "axis {axis} out of range for dimension {}",
            m.dim()
        )));
    }
    let total = m.total_mass();
    if m.is_empty() || total <= T::zero() {
        return Err(Error::Degenerate("marginal of a zero measure".into()));
    }
    let dist = DiscreteDistribution::from_unnormalized(
        m.points().iter().map(|p| p.coord(axis)).collect(),
        m.masses().to_vec(),
    )?;
    Ok((dist, total))
}

/// Cartesian product of the supports of the given laws, in lexicographic order.
pub fn product_grid<T: Scalar>(marginals: &[DiscreteDistribution<T>]) -> Vec<GroundPoint<T>> {
    let axes: Vec<Vec<T>> = marginals.iter().map(|d| d.atoms().to_vec()).collect();
    cartesian(&axes)
}

pub(crate) fn cartesian<T: Scalar>(axes: &[Vec<T>]) -> Vec<GroundPoint<T>> {
    let mut out = vec![GroundPoint(Vec::with_capacity(axes.len()))];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.0.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

pub(crate) fn sorted_unique<T: Scalar>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(atoms: &[f64], weights: &[f64]) -> DiscreteDistribution<f64> {
        DiscreteDistribution::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    fn pt(c: &[f64]) -> GroundPoint<f64> {
        GroundPoint(c.to_vec())
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(
            DiscreteDistribution::point_mass(3.0).quantile(0.7).unwrap(),
            3.0
        );
        let half = d(&[1.0, 2.0], &[0.5, 0.5]);
        assert_eq!(half.quantile(0.5).unwrap(), 1.0);
        assert_eq!(half.quantile(0.75).unwrap(), 2.0);
    }

    #[test]
    fn quantile_rejects_levels_outside_unit_interval() {
        let half = d(&[1.0, 2.0], &[0.5, 0.5]);
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(half.quantile(u), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn cdf_examples() {
        let delta = DiscreteDistribution::point_mass(0.0);
        assert_eq!(delta.cdf(-1.0), 0.0);
        assert_eq!(delta.cdf(0.0), 1.0);
        assert_eq!(d(&[1.0, 2.0], &[0.5, 0.5]).cdf(1.5), 0.5);
    }

    #[test]
    fn construction_merges_and_sorts() {
        let dist = d(&[2.0, 1.0, 1.0 + 1e-14, 5.0], &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(dist.atoms(), &[1.0, 2.0, 5.0]);
        assert_eq!(dist.weights(), &[0.5, 0.25, 0.25]);
        let pruned = d(&[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(pruned.atoms(), &[0.0]);
    }

    #[test]
    fn construction_errors() {
        assert!(DiscreteDistribution::new(vec![0.0], vec![0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDistribution::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn marginal_examples() {
        let m = DiscreteMeasure::unit_mass(pt(&[1.0, 2.0]));
        let (x, total) = marginal(&m, 0).unwrap();
        assert_eq!(
            (x.atoms(), x.weights(), total),
            (&[1.0][..], &[1.0][..], 1.0)
        );

        let m =
            DiscreteMeasure::new(vec![pt(&[0.0, 0.0]), pt(&[0.0, 1.0])], vec![0.5, 0.5]).unwrap();
        let (x, _) = marginal(&m, 0).unwrap();
        assert_eq!(x, DiscreteDistribution::point_mass(0.0));

        let m =
            DiscreteMeasure::new(vec![pt(&[0.0, 1.0]), pt(&[1.0, 0.0])], vec![0.5, 0.5]).unwrap();
        let (y, _) = marginal(&m, 1).unwrap();
        assert_eq!(y, d(&[0.0, 1.0], &[0.5, 0.5]));
    }

    #[test]
    fn marginal_reports_unnormalized_mass() {
        let m = DiscreteMeasure::new(vec![pt(&[0.0]), pt(&[1.0])], vec![0.25, 0.5]).unwrap();
        let (x, total) = marginal(&m, 0).unwrap();
        assert_eq!(total, 0.75);
        assert!((x.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_errors() {
        let empty = DiscreteMeasure::<f64>::empty(2);
        assert!(matches!(marginal(&empty, 0), Err(Error::Degenerate(_))));
        let m = DiscreteMeasure::unit_mass(pt(&[1.0, 2.0]));
        assert!(matches!(marginal(&m, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn convex_order_examples() {
        let mu = DiscreteDistribution::point_mass(0.0);
        let nu = d(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!(convex_order(&mu, &mu, 1e-12));
        assert!(convex_order(&mu, &nu, 1e-12));
        assert!(!convex_order(&nu, &mu, 1e-12));
        // unequal means
        assert!(!convex_order(
            &mu,
            &DiscreteDistribution::point_mass(0.5),
            1e-12
        ));
    }

    #[test]
    fn measure_canonicalization() {
        let m = DiscreteMeasure::new(
            vec![
                pt(&[1.0, 0.0]),
                pt(&[0.0, 1.0]),
                pt(&[1.0, 0.0]),
                pt(&[2.0, 2.0]),
            ],
            vec![0.25, 0.25, 0.25, 0.0],
        )
        .unwrap();
        assert_eq!(m.points(), &[pt(&[0.0, 1.0]), pt(&[1.0, 0.0])]);
        assert_eq!(m.masses(), &[0.25, 0.5]);
        assert!(DiscreteMeasure::new(vec![pt(&[1.0]), pt(&[1.0, 2.0])], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![pt(&[1.0])], vec![-0.5]).is_err());
    }

    #[test]
    fn json_shapes() {
        let dist: DiscreteDistribution<f64> =
            serde_json::from_str(r#"{"atoms":[2,1],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(dist.atoms(), &[1.0, 2.0]);
        assert_eq!(
            serde_json::to_string(&dist).unwrap(),
            r#"{"atoms":[1.0,2.0],"weights":[0.5,0.5]}"#
        );
        let bad: std::result::Result<DiscreteDistribution<f64>, _> =
            serde_json::from_str(r#"{"atoms":[1],"weights":[0.3]}"#);
        assert!(bad.is_err());

        let m: DiscreteMeasure<f64> =
            serde_json::from_str(r#"{"points":[[0,1],[1,0]],"masses":[0.5,0.5]}"#).unwrap();
        assert_eq!(m.dim(), 2);
        let back: DiscreteMeasure<f64> =
            serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn single_precision_works() {
        let dist = DiscreteDistribution::<f32>::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(dist.quantile(0.5).unwrap(), 1.0);
        assert!((dist.mean() - 1.0).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist_strategy() -> impl Strategy<Value = DiscreteDistribution<f64>> {
            prop::collection::vec((-50i32..50, 1u32..20), 1..7).prop_map(|v| {
                let (a, w): (Vec<f64>, Vec<f64>) = v
                    .into_iter()
                    .map(|(a, w)| (a as f64 * 0.5, w as f64))
                    .unzip();
                DiscreteDistribution::from_unnormalized(a, w).unwrap()
            })
        }

        proptest! {
            #[test]
            fn quantile_inverts_cdf_on_each_cell(dist in dist_strategy(), frac in 0.001f64..=1.0) {
                let cum = dist.cumulative();
                for (i, &x) in dist.atoms().iter().enumerate() {
                    let lo = if i == 0 { 0.0 } else { cum[i - 1] };
                    let u = lo + frac * dist.weights()[i];
                    if u > 0.0 && u < 1.0 {
                        prop_assert_eq!(dist.quantile(u).unwrap(), x);
                    }
                }
            }

            #[test]
            fn product_marginals_recover_factors(mu in dist_strategy(), nu in dist_strategy()) {
                let coupling = DiscreteMeasure::product(&[mu.clone(), nu.clone()]).unwrap();
                for (axis, factor) in [(0, &mu), (1, &nu)] {
                    let (m, _) = marginal(&coupling, axis).unwrap();
                    prop_assert_eq!(m.atoms(), factor.atoms());
                    for (a, b) in m.weights().iter().zip(factor.weights()) {
                        prop_assert!((a - b).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn convex_order_reflexive_and_mean_preserving(mu in dist_strategy(), nu in dist_strategy()) {
                let tol = 1e-9;
                prop_assert!(convex_order(&mu, &mu, tol));
                if convex_order(&mu, &nu, tol) {
                    prop_assert!((mu.mean() - nu.mean()).abs() <= tol);
                }
            }
        }
    }
}
