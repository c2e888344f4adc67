//! Row-stochastic transition matrices, stationary distributions and the
//! chi-squared norm.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::Serialize;

use crate::randgraph::{ExpectedAdjacency, SampledDigraph};
use crate::{Error, Result};

/// Row sums of every constructed transition matrix are within this of 1.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Bound on `‖φᵀP − φᵀ‖₂` accepted from the direct solver.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;
/// Unit-sum tolerance of [`Distribution`].
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_TOL: f64 = 1e-8;
pub const POWER_ITERATION_CAP: usize = 1_000_000;

/// Row-stochastic matrix of a random walk.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    rows: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Checks nonnegativity and unit row sums (within [`ROW_SUM_TOL`]).
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if !rows.is_square() {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows(),
                found: rows.ncols(),
            });
        }
        for (i, row) in rows.row_iter().enumerate() {
            if let Some(j) = row.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::NotStochastic(format!(
                    "entry ({i},{j}) = {} is negative or non-finite",
                    row[j]
                )));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[(i, j)]
    }

    /// `vᵀP`, returned as a column vector.
    pub fn left_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        self.rows.tr_mul(v)
    }

    /// `I − P`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n()) - &self.rows
    }

    /// Relabels vertices: entry `(i, j)` of the result is `P[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n);
        Self {
            rows: DMatrix::from_fn(n, n, |i, j| self.rows[(perm[i], perm[j])]),
        }
    }
}

/// Nonnegative vector summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    values: Vec<f64>,
}

impl Distribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NotDistribution("empty vector".into()));
        }
        if let Some(i) = values.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::NotDistribution(format!(
                "entry {i} = {} is negative or non-finite",
                values[i]
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::NotDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `vertex`.
    pub fn point(n: usize, vertex: usize) -> Self {
        let mut values = vec![0.0; n];
        values[vertex] = 1.0;
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// `φ_max`
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `φ_min`
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `P = D⁻¹A`: uniform step to an out-neighbour.
pub fn transition(sampled: &SampledDigraph) -> Result<TransitionMatrix> {
    let sinks = sampled.sinks();
    if !sinks.is_empty() {
        return Err(Error::SinkVertices(sinks));
    }
    let n = sampled.n();
    let out = sampled.out_degrees();
    let rows = DMatrix::from_fn(n, n, |i, j| {
        if sampled.has_arc(i, j) {
            1.0 / out[i] as f64
        } else {
            0.0
        }
    });
    Ok(TransitionMatrix { rows })
}

/// `P̄ = D̄⁻¹Ā`. Not the entrywise mean of the random `P`.
pub fn expected_transition(expected: &ExpectedAdjacency) -> Result<TransitionMatrix> {
    expected.ensure_valid()?;
    let out = expected.out_degrees();
    let n = expected.n();
    let rows = DMatrix::from_fn(n, n, |i, j| expected.get(i, j) / out[i]);
    TransitionMatrix::new(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Ergodicity {
    pub irreducible: bool,
    pub aperiodic: bool,
}

impl Ergodicity {
    pub fn is_ergodic(self) -> bool {
        self.irreducible && self.aperiodic
    }

    pub(crate) fn ensure(self) -> Result<()> {
        if self.is_ergodic() {
            Ok(())
        } else {
            Err(Error::NotErgodic {
                irreducible: self.irreducible,
                aperiodic: self.aperiodic,
            })
        }
    }
}

/// BFS levels from vertex 0 over the support of `m` (or its transpose).
fn bfs_levels(m: &DMatrix<f64>, transpose: bool) -> Vec<Option<usize>> {
    let n = m.nrows();
    let mut level = vec![None; n];
    if n == 0 {
        return level;
    }
    let mut queue = VecDeque::from([0usize]);
    level[0] = Some(0);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for v in 0..n {
            let w = if transpose { m[(v, u)] } else { m[(u, v)] };
            if w > 0.0 && level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Irreducibility by forward and backward reachability from vertex 0;
/// aperiodicity as the gcd of `level(u) + 1 − level(v)` over the arcs `u → v`
/// reachable from vertex 0.
pub fn is_ergodic(p: &TransitionMatrix) -> Ergodicity {
    let m = p.matrix();
    let n = p.n();
    let forward = bfs_levels(m, false);
    let backward = bfs_levels(m, true);
    let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);

    let mut period = 0usize;
    for u in 0..n {
        let Some(lu) = forward[u] else { continue };
        for v in 0..n {
            if m[(u, v)] > 0.0 {
                if let Some(lv) = forward[v] {
                    period = gcd(period, (lu + 1).abs_diff(lv));
                }
            }
        }
    }
    Ergodicity {
        irreducible,
        aperiodic: period == 1,
    }
}

/// LU factors of `(I − P)ᵀ` with its last row replaced by `1ᵀ`.
///
/// The replaced equation is redundant (the rows of `(I − P)ᵀ` sum to zero), so
/// for an irreducible chain the factored matrix is nonsingular.
pub(crate) fn unit_sum_system(p: &TransitionMatrix) -> LU<f64, Dyn, Dyn> {
    let n = p.n();
    let mut system = p.laplacian().transpose();
    system.row_mut(n - 1).fill(1.0);
    system.lu()
}

/// `‖vᵀP − vᵀ‖₂`
pub fn stationarity_residual(p: &TransitionMatrix, v: &DVector<f64>) -> f64 {
    (p.left_mul(v) - v).norm()
}

/// Stationary distribution from the singular linear system with one equation
/// swapped for the unit-sum constraint.
pub fn stationary_direct(p: &TransitionMatrix) -> Result<Distribution> {
    is_ergodic(p).ensure()?;
    let n = p.n();
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mut phi = unit_sum_system(p).solve(&rhs).ok_or(Error::IllConditioned {
        residual: f64::INFINITY,
        tolerance: STATIONARY_RESIDUAL_TOL,
    })?;

    // Round-off can leave entries that are truly tiny slightly negative.
    let floor = -1e-13;
    if let Some(&worst) = phi.iter().filter(|&&x| x < 0.0).min_by(|a, b| a.total_cmp(b)) {
        if worst < floor {
            return Err(Error::IllConditioned {
                residual: -worst,
                tolerance: -floor,
            });
        }
        phi.apply(|x| *x = x.max(0.0));
        let s = phi.sum();
        phi /= s;
    }

    let residual = stationarity_residual(p, &phi);
    if !(residual <= STATIONARY_RESIDUAL_TOL) {
        return Err(Error::IllConditioned {
            residual,
            tolerance: STATIONARY_RESIDUAL_TOL,
        });
    }
    Distribution::new(phi.iter().copied().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub distribution: Distribution,
    /// `‖vᵀ − vᵀP‖₂ / gap` at the returned iterate.
    pub certified_error: f64,
    pub iterations: usize,
}

/// Power iteration `v ← vᵀP` stopped by the singular-gap rule
/// `‖vᵀ − vᵀP‖₂ / gap ≤ tol`, where `gap = σ₂(I − P)`.
pub fn stationary_power(
    p: &TransitionMatrix,
    v0: &Distribution,
    tol: f64,
    gap: f64,
) -> Result<PowerResult> {
    if !(gap > 0.0) {
        return Err(Error::NonPositive { what: "gap", value: gap });
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositive { what: "tol", value: tol });
    }
    if v0.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: v0.len(),
        });
    }
    let mut v = v0.to_vector();
    let mut next = p.left_mul(&v);
    let mut certified = (&v - &next).norm() / gap;
    let mut iterations = 0;
    while certified > tol {
        if iterations == POWER_ITERATION_CAP {
            return Err(Error::IterationCap {
                iterations,
                estimate: certified,
                residual: certified * gap,
            });
        }
        v = next;
        next = p.left_mul(&v);
        certified = (&v - &next).norm() / gap;
        iterations += 1;
    }
    // renormalize against drift in the total mass
    let s = v.sum();
    v.apply(|x| *x = x.max(0.0) / s);
    Ok(PowerResult {
        distribution: Distribution::new(v.iter().copied().collect())?,
        certified_error: certified,
        iterations,
    })
}

/// `‖x‖_{2,φ} = √(Σ xᵢ²/φᵢ)`
pub fn chi2_norm(x: &[f64], phi: &Distribution) -> Result<f64> {
    if x.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: x.len(),
        });
    }
    if let Some(i) = phi.values().iter().position(|&w| w == 0.0) {
        return Err(Error::ZeroEntry(i));
    }
    Ok(x.iter()
        .zip(phi.values())
        .map(|(xi, wi)| xi * xi / wi)
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tm(rows: &[&[f64]]) -> TransitionMatrix {
        let n = rows.len();
        TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    fn lazy_three_cycle() -> TransitionMatrix {
        tm(&[&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5]])
    }

    #[test]
    fn transition_two_cycle() {
        let g = SampledDigraph::from_arcs(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(transition(&g).unwrap(), tm(&[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn transition_uniform_over_out_neighbours() {
        let g = SampledDigraph::from_arcs(3, [(0, 1), (0, 2), (1, 0), (2, 0), (2, 1)]).unwrap();
        let p = transition(&g).unwrap();
        assert_eq!(
            p,
            tm(&[&[0.0, 0.5, 0.5], &[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0]])
        );
    }

    #[test]
    fn transition_names_every_sink() {
        let g = SampledDigraph::from_arcs(4, [(0, 1), (1, 0)]).unwrap();
        match transition(&g) {
            Err(Error::SinkVertices(v)) => assert_eq!(v, vec![2, 3]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expected_transition_normalizes_rows() {
        let p = expected_transition(&ExpectedAdjacency::uniform(3, 0.5)).unwrap();
        assert_eq!(
            p,
            tm(&[&[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5], &[0.5, 0.5, 0.0]])
        );
    }

    #[test]
    fn expected_transition_matches_deterministic_sample() {
        let a = ExpectedAdjacency::from_fn(5, false, |i, j| {
            if (i + 1) % 5 == j || (i + 2) % 5 == j { 1.0 } else { 0.0 }
        });
        let s = crate::randgraph::sample(&a, 11).unwrap();
        assert_eq!(expected_transition(&a).unwrap(), transition(&s).unwrap());
    }

    #[test]
    fn expected_transition_rejects_invalid() {
        let a = ExpectedAdjacency::from_matrix(DMatrix::zeros(2, 2), false);
        assert!(matches!(
            expected_transition(&a),
            Err(Error::InvalidAdjacency(_))
        ));
    }

    #[test]
    fn stationary_rejects_periodic() {
        let p = tm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(
            stationary_direct(&p),
            Err(Error::NotErgodic { irreducible: true, aperiodic: false })
        ));
    }

    #[test]
    fn stationary_doubly_stochastic_is_uniform() {
        let phi = stationary_direct(&lazy_three_cycle()).unwrap();
        for &x in phi.values() {
            assert!((x - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_three_state_exact() {
        // φ(I − P) = 0 with Σφ = 1, solved by hand: (4/9, 1/3, 2/9)
        let p = tm(&[&[0.0, 0.5, 0.5], &[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0]]);
        let phi = stationary_direct(&p).unwrap();
        let want = [4.0 / 9.0, 1.0 / 3.0, 2.0 / 9.0];
        for (x, w) in phi.values().iter().zip(want) {
            assert!((x - w).abs() < 1e-14, "{x} vs {w}");
        }
        assert!(stationarity_residual(&p, &phi.to_vector()) <= 1e-10);
    }

    #[test]
    fn power_fixed_point_takes_no_steps() {
        let p = lazy_three_cycle();
        let r = stationary_power(&p, &Distribution::uniform(3), 1e-8, 0.5).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.certified_error, 0.0);
    }

    #[test]
    fn power_converges_on_lazy_cycle() {
        let p = lazy_three_cycle();
        let gap = crate::spectral::singular_gap(&p).unwrap().sigma2;
        let r = stationary_power(&p, &Distribution::point(3, 0), 1e-8, gap).unwrap();
        let err = r
            .distribution
            .values()
            .iter()
            .map(|x| (x - 1.0 / 3.0).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r.certified_error <= 1e-8);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn power_hits_cap_on_periodic_chain() {
        let p = tm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        match stationary_power(&p, &Distribution::point(2, 0), 1e-8, 2.0) {
            Err(Error::IterationCap { iterations, estimate, .. }) => {
                assert_eq!(iterations, POWER_ITERATION_CAP);
                assert!(estimate > 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_rejects_bad_parameters() {
        let p = lazy_three_cycle();
        let v = Distribution::uniform(3);
        assert!(stationary_power(&p, &v, 1e-8, 0.0).is_err());
        assert!(stationary_power(&p, &v, 0.0, 1.0).is_err());
    }

    #[test]
    fn chi2_examples() {
        let phi = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(chi2_norm(&[0.0, 0.0], &phi).unwrap(), 0.0);
        assert!((chi2_norm(&[0.1, -0.1], &phi).unwrap() - 0.2).abs() < 1e-15);
        let skew = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        assert!((chi2_norm(skew.values(), &skew).unwrap() - 1.0).abs() < 1e-15);
        let zero = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(chi2_norm(&[1.0, 1.0], &zero), Err(Error::ZeroEntry(1))));
    }

    #[test]
    fn ergodicity_examples() {
        let complete = TransitionMatrix::new(DMatrix::from_element(4, 4, 0.25)).unwrap();
        assert!(is_ergodic(&complete).is_ergodic());

        let two_cycle = tm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(
            is_ergodic(&two_cycle),
            Ergodicity { irreducible: true, aperiodic: false }
        );

        let disjoint = tm(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        assert_eq!(
            is_ergodic(&disjoint),
            Ergodicity { irreducible: false, aperiodic: false }
        );

        // 3-cycle plus a chord giving a 2-cycle: gcd(2, 3) = 1
        let mixed = tm(&[&[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5], &[1.0, 0.0, 0.0]]);
        assert!(is_ergodic(&mixed).is_ergodic());
    }

    #[test]
    fn distribution_rejects_bad_vectors() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
    }

    fn ergodic_chain() -> impl Strategy<Value = TransitionMatrix> {
        (2usize..9).prop_flat_map(|n| {
            proptest::collection::vec(0.01f64..1.0, n * n).prop_map(move |w| {
                let m = DMatrix::from_fn(n, n, |i, j| w[i * n + j]);
                let sums: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
                TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| m[(i, j)] / sums[i])).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn left_multiplication_preserves_mass(p in ergodic_chain(), seed in 0u64..1000) {
            let n = p.n();
            let raw: Vec<f64> = (0..n).map(|i| ((seed + i as u64 * 7919) % 97) as f64 + 1.0).collect();
            let s: f64 = raw.iter().sum();
            let v = DVector::from_iterator(n, raw.iter().map(|x| x / s));
            prop_assert!((p.left_mul(&v).sum() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn stationary_norm_bounded_by_sqrt_max(p in ergodic_chain()) {
            let phi = stationary_direct(&p).unwrap();
            prop_assert!(phi.l2_norm() <= phi.max().sqrt() + 1e-15);
        }

        #[test]
        fn chi2_uniform_identity(x in proptest::collection::vec(-1.0f64..1.0, 1..20)) {
            let n = x.len();
            let direct = chi2_norm(&x, &Distribution::uniform(n)).unwrap();
            let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((direct - (n as f64).sqrt() * l2).abs() <= 1e-12 * (1.0 + direct));
        }

        #[test]
        fn row_scaling_leaves_expected_transition_unchanged(
            n in 2usize..7,
            w in proptest::collection::vec(0.05f64..=1.0, 49),
            scale in proptest::collection::vec(0.1f64..=1.0, 7),
        ) {
            let a = ExpectedAdjacency::from_fn(n, true, |i, j| w[i * 7 + j]);
            let b = ExpectedAdjacency::from_fn(n, true, |i, j| w[i * 7 + j] * scale[i]);
            let (pa, pb) = (expected_transition(&a).unwrap(), expected_transition(&b).unwrap());
            prop_assert!((pa.matrix() - pb.matrix()).amax() <= 1e-15);
        }
    }
}
