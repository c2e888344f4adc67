//! The random arc model: an expected adjacency matrix `Ā` of independent arc
//! probabilities, Bernoulli realizations `A`, and degree statistics.
//!
//! # Sampling contract
//!
//! [`sample`] draws from `ChaCha8Rng` seeded with [`SeedableRng::seed_from_u64`].
//! Exactly one `f64` in `[0, 1)` is consumed per ordered pair `(i, j)`, in
//! row-major order (`i` outer, `j` inner, diagonal included), and the arc is
//! present iff the draw is strictly below `Ā[i][j]`. Pairs with probability
//! 0 or 1 still consume their draw, so the draw index of `(i, j)` is always
//! `i·n + j` and changing one entry of `Ā` never shifts the others.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Matrix of independent arc probabilities.
///
/// Construction does not validate; call [`ExpectedAdjacency::validate`] (or
/// use [`ExpectedAdjacency::try_new`]) before relying on the invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedAdjacency {
    entries: DMatrix<f64>,
    allow_self_loops: bool,
}

/// One broken [`ExpectedAdjacency`] invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonFinite { row: usize, col: usize },
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    SelfLoop { vertex: usize, value: f64 },
    ZeroOutDegree { vertex: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { row, col } => write!(f, "non-finite entry at ({row},{col})"),
            Violation::EntryOutOfRange { row, col, value } => {
                write!(f, "entry out of [0,1] at ({row},{col}): {value}")
            }
            Violation::SelfLoop { vertex, value } => {
                write!(f, "self loop at vertex {vertex} with probability {value} but self loops are disabled")
            }
            Violation::ZeroOutDegree { vertex } => write!(f, "expected out-degree 0 at vertex {vertex}"),
        }
    }
}

impl ExpectedAdjacency {
    /// Wraps a square probability matrix without validating it.
    ///
    /// Panics if `entries` is not square.
    pub fn from_matrix(entries: DMatrix<f64>, allow_self_loops: bool) -> Self {
        assert!(entries.is_square(), "expected adjacency must be square");
        Self {
            entries,
            allow_self_loops,
        }
    }

    pub fn from_fn(n: usize, allow_self_loops: bool, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_matrix(DMatrix::from_fn(n, n, f), allow_self_loops)
    }

    /// Validating constructor.
    pub fn try_new(entries: DMatrix<f64>, allow_self_loops: bool) -> Result<Self> {
        let adjacency = Self::from_matrix(entries, allow_self_loops);
        adjacency.ensure_valid()?;
        Ok(adjacency)
    }

    /// `n×n` matrix with probability `p` off the diagonal and 0 on it.
    pub fn uniform(n: usize, p: f64) -> Self {
        Self::from_fn(n, false, |i, j| if i == j { 0.0 } else { p })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn allow_self_loops(&self) -> bool {
        self.allow_self_loops
    }

    /// Expected out-degrees `d̄ᵢᵒᵘᵗ` (row sums).
    pub fn out_degrees(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// Expected in-degrees `d̄ᵢⁱⁿ` (column sums).
    pub fn in_degrees(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    /// True when every entry is exactly 0 or 1, so sampling is deterministic.
    pub fn is_deterministic(&self) -> bool {
        self.entries.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Lists every broken invariant; empty iff the matrix is a valid model.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n();
        let mut violations = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let value = self.entries[(i, j)];
                if !value.is_finite() {
                    violations.push(Violation::NonFinite { row: i, col: j });
                } else if !(0.0..=1.0).contains(&value) {
                    violations.push(Violation::EntryOutOfRange { row: i, col: j, value });
                }
            }
        }
        if !self.allow_self_loops {
            for i in 0..n {
                let value = self.entries[(i, i)];
                if value != 0.0 && value.is_finite() && (0.0..=1.0).contains(&value) {
                    violations.push(Violation::SelfLoop { vertex: i, value });
                }
            }
        }
        for (i, d) in self.out_degrees().into_iter().enumerate() {
            // NaN rows were already reported as non-finite entries.
            if d.is_finite() && d <= 0.0 {
                violations.push(Violation::ZeroOutDegree { vertex: i });
            }
        }
        violations
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        Self::reject(self.validate())
    }

    /// Entry-level checks only; a zero row is still a samplable model.
    pub(crate) fn ensure_samplable(&self) -> Result<()> {
        Self::reject(
            self.validate()
                .into_iter()
                .filter(|v| !matches!(v, Violation::ZeroOutDegree { .. }))
                .collect(),
        )
    }

    fn reject(violations: Vec<Violation>) -> Result<()> {
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidAdjacency(violations))
        }
    }
}

/// A 0/1 adjacency matrix realized from an [`ExpectedAdjacency`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledDigraph {
    adjacency: DMatrix<u8>,
    seed: Option<u64>,
    in_degrees: Vec<usize>,
    out_degrees: Vec<usize>,
}

impl SampledDigraph {
    /// Builds a digraph from an explicit 0/1 matrix.
    pub fn from_adjacency(adjacency: DMatrix<u8>) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::DimensionMismatch {
                expected: adjacency.nrows(),
                found: adjacency.ncols(),
            });
        }
        if let Some(bad) = adjacency.iter().find(|&&a| a > 1) {
            return Err(Error::OutOfRange {
                what: "adjacency entry",
                value: f64::from(*bad),
            });
        }
        Ok(Self::from_checked(adjacency, None))
    }

    /// Builds a digraph on `n` vertices from a list of arcs `(i, j)`.
    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = DMatrix::<u8>::zeros(n, n);
        for (i, j) in arcs {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
            adjacency[(i, j)] = 1;
        }
        Ok(Self::from_checked(adjacency, None))
    }

    fn from_checked(adjacency: DMatrix<u8>, seed: Option<u64>) -> Self {
        let out_degrees = adjacency
            .row_iter()
            .map(|r| r.iter().map(|&a| usize::from(a)).sum())
            .collect();
        let in_degrees = adjacency
            .column_iter()
            .map(|c| c.iter().map(|&a| usize::from(a)).sum())
            .collect();
        Self {
            adjacency,
            seed,
            in_degrees,
            out_degrees,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn adjacency(&self) -> &DMatrix<u8> {
        &self.adjacency
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] == 1
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degrees
    }

    pub fn out_degrees(&self) -> &[usize] {
        &self.out_degrees
    }

    pub fn arc_count(&self) -> usize {
        self.out_degrees.iter().sum()
    }

    /// Arcs in row-major order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| self.has_arc(i, j)).map(move |j| (i, j)))
    }

    /// Vertices with out-degree 0.
    pub fn sinks(&self) -> Vec<usize> {
        self.out_degrees
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.adjacency.map(f64::from)
    }
}

/// Draws every arc independently with its probability in `expected`.
///
/// Rows with expected out-degree 0 are allowed here and give sinks.
pub fn sample(expected: &ExpectedAdjacency, seed: u64) -> Result<SampledDigraph> {
    expected.ensure_samplable()?;
    let n = expected.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency = DMatrix::<u8>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let u: f64 = rng.random();
            if u < expected.get(i, j) {
                adjacency[(i, j)] = 1;
            }
        }
    }
    Ok(SampledDigraph::from_checked(adjacency, Some(seed)))
}

/// Anything with per-vertex in/out degrees.
pub trait DegreeSource {
    fn in_degree_values(&self) -> Vec<f64>;
    fn out_degree_values(&self) -> Vec<f64>;
}

impl DegreeSource for ExpectedAdjacency {
    fn in_degree_values(&self) -> Vec<f64> {
        self.in_degrees()
    }

    fn out_degree_values(&self) -> Vec<f64> {
        self.out_degrees()
    }
}

impl DegreeSource for SampledDigraph {
    fn in_degree_values(&self) -> Vec<f64> {
        self.in_degrees.iter().map(|&d| d as f64).collect()
    }

    fn out_degree_values(&self) -> Vec<f64> {
        self.out_degrees.iter().map(|&d| d as f64).collect()
    }
}

/// Degree tallies and their extremes.
///
/// `d_max` is the larger of the in/out maxima.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeStats {
    pub in_degrees: Vec<f64>,
    pub out_degrees: Vec<f64>,
    pub d_min_in: f64,
    pub d_max_in: f64,
    pub d_min_out: f64,
    pub d_max_out: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl DegreeStats {
    pub fn from_degrees(in_degrees: Vec<f64>, out_degrees: Vec<f64>) -> Self {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (d_min_in, d_max_in) = (min(&in_degrees), max(&in_degrees));
        let (d_min_out, d_max_out) = (min(&out_degrees), max(&out_degrees));
        Self {
            d_min: d_min_in.min(d_min_out),
            d_max: d_max_in.max(d_max_out),
            in_degrees,
            out_degrees,
            d_min_in,
            d_max_in,
            d_min_out,
            d_max_out,
        }
    }
}

pub fn degree_stats(source: &impl DegreeSource) -> DegreeStats {
    DegreeStats::from_degrees(source.in_degree_values(), source.out_degree_values())
}

/// `|d̄ − d| < d̄^{2/3}`. A zero deviation always counts as holding, which
/// covers vertices whose expected degree is 0.
pub fn concentration_event(expected: f64, realized: f64) -> bool {
    let deviation = (expected - realized).abs();
    deviation == 0.0 || deviation < expected.powf(2.0 / 3.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexEvent {
    pub in_deviation: f64,
    pub out_deviation: f64,
    pub in_held: bool,
    pub out_held: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeEvents {
    pub per_vertex: Vec<VertexEvent>,
    pub all_held: bool,
}

impl DegreeEvents {
    /// Number of vertices where at least one of the two events failed.
    pub fn violations(&self) -> usize {
        self.per_vertex
            .iter()
            .filter(|e| !(e.in_held && e.out_held))
            .count()
    }
}

/// Evaluates the simultaneous degree concentration events for one sample.
pub fn degree_events(expected: &ExpectedAdjacency, sampled: &SampledDigraph) -> Result<DegreeEvents> {
    if expected.n() != sampled.n() {
        return Err(Error::DimensionMismatch {
            expected: expected.n(),
            found: sampled.n(),
        });
    }
    let expected_in = expected.in_degrees();
    let expected_out = expected.out_degrees();
    let per_vertex: Vec<VertexEvent> = (0..expected.n())
        .map(|i| {
            let d_in = sampled.in_degrees()[i] as f64;
            let d_out = sampled.out_degrees()[i] as f64;
            VertexEvent {
                in_deviation: (expected_in[i] - d_in).abs(),
                out_deviation: (expected_out[i] - d_out).abs(),
                in_held: concentration_event(expected_in[i], d_in),
                out_held: concentration_event(expected_out[i], d_out),
            }
        })
        .collect();
    let all_held = per_vertex.iter().all(|e| e.in_held && e.out_held);
    Ok(DegreeEvents {
        per_vertex,
        all_held,
    })
}

/// `4·n·exp(−d_min^{1/3}/3)` before clamping; may exceed 1.
pub fn failure_probability_unclamped(n: usize, d_min: f64) -> Result<f64> {
    if !(d_min > 0.0) {
        return Err(Error::NonPositive {
            what: "d_min",
            value: d_min,
        });
    }
    Ok(4.0 * n as f64 * (-d_min.cbrt() / 3.0).exp())
}

/// Union-bound failure probability of the degree events, clamped to `[0, 1]`.
/// A value of 1 means the guarantee is vacuous.
pub fn failure_probability_bound(n: usize, d_min: f64) -> Result<f64> {
    failure_probability_unclamped(n, d_min).map(|p| p.min(1.0))
}
