//! Example families: Gambler's Ruin, Tourist's Ruin, directed `G(n, p)`,
//! the PageRank coupling `R = α/(n−1)·(J − I) + (1 − α)P`, and a grid search
//! for the constant `k` in `σ₂(I − R) ≥ α/k`.
//!
//! Vertices are 0-based here; the Gambler's Ruin shortcut arcs `1→n`, `n→1`,
//! `2→n` are `0→n−1`, `n−1→0`, `1→n−1`.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{expected_transition, is_ergodic, transition, TransitionMatrix};
use crate::format::read_expected;
use crate::randgraph::{sample, ExpectedAdjacency, SampledDigraph};
use crate::spectral::singular_gap;
use crate::{Error, Result};

pub const DEFAULT_SHORTCUT_PROBABILITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gamblers,
    Tourists,
    Gnp,
    CustomFile,
}

/// Which steps `j − i` the Gambler's Ruin walk may take.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftVariant {
    /// `{+1, −1, −2}`: moving down is twice as likely as moving up.
    #[default]
    DecreaseHeavy,
    /// `{+1, +2, −1}`
    IncreaseHeavy,
}

impl DriftVariant {
    pub fn steps(self) -> [isize; 3] {
        match self {
            DriftVariant::DecreaseHeavy => [1, -1, -2],
            DriftVariant::IncreaseHeavy => [1, 2, -1],
        }
    }
}

/// One member of a family. `param` is `p` for `G(n, p)` and `β` for
/// Tourist's Ruin; Gambler's Ruin ignores it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub n: usize,
    pub param: f64,
    pub drift_variant: DriftVariant,
    pub shortcut_probability: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl FamilySpec {
    pub fn gamblers(n: usize, drift_variant: DriftVariant, shortcut_probability: f64, seed: u64) -> Self {
        Self {
            family: Family::Gamblers,
            n,
            param: 0.0,
            drift_variant,
            shortcut_probability,
            seed,
            path: None,
        }
    }

    pub fn tourists(n: usize, beta: f64, seed: u64) -> Self {
        Self {
            family: Family::Tourists,
            param: beta,
            ..Self::gamblers(n, DriftVariant::default(), DEFAULT_SHORTCUT_PROBABILITY, seed)
        }
    }

    pub fn gnp(n: usize, p: f64, seed: u64) -> Self {
        Self {
            family: Family::Gnp,
            param: p,
            ..Self::gamblers(n, DriftVariant::default(), DEFAULT_SHORTCUT_PROBABILITY, seed)
        }
    }

    pub fn custom_file(path: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            family: Family::CustomFile,
            n: 0,
            param: 0.0,
            path: Some(path.into()),
            ..Self::gamblers(0, DriftVariant::default(), DEFAULT_SHORTCUT_PROBABILITY, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n as f64;
        match self.family {
            Family::Gamblers => {
                if self.n < 4 {
                    return Err(Error::OutOfRange { what: "n (need n >= 4)", value: n });
                }
                check_probability("shortcut probability", self.shortcut_probability, true)
            }
            Family::Tourists => {
                if self.n < 3 {
                    return Err(Error::OutOfRange { what: "n (need n >= 3)", value: n });
                }
                if !(self.param > 0.0 && self.param.is_finite()) {
                    return Err(Error::OutOfRange { what: "beta", value: self.param });
                }
                Ok(())
            }
            Family::Gnp => {
                if self.n < 3 {
                    return Err(Error::OutOfRange { what: "n (need n >= 3)", value: n });
                }
                check_probability("p", self.param, false)
            }
            Family::CustomFile => match self.path {
                Some(_) => Ok(()),
                None => Err(Error::InvalidSpec("custom-file family needs a path".into())),
            },
        }
    }

    /// Expected adjacency of this member.
    pub fn expected(&self) -> Result<ExpectedAdjacency> {
        self.validate()?;
        match self.family {
            Family::Gamblers => Ok(gamblers_expected(self.n, self.drift_variant, self.shortcut_probability)),
            Family::Tourists => Ok(tourists_expected(self.n, self.param)),
            Family::Gnp => Ok(gnp_expected(self.n, self.param)),
            Family::CustomFile => read_expected(self.path.as_ref().expect("validated")),
        }
    }

    /// Expected adjacency and its sample at `self.seed`.
    pub fn generate(&self) -> Result<(ExpectedAdjacency, SampledDigraph)> {
        let expected = self.expected()?;
        let sampled = sample(&expected, self.seed)?;
        Ok((expected, sampled))
    }
}

fn check_probability(what: &'static str, value: f64, allow_zero: bool) -> Result<()> {
    let low_ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
    if low_ok && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

fn gamblers_expected(n: usize, variant: DriftVariant, shortcut: f64) -> ExpectedAdjacency {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for s in variant.steps() {
            let j = i as isize + s;
            if (0..n as isize).contains(&j) {
                m[(i, j as usize)] = 1.0;
            }
        }
    }
    let last = n - 1;
    for (i, j) in [(0, last), (last, 0), (1, last)] {
        // a shortcut that coincides with a base arc stays certain
        if m[(i, j)] == 0.0 {
            m[(i, j)] = shortcut;
        }
    }
    ExpectedAdjacency::from_matrix(m, false)
}

/// Gambler's Ruin on `n` states with optional shortcut arcs.
pub fn gamblers_ruin(
    n: usize,
    variant: DriftVariant,
    shortcut_probability: f64,
    seed: u64,
) -> Result<(ExpectedAdjacency, SampledDigraph)> {
    FamilySpec::gamblers(n, variant, shortcut_probability, seed).generate()
}

/// Inter-cluster arc probability `min(1, β·ln n / n)`.
pub fn tourists_inter_probability(n: usize, beta: f64) -> f64 {
    (beta * (n as f64).ln() / n as f64).min(1.0)
}

fn tourists_expected(n: usize, beta: f64) -> ExpectedAdjacency {
    let q = tourists_inter_probability(n, beta);
    ExpectedAdjacency::from_fn(n * n, false, |u, v| {
        let (cu, cv) = (u / n, v / n);
        if u == v {
            0.0
        } else if cu == cv {
            0.5
        } else if (cu + 1) % n == cv {
            q
        } else {
            0.0
        }
    })
}

/// Tourist's Ruin: `n` clusters of `n` vertices on a directed cycle.
/// Vertex `(c, j)` has index `c·n + j`.
pub fn tourists_ruin(n: usize, beta: f64, seed: u64) -> Result<(ExpectedAdjacency, SampledDigraph)> {
    FamilySpec::tourists(n, beta, seed).generate()
}

fn gnp_expected(n: usize, p: f64) -> ExpectedAdjacency {
    ExpectedAdjacency::from_fn(n, false, |i, j| if i == j { 0.0 } else { p })
}

/// Directed `G(n, p)` without self loops.
pub fn gnp_directed(n: usize, p: f64, seed: u64) -> Result<(ExpectedAdjacency, SampledDigraph)> {
    FamilySpec::gnp(n, p, seed).generate()
}

/// `R = α/(n−1)·(J − I) + (1 − α)P`.
pub fn pagerank_matrix(p: &TransitionMatrix, alpha: f64) -> Result<TransitionMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange { what: "alpha", value: alpha });
    }
    let n = p.n();
    if n < 2 {
        return Err(Error::OutOfRange { what: "n (need n >= 2)", value: n as f64 });
    }
    let t = alpha / (n - 1) as f64;
    let m = p.matrix();
    TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        let teleport = if i == j { 0.0 } else { t };
        teleport + (1.0 - alpha) * m[(i, j)]
    }))
}

/// PageRank coupling of a raw digraph; a sink's row becomes the uniform
/// off-diagonal row before coupling.
pub fn pagerank_from_digraph(g: &SampledDigraph, alpha: f64) -> Result<TransitionMatrix> {
    let n = g.n();
    if n < 2 {
        return Err(Error::OutOfRange { what: "n (need n >= 2)", value: n as f64 });
    }
    let out = g.out_degrees();
    let uniform = 1.0 / (n - 1) as f64;
    let p = TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        if out[i] == 0 {
            if i == j { 0.0 } else { uniform }
        } else if g.has_arc(i, j) {
            1.0 / out[i] as f64
        } else {
            0.0
        }
    }))?;
    pagerank_matrix(&p, alpha)
}

/// `α/σ₂(I − R)` at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjecturePoint {
    pub spec: FamilySpec,
    pub alpha: f64,
    pub sigma2: f64,
    pub k: f64,
}

/// Largest `α/σ₂(I − R)` over a grid. Any universal `k` must be at least
/// `k_max`, so the search can only raise the floor, never refute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureResult {
    pub k_max: f64,
    pub witness: ConjecturePoint,
    pub evaluated: usize,
}

/// Transition matrix a family member contributes to the search: `P̄` when
/// `Ā` is deterministic, otherwise the walk on the sample at `spec.seed`
/// (sinks get the uniform row).
fn search_chain(spec: &FamilySpec) -> Result<(TransitionMatrix, Option<SampledDigraph>)> {
    let expected = spec.expected()?;
    if expected.is_deterministic() {
        Ok((expected_transition(&expected)?, None))
    } else {
        let g = sample(&expected, spec.seed)?;
        match transition(&g) {
            Ok(p) => Ok((p, None)),
            Err(Error::SinkVertices(_)) => Ok((pagerank_from_digraph(&g, 0.0)?, Some(g))),
            Err(e) => Err(e),
        }
    }
}

/// Evaluates `α/σ₂(I − R)` for every (member, α) pair.
///
/// Instances run in parallel; the arg-max is taken in grid order (family
/// first, then α) with ties resolved to the earliest point, so the result is
/// independent of scheduling.
pub fn conjecture_search(family_grid: &[FamilySpec], alpha_grid: &[f64]) -> Result<ConjectureResult> {
    if family_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&a) = alpha_grid.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::OutOfRange { what: "alpha", value: a });
    }
    let rows: Vec<Vec<ConjecturePoint>> = family_grid
        .par_iter()
        .map(|spec| {
            let (p, _) = search_chain(spec)?;
            alpha_grid
                .par_iter()
                .map(|&alpha| {
                    let r = pagerank_matrix(&p, alpha)?;
                    is_ergodic(&r).ensure()?;
                    let sigma2 = singular_gap(&r)?.sigma2;
                    Ok(ConjecturePoint {
                        spec: spec.clone(),
                        alpha,
                        sigma2,
                        k: alpha / sigma2,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let evaluated = rows.iter().map(Vec::len).sum();
    let witness = rows
        .into_iter()
        .flatten()
        .reduce(|best, x| if x.k > best.k { x } else { best })
        .expect("non-empty grid");
    Ok(ConjectureResult {
        k_max: witness.k,
        witness,
        evaluated,
    })
}

/// `count` integers log-spaced on `[lo, hi]`, rounded and deduplicated.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    assert!(lo >= 1 && lo <= hi && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// `{step, 2·step, …}` strictly inside `(0, 1)`, computed as `i·step`.
pub fn alpha_grid(step: f64) -> Vec<f64> {
    assert!(step > 0.0 && step < 1.0);
    (1..)
        .map(|i| i as f64 * step)
        .take_while(|&a| a < 1.0 - 1e-9)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary_direct;
    use crate::randgraph::degree_stats;
    use proptest::prelude::*;

    fn out_sets(a: &ExpectedAdjacency) -> Vec<Vec<usize>> {
        (0..a.n())
            .map(|i| (0..a.n()).filter(|&j| a.get(i, j) > 0.0).map(|j| j + 1).collect())
            .collect()
    }

    #[test]
    fn gamblers_n4_decrease_heavy() {
        let (a, g) = gamblers_ruin(4, DriftVariant::DecreaseHeavy, 0.0, 0).unwrap();
        assert_eq!(out_sets(&a), vec![vec![2], vec![1, 3], vec![1, 2, 4], vec![2, 3]]);
        assert_eq!(g.out_degrees(), &[1, 2, 3, 2]);
    }

    #[test]
    fn gamblers_n4_increase_heavy() {
        let (a, _) = gamblers_ruin(4, DriftVariant::IncreaseHeavy, 0.0, 0).unwrap();
        assert_eq!(out_sets(&a), vec![vec![2, 3], vec![1, 3, 4], vec![2, 4], vec![3]]);
    }

    #[test]
    fn gamblers_shortcuts() {
        let (a, _) = gamblers_ruin(10, DriftVariant::DecreaseHeavy, 0.5, 0).unwrap();
        assert_eq!(a.get(0, 9), 0.5);
        assert_eq!(a.get(9, 0), 0.5);
        assert_eq!(a.get(1, 9), 0.5);
        for seed in 0..20 {
            let (_, g) = gamblers_ruin(10, DriftVariant::IncreaseHeavy, 1.0, seed).unwrap();
            assert!(g.has_arc(0, 9) && g.has_arc(9, 0) && g.has_arc(1, 9));
        }
    }

    #[test]
    fn gamblers_rejects_small_n() {
        assert!(gamblers_ruin(3, DriftVariant::DecreaseHeavy, 0.0, 0).is_err());
        assert!(gamblers_ruin(5, DriftVariant::DecreaseHeavy, 1.5, 0).is_err());
    }

    fn gamblers_min_phi(n: usize) -> f64 {
        let (a, _) = gamblers_ruin(n, DriftVariant::DecreaseHeavy, 0.0, 0).unwrap();
        stationary_direct(&expected_transition(&a).unwrap()).unwrap().min()
    }

    #[test]
    fn gamblers_min_phi_is_tiny() {
        assert!(gamblers_min_phi(30) < 1e-5);
    }

    #[test]
    fn gamblers_min_phi_decays_geometrically() {
        for n in 15..=30 {
            let ratio = gamblers_min_phi(n + 5) / gamblers_min_phi(n);
            assert!(ratio <= 0.9, "n={n}: {ratio}");
        }
    }

    #[test]
    fn tourists_n3_clamps() {
        let beta = 3.0 / 3f64.ln() + 0.1;
        let (a, _) = tourists_ruin(3, beta, 0).unwrap();
        assert_eq!(a.n(), 9);
        assert_eq!(a.get(0, 3), 1.0);
        assert_eq!(a.get(8, 0), 1.0);
        assert_eq!(a.get(0, 6), 0.0);
        assert_eq!(a.get(0, 1), 0.5);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn tourists_out_degree_formula() {
        let n = 5;
        let (a, _) = tourists_ruin(n, 1.0, 0).unwrap();
        let want = 0.5 * (n - 1) as f64 + (n as f64).ln();
        for d in a.out_degrees() {
            assert!((d - want).abs() < 1e-12);
        }
    }

    #[test]
    fn tourists_disconnects_at_small_beta() {
        let failures = (0..100)
            .filter(|&s| {
                let (_, g) = tourists_ruin(5, 0.3, s).unwrap();
                match transition(&g) {
                    Ok(p) => !is_ergodic(&p).irreducible,
                    Err(_) => true,
                }
            })
            .count();
        assert!(failures >= 20, "{failures}");
    }

    #[test]
    fn gnp_expected_chain_is_uniform() {
        let (a, _) = gnp_directed(37, 0.3, 0).unwrap();
        let phi = stationary_direct(&expected_transition(&a).unwrap()).unwrap();
        for &x in phi.values() {
            assert!((x - 1.0 / 37.0).abs() < 1e-15);
        }
        let s = degree_stats(&a);
        assert!((s.d_min - 36.0 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn gnp_complete() {
        let (_, g) = gnp_directed(6, 1.0, 9).unwrap();
        assert_eq!(g.arc_count(), 30);
        assert!(gnp_directed(6, 0.0, 0).is_err());
        assert!(gnp_directed(6, 1.1, 0).is_err());
    }

    fn cycle3() -> TransitionMatrix {
        TransitionMatrix::new(DMatrix::from_fn(3, 3, |i, j| if (i + 1) % 3 == j { 1.0 } else { 0.0 })).unwrap()
    }

    #[test]
    fn pagerank_cycle_example() {
        let r = pagerank_matrix(&cycle3(), 0.3).unwrap();
        for i in 0..3 {
            assert!((r.get(i, (i + 1) % 3) - 0.85).abs() < 1e-15);
            assert!((r.get(i, (i + 2) % 3) - 0.15).abs() < 1e-15);
            assert_eq!(r.get(i, i), 0.0);
        }
    }

    #[test]
    fn pagerank_endpoints() {
        let p = cycle3();
        assert_eq!(pagerank_matrix(&p, 0.0).unwrap().matrix(), p.matrix());
        let r = pagerank_matrix(&p, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.get(i, j), if i == j { 0.0 } else { 0.5 });
            }
        }
        assert!(pagerank_matrix(&p, -0.1).is_err());
        assert!(pagerank_matrix(&p, 1.1).is_err());
    }

    #[test]
    fn pagerank_two_vertices_is_periodic() {
        let p = TransitionMatrix::new(DMatrix::from_element(2, 2, 0.5)).unwrap();
        let r = pagerank_matrix(&p, 1.0).unwrap();
        assert!(!is_ergodic(&r).aperiodic);
    }

    #[test]
    fn pagerank_dangling_rows() {
        let g = SampledDigraph::from_arcs(3, [(0, 1), (1, 0)]).unwrap();
        let r = pagerank_from_digraph(&g, 0.0).unwrap();
        assert_eq!(r.get(2, 0), 0.5);
        assert_eq!(r.get(2, 1), 0.5);
        assert_eq!(r.get(2, 2), 0.0);
    }

    #[test]
    fn conjecture_complete_digraph_is_small() {
        let spec = FamilySpec::gnp(8, 1.0, 0);
        for alpha in [0.1, 0.5, 0.9] {
            let res = conjecture_search(std::slice::from_ref(&spec), &[alpha]).unwrap();
            assert!(res.k_max <= alpha + 1e-12);
            assert!(res.k_max < 1.0);
        }
    }

    #[test]
    fn conjecture_vanishes_with_alpha() {
        let spec = FamilySpec::gamblers(12, DriftVariant::DecreaseHeavy, 1.0, 0);
        let small = conjecture_search(std::slice::from_ref(&spec), &[1e-6]).unwrap().k_max;
        let smaller = conjecture_search(std::slice::from_ref(&spec), &[1e-8]).unwrap().k_max;
        assert!(small < 1e-3);
        assert!(smaller < small);
    }

    #[test]
    fn conjecture_single_point_matches_direct() {
        let spec = FamilySpec::gamblers(20, DriftVariant::IncreaseHeavy, 0.0, 0);
        let res = conjecture_search(std::slice::from_ref(&spec), &[0.35]).unwrap();
        let p = expected_transition(&spec.expected().unwrap()).unwrap();
        let direct = 0.35 / singular_gap(&pagerank_matrix(&p, 0.35).unwrap()).unwrap().sigma2;
        assert_eq!(res.k_max, direct);
        assert_eq!(res.evaluated, 1);
    }

    #[test]
    fn conjecture_is_deterministic() {
        let grid: Vec<_> = [10, 14, 20]
            .iter()
            .flat_map(|&n| {
                [DriftVariant::DecreaseHeavy, DriftVariant::IncreaseHeavy]
                    .map(|v| FamilySpec::gamblers(n, v, 0.0, 0))
            })
            .chain([FamilySpec::gnp(15, 0.4, 3)])
            .collect();
        let alphas = alpha_grid(0.05);
        let a = conjecture_search(&grid, &alphas).unwrap();
        let b = conjecture_search(&grid, &alphas).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluated, grid.len() * 19);
    }

    #[test]
    fn conjecture_rejects_bad_grids() {
        let spec = FamilySpec::gnp(5, 0.5, 0);
        assert!(matches!(conjecture_search(&[], &[0.5]), Err(Error::EmptyGrid)));
        assert!(matches!(conjecture_search(std::slice::from_ref(&spec), &[]), Err(Error::EmptyGrid)));
        assert!(conjecture_search(std::slice::from_ref(&spec), &[1.0]).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(alpha_grid(0.05).len(), 19);
        assert!((alpha_grid(0.05)[18] - 0.95).abs() < 1e-15);
        let ns = log_spaced(10, 200, 10);
        assert_eq!(ns.first(), Some(&10));
        assert_eq!(ns.last(), Some(&200));
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spec_serde_kebab() {
        let s = serde_json::to_value(FamilySpec::gamblers(5, DriftVariant::IncreaseHeavy, 1.0, 2)).unwrap();
        assert_eq!(s["family"], "gamblers");
        assert_eq!(s["drift_variant"], "increase-heavy");
    }

    proptest! {
        #[test]
        fn generated_families_are_valid(n in 4usize..12, v in any::<bool>(), q in 0.0f64..=1.0, p in 0.01f64..=1.0, beta in 0.1f64..5.0) {
            let variant = if v { DriftVariant::DecreaseHeavy } else { DriftVariant::IncreaseHeavy };
            prop_assert!(gamblers_ruin(n, variant, q, 0).unwrap().0.validate().is_empty());
            prop_assert!(gnp_directed(n, p, 0).unwrap().0.validate().is_empty());
            prop_assert!(tourists_ruin(n.min(6), beta, 0).unwrap().0.validate().is_empty());
        }

        #[test]
        fn pagerank_is_stochastic_and_ergodic(n in 3usize..10, alpha in 0.001f64..=1.0, w in proptest::collection::vec(0.0f64..1.0, 100)) {
            let p = TransitionMatrix::new(DMatrix::from_fn(n, n, |i, j| {
                let s: f64 = (0..n).map(|k| w[i * 10 + k]).sum::<f64>();
                if s == 0.0 { 1.0 / n as f64 } else { w[i * 10 + j] / s }
            }));
            prop_assume!(p.is_ok());
            let r = pagerank_matrix(&p.unwrap(), alpha).unwrap();
            for row in r.matrix().row_iter() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
            prop_assert!(is_ergodic(&r).is_ergodic());
        }
    }
}
