//! The singular gap `σ₂(I − P)`, the generalized inverse of `I − P` applied to
//! mean-zero vectors, and the truncated Neumann series that serves as its
//! independent oracle.
//!
//! Two inverses of `I − P` show up here and they are not the same operator
//! once `φ` is not uniform. Every solution of `yᵀ(I − P) = xᵀ` differs from
//! another by a multiple of `φ`:
//!
//! * [`pinv_apply`] fixes the free multiple by `yᵀ1 = 0`. This is the limit of
//!   `Σₖ xᵀPᵏ` (each term sums to zero), i.e. the inverse of `I − P` with the
//!   unit eigenvalue of `P` deflated. It satisfies `MXM = M` and `XMX = X`.
//! * [`pinv_min_norm_apply`] fixes it by `yᵀφ = 0`, giving the Moore–Penrose
//!   solution whose operator norm is exactly `1/σ₂(I − P)`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;

use crate::chain::{is_ergodic, stationary_direct, unit_sum_system, TransitionMatrix};
use crate::{Error, Result};

/// Chains up to this size get a full singular value decomposition.
pub const FULL_DECOMPOSITION_MAX: usize = 2000;
pub const GAP_RESIDUAL_TOL: f64 = 1e-8;
pub const GAP_ITERATION_CAP: usize = 10_000;
/// Mean-zero tolerance on `xᵀ1`.
pub const MEAN_ZERO_TOL: f64 = 1e-10;
/// Relative residual accepted from [`pinv_apply`].
pub const PINV_RESIDUAL_TOL: f64 = 1e-9;
/// Matrices up to this size get a full decomposition in [`two_norm`].
const TWO_NORM_FULL_MAX: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    FullDecomposition,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Second-smallest singular value of `I − P`.
    pub sigma2: f64,
    pub method: GapMethod,
    /// Backward-error estimate for `sigma2`.
    pub residual: f64,
}

fn ascending_singular_values(m: DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = SVD::new(m, false, false).singular_values.iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

/// `σ₂(I − P)`, by full decomposition up to [`FULL_DECOMPOSITION_MAX`] states
/// and by deflated inverse iteration above that.
pub fn singular_gap(p: &TransitionMatrix) -> Result<SpectralSummary> {
    let method = if p.n() <= FULL_DECOMPOSITION_MAX {
        GapMethod::FullDecomposition
    } else {
        GapMethod::Iterative
    };
    singular_gap_with(p, method)
}

pub fn singular_gap_with(p: &TransitionMatrix, method: GapMethod) -> Result<SpectralSummary> {
    if p.n() < 2 {
        return Err(Error::OutOfRange {
            what: "chain size for a singular gap",
            value: p.n() as f64,
        });
    }
    match method {
        GapMethod::FullDecomposition => Ok(full_gap(p)),
        GapMethod::Iterative => iterative_gap(p),
    }
}

/// Every singular value of `I − P`, ascending.
pub fn laplacian_singular_values(p: &TransitionMatrix) -> Vec<f64> {
    ascending_singular_values(p.laplacian())
}

fn full_gap(p: &TransitionMatrix) -> SpectralSummary {
    let sv = laplacian_singular_values(p);
    let top = sv[sv.len() - 1];
    SpectralSummary {
        sigma2: sv[1],
        method: GapMethod::FullDecomposition,
        residual: f64::EPSILON * p.n() as f64 * top.max(1.0),
    }
}

/// Deterministic start vector orthogonal to `1`.
fn start_vector(n: usize) -> DVector<f64> {
    let mut z = DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.7548776662466927).fract() - 0.5);
    let mean = z.mean();
    z.add_scalar_mut(-mean);
    z.normalize()
}

/// Inverse iteration on `M̃ᵀM̃`, where `M̃ = M + c·u·vᵀ` replaces the zero
/// singular triple of `M = I − P` (left `u ∝ φ`, right `v ∝ 1`) with a large
/// value `c`, leaving `σ₂(M)` as the smallest singular value of `M̃`.
fn iterative_gap(p: &TransitionMatrix) -> Result<SpectralSummary> {
    let n = p.n();
    let m = p.laplacian();

    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let phi = unit_sum_system(p).solve(&rhs).ok_or_else(|| {
        let erg = is_ergodic(p);
        Error::NotErgodic {
            irreducible: erg.irreducible,
            aperiodic: erg.aperiodic,
        }
    })?;
    let left = phi.normalize();
    let right = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let c = m.norm() + 1.0;
    let deflated = &m + c * &left * right.transpose();
    let lu = deflated.clone().lu();
    let lu_t = deflated.transpose().lu();

    let mut z = start_vector(n);
    let mut sigma = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..GAP_ITERATION_CAP {
        let w = lu_t.solve(&z).ok_or(Error::IllConditioned {
            residual: f64::INFINITY,
            tolerance: GAP_RESIDUAL_TOL,
        })?;
        let mut y = lu.solve(&w).ok_or(Error::IllConditioned {
            residual: f64::INFINITY,
            tolerance: GAP_RESIDUAL_TOL,
        })?;
        let mean = y.mean();
        y.add_scalar_mut(-mean);
        z = y.normalize();

        let mz = &m * &z;
        sigma = mz.norm();
        residual = (m.tr_mul(&mz) - sigma * sigma * &z).norm();
        if residual <= GAP_RESIDUAL_TOL {
            return Ok(SpectralSummary {
                sigma2: sigma,
                method: GapMethod::Iterative,
                residual,
            });
        }
    }
    Err(Error::IterationCap {
        iterations: GAP_ITERATION_CAP,
        estimate: sigma,
        residual,
    })
}

fn ensure_mean_zero(x: &DVector<f64>) -> Result<()> {
    let sum = x.sum();
    if sum.abs() > MEAN_ZERO_TOL {
        return Err(Error::NotMeanZero(sum));
    }
    Ok(())
}

/// `xᵀ(I − P)⁺` for mean-zero `x`, normalized so that the result sums to zero.
///
/// Solves `yᵀ(I − P) = xᵀ` with the redundant last equation replaced by
/// `yᵀ1 = 0`. The result equals `Σₖ xᵀPᵏ` (see [`series_oracle`]).
pub fn pinv_apply(x: &DVector<f64>, p: &TransitionMatrix) -> Result<DVector<f64>> {
    if x.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: x.len(),
        });
    }
    ensure_mean_zero(x)?;
    is_ergodic(p).ensure()?;
    let n = p.n();
    let mut rhs = x.clone();
    rhs[n - 1] = 0.0;
    let y = unit_sum_system(p).solve(&rhs).ok_or(Error::IllConditioned {
        residual: f64::INFINITY,
        tolerance: PINV_RESIDUAL_TOL,
    })?;
    let residual = (&y - p.left_mul(&y) - x).norm();
    let allowed = PINV_RESIDUAL_TOL * x.norm();
    if !(residual <= allowed) {
        return Err(Error::IllConditioned {
            residual,
            tolerance: allowed,
        });
    }
    Ok(y)
}

/// Moore–Penrose `xᵀ(I − P)⁺`: the minimum-norm solution, orthogonal to `φ`.
pub fn pinv_min_norm_apply(x: &DVector<f64>, p: &TransitionMatrix) -> Result<DVector<f64>> {
    let y = pinv_apply(x, p)?;
    let phi = stationary_direct(p)?.to_vector();
    let shift = y.dot(&phi) / phi.norm_squared();
    Ok(y - shift * phi)
}

/// `Σ_{k=0}^{K−1} xᵀPᵏ` by repeated multiplication.
///
/// Panics if `terms == 0`.
pub fn series_oracle(x: &DVector<f64>, p: &TransitionMatrix, terms: usize) -> DVector<f64> {
    assert!(terms >= 1, "series needs at least one term");
    let mut term = x.clone();
    let mut sum = x.clone();
    for _ in 1..terms {
        term = p.left_mul(&term);
        sum += &term;
    }
    sum
}

/// Number of series terms after which the tail `Σ_{k≥K} ‖xᵀPᵏ‖` is estimated
/// below `tail_tol`, using the decay ratio of `‖xᵀPᵏ‖` measured over a sliding
/// window. `None` if `max_terms` is reached first.
pub fn series_cutoff(
    x: &DVector<f64>,
    p: &TransitionMatrix,
    tail_tol: f64,
    max_terms: usize,
) -> Option<usize> {
    const WINDOW: usize = 16;
    let mut norms = Vec::with_capacity(256);
    let mut term = x.clone();
    for k in 0..max_terms {
        let a = term.norm();
        if a == 0.0 {
            return Some(k.max(1));
        }
        norms.push(a);
        if k >= WINDOW {
            let ratio = (a / norms[k - WINDOW]).powf(1.0 / WINDOW as f64);
            if ratio < 1.0 {
                // tail from k on, with a factor of 10 for non-monotone decay
                let tail = 10.0 * a / (1.0 - ratio);
                if tail <= tail_tol {
                    return Some(k);
                }
            }
        }
        term = p.left_mul(&term);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorNorms {
    /// Maximum absolute column sum.
    pub one: f64,
    /// Largest singular value.
    pub two: f64,
    /// Maximum absolute row sum.
    pub inf: f64,
}

pub fn operator_norms(m: &DMatrix<f64>) -> OperatorNorms {
    let one = m
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let inf = m
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    OperatorNorms {
        one,
        two: two_norm(m),
        inf,
    }
}

/// Largest singular value. Full decomposition for small matrices, power
/// iteration on `MᵀM` otherwise.
pub fn two_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows().max(m.ncols()) <= TWO_NORM_FULL_MAX {
        return SVD::new(m.clone(), false, false).singular_values.max();
    }
    let n = m.ncols();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract());
    x.normalize_mut();
    let mut sigma = 0.0;
    for _ in 0..10_000 {
        let y = m * &x;
        let next = y.norm();
        if next == 0.0 {
            return 0.0;
        }
        let z = m.tr_mul(&y);
        let zn = z.norm();
        x = z / zn;
        if (next - sigma).abs() <= 1e-14 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Smallest singular value of `(I − P)ᵀ` restricted to mean-zero vectors:
/// the largest `τ` with `‖wᵀ(I − P)‖₂ ≥ τ‖w‖₂` for every `w ⊥ 1`.
///
/// `τ ≤ σ₂(I − P)`, with equality when `φ` is uniform.
pub fn restricted_gap(p: &TransitionMatrix) -> f64 {
    let n = p.n();
    // Householder reflector sending 1/√n to e₁; its other columns span 1⊥.
    let mut u = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    u[0] -= 1.0;
    let h = if u.norm() == 0.0 {
        DMatrix::identity(n, n)
    } else {
        let u = u.normalize();
        DMatrix::identity(n, n) - 2.0 * &u * u.transpose()
    };
    let basis = h.columns(1, n - 1).into_owned();
    let restricted = p.laplacian().transpose() * basis;
    ascending_singular_values(restricted)[0]
}
