mod common;

use common::{random_distribution, random_ergodic_chain, rng};
use statgap_core::bounds::cauchy_bound;
use statgap_core::chain::{chi2_norm, stationary_direct, stationary_power, transition};
use statgap_core::na::{DMatrix, DVector};
use statgap_core::spectral::{
    laplacian_singular_values, pinv_apply, pinv_min_norm_apply, restricted_gap, series_cutoff, series_oracle,
    singular_gap, singular_gap_with, GapMethod,
};
use statgap_core::zoo::{gamblers_ruin, gnp_directed, DriftVariant};
use statgap_core::{Distribution, TransitionMatrix};

fn three_state() -> TransitionMatrix {
    TransitionMatrix::new(DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.5, 0.5, 0.0])).unwrap()
}

#[test]
fn three_state_stationary_by_hand() {
    let phi = stationary_direct(&three_state()).unwrap();
    let want = [4.0 / 9.0, 1.0 / 3.0, 2.0 / 9.0];
    for (x, w) in phi.values().iter().zip(want) {
        assert!((x - w).abs() < 1e-15);
    }
}

#[test]
fn three_state_gap_against_eigen_oracle() {
    // σ² are the eigenvalues of (I − P)ᵀ(I − P), obtained independently of the SVD
    let l = three_state().laplacian();
    let mut eig: Vec<f64> = (l.transpose() * &l).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let oracle = eig[1].sqrt();
    let gap = singular_gap(&three_state()).unwrap().sigma2;
    assert!((gap - oracle).abs() < 1e-10, "{gap} vs {oracle}");
    let sv = laplacian_singular_values(&three_state());
    assert!(sv[0] < 1e-14);
}

#[test]
fn three_state_series_reaches_generalized_inverse() {
    let p = three_state();
    let x = DVector::from_vec(vec![0.3, -0.5, 0.2]);
    let series = series_oracle(&x, &p, 200);
    let pinv = pinv_apply(&x, &p).unwrap();
    assert!((series - &pinv).norm() <= 1e-6);
    // y(I − P) = x for both generalized inverses; they differ by a multiple of φ
    let mn = pinv_min_norm_apply(&x, &p).unwrap();
    assert!((p.laplacian().tr_mul(&mn) - &x).norm() < 1e-12);
    assert!(mn.norm() <= pinv.norm() + 1e-15);
}

#[test]
fn iterative_gap_matches_full_decomposition() {
    let cases: Vec<TransitionMatrix> = vec![
        transition(&gnp_directed(120, 0.2, 5).unwrap().1).unwrap(),
        {
            let (a, _) = gamblers_ruin(60, DriftVariant::DecreaseHeavy, 1.0, 0).unwrap();
            statgap_core::chain::expected_transition(&a).unwrap()
        },
        three_state(),
    ];
    for p in cases {
        let full = singular_gap_with(&p, GapMethod::FullDecomposition).unwrap();
        let iter = singular_gap_with(&p, GapMethod::Iterative).unwrap();
        assert!(
            (full.sigma2 - iter.sigma2).abs() <= 1e-7 * full.sigma2.max(1e-3),
            "{} vs {}",
            full.sigma2,
            iter.sigma2
        );
    }
}

#[test]
fn power_and_direct_agree_on_gnp() {
    let (_, g) = gnp_directed(200, 0.5, 11).unwrap();
    let p = transition(&g).unwrap();
    let gap = singular_gap(&p).unwrap().sigma2;
    let direct = stationary_direct(&p).unwrap();
    let power = stationary_power(&p, &Distribution::point(200, 0), 1e-8, gap).unwrap();
    assert!(power.certified_error <= 1e-8);
    let err = (power.distribution.to_vector() - direct.to_vector()).norm();
    assert!(err <= power.certified_error, "{err} > {}", power.certified_error);
}

#[test]
fn lazy_cycle_power_converges_to_uniform() {
    let p = TransitionMatrix::new(DMatrix::from_fn(3, 3, |i, j| {
        if i == j || (i + 1) % 3 == j { 0.5 } else { 0.0 }
    }))
    .unwrap();
    let gap = singular_gap(&p).unwrap().sigma2;
    let r = stationary_power(&p, &Distribution::point(3, 0), 1e-8, gap).unwrap();
    let u = Distribution::uniform(3).to_vector();
    assert!((r.distribution.to_vector() - u).norm() <= 1e-8);
}

#[test]
fn series_cutoff_tracks_decay_on_random_chains() {
    let mut r = rng(20);
    for _ in 0..30 {
        let p = random_ergodic_chain(&mut r);
        let n = p.n();
        let v = random_distribution(&mut r, n).to_vector();
        let x = &v - DVector::from_element(n, 1.0 / n as f64);
        let k = series_cutoff(&x, &p, 1e-9, 100_000).expect("series converges");
        assert!((series_oracle(&x, &p, k) - pinv_apply(&x, &p).unwrap()).norm() <= 1e-6);
    }
}

#[test]
fn restricted_gap_bound_contains_random_chains() {
    let mut r = rng(21);
    for _ in 0..50 {
        let p = random_ergodic_chain(&mut r);
        let v = random_distribution(&mut r, p.n());
        let phi = stationary_direct(&p).unwrap();
        let b = cauchy_bound(&v, &p, restricted_gap(&p)).unwrap();
        let dist = (phi.to_vector() - v.to_vector()).norm();
        assert!(dist <= b.bound + 1e-8, "{dist} > {}", b.bound);
        assert!(b.epsilon_sum.abs() <= 1e-12);
        assert!(phi.l2_norm() <= phi.max().sqrt() + 1e-15);
    }
}

#[test]
fn chi2_of_uniform_deviation() {
    let phi = Distribution::uniform(2);
    assert!((chi2_norm(&[0.1, -0.1], &phi).unwrap() - 0.2).abs() < 1e-15);
}
