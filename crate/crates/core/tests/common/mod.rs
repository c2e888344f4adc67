#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statgap_core::chain::{is_ergodic, transition};
use statgap_core::randgraph::sample;
use statgap_core::{Distribution, ExpectedAdjacency, TransitionMatrix};

/// Random ergodic walk on a directed `G(n, q)` with `n ∈ [3, 40]` and
/// `q ≥ ln n / n`, redrawn until the chain is ergodic.
pub fn random_ergodic_chain(rng: &mut ChaCha8Rng) -> TransitionMatrix {
    let n = rng.random_range(3..=40usize);
    let floor = (n as f64).ln() / n as f64;
    loop {
        let q = rng.random_range(floor..=1.0);
        let a = ExpectedAdjacency::from_fn(n, false, |i, j| if i == j { 0.0 } else { q });
        let g = sample(&a, rng.random()).unwrap();
        if let Ok(p) = transition(&g) {
            if is_ergodic(&p).is_ergodic() {
                return p;
            }
        }
    }
}

/// Dirichlet(1) draw.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    Distribution::new(w.iter().map(|x| x / s).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
