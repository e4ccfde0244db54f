//! Shared oracles and instance generators for the integration tests.
#![allow(dead_code)]

use maxcut::instance::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive maximum over all `2^(n-1)` cuts (the last vertex stays on
/// side 0). Gray-code order keeps it incremental.
pub fn brute_force_max_cut(g: &Graph) -> f64 {
    let n = g.n();
    if n < 2 {
        return 0.0;
    }
    let adj = g.adjacency();
    let mut side = vec![0u8; n];
    let mut value = 0.0;
    let mut best: f64 = 0.0;
    for k in 1u64..(1 << (n - 1)) {
        let v = k.trailing_zeros() as usize;
        let delta: f64 = (0..n)
            .map(|u| {
                if side[u] == side[v] {
                    adj[v][u]
                } else {
                    -adj[v][u]
                }
            })
            .sum();
        side[v] ^= 1;
        value += delta;
        best = best.max(value);
    }
    best
}

/// Random graph with integer weights in `[-10, 10]` (zero weights dropped).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let w: i32 = rng.random_range(-10..=10);
                if w != 0 {
                    edges.push((i, j, f64::from(w)));
                }
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// The exactness suite: 50 graphs with `4 <= n <= 14`, fixed seed.
pub fn exactness_suite() -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_015);
    (0..50)
        .map(|k| {
            let n = 4 + k % 11;
            let density = [0.3, 0.5, 0.8][k % 3];
            random_graph(&mut rng, n, density)
        })
        .collect()
}

/// 100 extra graphs with `n <= 12` for bound validity checks.
pub fn validity_suite() -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    (0..100)
        .map(|k| random_graph(&mut rng, 3 + k % 10, 0.6))
        .collect()
}

pub fn complete(n: usize) -> Graph {
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)))).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap()
}

pub fn petersen() -> Graph {
    let outer = (0..5).map(|i| (i, (i + 1) % 5, 1.0));
    let spokes = (0..5).map(|i| (i, i + 5, 1.0));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5, 1.0));
    Graph::new(10, outer.chain(spokes).chain(inner)).unwrap()
}

/// Exhaustive maximum over cuts that respect `fixed` (vertex → side, side 0
/// being the side of the last vertex).
pub fn brute_force_with_fixings(g: &Graph, fixed: &std::collections::BTreeMap<usize, u8>) -> f64 {
    let n = g.n();
    let free: Vec<usize> = (0..n - 1).filter(|v| !fixed.contains_key(v)).collect();
    let mut side = vec![0u8; n];
    for (&v, &s) in fixed {
        side[v] = s;
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1 << free.len()) {
        for (k, &v) in free.iter().enumerate() {
            side[v] = ((mask >> k) & 1) as u8;
        }
        best = best.max(g.cut_value(&side));
    }
    best
}

/// Random instance with `+-1` weights at the given density.
pub fn pm1_graph(n: usize, density: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((i, j, if rng.random_bool(0.5) { 1.0 } else { -1.0 }));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Unweighted random graph with edge probability 1/2.
pub fn g05_graph(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}
