//! Seeded graph generators for tests, benchmarks and the classification
//! harness. All sampling goes through explicit helpers over the raw ChaCha
//! stream, so generated graphs are identical across platforms and library
//! versions.

use crate::error::Result;
use crate::graph::Graph;
use crate::ssl::LabeledGraphDataset;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 step; used to derive independent sub-seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform integer in [0, n) by rejection sampling.
pub fn rand_below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    assert!(n > 0);
    let limit = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < limit {
            return v % n;
        }
    }
}

/// Uniform f64 in [0, 1) with 53 random bits.
pub fn rand_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fisher–Yates shuffle driven by [`rand_below`].
pub fn shuffle<T>(rng: &mut ChaCha8Rng, xs: &mut [T]) {
    for i in (1..xs.len()).rev() {
        let j = rand_below(rng, (i + 1) as u64) as usize;
        xs.swap(i, j);
    }
}

/// Undirected connected graph: a random spanning chain plus independent
/// extra edges with probability `edge_prob`, integer costs uniform in
/// [1, max_cost], affinities 1/cost.
pub fn random_connected_undirected(
    n: usize,
    edge_prob: f64,
    max_cost: u64,
    rng: &mut ChaCha8Rng,
) -> Graph {
    assert!(n >= 2);
    let mut costs = DMatrix::from_element(n, n, f64::INFINITY);
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut order);
    let put = |costs: &mut DMatrix<f64>, i: usize, j: usize, c: f64| {
        costs[(i, j)] = c;
        costs[(j, i)] = c;
    };
    for pair in order.windows(2) {
        let c = (1 + rand_below(rng, max_cost)) as f64;
        put(&mut costs, pair[0], pair[1], c);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if costs[(i, j)].is_finite() {
                continue;
            }
            if rand_unit(rng) < edge_prob {
                let c = (1 + rand_below(rng, max_cost)) as f64;
                put(&mut costs, i, j, c);
            }
        }
    }
    let affinities = DMatrix::from_fn(n, n, |i, j| {
        if costs[(i, j)].is_finite() {
            1.0 / costs[(i, j)]
        } else {
            0.0
        }
    });
    Graph::build(affinities, Some(costs)).expect("generated graph is valid")
}

/// Strongly connected directed graph: a random ring plus `chords` extra
/// arcs with distinct source nodes, so every out-degree stays at most 2
/// and exhaustive path enumeration remains cheap. Integer costs uniform
/// in [1, max_cost], affinities 1/cost.
pub fn random_strongly_connected(
    n: usize,
    chords: usize,
    max_cost: u64,
    rng: &mut ChaCha8Rng,
) -> Graph {
    assert!(n >= 2);
    let mut costs = DMatrix::from_element(n, n, f64::INFINITY);
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut order);
    for i in 0..n {
        let from = order[i];
        let to = order[(i + 1) % n];
        costs[(from, to)] = (1 + rand_below(rng, max_cost)) as f64;
    }
    let mut sources: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut sources);
    for &from in sources.iter().take(chords.min(n)) {
        let mut to = rand_below(rng, n as u64) as usize;
        let mut guard = 0;
        while (to == from || costs[(from, to)].is_finite()) && guard < 4 * n {
            to = rand_below(rng, n as u64) as usize;
            guard += 1;
        }
        if to != from && !costs[(from, to)].is_finite() {
            costs[(from, to)] = (1 + rand_below(rng, max_cost)) as f64;
        }
    }
    let affinities = DMatrix::from_fn(n, n, |i, j| {
        if costs[(i, j)].is_finite() {
            1.0 / costs[(i, j)]
        } else {
            0.0
        }
    });
    Graph::build(affinities, Some(costs)).expect("generated graph is valid")
}

/// Two planted communities of n/2 nodes each: unit-cost edges appear with
/// probability `p_in` inside a block and `p_out` across blocks. Isolated
/// nodes get one deterministic fallback edge into their own block. True
/// block ids become the dataset labels.
pub fn two_block_sbm(n: usize, p_in: f64, p_out: f64, seed: u64) -> Result<LabeledGraphDataset> {
    assert!(n >= 4);
    let mut rng = rng_from_seed(seed);
    let half = n / 2;
    let block = |i: usize| usize::from(i >= half);
    let mut affinities = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rand_unit(&mut rng) < p {
                affinities[(i, j)] = 1.0;
                affinities[(j, i)] = 1.0;
            }
        }
    }
    for i in 0..n {
        if (0..n).all(|j| affinities[(i, j)] == 0.0) {
            let lo = if block(i) == 0 { 0 } else { half };
            let hi = if block(i) == 0 { half } else { n };
            let mut j = lo + rand_below(&mut rng, (hi - lo) as u64) as usize;
            if j == i {
                j = if i + 1 < hi { i + 1 } else { lo };
            }
            affinities[(i, j)] = 1.0;
            affinities[(j, i)] = 1.0;
        }
    }
    let graph = Graph::build(affinities, None)?;
    let labels = (0..n).map(|i| Some(block(i))).collect();
    LabeledGraphDataset::new(graph, labels)
}
