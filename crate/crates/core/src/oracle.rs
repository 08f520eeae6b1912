//! Independent reference implementations used to validate the closed-form
//! engine: brute-force path enumeration, all-pairs shortest paths, and
//! first-passage / commute costs of the natural random walk.

use crate::error::{Error, Result};
use crate::graph::Graph;
use nalgebra::{DMatrix, DVector};

/// Hard cap on enumeration depth; beyond this the walk count explodes.
pub const MAX_ENUMERATION_DEPTH: usize = 20;

/// Result of a truncated enumeration of walks from `source` to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnumeration {
    pub source: usize,
    pub target: usize,
    pub t_max: usize,
    /// Accumulated mass: sum over enumerated walks of the walk likelihood
    /// times exp(-theta * total cost).
    pub mass: f64,
    /// Number of walks that contributed to `mass`.
    pub count: u64,
}

/// Enumerate every walk from `i` of length at most `t_max` and accumulate
/// the Boltzmann mass of those ending in `j`. The zero-length walk counts
/// when `i == j` and contributes exactly 1. With `hitting` set, walks stop
/// at their first arrival in `j`, so the ending node is never revisited.
pub fn enumerate_path_mass(
    g: &Graph,
    theta: f64,
    i: usize,
    j: usize,
    t_max: usize,
    hitting: bool,
) -> Result<PathEnumeration> {
    if t_max > MAX_ENUMERATION_DEPTH {
        return Err(Error::DepthLimitExceeded {
            requested: t_max,
            limit: MAX_ENUMERATION_DEPTH,
        });
    }
    let n = g.n();
    for &node in &[i, j] {
        if node >= n {
            return Err(Error::NodeOutOfRange { index: node, n });
        }
    }
    let p = g.reference_transitions();
    let mut mass = 0.0;
    let mut count = 0u64;
    if i == j {
        // zero-length walk
        mass += 1.0;
        count += 1;
    }
    // A hitting walk ending in j may not contain j anywhere else; when the
    // start is j itself, only the zero-length walk qualifies.
    if !(hitting && i == j) {
        let mut stack: Vec<(usize, usize, f64)> = vec![(i, 0, 1.0)];
        while let Some((u, depth, weight)) = stack.pop() {
            if depth == t_max {
                continue;
            }
            for v in g.successors(u) {
                let step = p.prob(u, v) * (-theta * g.cost(u, v)).exp();
                let w = weight * step;
                if v == j {
                    mass += w;
                    count += 1;
                    if hitting {
                        continue; // absorbed; do not extend past j
                    }
                }
                stack.push((v, depth + 1, w));
            }
        }
    }
    Ok(PathEnumeration {
        source: i,
        target: j,
        t_max,
        mass,
        count,
    })
}

/// All-pairs minimal walk cost (Floyd–Warshall); +∞ for unreachable pairs,
/// zero diagonal.
pub fn shortest_path_matrix(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut d = g.costs().clone();
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[(i, k)];
            if dik == f64::INFINITY {
                continue;
            }
            for j in 0..n {
                let via = dik + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
    d
}

/// Expected cumulative cost for the natural random walk to first reach `k`,
/// per start node; `m[k] = 0`.
///
/// The expectation is finite only for nodes from which the walk reaches `k`
/// with probability one, i.e. nodes that cannot reach any node that cannot
/// reach `k`. All other entries are +∞ and the linear system of the
/// first-passage recurrence is solved on the remaining subgraph.
pub fn first_passage_cost(g: &Graph, k: usize) -> Result<DVector<f64>> {
    let n = g.n();
    if k >= n {
        return Err(Error::NodeOutOfRange { index: k, n });
    }
    let p = g.reference_transitions();

    // Nodes that can reach k (reverse reachability over the arc support).
    let mut reaches_k = vec![false; n];
    reaches_k[k] = true;
    let mut queue = vec![k];
    while let Some(v) = queue.pop() {
        for (u, seen) in reaches_k.iter_mut().enumerate() {
            if !*seen && g.has_arc(u, v) {
                *seen = true;
                queue.push(u);
            }
        }
    }
    // Nodes that can wander into the non-returning region: m = +∞ there too.
    let mut doomed: Vec<bool> = reaches_k.iter().map(|r| !r).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&v| doomed[v]).collect();
    while let Some(v) = queue.pop() {
        for (u, trapped) in doomed.iter_mut().enumerate() {
            if !*trapped && g.has_arc(u, v) {
                *trapped = true;
                queue.push(u);
            }
        }
    }

    let solved: Vec<usize> = (0..n).filter(|&i| i != k && !doomed[i]).collect();
    let mut m = DVector::from_element(n, f64::INFINITY);
    m[k] = 0.0;
    if !solved.is_empty() {
        let s = solved.len();
        let mut a = DMatrix::zeros(s, s);
        let mut rhs = DVector::zeros(s);
        for (row, &i) in solved.iter().enumerate() {
            a[(row, row)] = 1.0;
            let mut r = 0.0;
            for j in g.successors(i) {
                r += p.prob(i, j) * g.cost(i, j);
                if let Some(col) = solved.iter().position(|&x| x == j) {
                    a[(row, col)] -= p.prob(i, j);
                }
            }
            rhs[row] = r;
        }
        let lu = a.lu();
        let sol = lu.solve(&rhs).ok_or(Error::SingularSystem {
            residual: f64::INFINITY,
        })?;
        for (row, &i) in solved.iter().enumerate() {
            m[i] = sol[row];
        }
    }
    Ok(m)
}

/// Commute costs CC[i][j] = m_ij + m_ji; symmetric with zero diagonal.
pub fn commute_cost_matrix(g: &Graph) -> Result<DMatrix<f64>> {
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = first_passage_cost(g, k)?;
        m.set_column(k, &col);
    }
    let mut cc = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cc[(i, j)] = m[(i, j)] + m[(j, i)];
        }
    }
    Ok(cc)
}
