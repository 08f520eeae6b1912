//! The two node distances derived from hitting-paths probabilities: the
//! surprisal distance and the potential distance, plus the log-domain
//! Bellman–Ford-style recurrence that stays stable at large theta.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::BopModel;
use crate::oracle;
use crate::tsv;
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// Fixed-point defaults. The recurrence reduces to Bellman–Ford sweeps at
/// large theta and to the first-passage linear recurrence at small theta;
/// these cover both regimes on desk-scale graphs.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Surprisal,
    Potential,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Surprisal => "surprisal",
            Measure::Potential => "potential",
        }
    }
}

/// Symmetric non-negative distances with zero diagonal; +∞ marks pairs with
/// no connecting path in either direction.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
    measure: Measure,
    theta: f64,
}

impl DistanceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = format!(
            "measure={} theta={}",
            self.measure.as_str(),
            tsv::fmt_f64(self.theta)
        );
        tsv::write_matrix(out, &[header], &self.d)
    }
}

fn neg_log(x: f64) -> f64 {
    // log(0) is intercepted: zero path mass means an infinite distance.
    if x > 0.0 {
        -x.ln()
    } else {
        f64::INFINITY
    }
}

/// Symmetrized negative log of the hitting-paths probabilities (zero-length
/// paths included); the diagonal is forced to zero.
pub fn surprisal_distance(m: &BopModel) -> DistanceMatrix {
    let n = m.graph().n();
    let z_h = m.z_h();
    let partition: f64 = z_h.iter().sum();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let sij = neg_log(z_h[(i, j)] / partition);
            let sji = neg_log(z_h[(j, i)] / partition);
            let v = (sij + sji) / 2.0;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix {
        d,
        measure: Measure::Surprisal,
        theta: m.theta(),
    }
}

/// Potentials phi(i, j) = -log(z_h[i][j]) / theta, symmetrized, diagonal
/// zeroed.
pub fn potential_distance(m: &BopModel) -> DistanceMatrix {
    let theta = m.theta();
    let z_h = m.z_h();
    let n = m.graph().n();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = neg_log(z_h[(i, j)]) / theta;
            let pji = neg_log(z_h[(j, i)]) / theta;
            let v = (pij + pji) / 2.0;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix {
        d,
        measure: Measure::Potential,
        theta,
    }
}

/// One log-sum-exp sweep target: log z_h[i][k] satisfies
/// L_i = LSE_j(log p_ij - theta c_ij + L_j) with L_k = 0.
fn log_weights(m: &BopModel) -> DMatrix<f64> {
    let g = m.graph();
    let n = g.n();
    let p = m.reference();
    DMatrix::from_fn(n, n, |i, j| {
        if g.has_arc(i, j) {
            p.prob(i, j).ln() - m.theta() * g.cost(i, j)
        } else {
            f64::NEG_INFINITY
        }
    })
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = terms.filter(|v| *v > f64::NEG_INFINITY).collect();
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Potentials toward a single target, by fixed-point iteration of the
/// Bellman–Ford-style recurrence in the log domain with a max shift, so
/// large theta never underflows. Starts from phi = +∞ away from k (the
/// empty sum) and phi(k, k) = 0, which makes the iterates decrease
/// monotonically for non-negative costs. Entries left at +∞ belong to
/// nodes that cannot reach k.
pub fn potential_to_target(
    m: &BopModel,
    k: usize,
    tolerance: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let n = m.graph().n();
    if k >= n {
        return Err(Error::NodeOutOfRange { index: k, n });
    }
    if tolerance.is_nan() || tolerance <= 0.0 || max_iters == 0 {
        return Err(Error::InvalidArgument(
            "tolerance must be positive and max_iters nonzero".to_string(),
        ));
    }
    let theta = m.theta();
    let lw = log_weights(m);
    let mut l = DVector::from_element(n, f64::NEG_INFINITY);
    l[k] = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = DVector::from_element(n, f64::NEG_INFINITY);
        next[k] = 0.0;
        for i in 0..n {
            if i == k {
                continue;
            }
            next[i] = log_sum_exp((0..n).map(|j| lw[(i, j)] + l[j]));
        }
        residual = (0..n)
            .map(|i| {
                let (a, b) = (l[i], next[i]);
                if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a - b).abs() / theta
                }
            })
            .fold(0.0f64, f64::max);
        l = next;
        if residual < tolerance {
            return Ok(l.map(|v| -v / theta));
        }
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
        last: l.iter().map(|v| -v / theta).collect(),
    })
}

/// Full potential (or surprisal) distance matrix computed through the
/// log-domain recurrence instead of the dense Z pipeline. The surprisal
/// variant uses the affine relation to the potential distance, with the
/// hitting partition function accumulated in the log domain.
pub fn distance_via_recurrence(
    m: &BopModel,
    measure: Measure,
    tolerance: f64,
    max_iters: usize,
) -> Result<DistanceMatrix> {
    let n = m.graph().n();
    let theta = m.theta();
    let mut phi = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = potential_to_target(m, k, tolerance, max_iters)?;
        phi.set_column(k, &col);
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (phi[(i, j)] + phi[(j, i)]) / 2.0;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    match measure {
        Measure::Potential => Ok(DistanceMatrix { d, measure, theta }),
        Measure::Surprisal => {
            // log Z_h = LSE over all pairs of log z_h = -theta * phi
            let log_partition = log_sum_exp(phi.iter().map(|p| -theta * p));
            let mut s = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = theta * d[(i, j)] + log_partition;
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                }
            }
            Ok(DistanceMatrix {
                d: s,
                measure,
                theta,
            })
        }
    }
}

/// One row of [`distance_limits_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub theta: f64,
    /// max over pairs of |potential distance - shortest path|
    pub max_shortest_path_error: f64,
    /// max over pairs of |2 * potential distance - commute cost|
    pub max_commute_cost_error: f64,
    pub used_recurrence: bool,
}

/// For each theta, the deviation of the potential distance from its two
/// asymptotic anchors: the shortest-path distance (theta large) and half
/// the commute cost (theta small). Requires an undirected graph; both
/// limits hold only there. Large theta switches to the log-domain
/// recurrence once the dense pipeline would underflow for far pairs.
pub fn distance_limits_report(g: &Graph, thetas: &[f64]) -> Result<Vec<LimitRow>> {
    if !g.is_undirected() {
        return Err(Error::NotUndirected);
    }
    let sp = oracle::shortest_path_matrix(g);
    let cc = oracle::commute_cost_matrix(g)?;
    let sp_max = sp
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, &v| a.max(v));
    let n = g.n();
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let model = BopModel::build(g.clone(), theta)?;
        let used_recurrence = theta * sp_max > 600.0;
        let d = if used_recurrence {
            distance_via_recurrence(
                &model,
                Measure::Potential,
                DEFAULT_TOLERANCE,
                DEFAULT_MAX_ITERS,
            )?
        } else {
            potential_distance(&model)
        };
        let mut sp_err = 0.0f64;
        let mut cc_err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if !sp[(i, j)].is_finite() {
                    continue;
                }
                sp_err = sp_err.max((d.get(i, j) - sp[(i, j)]).abs());
                cc_err = cc_err.max((2.0 * d.get(i, j) - cc[(i, j)]).abs());
            }
        }
        rows.push(LimitRow {
            theta,
            max_shortest_path_error: sp_err,
            max_commute_cost_error: cc_err,
            used_recurrence,
        });
    }
    Ok(rows)
}
