//! Weighted directed graphs with per-arc affinities and costs, plus the
//! reference transition matrix of the natural random walk.
//!
//! An arc i -> j exists iff `a_ij > 0` iff `c_ij < +inf`. Every node must
//! have at least one outgoing arc so that row normalization is defined.
//! Node ids are 0-based everywhere, matching the edge-list format.

use crate::error::{Error, Result};
use crate::tsv::{fmt_f64, parse_f64};
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

/// Immutable weighted directed graph: affinities `a_ij >= 0` and costs
/// `c_ij >= 0` extended with +∞ on missing arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    affinities: DMatrix<f64>,
    costs: DMatrix<f64>,
}

/// Row-stochastic transition matrix of the natural random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }
}

impl Graph {
    /// Build a graph from an affinity matrix and optional costs.
    ///
    /// When costs are omitted they default to `1/a_ij` on arcs and +∞
    /// elsewhere. Supplied costs must be non-negative and agree with the
    /// affinity support: finite exactly where `a_ij > 0`.
    pub fn build(affinities: DMatrix<f64>, costs: Option<DMatrix<f64>>) -> Result<Self> {
        let n = affinities.nrows();
        if n == 0 || affinities.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "affinities must be square and non-empty, got {}x{}",
                affinities.nrows(),
                affinities.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let a = affinities[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::NegativeEntry {
                        matrix: "affinity",
                        row: i,
                        col: j,
                        value: a,
                    });
                }
            }
        }
        for i in 0..n {
            if (0..n).all(|j| affinities[(i, j)] == 0.0) {
                return Err(Error::ZeroOutDegree(i));
            }
        }
        let costs = match costs {
            Some(c) => {
                if c.nrows() != n || c.ncols() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "costs are {}x{} but affinities are {}x{}",
                        c.nrows(),
                        c.ncols(),
                        n,
                        n
                    )));
                }
                for i in 0..n {
                    for j in 0..n {
                        let v = c[(i, j)];
                        if v.is_nan() || v < 0.0 {
                            return Err(Error::NegativeEntry {
                                matrix: "cost",
                                row: i,
                                col: j,
                                value: v,
                            });
                        }
                        let has_arc = affinities[(i, j)] > 0.0;
                        if has_arc != v.is_finite() {
                            return Err(Error::ShapeMismatch(format!(
                                "support disagrees at ({i}, {j}): affinity {} vs cost {}",
                                affinities[(i, j)],
                                v
                            )));
                        }
                    }
                }
                c
            }
            None => DMatrix::from_fn(n, n, |i, j| {
                let a = affinities[(i, j)];
                if a > 0.0 {
                    1.0 / a
                } else {
                    f64::INFINITY
                }
            }),
        };
        Ok(Graph {
            n,
            affinities,
            costs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn affinities(&self) -> &DMatrix<f64> {
        &self.affinities
    }

    pub fn costs(&self) -> &DMatrix<f64> {
        &self.costs
    }

    pub fn affinity(&self, i: usize, j: usize) -> f64 {
        self.affinities[(i, j)]
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.costs[(i, j)]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.affinities[(i, j)] > 0.0
    }

    /// Successors of node i, i.e. all j with an arc i -> j.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.affinities[(i, j)] > 0.0)
    }

    /// True when both affinities and costs are exactly symmetric.
    pub fn is_undirected(&self) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.affinities[(i, j)] != self.affinities[(j, i)] {
                    return false;
                }
                let (cij, cji) = (self.costs[(i, j)], self.costs[(j, i)]);
                if cij != cji && !(cij == f64::INFINITY && cji == f64::INFINITY) {
                    return false;
                }
            }
        }
        true
    }

    /// Reference transition matrix: row-normalized affinities.
    pub fn reference_transitions(&self) -> TransitionMatrix {
        let mut p = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let sum: f64 = (0..self.n).map(|j| self.affinities[(i, j)]).sum();
            for j in 0..self.n {
                p[(i, j)] = self.affinities[(i, j)] / sum;
            }
        }
        TransitionMatrix { p }
    }

    /// Parse an edge-list stream: lines `i j a_ij [c_ij]`, `#` comments,
    /// blank lines ignored, 0-based ids, node count = 1 + max id seen.
    /// Duplicate (i, j) lines are rejected.
    pub fn load_edge_list<R: BufRead>(input: R) -> Result<Self> {
        struct Arc {
            line: usize,
            from: usize,
            to: usize,
            affinity: f64,
            cost: Option<f64>,
        }
        let mut arcs: Vec<Arc> = Vec::new();
        let mut max_id = 0usize;
        let mut any_cost = false;
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let content = match line.find('#') {
                Some(pos) => &line[..pos],
                None => &line[..],
            };
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() < 3 || fields.len() > 4 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected `i j a [c]`, got {} fields", fields.len()),
                });
            }
            let from: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad node id `{}`", fields[0]),
            })?;
            let to: usize = fields[1].parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad node id `{}`", fields[1]),
            })?;
            let affinity = parse_f64(fields[2]).ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("bad affinity `{}`", fields[2]),
            })?;
            let cost = match fields.get(3) {
                Some(s) => {
                    any_cost = true;
                    Some(parse_f64(s).ok_or_else(|| Error::Parse {
                        line: lineno,
                        reason: format!("bad cost `{}`", s),
                    })?)
                }
                None => None,
            };
            max_id = max_id.max(from).max(to);
            arcs.push(Arc {
                line: lineno,
                from,
                to,
                affinity,
                cost,
            });
        }
        if arcs.is_empty() {
            return Err(Error::Parse {
                line: 0,
                reason: "empty edge list".to_string(),
            });
        }
        let n = max_id + 1;
        let mut affinities = DMatrix::zeros(n, n);
        let mut costs = DMatrix::from_element(n, n, f64::INFINITY);
        let mut seen = vec![false; n * n];
        for arc in &arcs {
            if seen[arc.from * n + arc.to] {
                return Err(Error::DuplicateArc(arc.from, arc.to));
            }
            seen[arc.from * n + arc.to] = true;
            affinities[(arc.from, arc.to)] = arc.affinity;
            if let Some(c) = arc.cost {
                costs[(arc.from, arc.to)] = c;
            } else if any_cost && arc.affinity > 0.0 {
                return Err(Error::Parse {
                    line: arc.line,
                    reason: "cost column present on other lines but missing here".to_string(),
                });
            }
        }
        if any_cost {
            Graph::build(affinities, Some(costs))
        } else {
            Graph::build(affinities, None)
        }
    }

    /// Serialize as an edge list with explicit costs; `load_edge_list`
    /// reproduces the exact matrices.
    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                if self.affinities[(i, j)] > 0.0 {
                    writeln!(
                        out,
                        "{} {} {} {}",
                        i,
                        j,
                        fmt_f64(self.affinities[(i, j)]),
                        fmt_f64(self.costs[(i, j)])
                    )?;
                }
            }
        }
        Ok(())
    }
}
