//! The computational heart: the substochastic matrix W of the killed walk,
//! the fundamental matrix Z = (I - W)^-1, partition functions, and the four
//! bag-of-paths probability matrices (regular / hitting, with and without
//! zero-length paths).

use crate::error::{Error, Result};
use crate::graph::{Graph, TransitionMatrix};
use crate::tsv;
use nalgebra::{DMatrix, DVector, Dyn};
use std::io::Write;

/// Residual threshold for accepting the factorization of (I - W).
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Which family of paths a probability matrix was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Non-hitting paths, zero-length included.
    Regular,
    /// Non-hitting paths, zero-length excluded.
    RegularNonzero,
    /// Hitting paths, zero-length included.
    Hitting,
    /// Hitting paths, zero-length excluded.
    HittingNonzero,
}

impl PathKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathKind::Regular => "regular",
            PathKind::RegularNonzero => "regular-nonzero",
            PathKind::Hitting => "hitting",
            PathKind::HittingNonzero => "hitting-nonzero",
        }
    }
}

/// A normalized matrix of start/end probabilities over one path family.
#[derive(Debug, Clone)]
pub struct ProbabilityMatrix {
    p: DMatrix<f64>,
    kind: PathKind,
    partition: f64,
    theta: f64,
}

impl ProbabilityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    /// The partition function that normalized this matrix.
    pub fn partition(&self) -> f64 {
        self.partition
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = format!(
            "kind={} theta={} partition={}",
            self.kind.as_str(),
            tsv::fmt_f64(self.theta),
            tsv::fmt_f64(self.partition)
        );
        tsv::write_matrix(out, &[header], &self.p)
    }
}

/// A graph paired with an inverse temperature: holds W, the factorization
/// of (I - W), the fundamental matrix Z and its hitting-paths variant Z_h.
#[derive(Debug)]
pub struct BopModel {
    graph: Graph,
    theta: f64,
    p_ref: TransitionMatrix,
    w: DMatrix<f64>,
    z: DMatrix<f64>,
    z_h: DMatrix<f64>,
    lu: nalgebra::linalg::LU<f64, Dyn, Dyn>,
    underflowed_arcs: usize,
}

impl BopModel {
    /// Build W = P_ref ∘ exp(-theta C), factor (I - W) once, materialize Z
    /// by solving against the identity and derive Z_h by dividing each
    /// column by its diagonal entry.
    ///
    /// exp(-theta * inf) is taken as exactly 0, so missing arcs never
    /// contribute. Arcs whose finite weight underflows to zero are counted
    /// in [`BopModel::underflowed_arcs`]; for theta large enough to
    /// underflow, the log-domain recurrence in the distance module is the
    /// supported path.
    pub fn build(graph: Graph, theta: f64) -> Result<Self> {
        if theta.is_nan() || theta <= 0.0 {
            return Err(Error::NonPositiveTheta(theta));
        }
        let n = graph.n();
        let p_ref = graph.reference_transitions();
        let mut w = DMatrix::zeros(n, n);
        let mut underflowed_arcs = 0usize;
        for i in 0..n {
            for j in 0..n {
                if graph.has_arc(i, j) {
                    let v = p_ref.prob(i, j) * (-theta * graph.cost(i, j)).exp();
                    if v == 0.0 {
                        underflowed_arcs += 1;
                    }
                    w[(i, j)] = v;
                }
            }
        }
        let system = DMatrix::identity(n, n) - &w;
        let lu = system.clone().lu();
        let z = lu
            .solve(&DMatrix::identity(n, n))
            .ok_or(Error::SingularSystem {
                residual: f64::INFINITY,
            })?;
        let residual = (&system * &z - DMatrix::identity(n, n))
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
            return Err(Error::SingularSystem { residual });
        }
        let mut z_h = DMatrix::zeros(n, n);
        for j in 0..n {
            let d = z[(j, j)];
            if d.is_nan() || d <= 0.0 {
                return Err(Error::SingularSystem {
                    residual: f64::INFINITY,
                });
            }
            for i in 0..n {
                z_h[(i, j)] = z[(i, j)] / d;
            }
        }
        Ok(BopModel {
            graph,
            theta,
            p_ref,
            w,
            z,
            z_h,
            lu,
            underflowed_arcs,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn reference(&self) -> &TransitionMatrix {
        &self.p_ref
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// The fundamental matrix Z = (I - W)^-1.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// The hitting-paths fundamental matrix Z_h = Z Diag(Z)^-1; its
    /// diagonal is exactly 1.
    pub fn z_h(&self) -> &DMatrix<f64> {
        &self.z_h
    }

    /// Arcs whose positive weight underflowed to zero in W.
    pub fn underflowed_arcs(&self) -> usize {
        self.underflowed_arcs
    }

    /// Solve (I - W) x = b against the cached factorization.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(b).ok_or(Error::SingularSystem {
            residual: f64::INFINITY,
        })
    }

    /// Probabilities over non-hitting paths; zero-length paths contribute
    /// exactly the identity and are kept or dropped by the flag.
    pub fn regular_probabilities(&self, include_zero_length: bool) -> Result<ProbabilityMatrix> {
        let n = self.graph.n();
        let (num, kind) = if include_zero_length {
            (self.z.clone(), PathKind::Regular)
        } else {
            (&self.z - DMatrix::identity(n, n), PathKind::RegularNonzero)
        };
        self.normalize(num, kind)
    }

    /// Probabilities over hitting paths (ending node absorbing), from the
    /// column-normalized fundamental matrix.
    pub fn hitting_probabilities(&self, include_zero_length: bool) -> Result<ProbabilityMatrix> {
        let n = self.graph.n();
        let (num, kind) = if include_zero_length {
            (self.z_h.clone(), PathKind::Hitting)
        } else {
            (
                &self.z_h - DMatrix::identity(n, n),
                PathKind::HittingNonzero,
            )
        };
        self.normalize(num, kind)
    }

    fn normalize(&self, num: DMatrix<f64>, kind: PathKind) -> Result<ProbabilityMatrix> {
        let partition: f64 = num.iter().sum();
        if partition.is_nan() || partition <= 0.0 {
            return Err(Error::DegeneratePartition);
        }
        Ok(ProbabilityMatrix {
            p: num / partition,
            kind,
            partition,
            theta: self.theta,
        })
    }

    /// Column j of (I - W^(-j))^-1 where W^(-j) is W with row j zeroed,
    /// solved from scratch. This is the direct (absorbing-node) computation
    /// of the hitting column and serves as an independent check of the
    /// rank-one identity z_h[i][j] = z[i][j] / z[j][j].
    pub fn hitting_column_direct(&self, j: usize) -> Result<DVector<f64>> {
        let n = self.graph.n();
        if j >= n {
            return Err(Error::NodeOutOfRange { index: j, n });
        }
        let mut system = DMatrix::identity(n, n) - &self.w;
        for col in 0..n {
            system[(j, col)] = if col == j { 1.0 } else { 0.0 };
        }
        let mut rhs = DVector::zeros(n);
        rhs[j] = 1.0;
        let lu = system.clone().lu();
        let x = lu.solve(&rhs).ok_or(Error::SingularSystem {
            residual: f64::INFINITY,
        })?;
        let residual = (&system * &x - &rhs)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
            return Err(Error::SingularSystem { residual });
        }
        Ok(x)
    }

    /// Total mass of walks of length at most t_max versus the full series:
    /// returns (eᵀ(Σ_{τ=0}^{t_max} Wᵗ)e, eᵀZe). The first component climbs
    /// monotonically toward the second as t_max grows.
    pub fn bounded_partition_check(&self, t_max: usize) -> (f64, f64) {
        let n = self.graph.n();
        let mut u = DVector::from_element(n, 1.0);
        let mut acc = n as f64;
        for _ in 1..=t_max {
            u = &self.w * u;
            acc += u.sum();
        }
        (acc, self.z.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_node_model(theta: f64) -> BopModel {
        let g = Graph::build(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), None).unwrap();
        BopModel::build(g, theta).unwrap()
    }

    #[test]
    fn two_node_closed_form_z() {
        // I - W is [[1, -w], [-w, 1]] with w = e^-1, so
        // z11 = 1/(1 - w^2) and z12 = w/(1 - w^2).
        let m = two_node_model(1.0);
        let w = (-1.0f64).exp();
        assert_relative_eq!(m.w()[(0, 1)], w, max_relative = 1e-15);
        assert_relative_eq!(m.z()[(0, 0)], 1.0 / (1.0 - w * w), max_relative = 1e-13);
        assert_relative_eq!(m.z()[(0, 1)], w / (1.0 - w * w), max_relative = 1e-13);
        assert_relative_eq!(m.z_h()[(0, 1)], w, max_relative = 1e-13);
        assert_eq!(m.z_h()[(0, 0)], 1.0);
        assert_eq!(m.z_h()[(1, 1)], 1.0);
    }

    #[test]
    fn zero_cost_arcs_make_the_system_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = DMatrix::from_row_slice(2, 2, &[f64::INFINITY, 0.0, 0.0, f64::INFINITY]);
        let g = Graph::build(a, Some(c)).unwrap();
        assert!(matches!(
            BopModel::build(g, 1.0),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn theta_must_be_positive() {
        let g = Graph::build(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), None).unwrap();
        assert!(matches!(
            BopModel::build(g.clone(), 0.0),
            Err(Error::NonPositiveTheta(_))
        ));
        assert!(matches!(
            BopModel::build(g, -1.0),
            Err(Error::NonPositiveTheta(_))
        ));
    }

    #[test]
    fn regular_probabilities_closed_form() {
        let m = two_node_model(1.0);
        let w = (-1.0f64).exp();
        let z11 = 1.0 / (1.0 - w * w);
        let z12 = w / (1.0 - w * w);

        let pi = m.regular_probabilities(true).unwrap();
        assert_eq!(pi.kind(), PathKind::Regular);
        assert_relative_eq!(
            pi.matrix()[(0, 1)],
            z12 / (2.0 * z11 + 2.0 * z12),
            max_relative = 1e-13
        );
        assert_relative_eq!(pi.total(), 1.0, epsilon = 1e-12);

        let pibar = m.regular_probabilities(false).unwrap();
        assert_eq!(pibar.kind(), PathKind::RegularNonzero);
        let expected = (z11 - 1.0) / (2.0 * (z11 - 1.0) + 2.0 * z12);
        assert_relative_eq!(pibar.matrix()[(0, 0)], expected, max_relative = 1e-12);
        assert_relative_eq!(pibar.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hitting_probabilities_closed_form() {
        let m = two_node_model(1.0);
        let w = (-1.0f64).exp();
        let zch = 2.0 + 2.0 * w;

        let pih = m.hitting_probabilities(true).unwrap();
        assert_relative_eq!(pih.partition(), zch, max_relative = 1e-13);
        assert_relative_eq!(pih.matrix()[(0, 1)], w / zch, max_relative = 1e-13);
        // diagonal of the numerator is exactly 1, so diagonal entries agree
        assert_eq!(pih.matrix()[(0, 0)], pih.matrix()[(1, 1)]);
        assert_relative_eq!(pih.total(), 1.0, epsilon = 1e-12);

        let pibar = m.hitting_probabilities(false).unwrap();
        assert_eq!(pibar.matrix()[(0, 1)], 0.5);
        assert_eq!(pibar.matrix()[(0, 0)], 0.0);
        assert_relative_eq!(pibar.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_partition_on_single_node() {
        let g = Graph::build(DMatrix::from_row_slice(1, 1, &[1.0]), None).unwrap();
        let m = BopModel::build(g, 1.0).unwrap();
        assert!(m.hitting_probabilities(true).is_ok());
        assert!(matches!(
            m.hitting_probabilities(false),
            Err(Error::DegeneratePartition)
        ));
    }

    #[test]
    fn hitting_column_direct_two_node() {
        let m = two_node_model(1.0);
        let col = m.hitting_column_direct(1).unwrap();
        assert_relative_eq!(col[0], (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(col[1], 1.0);
    }

    #[test]
    fn hitting_column_direct_matches_z_h() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let g = Graph::build(a, None).unwrap();
        let m = BopModel::build(g, 1.0).unwrap();
        for j in 0..3 {
            let col = m.hitting_column_direct(j).unwrap();
            for i in 0..3 {
                assert_relative_eq!(col[i], m.z_h()[(i, j)], epsilon = 1e-10);
            }
            assert_eq!(col[j], 1.0);
        }
    }

    #[test]
    fn bounded_partition_check_examples() {
        let m = two_node_model(1.0);
        let (bounded, full) = m.bounded_partition_check(0);
        assert_eq!(bounded, 2.0);
        assert_relative_eq!(full, 2.0 / (1.0 - (-1.0f64).exp()), max_relative = 1e-13);

        let mut prev = 0.0;
        for t in 0..20 {
            let (b, f) = m.bounded_partition_check(t);
            assert!(b >= prev);
            assert!(b <= f + 1e-12);
            prev = b;
        }
        let (b, f) = m.bounded_partition_check(50);
        assert_relative_eq!(b, f, epsilon = 1e-8);
    }

    #[test]
    fn backward_recurrence_holds_columnwise() {
        // z_h[i][k] = sum_j w_ij z_h[j][k] for i != k, and z_h[k][k] = 1
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
            ],
        );
        let g = Graph::build(a, None).unwrap();
        let m = BopModel::build(g, 0.7).unwrap();
        for k in 0..4 {
            assert_eq!(m.z_h()[(k, k)], 1.0);
            for i in 0..4 {
                if i == k {
                    continue;
                }
                let rhs: f64 = (0..4).map(|j| m.w()[(i, j)] * m.z_h()[(j, k)]).sum();
                assert_relative_eq!(m.z_h()[(i, k)], rhs, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn z_diagonal_dominates_one() {
        let m = two_node_model(0.3);
        for i in 0..2 {
            assert!(m.z()[(i, i)] >= 1.0);
        }
    }

    #[test]
    fn node_indices_are_validated() {
        let m = two_node_model(1.0);
        assert!(matches!(
            m.hitting_column_direct(2),
            Err(Error::NodeOutOfRange { index: 2, n: 2 })
        ));
        assert!(matches!(
            crate::distance::potential_to_target(&m, 5, 1e-10, 10),
            Err(Error::NodeOutOfRange { index: 5, n: 2 })
        ));
    }

    #[test]
    fn factorization_residual_is_tiny_on_valid_graphs() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 2.0, 0.5, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.5, 1.0, 1.0, 0.0,
            ],
        );
        let m = BopModel::build(Graph::build(a, None).unwrap(), 0.4).unwrap();
        let n = 4;
        let eye = DMatrix::<f64>::identity(n, n);
        let residual = ((&eye - m.w()) * m.z() - &eye)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(residual <= 1e-9, "residual {residual:.3e}");
    }

    #[test]
    fn probability_tsv_has_header() {
        let m = two_node_model(1.0);
        let p = m.hitting_probabilities(true).unwrap();
        let mut buf = Vec::new();
        p.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# kind=hitting theta="));
        assert!(text.contains("partition="));
    }
}
