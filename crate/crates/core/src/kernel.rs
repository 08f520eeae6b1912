//! Distance-to-kernel conversion by double centering of squared distances,
//! and spectral embeddings from the top eigenvectors.

use crate::distance::{DistanceMatrix, Measure};
use crate::error::{Error, Result};
use crate::tsv;
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// A doubly centered kernel: K = -1/2 H D^(2) H with H = I - ee^T/n.
/// Row and column sums vanish; the matrix is exactly symmetric.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    k: DMatrix<f64>,
    source_measure: Measure,
    psd_clipped: bool,
}

impl KernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn source_measure(&self) -> Measure {
        self.source_measure
    }

    pub fn psd_clipped(&self) -> bool {
        self.psd_clipped
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = format!(
            "measure={} clipped={}",
            self.source_measure.as_str(),
            self.psd_clipped
        );
        tsv::write_matrix(out, &[header], &self.k)
    }
}

/// Node coordinates from the top eigenvectors of a kernel, unit-norm
/// columns ordered by descending eigenvalue, sign fixed so the first
/// nonzero component of each column is positive.
#[derive(Debug, Clone)]
pub struct Embedding {
    vectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    dims: usize,
    measure: Measure,
}

impl Embedding {
    /// One row per node, `dims` columns.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = format!("dims={} measure={}", self.dims, self.measure.as_str());
        tsv::write_matrix(out, &[header], &self.vectors)
    }
}

/// Square the distances elementwise, double-center, scale by -1/2. The
/// input must be finite everywhere (a single connected component).
/// `clip_negative` rebuilds the kernel with negative eigenvalues zeroed;
/// by default the possibly indefinite kernel is used as such.
pub fn distance_to_kernel(d: &DistanceMatrix, clip_negative: bool) -> Result<KernelMatrix> {
    let n = d.n();
    for i in 0..n {
        for j in 0..n {
            if !d.get(i, j).is_finite() {
                return Err(Error::InfiniteDistance(i, j));
            }
        }
    }
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j) * d.get(i, j));
    let row_mean: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| sq[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let grand: f64 = row_mean.iter().sum::<f64>() / n as f64;
    // sq is exactly symmetric, so using row means on both sides keeps the
    // result exactly symmetric entry by entry.
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let mut kernel = KernelMatrix {
        k,
        source_measure: d.measure(),
        psd_clipped: false,
    };
    if clip_negative {
        let eig = nalgebra::SymmetricEigen::new(kernel.k.clone());
        let clipped = DVector::from_fn(n, |i, _| eig.eigenvalues[i].max(0.0));
        let rebuilt =
            &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (rebuilt[(i, j)] + rebuilt[(j, i)]) / 2.0;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        kernel = KernelMatrix {
            k,
            source_measure: d.measure(),
            psd_clipped: true,
        };
    }
    Ok(kernel)
}

/// The `dims` eigenvectors with largest eigenvalues, unit-normalized, with
/// the deterministic sign convention.
pub fn top_eigenvectors(kernel: &KernelMatrix, dims: usize) -> Result<Embedding> {
    let n = kernel.n();
    if dims == 0 || dims > n {
        return Err(Error::InvalidArgument(format!(
            "dims must be in 1..={n}, got {dims}"
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(kernel.k.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut vectors = DMatrix::zeros(n, dims);
    let mut eigenvalues = DVector::zeros(dims);
    for (col, &src) in order.iter().take(dims).enumerate() {
        eigenvalues[col] = eig.eigenvalues[src];
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into();
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        if let Some(first) = v.iter().find(|x| **x != 0.0) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vectors.set_column(col, &v);
    }
    Ok(Embedding {
        vectors,
        eigenvalues,
        dims,
        measure: kernel.source_measure(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::potential_distance;
    use crate::graph::Graph;
    use crate::model::BopModel;
    use approx::assert_relative_eq;

    fn two_node_potential() -> DistanceMatrix {
        let g = Graph::build(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), None).unwrap();
        potential_distance(&BopModel::build(g, 1.0).unwrap())
    }

    #[test]
    fn two_node_kernel_closed_form() {
        let k = distance_to_kernel(&two_node_potential(), false).unwrap();
        assert_relative_eq!(k.matrix()[(0, 0)], 0.25, epsilon = 1e-12);
        assert_relative_eq!(k.matrix()[(0, 1)], -0.25, epsilon = 1e-12);
        assert_relative_eq!(k.matrix()[(1, 1)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn kernel_rows_sum_to_zero() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
            ],
        );
        let d = potential_distance(&BopModel::build(Graph::build(a, None).unwrap(), 1.0).unwrap());
        let k = distance_to_kernel(&d, false).unwrap();
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| k.matrix()[(i, j)]).sum();
            let col: f64 = (0..4).map(|j| k.matrix()[(j, i)]).sum();
            assert!(row.abs() < 1e-8);
            assert!(col.abs() < 1e-8);
        }
    }

    #[test]
    fn infinite_distances_are_rejected() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        let d = potential_distance(&BopModel::build(Graph::build(a, None).unwrap(), 1.0).unwrap());
        assert!(matches!(
            distance_to_kernel(&d, false),
            Err(Error::InfiniteDistance(_, _))
        ));
    }

    #[test]
    fn top_eigenvector_of_two_node_kernel() {
        let k = distance_to_kernel(&two_node_potential(), false).unwrap();
        let e = top_eigenvectors(&k, 1).unwrap();
        let c = 0.5f64.sqrt();
        assert_relative_eq!(e.vectors()[(0, 0)], c, epsilon = 1e-12);
        assert_relative_eq!(e.vectors()[(1, 0)], -c, epsilon = 1e-12);
        assert_relative_eq!(e.eigenvalues()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn full_spectrum_reconstructs_kernel() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
            ],
        );
        let d = potential_distance(&BopModel::build(Graph::build(a, None).unwrap(), 1.0).unwrap());
        let k = distance_to_kernel(&d, false).unwrap();
        let e = top_eigenvectors(&k, 4).unwrap();
        let mut rec = DMatrix::zeros(4, 4);
        for c in 0..4 {
            let v = e.vectors().column(c);
            rec += v * v.transpose() * e.eigenvalues()[c];
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(rec[(i, j)], k.matrix()[(i, j)], epsilon = 1e-8);
            }
        }
        // eigenvalues come out in non-increasing order
        for c in 1..4 {
            assert!(e.eigenvalues()[c] <= e.eigenvalues()[c - 1]);
        }
    }

    #[test]
    fn clipping_removes_negative_eigenvalues() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 3.0, 1.0, 0.0, 3.0, 0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 1.0, 0.0, 2.0, 1.0, 0.0,
            ],
        );
        let d = crate::distance::surprisal_distance(
            &BopModel::build(Graph::build(a, None).unwrap(), 0.5).unwrap(),
        );
        let k = distance_to_kernel(&d, true).unwrap();
        assert!(k.psd_clipped());
        let eig = nalgebra::SymmetricEigen::new(k.matrix().clone());
        for v in eig.eigenvalues.iter() {
            assert!(*v >= -1e-8);
        }
    }

    #[test]
    fn centering_is_idempotent() {
        let k = {
            let a = DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
                ],
            );
            let d =
                potential_distance(&BopModel::build(Graph::build(a, None).unwrap(), 1.0).unwrap());
            distance_to_kernel(&d, false).unwrap()
        };
        let n = 4;
        let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let again = &h * k.matrix() * &h;
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(again[(i, j)], k.matrix()[(i, j)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn centering_annihilates_constant_shifts_of_squared_distances() {
        let n = 4;
        let sq = DMatrix::from_row_slice(
            n,
            n,
            &[
                0.0, 1.0, 4.0, 2.0, 1.0, 0.0, 2.0, 3.0, 4.0, 2.0, 0.0, 1.0, 2.0, 3.0, 1.0, 0.0,
            ],
        );
        let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let k1 = -0.5 * &h * &sq * &h;
        let shifted = &sq + DMatrix::from_element(n, n, 7.0);
        let k2 = -0.5 * &h * &shifted * &h;
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(k1[(i, j)], k2[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvectors_separate_two_blocks() {
        use crate::synth;
        let ds = synth::two_block_sbm(30, 0.8, 0.05, 11).unwrap();
        let m = BopModel::build(ds.graph().clone(), 0.5).unwrap();
        let d = potential_distance(&m);
        let k = distance_to_kernel(&d, false).unwrap();
        let e = top_eigenvectors(&k, 2).unwrap();
        let signs: Vec<bool> = (0..30).map(|i| e.vectors()[(i, 0)] > 0.0).collect();
        let same_a = (1..15).filter(|&i| signs[i] == signs[0]).count();
        let same_b = (15..30).filter(|&i| signs[i] != signs[0]).count();
        assert!(
            same_a >= 13 && same_b >= 14,
            "block split {same_a}/{same_b}"
        );
    }
}
