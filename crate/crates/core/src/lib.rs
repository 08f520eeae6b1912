//! Bag-of-paths analysis of weighted directed graphs.
//!
//! A Boltzmann distribution over the countable set of walks in a graph
//! favors short, low-cost walks; the probability that a sampled walk starts
//! in node i and ends in node j falls out of one matrix inversion. From the
//! hitting-paths flavor of those probabilities come two node metrics: the
//! surprisal distance and the potential distance, the latter interpolating
//! between the shortest-path distance (large theta) and half the commute
//! cost (small theta). Distances turn into centered kernels, kernels into
//! spectral node embeddings, and embeddings feed a semi-supervised node
//! classification harness.
//!
//! Modules:
//! - [`graph`]: graph construction, validation, edge-list I/O, reference
//!   transition matrix.
//! - [`model`]: the killed-walk matrix W, the fundamental matrix Z, the
//!   four path-probability matrices.
//! - [`distance`]: surprisal and potential distances, the log-domain
//!   recurrence, asymptotic-limit reports.
//! - [`oracle`]: independent checks — brute-force path enumeration,
//!   shortest paths, first-passage and commute costs.
//! - [`kernel`]: double-centered kernels and top-eigenvector embeddings.
//! - [`ssl`]: stratified cross-validation harness with a linear
//!   one-vs-rest classifier.
//! - [`synth`]: seeded deterministic graph generators.
//!
//! ```
//! use bagofpaths::distance::potential_distance;
//! use bagofpaths::nalgebra::DMatrix;
//! use bagofpaths::{BopModel, Graph};
//!
//! let affinities = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
//! let graph = Graph::build(affinities, None)?; // costs default to 1/affinity
//! let model = BopModel::build(graph, 1.0)?; // factor I - W, materialize Z
//! let d = potential_distance(&model);
//! assert!((d.get(0, 1) - 1.0).abs() < 1e-12);
//! # Ok::<(), bagofpaths::Error>(())
//! ```

pub mod distance;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod ssl;
pub mod synth;
pub mod tsv;

/// Matrix types used across the public API.
pub use nalgebra;

pub use distance::{
    distance_limits_report, distance_via_recurrence, potential_distance, potential_to_target,
    surprisal_distance, DistanceMatrix, LimitRow, Measure,
};
pub use error::{Error, Result};
pub use graph::{Graph, TransitionMatrix};
pub use kernel::{distance_to_kernel, top_eigenvectors, Embedding, KernelMatrix};
pub use model::{BopModel, PathKind, ProbabilityMatrix};
pub use oracle::{
    commute_cost_matrix, enumerate_path_mass, first_passage_cost, shortest_path_matrix,
    PathEnumeration,
};
pub use ssl::{
    evaluate, labeled_subset, stratified_folds, train_linear_classifier, EvalReport, FoldPlan,
    LabeledGraphDataset, LinearClassifier,
};
