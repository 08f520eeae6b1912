//! Semi-supervised node classification on a partially labeled graph.
//!
//! The pipeline embeds nodes with the top eigenvectors of a distance-derived
//! kernel and trains a one-vs-rest L2-regularized linear classifier on the
//! labeled subset. Model selection runs a nested stratified cross-validation:
//! outer folds over the labeled subset, inner folds over each outer-train
//! split to pick (theta, regularization). Accuracy is always scored on nodes
//! outside the labeled subset.
//!
//! Everything is a pure function of (inputs, seed): sampling uses the raw
//! ChaCha stream, iteration orders are sorted, and hyperparameter ties break
//! toward the smallest theta, then the smallest regularization strength.

use crate::distance::{self, Measure};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel;
use crate::model::BopModel;
use crate::synth::{rng_from_seed, shuffle, splitmix64};
use crate::tsv::fmt_f64;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};

/// A graph with optional per-node class ids. Nodes with a label form the
/// pool the harness may reveal or score against.
#[derive(Debug, Clone)]
pub struct LabeledGraphDataset {
    graph: Graph,
    labels: Vec<Option<usize>>,
    classes: usize,
}

impl LabeledGraphDataset {
    /// Validates that labels match the node count, class ids are dense in
    /// [0, classes) and every class has at least one labeled node.
    pub fn new(graph: Graph, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != graph.n() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} nodes",
                labels.len(),
                graph.n()
            )));
        }
        let classes = labels
            .iter()
            .flatten()
            .max()
            .map(|m| m + 1)
            .ok_or_else(|| Error::InvalidArgument("no labeled nodes".to_string()))?;
        for c in 0..classes {
            if !labels.contains(&Some(c)) {
                return Err(Error::InvalidArgument(format!(
                    "class {c} has no labeled node"
                )));
            }
        }
        Ok(LabeledGraphDataset {
            graph,
            labels,
            classes,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// All (node, class) pairs, ascending by node id.
    pub fn labeled_nodes(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|c| (i, c)))
            .collect()
    }

    /// Parse a label file: lines `node_id class_id`, `#` comments.
    pub fn load_labels<R: BufRead>(graph: Graph, input: R) -> Result<Self> {
        let n = graph.n();
        let mut labels = vec![None; n];
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
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected `node class`, got {} fields", fields.len()),
                });
            }
            let node: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad node id `{}`", fields[0]),
            })?;
            let class: usize = fields[1].parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad class id `{}`", fields[1]),
            })?;
            if node >= n {
                return Err(Error::NodeOutOfRange { index: node, n });
            }
            labels[node] = Some(class);
        }
        LabeledGraphDataset::new(graph, labels)
    }

    /// Same nodes, with the multiset of present labels permuted; the
    /// sanity control for any classification score.
    pub fn with_labels_shuffled(&self, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let nodes: Vec<usize> = (0..self.labels.len())
            .filter(|&i| self.labels[i].is_some())
            .collect();
        let mut values: Vec<usize> = nodes.iter().map(|&i| self.labels[i].unwrap()).collect();
        shuffle(&mut rng, &mut values);
        let mut labels = self.labels.clone();
        for (&node, &value) in nodes.iter().zip(values.iter()) {
            labels[node] = Some(value);
        }
        LabeledGraphDataset {
            graph: self.graph.clone(),
            labels,
            classes: self.classes,
        }
    }
}

/// Deal class members round-robin into `n_folds` buckets after a seeded
/// shuffle; preserves per-class proportions within one node.
fn stratified_buckets(
    pairs: &[(usize, usize)],
    classes: usize,
    n_folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); n_folds];
    for c in 0..classes {
        let mut members: Vec<usize> = pairs
            .iter()
            .filter(|(_, class)| *class == c)
            .map(|(node, _)| *node)
            .collect();
        members.sort_unstable();
        shuffle(rng, &mut members);
        for (t, node) in members.into_iter().enumerate() {
            folds[t % n_folds].push(node);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

/// Stratified partition of all labeled nodes into (train, test) splits.
/// Deterministic in `seed`; requires at least `n_folds` labeled nodes in
/// every class.
pub fn stratified_folds(
    ds: &LabeledGraphDataset,
    n_folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("n_folds must be at least 2".into()));
    }
    let pairs = ds.labeled_nodes();
    for c in 0..ds.classes() {
        let available = pairs.iter().filter(|(_, class)| *class == c).count();
        if available < n_folds {
            return Err(Error::InsufficientClassSize {
                class: c,
                available,
                needed: n_folds,
            });
        }
    }
    let mut rng = rng_from_seed(seed);
    let folds = stratified_buckets(&pairs, ds.classes(), n_folds, &mut rng);
    Ok(folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, nodes)| nodes.iter().copied())
                .collect();
            let mut train = train;
            train.sort_unstable();
            (train, test.clone())
        })
        .collect())
}

/// One-vs-rest linear scorer over embedding features; each class gets an
/// affine score and prediction takes the argmax, ties toward the lowest
/// class id.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    /// classes x (dims + 1); last column is the intercept.
    coefficients: DMatrix<f64>,
}

impl LinearClassifier {
    pub fn classes(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn score(&self, features: &[f64], class: usize) -> f64 {
        let k = self.coefficients.ncols() - 1;
        let mut s = self.coefficients[(class, k)];
        for (d, x) in features.iter().enumerate().take(k) {
            s += self.coefficients[(class, d)] * x;
        }
        s
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = self.score(features, 0);
        for c in 1..self.classes() {
            let s = self.score(features, c);
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        best
    }
}

/// Fit the one-vs-rest ridge scorers on the given (node, class) pairs over
/// rows of `features`. Targets are +1 for the class and -1 for the rest;
/// the intercept is not regularized.
pub fn train_linear_classifier(
    features: &DMatrix<f64>,
    train: &[(usize, usize)],
    classes: usize,
    reg_strength: f64,
) -> Result<LinearClassifier> {
    if classes < 2 {
        return Err(Error::DegenerateTraining(
            "need at least 2 classes".to_string(),
        ));
    }
    if reg_strength.is_nan() || reg_strength <= 0.0 {
        return Err(Error::InvalidArgument(
            "regularization strength must be positive".to_string(),
        ));
    }
    for c in 0..classes {
        if !train.iter().any(|(_, class)| *class == c) {
            return Err(Error::DegenerateTraining(format!(
                "class {c} has no training examples"
            )));
        }
    }
    let k = features.ncols();
    let m = train.len();
    let mut x = DMatrix::zeros(m, k + 1);
    for (row, (node, _)) in train.iter().enumerate() {
        for d in 0..k {
            x[(row, d)] = features[(*node, d)];
        }
        x[(row, k)] = 1.0;
    }
    let mut gram = x.transpose() * &x;
    for d in 0..k {
        gram[(d, d)] += reg_strength;
    }
    let lu = gram.lu();
    let mut coefficients = DMatrix::zeros(classes, k + 1);
    for c in 0..classes {
        let y = DVector::from_fn(m, |row, _| if train[row].1 == c { 1.0 } else { -1.0 });
        let rhs = x.transpose() * y;
        let beta = lu
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateTraining("singular normal equations".to_string()))?;
        for d in 0..=k {
            coefficients[(c, d)] = beta[d];
        }
    }
    Ok(LinearClassifier { coefficients })
}

/// The seeded labeled subset of size round(rate * pool), stratified by
/// class, clamped so every class contributes at least one node and at
/// least one labeled node stays out for scoring.
pub fn labeled_subset(
    ds: &LabeledGraphDataset,
    labeling_rate: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if labeling_rate.is_nan() || labeling_rate <= 0.0 || labeling_rate >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "labeling rate must lie in (0, 1), got {labeling_rate}"
        )));
    }
    let pairs = ds.labeled_nodes();
    let pool = pairs.len();
    let classes = ds.classes();
    if pool < classes + 1 {
        return Err(Error::InvalidArgument(
            "need at least one labeled node per class plus one to score".to_string(),
        ));
    }
    let target = ((labeling_rate * pool as f64).round() as usize)
        .max(classes)
        .min(pool - 1);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (node, class) in &pairs {
        per_class[*class].push(*node);
    }
    let mut rng = rng_from_seed(splitmix64(seed));
    let mut quotas: Vec<usize> = per_class
        .iter()
        .map(|members| {
            ((labeling_rate * members.len() as f64).round() as usize)
                .max(1)
                .min(members.len())
        })
        .collect();
    // nudge quotas until they add up to the target, largest classes first
    loop {
        let total: usize = quotas.iter().sum();
        if total == target {
            break;
        }
        if total > target {
            let c = (0..classes)
                .filter(|&c| quotas[c] > 1)
                .max_by_key(|&c| (quotas[c], usize::MAX - c))
                .expect("some quota above one");
            quotas[c] -= 1;
        } else {
            let c = (0..classes)
                .filter(|&c| quotas[c] < per_class[c].len())
                .max_by_key(|&c| (per_class[c].len() - quotas[c], usize::MAX - c))
                .expect("some quota below its class size");
            quotas[c] += 1;
        }
    }
    let mut subset = Vec::with_capacity(target);
    for (c, members) in per_class.iter().enumerate() {
        let mut members = members.clone();
        shuffle(&mut rng, &mut members);
        subset.extend(members.into_iter().take(quotas[c]));
    }
    subset.sort_unstable();
    Ok(subset)
}

/// Per-outer-fold outcome: the selected hyperparameters and the
/// predictions over every labeled node outside the subset.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub fold: usize,
    pub theta: f64,
    pub reg_strength: f64,
    /// (node, predicted class) for each scored node, ascending by node.
    pub predictions: Vec<(usize, usize)>,
}

/// Cross-validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    /// Population standard deviation over fold accuracies.
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Per fold: (theta, regularization strength).
    pub chosen_hyperparams: Vec<(f64, f64)>,
}

impl EvalReport {
    /// Single-line record: mean, std, fold count.
    pub fn write_record<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# mean_accuracy\tstd_accuracy\tfolds")?;
        writeln!(
            out,
            "{}\t{}\t{}",
            fmt_f64(self.mean_accuracy),
            fmt_f64(self.std_accuracy),
            self.fold_accuracies.len()
        )?;
        Ok(())
    }

    /// Per-fold detail: fold id, accuracy, chosen theta and regularization.
    pub fn write_fold_details<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# fold\taccuracy\ttheta\treg_strength")?;
        for (f, acc) in self.fold_accuracies.iter().enumerate() {
            let (theta, reg) = self.chosen_hyperparams[f];
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                f,
                fmt_f64(*acc),
                fmt_f64(theta),
                fmt_f64(reg)
            )?;
        }
        Ok(())
    }
}

fn embedding_for_theta(
    graph: &Graph,
    measure: Measure,
    theta: f64,
    dims: usize,
) -> Result<DMatrix<f64>> {
    let model = BopModel::build(graph.clone(), theta)?;
    let d = match measure {
        Measure::Surprisal => distance::surprisal_distance(&model),
        Measure::Potential => distance::potential_distance(&model),
    };
    let k = kernel::distance_to_kernel(&d, false)?;
    let e = kernel::top_eigenvectors(&k, dims.min(graph.n()))?;
    Ok(e.vectors().clone())
}

fn accuracy_of(
    pairs: &[(usize, usize)],
    classifier: &LinearClassifier,
    features: &DMatrix<f64>,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|(node, class)| {
            let row: Vec<f64> = features.row(*node).iter().copied().collect();
            classifier.predict(&row) == *class
        })
        .count();
    hits as f64 / pairs.len() as f64
}

fn min_class_count(pairs: &[(usize, usize)], classes: usize) -> usize {
    (0..classes)
        .map(|c| pairs.iter().filter(|(_, class)| *class == c).count())
        .min()
        .unwrap_or(0)
}

/// Train and select hyperparameters reading labels only for nodes in
/// `subset`. Embeddings depend on the graph alone, never on labels; the
/// returned plans carry predictions for all labeled nodes outside the
/// subset, to be scored by the caller.
pub fn fit_over_subset(
    ds: &LabeledGraphDataset,
    subset: &[usize],
    measure: Measure,
    theta_grid: &[f64],
    reg_grid: &[f64],
    dims: usize,
    seed: u64,
) -> Result<Vec<FoldPlan>> {
    if theta_grid.is_empty() || reg_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "hyperparameter grids must be non-empty".into(),
        ));
    }
    let classes = ds.classes();
    // the only label reads during fitting: the subset itself
    let subset_pairs: Vec<(usize, usize)> = subset
        .iter()
        .map(|&node| {
            ds.labels()[node]
                .map(|c| (node, c))
                .ok_or_else(|| Error::InvalidArgument(format!("node {node} has no label")))
        })
        .collect::<Result<_>>()?;
    let scored: Vec<usize> = (0..ds.graph().n())
        .filter(|i| ds.labels()[*i].is_some() && !subset.contains(i))
        .collect();
    if scored.is_empty() {
        return Err(Error::InvalidArgument(
            "no labeled nodes left outside the subset".to_string(),
        ));
    }

    let mut thetas: Vec<f64> = theta_grid.to_vec();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thetas.dedup();
    let mut regs: Vec<f64> = reg_grid.to_vec();
    regs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    regs.dedup();

    let mut embeddings = Vec::with_capacity(thetas.len());
    for &theta in &thetas {
        embeddings.push(embedding_for_theta(ds.graph(), measure, theta, dims)?);
    }

    let outer_k = 10usize.min(min_class_count(&subset_pairs, classes));
    if outer_k < 2 {
        return Err(Error::InsufficientClassSize {
            class: (0..classes)
                .min_by_key(|&c| subset_pairs.iter().filter(|(_, cl)| *cl == c).count())
                .unwrap_or(0),
            available: min_class_count(&subset_pairs, classes),
            needed: 2,
        });
    }
    let mut outer_rng = rng_from_seed(splitmix64(seed ^ 0x0f0f_0f0f));
    let outer = stratified_buckets(&subset_pairs, classes, outer_k, &mut outer_rng);

    let class_of = |node: usize| -> usize {
        subset_pairs
            .iter()
            .find(|(n, _)| *n == node)
            .map(|(_, c)| *c)
            .expect("node comes from subset")
    };

    let mut plans = Vec::with_capacity(outer_k);
    for fold in 0..outer_k {
        let train_pairs: Vec<(usize, usize)> = outer
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != fold)
            .flat_map(|(_, nodes)| nodes.iter().map(|&n| (n, class_of(n))))
            .collect();
        let inner_k = 5usize.min(min_class_count(&train_pairs, classes));
        let (theta_idx, reg_idx) = if inner_k < 2 {
            (0usize, 0usize)
        } else {
            let mut inner_rng = rng_from_seed(splitmix64(seed ^ (0xabcd_1234 + fold as u64)));
            let inner = stratified_buckets(&train_pairs, classes, inner_k, &mut inner_rng);
            let inner_class_of = |node: usize| -> usize {
                train_pairs
                    .iter()
                    .find(|(n, _)| *n == node)
                    .map(|(_, c)| *c)
                    .expect("node comes from the outer-train split")
            };
            let mut best = (-1.0f64, 0usize, 0usize);
            for (ti, _) in thetas.iter().enumerate() {
                for (ri, &reg) in regs.iter().enumerate() {
                    let mut total = 0.0;
                    for g in 0..inner_k {
                        let fit_pairs: Vec<(usize, usize)> = inner
                            .iter()
                            .enumerate()
                            .filter(|(h, _)| *h != g)
                            .flat_map(|(_, nodes)| nodes.iter().map(|&n| (n, inner_class_of(n))))
                            .collect();
                        let val_pairs: Vec<(usize, usize)> =
                            inner[g].iter().map(|&n| (n, inner_class_of(n))).collect();
                        let clf =
                            train_linear_classifier(&embeddings[ti], &fit_pairs, classes, reg)?;
                        total += accuracy_of(&val_pairs, &clf, &embeddings[ti]);
                    }
                    let mean = total / inner_k as f64;
                    if mean > best.0 {
                        best = (mean, ti, ri);
                    }
                }
            }
            (best.1, best.2)
        };
        let clf =
            train_linear_classifier(&embeddings[theta_idx], &train_pairs, classes, regs[reg_idx])?;
        let predictions: Vec<(usize, usize)> = scored
            .iter()
            .map(|&node| {
                let row: Vec<f64> = embeddings[theta_idx].row(node).iter().copied().collect();
                (node, clf.predict(&row))
            })
            .collect();
        plans.push(FoldPlan {
            fold,
            theta: thetas[theta_idx],
            reg_strength: regs[reg_idx],
            predictions,
        });
    }
    Ok(plans)
}

/// Full nested cross-validation: pick the labeled subset, fit per-fold
/// classifiers with inner hyperparameter selection, and score each fold on
/// the nodes that never entered the labeled subset.
pub fn evaluate(
    ds: &LabeledGraphDataset,
    measure: Measure,
    labeling_rate: f64,
    theta_grid: &[f64],
    reg_grid: &[f64],
    dims: usize,
    seed: u64,
) -> Result<EvalReport> {
    let subset = labeled_subset(ds, labeling_rate, seed)?;
    let plans = fit_over_subset(ds, &subset, measure, theta_grid, reg_grid, dims, seed)?;
    let mut fold_accuracies = Vec::with_capacity(plans.len());
    let mut chosen = Vec::with_capacity(plans.len());
    for plan in &plans {
        let hits = plan
            .predictions
            .iter()
            .filter(|(node, predicted)| ds.labels()[*node] == Some(*predicted))
            .count();
        fold_accuracies.push(hits as f64 / plan.predictions.len() as f64);
        chosen.push((plan.theta, plan.reg_strength));
    }
    let mean = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    let var = fold_accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / fold_accuracies.len() as f64;
    Ok(EvalReport {
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        fold_accuracies,
        chosen_hyperparams: chosen,
    })
}

/// The theta grid used for model selection when none is supplied.
pub fn default_theta_grid() -> Vec<f64> {
    vec![0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
}

/// The regularization grid used for model selection when none is supplied.
pub fn default_reg_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
}

/// Default embedding dimension.
pub const DEFAULT_DIMS: usize = 5;
