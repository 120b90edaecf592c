//! Base learners: 1-nearest-neighbour, an entropy-split decision tree and
//! Gaussian naive Bayes, all producing class-probability vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InducerKind {
    Nn,
    Tree,
    Nb,
}

impl InducerKind {
    /// Whether `train` consumes instance weights directly.
    pub fn supports_weights(self) -> bool {
        !matches!(self, InducerKind::Nn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducerParams {
    /// Minimum number of training instances on each side of a tree split.
    pub min_leaf: usize,
    pub var_floor: f64,
}

impl Default for InducerParams {
    fn default() -> Self {
        InducerParams {
            min_leaf: 2,
            var_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Nn {
        class_count: usize,
        points: Matrix,
        labels: Vec<usize>,
    },
    Tree {
        class_count: usize,
        /// `nodes[0]` is the root.
        nodes: Vec<TreeNode>,
    },
    Nb {
        class_count: usize,
        priors: Vec<f64>,
        /// `class_count × n_features`
        means: Matrix,
        variances: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Taken when `x[feature] <= threshold`.
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
    },
}

fn check_training(features: &Matrix, labels: &[usize], class_count: usize, weights: Option<&[f64]>) -> Result<()> {
    if features.rows() == 0 {
        return Err(Error::EmptyDataset("empty training set".into()));
    }
    if labels.len() != features.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} instances",
            labels.len(),
            features.rows()
        )));
    }
    if class_count == 0 || labels.iter().any(|&l| l >= class_count) {
        return Err(Error::InvalidArgument(format!(
            "labels must lie in [0, {class_count})"
        )));
    }
    if let Some(w) = weights {
        if w.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} instances",
                w.len(),
                labels.len()
            )));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("weights must have a positive sum".into()));
        }
    }
    Ok(())
}

/// Weights rescaled to mean 1, so unit weights reproduce plain counts.
fn normalized_weights(n: usize, weights: Option<&[f64]>) -> Vec<f64> {
    match weights {
        None => vec![1.0; n],
        Some(w) => {
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v * n as f64 / total).collect()
        }
    }
}

/// Fits a classifier. `weights`, when given, must be non-negative with a
/// positive sum; nearest-neighbour ignores them.
pub fn train(
    kind: InducerKind,
    features: &Matrix,
    labels: &[usize],
    class_count: usize,
    weights: Option<&[f64]>,
    params: &InducerParams,
) -> Result<ClassifierModel> {
    check_training(features, labels, class_count, weights)?;
    match kind {
        InducerKind::Nn => Ok(ClassifierModel::Nn {
            class_count,
            points: features.clone(),
            labels: labels.to_vec(),
        }),
        InducerKind::Nb => {
            let w = normalized_weights(labels.len(), weights);
            Ok(train_nb(features, labels, class_count, &w, params.var_floor))
        }
        InducerKind::Tree => {
            let w = normalized_weights(labels.len(), weights);
            Ok(train_tree(features, labels, class_count, &w, params.min_leaf.max(1)))
        }
    }
}

fn train_nb(features: &Matrix, labels: &[usize], c: usize, w: &[f64], var_floor: f64) -> ClassifierModel {
    let n = features.cols();
    let mut mass = vec![0.0; c];
    let mut means = Matrix::zeros(c, n);
    for ((row, &l), &wi) in features.row_iter().zip(labels).zip(w) {
        mass[l] += wi;
        for (m, v) in means.row_mut(l).iter_mut().zip(row) {
            *m += wi * v;
        }
    }
    for (k, &mk) in mass.iter().enumerate() {
        if mk > 0.0 {
            means.row_mut(k).iter_mut().for_each(|m| *m /= mk);
        }
    }
    let mut variances = Matrix::zeros(c, n);
    for ((row, &l), &wi) in features.row_iter().zip(labels).zip(w) {
        for ((s, v), m) in variances.row_mut(l).iter_mut().zip(row).zip(means.row(l)) {
            *s += wi * (v - m) * (v - m);
        }
    }
    for (k, &mk) in mass.iter().enumerate() {
        for s in variances.row_mut(k) {
            let v = if mk > 0.0 { *s / mk } else { 0.0 };
            *s = v.max(var_floor);
        }
    }
    let total: f64 = mass.iter().sum();
    ClassifierModel::Nb {
        class_count: c,
        priors: mass.iter().map(|m| m / total).collect(),
        means,
        variances,
    }
}

fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum()
}

/// Gain differences below this are treated as ties.
const GAIN_TIE_TOL: f64 = 1e-12;

struct TreeBuilder<'a> {
    features: &'a Matrix,
    labels: &'a [usize],
    weights: &'a [f64],
    class_count: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn class_mass(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.class_count];
        for &i in idx {
            m[self.labels[i]] += self.weights[i];
        }
        m
    }

    fn leaf(&self, mass: &[f64]) -> TreeNode {
        let total: f64 = mass.iter().sum();
        let denom = total + self.class_count as f64;
        TreeNode::Leaf {
            proba: mass.iter().map(|m| (m + 1.0) / denom).collect(),
        }
    }

    /// Best `(feature, threshold)` by weighted information gain; ties go to
    /// the lowest feature index, then the lowest threshold.
    fn best_split(&self, idx: &[usize], mass: &[f64]) -> Option<(usize, f64)> {
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let parent = entropy(mass);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.features.cols() {
            order.sort_by(|&a, &b| {
                self.features
                    .get(a, f)
                    .total_cmp(&self.features.get(b, f))
                    .then(a.cmp(&b))
            });
            let mut left = vec![0.0; self.class_count];
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.labels[i]] += self.weights[i];
                let here = self.features.get(i, f);
                let next = self.features.get(order[pos + 1], f);
                if here == next {
                    continue;
                }
                let n_left = pos + 1;
                if n_left < self.min_leaf || order.len() - n_left < self.min_leaf {
                    continue;
                }
                let right: Vec<f64> = mass.iter().zip(&left).map(|(m, l)| (m - l).max(0.0)).collect();
                let wl: f64 = left.iter().sum();
                let wr: f64 = right.iter().sum();
                let children = (wl * entropy(&left) + wr * entropy(&right)) / total;
                let gain = parent - children;
                let mut threshold = 0.5 * (here + next);
                if threshold >= next {
                    threshold = here;
                }
                let better = match best {
                    None => gain > GAIN_TIE_TOL,
                    Some((g, _, _)) => gain > g + GAIN_TIE_TOL,
                };
                if better {
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let mass = self.class_mass(&idx);
        let slot = self.nodes.len();
        let pure = mass.iter().filter(|&&m| m > 0.0).count() <= 1;
        let split = if pure || idx.len() < 2 * self.min_leaf {
            None
        } else {
            self.best_split(&idx, &mass)
        };
        let Some((feature, threshold)) = split else {
            let leaf = self.leaf(&mass);
            self.nodes.push(leaf);
            return slot;
        };
        self.nodes.push(TreeNode::Leaf { proba: Vec::new() });
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.features.get(i, feature) <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

fn train_tree(features: &Matrix, labels: &[usize], c: usize, w: &[f64], min_leaf: usize) -> ClassifierModel {
    let mut b = TreeBuilder {
        features,
        labels,
        weights: w,
        class_count: c,
        min_leaf,
        nodes: Vec::new(),
    };
    b.grow((0..labels.len()).collect());
    ClassifierModel::Tree {
        class_count: c,
        nodes: b.nodes,
    }
}

impl ClassifierModel {
    pub fn class_count(&self) -> usize {
        match self {
            ClassifierModel::Nn { class_count, .. }
            | ClassifierModel::Tree { class_count, .. }
            | ClassifierModel::Nb { class_count, .. } => *class_count,
        }
    }

    pub fn kind(&self) -> InducerKind {
        match self {
            ClassifierModel::Nn { .. } => InducerKind::Nn,
            ClassifierModel::Tree { .. } => InducerKind::Tree,
            ClassifierModel::Nb { .. } => InducerKind::Nb,
        }
    }

    /// Expected input arity, when the model records it.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            ClassifierModel::Nn { points, .. } => Some(points.cols()),
            ClassifierModel::Nb { means, .. } => Some(means.cols()),
            ClassifierModel::Tree { .. } => None,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(n) = self.input_dim() {
            if x.len() != n {
                return Err(Error::Arity {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        match self {
            ClassifierModel::Nn {
                class_count,
                points,
                labels,
            } => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, p) in points.row_iter().enumerate() {
                    let d = sq_dist(x, p);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                let mut out = vec![0.0; *class_count];
                out[labels[best]] = 1.0;
                Ok(out)
            }
            ClassifierModel::Tree { nodes, .. } => {
                let mut at = 0;
                loop {
                    match &nodes[at] {
                        TreeNode::Leaf { proba } => return Ok(proba.clone()),
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            let v = *x.get(*feature).ok_or(Error::Arity {
                                expected: feature + 1,
                                got: x.len(),
                            })?;
                            at = if v <= *threshold { *left } else { *right };
                        }
                    }
                }
            }
            ClassifierModel::Nb {
                priors,
                means,
                variances,
                ..
            } => {
                let logs: Vec<f64> = priors
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        if p <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        let ll: f64 = x
                            .iter()
                            .zip(means.row(k))
                            .zip(variances.row(k))
                            .map(|((v, m), s)| {
                                -0.5 * (2.0 * std::f64::consts::PI * s).ln() - (v - m) * (v - m) / (2.0 * s)
                            })
                            .sum();
                        p.ln() + ll
                    })
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
                let z: f64 = exps.iter().sum();
                Ok(exps.into_iter().map(|e| e / z).collect())
            }
        }
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
