//! Local label priors from L2-regularized multinomial logistic regression.
//!
//! The trainer fits weights on the observed nodes only (full-batch gradient
//! descent with a halving backtracking line search on the mean negative
//! log-likelihood plus `l2_weight/2 * ||W||^2`; the bias is unregularized so the
//! no-feature optimum is the observed class-frequency distribution). Prediction
//! produces one probability row per node — observed nodes included, since the
//! grounded prior rules only ever consume rows for unobserved nodes.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::data::{write_atomic, AttributedGraph, DataError, FileKind, ObservationSplit};

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("category `{0}` has no observed training example")]
    EmptyCategory(String),
    #[error("objective became non-finite at epoch {0}")]
    NonFinite(usize),
    #[error("no observed nodes to train on")]
    NoObserved,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone)]
pub struct LrConfig {
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            l2_weight: 0.01,
            learning_rate: 1.0,
            max_epochs: 500,
            tolerance: 1e-6,
        }
    }
}

/// Trained multinomial model: `weights` is feature-major `F x K`, bias length `K`.
#[derive(Debug, Clone)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub feature_count: usize,
    pub kappa: usize,
}

impl LrModel {
    fn logits(&self, features: &[(u32, f64)], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &(f, x) in features {
            let row = &self.weights[f as usize * self.kappa..(f as usize + 1) * self.kappa];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
    }
}

/// Per-node probability rows, row-major `n x kappa`. Every row sums to 1.
#[derive(Debug, Clone)]
pub struct PriorTable {
    probs: Vec<f64>,
    kappa: usize,
}

impl PriorTable {
    pub fn from_rows(probs: Vec<f64>, kappa: usize) -> Self {
        assert!(kappa > 0 && probs.len().is_multiple_of(kappa));
        PriorTable { probs, kappa }
    }

    pub fn node_count(&self) -> usize {
        self.probs.len() / self.kappa
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn prob(&self, node: u32, cat: usize) -> f64 {
        self.probs[node as usize * self.kappa + cat]
    }

    pub fn row(&self, node: u32) -> &[f64] {
        &self.probs[node as usize * self.kappa..(node as usize + 1) * self.kappa]
    }

    /// Highest-probability category, lowest index on ties.
    pub fn argmax(&self, node: u32) -> usize {
        let row = self.row(node);
        let mut best = 0;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn write(&self, graph: &AttributedGraph, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for n in 0..self.node_count() as u32 {
            for c in 0..self.kappa {
                out.push_str(graph.external_id(n));
                out.push('\t');
                out.push_str(graph.categories().name(c));
                out.push('\t');
                out.push_str(&self.prob(n, c).to_string());
                out.push('\n');
            }
        }
        write_atomic(path, &out)
    }
}

fn softmax_into(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

struct Problem<'a> {
    graph: &'a AttributedGraph,
    observed: Vec<u32>,
    kappa: usize,
    l2: f64,
}

impl Problem<'_> {
    /// Mean NLL over observed nodes + l2/2 * ||W||^2 (bias excluded), and its
    /// gradient in the same (weights, bias) layout as [`LrModel`].
    fn objective_and_gradient(&self, weights: &[f64], bias: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.kappa;
        let m = self.observed.len() as f64;
        let mut grad_w = vec![0.0; weights.len()];
        let mut grad_b = vec![0.0; k];
        let mut nll = 0.0;
        let mut p = vec![0.0; k];
        for &node in &self.observed {
            let feats = self.graph.features(node);
            p.copy_from_slice(bias);
            for &(f, x) in feats {
                let row = &weights[f as usize * k..(f as usize + 1) * k];
                for (pi, w) in p.iter_mut().zip(row) {
                    *pi += w * x;
                }
            }
            softmax_into(&mut p);
            let y = self.graph.label(node);
            nll -= p[y].max(1e-300).ln();
            for c in 0..k {
                let g = (p[c] - if c == y { 1.0 } else { 0.0 }) / m;
                grad_b[c] += g;
                for &(f, x) in feats {
                    grad_w[f as usize * k + c] += g * x;
                }
            }
        }
        let mut obj = nll / m;
        for (gw, &w) in grad_w.iter_mut().zip(weights) {
            *gw += self.l2 * w;
            obj += 0.5 * self.l2 * w * w;
        }
        (obj, grad_w, grad_b)
    }
}

/// Objective values per accepted epoch, for convergence inspection in tests.
pub(crate) fn train_lr_traced(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    config: &LrConfig,
) -> Result<(LrModel, Vec<f64>), PriorError> {
    let kappa = graph.categories().kappa();
    let observed: Vec<u32> = (0..graph.node_count() as u32)
        .filter(|&n| split.is_observed(n))
        .collect();
    if observed.is_empty() {
        return Err(PriorError::NoObserved);
    }
    let mut counts = vec![0usize; kappa];
    for &n in &observed {
        counts[graph.label(n)] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(PriorError::EmptyCategory(
            graph.categories().name(c).to_string(),
        ));
    }

    let problem = Problem {
        graph,
        observed,
        kappa,
        l2: config.l2_weight,
    };
    let mut weights = vec![0.0; graph.feature_count() * kappa];
    let mut bias = vec![0.0; kappa];
    let (mut obj, mut grad_w, mut grad_b) = problem.objective_and_gradient(&weights, &bias);
    let mut trace = vec![obj];

    // The weight and bias blocks take separate backtracking steps: their
    // curvatures differ by the regularizer strength, and a joint step under a
    // huge l2 would freeze the (unregularized) bias at the origin.
    for epoch in 0..config.max_epochs {
        if !obj.is_finite() {
            return Err(PriorError::NonFinite(epoch));
        }
        let epoch_start = obj;
        let mut moved = false;

        let w_norm2: f64 = grad_w.iter().map(|g| g * g).sum();
        if w_norm2 > 0.0 {
            let mut step = config.learning_rate;
            while step > 1e-12 {
                let cand_w: Vec<f64> = weights
                    .iter()
                    .zip(&grad_w)
                    .map(|(w, g)| w - step * g)
                    .collect();
                let (cand_obj, cand_gw, cand_gb) = problem.objective_and_gradient(&cand_w, &bias);
                if cand_obj <= obj - 1e-4 * step * w_norm2 {
                    weights = cand_w;
                    obj = cand_obj;
                    grad_w = cand_gw;
                    grad_b = cand_gb;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
        }

        let b_norm2: f64 = grad_b.iter().map(|g| g * g).sum();
        if b_norm2 > 0.0 {
            let mut step = config.learning_rate;
            while step > 1e-12 {
                let cand_b: Vec<f64> = bias
                    .iter()
                    .zip(&grad_b)
                    .map(|(b, g)| b - step * g)
                    .collect();
                let (cand_obj, cand_gw, cand_gb) =
                    problem.objective_and_gradient(&weights, &cand_b);
                if cand_obj <= obj - 1e-4 * step * b_norm2 {
                    bias = cand_b;
                    obj = cand_obj;
                    grad_w = cand_gw;
                    grad_b = cand_gb;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
        }

        if !moved {
            break; // no descent step exists at representable step sizes
        }
        trace.push(obj);
        if epoch_start - obj < config.tolerance {
            break;
        }
    }

    Ok((
        LrModel {
            weights,
            bias,
            feature_count: graph.feature_count(),
            kappa,
        },
        trace,
    ))
}

pub fn train_lr(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    config: &LrConfig,
) -> Result<LrModel, PriorError> {
    train_lr_traced(graph, split, config).map(|(model, _)| model)
}

/// Softmax probabilities for every node in the graph.
pub fn predict_priors(model: &LrModel, graph: &AttributedGraph) -> PriorTable {
    let k = model.kappa;
    let n = graph.node_count();
    let mut probs = vec![0.0; n * k];
    for node in 0..n as u32 {
        let row = &mut probs[node as usize * k..(node as usize + 1) * k];
        model.logits(graph.features(node), row);
        softmax_into(row);
        // Softmax sums to 1 only up to rounding; downstream file validation
        // demands exact-to-1e-9 rows, so renormalize.
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    PriorTable { probs, kappa: k }
}

/// Parses a prior file: `node<TAB>category<TAB>probability`, every node fully
/// covered, each node's probabilities summing to 1 within 1e-6.
pub fn load_priors_from_text(text: &str, graph: &AttributedGraph) -> Result<PriorTable, DataError> {
    let kappa = graph.categories().kappa();
    let n = graph.node_count();
    let mut probs = vec![f64::NAN; n * kappa];
    let mut seen: HashMap<(u32, usize), usize> = HashMap::new();
    for (line, raw) in super::data::text_data_lines(text) {
        let fields: Vec<&str> = raw.split('\t').map(|f| f.trim()).collect();
        if fields.len() != 3 {
            return Err(DataError::Malformed {
                file: FileKind::Priors,
                line,
                msg: "expected `node<TAB>category<TAB>probability`".into(),
            });
        }
        let node = graph
            .node_index(fields[0])
            .ok_or_else(|| DataError::UnknownNode {
                file: FileKind::Priors,
                line,
                id: fields[0].to_string(),
            })?;
        let cat = graph
            .categories()
            .index_of(fields[1])
            .ok_or_else(|| DataError::Malformed {
                file: FileKind::Priors,
                line,
                msg: format!("category `{}` outside the label domain", fields[1]),
            })?;
        let p: f64 = fields[2].parse().map_err(|_| DataError::Malformed {
            file: FileKind::Priors,
            line,
            msg: format!("probability `{}` is not a number", fields[2]),
        })?;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(DataError::Malformed {
                file: FileKind::Priors,
                line,
                msg: "probability must lie in [0, 1]".into(),
            });
        }
        if seen.insert((node, cat), line).is_some() {
            return Err(DataError::DuplicateEntry {
                file: FileKind::Priors,
                line,
                id: format!("{}\t{}", fields[0], fields[1]),
            });
        }
        probs[node as usize * kappa + cat] = p;
    }
    for node in 0..n {
        let row = &probs[node * kappa..(node + 1) * kappa];
        if row.iter().any(|p| p.is_nan()) {
            return Err(DataError::Invalid {
                file: FileKind::Priors,
                msg: format!(
                    "node `{}` is missing category rows",
                    graph.external_id(node as u32)
                ),
            });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(DataError::Invalid {
                file: FileKind::Priors,
                msg: format!(
                    "probabilities for node `{}` sum to {sum}, not 1",
                    graph.external_id(node as u32)
                ),
            });
        }
    }
    Ok(PriorTable { probs, kappa })
}

pub fn load_priors(path: &Path, graph: &AttributedGraph) -> Result<PriorTable, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    load_priors_from_text(&text, graph)
}
