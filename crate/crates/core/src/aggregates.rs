//! Aggregate network properties over a fully labeled graph, and their
//! estimation from inferred labels.
//!
//! The five queries count structural facts about how categories sit on the
//! graph. Point estimates evaluate a query on one discretized labeling (the
//! MAP state or per-variable means); expectation estimates average the query
//! over discretized posterior samples, which is the honest way to estimate a
//! nonlinear count from an uncertain labeling.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::data::{write_atomic, AttributedGraph, DataError, ObservationSplit};
use super::sampler::SampleSet;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("sample set has no rows to average over")]
    EmptySamples,
    #[error("got {got} values for {want} random variables")]
    ValueLength { got: usize, want: usize },
    #[error("unobserved node {id} has no random variables in the given columns")]
    MissingNode { id: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// The five aggregate queries, as they appear in report columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    /// Edges whose endpoints carry the same category.
    Q1,
    /// Edges whose endpoints carry different categories.
    Q2,
    /// Nodes whose neighborhoods contain at least half of all categories as
    /// foreign labels: 2 * |distinct neighbor categories != own| >= kappa.
    Q3,
    /// Nodes where a strict majority of neighbors carries a different
    /// category; isolated nodes are excluded.
    Q4,
    /// Nodes where a strict majority of neighbors carries the same category;
    /// isolated nodes are excluded.
    Q5,
}

impl Query {
    pub const ALL: [Query; 5] = [Query::Q1, Query::Q2, Query::Q3, Query::Q4, Query::Q5];

    pub fn name(&self) -> &'static str {
        match self {
            Query::Q1 => "Q1",
            Query::Q2 => "Q2",
            Query::Q3 => "Q3",
            Query::Q4 => "Q4",
            Query::Q5 => "Q5",
        }
    }
}

/// One category per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryAssignment {
    cats: Vec<usize>,
}

impl CategoryAssignment {
    pub fn from_cats(cats: Vec<usize>) -> Self {
        CategoryAssignment { cats }
    }

    /// The graph's own labels, i.e. the ground truth.
    pub fn from_labels(graph: &AttributedGraph) -> Self {
        CategoryAssignment {
            cats: (0..graph.node_count() as u32)
                .map(|n| graph.label(n))
                .collect(),
        }
    }

    pub fn cat(&self, node: u32) -> usize {
        self.cats[node as usize]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.cats
    }
}

pub fn query(graph: &AttributedGraph, assignment: &CategoryAssignment, q: Query) -> u64 {
    match q {
        Query::Q1 => graph
            .edges()
            .iter()
            .filter(|&&(u, v)| assignment.cat(u) == assignment.cat(v))
            .count() as u64,
        Query::Q2 => graph.edge_count() as u64 - query(graph, assignment, Query::Q1),
        Query::Q3 => {
            let kappa = graph.categories().kappa();
            let mut count = 0u64;
            let mut seen = vec![false; kappa];
            for node in 0..graph.node_count() as u32 {
                let own = assignment.cat(node);
                seen.iter_mut().for_each(|s| *s = false);
                let mut distinct = 0usize;
                for &nb in graph.neighbors(node) {
                    let c = assignment.cat(nb);
                    if c != own && !seen[c] {
                        seen[c] = true;
                        distinct += 1;
                    }
                }
                if 2 * distinct >= kappa {
                    count += 1;
                }
            }
            count
        }
        Query::Q4 | Query::Q5 => {
            let mut count = 0u64;
            for node in 0..graph.node_count() as u32 {
                let degree = graph.degree(node);
                if degree == 0 {
                    continue;
                }
                let own = assignment.cat(node);
                let same = graph
                    .neighbors(node)
                    .iter()
                    .filter(|&&nb| assignment.cat(nb) == own)
                    .count();
                let hit = match q {
                    Query::Q4 => 2 * (degree - same) > degree,
                    _ => 2 * same > degree,
                };
                if hit {
                    count += 1;
                }
            }
            count
        }
    }
}

pub fn all_queries(graph: &AttributedGraph, assignment: &CategoryAssignment) -> [u64; 5] {
    let mut out = [0u64; 5];
    for (slot, q) in out.iter_mut().zip(Query::ALL) {
        *slot = query(graph, assignment, q);
    }
    out
}

/// Rounds soft values to one category per node: observed nodes keep their
/// label, unobserved nodes take the highest-valued category among their
/// columns, lowest category index on ties.
pub fn discretize(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    rvs: &[(u32, usize)],
    values: &[f64],
) -> Result<CategoryAssignment, AggregateError> {
    if rvs.len() != values.len() {
        return Err(AggregateError::ValueLength {
            got: values.len(),
            want: rvs.len(),
        });
    }
    let n = graph.node_count();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    for (&(node, cat), &v) in rvs.iter().zip(values) {
        let slot = &mut best[node as usize];
        let replace = match *slot {
            None => true,
            Some((bv, bc)) => v > bv || (v == bv && cat < bc),
        };
        if replace {
            *slot = Some((v, cat));
        }
    }
    let mut cats = Vec::with_capacity(n);
    for node in 0..n as u32 {
        if split.is_observed(node) {
            cats.push(graph.label(node));
        } else {
            match best[node as usize] {
                Some((_, cat)) => cats.push(cat),
                None => {
                    return Err(AggregateError::MissingNode {
                        id: graph.external_id(node).to_string(),
                    })
                }
            }
        }
    }
    Ok(CategoryAssignment::from_cats(cats))
}

/// Mean of each query over the discretized sample rows.
pub fn expected_queries(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    samples: &SampleSet,
) -> Result<[f64; 5], AggregateError> {
    if samples.row_count() == 0 {
        return Err(AggregateError::EmptySamples);
    }
    let mut acc = [0.0f64; 5];
    for r in 0..samples.row_count() {
        let assignment = discretize(graph, split, samples.rvs(), samples.row(r))?;
        for (a, q) in acc.iter_mut().zip(all_queries(graph, &assignment)) {
            *a += q as f64;
        }
    }
    for a in &mut acc {
        *a /= samples.row_count() as f64;
    }
    Ok(acc)
}

/// Fraction of unobserved nodes whose assigned category matches the graph
/// label; `None` when nothing is unobserved (the ratio is undefined).
pub fn point_accuracy(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    assignment: &CategoryAssignment,
) -> Option<f64> {
    let unobserved = split.unobserved_nodes();
    if unobserved.is_empty() {
        return None;
    }
    let correct = unobserved
        .iter()
        .filter(|&&n| assignment.cat(n) == graph.label(n))
        .count();
    Some(correct as f64 / unobserved.len() as f64)
}

/// Mean per-row accuracy of the discretized samples; `None` when nothing is
/// unobserved.
pub fn sample_accuracy(
    graph: &AttributedGraph,
    split: &ObservationSplit,
    samples: &SampleSet,
) -> Result<Option<f64>, AggregateError> {
    if samples.row_count() == 0 {
        return Err(AggregateError::EmptySamples);
    }
    if split.unobserved_nodes().is_empty() {
        return Ok(None);
    }
    let mut acc = 0.0;
    for r in 0..samples.row_count() {
        let assignment = discretize(graph, split, samples.rvs(), samples.row(r))?;
        acc += point_accuracy(graph, split, &assignment).expect("unobserved nodes exist");
    }
    Ok(Some(acc / samples.row_count() as f64))
}

/// One evaluated method: five estimates scored against the true counts.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub estimates: [f64; 5],
    /// Relative error per query, or absolute error where flagged.
    pub deltas: [f64; 5],
    /// True count was zero, so the matching delta is an absolute error.
    pub absolute: [bool; 5],
    pub mean_delta: f64,
    /// `None` when nothing was unobserved, rendered as a flagged cell.
    pub accuracy: Option<f64>,
}

/// Scores estimates against true counts: relative error |p - t| / t, falling
/// back to the absolute error (and flagging it) when the true count is zero.
pub fn score_method(
    method: &str,
    estimates: [f64; 5],
    truth: [u64; 5],
    accuracy: Option<f64>,
) -> MethodReport {
    let mut deltas = [0.0f64; 5];
    let mut absolute = [false; 5];
    for i in 0..5 {
        let t = truth[i] as f64;
        let err = (estimates[i] - t).abs();
        if truth[i] == 0 {
            deltas[i] = err;
            absolute[i] = true;
        } else {
            deltas[i] = err / t;
        }
    }
    let mean_delta = deltas.iter().sum::<f64>() / 5.0;
    MethodReport {
        method: method.to_string(),
        estimates,
        deltas,
        absolute,
        mean_delta,
        accuracy,
    }
}

/// Renders the evaluation table: one row per method, a delta column per
/// query, the mean delta, and accuracy. Absolute-error cells carry a `*`.
pub fn report_to_string(reports: &[MethodReport]) -> String {
    let mut out = String::from(
        "method\tQ1-delta\tQ2-delta\tQ3-delta\tQ4-delta\tQ5-delta\tmean-delta\taccuracy\n",
    );
    for r in reports {
        let _ = write!(out, "{}", r.method);
        for i in 0..5 {
            let star = if r.absolute[i] { "*" } else { "" };
            let _ = write!(out, "\t{:.6}{star}", r.deltas[i]);
        }
        let _ = write!(out, "\t{:.6}", r.mean_delta);
        match r.accuracy {
            Some(a) => {
                let _ = writeln!(out, "\t{a:.6}");
            }
            None => out.push_str("\tn/a*\n"),
        }
    }
    out
}

pub fn write_report(reports: &[MethodReport], path: &Path) -> Result<(), AggregateError> {
    write_atomic(path, &report_to_string(reports))?;
    Ok(())
}
