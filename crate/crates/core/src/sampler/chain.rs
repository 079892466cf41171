//! Blocked Metropolis-within-Gibbs over a ground rule set.
//!
//! Each sweep visits a fixed list of proposal groups. A group is one block of
//! tightly associated variables, widened so that any hard constraint it
//! touches is wholly inside it. Proposing a group means drawing fresh values
//! for its free variables with [`block_sample`], completing one designated
//! coordinate per hard constraint so the equality holds exactly, and accepting
//! with the Metropolis ratio of the weighted hinge distances incident to the
//! group - potentials elsewhere cancel, so the restricted ratio equals the
//! full-model one, term for term.
//!
//! The proposal draws values independently of the current state, so the plain
//! distance ratio is the default acceptance rule; the optional Hastings
//! correction additionally scores the draw densities of both directions and
//! makes the kernel exactly reversible when region-restricted draws are in
//! play.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::super::data::{text_data_lines, write_atomic, AttributedGraph, DataError, FileKind};
use super::super::psl::{map_inference, GroundRuleSet, MapConfig};
use super::blocks::BlockPartition;
use super::bounds::AssociationBounds;
use super::proposal::{block_sample, ordered_log_density};
use super::stats::{effective_sample_size, mean_and_variance};
use super::union_find::UnionFind;
use super::SamplerError;

/// Tolerance when deciding whether a completed constraint coordinate landed
/// inside [0, 1]; anything further out rejects the proposal.
const COMPLETION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Total sweeps, including burn-in.
    pub iterations: usize,
    /// Sweeps discarded from the front of the chain.
    pub burn_in: usize,
    /// Only potentials heavier than this participate in association bounds;
    /// `None` picks twice the median soft weight of the ground set.
    pub weight_threshold: Option<f64>,
    /// Merge a pair when its sum or difference interval is at most this wide.
    pub range_threshold: f64,
    /// Probability of drawing inside the implied interval rather than [0, 1].
    pub region_prob: f64,
    /// Score forward and reverse draw densities into the acceptance ratio.
    pub hastings_correction: bool,
    /// Independent chains; concatenated in order in the returned rows.
    pub chains: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 1100,
            burn_in: 100,
            weight_threshold: None,
            range_threshold: 0.1,
            region_prob: 0.9,
            hastings_correction: false,
            chains: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<(), SamplerError> {
        if self.iterations == 0 {
            return Err(SamplerError::BadConfig(
                "iterations must be positive".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::BadConfig(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if !(0.0..=1.0).contains(&self.region_prob) {
            return Err(SamplerError::BadConfig(format!(
                "region_prob {} outside [0, 1]",
                self.region_prob
            )));
        }
        // Negated so NaN fails validation along with negative values.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.range_threshold >= 0.0) {
            return Err(SamplerError::BadConfig(format!(
                "range_threshold {} must be nonnegative",
                self.range_threshold
            )));
        }
        if let Some(t) = self.weight_threshold {
            if t.is_nan() {
                return Err(SamplerError::BadConfig("weight_threshold is NaN".into()));
            }
        }
        if self.chains == 0 {
            return Err(SamplerError::BadConfig("chains must be positive".into()));
        }
        Ok(())
    }
}

/// Twice the median ground potential weight: heavy enough to skip run-of-the-
/// mill rules, low enough to catch the outliers that actually pin pairs.
pub fn default_weight_threshold(rules: &GroundRuleSet) -> f64 {
    let mut ws: Vec<f64> = rules.potentials.iter().map(|p| p.weight).collect();
    if ws.is_empty() {
        return f64::INFINITY;
    }
    ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = ws.len() / 2;
    let median = if ws.len() % 2 == 1 {
        ws[mid]
    } else {
        0.5 * (ws[mid - 1] + ws[mid])
    };
    2.0 * median
}

#[derive(Debug, Clone, Default)]
pub struct ChainDiagnostics {
    /// Accepted proposals per group, divided by sweeps.
    pub acceptance: Vec<f64>,
    pub empty_range_fallbacks: u64,
    pub completion_rejections: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub burn_in: usize,
    /// The threshold actually used, after resolving the default.
    pub weight_threshold: f64,
    pub group_sizes: Vec<usize>,
    pub chains: Vec<ChainDiagnostics>,
    pub rv_mean: Vec<f64>,
    pub rv_variance: Vec<f64>,
    /// Per-variable effective sample size, summed over chains.
    pub rv_ess: Vec<f64>,
}

/// Retained joint samples, row-major, with run diagnostics.
#[derive(Debug, Clone)]
pub struct SampleSet {
    rvs: Vec<(u32, usize)>,
    rows: usize,
    data: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl SampleSet {
    pub(crate) fn from_parts(rvs: Vec<(u32, usize)>, rows: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * rvs.len());
        SampleSet {
            rvs,
            rows,
            data,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn rv_count(&self) -> usize {
        self.rvs.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    /// `(node, category)` meaning of each column.
    pub fn rvs(&self) -> &[(u32, usize)] {
        &self.rvs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.rvs.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Column-wise mean over all rows; empty when there are no rows.
    pub fn column_means(&self) -> Vec<f64> {
        let w = self.rvs.len();
        if self.rows == 0 || w == 0 {
            return vec![0.0; w];
        }
        let mut means = vec![0.0; w];
        for r in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(r)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= self.rows as f64;
        }
        means
    }
}

/// One proposal group: a bound-derived block widened to swallow the hard
/// constraints it touches.
struct Group {
    /// Free variables, drawn by `block_sample`.
    free: Vec<u32>,
    /// All members, for save/restore.
    members: Vec<u32>,
    /// Constraint ids fully contained in the group, with the member chosen to
    /// absorb the equality (the constraint's largest variable id).
    completions: Vec<(u32, u32)>,
    /// Potential ids touching any member, ascending.
    incident: Vec<u32>,
}

fn build_groups(rules: &GroundRuleSet, partition: &BlockPartition) -> Vec<Group> {
    let n = rules.rv_count();
    let mut uf = UnionFind::new(n);
    for block in &partition.blocks {
        for w in block.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    for c in &rules.constraints {
        for w in c.terms.windows(2) {
            uf.union(w[0].0, w[1].0);
        }
    }
    uf.sets()
        .into_iter()
        .map(|members| {
            let mut cids: Vec<u32> = members
                .iter()
                .filter_map(|&rv| rules.constraint_of(rv))
                .collect();
            cids.sort_unstable();
            cids.dedup();
            let completions: Vec<(u32, u32)> = cids
                .iter()
                .map(|&cid| {
                    let comp = rules.constraints[cid as usize]
                        .terms
                        .iter()
                        .map(|&(rv, _)| rv)
                        .max()
                        .expect("constraints are nonempty");
                    (cid, comp)
                })
                .collect();
            let free: Vec<u32> = members
                .iter()
                .copied()
                .filter(|rv| !completions.iter().any(|&(_, c)| c == *rv))
                .collect();
            let mut incident: Vec<u32> = members
                .iter()
                .flat_map(|&rv| rules.incident_potentials(rv).iter().copied())
                .collect();
            incident.sort_unstable();
            incident.dedup();
            Group {
                free,
                members,
                completions,
                incident,
            }
        })
        .collect()
}

/// Sum over `ids`, in the given order, of `weight * (distance(at) -
/// distance(to))`. Summing the per-potential differences keeps the result
/// identical whether `ids` is every potential or only those actually touched:
/// an untouched potential contributes an exact zero.
pub fn weighted_distance_delta(rules: &GroundRuleSet, ids: &[u32], at: &[f64], to: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &pid in ids {
        let p = &rules.potentials[pid as usize];
        acc += p.weight * (p.distance(at) - p.distance(to));
    }
    acc
}

struct ChainRun {
    data: Vec<f64>,
    diagnostics: ChainDiagnostics,
}

fn run_chain(
    rules: &GroundRuleSet,
    groups: &[Group],
    bounds: &AssociationBounds,
    config: &SamplerConfig,
    init: &[f64],
    stream: u64,
) -> ChainRun {
    let n = rules.rv_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut y = init.to_vec();
    let retained = config.iterations - config.burn_in;
    let mut data = Vec::with_capacity(retained * n);
    let mut accepted = vec![0u64; groups.len()];
    let mut fallbacks = 0u64;
    let mut completion_rejections = 0u64;
    let mut dist_before: Vec<f64> = Vec::new();
    let mut saved: Vec<f64> = Vec::new();
    let mut reverse_order: Vec<(u32, f64)> = Vec::new();

    for it in 0..config.iterations {
        'groups: for (gi, g) in groups.iter().enumerate() {
            let draw = block_sample(&g.free, bounds, config.region_prob, &mut rng);
            fallbacks += draw.empty_range_fallbacks;

            dist_before.clear();
            for &pid in &g.incident {
                dist_before.push(rules.potentials[pid as usize].distance(&y));
            }
            saved.clear();
            for &rv in &g.members {
                saved.push(y[rv as usize]);
            }
            if config.hastings_correction {
                reverse_order.clear();
                for &(rv, _) in &draw.values {
                    reverse_order.push((rv, y[rv as usize]));
                }
            }

            for &(rv, v) in &draw.values {
                y[rv as usize] = v;
            }
            for &(cid, comp) in &g.completions {
                let c = &rules.constraints[cid as usize];
                let mut acc = c.rhs;
                let mut comp_coef = 1.0;
                for &(rv, coef) in &c.terms {
                    if rv == comp {
                        comp_coef = coef;
                    } else {
                        acc -= coef * y[rv as usize];
                    }
                }
                let v = acc / comp_coef;
                if !(-COMPLETION_TOL..=1.0 + COMPLETION_TOL).contains(&v) {
                    for (&rv, &old) in g.members.iter().zip(&saved) {
                        y[rv as usize] = old;
                    }
                    completion_rejections += 1;
                    continue 'groups;
                }
                y[comp as usize] = v.clamp(0.0, 1.0);
            }

            let mut log_ratio = 0.0;
            for (k, &pid) in g.incident.iter().enumerate() {
                let p = &rules.potentials[pid as usize];
                log_ratio += p.weight * (dist_before[k] - p.distance(&y));
            }
            if config.hastings_correction {
                log_ratio += ordered_log_density(&reverse_order, bounds, config.region_prob)
                    - ordered_log_density(&draw.values, bounds, config.region_prob);
            }
            let u: f64 = rng.gen();
            if u < log_ratio.exp() {
                accepted[gi] += 1;
            } else {
                for (&rv, &old) in g.members.iter().zip(&saved) {
                    y[rv as usize] = old;
                }
            }
        }
        if it >= config.burn_in {
            data.extend_from_slice(&y);
        }
    }

    let sweeps = config.iterations as f64;
    ChainRun {
        data,
        diagnostics: ChainDiagnostics {
            acceptance: accepted.iter().map(|&a| a as f64 / sweeps).collect(),
            empty_range_fallbacks: fallbacks,
            completion_rejections,
        },
    }
}

fn run_with_partition(
    rules: &GroundRuleSet,
    config: &SamplerConfig,
    init: Option<&[f64]>,
    weight_threshold: f64,
) -> Result<SampleSet, SamplerError> {
    config.validate()?;
    let n = rules.rv_count();
    let init_y: Vec<f64> = match init {
        Some(v) => {
            if v.len() != n {
                return Err(SamplerError::InitLength {
                    got: v.len(),
                    want: n,
                });
            }
            rules.check_feasible(v)?;
            v.to_vec()
        }
        None => map_inference(rules, &MapConfig::default())?.assignment,
    };

    let bounds = AssociationBounds::from_rules(rules, weight_threshold);
    let partition = BlockPartition::from_bounds(n, &bounds, config.range_threshold);
    let groups = build_groups(rules, &partition);

    let retained = config.iterations - config.burn_in;
    let mut data = Vec::with_capacity(config.chains * retained * n);
    let mut chain_diags = Vec::with_capacity(config.chains);
    let mut rv_ess = vec![0.0; n];
    for chain in 0..config.chains {
        let run = run_chain(rules, &groups, &bounds, config, &init_y, chain as u64);
        for (rv, ess) in rv_ess.iter_mut().enumerate() {
            let series: Vec<f64> = (0..retained).map(|r| run.data[r * n + rv]).collect();
            *ess += effective_sample_size(&series);
        }
        data.extend_from_slice(&run.data);
        chain_diags.push(run.diagnostics);
    }

    let total_rows = config.chains * retained;
    let mut rv_mean = vec![0.0; n];
    let mut rv_variance = vec![0.0; n];
    for rv in 0..n {
        let series: Vec<f64> = (0..total_rows).map(|r| data[r * n + rv]).collect();
        let (m, v) = mean_and_variance(&series);
        rv_mean[rv] = m;
        rv_variance[rv] = v;
    }

    let mut set = SampleSet::from_parts(rules.rvs().to_vec(), total_rows, data);
    set.diagnostics = Diagnostics {
        iterations: config.iterations,
        burn_in: config.burn_in,
        weight_threshold,
        group_sizes: groups.iter().map(|g| g.members.len()).collect(),
        chains: chain_diags,
        rv_mean,
        rv_variance,
        rv_ess,
    };
    Ok(set)
}

/// Runs the blocked sampler: association bounds above the weight threshold
/// carve the variables into blocks, hard constraints widen them into proposal
/// groups, and every sweep proposes each group once. Starts from `init` or,
/// when absent, from the MAP state.
pub fn abgibbs_run(
    rules: &GroundRuleSet,
    config: &SamplerConfig,
    init: Option<&[f64]>,
) -> Result<SampleSet, SamplerError> {
    let threshold = config
        .weight_threshold
        .unwrap_or_else(|| default_weight_threshold(rules));
    run_with_partition(rules, config, init, threshold)
}

/// The unblocked baseline: identical kernel with association bounds disabled,
/// so every variable is proposed alone. Groups induced by hard constraints
/// remain, since single-variable moves could never stay feasible.
pub fn naive_mwg_run(
    rules: &GroundRuleSet,
    config: &SamplerConfig,
    init: Option<&[f64]>,
) -> Result<SampleSet, SamplerError> {
    run_with_partition(rules, config, init, f64::INFINITY)
}

/// Keeps `k` rows chosen uniformly without replacement, preserving chain
/// order. Diagnostics are carried over unchanged; they describe the run that
/// produced the rows.
pub fn thin<R: Rng>(set: &SampleSet, k: usize, rng: &mut R) -> Result<SampleSet, SamplerError> {
    if k > set.rows {
        return Err(SamplerError::ThinTooFew {
            requested: k,
            available: set.rows,
        });
    }
    let mut idx = rand::seq::index::sample(rng, set.rows, k).into_vec();
    idx.sort_unstable();
    let w = set.rvs.len();
    let mut data = Vec::with_capacity(k * w);
    for &i in &idx {
        data.extend_from_slice(set.row(i));
    }
    let mut out = SampleSet::from_parts(set.rvs.clone(), k, data);
    out.diagnostics = set.diagnostics.clone();
    Ok(out)
}

fn rv_name(graph: &AttributedGraph, node: u32, cat: usize) -> String {
    format!(
        "{}:{}",
        graph.external_id(node),
        graph.categories().name(cat)
    )
}

/// Renders the sample matrix: a header of `node:category` column names, then
/// one tab-separated row per retained sample, six fractional digits.
pub fn samples_to_string(set: &SampleSet, graph: &AttributedGraph) -> Result<String, SamplerError> {
    if set.rvs.is_empty() {
        return Err(SamplerError::NoRandomVariables);
    }
    let header: Vec<String> = set
        .rvs
        .iter()
        .map(|&(node, cat)| rv_name(graph, node, cat))
        .collect();
    let mut out = header.join("\t");
    out.push('\n');
    for r in 0..set.rows {
        let row: Vec<String> = set.row(r).iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_samples(
    set: &SampleSet,
    graph: &AttributedGraph,
    path: &Path,
) -> Result<(), SamplerError> {
    let text = samples_to_string(set, graph)?;
    write_atomic(path, &text)?;
    Ok(())
}

pub fn load_samples_from_text(
    text: &str,
    graph: &AttributedGraph,
) -> Result<SampleSet, SamplerError> {
    let file = FileKind::Samples;
    let mut lines = text_data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| DataError::Malformed {
        file,
        line: 1,
        msg: "missing header row of node:category names".into(),
    })?;
    let mut rvs = Vec::new();
    for name in header.split('\t') {
        let (node_part, cat_part) =
            name.trim()
                .rsplit_once(':')
                .ok_or_else(|| DataError::Malformed {
                    file,
                    line: hline,
                    msg: format!("column name {name:?} is not node:category"),
                })?;
        let node = graph
            .node_index(node_part)
            .ok_or_else(|| DataError::UnknownNode {
                file,
                line: hline,
                id: node_part.to_string(),
            })?;
        let cat = graph
            .categories()
            .index_of(cat_part)
            .ok_or_else(|| DataError::Malformed {
                file,
                line: hline,
                msg: format!("unknown category {cat_part:?}"),
            })?;
        rvs.push((node, cat));
    }
    let width = rvs.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (line, row) in lines {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != width {
            return Err(DataError::Malformed {
                file,
                line,
                msg: format!("expected {width} values, found {}", fields.len()),
            }
            .into());
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| DataError::Malformed {
                file,
                line,
                msg: format!("bad value {f:?}"),
            })?;
            if !v.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&v) {
                return Err(DataError::Malformed {
                    file,
                    line,
                    msg: format!("value {v} outside [0, 1]"),
                }
                .into());
            }
            data.push(v.clamp(0.0, 1.0));
        }
        rows += 1;
    }
    Ok(SampleSet::from_parts(rvs, rows, data))
}

pub fn load_samples(path: &Path, graph: &AttributedGraph) -> Result<SampleSet, SamplerError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    load_samples_from_text(&text, graph)
}

/// Renders run diagnostics as `key = value` lines.
pub fn diagnostics_to_string(set: &SampleSet, graph: &AttributedGraph) -> String {
    let d = &set.diagnostics;
    let mut out = String::new();
    let _ = writeln!(out, "iterations = {}", d.iterations);
    let _ = writeln!(out, "burn_in = {}", d.burn_in);
    let _ = writeln!(out, "chains = {}", d.chains.len());
    let _ = writeln!(out, "weight_threshold = {}", d.weight_threshold);
    let _ = writeln!(out, "groups = {}", d.group_sizes.len());
    let largest = d.group_sizes.iter().copied().max().unwrap_or(0);
    let _ = writeln!(out, "largest_group = {largest}");
    for (ci, c) in d.chains.iter().enumerate() {
        let _ = writeln!(
            out,
            "chain.{ci}.empty_range_fallbacks = {}",
            c.empty_range_fallbacks
        );
        let _ = writeln!(
            out,
            "chain.{ci}.completion_rejections = {}",
            c.completion_rejections
        );
        for (gi, a) in c.acceptance.iter().enumerate() {
            let _ = writeln!(out, "chain.{ci}.group.{gi}.acceptance = {a:.6}");
        }
    }
    for (i, &(node, cat)) in set.rvs.iter().enumerate() {
        let name = rv_name(graph, node, cat);
        let _ = writeln!(out, "rv.{name}.mean = {:.6}", d.rv_mean[i]);
        let _ = writeln!(out, "rv.{name}.variance = {:.6}", d.rv_variance[i]);
        let _ = writeln!(out, "rv.{name}.ess = {:.6}", d.rv_ess[i]);
    }
    out
}

pub fn write_diagnostics(
    set: &SampleSet,
    graph: &AttributedGraph,
    path: &Path,
) -> Result<(), SamplerError> {
    write_atomic(path, &diagnostics_to_string(set, graph))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::super::data::{load_graph_from_text, load_split_from_text, ObservationSplit};
    use super::super::super::prior::PriorTable;
    use super::super::super::psl::{build_model, ground, ModelConfig, Potential};
    use super::*;

    fn ground_uniform(
        graph: &AttributedGraph,
        split: &ObservationSplit,
        kappa: usize,
    ) -> GroundRuleSet {
        let templates = build_model(kappa, &ModelConfig::default()).unwrap();
        let per = 1.0 / kappa as f64;
        let priors = PriorTable::from_rows(vec![per; graph.node_count() * kappa], kappa);
        ground(&templates, graph, split, &priors).unwrap()
    }

    /// Two variables pinned to sum one by opposed weight-50 hinges, plus a
    /// mild prior pulling variable 0 toward 0.8 and variable 1 toward 0.2.
    fn pinned_model() -> GroundRuleSet {
        let rvs = vec![(0, 0), (1, 0)];
        let pots = vec![
            Potential {
                weight: 50.0,
                exponent: 1,
                terms: vec![(0, 1.0), (1, 1.0)],
                constant: -1.0,
                template: None,
            },
            Potential {
                weight: 50.0,
                exponent: 1,
                terms: vec![(0, -1.0), (1, -1.0)],
                constant: 1.0,
                template: None,
            },
            Potential {
                weight: 1.0,
                exponent: 2,
                terms: vec![(0, -1.0)],
                constant: 0.8,
                template: None,
            },
            Potential {
                weight: 1.0,
                exponent: 2,
                terms: vec![(1, 1.0)],
                constant: -0.2,
                template: None,
            },
        ];
        GroundRuleSet::from_parts(rvs, 2, pots, vec![]).unwrap()
    }

    fn quick_config(iterations: usize, burn_in: usize) -> SamplerConfig {
        SamplerConfig {
            iterations,
            burn_in,
            weight_threshold: Some(10.0),
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn retained_rows_have_expected_shape_and_domain() {
        let rules = pinned_model();
        let set = abgibbs_run(&rules, &quick_config(60, 10), None).unwrap();
        assert_eq!(set.row_count(), 50);
        assert_eq!(set.rv_count(), 2);
        for r in 0..set.row_count() {
            for &v in set.row(r) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(set.diagnostics.group_sizes, vec![2]);
    }

    #[test]
    fn blocked_chain_tracks_the_pinned_ridge() {
        let rules = pinned_model();
        let set = abgibbs_run(&rules, &quick_config(2000, 200), None).unwrap();
        // The pair block must actually move and stay near the ridge a + b = 1.
        assert!(set.diagnostics.chains[0].acceptance[0] > 0.2);
        let means = set.column_means();
        assert!(
            (means[0] + means[1] - 1.0).abs() < 0.05,
            "means {means:?} drifted off the ridge"
        );
        // The prior pulls variable 0 above one half.
        assert!(means[0] > 0.55, "prior pull missing: {means:?}");
    }

    #[test]
    fn same_seed_reruns_bitwise_identical_and_seeds_differ() {
        let rules = pinned_model();
        let a = abgibbs_run(&rules, &quick_config(80, 20), None).unwrap();
        let b = abgibbs_run(&rules, &quick_config(80, 20), None).unwrap();
        assert_eq!(a.values(), b.values());
        let mut other = quick_config(80, 20);
        other.seed = 9;
        let c = abgibbs_run(&rules, &other, None).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn infinite_threshold_equals_the_naive_baseline_bitwise() {
        let rules = pinned_model();
        let mut config = quick_config(300, 50);
        config.weight_threshold = Some(f64::INFINITY);
        let blocked = abgibbs_run(&rules, &config, None).unwrap();
        let naive = naive_mwg_run(&rules, &config, None).unwrap();
        assert_eq!(blocked.values(), naive.values());
        assert_eq!(
            blocked.diagnostics.chains[0].acceptance,
            naive.diagnostics.chains[0].acceptance
        );
        assert_eq!(naive.diagnostics.group_sizes, vec![1, 1]);
    }

    #[test]
    fn simplex_constraints_hold_in_every_retained_row() {
        let graph = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\nw\tc2\n", None).unwrap();
        let split = load_split_from_text("u\nw\n", &graph).unwrap();
        let rules = ground_uniform(&graph, &split, 3);
        assert_eq!(rules.rv_count(), 3);
        let set = abgibbs_run(&rules, &quick_config(200, 20), None).unwrap();
        for r in 0..set.row_count() {
            rules.check_feasible(set.row(r)).unwrap();
            let sum: f64 = set.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        // One group: the node's three variables, two free plus one completion.
        assert_eq!(set.diagnostics.group_sizes, vec![3]);
    }

    #[test]
    fn incident_ratio_equals_full_ratio_bitwise() {
        // The pinned pair plus two unrelated variables with their own priors.
        let rvs = vec![(0, 0), (1, 0), (2, 0), (3, 0)];
        let mut pots = pinned_model().potentials;
        pots.push(Potential {
            weight: 3.0,
            exponent: 2,
            terms: vec![(2, -1.0)],
            constant: 0.4,
            template: None,
        });
        pots.push(Potential {
            weight: 2.5,
            exponent: 1,
            terms: vec![(3, 1.0)],
            constant: -0.3,
            template: None,
        });
        let rules = GroundRuleSet::from_parts(rvs, 2, pots, vec![]).unwrap();
        let cur = vec![0.31, 0.64, 0.52, 0.87];
        let mut prop = cur.clone();
        prop[0] = 0.72;
        prop[1] = 0.28;
        let all: Vec<u32> = (0..rules.potentials.len() as u32).collect();
        let mut incident: Vec<u32> = [0u32, 1]
            .iter()
            .flat_map(|&rv| rules.incident_potentials(rv).iter().copied())
            .collect();
        incident.sort_unstable();
        incident.dedup();
        assert!(incident.len() < all.len());
        let full = weighted_distance_delta(&rules, &all, &cur, &prop);
        let restricted = weighted_distance_delta(&rules, &incident, &cur, &prop);
        assert_eq!(full, restricted);
    }

    #[test]
    fn hastings_correction_alters_the_trajectory() {
        let rules = pinned_model();
        let mut plain = quick_config(500, 100);
        let mut corrected = plain.clone();
        corrected.hastings_correction = true;
        plain.region_prob = 0.8;
        corrected.region_prob = 0.8;
        let a = abgibbs_run(&rules, &plain, None).unwrap();
        let b = abgibbs_run(&rules, &corrected, None).unwrap();
        assert_ne!(a.values(), b.values());
        for r in 0..b.row_count() {
            for &v in b.row(r) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn bad_inits_and_configs_are_rejected() {
        let rules = pinned_model();
        let config = quick_config(50, 10);
        match abgibbs_run(&rules, &config, Some(&[0.5])) {
            Err(SamplerError::InitLength { got: 1, want: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        assert!(abgibbs_run(&rules, &config, Some(&[0.5, 1.5])).is_err());
        let mut bad = config.clone();
        bad.burn_in = 50;
        assert!(matches!(
            abgibbs_run(&rules, &bad, None),
            Err(SamplerError::BadConfig(_))
        ));
        let mut bad = config.clone();
        bad.region_prob = 1.2;
        assert!(abgibbs_run(&rules, &bad, None).is_err());
        let mut bad = config;
        bad.chains = 0;
        assert!(abgibbs_run(&rules, &bad, None).is_err());
    }

    #[test]
    fn multiple_chains_concatenate_and_differ() {
        let rules = pinned_model();
        let mut config = quick_config(60, 10);
        config.chains = 2;
        let set = abgibbs_run(&rules, &config, None).unwrap();
        assert_eq!(set.row_count(), 100);
        assert_eq!(set.diagnostics.chains.len(), 2);
        assert_ne!(set.row(0), set.row(50));
    }

    #[test]
    fn default_threshold_is_twice_the_median_weight() {
        let rules = pinned_model();
        // Weights 50, 50, 1, 1: median 25.5, doubled 51.
        assert!((default_weight_threshold(&rules) - 51.0).abs() < 1e-12);
    }

    #[test]
    fn thinning_keeps_order_and_validates_count() {
        let rules = pinned_model();
        let set = abgibbs_run(&rules, &quick_config(40, 10), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let thinned = thin(&set, 7, &mut rng).unwrap();
        assert_eq!(thinned.row_count(), 7);
        // Every thinned row appears in the original at an increasing position.
        let mut cursor = 0;
        for r in 0..7 {
            let target = thinned.row(r);
            let mut found = false;
            while cursor < set.row_count() {
                if set.row(cursor) == target {
                    found = true;
                    cursor += 1;
                    break;
                }
                cursor += 1;
            }
            assert!(found, "thinned row {r} out of order");
        }
        let all = thin(&set, set.row_count(), &mut rng).unwrap();
        assert_eq!(all.values(), set.values());
        assert!(matches!(
            thin(&set, 31, &mut rng),
            Err(SamplerError::ThinTooFew {
                requested: 31,
                available: 30
            })
        ));
        let none = thin(&set, 0, &mut rng).unwrap();
        assert_eq!(none.row_count(), 0);
    }

    #[test]
    fn sample_file_round_trips_at_six_digits() {
        let graph = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\nw\tc0\n", None).unwrap();
        let split = load_split_from_text("u\nw\n", &graph).unwrap();
        let rules = ground_uniform(&graph, &split, 2);
        let set = abgibbs_run(&rules, &quick_config(30, 10), None).unwrap();
        let text = samples_to_string(&set, &graph).unwrap();
        assert!(text.starts_with("v:c0\tv:c1\n"));
        let back = load_samples_from_text(&text, &graph).unwrap();
        assert_eq!(back.rvs(), set.rvs());
        assert_eq!(back.row_count(), set.row_count());
        for (a, b) in back.values().iter().zip(set.values()) {
            assert!((a - b).abs() <= 5e-7);
        }
    }

    #[test]
    fn sample_loader_rejects_malformed_input() {
        let graph = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\n", None).unwrap();
        assert!(load_samples_from_text("", &graph).is_err());
        assert!(load_samples_from_text("z:c0\n0.5\n", &graph).is_err());
        assert!(load_samples_from_text("v:c9\n0.5\n", &graph).is_err());
        assert!(load_samples_from_text("v:c0\tv:c1\n0.5\n", &graph).is_err());
        assert!(load_samples_from_text("v:c0\n1.5\n", &graph).is_err());
        assert!(load_samples_from_text("v:c0\nx\n", &graph).is_err());
    }

    #[test]
    fn diagnostics_text_names_every_variable() {
        let graph = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\n", None).unwrap();
        let split = load_split_from_text("u\n", &graph).unwrap();
        let rules = ground_uniform(&graph, &split, 2);
        let set = abgibbs_run(&rules, &quick_config(30, 10), None).unwrap();
        let text = diagnostics_to_string(&set, &graph);
        assert!(text.contains("iterations = 30"));
        assert!(text.contains("rv.v:c0.mean = "));
        assert!(text.contains("rv.v:c1.ess = "));
        assert!(text.contains("chain.0.group.0.acceptance = "));
    }
}
