//! The pipeline stages and the artifacts they exchange.
//!
//! Every stage reads the original dataset plus the artifacts of earlier
//! stages from the configured output directory, and writes its own artifact
//! there. Stages never pass state in memory, so any stage can be re-run in
//! isolation, and hand-written artifacts (for instance, externally produced
//! priors or samples) can be injected between stages.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aggremc_core::aggregates::{
    all_queries, discretize, expected_queries, point_accuracy, sample_accuracy, score_method,
    write_report, CategoryAssignment,
};
use aggremc_core::data::{load_graph, load_split, write_atomic, AttributedGraph, ObservationSplit};
use aggremc_core::prior::{load_priors, predict_priors, train_lr};
use aggremc_core::psl::{
    build_model, ground, load_ground_set, load_model_file, map_inference, GroundRuleSet,
    ModelConfig, RuleTemplate,
};
use aggremc_core::sampler::{
    abgibbs_run, load_samples, thin, write_diagnostics, write_samples, SampleSet,
};

use crate::config::{Mode, RunConfig};

pub const ID_MAP: &str = "id_map.tsv";
pub const PRIORS: &str = "priors.tsv";
pub const GROUND: &str = "ground.tsv";
pub const MAP_STATE: &str = "map.tsv";
pub const MAP_INFO: &str = "map_info.txt";
pub const SAMPLES: &str = "samples.tsv";
pub const DIAGNOSTICS: &str = "diagnostics.txt";
pub const QUERIES: &str = "queries.tsv";
pub const REPORT: &str = "report.tsv";
pub const TIMINGS: &str = "timings.tsv";

fn artifact(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// Resolves an artifact a stage depends on, or explains which stage to run.
fn require(cfg: &RunConfig, name: &str, producer: &str) -> Result<PathBuf> {
    let path = artifact(cfg, name);
    if !path.is_file() {
        bail!(
            "missing artifact {}; run the `{producer}` stage first",
            path.display()
        );
    }
    Ok(path)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(AttributedGraph, ObservationSplit)> {
    let graph = load_graph(&cfg.edges, &cfg.labels, cfg.features.as_deref())
        .context("loading the dataset")?;
    let split = load_split(&cfg.split, &graph).context("loading the observation split")?;
    Ok((graph, split))
}

fn templates_for(cfg: &RunConfig, graph: &AttributedGraph) -> Result<Vec<RuleTemplate>> {
    match &cfg.model {
        Some(path) => load_model_file(path, graph.categories())
            .with_context(|| format!("loading model file {}", path.display())),
        None => build_model(graph.categories().kappa(), &ModelConfig::default())
            .context("building the default model"),
    }
}

/// Trains the local predictor on the observed nodes and writes per-node
/// category priors, plus the node-id map for human inspection of artifacts.
pub fn stage_prior(cfg: &RunConfig) -> Result<()> {
    let (graph, split) = load_inputs(cfg)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    graph.write_id_map(&artifact(cfg, ID_MAP))?;
    let model = train_lr(&graph, &split, &cfg.lr).context("training the prior predictor")?;
    let priors = predict_priors(&model, &graph);
    let path = artifact(cfg, PRIORS);
    priors.write(&graph, &path)?;
    println!(
        "prior: wrote {} ({} nodes, {} categories, {} observed)",
        path.display(),
        graph.node_count(),
        graph.categories().kappa(),
        split.observed_count()
    );
    Ok(())
}

/// Instantiates the rule templates over the graph and writes the ground
/// potential/constraint set.
pub fn stage_ground(cfg: &RunConfig) -> Result<()> {
    let (graph, split) = load_inputs(cfg)?;
    let priors = load_priors(&require(cfg, PRIORS, "prior")?, &graph)?;
    let templates = templates_for(cfg, &graph)?;
    let rules = ground(&templates, &graph, &split, &priors)?;
    let path = artifact(cfg, GROUND);
    rules.write(&graph, &path)?;
    println!(
        "ground: wrote {} ({} random variables)",
        path.display(),
        rules.rv_count()
    );
    Ok(())
}

/// One random variable per line: `node:category<TAB>value`, with the value
/// printed in shortest round-trip form so reloading is exact.
fn write_map_file(
    rules: &GroundRuleSet,
    graph: &AttributedGraph,
    assignment: &[f64],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    for (&(node, cat), v) in rules.rvs().iter().zip(assignment) {
        out.push_str(&format!(
            "{}:{}\t{}\n",
            graph.external_id(node),
            graph.categories().name(cat),
            v
        ));
    }
    write_atomic(path, &out)?;
    Ok(())
}

/// Aligned `(node, category)` pairs and their soft values.
type MapState = (Vec<(u32, usize)>, Vec<f64>);

/// Parses a MAP-state file into aligned `(node, category)` pairs and values.
fn load_map_file(path: &Path, graph: &AttributedGraph) -> Result<MapState> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rvs = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| anyhow!("{} line {}: {what}", path.display(), lineno + 1);
        let (name, value) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected two columns"))?;
        let (node_part, cat_part) = name
            .rsplit_once(':')
            .ok_or_else(|| bad("expected node:category"))?;
        let node = graph
            .node_index(node_part)
            .ok_or_else(|| bad(&format!("unknown node {node_part:?}")))?;
        let cat = graph
            .categories()
            .index_of(cat_part)
            .ok_or_else(|| bad(&format!("unknown category {cat_part:?}")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| bad(&format!("bad value {value:?}")))?;
        if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(bad(&format!("value {v} outside [0, 1]")));
        }
        rvs.push((node, cat));
        values.push(v.clamp(0.0, 1.0));
    }
    Ok((rvs, values))
}

/// Finds the most probable joint assignment and persists it together with a
/// small info file (final energy, iteration count, convergence flag).
pub fn stage_map(cfg: &RunConfig) -> Result<()> {
    let (graph, _split) = load_inputs(cfg)?;
    let rules = load_ground_set(&require(cfg, GROUND, "ground")?, &graph)?;
    let result = map_inference(&rules, &cfg.map)?;
    let path = artifact(cfg, MAP_STATE);
    write_map_file(&rules, &graph, &result.assignment, &path)?;
    let info = format!(
        "energy\t{}\niterations\t{}\nconverged\t{}\n",
        result.energy, result.iterations, result.converged
    );
    write_atomic(&artifact(cfg, MAP_INFO), &info)?;
    println!(
        "map: wrote {} (energy {:.6}, {} iterations, converged: {})",
        path.display(),
        result.energy,
        result.iterations,
        result.converged
    );
    Ok(())
}

/// Rebuilds the sampler's initial state from the persisted MAP file, keyed by
/// `(node, category)` so it is robust to line reordering.
fn map_init_for(rules: &GroundRuleSet, path: &Path, graph: &AttributedGraph) -> Result<Vec<f64>> {
    let (rvs, values) = load_map_file(path, graph)?;
    let by_rv: std::collections::BTreeMap<(u32, usize), f64> =
        rvs.into_iter().zip(values).collect();
    rules
        .rvs()
        .iter()
        .map(|rv| {
            by_rv.get(rv).copied().ok_or_else(|| {
                anyhow!(
                    "{} is missing node {} category {}; re-run the `map` stage",
                    path.display(),
                    graph.external_id(rv.0),
                    graph.categories().name(rv.1)
                )
            })
        })
        .collect()
}

/// Runs the blocked sampler from the MAP state. In `samples` mode the
/// retained rows are thinned down to `sampler.thin_to`; other modes keep
/// every retained row so the sample means are as stable as possible.
pub fn stage_sample(cfg: &RunConfig) -> Result<()> {
    let (graph, split) = load_inputs(cfg)?;
    if split.unobserved_count() == 0 {
        bail!("every node is observed; there is nothing to sample");
    }
    let rules = load_ground_set(&require(cfg, GROUND, "ground")?, &graph)?;
    let init = map_init_for(&rules, &require(cfg, MAP_STATE, "map")?, &graph)?;
    let mut sampler_cfg = cfg.sampler.clone();
    sampler_cfg.seed = cfg.sampler_seed();
    let set = abgibbs_run(&rules, &sampler_cfg, Some(&init))?;
    let set: SampleSet = if cfg.mode == Mode::Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.thin_seed());
        thin(&set, cfg.thin_to, &mut rng)?
    } else {
        set
    };
    let path = artifact(cfg, SAMPLES);
    write_samples(&set, &graph, &path)?;
    write_diagnostics(&set, &graph, &artifact(cfg, DIAGNOSTICS))?;
    println!(
        "sample: wrote {} ({} rows, {} random variables)",
        path.display(),
        set.row_count(),
        set.rv_count()
    );
    Ok(())
}

/// The five aggregate queries, written as one estimate per line.
pub fn stage_query(cfg: &RunConfig) -> Result<()> {
    let (graph, split) = load_inputs(cfg)?;
    let estimates: [f64; 5] = if split.unobserved_count() == 0 {
        // Every label is visible, so the queries are exact counts and no
        // inference artifact is needed.
        let assignment = CategoryAssignment::from_labels(&graph);
        all_queries(&graph, &assignment).map(|c| c as f64)
    } else {
        match cfg.mode {
            Mode::Map => {
                let (rvs, values) = load_map_file(&require(cfg, MAP_STATE, "map")?, &graph)?;
                let assignment = discretize(&graph, &split, &rvs, &values)?;
                all_queries(&graph, &assignment).map(|c| c as f64)
            }
            Mode::Mean => {
                let set = load_samples(&require(cfg, SAMPLES, "sample")?, &graph)?;
                let means = set.column_means();
                let assignment = discretize(&graph, &split, set.rvs(), &means)?;
                all_queries(&graph, &assignment).map(|c| c as f64)
            }
            Mode::Samples => {
                let set = load_samples(&require(cfg, SAMPLES, "sample")?, &graph)?;
                expected_queries(&graph, &split, &set)?
            }
        }
    };
    let mut out = format!("method\t{}\n", cfg.mode.method_name());
    for (i, v) in estimates.iter().enumerate() {
        out.push_str(&format!("Q{}\t{v:.6}\n", i + 1));
    }
    let path = artifact(cfg, QUERIES);
    write_atomic(&path, &out)?;
    println!(
        "query: wrote {} ({})",
        path.display(),
        cfg.mode.method_name()
    );
    Ok(())
}

fn read_queries(path: &Path) -> Result<(String, [f64; 5])> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let method = lines
        .next()
        .and_then(|l| l.strip_prefix("method\t"))
        .ok_or_else(|| anyhow!("{}: first line must be `method<TAB>name`", path.display()))?
        .to_string();
    let mut estimates = [0.0f64; 5];
    for (i, slot) in estimates.iter_mut().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| anyhow!("{}: missing Q{} line", path.display(), i + 1))?;
        let value = line
            .strip_prefix(&format!("Q{}\t", i + 1))
            .ok_or_else(|| anyhow!("{}: expected Q{} line, got {line:?}", path.display(), i + 1))?;
        *slot = value
            .parse()
            .map_err(|_| anyhow!("{}: bad Q{} value {value:?}", path.display(), i + 1))?;
    }
    Ok((method, estimates))
}

/// Scores the persisted query estimates against the true labels and writes
/// the per-query relative errors plus held-out label accuracy.
pub fn stage_evaluate(cfg: &RunConfig) -> Result<()> {
    let (graph, split) = load_inputs(cfg)?;
    let (method, estimates) = read_queries(&require(cfg, QUERIES, "query")?)?;
    if method != cfg.mode.method_name() {
        bail!(
            "queries artifact holds {method} estimates but the current mode is {}; \
             re-run the `query` stage",
            cfg.mode.method_name()
        );
    }
    let truth = all_queries(&graph, &CategoryAssignment::from_labels(&graph));
    let accuracy = if split.unobserved_count() == 0 {
        // Nothing was hidden, so held-out accuracy is undefined.
        None
    } else {
        match cfg.mode {
            Mode::Map => {
                let (rvs, values) = load_map_file(&require(cfg, MAP_STATE, "map")?, &graph)?;
                point_accuracy(&graph, &split, &discretize(&graph, &split, &rvs, &values)?)
            }
            Mode::Mean => {
                let set = load_samples(&require(cfg, SAMPLES, "sample")?, &graph)?;
                let means = set.column_means();
                point_accuracy(
                    &graph,
                    &split,
                    &discretize(&graph, &split, set.rvs(), &means)?,
                )
            }
            Mode::Samples => {
                let set = load_samples(&require(cfg, SAMPLES, "sample")?, &graph)?;
                sample_accuracy(&graph, &split, &set)?
            }
        }
    };
    let report = score_method(cfg.mode.method_name(), estimates, truth, accuracy);
    let path = artifact(cfg, REPORT);
    write_report(std::slice::from_ref(&report), &path).context("writing the report")?;
    match report.accuracy {
        Some(acc) => println!(
            "evaluate: wrote {} (mean delta {:.6}, accuracy {:.6})",
            path.display(),
            report.mean_delta,
            acc
        ),
        None => println!(
            "evaluate: wrote {} (mean delta {:.6}, accuracy n/a)",
            path.display(),
            report.mean_delta
        ),
    }
    Ok(())
}

type Stage = (&'static str, fn(&RunConfig) -> Result<()>);

/// Runs every stage in order, timing each, and prints the final report.
/// Identical artifacts to running the stages individually with the same
/// config: the pipeline holds no in-memory state between stages.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<()> {
    if let Some(threads) = cfg.threads {
        if threads > 1 {
            println!("note: threads = {threads} requested; this build runs stages single-threaded");
        }
    }
    let (_, split) = load_inputs(cfg)?;
    let sampling_needed = cfg.mode != Mode::Map && split.unobserved_count() > 0;

    let mut stages: Vec<Stage> = vec![
        ("prior", stage_prior),
        ("ground", stage_ground),
        ("map", stage_map),
    ];
    if sampling_needed {
        stages.push(("sample", stage_sample));
    } else if cfg.mode != Mode::Map {
        println!("sample: skipped (every node is observed)");
    }
    stages.push(("query", stage_query));
    stages.push(("evaluate", stage_evaluate));

    let total = Instant::now();
    let mut timings: Vec<(&'static str, f64)> = Vec::new();
    for (name, f) in stages {
        let started = Instant::now();
        f(cfg).with_context(|| format!("stage {name}"))?;
        timings.push((name, started.elapsed().as_secs_f64()));
    }

    let mut out = String::new();
    for (name, secs) in &timings {
        out.push_str(&format!("{name}\t{secs:.3}\n"));
    }
    out.push_str(&format!("total\t{:.3}\n", total.elapsed().as_secs_f64()));
    write_atomic(&artifact(cfg, TIMINGS), &out)?;

    let report = std::fs::read_to_string(artifact(cfg, REPORT))?;
    print!("{report}");
    Ok(())
}
