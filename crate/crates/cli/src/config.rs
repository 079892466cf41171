//! Flat `key = value` run configuration.
//!
//! One file drives every stage: dataset paths, the output directory, the
//! estimator mode, the global seed, and the per-module settings under the
//! `lr.`, `map.`, and `sampler.` prefixes. Relative paths are resolved
//! against the config file's own directory, so a config can travel with its
//! dataset. Unknown and duplicate keys are errors: silently ignoring a typo
//! like `sampler.iteratoins` would be far worse than rejecting it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;

use aggremc_core::prior::LrConfig;
use aggremc_core::psl::MapConfig;
use aggremc_core::sampler::SamplerConfig;

/// Which estimator the query and evaluate stages use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Discretize the MAP state and evaluate queries on it.
    Map,
    /// Discretize per-variable sample means.
    Mean,
    /// Average each query over discretized posterior samples.
    Samples,
}

impl Mode {
    pub fn method_name(&self) -> &'static str {
        match self {
            Mode::Map => "PSL-MAP",
            Mode::Mean => "PSL-MEAN",
            Mode::Samples => "PSL-SAMPLES",
        }
    }

    fn parse(s: &str) -> Result<Mode> {
        match s {
            "map" => Ok(Mode::Map),
            "mean" => Ok(Mode::Mean),
            "samples" => Ok(Mode::Samples),
            other => bail!("mode must be map, mean, or samples, not {other:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub features: Option<PathBuf>,
    pub split: PathBuf,
    /// Rule templates to use; absent means the built-in default model.
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: Mode,
    pub seed: u64,
    /// Accepted for forward compatibility; the engine is single-threaded.
    pub threads: Option<usize>,
    pub lr: LrConfig,
    pub map: MapConfig,
    pub sampler: SamplerConfig,
    /// Rows kept by the sample stage in `samples` mode.
    pub thin_to: usize,
    sampler_seed_overridden: bool,
}

impl RunConfig {
    /// The sample stage's seed: explicit `sampler.seed` if given, otherwise
    /// derived from the global seed.
    pub fn sampler_seed(&self) -> u64 {
        if self.sampler_seed_overridden {
            self.sampler.seed
        } else {
            self.seed.wrapping_add(1)
        }
    }

    /// The thinning stage's seed, derived from the global seed.
    pub fn thin_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("key `{key}`: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("key `{key}`: expected true or false, not {other:?}"),
    }
}

/// Parses config text. `base` is the directory relative paths resolve
/// against (normally the config file's parent).
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() || value.is_empty() {
            bail!("config line {}: empty key or value", lineno + 1);
        }
        if pairs.insert(key.clone(), value).is_some() {
            bail!("config line {}: duplicate key `{key}`", lineno + 1);
        }
    }

    let mut take = |k: &str| pairs.remove(k);
    let path_of = |v: String| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let required_path = |slot: Option<String>, key: &str| -> Result<PathBuf> {
        slot.map(&path_of)
            .ok_or_else(|| anyhow!("missing required key `{key}` (path to the {key} file)"))
    };

    let edges = required_path(take("edges"), "edges")?;
    let labels = required_path(take("labels"), "labels")?;
    let split = required_path(take("split"), "split")?;
    let out = required_path(take("out"), "out")?;
    let features = take("features").map(&path_of);
    let model = take("model").map(&path_of);
    let mode = match take("mode") {
        Some(v) => Mode::parse(&v)?,
        None => Mode::Map,
    };
    let seed: u64 = match take("seed") {
        Some(v) => parse_num("seed", &v)?,
        None => 0,
    };
    let threads: Option<usize> = match take("threads") {
        Some(v) => {
            let t: usize = parse_num("threads", &v)?;
            if t == 0 {
                bail!("key `threads`: must be at least 1");
            }
            Some(t)
        }
        None => None,
    };

    let mut lr = LrConfig::default();
    if let Some(v) = take("lr.l2_weight") {
        lr.l2_weight = parse_num("lr.l2_weight", &v)?;
    }
    if let Some(v) = take("lr.learning_rate") {
        lr.learning_rate = parse_num("lr.learning_rate", &v)?;
    }
    if let Some(v) = take("lr.max_epochs") {
        lr.max_epochs = parse_num("lr.max_epochs", &v)?;
    }
    if let Some(v) = take("lr.tolerance") {
        lr.tolerance = parse_num("lr.tolerance", &v)?;
    }

    let mut map = MapConfig::default();
    if let Some(v) = take("map.tolerance") {
        map.tolerance = parse_num("map.tolerance", &v)?;
    }
    if let Some(v) = take("map.max_iters") {
        map.max_iters = parse_num("map.max_iters", &v)?;
    }

    let mut sampler = SamplerConfig::default();
    let mut sampler_seed_overridden = false;
    if let Some(v) = take("sampler.iterations") {
        sampler.iterations = parse_num("sampler.iterations", &v)?;
    }
    if let Some(v) = take("sampler.burn_in") {
        sampler.burn_in = parse_num("sampler.burn_in", &v)?;
    }
    if let Some(v) = take("sampler.weight_threshold") {
        sampler.weight_threshold = Some(parse_num("sampler.weight_threshold", &v)?);
    }
    if let Some(v) = take("sampler.range_threshold") {
        sampler.range_threshold = parse_num("sampler.range_threshold", &v)?;
    }
    if let Some(v) = take("sampler.region_prob") {
        sampler.region_prob = parse_num("sampler.region_prob", &v)?;
    }
    if let Some(v) = take("sampler.hastings_correction") {
        sampler.hastings_correction = parse_bool("sampler.hastings_correction", &v)?;
    }
    if let Some(v) = take("sampler.chains") {
        sampler.chains = parse_num("sampler.chains", &v)?;
    }
    if let Some(v) = take("sampler.seed") {
        sampler.seed = parse_num("sampler.seed", &v)?;
        sampler_seed_overridden = true;
    }
    let thin_to: usize = match take("sampler.thin_to") {
        Some(v) => parse_num("sampler.thin_to", &v)?,
        None => 100,
    };

    if let Some(unknown) = pairs.keys().next() {
        bail!("unknown config key `{unknown}`");
    }

    Ok(RunConfig {
        edges,
        labels,
        features,
        split,
        model,
        out,
        mode,
        seed,
        threads,
        lr,
        map,
        sampler,
        thin_to,
        sampler_seed_overridden,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}
