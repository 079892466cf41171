//! Seeded synthetic datasets in the engine's own text formats.
//!
//! Two generators: a small two-community graph for demos and method
//! comparisons, and a citation-network-scale planted partition with sparse
//! class-signature features for end-to-end and accuracy runs. Both emit the
//! exact artifact texts (edges, labels, optional features, split), so tests
//! exercise the real loaders and the CLI can run on written files.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{
    load_graph_from_text, load_split_from_text, write_atomic, AttributedGraph, DataError,
    ObservationSplit,
};

#[derive(Debug, Clone)]
pub struct SynthData {
    pub edges: String,
    pub labels: String,
    pub features: Option<String>,
    pub split: String,
}

impl SynthData {
    /// Writes `edges.tsv`, `labels.tsv`, `split.tsv`, and (when present)
    /// `features.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), DataError> {
        write_atomic(&dir.join("edges.tsv"), &self.edges)?;
        write_atomic(&dir.join("labels.tsv"), &self.labels)?;
        write_atomic(&dir.join("split.tsv"), &self.split)?;
        if let Some(f) = &self.features {
            write_atomic(&dir.join("features.tsv"), f)?;
        }
        Ok(())
    }

    pub fn parse(&self) -> Result<(AttributedGraph, ObservationSplit), DataError> {
        let graph = load_graph_from_text(&self.edges, &self.labels, self.features.as_deref())?;
        let split = load_split_from_text(&self.split, &graph)?;
        Ok((graph, split))
    }
}

/// Two 15-node communities (categories `blue` and `red`) wired as rings with
/// random chords, joined only through three bridge nodes that connect into
/// both sides and form a blue-red-blue path among themselves; 30% of each
/// community plus one bridge are observed. The bridges see conflicting
/// evidence and mixed true neighborhoods, so they are both genuinely
/// uncertain and visible to the aggregate queries: a point estimate must
/// commit each bridge to one side, while the label distribution hedges.
pub fn two_clusters(seed: u64) -> SynthData {
    const SIZE: usize = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = String::new();
    let mut labels = String::new();

    let name = |side: char, i: usize| format!("{side}{i:02}");
    for i in 0..SIZE {
        let _ = writeln!(labels, "{}\tblue", name('a', i));
    }
    for i in 0..SIZE {
        let _ = writeln!(labels, "{}\tred", name('b', i));
    }
    for g in 0..3 {
        let color = if g % 2 == 0 { "blue" } else { "red" };
        let _ = writeln!(labels, "g{g}\t{color}");
    }

    for side in ['a', 'b'] {
        for i in 0..SIZE {
            let _ = writeln!(edges, "{}\t{}", name(side, i), name(side, (i + 1) % SIZE));
        }
        // Random chords thicken each community.
        for i in 0..SIZE {
            for j in (i + 2)..SIZE {
                if (i, j) != (0, SIZE - 1) && rng.gen_bool(0.12) {
                    let _ = writeln!(edges, "{}\t{}", name(side, i), name(side, j));
                }
            }
        }
    }
    // Each bridge touches two random nodes on each side, and the bridges
    // chain together so their own neighborhoods are mixed-label.
    for g in 0..3 {
        for side in ['a', 'b'] {
            let mut picks: Vec<usize> = (0..SIZE).collect();
            picks.shuffle(&mut rng);
            for &i in picks.iter().take(2) {
                let _ = writeln!(edges, "g{g}\t{}", name(side, i));
            }
        }
    }
    edges.push_str("g0\tg1\ng1\tg2\n");

    let mut split = String::new();
    for side in ['a', 'b'] {
        let mut picks: Vec<usize> = (0..SIZE).collect();
        picks.shuffle(&mut rng);
        let mut chosen: Vec<usize> = picks.into_iter().take((SIZE * 3) / 10).collect();
        chosen.sort_unstable();
        for i in chosen {
            let _ = writeln!(split, "{}", name(side, i));
        }
    }
    split.push_str("g0\n");

    SynthData {
        edges,
        labels,
        features: None,
        split,
    }
}

/// Node, edge, class, feature, and split shape of the planted partition.
pub const PARTITION_NODES: usize = 2708;
pub const PARTITION_EDGES: usize = 5429;
pub const PARTITION_CLASS_SIZES: [usize; 7] = [818, 426, 418, 351, 298, 217, 180];
pub const PARTITION_FEATURES: usize = 1433;
pub const PARTITION_OBSERVED: usize = 640;
/// Probability that a sampled edge stays inside its endpoint's class.
const PARTITION_HOMOPHILY: f64 = 0.8;
/// Sparse signature draws per node from its own class block, and fraction of
/// nodes whose signature is deliberately scrambled.
const SIGNATURE_DRAWS: usize = 10;
const NOISE_DRAWS: usize = 3;
const SCRAMBLED_FRACTION: f64 = 0.15;

/// A seven-class planted partition at citation-network scale: 2708 nodes in
/// fixed class sizes, exactly 5429 unique edges sampled with 80% same-class
/// preference, 1433 sparse binary features dominated by per-class signature
/// blocks, and 640 observed nodes.
pub fn planted_partition(seed: u64) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = PARTITION_NODES;
    let name = |i: usize| format!("n{i:04}");

    // Contiguous class ranges; the class of node i is found by range scan.
    let mut class_of = Vec::with_capacity(n);
    let mut class_members: Vec<Vec<usize>> = Vec::new();
    {
        let mut next = 0usize;
        for (c, &size) in PARTITION_CLASS_SIZES.iter().enumerate() {
            let members: Vec<usize> = (next..next + size).collect();
            for _ in 0..size {
                class_of.push(c);
            }
            class_members.push(members);
            next += size;
        }
        assert_eq!(next, n);
    }

    let mut labels = String::new();
    for (i, &c) in class_of.iter().enumerate() {
        let _ = writeln!(labels, "{}\tcat{c}", name(i));
    }

    // Sample unique undirected edges, mostly within class.
    let mut edges = String::new();
    let mut seen = std::collections::HashSet::with_capacity(PARTITION_EDGES * 2);
    let mut count = 0usize;
    while count < PARTITION_EDGES {
        let u = rng.gen_range(0..n);
        let v = if rng.gen_bool(PARTITION_HOMOPHILY) {
            let members = &class_members[class_of[u]];
            members[rng.gen_range(0..members.len())]
        } else {
            rng.gen_range(0..n)
        };
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            let _ = writeln!(edges, "{}\t{}", name(key.0), name(key.1));
            count += 1;
        }
    }

    // Features: each class owns a contiguous block of the feature space;
    // most nodes draw their signature from their own block, a scrambled
    // minority draws from a wrong one. Noise features use coprime strides so
    // every feature id occurs somewhere.
    let block = PARTITION_FEATURES / PARTITION_CLASS_SIZES.len();
    let mut features = String::new();
    for (i, &class) in class_of.iter().enumerate() {
        let source_class = if rng.gen_bool(SCRAMBLED_FRACTION) {
            rng.gen_range(0..PARTITION_CLASS_SIZES.len())
        } else {
            class
        };
        let start = source_class * block;
        let mut fs: Vec<usize> = Vec::with_capacity(SIGNATURE_DRAWS + NOISE_DRAWS);
        for _ in 0..SIGNATURE_DRAWS {
            fs.push(start + rng.gen_range(0..block));
        }
        for k in 0..NOISE_DRAWS {
            fs.push((i * 997 + k * 499 + 7) % PARTITION_FEATURES);
        }
        fs.sort_unstable();
        fs.dedup();
        for f in fs {
            let _ = writeln!(features, "{}\t{f}", name(i));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut obs: Vec<usize> = order.into_iter().take(PARTITION_OBSERVED).collect();
    obs.sort_unstable();
    let mut split = String::new();
    for i in obs {
        let _ = writeln!(split, "{}", name(i));
    }

    SynthData {
        edges,
        labels,
        features: Some(features),
        split,
    }
}
