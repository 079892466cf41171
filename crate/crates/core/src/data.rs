//! Attributed-graph loading and validation.
//!
//! External node ids are arbitrary strings; loading re-indexes them densely as
//! `0..n-1` in label-file order and keeps the mapping for writers. Edges are
//! undirected for all downstream consumers: a `(u, w)` / `(w, u)` pair in the
//! edge file collapses to one edge, while an exact repeat of a directed line is
//! rejected as a duplicate.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

/// Which input file an error refers to, for stage-qualified messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Edges,
    Labels,
    Features,
    Split,
    Priors,
    Model,
    Ground,
    Samples,
    Config,
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FileKind::Edges => "edge file",
            FileKind::Labels => "label file",
            FileKind::Features => "feature file",
            FileKind::Split => "split file",
            FileKind::Priors => "prior file",
            FileKind::Model => "model file",
            FileKind::Ground => "ground file",
            FileKind::Samples => "sample file",
            FileKind::Config => "config file",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file} line {line}: malformed line: {msg}")]
    Malformed {
        file: FileKind,
        line: usize,
        msg: String,
    },
    #[error("{file} line {line}: unknown node id `{id}`")]
    UnknownNode {
        file: FileKind,
        line: usize,
        id: String,
    },
    #[error("edge file line {line}: duplicate edge {u} -> {v}")]
    DuplicateEdge { line: usize, u: String, v: String },
    #[error("edge file line {line}: self-loop on node `{id}`")]
    SelfLoop { line: usize, id: String },
    #[error("{file} line {line}: duplicate entry for `{id}`")]
    DuplicateEntry {
        file: FileKind,
        line: usize,
        id: String,
    },
    #[error("label file is empty: node universe would be empty")]
    EmptyLabels,
    #[error("{file}: {msg}")]
    Invalid { file: FileKind, msg: String },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// The closed set of category names, indexed in label-file appearance order.
#[derive(Debug, Clone)]
pub struct CategoryDomain {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategoryDomain {
    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        CategoryDomain { names, index }
    }

    pub fn kappa(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A loaded graph: dense node ids, undirected edges, sparse feature rows, and
/// the full ground-truth labeling (observation status lives in [`ObservationSplit`]).
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    external_ids: Vec<String>,
    id_index: HashMap<String, u32>,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    features: Vec<Vec<(u32, f64)>>,
    feature_count: usize,
    categories: CategoryDomain,
    labels: Vec<usize>,
}

impl AttributedGraph {
    pub fn node_count(&self) -> usize {
        self.external_ids.len()
    }

    /// Unique undirected edges, first-seen orientation.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted unique neighbors of `node`.
    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    /// Sparse feature row of `node`, sorted by feature index.
    pub fn features(&self, node: u32) -> &[(u32, f64)] {
        &self.features[node as usize]
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn categories(&self) -> &CategoryDomain {
        &self.categories
    }

    /// Ground-truth category index of `node`.
    pub fn label(&self, node: u32) -> usize {
        self.labels[node as usize]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn external_id(&self, node: u32) -> &str {
        &self.external_ids[node as usize]
    }

    pub fn node_index(&self, external: &str) -> Option<u32> {
        self.id_index.get(external).copied()
    }

    /// Writes `external<TAB>internal` rows in internal-id order.
    pub fn write_id_map(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for (i, ext) in self.external_ids.iter().enumerate() {
            out.push_str(ext);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        write_atomic(path, &out)
    }

    /// Writes the loaded edge set back in `src<TAB>dst` form; reloading yields
    /// the same edge set (loading is idempotent on its own output).
    pub fn write_edges(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for &(u, v) in &self.edges {
            out.push_str(self.external_id(u));
            out.push('\t');
            out.push_str(self.external_id(v));
            out.push('\n');
        }
        write_atomic(path, &out)
    }
}

/// Which nodes have observed labels. Unobserved nodes are the inference targets.
#[derive(Debug, Clone)]
pub struct ObservationSplit {
    observed: Vec<bool>,
}

impl ObservationSplit {
    pub fn from_observed_nodes(node_count: usize, observed_nodes: &[u32]) -> Self {
        let mut observed = vec![false; node_count];
        for &n in observed_nodes {
            observed[n as usize] = true;
        }
        ObservationSplit { observed }
    }

    pub fn is_observed(&self, node: u32) -> bool {
        self.observed[node as usize]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn unobserved_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    /// Unobserved node ids in increasing order.
    pub fn unobserved_nodes(&self) -> Vec<u32> {
        (0..self.observed.len() as u32)
            .filter(|&n| !self.observed[n as usize])
            .collect()
    }

    pub fn write(&self, graph: &AttributedGraph, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for n in 0..graph.node_count() as u32 {
            if self.is_observed(n) {
                out.push_str(graph.external_id(n));
                out.push('\n');
            }
        }
        write_atomic(path, &out)
    }
}

/// Writes `content` to `path` by staging it at `<path>.partial` and renaming
/// on success. A failed write never leaves a truncated file under the final
/// name; the `.partial` file is kept for inspection.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), DataError> {
    let staged = {
        let mut s = path.as_os_str().to_os_string();
        s.push(".partial");
        std::path::PathBuf::from(s)
    };
    let write_err = |source| DataError::Write {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(&staged).map_err(write_err)?;
    f.write_all(content.as_bytes()).map_err(write_err)?;
    f.sync_all().map_err(write_err)?;
    drop(f);
    fs::rename(&staged, path).map_err(write_err)
}

fn read_to_string(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Data lines with their 1-based line numbers; `#` comment lines and blanks skipped.
pub(crate) fn text_data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('#')
        })
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split('\t').map(|f| f.trim()).collect()
}

/// Loads a graph from edge/label/(optional) feature text. The node universe and
/// category domain come from the label file, which must cover every node.
pub fn load_graph_from_text(
    edge_text: &str,
    label_text: &str,
    feature_text: Option<&str>,
) -> Result<AttributedGraph, DataError> {
    // Labels first: they define the node universe and the category domain.
    let mut external_ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, u32> = HashMap::new();
    let mut cat_names: Vec<String> = Vec::new();
    let mut cat_index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<usize> = Vec::new();

    for (line, raw) in text_data_lines(label_text) {
        let fields = split_fields(raw);
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(DataError::Malformed {
                file: FileKind::Labels,
                line,
                msg: "expected `node<TAB>category`".into(),
            });
        }
        let (node, cat) = (fields[0], fields[1]);
        if cat.contains(':') {
            // Category names appear in `node:category` sample headers.
            return Err(DataError::Malformed {
                file: FileKind::Labels,
                line,
                msg: format!("category name `{cat}` must not contain `:`"),
            });
        }
        if id_index.contains_key(node) {
            return Err(DataError::DuplicateEntry {
                file: FileKind::Labels,
                line,
                id: node.to_string(),
            });
        }
        let cat_id = *cat_index.entry(cat.to_string()).or_insert_with(|| {
            cat_names.push(cat.to_string());
            cat_names.len() - 1
        });
        id_index.insert(node.to_string(), external_ids.len() as u32);
        external_ids.push(node.to_string());
        labels.push(cat_id);
    }
    if external_ids.is_empty() {
        return Err(DataError::EmptyLabels);
    }

    let n = external_ids.len();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut seen_directed: HashMap<(u32, u32), usize> = HashMap::new();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];

    for (line, raw) in text_data_lines(edge_text) {
        let fields = split_fields(raw);
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(DataError::Malformed {
                file: FileKind::Edges,
                line,
                msg: "expected `src<TAB>dst`".into(),
            });
        }
        let lookup = |id: &str| {
            id_index.get(id).copied().ok_or(DataError::UnknownNode {
                file: FileKind::Edges,
                line,
                id: id.to_string(),
            })
        };
        let (u, v) = (lookup(fields[0])?, lookup(fields[1])?);
        if u == v {
            return Err(DataError::SelfLoop {
                line,
                id: fields[0].to_string(),
            });
        }
        if seen_directed.contains_key(&(u, v)) {
            return Err(DataError::DuplicateEdge {
                line,
                u: fields[0].to_string(),
                v: fields[1].to_string(),
            });
        }
        seen_directed.insert((u, v), line);
        if seen_directed.contains_key(&(v, u)) {
            // Reverse orientation already loaded: same undirected edge.
            continue;
        }
        edges.push((u, v));
        adjacency[u as usize].push(v);
        adjacency[v as usize].push(u);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    let mut features: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut feature_count = 0usize;
    if let Some(text) = feature_text {
        let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
        for (line, raw) in text_data_lines(text) {
            let fields = split_fields(raw);
            if fields.len() != 2 && fields.len() != 3 {
                return Err(DataError::Malformed {
                    file: FileKind::Features,
                    line,
                    msg: "expected `node<TAB>feature<TAB>value` or `node<TAB>feature`".into(),
                });
            }
            let node = id_index
                .get(fields[0])
                .copied()
                .ok_or_else(|| DataError::UnknownNode {
                    file: FileKind::Features,
                    line,
                    id: fields[0].to_string(),
                })?;
            let feat: u32 = fields[1].parse().map_err(|_| DataError::Malformed {
                file: FileKind::Features,
                line,
                msg: format!("feature index `{}` is not an unsigned integer", fields[1]),
            })?;
            let value: f64 = if fields.len() == 3 {
                fields[2].parse().map_err(|_| DataError::Malformed {
                    file: FileKind::Features,
                    line,
                    msg: format!("feature value `{}` is not a number", fields[2]),
                })?
            } else {
                1.0
            };
            if !value.is_finite() {
                return Err(DataError::Malformed {
                    file: FileKind::Features,
                    line,
                    msg: "feature value must be finite".into(),
                });
            }
            if seen.insert((node, feat), line).is_some() {
                return Err(DataError::DuplicateEntry {
                    file: FileKind::Features,
                    line,
                    id: format!("{}\t{}", fields[0], feat),
                });
            }
            features[node as usize].push((feat, value));
            feature_count = feature_count.max(feat as usize + 1);
        }
        for row in &mut features {
            row.sort_unstable_by_key(|&(f, _)| f);
        }
    }

    Ok(AttributedGraph {
        external_ids,
        id_index,
        edges,
        adjacency,
        features,
        feature_count,
        categories: CategoryDomain::from_names(cat_names),
        labels,
    })
}

pub fn load_graph(
    edge_path: &Path,
    label_path: &Path,
    feature_path: Option<&Path>,
) -> Result<AttributedGraph, DataError> {
    let edge_text = read_to_string(edge_path)?;
    let label_text = read_to_string(label_path)?;
    let feature_text = match feature_path {
        Some(p) => Some(read_to_string(p)?),
        None => None,
    };
    load_graph_from_text(&edge_text, &label_text, feature_text.as_deref())
}

/// Parses a split file (one observed external node id per line).
pub fn load_split_from_text(
    text: &str,
    graph: &AttributedGraph,
) -> Result<ObservationSplit, DataError> {
    let mut observed = vec![false; graph.node_count()];
    for (line, raw) in text_data_lines(text) {
        let id = raw.trim();
        let node = graph.node_index(id).ok_or_else(|| DataError::UnknownNode {
            file: FileKind::Split,
            line,
            id: id.to_string(),
        })?;
        if observed[node as usize] {
            return Err(DataError::DuplicateEntry {
                file: FileKind::Split,
                line,
                id: id.to_string(),
            });
        }
        observed[node as usize] = true;
    }
    Ok(ObservationSplit { observed })
}

pub fn load_split(path: &Path, graph: &AttributedGraph) -> Result<ObservationSplit, DataError> {
    let text = read_to_string(path)?;
    load_split_from_text(&text, graph)
}
