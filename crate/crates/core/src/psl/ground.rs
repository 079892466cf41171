//! Grounding: instantiating rule templates against a graph.
//!
//! Every unobserved (node, category) pair becomes a random variable, indexed
//! in (node, category) order. Observed atoms are folded into constants at
//! grounding time, so a potential stores only RV terms plus a constant;
//! groundings whose atoms are all observed are dropped (they shift the energy
//! by a constant, which the normalizer absorbs). Groundings that mention at
//! least one RV are kept even when their hinge can never activate — counts
//! stay hand-checkable that way.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{write_atomic, AttributedGraph, DataError, FileKind, ObservationSplit};
use crate::prior::PriorTable;

use super::model::{RuleKind, RuleTemplate, Weight};
use super::{hinge_distance, PslError};

/// A ground hinge potential: `weight * max(0, sum(coef * y) + constant)^exponent`.
#[derive(Debug, Clone)]
pub struct Potential {
    pub weight: f64,
    pub exponent: u8,
    /// `(rv, coefficient)` pairs, at least one, rv strictly increasing.
    pub terms: Vec<(u32, f64)>,
    pub constant: f64,
    /// Index of the originating template, when grounded from one.
    pub template: Option<usize>,
}

impl Potential {
    pub fn argument(&self, y: &[f64]) -> f64 {
        let mut arg = self.constant;
        for &(rv, coef) in &self.terms {
            arg += coef * y[rv as usize];
        }
        arg
    }

    pub fn distance(&self, y: &[f64]) -> f64 {
        hinge_distance(self.argument(y), self.exponent)
    }
}

/// A hard linear equality `sum(coef * y) = rhs`.
#[derive(Debug, Clone)]
pub struct HardConstraint {
    pub terms: Vec<(u32, f64)>,
    pub rhs: f64,
}

impl HardConstraint {
    pub fn violation(&self, y: &[f64]) -> f64 {
        let mut v = -self.rhs;
        for &(rv, coef) in &self.terms {
            v += coef * y[rv as usize];
        }
        v.abs()
    }
}

/// Feasibility tolerance for hard constraints.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GroundRuleSet {
    /// rv -> (node, category), strictly increasing.
    rvs: Vec<(u32, usize)>,
    rv_index: HashMap<(u32, usize), u32>,
    pub potentials: Vec<Potential>,
    pub constraints: Vec<HardConstraint>,
    /// rv -> ids of potentials whose terms mention it, increasing.
    incident: Vec<Vec<u32>>,
    /// rv -> id of the hard constraint containing it, if any.
    rv_constraint: Vec<Option<u32>>,
    kappa: usize,
}

impl GroundRuleSet {
    /// Builds a set from explicit parts; used by grounding, file loading, and
    /// tests that construct bespoke models.
    pub fn from_parts(
        rvs: Vec<(u32, usize)>,
        kappa: usize,
        potentials: Vec<Potential>,
        constraints: Vec<HardConstraint>,
    ) -> Result<Self, PslError> {
        let rv_index: HashMap<(u32, usize), u32> = rvs
            .iter()
            .enumerate()
            .map(|(i, &key)| (key, i as u32))
            .collect();
        let mut incident = vec![Vec::new(); rvs.len()];
        for (pid, p) in potentials.iter().enumerate() {
            if p.terms.is_empty() {
                return Err(PslError::ConstantPotential { index: pid });
            }
            for &(rv, _) in &p.terms {
                incident[rv as usize].push(pid as u32);
            }
        }
        let mut rv_constraint = vec![None; rvs.len()];
        for (cid, c) in constraints.iter().enumerate() {
            for &(rv, _) in &c.terms {
                if rv_constraint[rv as usize].is_some() {
                    return Err(PslError::OverlappingConstraints { rv, count: 2 });
                }
                rv_constraint[rv as usize] = Some(cid as u32);
            }
        }
        Ok(GroundRuleSet {
            rvs,
            rv_index,
            potentials,
            constraints,
            incident,
            rv_constraint,
            kappa,
        })
    }

    pub fn rv_count(&self) -> usize {
        self.rvs.len()
    }

    /// All rv meanings, indexed by rv id.
    pub fn rvs(&self) -> &[(u32, usize)] {
        &self.rvs
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// The (node, category) pair behind an rv index.
    pub fn rv_meaning(&self, rv: u32) -> (u32, usize) {
        self.rvs[rv as usize]
    }

    pub fn rv_of(&self, node: u32, cat: usize) -> Option<u32> {
        self.rv_index.get(&(node, cat)).copied()
    }

    pub fn incident_potentials(&self, rv: u32) -> &[u32] {
        &self.incident[rv as usize]
    }

    pub fn constraint_of(&self, rv: u32) -> Option<u32> {
        self.rv_constraint[rv as usize]
    }

    /// Checks domain and hard-constraint feasibility of `y`.
    pub fn check_feasible(&self, y: &[f64]) -> Result<(), PslError> {
        if y.len() != self.rvs.len() {
            return Err(PslError::AssignmentLength {
                got: y.len(),
                expected: self.rvs.len(),
            });
        }
        for (rv, &v) in y.iter().enumerate() {
            if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&v) {
                return Err(PslError::OutOfDomain {
                    rv: rv as u32,
                    value: v,
                });
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let violation = c.violation(y);
            if violation > FEASIBILITY_TOL {
                return Err(PslError::Infeasible {
                    index: i,
                    violation,
                });
            }
        }
        Ok(())
    }

    /// Total weighted distance to satisfaction. Errors on infeasible input.
    pub fn energy(&self, y: &[f64]) -> Result<f64, PslError> {
        self.check_feasible(y)?;
        Ok(self.energy_unchecked(y))
    }

    pub fn energy_unchecked(&self, y: &[f64]) -> f64 {
        self.potentials
            .iter()
            .map(|p| p.weight * p.distance(y))
            .sum()
    }

    /// Copies template weights onto the grounded potentials (used by weight
    /// learning between gradient steps).
    pub fn set_weights_from(&mut self, templates: &[RuleTemplate]) {
        for p in &mut self.potentials {
            if let Some(t) = p.template {
                if let Weight::Soft(w) = templates[t].weight {
                    p.weight = w;
                }
            }
        }
    }

    /// Sum of (unweighted) distances per template at assignment `y`.
    pub fn template_distances(&self, y: &[f64], template_count: usize) -> Vec<f64> {
        let mut sums = vec![0.0; template_count];
        for p in &self.potentials {
            if let Some(t) = p.template {
                sums[t] += p.distance(y);
            }
        }
        sums
    }

    /// Serializes rvs, potentials, and constraints. Potentials are one per
    /// line: `weight<TAB>exponent<TAB>rv:coef,...<TAB>constant`.
    pub fn format(&self, graph: &AttributedGraph) -> String {
        let mut out = String::from("# rvs\n");
        for &(node, cat) in &self.rvs {
            out.push_str(graph.external_id(node));
            out.push(':');
            out.push_str(graph.categories().name(cat));
            out.push('\n');
        }
        out.push_str("# potentials\n");
        for p in &self.potentials {
            out.push_str(&p.weight.to_string());
            out.push('\t');
            out.push_str(&p.exponent.to_string());
            out.push('\t');
            for (i, &(rv, coef)) in p.terms.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&rv.to_string());
                out.push(':');
                out.push_str(&coef.to_string());
            }
            out.push('\t');
            out.push_str(&p.constant.to_string());
            out.push('\n');
        }
        out.push_str("# constraints\n");
        for c in &self.constraints {
            for (i, &(rv, coef)) in c.terms.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&rv.to_string());
                out.push(':');
                out.push_str(&coef.to_string());
            }
            out.push('\t');
            out.push_str(&c.rhs.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, graph: &AttributedGraph, path: &Path) -> Result<(), DataError> {
        write_atomic(path, &self.format(graph))
    }
}

/// Truth value of `HasCat(node, cat)` when observed, or the rv term.
enum Atom {
    Rv(u32),
    Value(f64),
}

/// Shared lookups threaded through the grounding helpers.
struct GroundCtx<'a> {
    graph: &'a AttributedGraph,
    split: &'a ObservationSplit,
    rv_index: &'a HashMap<(u32, usize), u32>,
}

fn has_cat(node: u32, cat: usize, ctx: &GroundCtx) -> Atom {
    if ctx.split.is_observed(node) {
        Atom::Value(if ctx.graph.label(node) == cat {
            1.0
        } else {
            0.0
        })
    } else {
        Atom::Rv(ctx.rv_index[&(node, cat)])
    }
}

/// One propagation grounding `max(0, HasCat(a, c) - HasCat(b, c))` for the
/// edge direction a -> b; `None` when both endpoints are observed.
fn propagation_potential(
    a: u32,
    b: u32,
    cat: usize,
    weight: f64,
    exponent: u8,
    template: usize,
    ctx: &GroundCtx,
) -> Option<Potential> {
    let mut terms = Vec::with_capacity(2);
    let mut constant = 0.0;
    match has_cat(a, cat, ctx) {
        Atom::Rv(rv) => terms.push((rv, 1.0)),
        Atom::Value(v) => constant += v,
    }
    match has_cat(b, cat, ctx) {
        Atom::Rv(rv) => terms.push((rv, -1.0)),
        Atom::Value(v) => constant -= v,
    }
    if terms.is_empty() {
        return None;
    }
    terms.sort_unstable_by_key(|&(rv, _)| rv);
    Some(Potential {
        weight,
        exponent,
        terms,
        constant,
        template: Some(template),
    })
}

/// Grounds `templates` over the graph. RVs are the unobserved (node, category)
/// pairs in (node, category) order; the prior table supplies `LR` truth values.
pub fn ground(
    templates: &[RuleTemplate],
    graph: &AttributedGraph,
    split: &ObservationSplit,
    priors: &PriorTable,
) -> Result<GroundRuleSet, PslError> {
    let kappa = graph.categories().kappa();
    if priors.node_count() != graph.node_count() || priors.kappa() != kappa {
        return Err(PslError::PriorShape {
            nodes: priors.node_count(),
            kappa: priors.kappa(),
        });
    }

    let unobserved = split.unobserved_nodes();
    let mut rvs = Vec::with_capacity(unobserved.len() * kappa);
    for &node in &unobserved {
        for cat in 0..kappa {
            rvs.push((node, cat));
        }
    }
    let rv_index: HashMap<(u32, usize), u32> = rvs
        .iter()
        .enumerate()
        .map(|(i, &key)| (key, i as u32))
        .collect();

    let mut potentials = Vec::new();
    let mut constraints = Vec::new();
    let ctx = GroundCtx {
        graph,
        split,
        rv_index: &rv_index,
    };

    for (tid, template) in templates.iter().enumerate() {
        match (&template.kind, template.weight) {
            (RuleKind::GeneralPropagation, Weight::Soft(w)) => {
                for &(u, v) in graph.edges() {
                    for (a, b) in [(u, v), (v, u)] {
                        for cat in 0..kappa {
                            potentials.extend(propagation_potential(
                                a,
                                b,
                                cat,
                                w,
                                template.exponent,
                                tid,
                                &ctx,
                            ));
                        }
                    }
                }
            }
            (RuleKind::CategoryPropagation(cat), Weight::Soft(w)) => {
                for &(u, v) in graph.edges() {
                    for (a, b) in [(u, v), (v, u)] {
                        potentials.extend(propagation_potential(
                            a,
                            b,
                            *cat,
                            w,
                            template.exponent,
                            tid,
                            &ctx,
                        ));
                    }
                }
            }
            (RuleKind::Prior(cat), Weight::Soft(w)) => {
                for &node in &unobserved {
                    potentials.push(Potential {
                        weight: w,
                        exponent: template.exponent,
                        terms: vec![(rv_index[&(node, *cat)], -1.0)],
                        constant: priors.prob(node, *cat),
                        template: Some(tid),
                    });
                }
            }
            (RuleKind::Simplex, _) => {
                for &node in &unobserved {
                    let terms = (0..kappa)
                        .map(|cat| (rv_index[&(node, cat)], 1.0))
                        .collect();
                    constraints.push(HardConstraint { terms, rhs: 1.0 });
                }
            }
            // A hard weight on a non-constraint rule has no hinge semantics.
            (kind, Weight::Hard) => {
                return Err(PslError::ParseModel {
                    line: tid + 1,
                    msg: format!("rule {kind:?} cannot be hard"),
                })
            }
        }
    }

    GroundRuleSet::from_parts(rvs, kappa, potentials, constraints)
}

/// Parses the three-section ground format back into a rule set, resolving
/// `node:category` rv names against the graph.
pub fn load_ground_from_text(
    text: &str,
    graph: &AttributedGraph,
) -> Result<GroundRuleSet, PslError> {
    #[derive(PartialEq)]
    enum Section {
        Rvs,
        Potentials,
        Constraints,
    }
    let malformed = |line: usize, msg: String| {
        PslError::Data(DataError::Malformed {
            file: FileKind::Ground,
            line,
            msg,
        })
    };
    let mut section = None;
    let mut rvs: Vec<(u32, usize)> = Vec::new();
    let mut potentials = Vec::new();
    let mut constraints = Vec::new();

    let parse_terms = |field: &str, line: usize, rv_count: usize| {
        let mut terms = Vec::new();
        for part in field.split(',') {
            let (rv_s, coef_s) = part
                .split_once(':')
                .ok_or_else(|| malformed(line, format!("expected `rv:coef`, got `{part}`")))?;
            let rv: u32 = rv_s
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("rv index `{rv_s}` is not an integer")))?;
            if rv as usize >= rv_count {
                return Err(malformed(line, format!("rv index {rv} out of range")));
            }
            let coef: f64 = coef_s
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("coefficient `{coef_s}` is not a number")))?;
            terms.push((rv, coef));
        }
        Ok::<_, PslError>(terms)
    };

    for (line, raw) in text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
    {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "# rvs" => {
                section = Some(Section::Rvs);
                continue;
            }
            "# potentials" => {
                section = Some(Section::Potentials);
                continue;
            }
            "# constraints" => {
                section = Some(Section::Constraints);
                continue;
            }
            _ if trimmed.starts_with('#') => continue,
            _ => {}
        }
        match section {
            Some(Section::Rvs) => {
                let (node_s, cat_s) = trimmed
                    .rsplit_once(':')
                    .ok_or_else(|| malformed(line, "expected `node:category`".into()))?;
                let node = graph.node_index(node_s).ok_or_else(|| {
                    PslError::Data(DataError::UnknownNode {
                        file: FileKind::Ground,
                        line,
                        id: node_s.to_string(),
                    })
                })?;
                let cat = graph.categories().index_of(cat_s).ok_or_else(|| {
                    malformed(line, format!("category `{cat_s}` outside the label domain"))
                })?;
                rvs.push((node, cat));
            }
            Some(Section::Potentials) => {
                let fields: Vec<&str> = raw.split('\t').collect();
                if fields.len() != 4 {
                    return Err(malformed(
                        line,
                        "expected `weight<TAB>exponent<TAB>terms<TAB>constant`".into(),
                    ));
                }
                let weight: f64 = fields[0]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, "weight is not a number".into()))?;
                let exponent: u8 = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, "exponent is not an integer".into()))?;
                if exponent != 1 && exponent != 2 {
                    return Err(PslError::BadExponent(exponent));
                }
                let terms = parse_terms(fields[2], line, rvs.len())?;
                let constant: f64 = fields[3]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, "constant is not a number".into()))?;
                potentials.push(Potential {
                    weight,
                    exponent,
                    terms,
                    constant,
                    template: None,
                });
            }
            Some(Section::Constraints) => {
                let fields: Vec<&str> = raw.split('\t').collect();
                if fields.len() != 2 {
                    return Err(malformed(line, "expected `terms<TAB>rhs`".into()));
                }
                let terms = parse_terms(fields[0], line, rvs.len())?;
                let rhs: f64 = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, "rhs is not a number".into()))?;
                constraints.push(HardConstraint { terms, rhs });
            }
            None => return Err(malformed(line, "content before a section header".into())),
        }
    }

    let kappa = graph.categories().kappa();
    GroundRuleSet::from_parts(rvs, kappa, potentials, constraints)
}

pub fn load_ground_set(path: &Path, graph: &AttributedGraph) -> Result<GroundRuleSet, PslError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    load_ground_from_text(&text, graph)
}

/// The assignment an observation-respecting labeling corresponds to: one-hot
/// truth rows for each unobserved node (used by weight learning and tests).
pub fn one_hot_assignment(rules: &GroundRuleSet, graph: &AttributedGraph) -> Vec<f64> {
    (0..rules.rv_count() as u32)
        .map(|rv| {
            let (node, cat) = rules.rv_meaning(rv);
            if graph.label(node) == cat {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}
