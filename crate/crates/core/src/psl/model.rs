//! Rule templates and the model file format.
//!
//! One template per model-file line: `weight<TAB>rule<TAB>exponent`, with
//! `HARD` in the weight column for constraints. Rules use three predicates —
//! `HasCat(node, category)`, `Link(node, node)`, `LR(node, category)` — with
//! unquoted uppercase identifiers as variables and `'quoted'` category
//! constants, plus `Simplex(A)` for the per-node sum-to-one constraint.

use std::path::Path;

use crate::data::{write_atomic, CategoryDomain, DataError};

use super::PslError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Soft(f64),
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// `HasCat(A, C) & Link(A, B) -> HasCat(B, C)`: labels propagate across
    /// every edge, both directions, every category.
    GeneralPropagation,
    /// `HasCat(A, 'c') & Link(A, B) -> HasCat(B, 'c')`: propagation for one
    /// category, so its weight can differ per category.
    CategoryPropagation(usize),
    /// `LR(A, 'c') -> HasCat(A, 'c')`: a node's value for `c` should not fall
    /// below its local prior probability.
    Prior(usize),
    /// `Simplex(A)`: a node's values across all categories sum to one. Hard.
    Simplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTemplate {
    pub kind: RuleKind,
    pub weight: Weight,
    pub exponent: u8,
}

impl RuleTemplate {
    pub fn soft_weight(&self) -> Option<f64> {
        match self.weight {
            Weight::Soft(w) => Some(w),
            Weight::Hard => None,
        }
    }

    fn validate(&self) -> Result<(), PslError> {
        if let Weight::Soft(w) = self.weight {
            if w < 0.0 || !w.is_finite() {
                return Err(PslError::NegativeWeight(w));
            }
        }
        if self.exponent != 1 && self.exponent != 2 {
            return Err(PslError::BadExponent(self.exponent));
        }
        Ok(())
    }
}

/// Weights and exponents for the standard model built by [`build_model`].
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub propagation_weight: f64,
    pub category_weight: f64,
    pub prior_weight: f64,
    pub propagation_exponent: u8,
    pub prior_exponent: u8,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            propagation_weight: 1.0,
            category_weight: 1.0,
            prior_weight: 1.0,
            propagation_exponent: 1,
            prior_exponent: 2,
        }
    }
}

/// The standard model for `kappa` categories: one general propagation rule,
/// one propagation rule per category, one prior rule per category (all soft),
/// and the hard per-node simplex constraint last.
pub fn build_model(kappa: usize, config: &ModelConfig) -> Result<Vec<RuleTemplate>, PslError> {
    let mut templates = Vec::with_capacity(2 * kappa + 2);
    templates.push(RuleTemplate {
        kind: RuleKind::GeneralPropagation,
        weight: Weight::Soft(config.propagation_weight),
        exponent: config.propagation_exponent,
    });
    for c in 0..kappa {
        templates.push(RuleTemplate {
            kind: RuleKind::CategoryPropagation(c),
            weight: Weight::Soft(config.category_weight),
            exponent: config.propagation_exponent,
        });
    }
    for c in 0..kappa {
        templates.push(RuleTemplate {
            kind: RuleKind::Prior(c),
            weight: Weight::Soft(config.prior_weight),
            exponent: config.prior_exponent,
        });
    }
    templates.push(RuleTemplate {
        kind: RuleKind::Simplex,
        weight: Weight::Hard,
        exponent: 1,
    });
    for t in &templates {
        t.validate()?;
    }
    Ok(templates)
}

fn rule_text(kind: &RuleKind, domain: &CategoryDomain) -> String {
    match kind {
        RuleKind::GeneralPropagation => "HasCat(A, C) & Link(A, B) -> HasCat(B, C)".to_string(),
        RuleKind::CategoryPropagation(c) => {
            let name = domain.name(*c);
            format!("HasCat(A, '{name}') & Link(A, B) -> HasCat(B, '{name}')")
        }
        RuleKind::Prior(c) => {
            let name = domain.name(*c);
            format!("LR(A, '{name}') -> HasCat(A, '{name}')")
        }
        RuleKind::Simplex => "Simplex(A)".to_string(),
    }
}

pub fn format_model_file(templates: &[RuleTemplate], domain: &CategoryDomain) -> String {
    let mut out = String::new();
    for t in templates {
        match t.weight {
            Weight::Soft(w) => out.push_str(&w.to_string()),
            Weight::Hard => out.push_str("HARD"),
        }
        out.push('\t');
        out.push_str(&rule_text(&t.kind, domain));
        out.push('\t');
        out.push_str(&t.exponent.to_string());
        out.push('\n');
    }
    out
}

pub fn write_model_file(
    templates: &[RuleTemplate],
    domain: &CategoryDomain,
    path: &Path,
) -> Result<(), DataError> {
    write_atomic(path, &format_model_file(templates, domain))
}

#[derive(Debug, PartialEq)]
enum Term {
    Variable(String),
    Constant(String),
}

#[derive(Debug, PartialEq)]
struct Atom {
    predicate: String,
    args: Vec<Term>,
}

fn parse_atom(text: &str, line: usize) -> Result<Atom, PslError> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| PslError::ParseModel {
        line,
        msg: format!("expected `Predicate(...)`, got `{text}`"),
    })?;
    if !text.ends_with(')') {
        return Err(PslError::ParseModel {
            line,
            msg: format!("unterminated atom `{text}`"),
        });
    }
    let predicate = text[..open].trim().to_string();
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.starts_with('\'') && part.ends_with('\'') && part.len() >= 2 {
            args.push(Term::Constant(part[1..part.len() - 1].to_string()));
        } else if !part.is_empty() && !part.contains('\'') {
            args.push(Term::Variable(part.to_string()));
        } else {
            return Err(PslError::ParseModel {
                line,
                msg: format!("malformed argument `{part}`"),
            });
        }
    }
    Ok(Atom { predicate, args })
}

fn parse_rule_text(text: &str, domain: &CategoryDomain, line: usize) -> Result<RuleKind, PslError> {
    let err = |msg: String| PslError::ParseModel { line, msg };
    if !text.contains("->") && !text.contains("=>") {
        let atom = parse_atom(text, line)?;
        if atom.predicate == "Simplex"
            && atom.args.len() == 1
            && matches!(atom.args[0], Term::Variable(_))
        {
            return Ok(RuleKind::Simplex);
        }
        return Err(err(format!("unrecognized constraint `{text}`")));
    }
    let (body_text, head_text) = text
        .split_once("->")
        .or_else(|| text.split_once("=>"))
        .unwrap();
    let head = parse_atom(head_text, line)?;
    let body: Vec<Atom> = body_text
        .split('&')
        .map(|a| parse_atom(a, line))
        .collect::<Result<_, _>>()?;

    let resolve_cat = |name: &str| {
        domain.index_of(name).ok_or_else(|| PslError::ParseModel {
            line,
            msg: format!("category `{name}` outside the label domain"),
        })
    };

    match (body.as_slice(), &head) {
        // LR(A, 'c') -> HasCat(A, 'c')
        ([lr], h) if lr.predicate == "LR" && h.predicate == "HasCat" => {
            let (Some(Term::Variable(a1)), Some(c1)) = (lr.args.first(), lr.args.get(1)) else {
                return Err(err("LR takes (variable, category)".into()));
            };
            let (Some(Term::Variable(a2)), Some(c2)) = (h.args.first(), h.args.get(1)) else {
                return Err(err("HasCat takes (variable, category)".into()));
            };
            if a1 != a2 || c1 != c2 {
                return Err(err("prior rule must share node and category".into()));
            }
            match c1 {
                Term::Constant(name) => Ok(RuleKind::Prior(resolve_cat(name)?)),
                Term::Variable(_) => Err(err("prior rule needs a category constant".into())),
            }
        }
        // HasCat(A, C|'c') & Link(A, B) -> HasCat(B, C|'c')
        ([b1, b2], h) if h.predicate == "HasCat" => {
            let (hc, link) = if b1.predicate == "HasCat" && b2.predicate == "Link" {
                (b1, b2)
            } else if b2.predicate == "HasCat" && b1.predicate == "Link" {
                (b2, b1)
            } else {
                return Err(err("expected HasCat and Link in the body".into()));
            };
            let (Some(Term::Variable(a)), Some(cat_b)) = (hc.args.first(), hc.args.get(1)) else {
                return Err(err("HasCat takes (variable, category)".into()));
            };
            let (Some(Term::Variable(l1)), Some(Term::Variable(l2))) =
                (link.args.first(), link.args.get(1))
            else {
                return Err(err("Link takes two node variables".into()));
            };
            let (Some(Term::Variable(b_var)), Some(cat_h)) = (h.args.first(), h.args.get(1)) else {
                return Err(err("HasCat takes (variable, category)".into()));
            };
            if a != l1 || b_var != l2 || a == b_var {
                return Err(err(
                    "propagation must run from the Link source to its target".into(),
                ));
            }
            if cat_b != cat_h {
                return Err(err("body and head categories must match".into()));
            }
            match cat_b {
                Term::Variable(_) => Ok(RuleKind::GeneralPropagation),
                Term::Constant(name) => Ok(RuleKind::CategoryPropagation(resolve_cat(name)?)),
            }
        }
        _ => Err(err(format!("unrecognized rule `{text}`"))),
    }
}

pub fn parse_model_file(
    text: &str,
    domain: &CategoryDomain,
) -> Result<Vec<RuleTemplate>, PslError> {
    let mut templates = Vec::new();
    for (line, raw) in crate::data::text_data_lines(text) {
        let fields: Vec<&str> = raw.split('\t').map(|f| f.trim()).collect();
        if fields.len() != 3 {
            return Err(PslError::ParseModel {
                line,
                msg: "expected `weight<TAB>rule<TAB>exponent`".into(),
            });
        }
        let weight = if fields[0] == "HARD" {
            Weight::Hard
        } else {
            Weight::Soft(fields[0].parse().map_err(|_| PslError::ParseModel {
                line,
                msg: format!("weight `{}` is not a number", fields[0]),
            })?)
        };
        let exponent: u8 = fields[2].parse().map_err(|_| PslError::ParseModel {
            line,
            msg: format!("exponent `{}` is not an integer", fields[2]),
        })?;
        let template = RuleTemplate {
            kind: parse_rule_text(fields[1], domain, line)?,
            weight,
            exponent,
        };
        template.validate()?;
        templates.push(template);
    }
    Ok(templates)
}

pub fn load_model_file(
    path: &Path,
    domain: &CategoryDomain,
) -> Result<Vec<RuleTemplate>, PslError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_file(&text, domain)
}
