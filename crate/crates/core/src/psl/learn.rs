//! Weight learning by MAP-approximate likelihood ascent.
//!
//! The likelihood gradient for a template's weight is the expected total
//! distance under the model minus the total distance under the training truth;
//! the expectation is approximated by the current MAP state. Rising weights
//! therefore mean the MAP violates the template more than the truth does.
//! Ground-truth labels must exist for every rv node, so callers ground with a
//! split that hides nodes whose labels the graph actually carries.

use crate::data::AttributedGraph;

use super::ground::{one_hot_assignment, GroundRuleSet};
use super::map::{map_inference, MapConfig};
use super::model::{RuleTemplate, Weight};
use super::PslError;

#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub steps: usize,
    pub step_size: f64,
    pub map: MapConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            steps: 20,
            step_size: 0.1,
            map: MapConfig::default(),
        }
    }
}

/// Returns `templates` with updated soft weights (hard templates untouched).
pub fn learn_weights(
    templates: &[RuleTemplate],
    rules: &GroundRuleSet,
    graph: &AttributedGraph,
    config: &LearnConfig,
) -> Result<Vec<RuleTemplate>, PslError> {
    let truth = one_hot_assignment(rules, graph);
    rules.check_feasible(&truth)?;
    let d_truth = rules.template_distances(&truth, templates.len());

    let mut learned = templates.to_vec();
    let mut working = rules.clone();
    for _ in 0..config.steps {
        working.set_weights_from(&learned);
        let map = map_inference(&working, &config.map)?;
        let d_map = working.template_distances(&map.assignment, templates.len());
        for (t, template) in learned.iter_mut().enumerate() {
            if let Weight::Soft(w) = template.weight {
                let updated = w + config.step_size * (d_map[t] - d_truth[t]);
                template.weight = Weight::Soft(updated.max(0.0));
            }
        }
    }
    Ok(learned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_graph_from_text, load_split_from_text};
    use crate::prior::PriorTable;
    use crate::psl::ground::ground;
    use crate::psl::model::{build_model, ModelConfig, RuleKind};

    fn soft(t: &RuleTemplate) -> f64 {
        t.soft_weight().unwrap()
    }

    #[test]
    fn truth_equal_to_map_is_a_fixed_point() {
        // v's true label matches the propagated and prior-preferred state, so
        // the MAP equals the truth and every gradient is zero. (w is an
        // isolated observed node that keeps c1 in the domain.)
        let g = load_graph_from_text("u\tv\n", "u\tc0\nv\tc0\nw\tc1\n", None).unwrap();
        let s = load_split_from_text("u\nw\n", &g).unwrap();
        let priors = PriorTable::from_rows(vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0], 2);
        let templates = build_model(2, &ModelConfig::default()).unwrap();
        let rules = ground(&templates, &g, &s, &priors).unwrap();
        let learned = learn_weights(&templates, &rules, &g, &LearnConfig::default()).unwrap();
        for (before, after) in templates.iter().zip(&learned) {
            if let Some(w0) = before.soft_weight() {
                assert!(
                    (soft(after) - w0).abs() < 1e-6,
                    "weight moved at a fixed point: {w0} -> {}",
                    soft(after)
                );
            }
        }
    }

    #[test]
    fn template_violated_more_by_truth_loses_weight() {
        // u observed c0, v truly c1: the truth violates propagation harder
        // than the MAP (which copies u), so propagation weights must drop.
        let g = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\n", None).unwrap();
        let s = load_split_from_text("u\n", &g).unwrap();
        let priors = PriorTable::from_rows(vec![0.5; 4], 2);
        let templates = build_model(2, &ModelConfig::default()).unwrap();
        let rules = ground(&templates, &g, &s, &priors).unwrap();
        let config = LearnConfig {
            steps: 1,
            step_size: 0.1,
            map: MapConfig::default(),
        };
        let learned = learn_weights(&templates, &rules, &g, &config).unwrap();
        assert!(soft(&learned[0]) < soft(&templates[0]));
    }

    #[test]
    fn weights_never_go_negative() {
        let g = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\n", None).unwrap();
        let s = load_split_from_text("u\n", &g).unwrap();
        let priors = PriorTable::from_rows(vec![0.5; 4], 2);
        let templates = build_model(2, &ModelConfig::default()).unwrap();
        let rules = ground(&templates, &g, &s, &priors).unwrap();
        let config = LearnConfig {
            steps: 30,
            step_size: 5.0,
            map: MapConfig::default(),
        };
        let learned = learn_weights(&templates, &rules, &g, &config).unwrap();
        for t in &learned {
            if let Some(w) = t.soft_weight() {
                assert!(w >= 0.0);
            }
        }
    }

    #[test]
    fn trajectory_matches_independent_update_rule() {
        let g = load_graph_from_text("u\tv\nv\tw\n", "u\tc0\nv\tc1\nw\tc0\n", None).unwrap();
        let s = load_split_from_text("u\n", &g).unwrap();
        let priors = PriorTable::from_rows(vec![0.5, 0.5, 0.3, 0.7, 0.8, 0.2], 2);
        let templates = build_model(2, &ModelConfig::default()).unwrap();
        let rules = ground(&templates, &g, &s, &priors).unwrap();
        let config = LearnConfig {
            steps: 3,
            step_size: 0.25,
            map: MapConfig::default(),
        };
        let learned = learn_weights(&templates, &rules, &g, &config).unwrap();

        // Re-run the update rule directly: same MAP solver, but the loop and
        // gradient arithmetic written out independently.
        let truth = one_hot_assignment(&rules, &g);
        let d_truth = rules.template_distances(&truth, templates.len());
        let mut weights: Vec<Option<f64>> = templates.iter().map(|t| t.soft_weight()).collect();
        let mut working = rules.clone();
        for _ in 0..3 {
            for (p, pot) in working.potentials.iter_mut().enumerate() {
                let t = rules.potentials[p].template.unwrap();
                if let Some(w) = weights[t] {
                    pot.weight = w;
                }
            }
            let map = map_inference(&working, &config.map).unwrap();
            let d_map = working.template_distances(&map.assignment, templates.len());
            for (t, w) in weights.iter_mut().enumerate() {
                if let Some(wv) = w {
                    *w = Some((*wv + 0.25 * (d_map[t] - d_truth[t])).max(0.0));
                }
            }
        }
        for (t, expect) in learned.iter().zip(&weights) {
            match (t.soft_weight(), expect) {
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-12, "trajectories diverged: {a} vs {b}")
                }
                (None, None) => {}
                other => panic!("weight kinds diverged: {other:?}"),
            }
        }
        // And the propagation weight must actually have moved on this data.
        assert!(
            (soft(&learned[0]) - soft(&templates[0])).abs() > 1e-6,
            "trace test exercised no movement"
        );
    }

    #[test]
    fn hard_templates_are_untouched() {
        let g = load_graph_from_text("u\tv\n", "u\tc0\nv\tc1\n", None).unwrap();
        let s = load_split_from_text("u\n", &g).unwrap();
        let priors = PriorTable::from_rows(vec![0.5; 4], 2);
        let templates = build_model(2, &ModelConfig::default()).unwrap();
        let rules = ground(&templates, &g, &s, &priors).unwrap();
        let learned = learn_weights(&templates, &rules, &g, &LearnConfig::default()).unwrap();
        let hard = learned
            .iter()
            .find(|t| matches!(t.kind, RuleKind::Simplex))
            .unwrap();
        assert_eq!(hard.weight, Weight::Hard);
    }
}
