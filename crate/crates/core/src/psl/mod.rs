//! Hinge-loss rule model over graph labels.
//!
//! A model is a list of weighted rule templates. Grounding instantiates them
//! against a graph, its observation split, and a prior table, folding every
//! observed atom into the potentials' constants; the result is a set of
//! weighted hinge potentials `w * max(0, c.y + d)^p` over [0,1] random
//! variables plus per-node hard sum-to-one constraints. The unnormalized
//! density of an assignment `y` is `exp(-energy(y))`, so MAP inference
//! minimizes the energy subject to the constraints.

mod ground;
mod learn;
mod map;
mod model;

pub use ground::{
    ground, load_ground_from_text, load_ground_set, one_hot_assignment, GroundRuleSet,
    HardConstraint, Potential, FEASIBILITY_TOL,
};
pub use learn::{learn_weights, LearnConfig};
pub use map::{map_inference, MapConfig, MapResult};
pub use model::{
    build_model, format_model_file, load_model_file, parse_model_file, write_model_file,
    ModelConfig, RuleKind, RuleTemplate, Weight,
};

use thiserror::Error;

use crate::data::DataError;

#[derive(Debug, Error)]
pub enum PslError {
    #[error("template weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("hinge exponent must be 1 or 2, got {0}")]
    BadExponent(u8),
    #[error("model file line {line}: {msg}")]
    ParseModel { line: usize, msg: String },
    #[error("prior table shape ({nodes} nodes, {kappa} categories) does not match the graph")]
    PriorShape { nodes: usize, kappa: usize },
    #[error("assignment violates hard constraint {index} by {violation:.3e}")]
    Infeasible { index: usize, violation: f64 },
    #[error("assignment value {value} at rv {rv} lies outside [0, 1]")]
    OutOfDomain { rv: u32, value: f64 },
    #[error("assignment length {got} does not match rv count {expected}")]
    AssignmentLength { got: usize, expected: usize },
    #[error("rv {rv} appears in {count} hard constraints; inference supports at most one per rv")]
    OverlappingConstraints { rv: u32, count: usize },
    #[error("hard constraint {index} is not a unit-coefficient sum-to-one constraint")]
    UnsupportedConstraint { index: usize },
    #[error("potential {index} has no rv terms")]
    ConstantPotential { index: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// `max(0, arg)^p` for p in {1, 2}.
#[inline]
pub fn hinge_distance(arg: f64, exponent: u8) -> f64 {
    let h = arg.max(0.0);
    match exponent {
        1 => h,
        _ => h * h,
    }
}

#[cfg(test)]
mod tests {
    use super::hinge_distance;

    #[test]
    fn hinge_examples() {
        // Fully violated implication: body 1, head 0.
        assert_eq!(hinge_distance(1.0 + 1.0 - 1.0 - 0.0, 1), 1.0);
        // Satisfied: body 0.2, head 0.9.
        assert_eq!(hinge_distance(0.2 + 1.0 - 1.0 - 0.9, 1), 0.0);
        // Squared: bodies 0.8 and 0.9, head 0.4 -> max(0, 0.3)^2.
        let arg: f64 = 0.8 + 0.9 - 1.0 - 0.4;
        assert!((hinge_distance(arg, 2) - 0.09).abs() < 1e-12);
    }
}
