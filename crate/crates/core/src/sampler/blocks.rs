//! Partitioning random variables into near-rigid proposal blocks.
//!
//! Variables joined by a tight association bound move almost in lockstep, so a
//! sampler that proposes them one at a time stalls: each single-variable move
//! that respects the tight bound is microscopic. The partition groups such
//! variables transitively; the chain then proposes a whole block at once.

use super::bounds::AssociationBounds;
use super::union_find::UnionFind;

#[derive(Debug, Clone)]
pub struct BlockPartition {
    /// Disjoint blocks covering every variable id in `0..rv_count`; each block
    /// ascending, blocks ordered by smallest member. Singletons included.
    pub blocks: Vec<Vec<u32>>,
    /// The tight canonical pairs that drove the merging.
    pub tight_pairs: Vec<(u32, u32)>,
}

impl BlockPartition {
    pub fn singletons(rv_count: usize) -> Self {
        BlockPartition {
            blocks: (0..rv_count as u32).map(|rv| vec![rv]).collect(),
            tight_pairs: Vec::new(),
        }
    }

    /// Merges every pair whose sum or difference interval is at most
    /// `range_threshold` wide, transitively.
    pub fn from_bounds(rv_count: usize, bounds: &AssociationBounds, range_threshold: f64) -> Self {
        let tight = bounds.tight_pairs(range_threshold);
        let mut uf = UnionFind::new(rv_count);
        for &(a, b) in &tight {
            uf.union(a, b);
        }
        BlockPartition {
            blocks: uf.sets(),
            tight_pairs: tight,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::super::psl::{GroundRuleSet, Potential};
    use super::*;

    fn soft_pair(a: u32, b: u32, weight: f64) -> Vec<Potential> {
        // Two opposed hinges pinning y_a + y_b = 1.
        vec![
            Potential {
                weight,
                exponent: 1,
                terms: vec![(a, 1.0), (b, 1.0)],
                constant: -1.0,
                template: None,
            },
            Potential {
                weight,
                exponent: 1,
                terms: vec![(a, -1.0), (b, -1.0)],
                constant: 1.0,
                template: None,
            },
        ]
    }

    fn model(n: u32, potentials: Vec<Potential>) -> GroundRuleSet {
        let rvs = (0..n).map(|i| (i, 0)).collect();
        GroundRuleSet::from_parts(rvs, 2, potentials, vec![]).unwrap()
    }

    #[test]
    fn chain_of_tight_pairs_merges_transitively() {
        // Pairs (0,1), (1,2), (2,3) pinned; variable 4 untouched.
        let mut pots = soft_pair(0, 1, 10.0);
        pots.extend(soft_pair(1, 2, 10.0));
        pots.extend(soft_pair(2, 3, 10.0));
        let rules = model(5, pots);
        let bounds = AssociationBounds::from_rules(&rules, 2.0);
        let part = BlockPartition::from_bounds(rules.rv_count(), &bounds, 0.1);
        assert_eq!(part.blocks, vec![vec![0, 1, 2, 3], vec![4]]);
        assert_eq!(part.tight_pairs, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn weak_or_loose_pairs_stay_singletons() {
        // Weight below the scan threshold: not even bounded.
        let rules = model(3, soft_pair(0, 1, 1.0));
        let bounds = AssociationBounds::from_rules(&rules, 2.0);
        let part = BlockPartition::from_bounds(rules.rv_count(), &bounds, 0.1);
        assert_eq!(part.blocks, vec![vec![0], vec![1], vec![2]]);

        // Strong one-sided hinge: bounded but the interval is too wide.
        let one_sided = vec![Potential {
            weight: 10.0,
            exponent: 1,
            terms: vec![(0, 1.0), (1, 1.0)],
            constant: -1.0,
            template: None,
        }];
        let rules = model(3, one_sided);
        let bounds = AssociationBounds::from_rules(&rules, 2.0);
        let part = BlockPartition::from_bounds(rules.rv_count(), &bounds, 0.1);
        assert_eq!(part.blocks.len(), 3);
        assert!(part.tight_pairs.is_empty());
    }

    #[test]
    fn singleton_constructor_covers_every_variable() {
        let part = BlockPartition::singletons(4);
        assert_eq!(part.blocks, vec![vec![0], vec![1], vec![2], vec![3]]);
    }
}
