//! Pairwise association bounds extracted from strong ground rules.
//!
//! Every two-variable hinge potential whose weight exceeds the scan threshold
//! describes a half-plane the pair (y_a, y_b) strongly prefers; when its two
//! coefficients have equal magnitude that half-plane is a bound on either the
//! sum `y_a + y_b` or the difference `y_a - y_b`. Two-variable hard equalities
//! pin a sum or difference outright. Collecting these per pair yields, for each
//! associated pair, an interval for the sum and one for the difference; a pair
//! whose interval is narrow enough is effectively rigid and worth proposing
//! jointly.
//!
//! Bounds are stored under the canonical key `(lo, hi)` with `lo < hi`:
//! the sum interval starts at `[0, 2]` and the difference interval (for
//! `y_lo - y_hi`) at `[-1, 1]`, each tightened as rules are scanned.

use std::collections::BTreeMap;

use super::super::psl::GroundRuleSet;

/// Closed interval; may become empty (`min > max`) under contradictory rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

const SUM_INIT: Range = Range { min: 0.0, max: 2.0 };
const DIFF_INIT: Range = Range {
    min: -1.0,
    max: 1.0,
};

/// Relative tolerance for the equal-magnitude test on coefficient pairs.
const MAGNITUDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct AssociationBounds {
    /// Bounds on `y_lo + y_hi`, keyed by `(lo, hi)` with `lo < hi`.
    sum: BTreeMap<(u32, u32), Range>,
    /// Bounds on `y_lo - y_hi`, keyed the same way.
    diff: BTreeMap<(u32, u32), Range>,
    /// Adjacency over all bounded pairs, ascending neighbour lists.
    neighbors: BTreeMap<u32, Vec<u32>>,
}

impl AssociationBounds {
    /// Scans `rules` and keeps every pairwise bound contributed by a soft
    /// potential with `weight > weight_threshold` or by a two-variable hard
    /// constraint. Potentials whose two coefficients differ in magnitude do
    /// not describe a sum/difference bound and are skipped.
    pub fn from_rules(rules: &GroundRuleSet, weight_threshold: f64) -> Self {
        let mut out = AssociationBounds::default();
        for p in &rules.potentials {
            // Negated so a NaN threshold conservatively skips everything
            // (no pair is ever treated as strongly coupled).
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(p.weight > weight_threshold) || p.terms.len() != 2 {
                continue;
            }
            let (i, ci) = p.terms[0];
            let (j, cj) = p.terms[1];
            if (ci.abs() - cj.abs()).abs() > MAGNITUDE_TOL * ci.abs().max(cj.abs()) {
                continue;
            }
            let m = ci.abs();
            if m == 0.0 {
                continue;
            }
            // Satisfied region: ci*yi + cj*yj + constant <= 0, i.e. after
            // normalising by the common magnitude, si*yi + sj*yj <= c.
            let c = -p.constant / m;
            out.apply_upper(i, ci > 0.0, j, cj > 0.0, c);
        }
        for hc in &rules.constraints {
            if hc.terms.len() != 2 {
                continue;
            }
            let (i, ci) = hc.terms[0];
            let (j, cj) = hc.terms[1];
            if (ci.abs() - cj.abs()).abs() > MAGNITUDE_TOL * ci.abs().max(cj.abs()) {
                continue;
            }
            let m = ci.abs();
            if m == 0.0 {
                continue;
            }
            let v = hc.rhs / m;
            // Equality is the pair of inequalities <= v and >= v.
            out.apply_upper(i, ci > 0.0, j, cj > 0.0, v);
            out.apply_upper(i, ci < 0.0, j, cj < 0.0, -v);
        }
        out.rebuild_neighbors();
        out
    }

    /// Records `si*yi + sj*yj <= c` where the signs are given as booleans
    /// (`true` = +1), tightening the canonical sum or difference interval.
    fn apply_upper(&mut self, i: u32, si_pos: bool, j: u32, sj_pos: bool, c: f64) {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (slo_pos, shi_pos) = if i < j {
            (si_pos, sj_pos)
        } else {
            (sj_pos, si_pos)
        };
        match (slo_pos, shi_pos) {
            (true, true) => {
                let r = self.sum.entry((lo, hi)).or_insert(SUM_INIT);
                r.max = r.max.min(c);
            }
            (false, false) => {
                let r = self.sum.entry((lo, hi)).or_insert(SUM_INIT);
                r.min = r.min.max(-c);
            }
            (true, false) => {
                let r = self.diff.entry((lo, hi)).or_insert(DIFF_INIT);
                r.max = r.max.min(c);
            }
            (false, true) => {
                let r = self.diff.entry((lo, hi)).or_insert(DIFF_INIT);
                r.min = r.min.max(-c);
            }
        }
    }

    fn rebuild_neighbors(&mut self) {
        self.neighbors.clear();
        for &(a, b) in self.sum.keys().chain(self.diff.keys()) {
            self.neighbors.entry(a).or_default().push(b);
            self.neighbors.entry(b).or_default().push(a);
        }
        for list in self.neighbors.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
    }

    /// Interval for `y_a + y_b`, if the pair carries a sum bound.
    pub fn sum_range(&self, a: u32, b: u32) -> Option<Range> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.sum.get(&key).copied()
    }

    /// Interval for `y_a - y_b` in that orientation, if the pair carries a
    /// difference bound.
    pub fn diff_range(&self, a: u32, b: u32) -> Option<Range> {
        if a < b {
            self.diff.get(&(a, b)).copied()
        } else {
            self.diff.get(&(b, a)).map(|r| Range {
                min: -r.max,
                max: -r.min,
            })
        }
    }

    /// All bounded pairs in canonical ascending order.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        let mut keys: Vec<(u32, u32)> = self.sum.keys().chain(self.diff.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// Pairs whose sum or difference interval has width at most
    /// `range_threshold`.
    pub fn tight_pairs(&self, range_threshold: f64) -> Vec<(u32, u32)> {
        self.pairs()
            .into_iter()
            .filter(|&(a, b)| {
                let tight_sum = self
                    .sum_range(a, b)
                    .is_some_and(|r| r.width() <= range_threshold);
                let tight_diff = self
                    .diff_range(a, b)
                    .is_some_and(|r| r.width() <= range_threshold);
                tight_sum || tight_diff
            })
            .collect()
    }

    /// Variables sharing at least one bound with `rv`.
    pub fn neighbors(&self, rv: u32) -> &[u32] {
        self.neighbors.get(&rv).map_or(&[], |v| v.as_slice())
    }

    pub fn is_associated(&self, a: u32, b: u32) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.sum.contains_key(&key) || self.diff.contains_key(&key)
    }

    /// Interval implied for `y_j` once the associated variable `a` has taken
    /// value `t`, intersecting the sum and difference bounds of the pair.
    /// `None` when the pair carries no bound at all.
    pub fn implied_range(&self, j: u32, a: u32, t: f64) -> Option<(f64, f64)> {
        let mut any = false;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        if let Some(r) = self.sum_range(j, a) {
            any = true;
            lo = lo.max(r.min - t);
            hi = hi.min(r.max - t);
        }
        if let Some(r) = self.diff_range(j, a) {
            // r bounds y_j - t, so y_j lies in [t + min, t + max].
            any = true;
            lo = lo.max(t + r.min);
            hi = hi.min(t + r.max);
        }
        if any {
            Some((lo, hi))
        } else {
            None
        }
    }
}
