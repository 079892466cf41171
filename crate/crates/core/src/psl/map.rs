//! Convex MAP inference.
//!
//! Consensus ADMM: every potential owns a local copy of its variables with a
//! closed-form prox step (the hinge argument is linear, so the prox is either
//! the unconstrained point, a shifted point in the active region, or the
//! projection onto the hinge boundary), and the consensus step averages copies
//! and projects each hard-constraint group onto its simplex. Iteration order
//! is fixed, so results are deterministic. The returned assignment is the
//! best-energy feasible consensus iterate, which can only improve on the last.

use super::ground::GroundRuleSet;
use super::PslError;

#[derive(Debug, Clone)]
pub struct MapConfig {
    /// Residual threshold per copy; iteration stops when both the primal and
    /// dual residual RMS fall below it.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            tolerance: 1e-6,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub assignment: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    /// False when max_iters ran out before the residuals crossed the
    /// tolerance; the assignment is still the best feasible iterate seen.
    pub converged: bool,
}

/// Projects `v` onto the simplex `{ x >= 0, sum x = rhs }` in place.
fn project_simplex(v: &mut [f64], rhs: f64) {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    // tau is the threshold for the largest active prefix: the last j where
    // sorted[j] > (prefix_sum(j) - rhs) / j; once the test fails it fails for
    // every longer prefix.
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - rhs;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - rhs) / (i + 1) as f64;
        if s <= t {
            break;
        }
        tau = t;
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

fn validate_constraints(rules: &GroundRuleSet) -> Result<(), PslError> {
    for (i, c) in rules.constraints.iter().enumerate() {
        let unit = c.terms.iter().all(|&(_, coef)| (coef - 1.0).abs() < 1e-12);
        if !unit || (c.rhs - 1.0).abs() > 1e-9 || c.terms.is_empty() {
            return Err(PslError::UnsupportedConstraint { index: i });
        }
    }
    Ok(())
}

pub fn map_inference(rules: &GroundRuleSet, config: &MapConfig) -> Result<MapResult, PslError> {
    validate_constraints(rules)?;
    let n = rules.rv_count();
    if n == 0 {
        return Ok(MapResult {
            assignment: vec![],
            energy: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let rho = 1.0;
    let mut y = vec![0.5; n];
    for c in &rules.constraints {
        let share = c.rhs / c.terms.len() as f64;
        for &(rv, _) in &c.terms {
            y[rv as usize] = share;
        }
    }

    let potentials = &rules.potentials;
    let mut z: Vec<Vec<f64>> = potentials
        .iter()
        .map(|p| p.terms.iter().map(|&(rv, _)| y[rv as usize]).collect())
        .collect();
    let mut u: Vec<Vec<f64>> = potentials
        .iter()
        .map(|p| vec![0.0; p.terms.len()])
        .collect();
    let norm2: Vec<f64> = potentials
        .iter()
        .map(|p| p.terms.iter().map(|&(_, c)| c * c).sum())
        .collect();
    let total_copies: usize = potentials.iter().map(|p| p.terms.len()).sum();
    let scale = (total_copies.max(1) as f64).sqrt();

    let mut best_y = y.clone();
    let mut best_energy = rules.energy_unchecked(&y);
    let mut iterations = 0;
    let mut converged = total_copies == 0;

    let mut v_buf: Vec<f64> = Vec::with_capacity(2);
    for iter in 0..config.max_iters {
        if converged {
            break;
        }
        iterations = iter + 1;

        // Local prox per potential: argmin_z w*hinge(c.z + d)^p + rho/2 |z - v|^2.
        for (r, p) in potentials.iter().enumerate() {
            v_buf.clear();
            v_buf.extend(
                p.terms
                    .iter()
                    .zip(&u[r])
                    .map(|(&(rv, _), &ur)| y[rv as usize] - ur),
            );
            let a: f64 = p
                .terms
                .iter()
                .zip(&v_buf)
                .map(|(&(_, c), &v)| c * v)
                .sum::<f64>()
                + p.constant;
            let zr = &mut z[r];
            if a <= 0.0 || p.weight == 0.0 {
                zr.copy_from_slice(&v_buf);
            } else if p.exponent == 2 {
                let s = a / (1.0 + 2.0 * p.weight * norm2[r] / rho);
                let step = 2.0 * p.weight * s / rho;
                for ((zi, &vi), &(_, c)) in zr.iter_mut().zip(&v_buf).zip(&p.terms) {
                    *zi = vi - step * c;
                }
            } else {
                let delta = p.weight / rho;
                if a - delta * norm2[r] >= 0.0 {
                    for ((zi, &vi), &(_, c)) in zr.iter_mut().zip(&v_buf).zip(&p.terms) {
                        *zi = vi - delta * c;
                    }
                } else {
                    let step = a / norm2[r];
                    for ((zi, &vi), &(_, c)) in zr.iter_mut().zip(&v_buf).zip(&p.terms) {
                        *zi = vi - step * c;
                    }
                }
            }
        }

        // Consensus: average copies per rv, then restore feasibility.
        let y_old = y.clone();
        let mut acc = vec![0.0; n];
        let mut cnt = vec![0u32; n];
        for (r, p) in potentials.iter().enumerate() {
            for (i, &(rv, _)) in p.terms.iter().enumerate() {
                acc[rv as usize] += z[r][i] + u[r][i];
                cnt[rv as usize] += 1;
            }
        }
        for i in 0..n {
            if cnt[i] > 0 {
                y[i] = acc[i] / cnt[i] as f64;
            }
        }
        for c in &rules.constraints {
            let mut group: Vec<f64> = c.terms.iter().map(|&(rv, _)| y[rv as usize]).collect();
            project_simplex(&mut group, c.rhs);
            for (&(rv, _), g) in c.terms.iter().zip(group) {
                y[rv as usize] = g;
            }
        }
        for (i, yi) in y.iter_mut().enumerate() {
            if rules.constraint_of(i as u32).is_none() {
                *yi = yi.clamp(0.0, 1.0);
            }
        }

        // Duals and residuals.
        let mut primal2 = 0.0;
        for (r, p) in potentials.iter().enumerate() {
            for (i, &(rv, _)) in p.terms.iter().enumerate() {
                let diff = z[r][i] - y[rv as usize];
                u[r][i] += diff;
                primal2 += diff * diff;
            }
        }
        let mut dual2 = 0.0;
        for i in 0..n {
            let d = rho * (y[i] - y_old[i]);
            dual2 += d * d * cnt[i] as f64;
        }

        let energy = rules.energy_unchecked(&y);
        if energy < best_energy {
            best_energy = energy;
            best_y = y.clone();
        }

        if primal2.sqrt() <= config.tolerance * scale && dual2.sqrt() <= config.tolerance * scale {
            converged = true;
        }
    }

    debug_assert!(rules.check_feasible(&best_y).is_ok());
    Ok(MapResult {
        assignment: best_y,
        energy: best_energy,
        iterations,
        converged,
    })
}
