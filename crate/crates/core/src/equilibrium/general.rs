//! Numerical equilibrium for fixed-lock games by Kelley's cutting-plane
//! method on the defender's convex piecewise-linear loss.
//!
//! Each greedy best response at a trial mix yields, per signal class, a
//! linear minorant of that class's loss. The master problem minimizes the
//! sum of per-class maxima of these minorants over the simplex, which gives a
//! lower bound; every evaluated mix gives an upper bound.

use std::collections::HashSet;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{LbtError, Result};
use crate::model::{Allocation, DefenderMix, GameSpec};

use super::table::GameTable;
use super::{indifference, EquilibriumReport};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralOptions {
    /// Target gap between the upper and lower bounds on the value.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step of the single-coordinate moves in the stationarity check; zero
    /// skips the check.
    pub stationarity_step: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions {
            tol: 1e-6,
            max_iterations: 2000,
            stationarity_step: 1e-3,
        }
    }
}

/// Weights below this are dropped from the returned mix.
const WEIGHT_FLOOR: f64 = 1e-12;

pub fn solve_general(spec: &GameSpec, tol: f64) -> Result<EquilibriumReport> {
    solve_general_with(
        spec,
        &GeneralOptions {
            tol,
            ..GeneralOptions::default()
        },
    )
}

pub fn solve_general_with(spec: &GameSpec, opts: &GeneralOptions) -> Result<EquilibriumReport> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(LbtError::invalid("tol", "must be positive"));
    }
    let table = GameTable::new(spec)?;
    let dim = table.configs.len();
    let classes = table.classes.len();

    let mut cuts: Vec<Vec<(Allocation, Vec<f64>)>> = vec![Vec::new(); classes];
    let mut seen: Vec<HashSet<Vec<u32>>> = vec![HashSet::new(); classes];
    let mut point = vec![1.0 / dim as f64; dim];
    let mut best = (f64::INFINITY, point.clone());
    let mut lower = f64::NEG_INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let (loss, allocs) = table.evaluate(&point);
        if loss < best.0 {
            best = (loss, point.clone());
        }
        for (ci, alloc) in allocs.into_iter().enumerate() {
            if seen[ci].insert(alloc.0.clone()) {
                let cut = table.cut(&table.classes[ci], &alloc);
                cuts[ci].push((alloc, cut));
            }
        }
        if dim == 1 {
            lower = best.0;
            break;
        }
        let (bound, next) = master(&table, &cuts)?;
        lower = lower.max(bound);
        if best.0 - lower <= opts.tol {
            break;
        }
        point = next;
    }

    let mut weights = best.1;
    for w in weights.iter_mut() {
        if *w < WEIGHT_FLOOR {
            *w = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let value = table.loss(&weights);
    let mix = table.mix_of(&weights)?;
    let gap = (value - lower).max(0.0);

    let extra: Vec<Vec<Allocation>> = cuts
        .iter()
        .map(|list| list.iter().map(|(a, _)| a.clone()).collect())
        .collect();
    let ind = indifference(&table, &weights, &extra)?;
    let stationary = if opts.stationarity_step > 0.0 {
        let worst = table_stationarity(&table, &weights, value, opts.stationarity_step);
        Some(worst <= opts.tol)
    } else {
        None
    };
    let report = EquilibriumReport {
        lock_marginals: mix.lock_marginals(table.n),
        best_response: super::best_response(&mix, spec).ok(),
        mix,
        value,
        per_site_loss: ind.per_site_loss,
        protected_set: ind.protected_set,
        protected_loss: ind.protected_loss,
        indifference_gap: ind.gap,
        attacker: Some(ind.attacker),
        breakpoints: None,
        k_star: None,
        iterations,
        lower_bound: lower.min(value),
        stationary,
    };
    if gap > opts.tol {
        return Err(LbtError::NonConvergence {
            iterations,
            gap,
            incumbent: Box::new(report),
        });
    }
    Ok(report)
}

/// Solves the master problem: minimize the sum over classes of the largest
/// cut, over the simplex. Returns the bound and its minimizer.
fn master(table: &GameTable, cuts: &[Vec<(Allocation, Vec<f64>)>]) -> Result<(f64, Vec<f64>)> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let b: Vec<_> = (0..table.configs.len())
        .map(|_| problem.add_var(0.0, (0.0, 1.0)))
        .collect();
    let simplex: Vec<_> = b.iter().map(|&v| (v, 1.0)).collect();
    problem.add_constraint(simplex.as_slice(), ComparisonOp::Eq, 1.0);
    for list in cuts {
        let t = problem.add_var(1.0, (0.0, f64::INFINITY));
        for (_, cut) in list {
            let mut expr = vec![(t, 1.0)];
            expr.extend(b.iter().zip(cut).filter(|e| *e.1 != 0.0).map(|(&v, &g)| (v, -g)));
            problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
        }
    }
    let solution = problem
        .solve()
        .map_err(|e| LbtError::Lp(e.to_string()))?
        .into_solution()
        .map_err(|e| LbtError::Lp(format!("{e:?}")))?;
    let mut point: Vec<f64> = b.iter().map(|&v| solution.var_value(v).max(0.0)).collect();
    let total: f64 = point.iter().sum();
    point.iter_mut().for_each(|w| *w /= total);
    Ok((solution.objective(), point))
}

/// Largest loss decrease over single-coordinate simplex moves of size `step`:
/// towards each vertex, and away from each vertex in the support.
fn table_stationarity(table: &GameTable, b: &[f64], value: f64, step: f64) -> f64 {
    let dim = b.len();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..dim {
        let toward: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(j, &w)| (1.0 - step) * w + if i == j { step } else { 0.0 })
            .collect();
        worst = worst.max(value - table.loss(&toward));
        if b[i] > 0.0 && b[i] < 1.0 {
            let h = step.min(b[i]);
            let away: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, &w)| if i == j { (w - h) / (1.0 - h) } else { w / (1.0 - h) })
                .collect();
            worst = worst.max(value - table.loss(&away));
        }
    }
    worst
}

/// Largest decrease of the defender's loss achievable by moving `step` of
/// probability towards, or away from, a single lock configuration.
pub fn stationarity_violation(spec: &GameSpec, mix: &DefenderMix, step: f64) -> Result<f64> {
    if !(step > 0.0 && step < 1.0) {
        return Err(LbtError::invalid("step", "must lie in (0, 1)"));
    }
    let table = GameTable::new(spec)?;
    let b = table.weights_of(mix)?;
    let value = table.loss(&b);
    Ok(table_stationarity(&table, &b, value, step))
}
