//! Defender-side analysis: the attacker's best response to any lock mix,
//! the loss it induces, and equilibrium solvers.
//!
//! The attacker's problem for a fixed signal is separable with diminishing
//! returns per site, so placing bombs one at a time on the best marginal
//! gain is exactly optimal.

mod closed_form;
mod general;
pub(crate) mod table;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{LbtError, Result};
use crate::model::{explosion_prob, Allocation, DefenderMix, GameSpec, Signal};
use crate::posterior::joint_no_lock;

pub use closed_form::{marginal_decomposition, solve_2x1, solve_noninformative, two_site_damage, TwoSiteBreakpoints};
pub use general::{solve_general, solve_general_with, stationarity_violation, GeneralOptions};
pub use table::{MAX_ALLOCATIONS, MAX_TABLE_SITES};

use table::GameTable;

/// Sites with a prior lock probability above this are treated as protected.
pub const PROTECTED_THRESHOLD: f64 = 1e-6;

/// Largest site count for which [`best_response`] enumerates signals.
pub const MAX_SIGNAL_SITES: usize = 16;

/// Places `m` bombs one by one on the site with the largest marginal gain
/// `weights_i * (1-p)^u_i * p`; ties go to the lowest index.
pub fn greedy_allocation(weights: &[f64], p: f64, m: u32) -> Allocation {
    let n = weights.len();
    let mut bombs = vec![0u32; n];
    if n == 0 {
        return Allocation(bombs);
    }
    let q = 1.0 - p;
    let mut gains: Vec<f64> = weights.iter().map(|w| w * p).collect();
    for _ in 0..m {
        let mut best = 0;
        for i in 1..n {
            if gains[i] > gains[best] {
                best = i;
            }
        }
        bombs[best] += 1;
        gains[best] *= q;
    }
    Allocation(bombs)
}

/// Every allocation of `m` bombs within `tol` of the optimum, up to `cap`
/// of them. The lowest-index greedy allocation comes first.
pub(crate) fn near_optimal_allocations(weights: &[f64], p: f64, m: u32, tol: f64, cap: usize) -> Vec<Allocation> {
    let greedy = greedy_allocation(weights, p, m);
    let n = weights.len();
    if m == 0 || n <= 1 {
        return vec![greedy];
    }
    let q = 1.0 - p;
    let mut increments: Vec<f64> = Vec::with_capacity(n * m as usize);
    for &w in weights {
        let mut g = w * p;
        for _ in 0..m {
            increments.push(g);
            g *= q;
        }
    }
    increments.sort_by(|x, y| y.total_cmp(x));
    let threshold = increments[m as usize - 1];
    let mut base = vec![0u32; n];
    let mut ties = vec![0u32; n];
    for (i, &w) in weights.iter().enumerate() {
        let mut g = w * p;
        for _ in 0..m {
            if g > threshold + tol {
                base[i] += 1;
            } else if g >= threshold - tol {
                ties[i] += 1;
            }
            g *= q;
        }
    }
    let fixed: u32 = base.iter().sum();
    let mut out = vec![greedy];
    let Some(rest) = m.checked_sub(fixed) else {
        return out;
    };
    let mut current = base.clone();
    fill_ties(0, rest, &ties, &mut current, &mut out, cap);
    out
}

fn fill_ties(site: usize, left: u32, ties: &[u32], current: &mut Vec<u32>, out: &mut Vec<Allocation>, cap: usize) {
    if out.len() >= cap {
        return;
    }
    if site == ties.len() {
        if left == 0 {
            let alloc = Allocation(current.clone());
            if !out.contains(&alloc) {
                out.push(alloc);
            }
        }
        return;
    }
    let remaining_capacity: u32 = ties[site + 1..].iter().sum();
    for take in 0..=ties[site].min(left) {
        if left - take > remaining_capacity {
            continue;
        }
        current[site] += take;
        fill_ties(site + 1, left - take, ties, current, out, cap);
        current[site] -= take;
    }
}

/// The attacker's move after one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalResponse {
    pub signal: Signal,
    /// `p(s)`.
    pub prob: f64,
    /// Posterior no-lock marginals.
    pub alpha: Vec<f64>,
    pub allocation: Allocation,
    /// Conditional expected damage `sum_i alpha_i c_i p(u_i)`.
    pub damage: f64,
}

/// Greedy best response to a defender mix, one entry per possible signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub per_signal: Vec<SignalResponse>,
    /// Total expected loss `sum_s p(s) damage(s)`.
    pub value: f64,
}

impl BestResponse {
    pub fn response(&self, signal: &Signal) -> Option<&SignalResponse> {
        self.per_signal.iter().find(|r| &r.signal == signal)
    }
}

fn check_mix_fits(mix: &DefenderMix, spec: &GameSpec) -> Result<()> {
    let n = spec.n();
    if n > MAX_SIGNAL_SITES {
        return Err(LbtError::Oversized {
            what: "site count for signal enumeration",
            got: n as u128,
            limit: MAX_SIGNAL_SITES as u128,
        });
    }
    if let Some(k) = spec.k() {
        if let Some((cfg, _)) = mix.support().iter().find(|e| e.0.len() != k) {
            return Err(LbtError::invalid("mix", format!("configuration {cfg} does not hold {k} locks")));
        }
    }
    if let Some((cfg, _)) = mix.support().iter().find(|e| e.0.span() > n) {
        return Err(LbtError::invalid("mix", format!("configuration {cfg} exceeds {n} sites")));
    }
    Ok(())
}

/// Attacker's optimal response to every signal with positive probability.
pub fn best_response(mix: &DefenderMix, spec: &GameSpec) -> Result<BestResponse> {
    check_mix_fits(mix, spec)?;
    let (a, b, c, p, m) = (spec.a(), spec.b(), spec.c(), spec.p(), spec.m());
    let mut per_signal = Vec::new();
    let mut value = 0.0;
    for s in Signal::all(spec.n()) {
        let (prob, joint) = joint_no_lock(mix, &s, a, b);
        if prob <= 0.0 {
            continue;
        }
        let alpha: Vec<f64> = joint.iter().map(|j| j / prob).collect();
        let weights: Vec<f64> = alpha.iter().zip(c).map(|(al, ci)| al * ci).collect();
        let allocation = greedy_allocation(&weights, p, m);
        let damage = weights
            .iter()
            .zip(allocation.bombs())
            .map(|(w, &u)| w * explosion_prob(u, p))
            .sum::<f64>();
        value += prob * damage;
        per_signal.push(SignalResponse {
            signal: s,
            prob,
            alpha,
            allocation,
            damage,
        });
    }
    Ok(BestResponse { per_signal, value })
}

/// Expected loss split by site: `L_i = sum_s p(s) alpha_i(s) c_i p(u_i(s))`.
/// Where several allocations tie for a signal, the split averages over them,
/// so symmetric sites get equal shares; the total is unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_site: Vec<f64>,
}

/// Relative tolerance for ties in the per-site split.
const SPLIT_TIE_TOL: f64 = 1e-12;

pub fn expected_loss(mix: &DefenderMix, spec: &GameSpec) -> Result<LossBreakdown> {
    let br = best_response(mix, spec)?;
    let (c, p, m) = (spec.c(), spec.p(), spec.m());
    let mut per_site = vec![0.0; spec.n()];
    for r in &br.per_signal {
        let weights: Vec<f64> = r.alpha.iter().zip(c).map(|(al, ci)| al * ci).collect();
        let scale = weights.iter().copied().fold(0.0, f64::max);
        let tied = near_optimal_allocations(&weights, p, m, SPLIT_TIE_TOL * scale, CANDIDATE_CAP);
        let share = r.prob / tied.len() as f64;
        for alloc in &tied {
            for (i, slot) in per_site.iter_mut().enumerate() {
                *slot += share * weights[i] * explosion_prob(alloc.bombs()[i], p);
            }
        }
    }
    Ok(LossBreakdown {
        total: br.value,
        per_site,
    })
}

/// Mixed attacker strategy. Signals with identical posteriors share one
/// entry, keyed by a representative signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerStrategy {
    pub per_signal: Vec<(Signal, Vec<(Allocation, f64)>)>,
}

/// Defender equilibrium with the attacker play that supports it.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub mix: DefenderMix,
    /// Equilibrium loss `v*`.
    pub value: f64,
    /// Prior lock probabilities `beta_i`.
    pub lock_marginals: Vec<f64>,
    /// Expected loss at each site under the attacker's equilibrium strategy;
    /// sums to `value`.
    pub per_site_loss: Vec<f64>,
    /// Sites with `beta_i > PROTECTED_THRESHOLD` (0-based).
    pub protected_set: Vec<usize>,
    /// Expected total loss given that site `i` holds a lock, under the
    /// attacker's equilibrium strategy; `None` for unprotected sites. Equal to
    /// `value` on every protected site at an equilibrium.
    pub protected_loss: Vec<Option<f64>>,
    /// Spread of `protected_loss` over the protected set.
    pub indifference_gap: f64,
    /// Attacker's equilibrium strategy (mixing only between best responses).
    pub attacker: Option<AttackerStrategy>,
    /// Deterministic lowest-index best response to `mix`, when the signal
    /// space is small enough to list.
    pub best_response: Option<BestResponse>,
    pub breakpoints: Option<TwoSiteBreakpoints>,
    /// Number of sites worth protecting when known in closed form.
    pub k_star: Option<usize>,
    /// Cutting-plane iterations (zero for closed forms).
    pub iterations: usize,
    /// Certified lower bound on the equilibrium loss.
    pub lower_bound: f64,
    /// Outcome of the single-coordinate stationarity check, when run.
    pub stationary: Option<bool>,
}

pub(crate) struct Indifference {
    pub per_site_loss: Vec<f64>,
    pub protected_set: Vec<usize>,
    pub protected_loss: Vec<Option<f64>>,
    pub gap: f64,
    pub attacker: AttackerStrategy,
}

/// Candidate cap per signal class for the attacker's mixing problem.
const CANDIDATE_CAP: usize = 64;
/// Relative tolerance for treating two allocations as equally good.
const TIE_REL_TOL: f64 = 1e-7;
/// Largest attacker problem (classes times configurations) solved.
const MAX_ATTACKER_LP: usize = 2_000_000;

/// Finds an attacker strategy that mixes only between best responses to
/// `b` and maximizes the minimum damage over lock configurations, then
/// reports per-site losses under it.
pub(crate) fn indifference(table: &GameTable, b: &[f64], extra: &[Vec<Allocation>]) -> Result<Indifference> {
    if table.classes.len() * table.configs.len() > MAX_ATTACKER_LP {
        return Err(LbtError::Oversized {
            what: "attacker mixing problem",
            got: (table.classes.len() * table.configs.len()) as u128,
            limit: MAX_ATTACKER_LP as u128,
        });
    }
    let mut candidates: Vec<Vec<Allocation>> = Vec::with_capacity(table.classes.len());
    for (ci, class) in table.classes.iter().enumerate() {
        let w = table.site_weights(class, b);
        let scale = w.iter().copied().fold(0.0, f64::max);
        let tol = TIE_REL_TOL * scale + 1e-15;
        let mut list = near_optimal_allocations(&w, table.p, table.m, tol, CANDIDATE_CAP);
        let best = table.allocation_value(&w, &list[0]);
        if let Some(more) = extra.get(ci) {
            for alloc in more {
                if !list.contains(alloc) && table.allocation_value(&w, alloc) >= best - tol {
                    list.push(alloc.clone());
                }
            }
        }
        candidates.push(list);
    }

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let v = problem.add_var(1.0, (0.0, f64::INFINITY));
    let mut vars = Vec::with_capacity(candidates.len());
    let mut cuts = Vec::with_capacity(candidates.len());
    for (class, list) in table.classes.iter().zip(&candidates) {
        let class_vars: Vec<_> = list.iter().map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
        let expr: Vec<_> = class_vars.iter().map(|&y| (y, 1.0)).collect();
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0);
        cuts.push(list.iter().map(|alloc| table.cut(class, alloc)).collect::<Vec<_>>());
        vars.push(class_vars);
    }
    for gi in 0..table.configs.len() {
        let mut expr = vec![(v, -1.0)];
        for (class_vars, class_cuts) in vars.iter().zip(&cuts) {
            for (&y, cut) in class_vars.iter().zip(class_cuts) {
                if cut[gi] != 0.0 {
                    expr.push((y, cut[gi]));
                }
            }
        }
        problem.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let solution = problem
        .solve()
        .map_err(|e| LbtError::Lp(e.to_string()))?
        .into_solution()
        .map_err(|e| LbtError::Lp(format!("{e:?}")))?;

    let mut strategy = Vec::with_capacity(candidates.len());
    let mut config_damage = vec![0.0; table.configs.len()];
    let mut per_site_loss = vec![0.0; table.n];
    for ((class, list), (class_vars, class_cuts)) in table
        .classes
        .iter()
        .zip(&candidates)
        .zip(vars.iter().zip(&cuts))
    {
        let raw: Vec<f64> = class_vars.iter().map(|&y| solution.var_value(y).max(0.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|y| y / total).collect();
        for ((alloc, &y), cut) in list.iter().zip(&probs).zip(class_cuts) {
            if y == 0.0 {
                continue;
            }
            for (gi, d) in config_damage.iter_mut().enumerate() {
                *d += y * cut[gi];
            }
            for (i, slot) in per_site_loss.iter_mut().enumerate() {
                let hit = table.c[i] * explosion_prob(alloc.bombs()[i], table.p);
                let joint: f64 = table
                    .configs
                    .iter()
                    .enumerate()
                    .filter(|(_, cfg)| !cfg.contains(i))
                    .map(|(gi, _)| b[gi] * class.lik[gi])
                    .sum();
                *slot += y * class.mult * joint * hit;
            }
        }
        let mixed = list
            .iter()
            .cloned()
            .zip(probs)
            .filter(|e| e.1 > 0.0)
            .collect();
        strategy.push((class.rep, mixed));
    }

    let mut protected_set = Vec::new();
    let mut protected_loss = vec![None; table.n];
    for (i, slot) in protected_loss.iter_mut().enumerate() {
        let (mut mass, mut loss) = (0.0, 0.0);
        for (gi, cfg) in table.configs.iter().enumerate() {
            if cfg.contains(i) {
                mass += b[gi];
                loss += b[gi] * config_damage[gi];
            }
        }
        if mass > PROTECTED_THRESHOLD {
            protected_set.push(i);
            *slot = Some(loss / mass);
        }
    }
    let gap = spread(protected_loss.iter().flatten().copied());
    Ok(Indifference {
        per_site_loss,
        protected_set,
        protected_loss,
        gap,
        attacker: AttackerStrategy { per_signal: strategy },
    })
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Builds the report for a known defender mix, solving the attacker's mixing
/// problem to certify indifference.
pub(crate) fn report_for_mix(
    spec: &GameSpec,
    mix: DefenderMix,
    value: f64,
    extra: &[Vec<Allocation>],
) -> Result<EquilibriumReport> {
    let table = GameTable::new(spec)?;
    let b = table.weights_of(&mix)?;
    let ind = indifference(&table, &b, extra)?;
    let best_response = Some(best_response(&mix, spec)?);
    Ok(EquilibriumReport {
        lock_marginals: mix.lock_marginals(spec.n()),
        mix,
        value,
        per_site_loss: ind.per_site_loss,
        protected_set: ind.protected_set,
        protected_loss: ind.protected_loss,
        indifference_gap: ind.gap,
        attacker: Some(ind.attacker),
        best_response,
        breakpoints: None,
        k_star: None,
        iterations: 0,
        lower_bound: value,
        stationary: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LockConfig, Param};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn cfg(sites: &[usize]) -> LockConfig {
        LockConfig::from_sites(sites).unwrap()
    }

    #[test]
    fn greedy_places_on_best_marginal() {
        assert_eq!(greedy_allocation(&[0.9, 0.1], 1.0, 1).bombs(), &[1, 0]);
        assert_eq!(greedy_allocation(&[0.9, 0.1], 0.5, 2).bombs(), &[2, 0]);
        // 0.9 * 0.25 < 0.3 * 0.5 is false, so the third bomb stays on site 1
        assert_eq!(greedy_allocation(&[0.9, 0.3], 0.5, 3).bombs(), &[2, 1]);
        assert_eq!(greedy_allocation(&[0.5, 0.5], 1.0, 1).bombs(), &[1, 0]);
        assert_eq!(greedy_allocation(&[0.5, 0.5], 1.0, 0).bombs(), &[0, 0]);
    }

    #[test]
    fn near_optimal_lists_all_tied_sites() {
        let all = near_optimal_allocations(&[1.0, 1.0, 0.5], 1.0, 1, 1e-12, 64);
        assert_eq!(all, vec![Allocation(vec![1, 0, 0]), Allocation(vec![0, 1, 0])]);
        let one = near_optimal_allocations(&[1.0, 0.2], 0.5, 2, 1e-12, 64);
        assert_eq!(one, vec![Allocation(vec![2, 0])]);
    }

    #[test]
    fn best_response_symmetric_two_sites() {
        let spec = crate::GameSpec::symmetric(2, 1, 1, 0.75, 0.75, 1.0).unwrap();
        let mix = DefenderMix::uniform(2, 1).unwrap();
        let br = best_response(&mix, &spec).unwrap();
        let r = br.response(&Signal::parse("-+").unwrap()).unwrap();
        assert_eq!(r.allocation.bombs(), &[1, 0]);
        assert!(close(r.damage, 0.9, 1e-12));
        assert!(close(br.value, 0.75, 1e-12));

        let loss = expected_loss(&mix, &spec).unwrap();
        assert!(close(loss.per_site[0], 0.375, 1e-12));
        assert!(close(loss.per_site[1], 0.375, 1e-12));
        assert!(close(loss.per_site.iter().sum::<f64>(), loss.total, 1e-12));
    }

    #[test]
    fn best_response_noninformative_example() {
        let spec = GameSpec::fixed(1, 1, Param::Scalar(0.5), Param::Scalar(0.5), vec![4.0, 3.0, 2.0], 1.0).unwrap();
        let mix = DefenderMix::new(vec![
            (cfg(&[0]), 7.0 / 13.0),
            (cfg(&[1]), 5.0 / 13.0),
            (cfg(&[2]), 1.0 / 13.0),
        ])
        .unwrap();
        let br = best_response(&mix, &spec).unwrap();
        assert_eq!(br.per_signal.len(), 8);
        for r in &br.per_signal {
            assert!(close(r.damage, 24.0 / 13.0, 1e-12));
            // every site is an equally good target
            for (al, c) in r.alpha.iter().zip([4.0, 3.0, 2.0]) {
                assert!(close(al * c, 24.0 / 13.0, 1e-12));
            }
        }
    }

    #[test]
    fn zero_bombs_do_nothing() {
        let spec = GameSpec::fixed(1, 0, Param::Scalar(0.7), Param::Scalar(0.8), vec![2.0, 1.0, 1.0], 0.6).unwrap();
        let mix = spec.default_mix().unwrap();
        let br = best_response(&mix, &spec).unwrap();
        assert_eq!(br.value, 0.0);
        assert!(br.per_signal.iter().all(|r| r.allocation.total() == 0));
        assert!(expected_loss(&mix, &spec).unwrap().per_site.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn perfect_testing_finds_the_open_site() {
        let spec = GameSpec::fixed(1, 1, Param::Scalar(1.0), Param::Scalar(1.0), vec![4.0, 1.0], 1.0).unwrap();
        let loss = expected_loss(&DefenderMix::point(cfg(&[0])), &spec).unwrap();
        assert_eq!(loss.per_site, vec![0.0, 1.0]);
    }

    #[test]
    fn mix_with_wrong_lock_count_is_rejected() {
        let spec = GameSpec::symmetric(3, 1, 1, 0.7, 0.7, 1.0).unwrap();
        let mix = DefenderMix::point(cfg(&[0, 1]));
        assert!(best_response(&mix, &spec).is_err());
    }
}
