//! Signal likelihoods and posterior lock distributions.
//!
//! General mixes are handled by summing over the support of the mix. The
//! symmetric fixed-lock quantities (minus-count distribution, critical
//! ratios) use closed sums over the number `j` of locks that fall on
//! minus-tested sites, so they stay cheap for large `n`.

use crate::combinatorics::{binomial_f64, MAX_SITES};
use crate::error::{LbtError, Result};
use crate::model::{DefenderMix, LockConfig, Signal};

/// Posterior no-lock probabilities of a minus-tested and a plus-tested site,
/// and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalRatios {
    /// `P(T = 0 | S = 0 [, N = x])`.
    pub p_minus: f64,
    /// `P(T = 0 | S = 1 [, N = x])`.
    pub p_plus: f64,
    /// `p_minus / p_plus`; `+inf` when `p_plus` is zero.
    pub r: f64,
    /// Minus count conditioned on; `None` for independent locks.
    pub x: Option<usize>,
    /// Set when `p_plus == 0`, i.e. a plus signal proves a lock.
    pub unbounded: bool,
}

impl CriticalRatios {
    fn new(p_minus: f64, p_plus: f64, x: Option<usize>) -> Self {
        let unbounded = p_plus == 0.0;
        CriticalRatios {
            p_minus,
            p_plus,
            r: if unbounded { f64::INFINITY } else { p_minus / p_plus },
            x,
            unbounded,
        }
    }
}

/// Distribution of the number of minus signals, indexed by `x = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinusCountDist {
    pub probs: Vec<f64>,
}

impl MinusCountDist {
    pub fn prob(&self, x: usize) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }
}

/// Combined test quality `(a / (1-a)) * (b / (1-b))`.
pub fn test_quality(a: f64, b: f64) -> f64 {
    (a / (1.0 - a)) * (b / (1.0 - b))
}

fn check_dims(s: &Signal, a: &[f64], b: &[f64]) -> Result<()> {
    for (what, len) in [("sensitivities", a.len()), ("specificities", b.len())] {
        if len != s.len() {
            return Err(LbtError::DimensionMismatch {
                what,
                expected: s.len(),
                got: len,
            });
        }
    }
    Ok(())
}

fn likelihood_unchecked(config: LockConfig, s: &Signal, a: &[f64], b: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..s.len() {
        prod *= match (config.contains(i), s.is_plus(i)) {
            (true, true) => a[i],
            (true, false) => 1.0 - a[i],
            (false, false) => b[i],
            (false, true) => 1.0 - b[i],
        };
    }
    prod
}

/// `P(s | config)`: tests are independent across sites.
pub fn signal_likelihood(config: LockConfig, s: &Signal, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(s, a, b)?;
    if config.span() > s.len() {
        return Err(LbtError::DimensionMismatch {
            what: "lock configuration",
            expected: s.len(),
            got: config.span(),
        });
    }
    Ok(likelihood_unchecked(config, s, a, b))
}

/// `p(s) = sum over configs of b(config) P(s | config)`.
pub fn signal_prob(mix: &DefenderMix, s: &Signal, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(s, a, b)?;
    mix.check_sites(s.len())?;
    Ok(mix
        .support()
        .iter()
        .map(|&(cfg, w)| w * likelihood_unchecked(cfg, s, a, b))
        .sum())
}

/// Joint probabilities `P(T_i = 0, s)` for every site together with `p(s)`.
///
/// Unnormalized, so it is defined for zero-probability signals as well.
pub(crate) fn joint_no_lock(mix: &DefenderMix, s: &Signal, a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let n = s.len();
    let mut joint = vec![0.0; n];
    let mut total = 0.0;
    for &(cfg, w) in mix.support() {
        let weight = w * likelihood_unchecked(cfg, s, a, b);
        if weight == 0.0 {
            continue;
        }
        total += weight;
        for (i, j) in joint.iter_mut().enumerate() {
            if !cfg.contains(i) {
                *j += weight;
            }
        }
    }
    (total, joint)
}

/// Posterior lock distribution `b(config | s)` over the support of `mix`.
pub fn posterior_locks(mix: &DefenderMix, s: &Signal, a: &[f64], b: &[f64]) -> Result<DefenderMix> {
    check_dims(s, a, b)?;
    mix.check_sites(s.len())?;
    let weights: Vec<(LockConfig, f64)> = mix
        .support()
        .iter()
        .map(|&(cfg, w)| (cfg, w * likelihood_unchecked(cfg, s, a, b)))
        .collect();
    let total: f64 = weights.iter().map(|e| e.1).sum();
    if total <= 0.0 {
        return Err(LbtError::ZeroProbabilitySignal {
            signal: s.to_string(),
        });
    }
    DefenderMix::new(weights.into_iter().map(|(c, w)| (c, w / total)).collect())
}

/// Posterior no-lock marginals `alpha_i(s) = P(T_i = 0 | s)`.
pub fn marginal_no_lock(mix: &DefenderMix, s: &Signal, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_dims(s, a, b)?;
    mix.check_sites(s.len())?;
    let (total, joint) = joint_no_lock(mix, s, a, b);
    if total <= 0.0 {
        return Err(LbtError::ZeroProbabilitySignal {
            signal: s.to_string(),
        });
    }
    Ok(joint.into_iter().map(|j| j / total).collect())
}

fn check_symmetric_args(n: usize, k: usize, a: f64, b: f64) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(LbtError::invalid("n", format!("must be in 1..={MAX_SITES}")));
    }
    if k >= n {
        return Err(LbtError::invalid("k", "k must be < n"));
    }
    for (name, v) in [("a", a), ("b", b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(LbtError::invalid(name, "must lie in [0, 1]"));
        }
    }
    Ok(())
}

/// Likelihood of one particular signal with `minus` minus sites and `plus`
/// plus sites, given a lock placement with `j` locks on minus sites and
/// `k - j` on plus sites.
fn overlap_weight(minus: usize, plus: usize, k: usize, j: usize, a: f64, b: f64) -> f64 {
    let locked_plus = k - j;
    (1.0 - a).powi(j as i32)
        * b.powi((minus - j) as i32)
        * a.powi(locked_plus as i32)
        * (1.0 - b).powi((plus - locked_plus) as i32)
}

/// Sum over overlap counts `j` of `count(j) * overlap_weight(j)`, where
/// `count(j)` is the number of lock placements with that overlap among the
/// sites that remain free. `free_minus`/`free_plus` may be one less than the
/// group sizes when a designated site is known to be unlocked.
fn overlap_sum(minus: usize, plus: usize, free_minus: usize, free_plus: usize, k: usize, a: f64, b: f64) -> f64 {
    (0..=k.min(free_minus))
        .filter(|&j| k - j <= free_plus)
        .map(|j| {
            binomial_f64(free_minus, j) * binomial_f64(free_plus, k - j) * overlap_weight(minus, plus, k, j, a, b)
        })
        .sum()
}

/// Distribution of the minus count under a uniform prior over `k`-subsets
/// and symmetric tests.
pub fn minus_count_dist(n: usize, k: usize, a: f64, b: f64) -> Result<MinusCountDist> {
    check_symmetric_args(n, k, a, b)?;
    let configs = binomial_f64(n, k);
    let probs = (0..=n)
        .map(|x| binomial_f64(n, x) * overlap_sum(x, n - x, x, n - x, k, a, b) / configs)
        .collect();
    Ok(MinusCountDist { probs })
}

/// Critical ratio for independent locks with probability `lambda`.
pub fn critical_ratio_b(lambda: f64, a: f64, b: f64) -> Result<CriticalRatios> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(LbtError::invalid("lambda", "must lie strictly between 0 and 1"));
    }
    for (name, v) in [("a", a), ("b", b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(LbtError::invalid(name, "must lie in [0, 1]"));
        }
    }
    let free = 1.0 - lambda;
    let minus_den = free * b + lambda * (1.0 - a);
    let plus_den = free * (1.0 - b) + lambda * a;
    if minus_den <= 0.0 || plus_den <= 0.0 {
        return Err(LbtError::invalid(
            "a, b",
            "one of the two test outcomes has probability zero",
        ));
    }
    Ok(CriticalRatios::new(free * b / minus_den, free * (1.0 - b) / plus_den, None))
}

/// Critical ratio `r(x)` for `k` uniformly placed locks, given `x` minus
/// signals. Requires `0 < x < n` so that both a minus and a plus site exist.
pub fn critical_ratio_a(n: usize, k: usize, x: usize, a: f64, b: f64) -> Result<CriticalRatios> {
    check_symmetric_args(n, k, a, b)?;
    if x == 0 || x >= n {
        return Err(LbtError::invalid(
            "x",
            format!(
                "needs 0 < x < n; with x = {x} every site has the unconditional no-lock marginal (n-k)/n"
            ),
        ));
    }
    let plus = n - x;
    let total = overlap_sum(x, plus, x, plus, k, a, b);
    if total <= 0.0 {
        return Err(LbtError::ZeroProbabilitySignal {
            signal: Signal::canonical(n, x).to_string(),
        });
    }
    let minus_free = overlap_sum(x, plus, x - 1, plus, k, a, b);
    let plus_free = overlap_sum(x, plus, x, plus - 1, k, a, b);
    Ok(CriticalRatios::new(minus_free / total, plus_free / total, Some(x)))
}

/// Posterior no-lock probability of every site given `x` minuses under the
/// symmetric fixed-lock model: `(p_minus, p_plus)`, with the degenerate
/// counts `x = 0` and `x = n` mapped to `(n-k)/n` on both.
pub fn symmetric_no_lock(n: usize, k: usize, x: usize, a: f64, b: f64) -> Result<(f64, f64)> {
    if x == 0 || x == n {
        check_symmetric_args(n, k, a, b)?;
        let t = (n - k) as f64 / n as f64;
        return Ok((t, t));
    }
    let r = critical_ratio_a(n, k, x, a, b)?;
    Ok((r.p_minus, r.p_plus))
}
