//! Monte Carlo replay of the two-stage experiment: draw the locks, draw the
//! test outcomes, let a policy place the bombs, draw the explosions.
//!
//! Trials run in chunks of [`CHUNK_TRIALS`]. Chunk `j` draws from a ChaCha8
//! generator seeded with `seed` on stream `j`, and chunk totals are added in
//! chunk order, so results do not depend on the number of workers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{best_response, MAX_SIGNAL_SITES};
use crate::error::{LbtError, Result};
use crate::model::{Allocation, DefenderMix, GameSpec, LockConfig, Signal};
use crate::symmetric::{value_given_x, UapLayout};

pub const CHUNK_TRIALS: u64 = 4096;

/// Attacker behaviour in a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Greedy best response to the simulated defender mix.
    GreedyBestResponse,
    /// Fill-and-switch layout of the symmetric game, minus sites first.
    UapSymmetric,
    /// Each bomb on a uniformly random site.
    UniformRandom,
    /// Every bomb on one site (0-based here, 1-based in the policy name).
    SingleSite(usize),
    /// Explicit allocation for each signal.
    Table(HashMap<Signal, Allocation>),
}

impl FromStr for Policy {
    type Err = LbtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy-best-response" => Ok(Policy::GreedyBestResponse),
            "uap-symmetric" => Ok(Policy::UapSymmetric),
            "uniform-random" => Ok(Policy::UniformRandom),
            _ => {
                let site = s
                    .strip_prefix("single-site:")
                    .and_then(|i| i.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| LbtError::invalid("policy", format!("unknown policy `{s}`")))?;
                Ok(Policy::SingleSite(site - 1))
            }
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::GreedyBestResponse => f.write_str("greedy-best-response"),
            Policy::UapSymmetric => f.write_str("uap-symmetric"),
            Policy::UniformRandom => f.write_str("uniform-random"),
            Policy::SingleSite(i) => write!(f, "single-site:{}", i + 1),
            Policy::Table(_) => f.write_str("table"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Per-trial bomb placement, prepared once per simulation.
enum Attack {
    Fixed(Allocation),
    BySignal(Vec<Allocation>),
    Layouts(Vec<UapLayout>),
    Uniform,
}

impl Attack {
    fn prepare(spec: &GameSpec, mix: &DefenderMix, policy: &Policy) -> Result<Self> {
        let n = spec.n();
        let m = spec.m();
        match policy {
            Policy::GreedyBestResponse => {
                let br = best_response(mix, spec)?;
                let mut table = vec![Allocation::zeros(n); 1 << n];
                for r in br.per_signal {
                    table[r.signal.plus_mask() as usize] = r.allocation;
                }
                Ok(Attack::BySignal(table))
            }
            Policy::UapSymmetric => {
                let k = spec.require_symmetric_fixed()?;
                let (a, b) = (spec.a()[0], spec.b()[0]);
                let layouts = (0..=n)
                    .map(|x| value_given_x(n, k, m, x, a, b, spec.p()).map(|s| s.layout))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Attack::Layouts(layouts))
            }
            Policy::UniformRandom => Ok(Attack::Uniform),
            Policy::SingleSite(i) => {
                if *i >= n {
                    return Err(LbtError::invalid("policy", format!("site {} exceeds {n} sites", i + 1)));
                }
                let mut bombs = vec![0; n];
                bombs[*i] = m;
                Ok(Attack::Fixed(Allocation(bombs)))
            }
            Policy::Table(map) => {
                if n > MAX_SIGNAL_SITES {
                    return Err(LbtError::Oversized {
                        what: "site count for a signal table",
                        got: n as u128,
                        limit: MAX_SIGNAL_SITES as u128,
                    });
                }
                let mut table = vec![Allocation::zeros(n); 1 << n];
                let mut covered = vec![false; 1 << n];
                for (s, alloc) in map {
                    if s.len() != n || alloc.len() != n || alloc.total() != m {
                        return Err(LbtError::invalid(
                            "policy",
                            format!("entry for {s} must have {n} sites and {m} bombs"),
                        ));
                    }
                    table[s.plus_mask() as usize] = alloc.clone();
                    covered[s.plus_mask() as usize] = true;
                }
                let br = best_response(mix, spec)?;
                if let Some(r) = br.per_signal.iter().find(|r| !covered[r.signal.plus_mask() as usize]) {
                    return Err(LbtError::invalid("policy", format!("no allocation for signal {}", r.signal)));
                }
                Ok(Attack::BySignal(table))
            }
        }
    }
}

fn check_inputs(spec: &GameSpec, mix: &DefenderMix, policy: &Policy, trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(LbtError::invalid("trials", "need at least one trial"));
    }
    mix.check_sites(spec.n())?;
    if matches!(policy, Policy::GreedyBestResponse) && spec.n() > MAX_SIGNAL_SITES {
        return Err(LbtError::Oversized {
            what: "site count for the greedy policy",
            got: spec.n() as u128,
            limit: MAX_SIGNAL_SITES as u128,
        });
    }
    Ok(())
}

/// Simulates on the global thread pool.
pub fn simulate(spec: &GameSpec, mix: &DefenderMix, policy: &Policy, trials: u64, seed: u64) -> Result<SimResult> {
    check_inputs(spec, mix, policy, trials)?;
    let attack = Attack::prepare(spec, mix, policy)?;
    Ok(run(spec, mix, &attack, trials, seed))
}

/// Simulates on a dedicated pool of `workers` threads.
pub fn simulate_with_workers(
    spec: &GameSpec,
    mix: &DefenderMix,
    policy: &Policy,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SimResult> {
    check_inputs(spec, mix, policy, trials)?;
    let attack = Attack::prepare(spec, mix, policy)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LbtError::invalid("workers", e.to_string()))?;
    Ok(pool.install(|| run(spec, mix, &attack, trials, seed)))
}

fn run(spec: &GameSpec, mix: &DefenderMix, attack: &Attack, trials: u64, seed: u64) -> SimResult {
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let mut cumulative = Vec::with_capacity(mix.len());
    let mut acc = 0.0;
    for &(cfg, w) in mix.support() {
        acc += w;
        cumulative.push((acc, cfg));
    }
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let len = CHUNK_TRIALS.min(trials - j * CHUNK_TRIALS);
            chunk(spec, &cumulative, attack, seed, j, len)
        })
        .collect();
    let (sum, sumsq) = sums.iter().fold((0.0, 0.0), |(s, q), (cs, cq)| (s + cs, q + cq));
    let count = trials as f64;
    let mean = sum / count;
    let std_error = if trials > 1 {
        let var = ((sumsq - sum * mean) / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    SimResult {
        mean,
        std_error,
        trials,
        seed,
    }
}

fn chunk(spec: &GameSpec, cumulative: &[(f64, LockConfig)], attack: &Attack, seed: u64, index: u64, len: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = spec.n();
    let (a, b, c, p, m) = (spec.a(), spec.b(), spec.c(), spec.p(), spec.m());
    let mut minus = vec![false; n];
    let mut bombs = vec![0u32; n];
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..len {
        let draw: f64 = rng.random();
        let locks = cumulative
            .iter()
            .find(|e| draw < e.0)
            .or(cumulative.last())
            .map_or(LockConfig::EMPTY, |e| e.1);
        let mut plus = 0u64;
        for i in 0..n {
            let is_plus = if locks.contains(i) {
                rng.random_bool(a[i])
            } else {
                !rng.random_bool(b[i])
            };
            minus[i] = !is_plus;
            if is_plus {
                plus |= 1 << i;
            }
        }
        match attack {
            Attack::Fixed(alloc) => bombs.copy_from_slice(alloc.bombs()),
            Attack::BySignal(table) => bombs.copy_from_slice(table[plus as usize].bombs()),
            Attack::Layouts(layouts) => {
                let x = minus.iter().filter(|&&v| v).count();
                let alloc = layouts[x]
                    .allocation_for(&minus)
                    .expect("layout matches the signal length");
                bombs.copy_from_slice(alloc.bombs());
            }
            Attack::Uniform => {
                bombs.fill(0);
                for _ in 0..m {
                    bombs[rng.random_range(0..n)] += 1;
                }
            }
        }
        let mut damage = 0.0;
        for i in 0..n {
            if locks.contains(i) {
                continue;
            }
            if (0..bombs[i]).any(|_| rng.random_bool(p)) {
                damage += c[i];
            }
        }
        sum += damage;
        sumsq += damage * damage;
    }
    (sum, sumsq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_two() -> (GameSpec, DefenderMix) {
        let spec = GameSpec::symmetric(2, 1, 1, 0.75, 0.75, 1.0).unwrap();
        let mix = DefenderMix::uniform(2, 1).unwrap();
        (spec, mix)
    }

    #[test]
    fn parses_policy_names() {
        assert_eq!("greedy-best-response".parse::<Policy>().unwrap(), Policy::GreedyBestResponse);
        assert_eq!("single-site:2".parse::<Policy>().unwrap(), Policy::SingleSite(1));
        assert!("single-site:0".parse::<Policy>().is_err());
        assert!("random".parse::<Policy>().is_err());
        assert_eq!(Policy::SingleSite(1).to_string(), "single-site:2");
    }

    #[test]
    fn greedy_matches_analytic_value() {
        let (spec, mix) = symmetric_two();
        let r = simulate(&spec, &mix, &Policy::GreedyBestResponse, 200_000, 7).unwrap();
        assert!((r.mean - 0.75).abs() < 4.0 * r.std_error, "{r:?}");
        let r = simulate(&spec, &mix, &Policy::UapSymmetric, 200_000, 7).unwrap();
        assert!((r.mean - 0.75).abs() < 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn single_site_hits_with_lock_odds() {
        let (spec, mix) = symmetric_two();
        let r = simulate(&spec, &mix, &Policy::SingleSite(0), 100_000, 3).unwrap();
        assert!((r.mean - 0.5).abs() < 4.0 * r.std_error);
        let r = simulate(&spec, &mix, &Policy::UniformRandom, 100_000, 3).unwrap();
        assert!((r.mean - 0.5).abs() < 4.0 * r.std_error);
    }

    #[test]
    fn no_bombs_or_duds_do_nothing() {
        let spec = GameSpec::symmetric(3, 1, 0, 0.75, 0.75, 1.0).unwrap();
        let mix = DefenderMix::uniform(3, 1).unwrap();
        let r = simulate(&spec, &mix, &Policy::GreedyBestResponse, 5_000, 1).unwrap();
        assert_eq!((r.mean, r.std_error), (0.0, 0.0));
        let spec = GameSpec::symmetric(3, 1, 4, 0.75, 0.75, 0.0).unwrap();
        let r = simulate(&spec, &mix, &Policy::UniformRandom, 5_000, 1).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn deterministic_across_workers() {
        let (spec, mix) = symmetric_two();
        let base = simulate_with_workers(&spec, &mix, &Policy::GreedyBestResponse, 50_000, 11, 1).unwrap();
        for workers in [2, 4, 16] {
            let r = simulate_with_workers(&spec, &mix, &Policy::GreedyBestResponse, 50_000, 11, workers).unwrap();
            assert_eq!(r.mean.to_bits(), base.mean.to_bits());
            assert_eq!(r.std_error.to_bits(), base.std_error.to_bits());
        }
        let other = simulate_with_workers(&spec, &mix, &Policy::GreedyBestResponse, 50_000, 12, 1).unwrap();
        assert_ne!(other.mean, base.mean);
    }

    #[test]
    fn table_policy_needs_every_signal() {
        let (spec, mix) = symmetric_two();
        let mut map = HashMap::new();
        map.insert(Signal::parse("-+").unwrap(), Allocation(vec![1, 0]));
        let policy = Policy::Table(map.clone());
        assert!(simulate(&spec, &mix, &policy, 10, 0).is_err());
        for (s, u) in [("+-", [0, 1]), ("--", [1, 0]), ("++", [1, 0])] {
            map.insert(Signal::parse(s).unwrap(), Allocation(u.to_vec()));
        }
        let r = simulate(&spec, &mix, &Policy::Table(map), 100_000, 5).unwrap();
        assert!((r.mean - 0.75).abs() < 4.0 * r.std_error);
    }

    #[test]
    fn rejects_zero_trials() {
        let (spec, mix) = symmetric_two();
        assert!(simulate(&spec, &mix, &Policy::UniformRandom, 0, 0).is_err());
    }
}
