//! Precomputed likelihood table for a fixed-lock instance: every lock
//! configuration against every class of signals that share a likelihood
//! vector. Signals in one class have the same posterior, hence the same best
//! responses, so the defender's loss only depends on the classes.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::combinatorics::{self, binomial};
use crate::error::{LbtError, Result};
use crate::model::{explosion_prob, Allocation, DefenderMix, GameSpec, LockConfig, Signal};

use super::greedy_allocation;

/// Largest site count for which the signal space is enumerated.
pub const MAX_TABLE_SITES: usize = 12;
/// Largest number of bomb allocations per signal accepted by the solver.
pub const MAX_ALLOCATIONS: u128 = 100_000;

const PARALLEL_CLASSES: usize = 256;

#[derive(Debug, Clone)]
pub(crate) struct SignalClass {
    pub rep: Signal,
    /// Number of signals merged into this class.
    pub mult: f64,
    /// `P(s | config)` for one member signal, per configuration.
    pub lik: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct GameTable {
    pub n: usize,
    pub m: u32,
    pub p: f64,
    pub c: Vec<f64>,
    pub configs: Vec<LockConfig>,
    pub classes: Vec<SignalClass>,
}

impl GameTable {
    pub fn new(spec: &GameSpec) -> Result<Self> {
        let n = spec.n();
        let Some(k) = spec.k() else {
            return Err(LbtError::Unsupported("a fixed number of locks".into()));
        };
        if n > MAX_TABLE_SITES {
            return Err(LbtError::Oversized {
                what: "site count",
                got: n as u128,
                limit: MAX_TABLE_SITES as u128,
            });
        }
        let allocations = combinatorics::allocation_count(n, spec.m());
        if allocations > MAX_ALLOCATIONS {
            return Err(LbtError::Oversized {
                what: "allocations per signal",
                got: allocations,
                limit: MAX_ALLOCATIONS,
            });
        }
        debug_assert_eq!(
            binomial(n as u64, k as u64) as usize,
            combinatorics::k_subsets(n, k).len()
        );
        let configs: Vec<LockConfig> = combinatorics::k_subsets(n, k)
            .into_iter()
            .map(LockConfig::from_mask)
            .collect();
        let (a, b) = (spec.a(), spec.b());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut classes: Vec<SignalClass> = Vec::new();
        for s in Signal::all(n) {
            let lik: Vec<f64> = configs
                .iter()
                .map(|&cfg| {
                    (0..n)
                        .map(|i| match (cfg.contains(i), s.is_plus(i)) {
                            (true, true) => a[i],
                            (true, false) => 1.0 - a[i],
                            (false, false) => b[i],
                            (false, true) => 1.0 - b[i],
                        })
                        .product()
                })
                .collect();
            if lik.iter().all(|&l| l == 0.0) {
                continue;
            }
            let key: Vec<u64> = lik.iter().map(|l| l.to_bits()).collect();
            match index.get(&key) {
                Some(&idx) => classes[idx].mult += 1.0,
                None => {
                    index.insert(key, classes.len());
                    classes.push(SignalClass { rep: s, mult: 1.0, lik });
                }
            }
        }
        Ok(GameTable {
            n,
            m: spec.m(),
            p: spec.p(),
            c: spec.c().to_vec(),
            configs,
            classes,
        })
    }

    /// Probability vector over `configs` for a mix; configurations outside the
    /// table are rejected.
    pub fn weights_of(&self, mix: &DefenderMix) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.configs.len()];
        for &(cfg, prob) in mix.support() {
            let idx = self
                .configs
                .iter()
                .position(|&c| c == cfg)
                .ok_or_else(|| LbtError::invalid("mix", format!("configuration {cfg} has the wrong size")))?;
            w[idx] += prob;
        }
        Ok(w)
    }

    pub fn mix_of(&self, weights: &[f64]) -> Result<DefenderMix> {
        DefenderMix::normalized(self.configs.iter().copied().zip(weights.iter().copied()).collect())
    }

    /// Joint weights `mult * P(T_i = 0, s) * c_i` for one class.
    pub fn site_weights(&self, class: &SignalClass, b: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (gi, &cfg) in self.configs.iter().enumerate() {
            let joint = b[gi] * class.lik[gi];
            if joint == 0.0 {
                continue;
            }
            for (i, wi) in w.iter_mut().enumerate() {
                if !cfg.contains(i) {
                    *wi += joint;
                }
            }
        }
        for (wi, ci) in w.iter_mut().zip(&self.c) {
            *wi *= class.mult * ci;
        }
        w
    }

    pub fn allocation_value(&self, weights: &[f64], alloc: &Allocation) -> f64 {
        weights
            .iter()
            .zip(alloc.bombs())
            .map(|(w, &u)| w * explosion_prob(u, self.p))
            .sum()
    }

    /// Damage of `alloc` if the locks sit at `cfg`.
    pub fn config_damage(&self, cfg: LockConfig, alloc: &Allocation) -> f64 {
        alloc
            .bombs()
            .iter()
            .enumerate()
            .filter(|(i, _)| !cfg.contains(*i))
            .map(|(i, &u)| self.c[i] * explosion_prob(u, self.p))
            .sum()
    }

    /// Linear coefficients of the defender's loss on one class when the
    /// attacker commits to `alloc`: one entry per configuration.
    pub fn cut(&self, class: &SignalClass, alloc: &Allocation) -> Vec<f64> {
        self.configs
            .iter()
            .zip(&class.lik)
            .map(|(&cfg, &lik)| class.mult * lik * self.config_damage(cfg, alloc))
            .collect()
    }

    /// Defender loss at `b` together with the greedy best response on every
    /// class. Classes are evaluated in parallel, summed in class order.
    pub fn evaluate(&self, b: &[f64]) -> (f64, Vec<Allocation>) {
        let eval = |class: &SignalClass| {
            let w = self.site_weights(class, b);
            let alloc = greedy_allocation(&w, self.p, self.m);
            let v = self.allocation_value(&w, &alloc);
            (v, alloc)
        };
        let results: Vec<(f64, Allocation)> = if self.classes.len() >= PARALLEL_CLASSES {
            self.classes.par_iter().map(eval).collect()
        } else {
            self.classes.iter().map(eval).collect()
        };
        let total = results.iter().map(|r| r.0).sum();
        (total, results.into_iter().map(|r| r.1).collect())
    }

    pub fn loss(&self, b: &[f64]) -> f64 {
        self.evaluate(b).0
    }
}
