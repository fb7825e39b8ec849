//! Brute-force references: exhaustive allocation search and a uniform grid
//! over small defender simplices.

use crate::combinatorics::{self, for_each_composition};
use crate::equilibrium::best_response;
use crate::error::{LbtError, Result};
use crate::model::{explosion_prob, Allocation, DefenderMix, GameSpec, LockConfig, Signal};
use crate::posterior::marginal_no_lock;

/// Largest number of allocations enumerated.
pub const MAX_ENUMERATED: u128 = 1_000_000;
/// Largest number of lock configurations spanned by the grid.
pub const MAX_GRID_CONFIGS: usize = 4;
/// Resolution limit for a one-dimensional grid (two configurations).
pub const MAX_LINE_RESOLUTION: u32 = 10_000;
/// Resolution limit per dimension for higher-dimensional grids.
pub const MAX_RESOLUTION: u32 = 2_000;

/// Maximizes `sum_i alpha_i c_i p(u_i)` over every allocation of `m` bombs.
/// Ties go to the lexicographically smallest allocation.
pub fn exhaustive_best_allocation(alpha: &[f64], c: &[f64], p: f64, m: u32) -> Result<(Allocation, f64)> {
    let n = alpha.len();
    if c.len() != n {
        return Err(LbtError::DimensionMismatch {
            what: "c",
            expected: n,
            got: c.len(),
        });
    }
    if n == 0 {
        return Err(LbtError::invalid("alpha", "need at least one site"));
    }
    let count = combinatorics::allocation_count(n, m);
    if count > MAX_ENUMERATED {
        return Err(LbtError::Oversized {
            what: "allocations",
            got: count,
            limit: MAX_ENUMERATED,
        });
    }
    let hits: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..=m).map(|u| alpha[i] * c[i] * explosion_prob(u, p)).collect())
        .collect();
    let mut best: Option<(Vec<u32>, f64)> = None;
    for_each_composition(n, m, |u| {
        let v: f64 = u.iter().enumerate().map(|(i, &ui)| hits[i][ui as usize]).sum();
        let better = match &best {
            None => true,
            Some((bu, bv)) => v > *bv || (v == *bv && u < bu.as_slice()),
        };
        if better {
            best = Some((u.to_vec(), v));
        }
    });
    let (u, v) = best.unwrap_or_else(|| (vec![0; n], 0.0));
    Ok((Allocation(u), v))
}

/// Best attainable damage after a signal with `x` minuses in the symmetric
/// game, by enumerating lock placements for the posterior and allocations
/// for the attack.
pub fn exhaustive_symmetric_value(n: usize, k: usize, m: u32, x: usize, a: f64, b: f64, p: f64) -> Result<f64> {
    if x > n {
        return Err(LbtError::invalid("x", format!("need x <= {n}")));
    }
    let spec = GameSpec::symmetric(n, k, m, a, b, p)?;
    let mix = DefenderMix::uniform(n, k)?;
    let alpha = marginal_no_lock(&mix, &Signal::canonical(n, x), spec.a(), spec.b())?;
    let (_, value) = exhaustive_best_allocation(&alpha, spec.c(), p, m)?;
    Ok(value)
}

/// Best point of a uniform grid over the defender's simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub mix: DefenderMix,
    pub value: f64,
    /// Bound on how far `value` can exceed the true minimum: largest loss
    /// slope in the L1 norm times the largest L1 distance to a grid point.
    pub slack: f64,
    pub points: u64,
}

/// Evaluates the defender's loss on every grid point `w / resolution` of the
/// simplex over the game's lock configurations and returns the smallest.
pub fn grid_min_defender(spec: &GameSpec, resolution: u32) -> Result<GridResult> {
    let Some(k) = spec.k() else {
        return Err(LbtError::Unsupported("a fixed number of locks".into()));
    };
    let n = spec.n();
    let configs: Vec<LockConfig> = if combinatorics::binomial(n as u64, k as u64) > MAX_GRID_CONFIGS as u128 {
        Vec::new()
    } else {
        combinatorics::k_subsets(n, k)
            .into_iter()
            .map(LockConfig::from_mask)
            .collect()
    };
    if configs.is_empty() {
        return Err(LbtError::Oversized {
            what: "lock configurations for the grid",
            got: combinatorics::binomial(n as u64, k as u64),
            limit: MAX_GRID_CONFIGS as u128,
        });
    }
    let dims = configs.len() - 1;
    let limit = if dims <= 1 { MAX_LINE_RESOLUTION } else { MAX_RESOLUTION };
    if resolution == 0 || resolution > limit {
        return Err(LbtError::invalid("resolution", format!("need 1..={limit} steps")));
    }

    let step = 1.0 / f64::from(resolution);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut points = 0u64;
    let mut failure = None;
    for_each_composition(configs.len(), resolution, |w| {
        if failure.is_some() {
            return;
        }
        points += 1;
        let weights: Vec<f64> = w.iter().map(|&wi| f64::from(wi) * step).collect();
        let loss = DefenderMix::normalized(configs.iter().copied().zip(weights.iter().copied()).collect())
            .and_then(|mix| best_response(&mix, spec));
        match loss {
            Ok(br) => {
                if best.as_ref().is_none_or(|b| br.value < b.1) {
                    best = Some((weights, br.value));
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (weights, value) = best.ok_or_else(|| LbtError::invalid("resolution", "empty grid"))?;
    let slope = configs
        .iter()
        .map(|&cfg| (0..n).filter(|&i| !cfg.contains(i)).map(|i| spec.c()[i]).sum::<f64>())
        .fold(0.0, f64::max);
    let mix = DefenderMix::normalized(configs.into_iter().zip(weights).collect())?;
    Ok(GridResult {
        mix,
        value,
        slack: slope * 2.0 * dims as f64 * step,
        points,
    })
}
