//! Solvers for the locks, bombs and testing game.
//!
//! A defender hides `k` locks among `n` sites, an attacker sees one noisy
//! test per site and then drops `m` bombs. This crate computes posteriors
//! over lock placements, the attacker's optimal allocations, defender
//! equilibria (closed forms and a cutting-plane solver), and brute-force and
//! Monte Carlo references for all of them.

pub mod combinatorics;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod sim;
pub mod symmetric;

pub use equilibrium::{
    best_response, expected_loss, greedy_allocation, solve_2x1, solve_general, solve_general_with,
    solve_noninformative, BestResponse, EquilibriumReport, GeneralOptions, LossBreakdown, SignalResponse,
    TwoSiteBreakpoints,
};
pub use error::{LbtError, Result, ValidationReport};
pub use model::{
    damage_given_locks, explosion_prob, validate_spec, Allocation, DefenderMix, GameSpec, LockConfig, LockMode,
    Param, Signal, SpecInput,
};
pub use oracle::{exhaustive_best_allocation, exhaustive_symmetric_value, grid_min_defender, GridResult};
pub use posterior::{
    critical_ratio_a, critical_ratio_b, marginal_no_lock, minus_count_dist, posterior_locks, signal_prob,
    CriticalRatios, MinusCountDist,
};
pub use sim::{simulate, simulate_with_workers, Policy, SimResult};
pub use symmetric::{depth, uap_allocate, value, value_given_x, Depth, SymmetricValue, UapLayout, XSolution};
