//! Domain types shared by every solver: the game instance, lock placements,
//! test signals, bomb allocations and defender mixes.
//!
//! Site indices are 0-based inside the library. Text formats (`Display`,
//! the CLI documents) use 1-based indices.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{self, MAX_SITES};
use crate::error::{LbtError, Result, ValidationReport};

/// Tolerance on the total mass of a [`DefenderMix`].
pub const MIX_SUM_TOL: f64 = 1e-12;

/// How locks are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum LockMode {
    /// Exactly `k` locks.
    Fixed { k: usize },
    /// Each site locked independently with probability `lambda`.
    Iid { lambda: f64 },
}

/// A per-site parameter given either once for all sites or site by site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Scalar(v)
    }
}

impl From<Vec<f64>> for Param {
    fn from(v: Vec<f64>) -> Self {
        Param::Vector(v)
    }
}

impl From<&[f64]> for Param {
    fn from(v: &[f64]) -> Self {
        Param::Vector(v.to_vec())
    }
}

/// Unvalidated instance description, as read from an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecInput {
    pub n: usize,
    pub locks: LockMode,
    pub m: u32,
    pub a: Param,
    pub b: Param,
    pub c: Param,
    pub p: f64,
}

/// A validated game instance. Per-site parameters are always full vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSpec {
    n: usize,
    lock_mode: LockMode,
    m: u32,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    p: f64,
    symmetric: bool,
}

impl GameSpec {
    pub fn new(input: &SpecInput) -> Result<Self> {
        validate_spec(input)
    }

    /// Symmetric instance with `k` fixed locks and unit site values.
    pub fn symmetric(n: usize, k: usize, m: u32, a: f64, b: f64, p: f64) -> Result<Self> {
        validate_spec(&SpecInput {
            n,
            locks: LockMode::Fixed { k },
            m,
            a: a.into(),
            b: b.into(),
            c: 1.0.into(),
            p,
        })
    }

    /// Instance with `k` fixed locks and arbitrary per-site parameters.
    pub fn fixed(k: usize, m: u32, a: Param, b: Param, c: Vec<f64>, p: f64) -> Result<Self> {
        validate_spec(&SpecInput {
            n: c.len(),
            locks: LockMode::Fixed { k },
            m,
            a,
            b,
            c: Param::Vector(c),
            p,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn lock_mode(&self) -> LockMode {
        self.lock_mode
    }
    /// Number of locks in fixed mode.
    pub fn k(&self) -> Option<usize> {
        match self.lock_mode {
            LockMode::Fixed { k } => Some(k),
            LockMode::Iid { .. } => None,
        }
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    /// All sensitivities equal, all specificities equal, all values one.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Same instance with a different bomb budget.
    pub fn with_bombs(&self, m: u32) -> Self {
        GameSpec { m, ..self.clone() }
    }

    /// `k` for symmetric fixed-lock instances, error otherwise.
    pub(crate) fn require_symmetric_fixed(&self) -> Result<usize> {
        match (self.symmetric, self.lock_mode) {
            (true, LockMode::Fixed { k }) => Ok(k),
            _ => Err(LbtError::Unsupported(
                "a symmetric instance with a fixed number of locks".into(),
            )),
        }
    }

    /// The prior this instance implies when the defender plays no strategy of
    /// their own: uniform over k-subsets, or the independent product prior.
    pub fn default_mix(&self) -> Result<DefenderMix> {
        match self.lock_mode {
            LockMode::Fixed { k } => DefenderMix::uniform(self.n, k),
            LockMode::Iid { lambda } => DefenderMix::iid(self.n, lambda),
        }
    }
}

fn broadcast(
    report: &mut ValidationReport,
    field: &'static str,
    param: &Param,
    n: usize,
) -> Vec<f64> {
    match param {
        Param::Scalar(v) => vec![*v; n],
        Param::Vector(v) => {
            if v.len() != n {
                report.push(field, format!("expected {n} entries, found {}", v.len()));
            }
            v.clone()
        }
    }
}

fn is_probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every instance invariant and broadcasts scalar parameters.
///
/// All violations are collected; the error lists each with its field name.
pub fn validate_spec(input: &SpecInput) -> Result<GameSpec> {
    let mut report = ValidationReport::default();
    let n = input.n;
    if n == 0 {
        report.push("n", "must be at least 1");
    } else if n > MAX_SITES {
        report.push("n", format!("must be at most {MAX_SITES}"));
    }
    match input.locks {
        LockMode::Fixed { k } => {
            if k >= n {
                report.push("k", "k must be < n");
            }
        }
        LockMode::Iid { lambda } => {
            if !is_probability(lambda) {
                report.push("lambda", "must lie in [0, 1]");
            }
        }
    }
    let a = broadcast(&mut report, "a", &input.a, n);
    let b = broadcast(&mut report, "b", &input.b, n);
    let c = broadcast(&mut report, "c", &input.c, n);
    for (field, values) in [("a", &a), ("b", &b)] {
        if let Some(i) = values.iter().position(|&v| !is_probability(v)) {
            report.push(field, format!("entry {} is outside [0, 1]", i + 1));
        }
    }
    if let Some(i) = c.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
        report.push("c", format!("entry {} must be a positive finite value", i + 1));
    }
    if !is_probability(input.p) {
        report.push("p", "must lie in [0, 1]");
    }
    if !report.is_empty() {
        return Err(LbtError::Validation(report));
    }
    let symmetric = a.iter().all(|&v| v == a[0])
        && b.iter().all(|&v| v == b[0])
        && c.iter().all(|&v| v == 1.0);
    Ok(GameSpec {
        n,
        lock_mode: input.locks,
        m: input.m,
        a,
        b,
        c,
        p: input.p,
        symmetric,
    })
}

/// Sites holding a lock, stored as a bitmask over 0-based site indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LockConfig(u64);

impl LockConfig {
    pub const EMPTY: LockConfig = LockConfig(0);

    /// From distinct 0-based site indices, each below [`MAX_SITES`].
    pub fn from_sites(sites: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &s in sites {
            if s >= MAX_SITES {
                return Err(LbtError::invalid("sites", format!("index {s} out of range")));
            }
            if mask >> s & 1 == 1 {
                return Err(LbtError::invalid("sites", format!("index {s} repeated")));
            }
            mask |= 1 << s;
        }
        Ok(LockConfig(mask))
    }

    pub fn from_mask(mask: u64) -> Self {
        LockConfig(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn contains(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Locked sites in increasing order (0-based).
    pub fn sites(self) -> Vec<usize> {
        (0..64).filter(|&i| self.contains(i)).collect()
    }

    /// Highest locked index plus one; zero for the empty configuration.
    pub fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }
}

impl fmt::Display for LockConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.sites().into_iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        f.write_str("}")
    }
}

/// A vector of test outcomes; bit `i` of `plus` set means site `i` tested plus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signal {
    plus: u64,
    n: usize,
}

impl Signal {
    pub fn from_plus_mask(n: usize, plus: u64) -> Self {
        let keep = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        Signal { plus: plus & keep, n }
    }

    /// From outcomes where 1 is plus and 0 is minus.
    pub fn from_outcomes(outcomes: &[u8]) -> Result<Self> {
        if outcomes.len() > MAX_SITES {
            return Err(LbtError::invalid("outcomes", "too many sites"));
        }
        let mut plus = 0u64;
        for (i, &o) in outcomes.iter().enumerate() {
            match o {
                0 => {}
                1 => plus |= 1 << i,
                other => {
                    return Err(LbtError::invalid("outcomes", format!("{other} is not 0 or 1")))
                }
            }
        }
        Ok(Signal {
            plus,
            n: outcomes.len(),
        })
    }

    /// Parses `+`/`-` strings such as `"-+"`.
    pub fn parse(text: &str) -> Result<Self> {
        let outcomes: Vec<u8> = text
            .chars()
            .map(|ch| match ch {
                '+' | '1' => Ok(1),
                '-' | '0' => Ok(0),
                other => Err(LbtError::invalid("signal", format!("unexpected `{other}`"))),
            })
            .collect::<Result<_>>()?;
        Signal::from_outcomes(&outcomes)
    }

    /// Every signal on `n` sites, in increasing order of the plus mask.
    pub fn all(n: usize) -> impl Iterator<Item = Signal> {
        (0..1u64 << n).map(move |plus| Signal { plus, n })
    }

    /// Canonical signal with `x` minuses on the first `x` sites.
    pub fn canonical(n: usize, x: usize) -> Self {
        let all = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        let minus = if x >= 64 { u64::MAX } else { (1u64 << x) - 1 };
        Signal {
            plus: all & !minus,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn plus_mask(&self) -> u64 {
        self.plus
    }

    pub fn is_plus(&self, site: usize) -> bool {
        self.plus >> site & 1 == 1
    }

    /// Number of minus outcomes, `N(s)`.
    pub fn minus_count(&self) -> usize {
        self.n - self.plus.count_ones() as usize
    }

    pub fn outcomes(&self) -> Vec<u8> {
        (0..self.n).map(|i| u8::from(self.is_plus(i))).collect()
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.is_plus(i) { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Bomb counts per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Allocation(pub Vec<u32>);

impl Allocation {
    pub fn zeros(n: usize) -> Self {
        Allocation(vec![0; n])
    }

    pub fn bombs(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Probability distribution over lock configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenderMix {
    support: Vec<(LockConfig, f64)>,
}

impl DefenderMix {
    /// Validates non-negativity, distinct configurations and unit mass
    /// within [`MIX_SUM_TOL`].
    pub fn new(support: Vec<(LockConfig, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(LbtError::invalid("mix", "empty support"));
        }
        let mut seen = HashSet::new();
        let mut total = 0.0;
        for &(cfg, w) in &support {
            if !(w.is_finite() && w >= 0.0) {
                return Err(LbtError::invalid("mix", format!("weight {w} on {cfg}")));
            }
            if !seen.insert(cfg) {
                return Err(LbtError::invalid("mix", format!("configuration {cfg} repeated")));
            }
            total += w;
        }
        if (total - 1.0).abs() > MIX_SUM_TOL {
            return Err(LbtError::invalid("mix", format!("weights sum to {total}")));
        }
        Ok(DefenderMix { support })
    }

    /// Rescales non-negative weights to unit mass and drops zero entries.
    pub fn normalized(entries: Vec<(LockConfig, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(LbtError::invalid("mix", "weights must have positive finite sum"));
        }
        let scaled = entries
            .into_iter()
            .filter(|e| e.1 > 0.0)
            .map(|(c, w)| (c, w / total))
            .collect();
        DefenderMix::new(scaled)
    }

    pub fn point(config: LockConfig) -> Self {
        DefenderMix {
            support: vec![(config, 1.0)],
        }
    }

    /// Uniform over all `k`-subsets of `n` sites.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        if k > n || n > MAX_SITES {
            return Err(LbtError::invalid("k", "need k <= n <= 62"));
        }
        let count = combinatorics::binomial(n as u64, k as u64);
        if count > 1 << 20 {
            return Err(LbtError::Oversized {
                what: "lock configurations",
                got: count,
                limit: 1 << 20,
            });
        }
        let w = 1.0 / count as f64;
        Ok(DefenderMix {
            support: combinatorics::k_subsets(n, k)
                .into_iter()
                .map(|m| (LockConfig(m), w))
                .collect(),
        })
    }

    /// Independent locks with probability `lambda` each, over all `2^n` subsets.
    pub fn iid(n: usize, lambda: f64) -> Result<Self> {
        if n > 20 {
            return Err(LbtError::Oversized {
                what: "sites for an independent-lock prior",
                got: n as u128,
                limit: 20,
            });
        }
        let support = (0..1u64 << n)
            .map(|mask| {
                let locked = mask.count_ones() as i32;
                let w = lambda.powi(locked) * (1.0 - lambda).powi(n as i32 - locked);
                (LockConfig(mask), w)
            })
            .filter(|e| e.1 > 0.0)
            .collect();
        DefenderMix::normalized(support)
    }

    pub fn support(&self) -> &[(LockConfig, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Probability of `config`; zero when it is outside the support.
    pub fn prob(&self, config: LockConfig) -> f64 {
        self.support
            .iter()
            .find(|e| e.0 == config)
            .map_or(0.0, |e| e.1)
    }

    /// Prior lock marginals `beta_i = P(T_i = 1)`.
    pub fn lock_marginals(&self, n: usize) -> Vec<f64> {
        let mut beta = vec![0.0; n];
        for &(cfg, w) in &self.support {
            for (i, b) in beta.iter_mut().enumerate() {
                if cfg.contains(i) {
                    *b += w;
                }
            }
        }
        beta
    }

    pub(crate) fn check_sites(&self, n: usize) -> Result<()> {
        match self.support.iter().find(|e| e.0.span() > n) {
            Some((cfg, _)) => Err(LbtError::invalid(
                "mix",
                format!("configuration {cfg} exceeds {n} sites"),
            )),
            None => Ok(()),
        }
    }
}

/// Probability that `u` bombs with independent explosion probability `p`
/// produce at least one explosion: `1 - (1-p)^u`.
pub fn explosion_prob(u: u32, p: f64) -> f64 {
    let survival = 1.0 - p;
    match i32::try_from(u) {
        Ok(e) => 1.0 - survival.powi(e),
        Err(_) => 1.0 - survival.powf(f64::from(u)),
    }
}

/// Expected destroyed value when locks sit at `config` and bombs follow
/// `alloc`. Locked sites are never destroyed.
pub fn damage_given_locks(config: LockConfig, alloc: &Allocation, c: &[f64], p: f64) -> Result<f64> {
    if alloc.len() != c.len() {
        return Err(LbtError::DimensionMismatch {
            what: "allocation",
            expected: c.len(),
            got: alloc.len(),
        });
    }
    if config.span() > c.len() {
        return Err(LbtError::DimensionMismatch {
            what: "lock configuration",
            expected: c.len(),
            got: config.span(),
        });
    }
    Ok(alloc
        .bombs()
        .iter()
        .zip(c)
        .enumerate()
        .filter(|(i, _)| !config.contains(*i))
        .map(|(_, (&u, &ci))| ci * explosion_prob(u, p))
        .sum())
}
