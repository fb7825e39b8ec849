//! Result documents. Every number is stored rounded to 12 significant
//! digits, so a document survives a write/read cycle unchanged.

use std::collections::BTreeMap;

use lbt_core::equilibrium::AttackerStrategy;
use lbt_core::symmetric::SymmetricValue;
use lbt_core::{BestResponse, DefenderMix, EquilibriumReport, SimResult, SpecInput, TwoSiteBreakpoints};
use serde::{Deserialize, Serialize};

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn finite12(x: f64) -> Option<f64> {
    x.is_finite().then(|| round12(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub instance: SpecInput,
    pub solver: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub strategies: Strategies,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategies {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defender_mix: Option<Vec<MixEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_signal: Option<Vec<SignalEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker: Option<Vec<AttackerEntry>>,
}

/// Lock configuration (1-based sites) with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixEntry {
    pub sites: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalEntry {
    pub signal: String,
    pub prob: f64,
    pub allocation: Vec<u32>,
    pub damage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerEntry {
    pub signal: String,
    pub moves: Vec<AttackerMove>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerMove {
    pub allocation: Vec<u32>,
    pub prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<BreakpointsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indifference_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_marginals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_site_loss: Option<Vec<f64>>,
    /// 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected_sites: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected_loss: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_x: Option<Vec<XRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<RatioRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakpointsDoc {
    pub e: [f64; 4],
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub c_star: f64,
    /// Absent for perfect tests, where it is infinite.
    pub kappa: Option<f64>,
}

/// One minus count of the symmetric game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XRow {
    pub x: usize,
    pub prob: f64,
    pub r: Option<f64>,
    pub d: Option<u32>,
    pub tie: Option<bool>,
    pub l_minus: u32,
    pub e_minus: u32,
    pub l_plus: u32,
    pub e_plus: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioRow {
    pub x: Option<usize>,
    pub prob: Option<f64>,
    pub p_minus: Option<f64>,
    pub p_plus: Option<f64>,
    pub r: Option<f64>,
}

/// A library value against its brute-force reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRow {
    pub label: String,
    pub value: f64,
    pub reference: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
}

impl Provenance {
    pub fn new() -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            tol: None,
            trials: None,
            policy: None,
        }
    }
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance::new()
    }
}

impl ResultDocument {
    pub fn new(instance: SpecInput, solver: &str) -> Self {
        ResultDocument {
            instance,
            solver: solver.to_string(),
            values: BTreeMap::new(),
            strategies: Strategies::default(),
            diagnostics: Diagnostics::default(),
            provenance: Provenance::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) {
        if let Some(v) = finite12(value) {
            self.values.insert(key.to_string(), v);
        }
    }
}

pub fn mix_entries(mix: &DefenderMix) -> Vec<MixEntry> {
    mix.support()
        .iter()
        .map(|(cfg, w)| MixEntry {
            sites: cfg.sites().iter().map(|i| i + 1).collect(),
            prob: round12(*w),
        })
        .collect()
}

pub fn signal_entries(br: &BestResponse) -> Vec<SignalEntry> {
    br.per_signal
        .iter()
        .map(|r| SignalEntry {
            signal: r.signal.to_string(),
            prob: round12(r.prob),
            allocation: r.allocation.bombs().to_vec(),
            damage: round12(r.damage),
        })
        .collect()
}

fn attacker_entries(attacker: &AttackerStrategy) -> Vec<AttackerEntry> {
    attacker
        .per_signal
        .iter()
        .map(|(s, moves)| AttackerEntry {
            signal: s.to_string(),
            moves: moves
                .iter()
                .map(|(alloc, w)| AttackerMove {
                    allocation: alloc.bombs().to_vec(),
                    prob: round12(*w),
                })
                .collect(),
        })
        .collect()
}

pub fn breakpoints_doc(bp: &TwoSiteBreakpoints) -> BreakpointsDoc {
    BreakpointsDoc {
        e: bp.e.map(round12),
        rho1: round12(bp.rho1),
        rho2: round12(bp.rho2),
        rho3: round12(bp.rho3),
        c_star: round12(bp.c_star),
        kappa: finite12(bp.kappa),
    }
}

fn round_all(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(round12).collect()
}

/// Fills values, strategies and diagnostics from an equilibrium report.
pub fn equilibrium_doc(doc: &mut ResultDocument, report: &EquilibriumReport, value_scale: f64) {
    doc.set("value", report.value * value_scale);
    doc.set("lower_bound", report.lower_bound * value_scale);
    doc.strategies.defender_mix = Some(mix_entries(&report.mix));
    doc.strategies.per_signal = report.best_response.as_ref().map(signal_entries);
    doc.strategies.attacker = report.attacker.as_ref().map(attacker_entries);
    let d = &mut doc.diagnostics;
    d.indifference_gap = Some(round12(report.indifference_gap * value_scale));
    d.lock_marginals = Some(round_all(&report.lock_marginals));
    let scaled: Vec<f64> = report.per_site_loss.iter().map(|l| l * value_scale).collect();
    d.per_site_loss = Some(round_all(&scaled));
    d.protected_sites = Some(report.protected_set.iter().map(|i| i + 1).collect());
    d.protected_loss = Some(
        report
            .protected_loss
            .iter()
            .map(|l| l.map(|v| round12(v * value_scale)))
            .collect(),
    );
    d.k_star = report.k_star;
    d.iterations = Some(report.iterations);
    d.stationary = report.stationary;
    d.breakpoints = report.breakpoints.as_ref().map(breakpoints_doc);
}

pub fn symmetric_rows(sv: &SymmetricValue) -> Vec<XRow> {
    sv.rows
        .iter()
        .map(|row| {
            let s = &row.solution;
            XRow {
                x: s.x,
                prob: round12(row.prob),
                r: s.r.and_then(finite12),
                d: s.depth.map(|d| d.d),
                tie: s.depth.map(|d| d.tie),
                l_minus: s.layout.l_minus,
                e_minus: s.layout.e_minus,
                l_plus: s.layout.l_plus,
                e_plus: s.layout.e_plus,
                value: round12(s.value),
            }
        })
        .collect()
}

pub fn sim_doc(doc: &mut ResultDocument, r: &SimResult, policy: &str) {
    doc.set("mean", r.mean);
    doc.set("std_error", r.std_error);
    doc.provenance.seed = Some(r.seed);
    doc.provenance.trials = Some(r.trials);
    doc.provenance.policy = Some(policy.to_string());
}

pub fn ratio_row(x: Option<usize>, prob: Option<f64>, p_minus: f64, p_plus: f64, r: f64) -> RatioRow {
    RatioRow {
        x,
        prob: prob.map(round12),
        p_minus: finite12(p_minus),
        p_plus: finite12(p_plus),
        r: finite12(r),
    }
}
