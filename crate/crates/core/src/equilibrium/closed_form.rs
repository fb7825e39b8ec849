//! Closed-form equilibria: single bomb with non-informative tests, and the
//! two-site game with one lock and one bomb.

use std::collections::BTreeMap;

use crate::error::{LbtError, Result};
use crate::model::{Allocation, DefenderMix, GameSpec, LockConfig, Param, Signal};

use super::{
    best_response, report_for_mix, spread, AttackerStrategy, EquilibriumReport, MAX_SIGNAL_SITES,
    PROTECTED_THRESHOLD,
};

/// Tolerance on reproducing lock marginals from a decomposed mix.
const MARGINAL_TOL: f64 = 1e-9;

/// Mix over `k`-subsets whose lock marginals equal `beta` (systematic
/// sampling on the cumulative marginals). Requires `0 <= beta_i <= 1` and
/// `sum beta = k`.
pub fn marginal_decomposition(beta: &[f64], k: usize) -> Result<DefenderMix> {
    let n = beta.len();
    if k == 0 || k > n {
        return Err(LbtError::invalid("k", format!("need 1 <= k <= {n}")));
    }
    if beta.iter().any(|b| !(-MARGINAL_TOL..=1.0 + MARGINAL_TOL).contains(b)) {
        return Err(LbtError::invalid("beta", "marginals must lie in [0, 1]"));
    }
    let total: f64 = beta.iter().sum();
    if (total - k as f64).abs() > MARGINAL_TOL {
        return Err(LbtError::invalid("beta", format!("marginals sum to {total}, expected {k}")));
    }
    let scale = k as f64 / total;
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for &b in beta {
        let last = *cum.last().unwrap_or(&0.0);
        cum.push(last + b.clamp(0.0, 1.0) * scale);
    }
    let mut cuts: Vec<f64> = cum.iter().map(|c| c - c.floor()).collect();
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);

    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    for pair in cuts.windows(2) {
        let len = pair[1] - pair[0];
        if len <= 0.0 {
            continue;
        }
        let u = 0.5 * (pair[0] + pair[1]);
        let mut mask = 0u64;
        for j in 0..k {
            let point = u + j as f64;
            let site = cum.partition_point(|&c| c <= point).clamp(1, n) - 1;
            mask |= 1 << site;
        }
        if mask.count_ones() as usize != k {
            return Err(LbtError::invalid("beta", "marginals do not admit a decomposition"));
        }
        *weights.entry(mask).or_insert(0.0) += len;
    }
    let mix = DefenderMix::normalized(
        weights
            .into_iter()
            .map(|(mask, w)| (LockConfig::from_mask(mask), w))
            .collect(),
    )?;
    let got = mix.lock_marginals(n);
    if got.iter().zip(beta).any(|(g, b)| (g - b).abs() > MARGINAL_TOL) {
        return Err(LbtError::invalid("beta", "decomposition does not reproduce the marginals"));
    }
    Ok(mix)
}

/// Equilibrium for one bomb, `p = 1` and non-informative tests
/// (`a = b = 1/2`). `c` must be sorted non-increasing.
///
/// The attacker's equilibrium strategy hits site `i <= k*` with probability
/// proportional to `1/c_i`, whatever the signal.
pub fn solve_noninformative(c: &[f64], k: usize) -> Result<EquilibriumReport> {
    let n = c.len();
    let spec = GameSpec::fixed(k, 1, Param::Scalar(0.5), Param::Scalar(0.5), c.to_vec(), 1.0)?;
    if k == 0 {
        return Err(LbtError::invalid("k", "need at least one lock"));
    }
    if c.windows(2).any(|w| w[0] < w[1]) {
        return Err(LbtError::invalid("c", "values must be sorted non-increasing"));
    }

    let mut inv_cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &ci in c {
        acc += 1.0 / ci;
        inv_cum.push(acc);
    }
    let k_star = (k..=n)
        .filter(|&j| c[j - 1] > (j - k) as f64 / inv_cum[j - 1])
        .max()
        .unwrap_or(k);
    let cap = inv_cum[k_star - 1];
    let value = (k_star - k) as f64 / cap;
    debug_assert!(k_star == n || value >= c[k_star] * (1.0 - 1e-12));

    let alpha: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(i, ci)| if i < k_star { (value / ci).min(1.0) } else { 1.0 })
        .collect();
    let beta: Vec<f64> = alpha.iter().map(|al| 1.0 - al).collect();
    let mix = if k == 1 {
        DefenderMix::normalized(
            beta.iter()
                .enumerate()
                .map(|(i, &b)| (LockConfig::from_mask(1 << i), b))
                .collect(),
        )?
    } else {
        marginal_decomposition(&beta, k)?
    };

    let attack: Vec<f64> = (0..n)
        .map(|i| if i < k_star { 1.0 / (c[i] * cap) } else { 0.0 })
        .collect();
    let per_site_loss: Vec<f64> = (0..n).map(|i| alpha[i] * c[i] * attack[i]).collect();
    let config_damage = |cfg: LockConfig| -> f64 {
        (0..n)
            .filter(|&i| !cfg.contains(i))
            .map(|i| attack[i] * c[i])
            .sum()
    };
    let mut protected_set = Vec::new();
    let mut protected_loss = vec![None; n];
    for (i, slot) in protected_loss.iter_mut().enumerate() {
        let (mut mass, mut loss) = (0.0, 0.0);
        for &(cfg, w) in mix.support() {
            if cfg.contains(i) {
                mass += w;
                loss += w * config_damage(cfg);
            }
        }
        if mass > PROTECTED_THRESHOLD {
            protected_set.push(i);
            *slot = Some(loss / mass);
        }
    }
    let indifference_gap = spread(protected_loss.iter().flatten().copied());
    let moves = (0..k_star)
        .map(|i| {
            let mut bombs = vec![0; n];
            bombs[i] = 1;
            (Allocation(bombs), attack[i])
        })
        .collect();
    let attacker = AttackerStrategy {
        per_signal: vec![(Signal::from_plus_mask(n, 0), moves)],
    };
    let best_response = if n <= MAX_SIGNAL_SITES {
        Some(best_response(&mix, &spec)?)
    } else {
        None
    };

    Ok(EquilibriumReport {
        lock_marginals: mix.lock_marginals(n),
        mix,
        value,
        per_site_loss,
        protected_set,
        protected_loss,
        indifference_gap,
        attacker: Some(attacker),
        best_response,
        breakpoints: None,
        k_star: Some(k_star),
        iterations: 0,
        lower_bound: value,
        stationary: None,
    })
}

/// Constants of the two-site game with site values `(c, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSiteBreakpoints {
    pub c: f64,
    /// `(ab, (1-b)(1-a), b(1-a), (1-b)a)`.
    pub e: [f64; 4],
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Value ratio at which the optimal lock probability jumps from `rho3` to `rho1`.
    pub c_star: f64,
    /// `e1 / e2`, infinite for perfect tests.
    pub kappa: f64,
    /// Equilibrium probability of locking the cheaper site.
    pub x_star: f64,
}

impl TwoSiteBreakpoints {
    pub fn new(c: f64, a: f64, b: f64) -> Self {
        let e = [a * b, (1.0 - b) * (1.0 - a), b * (1.0 - a), (1.0 - b) * a];
        let (rho1, rho2, kappa) = if e[1] == 0.0 {
            (0.0, 1.0, f64::INFINITY)
        } else {
            let kappa = e[0] / e[1];
            (1.0 / (c * kappa + 1.0), 1.0 / (c / kappa + 1.0), kappa)
        };
        let rho3 = 1.0 / (c + 1.0);
        let c_star = (e[0] + e[2] + e[3]) / e[0];
        let x_star = if c < c_star { rho3 } else { rho1 };
        TwoSiteBreakpoints {
            c,
            e,
            rho1,
            rho2,
            rho3,
            c_star,
            kappa,
            x_star,
        }
    }

    /// Equilibrium loss when `c <= c*`.
    pub fn low_branch_value(&self) -> f64 {
        let [e1, _, e3, e4] = self.e;
        // a + b = 2ab + b(1-a) + a(1-b)
        self.c * (2.0 * e1 + e3 + e4) / (1.0 + self.c)
    }

    /// Equilibrium loss when `c >= c*`.
    pub fn high_branch_value(&self) -> f64 {
        if self.kappa.is_infinite() {
            return 1.0;
        }
        self.c / (1.0 / self.kappa + self.c)
    }

    pub fn value(&self) -> f64 {
        if self.c < self.c_star {
            self.low_branch_value()
        } else {
            self.high_branch_value()
        }
    }
}

/// Expected loss in the two-site game when the cheaper site is locked with
/// probability `x` and the attacker best-responds.
pub fn two_site_damage(x: f64, c: f64, a: f64, b: f64) -> f64 {
    let e = TwoSiteBreakpoints::new(c, a, b).e;
    let (cx, y) = (c * x, 1.0 - x);
    (cx * e[0]).max(y * e[1]) + (cx * e[1]).max(y * e[0]) + (e[2] + e[3]) * cx.max(y)
}

fn supported_tests(a: f64, b: f64) -> bool {
    let informative = a > 0.5 && a < 1.0 && b > 0.5 && b < 1.0;
    informative || (a == 1.0 && b == 1.0) || (a == 0.5 && b == 0.5)
}

/// Equilibrium of the game with two sites valued `(c, 1)`, one lock, one
/// bomb and `p = 1`.
pub fn solve_2x1(c: f64, a: f64, b: f64) -> Result<EquilibriumReport> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(LbtError::invalid("c", format!("need a finite value >= 1, got {c}")));
    }
    if !supported_tests(a, b) {
        return Err(LbtError::invalid(
            "a,b",
            format!("need 1/2 < a, b < 1, or a = b = 1, or a = b = 1/2; got a = {a}, b = {b}"),
        ));
    }
    let spec = GameSpec::fixed(1, 1, Param::Scalar(a), Param::Scalar(b), vec![c, 1.0], 1.0)?;
    let bp = TwoSiteBreakpoints::new(c, a, b);
    let mix = DefenderMix::normalized(vec![
        (LockConfig::from_mask(0b10), bp.x_star),
        (LockConfig::from_mask(0b01), 1.0 - bp.x_star),
    ])?;
    let mut report = report_for_mix(&spec, mix, bp.value(), &[])?;
    report.breakpoints = Some(bp);
    Ok(report)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::equilibrium::expected_loss;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn singleton(i: usize) -> LockConfig {
        LockConfig::from_mask(1 << i)
    }

    #[test]
    fn noninformative_three_sites() {
        let r = solve_noninformative(&[4.0, 3.0, 2.0], 1).unwrap();
        assert_eq!(r.k_star, Some(3));
        assert!(close(r.value, 24.0 / 13.0, 1e-12));
        for (i, want) in [7.0, 5.0, 1.0].iter().enumerate() {
            assert!(close(r.mix.prob(singleton(i)), want / 13.0, 1e-12));
        }
        let alpha: Vec<f64> = r.lock_marginals.iter().map(|b| 1.0 - b).collect();
        for (al, want) in alpha.iter().zip([6.0, 8.0, 12.0]) {
            assert!(close(*al, want / 13.0, 1e-12));
        }
        assert!(r.indifference_gap < 1e-12);
        assert!(close(r.per_site_loss.iter().sum::<f64>(), r.value, 1e-12));
        assert!(close(r.best_response.unwrap().value, r.value, 1e-12));
    }

    #[test]
    fn noninformative_drops_cheap_site() {
        let r = solve_noninformative(&[4.0, 3.0, 1.0], 1).unwrap();
        assert_eq!(r.k_star, Some(2));
        assert!(close(r.value, 12.0 / 7.0, 1e-12));
        assert!(close(r.mix.prob(singleton(0)), 4.0 / 7.0, 1e-12));
        assert!(close(r.mix.prob(singleton(1)), 3.0 / 7.0, 1e-12));
        assert_eq!(r.mix.prob(singleton(2)), 0.0);
        assert_eq!(r.protected_set, vec![0, 1]);
        assert!(r.value > 1.0);
    }

    #[test]
    fn noninformative_two_sites() {
        for c in [1.0, 2.0, 5.0, 100.0] {
            let r = solve_noninformative(&[c, 1.0], 1).unwrap();
            assert!(close(r.value, c / (c + 1.0), 1e-12));
            assert!(close(r.mix.prob(singleton(0)), c / (c + 1.0), 1e-12));
            assert!(close(r.mix.prob(singleton(1)), 1.0 / (c + 1.0), 1e-12));
        }
    }

    #[test]
    fn noninformative_rejects_bad_input() {
        assert!(solve_noninformative(&[1.0, 2.0], 1).is_err());
        assert!(solve_noninformative(&[3.0, 2.0], 2).is_err());
        assert!(solve_noninformative(&[3.0, 0.0], 1).is_err());
    }

    #[test]
    fn noninformative_several_locks() {
        let c = [5.0, 4.0, 3.0, 2.0, 1.0];
        let r = solve_noninformative(&c, 2).unwrap();
        assert!(close(r.lock_marginals.iter().sum::<f64>(), 2.0, 1e-9));
        assert!(r.mix.support().iter().all(|e| e.0.len() == 2));
        assert!(r.indifference_gap < 1e-9);
        let br = r.best_response.as_ref().unwrap();
        assert!(close(br.value, r.value, 1e-9));
        for i in 0..r.k_star.unwrap() {
            let alpha = 1.0 - r.lock_marginals[i];
            assert!(close(alpha * c[i], r.value, 1e-9));
        }
    }

    #[test]
    fn decomposition_reproduces_marginals() {
        let beta = [0.9, 0.7, 0.5, 0.4, 0.3, 0.2];
        let mix = marginal_decomposition(&beta, 3).unwrap();
        for (g, b) in mix.lock_marginals(6).iter().zip(beta) {
            assert!(close(*g, b, 1e-12));
        }
        let full = marginal_decomposition(&[1.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(full.support(), &[(LockConfig::from_mask(0b011), 1.0)]);
        assert!(marginal_decomposition(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn two_site_examples() {
        let (a, b) = (7.0 / 12.0, 9.0 / 12.0);
        let bp = TwoSiteBreakpoints::new(2.0, a, b);
        assert!(close(bp.c_star, 129.0 / 63.0, 1e-12));

        let r = solve_2x1(2.0, a, b).unwrap();
        assert!(close(r.value, 8.0 / 9.0, 1e-12));
        assert!(close(r.mix.prob(singleton(1)), 1.0 / 3.0, 1e-12));
        assert!(r.indifference_gap < 1e-9);

        let r = solve_2x1(3.0, a, b).unwrap();
        assert!(close(r.value, 63.0 / 68.0, 1e-12));
        assert!(close(r.mix.prob(singleton(1)), 5.0 / 68.0, 1e-12));
        assert!(r.indifference_gap < 1e-9);
        assert!(close(r.per_site_loss.iter().sum::<f64>(), r.value, 1e-12));
    }

    #[test]
    fn two_site_branches_meet_at_threshold() {
        for (a, b) in [(7.0 / 12.0, 0.75), (0.6, 0.9), (0.99, 0.51)] {
            let bp = TwoSiteBreakpoints::new(1.0, a, b);
            let at = TwoSiteBreakpoints::new(bp.c_star, a, b);
            let want = a + b - a * b;
            assert!(close(at.low_branch_value(), want, 1e-12));
            assert!(close(at.high_branch_value(), want, 1e-12));
        }
    }

    #[test]
    fn two_site_limits() {
        for c in [1.0, 2.0, 7.5] {
            let r = solve_2x1(c, 1.0, 1.0).unwrap();
            assert_eq!(r.mix.prob(singleton(1)), 0.0);
            assert!(close(r.value, 1.0, 1e-12));
            let r = solve_2x1(c, 0.5, 0.5).unwrap();
            assert!(close(r.mix.prob(singleton(1)), 1.0 / (1.0 + c), 1e-12));
            assert!(close(r.value, c / (1.0 + c), 1e-12));
        }
        assert!(solve_2x1(0.5, 0.7, 0.7).is_err());
        assert!(solve_2x1(2.0, 0.4, 0.7).is_err());
    }

    #[test]
    fn two_site_pieces_match_loss() {
        let (a, b) = (7.0 / 12.0, 0.75);
        for c in [1.0, 2.0, 3.0] {
            let bp = TwoSiteBreakpoints::new(c, a, b);
            assert!(bp.rho1 < bp.rho3 && bp.rho3 < bp.rho2 && bp.rho2 < 1.0);
            let spec = GameSpec::fixed(1, 1, a.into(), b.into(), vec![c, 1.0], 1.0).unwrap();
            for step in 0..=50 {
                let x = step as f64 / 50.0;
                let e1 = bp.e[0];
                let piece = if x <= bp.rho1 {
                    1.0 - x
                } else if x <= bp.rho3 {
                    e1 * (bp.c_star + x * (c - bp.c_star))
                } else if x <= bp.rho2 {
                    e1 * (1.0 + x * (c * bp.c_star - 1.0))
                } else {
                    c * x
                };
                let direct = two_site_damage(x, c, a, b);
                assert!(close(piece, direct, 1e-12), "c={c} x={x}");
                let mix = DefenderMix::normalized(vec![(singleton(1), x), (singleton(0), 1.0 - x)]).unwrap();
                let loss = expected_loss(&mix, &spec).unwrap().total;
                assert!(close(loss, direct, 1e-12));
                assert!(direct >= bp.value() - 1e-12);
            }
        }
    }
}
