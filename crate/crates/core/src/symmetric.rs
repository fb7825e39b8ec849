//! Optimal attacker play in the symmetric fixed-lock model.
//!
//! Given `x` minus signals, only the posterior no-lock probabilities of a
//! minus site and of a plus site matter. Bombs are laid down in layers:
//! minus sites are filled to depth `d(x)` first, then the two groups
//! alternate one layer at a time ("fill and switch").

use crate::error::{LbtError, Result};
use crate::model::{explosion_prob, Allocation};
use crate::posterior::{critical_ratio_a, minus_count_dist};

/// Tolerance used to detect `r * q^(d-1) == 1`.
pub const TIE_TOL: f64 = 1e-12;

/// Layer lead of the minus group, and whether the lead is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Depth {
    pub d: u32,
    /// `r * (1-p)^(d-1) == 1`: moving the first bomb of layer `d` to a plus
    /// site gives another optimal allocation.
    pub tie: bool,
}

/// Smallest `i >= 1` with `r * (1-p)^i < 1`.
pub fn depth(r: f64, p: f64) -> Result<Depth> {
    if !(r.is_finite() && r > 0.0) {
        return Err(LbtError::invalid(
            "r",
            format!("must be finite and positive, got {r}; use the perfect-testing path"),
        ));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(LbtError::invalid("p", "depth needs 0 < p <= 1"));
    }
    let q = 1.0 - p;
    let mut d = 1u32;
    let mut level = r * q;
    // a level within TIE_TOL of one counts as one, so exact ties are stable
    while level >= 1.0 - TIE_TOL {
        d += 1;
        level *= q;
    }
    let prev = r * q.powi(d as i32 - 1);
    Ok(Depth {
        d,
        tie: (prev - 1.0).abs() <= TIE_TOL,
    })
}

/// Bomb layout of the fill-and-switch process.
///
/// Minus sites hold `l_minus` bombs each plus one extra on `e_minus` of them;
/// likewise for plus sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UapLayout {
    pub n: usize,
    pub x: usize,
    pub d: u32,
    pub l_minus: u32,
    pub e_minus: u32,
    pub l_plus: u32,
    pub e_plus: u32,
}

impl UapLayout {
    pub fn minus_bombs(&self) -> u64 {
        u64::from(self.l_minus) * self.x as u64 + u64::from(self.e_minus)
    }

    pub fn plus_bombs(&self) -> u64 {
        u64::from(self.l_plus) * (self.n - self.x) as u64 + u64::from(self.e_plus)
    }

    /// Per-site levels of the minus group, highest first.
    pub fn minus_levels(&self) -> Vec<u32> {
        group_levels(self.x, self.l_minus, self.e_minus)
    }

    /// Per-site levels of the plus group, highest first.
    pub fn plus_levels(&self) -> Vec<u32> {
        group_levels(self.n - self.x, self.l_plus, self.e_plus)
    }

    /// Concrete allocation for a signal: extra bombs go to the lowest-indexed
    /// sites of each group. `minus` flags the minus-tested sites.
    pub fn allocation_for(&self, minus: &[bool]) -> Result<Allocation> {
        let count = minus.iter().filter(|&&f| f).count();
        if minus.len() != self.n || count != self.x {
            return Err(LbtError::invalid(
                "signal",
                format!("layout is for {} sites with {} minuses", self.n, self.x),
            ));
        }
        let (mut seen_minus, mut seen_plus) = (0u32, 0u32);
        let bombs = minus
            .iter()
            .map(|&is_minus| {
                if is_minus {
                    seen_minus += 1;
                    self.l_minus + u32::from(seen_minus <= self.e_minus)
                } else {
                    seen_plus += 1;
                    self.l_plus + u32::from(seen_plus <= self.e_plus)
                }
            })
            .collect();
        Ok(Allocation(bombs))
    }

    /// Checks the structural invariants of a fill-and-switch layout; returns
    /// a description of the first violation.
    pub fn check_invariants(&self, m: u32) -> std::result::Result<(), String> {
        let (x, plus) = (self.x as u64, (self.n - self.x) as u64);
        if self.minus_bombs() + self.plus_bombs() != u64::from(m) {
            return Err(format!("{self:?} does not hold {m} bombs"));
        }
        if (x > 0 && u64::from(self.e_minus) >= x) || (x == 0 && self.e_minus != 0) {
            return Err(format!("{self:?}: e_minus out of range"));
        }
        if (plus > 0 && u64::from(self.e_plus) >= plus) || (plus == 0 && self.e_plus != 0) {
            return Err(format!("{self:?}: e_plus out of range"));
        }
        if self.e_minus > 0 && self.e_plus > 0 {
            return Err(format!("{self:?}: both groups have partial layers"));
        }
        if x == 0 || plus == 0 {
            return Ok(());
        }
        let lead = i64::from(self.l_minus) - i64::from(self.l_plus);
        let d = i64::from(self.d);
        if self.plus_bombs() == 0 && self.minus_bombs() > u64::from(self.d) * x {
            return Err(format!("{self:?}: plus group empty above depth"));
        }
        if self.e_plus > 0 && (self.e_minus != 0 || lead != d) {
            return Err(format!("{self:?}: partial plus layer needs lead d"));
        }
        if self.e_plus == 0 && self.l_plus > 0 && lead != d - 1 && lead != d {
            return Err(format!("{self:?}: lead must be d-1 or d"));
        }
        Ok(())
    }
}

fn group_levels(size: usize, level: u32, extra: u32) -> Vec<u32> {
    (0..size)
        .map(|i| level + u32::from((i as u32) < extra))
        .collect()
}

/// Fill-and-switch layout of `m` bombs with `x` minus sites among `n`.
///
/// With `x == 0` or `x == n` there is a single group and bombs are spread
/// one layer at a time.
pub fn uap_allocate(n: usize, x: usize, m: u32, d: u32) -> Result<UapLayout> {
    if n == 0 || x > n {
        return Err(LbtError::invalid("x", "need n >= 1 and x <= n"));
    }
    if d == 0 {
        return Err(LbtError::invalid("d", "depth is at least 1"));
    }
    let mut layout = UapLayout {
        n,
        x,
        d,
        l_minus: 0,
        e_minus: 0,
        l_plus: 0,
        e_plus: 0,
    };
    let m64 = u64::from(m);
    let (xs, ps) = (x as u64, (n - x) as u64);
    if x == n {
        layout.l_minus = (m64 / xs) as u32;
        layout.e_minus = (m64 % xs) as u32;
        return Ok(layout);
    }
    if x == 0 {
        layout.l_plus = (m64 / ps) as u32;
        layout.e_plus = (m64 % ps) as u32;
        return Ok(layout);
    }
    let head = u64::from(d) * xs;
    if m64 <= head {
        layout.l_minus = (m64 / xs) as u32;
        layout.e_minus = (m64 % xs) as u32;
        return Ok(layout);
    }
    // Each further round adds one plus layer, then one minus layer.
    let rest = m64 - head;
    let rounds = rest / n as u64;
    let rem = rest % n as u64;
    let rounds32 = rounds as u32;
    if rem < ps {
        layout.l_minus = d + rounds32;
        layout.l_plus = rounds32;
        layout.e_plus = rem as u32;
    } else {
        layout.l_minus = d + rounds32;
        layout.l_plus = rounds32 + 1;
        layout.e_minus = (rem - ps) as u32;
    }
    Ok(layout)
}

/// Sum of `p(u_i)` over a group of `size` sites at `level` with `extra` of
/// them one higher.
fn group_hits(size: usize, level: u32, extra: u32, p: f64) -> f64 {
    f64::from(extra) * explosion_prob(level + 1, p)
        + (size as f64 - f64::from(extra)) * explosion_prob(level, p)
}

/// Optimal play for one minus count.
#[derive(Debug, Clone, PartialEq)]
pub struct XSolution {
    pub x: usize,
    /// Posterior no-lock probability of a minus site.
    pub p_minus: f64,
    /// Posterior no-lock probability of a plus site.
    pub p_plus: f64,
    /// `p_minus / p_plus`, `None` for `x` in {0, n}.
    pub r: Option<f64>,
    pub depth: Option<Depth>,
    pub layout: UapLayout,
    pub value: f64,
}

/// `v(x, m)`: best expected number of destroyed sites given `x` minuses.
pub fn value_given_x(n: usize, k: usize, m: u32, x: usize, a: f64, b: f64, p: f64) -> Result<XSolution> {
    if x > n {
        return Err(LbtError::invalid("x", "must not exceed n"));
    }
    if x == 0 || x == n {
        let t = crate::posterior::symmetric_no_lock(n, k, x, a, b)?.0;
        let layout = uap_allocate(n, x, m, 1)?;
        let value = if x == n {
            t * group_hits(n, layout.l_minus, layout.e_minus, p)
        } else {
            t * group_hits(n, layout.l_plus, layout.e_plus, p)
        };
        return Ok(XSolution {
            x,
            p_minus: t,
            p_plus: t,
            r: None,
            depth: None,
            layout,
            value,
        });
    }
    let ratios = critical_ratio_a(n, k, x, a, b)?;
    let (p_minus, p_plus) = (ratios.p_minus, ratios.p_plus);
    let (depth_info, layout) = if m == 0 || p == 0.0 {
        // every allocation scores zero
        (None, uap_allocate(n, x, m, 1)?)
    } else if ratios.unbounded {
        // plus sites are certainly locked: everything goes to the minus group
        (None, uap_allocate(n, x, m, m.max(1))?)
    } else if ratios.r >= 1.0 {
        let dep = depth(ratios.r, p)?;
        (Some(dep), uap_allocate(n, x, m, dep.d)?)
    } else {
        // Uninformative direction: the plus group leads instead.
        let dep = depth(1.0 / ratios.r, p)?;
        let swapped = uap_allocate(n, n - x, m, dep.d)?;
        let layout = UapLayout {
            n,
            x,
            d: dep.d,
            l_minus: swapped.l_plus,
            e_minus: swapped.e_plus,
            l_plus: swapped.l_minus,
            e_plus: swapped.e_minus,
        };
        (Some(dep), layout)
    };
    let value = p_minus * group_hits(x, layout.l_minus, layout.e_minus, p)
        + p_plus * group_hits(n - x, layout.l_plus, layout.e_plus, p);
    Ok(XSolution {
        x,
        p_minus,
        p_plus,
        r: Some(ratios.r),
        depth: depth_info,
        layout,
        value,
    })
}

/// One row of the per-minus-count breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct XBreakdown {
    pub prob: f64,
    pub solution: XSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricValue {
    /// `v(m) = sum_x P(N = x) v(x, m)`.
    pub value: f64,
    pub rows: Vec<XBreakdown>,
}

/// Expected damage under optimal attacker play, averaged over signals.
pub fn value(n: usize, k: usize, m: u32, a: f64, b: f64, p: f64) -> Result<SymmetricValue> {
    let dist = minus_count_dist(n, k, a, b)?;
    let mut rows = Vec::with_capacity(n + 1);
    let mut total = 0.0;
    for x in 0..=n {
        let prob = dist.prob(x);
        let solution = if prob > 0.0 {
            value_given_x(n, k, m, x, a, b, p)?
        } else {
            // unreachable minus count: report the layout only
            XSolution {
                x,
                p_minus: f64::NAN,
                p_plus: f64::NAN,
                r: None,
                depth: None,
                layout: uap_allocate(n, x, m, 1)?,
                value: 0.0,
            }
        };
        total += prob * solution.value;
        rows.push(XBreakdown { prob, solution });
    }
    Ok(SymmetricValue { value: total, rows })
}

/// Expected damage of an arbitrary allocation for a signal with `x`
/// minuses: `p_minus * sum_minus p(u) + p_plus * sum_plus p(u)`.
pub fn strategy_value(p_minus: f64, p_plus: f64, minus_counts: &[u32], plus_counts: &[u32], p: f64) -> f64 {
    let hits = |group: &[u32]| group.iter().map(|&u| explosion_prob(u, p)).sum::<f64>();
    p_minus * hits(minus_counts) + p_plus * hits(plus_counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(9.0, 0.5).unwrap(), Depth { d: 4, tie: false });
        assert_eq!(depth(123.0, 1.0).unwrap().d, 1);
        let one = depth(1.0, 0.3).unwrap();
        assert_eq!(one.d, 1);
        // r * q^0 = 1 exactly: the first bomb may go to either group
        assert!(one.tie);
        assert!(depth(4.0, 0.5).unwrap().tie);
        assert!(depth(9.0, 0.0).is_err());
        assert!(depth(f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn uap_examples() {
        let l = uap_allocate(5, 3, 10, 2).unwrap();
        assert_eq!((l.l_minus, l.e_minus, l.l_plus, l.e_plus), (2, 2, 1, 0));
        assert_eq!(l.minus_bombs(), 8);
        assert_eq!(l.plus_bombs(), 2);
        assert_eq!(l.minus_levels(), vec![3, 3, 2]);
        assert_eq!(l.plus_levels(), vec![1, 1]);

        let l = uap_allocate(4, 0, 6, 3).unwrap();
        assert_eq!(l.plus_levels(), vec![2, 2, 1, 1]);

        let l = uap_allocate(2, 1, 1, 1).unwrap();
        assert_eq!((l.l_minus, l.e_minus, l.l_plus, l.e_plus), (1, 0, 0, 0));
    }

    #[test]
    fn uap_layouts_satisfy_invariants() {
        for n in 1..=10 {
            for x in 0..=n {
                for m in 0..=50 {
                    for d in 1..=6 {
                        let l = uap_allocate(n, x, m, d).unwrap();
                        l.check_invariants(m).unwrap();
                    }
                }
            }
        }
    }

    /// The layout must match bomb-by-bomb filling: each bomb to the group
    /// whose next layer is due, lowest index first.
    #[test]
    fn uap_matches_stepwise_fill() {
        for n in 2..=6 {
            for x in 1..n {
                for d in 1..=4u32 {
                    let mut minus = vec![0u32; x];
                    let mut plus = vec![0u32; n - x];
                    for m in 1..=40u32 {
                        let lo_minus = *minus.iter().min().unwrap();
                        let lo_plus = *plus.iter().min().unwrap();
                        if lo_minus < lo_plus + d {
                            let i = minus.iter().position(|&v| v == lo_minus).unwrap();
                            minus[i] += 1;
                        } else {
                            let i = plus.iter().position(|&v| v == lo_plus).unwrap();
                            plus[i] += 1;
                        }
                        let l = uap_allocate(n, x, m, d).unwrap();
                        assert_eq!(l.minus_levels(), minus, "n={n} x={x} d={d} m={m}");
                        assert_eq!(l.plus_levels(), plus, "n={n} x={x} d={d} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn value_given_x_examples() {
        let v = value_given_x(2, 1, 1, 1, 0.75, 0.75, 1.0).unwrap();
        assert!(close(v.value, 0.9, 1e-12));
        let v = value_given_x(2, 1, 1, 0, 0.75, 0.75, 1.0).unwrap();
        assert!(close(v.value, 0.5, 1e-12));
        for x in 0..=4 {
            assert_eq!(value_given_x(4, 2, 0, x, 0.7, 0.8, 0.5).unwrap().value, 0.0);
        }
    }

    #[test]
    fn value_examples() {
        let v = value(2, 1, 1, 0.75, 0.75, 1.0).unwrap();
        assert!(close(v.value, 0.75, 1e-12));
        assert!(close(v.rows[1].prob, 10.0 / 16.0, 1e-12));
        let v = value(2, 1, 2, 0.75, 0.75, 1.0).unwrap();
        assert!(close(v.value, 1.0, 1e-12));
        assert_eq!(value(3, 1, 0, 0.75, 0.75, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn permutations_within_groups_keep_value() {
        let (pm, pp, p) = (0.7, 0.2, 0.4);
        let base = strategy_value(pm, pp, &[3, 1, 0], &[2, 0], p);
        assert!(close(base, strategy_value(pm, pp, &[0, 3, 1], &[0, 2], p), 1e-12));
        assert!(close(base, strategy_value(pm, pp, &[1, 0, 3], &[2, 0], p), 1e-12));
    }

    /// When `r q^(d-1) = 1`, the bomb that opens layer `d` in the minus group
    /// can go to a plus site instead at no cost.
    #[test]
    fn tie_allows_moving_a_bomb_to_plus() {
        // n = 2, k = 1, x = 1 and a = b = 2/3 give r = 4; with q = 1/2, r q^2 = 1
        let (n, k, x, a, b, p) = (2, 1, 1, 2.0 / 3.0, 2.0 / 3.0, 0.5);
        let ratios = critical_ratio_a(n, k, x, a, b).unwrap();
        let dep = depth(ratios.r, p).unwrap();
        assert_eq!(dep.d, 3);
        assert!(dep.tie);
        let m = dep.d; // minus site at d-1 = 2, the third bomb opens layer d
        let layout = uap_allocate(n, x, m, dep.d).unwrap();
        assert_eq!(layout.minus_levels(), vec![3]);
        let canonical = strategy_value(ratios.p_minus, ratios.p_plus, &[3], &[0], p);
        let moved = strategy_value(ratios.p_minus, ratios.p_plus, &[2], &[1], p);
        assert!((canonical - moved).abs() <= 1e-12);
    }

    #[test]
    fn values_are_monotone_and_saturate() {
        for &(n, k) in &[(2, 1), (3, 1), (4, 2), (5, 3)] {
            let mut prev = value(n, k, 0, 0.75, 0.6, 0.5).unwrap().value;
            for m in 1..=20 {
                let v = value(n, k, m, 0.75, 0.6, 0.5).unwrap().value;
                assert!(v >= prev - 1e-15);
                assert!(v <= (n - k) as f64 + 1e-12);
                prev = v;
            }
            let big = value(n, k, 200, 0.75, 0.6, 0.5).unwrap().value;
            assert!(big > (n - k) as f64 - 1e-6);
        }
    }
}
