//! Exact binomial coefficients and the enumerations the solvers iterate over:
//! k-subsets of sites, bomb compositions and binary signal vectors.

/// Largest site count for which binomials are computed exactly.
pub const MAX_SITES: usize = 62;

/// `C(n, k)` in exact integer arithmetic; zero when `k > n`.
///
/// Exact for every `n <= MAX_SITES`; intermediate products are kept in `u128`
/// and divided at each step so they stay within range well beyond that.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

pub(crate) fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n as u64, k as u64) as f64
}

/// Number of ways to put `m` indistinguishable bombs into `n` sites.
pub fn allocation_count(n: usize, m: u32) -> u128 {
    if n == 0 {
        return u128::from(m == 0);
    }
    binomial(u64::from(m) + n as u64 - 1, n as u64 - 1)
}

/// All `k`-subsets of `0..n` as bitmasks, ordered lexicographically by their
/// sorted index lists: {0,1}, {0,2}, {1,2}.
pub fn k_subsets(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0u64, |acc, &i| acc | (1u64 << i)));
        // rightmost index that can still move right
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Calls `visit` with every composition of `m` into `n` non-negative parts, in
/// lexicographic order (smallest first).
pub fn for_each_composition(n: usize, m: u32, mut visit: impl FnMut(&[u32])) {
    if n == 0 {
        if m == 0 {
            visit(&[]);
        }
        return;
    }
    let mut parts = vec![0u32; n];
    parts[n - 1] = m;
    loop {
        visit(&parts);
        // Successor in lexicographic order: find the rightmost position before
        // the last that can take one more bomb from the tail.
        let mut pos = n - 1;
        let mut found = false;
        let mut carried = parts[n - 1];
        while pos > 0 {
            pos -= 1;
            if carried > 0 {
                parts[pos] += 1;
                carried -= 1;
                for p in parts.iter_mut().skip(pos + 1) {
                    *p = 0;
                }
                parts[n - 1] = carried;
                found = true;
                break;
            }
            carried += parts[pos];
        }
        if !found {
            return;
        }
    }
}
