//! Text renderings of a result document.

use std::fmt::Write;

use crate::doc::{round12, ResultDocument};

/// Six significant digits for human tables.
fn sig6(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return x.to_string();
    }
    if x.abs() < 1e-4 || x.abs() >= 1e9 {
        return format!("{x:.5e}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt6(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "-".into())
}

fn sites(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(" "))
}

pub const SYMMETRIC_HEADER: &str = "x,P(N=x),r(x),d(x),l_minus,e_minus,l_plus,e_plus,v(x,m)";

pub fn csv(doc: &ResultDocument) -> String {
    let mut out = String::new();
    let d = &doc.diagnostics;
    if let Some(rows) = &d.per_x {
        out.push_str(SYMMETRIC_HEADER);
        out.push('\n');
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.x,
                r.prob,
                opt(r.r),
                opt(r.d),
                r.l_minus,
                r.e_minus,
                r.l_plus,
                r.e_plus,
                r.value
            );
        }
    } else if let Some(rows) = &d.ratios {
        out.push_str("x,P(N=x),p_minus,p_plus,r\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                opt(r.x),
                opt(r.prob),
                opt(r.p_minus),
                opt(r.p_plus),
                opt(r.r)
            );
        }
    } else if let Some(rows) = &d.checks {
        out.push_str("label,value,reference,allowed,pass\n");
        for r in rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.label, r.value, r.reference, r.allowed, r.pass);
        }
    } else {
        out.push_str("key,value\n");
        for (k, v) in &doc.values {
            let _ = writeln!(out, "{k},{v}");
        }
        for m in doc.strategies.defender_mix.iter().flatten() {
            let _ = writeln!(out, "mix {},{}", sites(&m.sites), round12(m.prob));
        }
        if let Some(loss) = &d.per_site_loss {
            for (i, l) in loss.iter().enumerate() {
                let _ = writeln!(out, "loss site {},{l}", i + 1);
            }
        }
    }
    out
}

pub fn table(doc: &ResultDocument) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "solver: {}", doc.solver);
    for (k, v) in &doc.values {
        let _ = writeln!(out, "{k:<16}{}", sig6(*v));
    }
    let d = &doc.diagnostics;
    if let Some(bp) = &d.breakpoints {
        let _ = writeln!(
            out,
            "breakpoints     rho1={} rho3={} rho2={} c*={}",
            sig6(bp.rho1),
            sig6(bp.rho3),
            sig6(bp.rho2),
            sig6(bp.c_star)
        );
    }
    if let Some(k) = d.k_star {
        let _ = writeln!(out, "{:<16}{k}", "k*");
    }
    if let Some(gap) = d.indifference_gap {
        let _ = writeln!(out, "{:<16}{}", "indifference", sig6(gap));
    }
    if let Some(mix) = &doc.strategies.defender_mix {
        out.push_str("\nlocks           prob\n");
        for m in mix {
            let _ = writeln!(out, "{:<16}{}", sites(&m.sites), sig6(m.prob));
        }
    }
    if let Some(loss) = &d.per_site_loss {
        out.push_str("\nsite  beta        loss\n");
        let beta = d.lock_marginals.clone().unwrap_or_default();
        for (i, l) in loss.iter().enumerate() {
            let b = beta.get(i).copied();
            let _ = writeln!(out, "{:<6}{:<12}{}", i + 1, opt6(b), sig6(*l));
        }
    }
    if let Some(rows) = &d.per_x {
        out.push_str("\n x  P(N=x)      r(x)        d   l-  e-  l+  e+  v(x,m)\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{:>2}  {:<12}{:<12}{:<4}{:<4}{:<4}{:<4}{:<4}{}",
                r.x,
                sig6(r.prob),
                opt6(r.r),
                r.d.map_or("-".into(), |d| d.to_string()),
                r.l_minus,
                r.e_minus,
                r.l_plus,
                r.e_plus,
                sig6(r.value)
            );
        }
    }
    if let Some(rows) = &d.ratios {
        out.push_str("\n x  P(N=x)      p-          p+          r\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{:>2}  {:<12}{:<12}{:<12}{}",
                r.x.map_or("-".into(), |x| x.to_string()),
                opt6(r.prob),
                opt6(r.p_minus),
                opt6(r.p_plus),
                opt6(r.r)
            );
        }
    }
    if let Some(rows) = &d.checks {
        out.push_str("\ncheck                       value       reference   ok\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{:<28}{:<12}{:<12}{}",
                r.label,
                sig6(r.value),
                sig6(r.reference),
                if r.pass { "yes" } else { "NO" }
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(sig6(8.0 / 9.0), "0.888889");
        assert_eq!(sig6(24.0 / 13.0), "1.84615");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.1102230246251565e-16), "1.11022e-16");
    }
}
