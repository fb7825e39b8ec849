#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use lbt_cli::doc::{round12, ResultDocument};
use lbt_core::{posterior, simulate, solve_2x1, solve_general, solve_noninformative, validate_spec, value, value_given_x, GameSpec, LbtError, Policy};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn lbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbt"))
        .args(args)
        .output()
        .expect("lbt binary runs")
}

#[derive(Debug, Clone)]
pub struct GoldenCase {
    pub command: String,
    pub instance: String,
    pub extra: Vec<String>,
}

impl GoldenCase {
    pub fn input(&self) -> PathBuf {
        data_dir().join(format!("{}.json", self.instance))
    }

    pub fn expected(&self) -> PathBuf {
        data_dir()
            .join("expected")
            .join(format!("{}.{}.json", self.instance, self.command))
    }

    pub fn args(&self) -> Vec<String> {
        let mut args = vec![
            self.command.clone(),
            "--input".into(),
            self.input().display().to_string(),
        ];
        args.extend(self.extra.iter().cloned());
        args
    }

    fn flag(&self, name: &str) -> Option<&str> {
        let pos = self.extra.iter().position(|a| a == name)?;
        self.extra.get(pos + 1).map(String::as_str)
    }

    pub fn label(&self) -> String {
        format!("{} {}", self.command, self.instance)
    }
}

pub fn golden_cases() -> Vec<GoldenCase> {
    let text = std::fs::read_to_string(data_dir().join("goldens.txt")).expect("golden manifest");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split_whitespace().map(String::from);
            let command = parts.next().expect("command");
            let instance = parts.next().expect("instance");
            GoldenCase {
                command,
                instance,
                extra: parts.collect(),
            }
        })
        .collect()
}

/// Values the document must carry, recomputed through the library.
fn library_values(case: &GoldenCase, spec: &GameSpec) -> Result<Vec<(&'static str, f64)>, String> {
    let e = |err: LbtError| err.to_string();
    Ok(match case.command.as_str() {
        "two-site" => {
            let (c1, c2) = (spec.c()[0], spec.c()[1]);
            let r = solve_2x1(c1 / c2, spec.a()[0], spec.b()[0]).map_err(e)?;
            let x = r.breakpoints.map(|b| b.x_star).unwrap_or(f64::NAN);
            vec![("value", r.value * c2), ("x_star", x)]
        }
        "noninfo" => {
            let r = solve_noninformative(spec.c(), spec.k().unwrap_or(0)).map_err(e)?;
            vec![("value", r.value)]
        }
        "symmetric" => {
            let v = value(spec.n(), spec.k().unwrap_or(0), spec.m(), spec.a()[0], spec.b()[0], spec.p()).map_err(e)?;
            vec![("value", v.value)]
        }
        "ratios" => vec![("q_test", posterior::test_quality(spec.a()[0], spec.b()[0]))],
        "general" => vec![("value", solve_general(spec, 1e-6).map_err(e)?.value)],
        "simulate" => {
            let trials: u64 = case.flag("--trials").map_or(Ok(100_000), str::parse).map_err(|x: std::num::ParseIntError| x.to_string())?;
            let seed: u64 = case.flag("--seed").map_or(Ok(0), str::parse).map_err(|x: std::num::ParseIntError| x.to_string())?;
            let mix = spec.default_mix().map_err(e)?;
            let r = simulate(spec, &mix, &Policy::GreedyBestResponse, trials, seed).map_err(e)?;
            vec![("mean", r.mean), ("std_error", r.std_error)]
        }
        "oracle" => vec![("failures", 0.0)],
        other => return Err(format!("no library check for `{other}`")),
    })
}

/// Runs one golden case and checks it end to end.
pub fn check_golden(case: &GoldenCase) -> Result<(), String> {
    let args = case.args();
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = lbt(&args);
    if out.status.code() != Some(0) {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let doc: ResultDocument = serde_json::from_str(&text).map_err(|e| format!("re-parse: {e}"))?;
    let again = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())? + "\n";
    if again != text {
        return Err("document does not round-trip".into());
    }
    let spec = validate_spec(&doc.instance).map_err(|e| format!("re-validate: {e}"))?;
    for (key, want) in library_values(case, &spec)? {
        let got = doc.values.get(key).copied();
        if got != Some(round12(want)) {
            return Err(format!("{key}: document {got:?}, library {}", round12(want)));
        }
    }
    if case.command == "symmetric" {
        let rows = doc.diagnostics.per_x.as_ref().ok_or("missing rows")?;
        let k = spec.k().unwrap_or(0);
        for row in rows {
            let lib = value_given_x(spec.n(), k, spec.m(), row.x, spec.a()[0], spec.b()[0], spec.p()).map_err(|e| e.to_string())?;
            if row.value != round12(lib.value) {
                return Err(format!("v(x={}) differs", row.x));
            }
        }
    }
    let expected = std::fs::read_to_string(case.expected()).map_err(|e| format!("{}: {e}", case.expected().display()))?;
    if expected != text {
        return Err("output differs from the stored golden document".into());
    }
    Ok(())
}

/// Expected exit codes for malformed input, bad flags and solver failures.
pub fn exit_code_cases() -> Vec<(Vec<String>, i32)> {
    let data = data_dir();
    let path = |name: &str| data.join(name).display().to_string();
    let mut cases: Vec<(Vec<String>, i32)> = ["invalid/unknown_key.json", "invalid/bad_values.json", "invalid/syntax.json"]
        .iter()
        .map(|f| (vec!["general".to_string(), "--input".into(), path(f)], 1))
        .collect();
    cases.push((vec!["general".into(), "--input".into(), path("missing.json")], 1));
    cases.push((vec!["frobnicate".into()], 1));
    cases.push((vec!["--help".into()], 0));
    cases.push((
        vec!["simulate".into(), "--input".into(), path("symmetric_n2.json"), "--policy".into(), "bogus".into()],
        1,
    ));
    cases.push((vec!["two-site".into(), "--input".into(), path("noninfo_432.json")], 1));
    cases.push((vec!["noninfo".into(), "--input".into(), path("two_site_c2.json")], 1));
    cases.push((
        vec![
            "general".into(),
            "--input".into(),
            path("general_three.json"),
            "--tol".into(),
            "1e-12".into(),
            "--max-iterations".into(),
            "1".into(),
        ],
        2,
    ));
    cases
}

pub fn check_exit_codes() -> Result<(), String> {
    for (args, want) in exit_code_cases() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = lbt(&refs);
        if out.status.code() != Some(want) {
            return Err(format!("{args:?}: exit {:?}, expected {want}", out.status.code()));
        }
        if want == 1 && args.len() > 2 && out.stderr.is_empty() {
            return Err(format!("{args:?}: no diagnostic on stderr"));
        }
    }
    Ok(())
}
