mod common;

use common::*;
use lbt_cli::doc::ResultDocument;
use lbt_cli::parse_instance;

#[test]
fn golden_documents() {
    let cases = golden_cases();
    assert!(cases.len() >= 10);
    for case in &cases {
        if let Err(e) = check_golden(case) {
            panic!("{}: {e}", case.label());
        }
    }
}

#[test]
fn exit_codes() {
    check_exit_codes().unwrap();
}

#[test]
fn worked_examples_through_the_cli() {
    let two = data_dir().join("two_site_c2.json");
    let out = lbt(&["two-site", "--input", two.to_str().unwrap()]);
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc.values["x_star"] - 1.0 / 3.0).abs() < 1e-11);
    assert!((doc.values["value"] - 8.0 / 9.0).abs() < 1e-11);

    let three = data_dir().join("noninfo_432.json");
    let out = lbt(&["noninfo", "--input", three.to_str().unwrap()]);
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc.values["value"] - 24.0 / 13.0).abs() < 1e-11);
    let mix = doc.strategies.defender_mix.unwrap();
    let probs: Vec<f64> = mix.iter().map(|m| m.prob).collect();
    for (p, want) in probs.iter().zip([7.0, 5.0, 1.0]) {
        assert!((p - want / 13.0).abs() < 1e-11);
    }

    let sym = data_dir().join("symmetric_n2.json");
    let out = lbt(&["symmetric", "--input", sym.to_str().unwrap(), "--m", "0"]);
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.values["value"], 0.0);
}

#[test]
fn symmetric_csv_rows_match_the_library() {
    let sym = data_dir().join("symmetric_n5.json");
    let out = lbt(&["symmetric", "--input", sym.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(lbt_cli::render::SYMMETRIC_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for (x, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 9);
        assert_eq!(row[0].parse::<usize>().unwrap(), x);
        let lib = lbt_core::value_given_x(5, 2, 10, x, 0.75, 0.75, 0.5).unwrap();
        assert_eq!(row[8].parse::<f64>().unwrap(), lbt_cli::doc::round12(lib.value));
        let layout = lib.layout;
        let counts: Vec<u32> = row[4..8].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(counts, vec![layout.l_minus, layout.e_minus, layout.l_plus, layout.e_plus]);
    }
    // the worked layout: three minus sites at depth two with ten bombs
    assert_eq!(rows[3][3], "2");
    assert_eq!(&rows[3][4..8], &["2", "2", "1", "0"]);
}

#[test]
fn json_output_is_stable() {
    let input = data_dir().join("symmetric_n2.json");
    let args = ["simulate", "--input", input.to_str().unwrap(), "--trials", "5000", "--seed", "3"];
    let first = lbt(&args).stdout;
    let second = lbt(&args).stdout;
    assert_eq!(first, second);
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("lbt-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("out.json");
    let input = data_dir().join("two_site_c3.json");
    let out = lbt(&[
        "two-site",
        "--input",
        input.to_str().unwrap(),
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: ResultDocument = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!((doc.values["value"] - 63.0 / 68.0).abs() < 1e-11);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn instance_errors_name_the_field() {
    let err = parse_instance(r#"{"n": 2, "locks": {"mode": "fixed", "k": 1}, "m": 1, "a": 0.7, "b": 0.7, "c": 1, "p": 1, "x": 0}"#)
        .unwrap_err();
    assert!(err.contains("unknown field `x`"));
    let err = parse_instance("{\"n\": 2,\n\"m\": }").unwrap_err();
    assert!(err.contains("line 2"));
    let input = data_dir().join("invalid/bad_values.json");
    let out = lbt(&["symmetric", "--input", input.to_str().unwrap()]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    for field in ["k:", "a:", "c:"] {
        assert!(stderr.contains(field), "{stderr}");
    }
}

#[test]
fn table_format_is_readable() {
    let input = data_dir().join("two_site_c2.json");
    let out = lbt(&["two-site", "--input", input.to_str().unwrap(), "--format", "table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("value           0.888889"));
    assert!(text.contains("x_star          0.333333"));
}
