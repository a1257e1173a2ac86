use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prodnormal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(path).expect("golden file")
}

/// Same cells, numbers equal to 1e-13 relative; anything else must match
/// character for character.
fn assert_matches_golden(actual: &str, expected: &str, sep: &[char]) {
    let a: Vec<&str> = actual.lines().collect();
    let e: Vec<&str> = expected.lines().collect();
    assert_eq!(a.len(), e.len(), "line count\n{actual}");
    for (la, le) in a.iter().zip(&e) {
        let fa: Vec<&str> = la.split(sep).collect();
        let fe: Vec<&str> = le.split(sep).collect();
        assert_eq!(fa.len(), fe.len(), "{la}\n{le}");
        for (x, y) in fa.iter().zip(&fe) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) if u.is_finite() && v.is_finite() => {
                    assert!((u - v).abs() <= 1e-13 * v.abs().max(1e-300), "{x} vs {y}")
                }
                _ => assert_eq!(x, y, "{la}\n{le}"),
            }
        }
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn csv_header_is_fixed() {
    let o = run(&["eval", "--quantity", "cdf", "--x", "0"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "method,quantity,mu_x,mu_y,sigma_x,sigma_y,rho,input,value,valid,reason,\
         n_used,est_trunc_error,scaled,log_value,standard_error"
    );
}

#[test]
fn golden_exact_density() {
    let o = run(&["eval", "--quantity", "pdf", "--method", "exact", "--x", "0.5,1,4"]);
    assert!(o.status.success());
    assert_matches_golden(&stdout(&o), &golden("eval_pdf_exact.csv"), &[',']);
}

#[test]
fn golden_asymptotic_json() {
    let o = run(&[
        "eval", "--quantity", "quantile", "--method", "asymptotic", "--p", "0.95,0.999",
        "--mu-x", "2", "--mu-y", "-2", "--format", "json",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("each line is JSON");
    }
    assert_matches_golden(&text, &golden("eval_quantile_asymptotic.jsonl"), &[',', ':']);
}

#[test]
fn golden_density_table() {
    let o = run(&["tables", "--table", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), golden("table1.csv"));
}

#[test]
fn golden_simulation() {
    let o = run(&[
        "simulate", "--n", "20000", "--seed", "7", "--chunks", "3", "--levels", "0.9,0.2",
        "--thresholds", "1.5",
    ]);
    assert!(o.status.success());
    assert_matches_golden(&stdout(&o), &golden("simulate.csv"), &[',']);
}

#[test]
fn density_at_one_is_k0_over_pi() {
    let o = run(&["eval", "--quantity", "pdf", "--method", "exact", "--x", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 0.421_024_438_240_708_3 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn asymptotic_tvar_is_var_plus_gap() {
    let get = |q: &str| {
        let o = run(&[
            "eval", "--quantity", q, "--method", "asymptotic", "--p", "0.99", "--rho", "0.5",
            "--format", "json",
        ]);
        let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        v["value"].as_f64().unwrap()
    };
    assert!((get("tvar") - get("var") - 1.5).abs() < 1e-12);
}

#[test]
fn invalid_parameters_exit_2() {
    let cases: [&[&str]; 6] = [
        &["eval", "--quantity", "pdf", "--x", "1", "--sigma-x", "0"],
        &["eval", "--quantity", "pdf", "--x", "1", "--sigma-y", "-1"],
        &["eval", "--quantity", "pdf", "--x", "1", "--rho", "1"],
        &["eval", "--quantity", "pdf", "--x", "1", "--rho", "-1.5"],
        &["eval", "--quantity", "quantile", "--p", "1"],
        &["eval", "--quantity", "tvar", "--p", "0", "--method", "asymptotic"],
    ];
    for args in cases {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn unknown_method_and_bad_flags_exit_2() {
    assert_eq!(run(&["eval", "--quantity", "pdf", "--x", "1", "--method", "magic"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--quantity", "median", "--x", "1"]).status.code(), Some(2));
    assert_eq!(run(&["tables", "--table", "5"]).status.code(), Some(2));
}

#[test]
fn strict_invalid_asymptotic_exits_3() {
    let args = [
        "eval", "--quantity", "quantile", "--method", "asymptotic", "--p", "0.95", "--mu-x", "2",
        "--mu-y", "-2",
    ];
    let lenient = run(&args);
    assert!(lenient.status.success());
    let row = stdout(&lenient).lines().nth(1).unwrap().to_string();
    assert!(row.contains(",false,"), "{row}");

    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = run(&strict);
    assert_eq!(o.status.code(), Some(3));
    // the record is still written
    assert!(stdout(&o).contains(",false,"));
}

#[test]
fn unsupported_quantity_fails() {
    let o = run(&["eval", "--quantity", "pdf", "--x", "1", "--method", "mc", "--n", "100"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn resource_error_is_nonzero() {
    let o = run(&["simulate", "--n", "4000000000", "--levels", "0.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("resource"));
}

fn simulate_to(dir: &Path, tag: &str) -> (Vec<u8>, Vec<u8>) {
    let out = dir.join(format!("{tag}.csv"));
    let summary = dir.join(format!("{tag}.json"));
    let o = run(&[
        "simulate", "--n", "1000000", "--seed", "42", "--levels", "0.99", "-o",
        out.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    (std::fs::read(out).unwrap(), std::fs::read(summary).unwrap())
}

#[test]
fn simulation_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_to(dir.path(), "a");
    let b = simulate_to(dir.path(), "b");
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(summary["n"], 1_000_000);
}

#[test]
fn simulated_quantile_near_reference() {
    let mc = run(&["simulate", "--n", "1000000", "--seed", "3", "--levels", "0.99", "--format", "json"]);
    let first: serde_json::Value = serde_json::from_str(stdout(&mc).lines().next().unwrap()).unwrap();
    let ex = run(&["eval", "--quantity", "quantile", "--p", "0.99", "--format", "json"]);
    let exact: serde_json::Value = serde_json::from_str(stdout(&ex).trim()).unwrap();
    // density at the 0.99 quantile is about 7e-3, so SE(quantile) ~ sqrt(.99 .01 / N) / f ~ 0.014
    let diff = first["value"].as_f64().unwrap() - exact["value"].as_f64().unwrap();
    assert!(diff.abs() < 3.0 * 0.015, "{diff}");
}

#[test]
fn symmetric_median_is_near_zero() {
    let o = run(&["simulate", "--n", "1000000", "--seed", "5", "--levels", "0.5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    // f(0) is infinite, so the sample median concentrates faster than 1/sqrt(N)
    assert!(v["value"].as_f64().unwrap().abs() < 3e-3);
}

#[test]
fn thread_cap_is_honoured() {
    let o = bin()
        .env("PRODNORMAL_THREADS", "1")
        .args(["eval", "--quantity", "survival", "--x", "1"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = bin()
        .env("PRODNORMAL_THREADS", "zero")
        .args(["eval", "--quantity", "survival", "--x", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn human_tables_show_na() {
    let o = run(&["tables", "--table", "3", "--format", "text"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = text.lines().find(|l| l.split_whitespace().take(3).collect::<Vec<_>>() == ["2", "-2", "0"]).unwrap();
    assert!(row.contains("N/A"), "{row}");
}
