use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn gmpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmpot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn expression_golden_file() {
    let mut rows = csv::Reader::from_path(data("expressions_golden.csv")).unwrap();
    let mut count = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let expr = gmpot::parse_expression(&row[0]).unwrap_or_else(|e| panic!("{}: {e}", &row[0]));
        let point: Vec<f64> = row[1].split(';').map(|v| v.parse().unwrap()).collect();
        let want: f64 = row[2].parse().unwrap();
        let got: f64 = expr.eval(&point).unwrap();
        assert!(
            (got - want).abs() < 1e-12,
            "{} at {:?}: {got} != {want}",
            &row[0],
            point
        );
        count += 1;
    }
    assert_eq!(count, 20);
}

#[test]
fn solve_two_by_two_transport() {
    let out = gmpot(&["solve", data("ot2x2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "optimal");
    assert!((v["objective"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["certificate"]["passed"], true);
}

#[test]
fn solution_round_trip_reverifies() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let csv = dir.path().join("plan.csv");
    for instance in ["ot2x2.json", "martingale_split.json"] {
        let inst = data(instance);
        let out = gmpot(&[
            "solve",
            inst.to_str().unwrap(),
            "-o",
            sol.to_str().unwrap(),
            "--plan-csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let out = gmpot(&[
            "solve",
            inst.to_str().unwrap(),
            "--verify",
            sol.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_eq!(json_of(&out)["status"], "verified");
    }
    let plan = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(plan.lines().next(), Some("x1,x2,mass"));
}

#[test]
fn refined_solution_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        &dir,
        "inst.json",
        r#"{
            "cost": {"kind": "concave_of_sum", "h": "affine:1,0", "weights": []},
            "refine": [{"kind": "concave_of_sum", "h": "neg_square", "weights": []}],
            "marginals": [
                {"atoms": [0, 1], "weights": [0.5, 0.5]},
                {"atoms": [0, 2], "weights": [0.5, 0.5]}
            ]
        }"#,
    );
    let sol = dir.path().join("sol.json");
    let out = gmpot(&["solve", inst.to_str().unwrap(), "-o", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(v["stage_values"].as_array().unwrap().len(), 2);
    let out = gmpot(&[
        "solve",
        inst.to_str().unwrap(),
        "--verify",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn tampered_solution_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let inst = data("ot2x2.json");
    let sol = write(
        &dir,
        "sol.json",
        r#"{"plan": {"points": [[0, 2], [1, 0]], "masses": [0.5, 0.5]}, "objective": 2.5, "duals": [0, 0, 0, 0, 0]}"#,
    );
    let out = gmpot(&[
        "solve",
        inst.to_str().unwrap(),
        "--verify",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["status"], "failed");
}

#[test]
fn crossed_support_is_not_cyclically_monotone() {
    let out = gmpot(&[
        "check-monotone",
        data("crossed_pairs.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert_eq!(v["status"], "violated");
    assert_eq!(v["witness"]["kind"], "cycle");
    assert_eq!(v["witness"]["pairs"].as_array().unwrap().len(), 2);
}

#[test]
fn cost_flag_overrides_input_cost() {
    // under c = x1·x2 the crossed support is optimal
    let out = gmpot(&[
        "check-monotone",
        data("crossed_pairs.json").to_str().unwrap(),
        "--cost",
        "x1*x2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["status"], "certified");
}

#[test]
fn identical_marginals_give_diagonal_csv() {
    let out = gmpot(&[
        "quantile-coupling",
        data("identical_marginals.json").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,mass"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], cols[1]);
    }
}

#[test]
fn quantile_coupling_with_stratified_levels() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "m.json",
        r#"{"marginals": [{"atoms": [0, 1], "weights": [0.5, 0.5]}, {"atoms": [0, 2], "weights": [0.5, 0.5]}]}"#,
    );
    let out = gmpot(&["quantile-coupling", p.to_str().unwrap(), "--levels", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["points"], serde_json::json!([[0.0, 0.0], [1.0, 2.0]]));
}

#[test]
fn competitor_search_on_plans_and_measures() {
    let out = gmpot(&[
        "competitor-search",
        data("anti_plan.json").to_str().unwrap(),
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["witness"]["kind"], "competitor");

    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "alpha.json",
        r#"{"cost": "(x1-x2)^2", "alpha": {"points": [[0, 0], [1, 1]], "masses": [0.5, 0.5]}, "marginals": "from_plan"}"#,
    );
    let out = gmpot(&["competitor-search", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["status"], "certified");
}

#[test]
fn martingale_bounds_and_infeasibility() {
    let out = gmpot(&["mot", data("mot_cubic.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let lo = v["min"]["objective"].as_f64().unwrap();
    let hi = v["max"]["objective"].as_f64().unwrap();
    assert!(lo <= hi + 1e-12);

    let out = gmpot(&["mot", data("mot_not_convex_order.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert_eq!(v["status"], "infeasible");
    assert_eq!(v["min"]["convex_order"][0]["holds"], false);
    assert!(!v["min"]["farkas"].as_array().unwrap().is_empty());
}

#[test]
fn pass_demo_table() {
    let out = gmpot(&[
        "pass-demo",
        "--family",
        data("pass_scaled.json").to_str().unwrap(),
        "--depth",
        "3",
        "--levels",
        "3",
        "--lp-max-depth",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rows = csv::Reader::from_reader(out.stdout.as_slice());
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 3);
    for (i, r) in records.iter().enumerate() {
        let n = i as i32 + 1;
        let s = 0.5 + 0.5f64.powi(n + 1);
        let cost: f64 = r[2].parse().unwrap();
        assert!((cost + 5.0 / 3.0 * s * s).abs() < 1e-12);
        if n <= 2 {
            assert!(r[4].parse::<f64>().unwrap() <= 1e-8);
            assert_eq!(&r[5], "true");
        } else {
            assert_eq!(&r[3], "");
        }
    }
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", "{not json");
    assert_eq!(
        gmpot(&["solve", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        gmpot(&["solve", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let unknown = write(&dir, "u.json", r#"{"cost": "x3 +", "marginals": []}"#);
    assert_eq!(
        gmpot(&["solve", unknown.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let weights = write(
        &dir,
        "w.json",
        r#"{"cost": "x1", "marginals": [{"atoms": [0, 1], "weights": [0.5, 0.6]}]}"#,
    );
    assert_eq!(
        gmpot(&["solve", weights.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(gmpot(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        gmpot(&[
            "solve",
            data("ot2x2.json").to_str().unwrap(),
            "--feas-tol",
            "-1"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn exit_codes_are_deterministic() {
    for _ in 0..3 {
        assert_eq!(
            gmpot(&[
                "check-monotone",
                data("crossed_pairs.json").to_str().unwrap()
            ])
            .status
            .code(),
            Some(1)
        );
        assert_eq!(
            gmpot(&["solve", data("ot2x2.json").to_str().unwrap()])
                .status
                .code(),
            Some(0)
        );
    }
}
