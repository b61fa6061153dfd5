use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn klslab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_klslab"));
    cmd.args(args).env_remove("KLSLAB_THREADS");
    if let Some(t) = threads {
        cmd.env("KLSLAB_THREADS", t);
    }
    cmd.output().expect("run klslab")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_ball_hardy_boundary_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = klslab(
        &[
            "verify", "--body", "ball", "--dim", "16", "--theorems", "hardy_boundary", "--funcs", "linear", "--samples",
            "200000", "--seed", "42", "--out", out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 20);
    for r in reports {
        assert_eq!(r["verdict"], "pass");
        assert_eq!(r["theorem_id"], "hardy_boundary");
        assert_eq!(r["seed"], 42);
        assert_eq!(r["N"], 200000);
        assert!(r["terms"]["radial_energy"]["estimate"].is_f64());
    }
    assert_eq!(doc["config"]["samples"], 200000);
    assert_eq!(doc["config"]["dim"][0], 16);
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "temporary files left behind");
}

#[test]
fn config_errors_exit_two() {
    let o = klslab(&["verify", "--body", "cube", "--dim", "4", "--theorems", "mean_curvature_hardy"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported curvature"), "{}", stderr(&o));

    let o = klslab(&["verify", "--body", "ball", "--theorems", ""], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty theorem list"));

    for args in [
        vec!["verify", "--body", "ball", "--theorems", "hardy"],
        vec!["verify", "--body", "ball", "--theorems", "hardy_boundary", "--funcs", "cubic"],
        vec!["verify", "--body", "ball", "--theorems", "hardy_boundary", "--samples", "1.5e0"],
        vec!["verify", "--body", "ball", "--theorems", "hardy_boundary", "--samples", "10"],
        vec!["verify", "--body", "simplex", "--theorems", "orthant_hardy"],
        vec!["verify", "--body", "ball", "--dim", "2", "--theorems", "origin_hardy"],
        vec!["verify", "--body", "ball", "--theorems", "classical_hardy", "--funcs", "linear"],
        vec!["verify", "--body", "ball", "--dim", "4", "--theorems", "hardy_boundary", "--quadrature", "16"],
        vec!["poincare2d", "--body", "ball", "--dim", "3", "--grid", "16"],
        vec!["poincare2d", "--body", "square"],
        vec!["poincare2d", "--body", "square", "--grid", "16", "--seed", "3"],
        vec!["lp-scaling", "--p", "2", "--n", "2"],
        vec!["fvr", "--p", "0.5", "--dim", "4"],
        vec!["ballbody", "--measure", "cauchy", "--dim", "3"],
        vec!["verify", "--bogus"],
    ] {
        let o = klslab(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }

    let o = klslab(&["verify", "--body", "ball", "--theorems", "hardy_boundary"], Some("0"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_validated_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
command = "verify"
samples = "2e4"
seed = 5
theorems = ["hardy_boundary", "isoperimetry"]
funcs = ["quadratic"]
functions_per_family = 4

[[bodies]]
kind = "ellipsoid"
dim = 3
params = { semi_axes = [2.0, 1.0, 0.5] }

[tolerance]
z = 4.0
"#,
    )
    .unwrap();
    let o = klslab(&["verify", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["summary"]["records"], 5);
    assert_eq!(doc["config"]["bodies"][0]["params"]["semi_axes"][2], 0.5);
    assert_eq!(doc["config"]["tolerance"]["z"], 4.0);
    assert!(doc["reports"][0]["tolerance_rule"].as_str().unwrap().contains("4 stderr"));

    // Flags override the file.
    let o = klslab(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "6"], None);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["seed"], 6);

    fs::write(&cfg, "command = \"verify\"\ntheorems = [\"hardy_boundary\"]\nsample = 10\n").unwrap();
    let o = klslab(&["verify", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    fs::write(&cfg, "command = \"fvr\"\n").unwrap();
    let o = klslab(&["verify", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&cfg, "[[bodies]]\nkind = \"ball\"\ndim = 3\nparams = { side = 2 }\n").unwrap();
    let o = klslab(&["verify", "--config", cfg.to_str().unwrap(), "--theorems", "isoperimetry"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_is_identical_across_thread_counts() {
    let args = [
        "verify",
        "--body",
        "ellipsoid,cube,simplex",
        "--dim",
        "3",
        "--theorems",
        "hardy_boundary,faber_krahn_boundary,classical_hardy,origin_hardy",
        "--funcs",
        "all",
        "--functions-per-family",
        "3",
        "--samples",
        "2e4",
    ];
    let one = klslab(&args, Some("1"));
    let three = klslab(&args, Some("3"));
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, three.stdout);
    let again = klslab(&args, None);
    assert_eq!(one.stdout, again.stdout);
}

#[test]
fn poincare2d_sweep_converges_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = klslab(&["poincare2d", "--body", "square", "--grid", "32,64,128", "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("body,kind,value,error_bound,method,grid_h\n"));
    let truth = 1.0 / std::f64::consts::PI.powi(2);
    let errors: Vec<f64> = csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| (r.unwrap()[2].parse::<f64>().unwrap() - truth).abs())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-4);
}

#[test]
fn sweeps_resume_and_refuse_foreign_partials() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let args = |out: &Path| {
        vec![
            "lp-scaling".to_string(),
            "--p".into(),
            "2,4".into(),
            "--n".into(),
            "8,16".into(),
            "--samples".into(),
            "1e4".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |out: &Path| {
        let a = args(out);
        klslab(&a.iter().map(String::as_str).collect::<Vec<_>>(), None)
    };
    assert_eq!(run(&full).status.code(), Some(0));
    let text = fs::read_to_string(&full).unwrap();
    assert!(text.starts_with("p,n,A,B,assembled,mc_integral,mc_stderr,z,transfer,transfer_stderr\n"));
    assert_eq!(text.lines().count(), 5);

    // A partial file from the same config holding two finished rows and a
    // torn third row.
    let resumed = dir.path().join("resumed.csv");
    assert_eq!(run(&resumed).status.code(), Some(0));
    let body: Vec<&str> = text.lines().collect();
    fs::remove_file(&resumed).unwrap();
    let partial = dir.path().join("resumed.csv.partial");
    let marker = partial_marker(&args(&resumed));
    fs::write(&partial, format!("{marker}\n{}\n{}\n{}\n4,8,0.2", body[0], body[1], body[2])).unwrap();
    assert_eq!(run(&resumed).status.code(), Some(0));
    assert_eq!(fs::read(&resumed).unwrap(), fs::read(&full).unwrap());
    assert!(!partial.exists());

    fs::write(&partial, format!("# klslab sweep config-sha256=deadbeef\n{}\n", body[0])).unwrap();
    let o = run(&resumed);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("refusing to resume"), "{}", stderr(&o));
}

/// The marker line a sweep writes for `args`, from the config hash that
/// the library computes for the same flags.
fn partial_marker(args: &[String]) -> String {
    use clap::Parser;
    let mut argv = vec!["klslab".to_string()];
    argv.extend(args.iter().cloned());
    let cli = klslab::cli::Cli::parse_from(argv);
    let cfg = klslab::cli::resolve_config(&cli.command).unwrap();
    format!("# klslab sweep config-sha256={}", cfg.hash())
}

#[test]
fn ballbody_fvr_and_report_outputs() {
    let o = klslab(&["ballbody", "--measure", "mu_p,gaussian", "--p", "1.5", "--dim", "3", "--samples", "1e4"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("mu_1.5^3,3,"));
    let closed: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((closed - 1.0).abs() < 1e-10);

    let o = klslab(&["fvr", "--p", "1,2", "--dim", "8"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let ball_row = text.lines().nth(2).unwrap();
    let ratio: f64 = ball_row.split(',').nth(4).unwrap().parse().unwrap();
    // Volume-one ball: ∫|x|² / r² = n/(n+2).
    assert!((ratio - 0.8).abs() < 1e-9, "{ball_row}");

    let o = klslab(&["report", "--body", "ellipsoid", "--dim", "3", "--samples", "2e4"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let entry = &doc["bodies"][0];
    assert_eq!(entry["body"], "ellipsoid(2,1,0.5)");
    assert!((entry["p_lin"]["value"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!(entry["ratios"].as_array().unwrap().iter().all(|r| r["verdict"] == "ratio_only"));
    assert_eq!(entry["jensen"]["verdict"], "pass");
}
