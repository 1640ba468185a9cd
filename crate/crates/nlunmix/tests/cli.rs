//! The binary end to end: outputs, resolved configs, exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlunmix(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlunmix"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NLUNMIX_OUTPUT_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Endmembers, a scene and a 10-band selection in `dir`.
fn pipeline(dir: &Path) {
    let o = nlunmix(
        dir,
        &[
            "gen-endmembers",
            "--bands",
            "60",
            "--count",
            "3",
            "--out",
            "em",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nlunmix(
        dir,
        &[
            "gen-scene",
            "--endmembers",
            "em/endmembers.csv",
            "--pixels",
            "40",
            "--model",
            "pnmm",
            "--param",
            "0.7",
            "--out",
            "sc",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nlunmix(
        dir,
        &[
            "select-bands",
            "--endmembers",
            "em/endmembers.csv",
            "--nb",
            "10",
            "--kernel",
            "gaussian",
            "--sigma2",
            "0.3",
            "--out",
            "bs",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn stages_write_outputs_and_resolved_configs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    for f in [
        "sc/pixels.csv",
        "sc/abundances.csv",
        "sc/meta.json",
        "sc/config.json",
        "em/config.json",
    ] {
        assert!(d.join(f).exists(), "{f}");
    }
    let bands = json(&d.join("bs/bands.json"));
    assert_eq!(bands["indices"].as_array().unwrap().len(), 10);
    assert_eq!(json(&d.join("bs/config.json"))["kernel"]["sigma2"], 0.3);
    assert_eq!(json(&d.join("sc/config.json"))["model"]["xi"], 0.7);

    let o = nlunmix(
        d,
        &[
            "unmix",
            "--scene",
            "sc",
            "--endmembers",
            "em/endmembers.csv",
            "--method",
            "fcls",
            "--out",
            "fc",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(d.join("fc/abundances.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(json(&d.join("fc/manifest.json"))["rmse"].as_f64().unwrap() > 0.0);
    assert!(!d.join("fc/INCOMPLETE").exists());

    let o = nlunmix(
        d,
        &[
            "unmix",
            "--scene",
            "sc",
            "--endmembers",
            "em/endmembers.csv",
            "--method",
            "skhype",
            "--bands",
            "bs/bands.json",
            "--mu",
            "0.05",
            "--out",
            "sk",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&d.join("sk/manifest.json"));
    assert_eq!(m["bands"].as_array().unwrap().len(), 10);
    assert_eq!(json(&d.join("sk/config.json"))["method"]["mu"], 0.05);
}

#[test]
fn unmixing_is_identical_across_worker_counts_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let mut outputs = Vec::new();
    for (out, workers) in [("w1", "1"), ("w3", "3"), ("w3b", "3")] {
        let o = nlunmix(
            d,
            &[
                "unmix",
                "--scene",
                "sc",
                "--endmembers",
                "em/endmembers.csv",
                "--method",
                "skhype",
                "--workers",
                workers,
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(d.join(out).join("abundances.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn config_layers_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"bands": 50, "count": 4, "seed": 7}"#).unwrap();
    // Flags beat the file and overrides beat flags.
    let o = nlunmix(
        d,
        &[
            "gen-endmembers",
            "--config",
            "c.json",
            "--count",
            "3",
            "--out",
            "em",
            "seed=9",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(&d.join("em/config.json"));
    assert_eq!(
        (c["bands"].as_u64(), c["count"].as_u64(), c["seed"].as_u64()),
        (Some(50), Some(3), Some(9))
    );
    assert_eq!(
        fs::read_to_string(d.join("em/endmembers.csv"))
            .unwrap()
            .lines()
            .count(),
        51
    );
}

#[test]
fn bad_configs_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("typo.json"), r#"{"bandz": 50}"#).unwrap();
    let cases: [&[&str]; 5] = [
        &["gen-endmembers", "--config", "typo.json", "--out", "a"],
        &["gen-endmembers", "--out", "b", "nope=1"],
        &["gen-endmembers", "--out", "c", "seed"],
        &["evaluate", "--out", "d"],
        &["select-bands", "--nb", "3", "--out", "e"],
    ];
    for args in cases {
        let o = nlunmix(d, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        let line = stderr(&o);
        let last = line.lines().last().unwrap();
        assert!(last.starts_with("error[config_error]: "), "{last}");
    }
    let o = nlunmix(d, &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_status_one_and_mark_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = nlunmix(
        d,
        &[
            "unmix",
            "--scene",
            "missing",
            "--endmembers",
            "m.csv",
            "--out",
            "u",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().filter(|l| l.starts_with("error[")).count(), 1);
    assert!(err.contains("error[io_error]"), "{err}");
    assert!(d.join("u/INCOMPLETE").exists());
    assert!(d.join("u/config.json").exists());
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = Command::new(env!("CARGO_BIN_EXE_nlunmix"))
        .args([
            "gen-endmembers",
            "--bands",
            "20",
            "--count",
            "2",
            "--out",
            "em",
        ])
        .current_dir(d)
        .env("NLUNMIX_OUTPUT_ROOT", d.join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("root/em/endmembers.csv").exists());
}

#[test]
fn replicate_table1_writes_twenty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = nlunmix(
        d,
        &[
            "replicate-table1",
            "--seed",
            "42",
            "--pixels",
            "30",
            "--out",
            "results",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.join("results/results.csv")).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("scene,model,endmembers,method,n_b,rmse,ret_unmix,ret_total"));
    let manifest = json(&d.join("results/gbm_r8/skhype_reduced_100/manifest.json"));
    assert_eq!(manifest["bands"].as_array().unwrap().len(), 100);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(json(&d.join("results/config.json"))["seed"], 42);
}

#[test]
fn replicate_fig2_writes_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = nlunmix(
        d,
        &[
            "replicate-fig2",
            "--pixels",
            "20",
            "--bands",
            "120",
            "--trials",
            "4",
            "--out",
            "f2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for n_b in [10, 100] {
        let h = json(&d.join(format!("f2/pnmm_r5/skhype_random_{n_b}/histogram.json")));
        assert_eq!(h["trial_rmse"].as_array().unwrap().len(), 4);
        let counts: u64 = h["counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_u64().unwrap())
            .sum();
        assert_eq!(counts, 4);
        let csv = fs::read_to_string(d.join(format!("f2/pnmm_r5/skhype_random_{n_b}/trials.csv")))
            .unwrap();
        assert_eq!(csv.lines().count(), 6);
    }
}
