//! End-to-end runs of the `mhp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn mhp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path) {
    let o = mhp(
        dir,
        &[
            "--seed",
            "3",
            "simulate",
            "--scenario",
            "dense3",
            "--horizon",
            "60",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_then_fit_with_iterations_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data);
    let events = data.join("dataset_000.csv");
    assert!(data.join("dataset_000.json").exists());

    let fit = |name: &str| {
        let out = tmp.path().join(name);
        let o = mhp(
            &out,
            &[
                "--seed",
                "9",
                "fit",
                "--events",
                events.to_str().unwrap(),
                "--method",
                "SGLD",
                "--iterations",
                "300",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut result: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("fit.json")).unwrap()).unwrap();
        // the only wall-clock field
        result
            .as_object_mut()
            .unwrap()
            .remove("elapsed_secs")
            .expect("timing recorded");
        (
            result,
            std::fs::read_to_string(out.join("chain.csv")).unwrap(),
        )
    };
    let (a, b) = (fit("a"), fit("b"));
    assert_eq!(a, b);
    let chain = a.1;
    assert!(chain.starts_with("iteration,burn_in,"));
}

#[test]
fn metrics_scores_a_fit_against_the_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data);
    let events = data.join("dataset_000.csv");
    let fit = tmp.path().join("fit");
    let o = mhp(
        &fit,
        &[
            "fit",
            "--events",
            events.to_str().unwrap(),
            "--method",
            "SGVI",
            "--iterations",
            "200",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let scores = tmp.path().join("scores");
    let truth = data.join("dataset_000.json");
    let o = mhp(
        &scores,
        &[
            "metrics",
            "--fit",
            fit.join("fit.json").to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(scores.join("metrics.csv")).unwrap();
    assert!(table.starts_with("method,dataset,kappa,budget,metric,value"));
    assert!(table.contains(",rmise,"));
}

#[test]
fn unsorted_events_are_rejected_with_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let events = tmp.path().join("bad.csv");
    std::fs::write(&events, "time,dim\n0.5,0\n0.2,1\n").unwrap();
    let o = mhp(
        &tmp.path().join("out"),
        &[
            "fit",
            "--events",
            events.to_str().unwrap(),
            "--horizon",
            "1",
            "--dims",
            "2",
            "--iterations",
            "5",
        ],
    );
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn info_loss_writes_one_row_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mhp(
        tmp.path(),
        &["info-loss", "--betas", "1,4", "--horizons", "500"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("info_loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
