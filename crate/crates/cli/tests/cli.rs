use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn lse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lse")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// id, target y and five features; y depends on the first two.
fn write_toy(dir: &Path, n: usize) -> PathBuf {
    let mut out = String::from("id,y,f0,f1,f2,f3,f4\n");
    for i in 0..n {
        let t = i as f64 / n as f64;
        let x = [t, (7.0 * t).sin(), (3.0 * t).cos(), t * t, ((i * 37) % 11) as f64];
        let _ = writeln!(
            out,
            "u{i},{},{},{},{},{},{}",
            5.0 + 2.0 * x[0] - x[1],
            x[0],
            x[1],
            x[2],
            x[3],
            x[4]
        );
    }
    let path = dir.join("toy.csv");
    fs::write(&path, out).unwrap();
    path
}

fn subcommands(cmd: &clap::Command, prefix: Vec<String>, out: &mut Vec<(Vec<String>, clap::Command)>) {
    for sub in cmd.get_subcommands() {
        let mut path = prefix.clone();
        path.push(sub.get_name().to_owned());
        out.push((path.clone(), sub.clone()));
        subcommands(sub, path, out);
    }
}

#[test]
fn help_lists_every_flag() {
    let mut all = Vec::new();
    subcommands(&lse_cli::command(), Vec::new(), &mut all);
    assert!(all.len() >= 11);
    for (path, cmd) in all {
        let mut args: Vec<&str> = path.iter().map(String::as_str).collect();
        args.push("--help");
        let out = lse(&args);
        assert!(out.status.success(), "{args:?}");
        let help = String::from_utf8(out.stdout).unwrap();
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{path:?} help misses --{long}");
            }
        }
    }
}

#[test]
fn exit_codes() {
    assert_eq!(lse(&["--version"]).status.code(), Some(0));
    assert_eq!(lse(&["split", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(lse(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = lse(&[
        "split",
        "--input",
        p(&missing),
        "--out-a",
        p(&dir.path().join("a.csv")),
        "--out-b",
        p(&dir.path().join("b.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn gradcheck_passes() {
    let out = lse(&["gradcheck", "--nets", "8", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("8 networks") && text.contains("max relative error"), "{text}");
}

#[test]
fn split_train_embed_join() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let toy = write_toy(d, 60);
    let (a_csv, b_csv) = (d.join("a.csv"), d.join("b.csv"));
    let out = lse(&[
        "split", "--input", p(&toy), "--target-column", "y", "--peer-a", "f0,f3", "--peer-b", "f1,f2,f4",
        "--out-a", p(&a_csv), "--out-b", p(&b_csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for (peer, csv, seed) in [("a", &a_csv, "1"), ("b", &b_csv, "2")] {
        let ckpt = d.join(format!("{peer}.ckpt.json"));
        let out = lse(&[
            "train-ae", "--input", p(csv), "--target-column", "y", "--latent-dim", "3", "--epochs", "5",
            "--batch-size", "16", "--seed", seed, "--out", p(&ckpt),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let lse_file = d.join(format!("{peer}.lse"));
        let out = lse(&[
            "embed", "--model", p(&ckpt), "--input", p(csv), "--target-column", "y", "--tag", peer,
            "--out", p(&lse_file),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    let joined = d.join("joined.csv");
    let out = lse(&[
        "join", "--a", p(&d.join("a.lse")), "--b", p(&d.join("b.lse")), "--labels", p(&toy),
        "--target-column", "y", "--out", p(&joined),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&joined).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id,y,a_m0,a_m1,a_m2,b_m0,b_m1,b_m2");
    assert_eq!(lines.count(), 60);

    let model = d.join("ridge.json");
    let out = lse(&[
        "train-downstream", "--input", p(&joined), "--target-column", "y", "--learner", "ridge",
        "--search", "--n-samples", "4", "--cv-table", p(&d.join("cv.csv")), "--out", p(&model),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("train R2"));
    assert_eq!(fs::read_to_string(d.join("cv.csv")).unwrap().lines().count(), 5);
}

#[test]
fn strict_join_rejects_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let toy = write_toy(d, 30);
    let ckpt = d.join("m.json");
    assert!(lse(&["train-ae", "--input", p(&toy), "--latent-dim", "2", "--epochs", "1", "--out", p(&ckpt)])
        .status
        .success());
    let full = d.join("full.lse");
    assert!(lse(&["embed", "--model", p(&ckpt), "--input", p(&toy), "--out", p(&full)]).status.success());
    let text = fs::read_to_string(&toy).unwrap();
    let short_csv = d.join("short.csv");
    fs::write(&short_csv, text.lines().take(20).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    let short = d.join("short.lse");
    assert!(lse(&["embed", "--model", p(&ckpt), "--input", p(&short_csv), "--out", p(&short)]).status.success());

    let out = lse(&["join", "--a", p(&full), "--b", p(&short), "--out", p(&d.join("j.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let inner = d.join("inner.csv");
    let out = lse(&["join", "--a", p(&full), "--b", p(&short), "--mode", "inner", "--out", p(&inner)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(inner).unwrap().lines().count(), 20);
}

#[test]
fn exchange_between_processes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let toy = write_toy(d, 25);
    let ckpt = d.join("m.json");
    assert!(lse(&["train-ae", "--input", p(&toy), "--latent-dim", "2", "--epochs", "1", "--out", p(&ckpt)])
        .status
        .success());
    let file = d.join("local.lse");
    assert!(lse(&["embed", "--model", p(&ckpt), "--input", p(&toy), "--tag", "peer_a", "--out", p(&file)])
        .status
        .success());

    let inbox = d.join("inbox");
    let mut server = Command::new(env!("CARGO_BIN_EXE_lse"))
        .args(["exchange", "serve", "--bind", "127.0.0.1:0", "--out-dir", p(&inbox)])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(server.stdout.take().unwrap());
    let mut line = String::new();
    stdout.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_owned();
    let port = addr.rsplit(':').next().unwrap();

    let out = lse(&["exchange", "send", "--host", "127.0.0.1", "--port", port, "--file", p(&file)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(server.wait().unwrap().success());
    assert_eq!(fs::read(inbox.join("peer_a.lse")).unwrap(), fs::read(&file).unwrap());
}

#[test]
fn run_scenario_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_toy(d, 80);
    let manifest = d.join("m.json");
    fs::write(
        &manifest,
        r#"{
  "name": "toy",
  "scenario": 2,
  "seed": 4,
  "dataset": {"path": "toy.csv", "id_column": "id", "target_column": "y", "task": "regression"},
  "vertical_split": {"fraction": 0.4},
  "autoencoder": {"latent_dim": 2, "encoder_hidden": [8, 6, 4]},
  "training": {"epochs": 5, "batch_size": 16, "learning_rate": 0.001},
  "learner": {"kind": "ridge", "l2": 0.01},
  "output_dir": "runs"
}"#,
    )
    .unwrap();
    let out = lse(&["run-scenario", "--manifest", p(&manifest), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("name,scenario,seed,manifest_digest,split,metric,value"));
    assert!(csv.contains(",test,r2,"));

    let runs: Vec<PathBuf> = fs::read_dir(d.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let report = runs[0].join("report.json");
    let out = lse(&["report", "--input", p(&report), p(&report)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Scenario 2"), "{text}");

    fs::write(&manifest, "{\"name\": 1}").unwrap();
    assert_eq!(lse(&["run-scenario", "--manifest", p(&manifest)]).status.code(), Some(2));
}
