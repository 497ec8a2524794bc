use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_icpo");

fn icpo(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const GROUP: &str = r#"{"group_id":"g1","responses":[
{"id":1,"mean_logprob":-0.0135,"answer_correct":false,"format_ok":true},
{"id":2,"mean_logprob":-0.0583,"answer_correct":false,"format_ok":true},
{"id":3,"mean_logprob":-0.0216,"answer_correct":true,"format_ok":true},
{"id":4,"mean_logprob":-0.0090,"answer_correct":false,"format_ok":true},
{"id":5,"mean_logprob":-0.0407,"answer_correct":true,"format_ok":true}]}"#;

fn one_line(s: &str) -> String {
    s.replace('\n', "")
}

#[test]
fn replay_prints_every_fixture_and_flags_the_noisy_row() {
    let o = icpo(&["replay-appendix"]);
    let text = stdout(&o);
    for name in ["worked-group-1", "worked-group-2", "noisy-group"] {
        assert!(text.contains(name), "{name}");
    }
    assert!(text.lines().any(|l| l.contains("noisy-group") && l.contains("R_final[5]") && l.ends_with("DISCREPANCY")));
    // The second worked group's reference scores do not reproduce, so the
    // command reports failure.
    assert_eq!(o.status.code(), Some(1));
    assert!(text.lines().last().unwrap().starts_with("FAILED"));
}

#[test]
fn score_writes_one_line_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, format!("{}\n\n{}\n", one_line(GROUP), one_line(GROUP).replace("\"g1\"", "7"))).unwrap();
    let out = dir.path().join("out.jsonl");
    let o = icpo(&["score", input.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["group_id"], "g1");
    assert_eq!(lines[1]["group_id"], 7);
    let r5 = &lines[0]["responses"][4];
    assert!((r5["S_p"].as_f64().unwrap() - 0.4372).abs() < 1e-3);
    assert!((r5["r_final"].as_f64().unwrap() - 1.4372).abs() < 1e-3);
    assert!((r5["advantage_icpo"].as_f64().unwrap() - 1.2376).abs() < 1e-3);
    assert!((r5["advantage_grpo"].as_f64().unwrap() - 1.2247).abs() < 1e-3);
}

#[test]
fn score_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, format!("{}\nnot json\n", one_line(GROUP))).unwrap();
    let o = icpo(&["score", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = icpo(&["score", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = icpo(&["score", input.to_str().unwrap(), "--tau", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = icpo(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn perturb_is_seeded_and_clamped() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let lines: Vec<String> = (0..40).map(|_| one_line(GROUP)).collect();
    fs::write(&input, lines.join("\n")).unwrap();
    let run = |seed: &str| {
        let o = icpo(&["perturb", input.to_str().unwrap(), "--seed", seed, "--fraction", "0.5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let a = run("3");
    assert_eq!(a, run("3"));
    assert_ne!(a, run("4"));

    let mut changed = 0;
    for line in a.lines() {
        let g: Value = serde_json::from_str(line).unwrap();
        for r in g["responses"].as_array().unwrap() {
            let v = r["r_verif"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&v));
            let clean = if r["answer_correct"].as_bool().unwrap() { 1.0 } else { 0.1 };
            if (v - clean).abs() > 1e-12 {
                changed += 1;
                assert!(((v - clean).abs() - 0.3).abs() < 1e-12 || v == 0.0 || v == 1.0);
            }
        }
    }
    assert!(changed > 0);

    // Perturbed output feeds straight back into `score`.
    let noisy = dir.path().join("noisy.jsonl");
    fs::write(&noisy, &a).unwrap();
    assert!(icpo(&["score", noisy.to_str().unwrap()]).status.success());
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn train_writes_metrics_config_and_rollouts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), "# small run\nsteps = 10\nnum_prompts = 4\ngroup_size = 3\nvocab_size = 3\nmax_len = 2\ntask = modsum\nscenario = coarse\nlearning_rate = 5\n");
    let o = icpo(&["train", &cfg, "--out", out.to_str().unwrap(), "--log-rollouts"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,omega,mean_reward,accuracy,entropy,kl,mean_abs_advantage");
    assert_eq!(lines.count(), 10);

    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("scenario = coarse"));
    assert!(resolved.contains("clip_eps = 0.2"));

    // Audit: every retained group is uniform in correctness.
    let rollouts = fs::read_to_string(out.join("rollouts.jsonl")).unwrap();
    let mut retained = 0;
    let mut total = 0;
    for line in rollouts.lines() {
        let g: Value = serde_json::from_str(line).unwrap();
        total += 1;
        let flags: Vec<bool> = g["responses"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["answer_correct"].as_bool().unwrap())
            .collect();
        let uniform = flags.iter().all(|&f| f) || flags.iter().all(|&f| !f);
        if g["retained"].as_bool().unwrap() {
            retained += 1;
            assert!(uniform, "{line}");
            assert_eq!(g["advantages"].as_array().unwrap().len(), flags.len());
        } else {
            assert!(g["advantages"].as_array().unwrap().is_empty());
        }
    }
    assert_eq!(total, 10 * 4);
    assert!(retained > 0);
}

#[test]
fn zero_steps_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    let cfg = write_config(dir.path(), "steps = 0\n");
    let o = icpo(&["train", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv, "step,omega,mean_reward,accuracy,entropy,kl,mean_abs_advantage\n");
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "steps = 3\ngroup_sise = 5\n");
    let o = icpo(&["train", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("group_sise"));

    let cfg = write_config(dir.path(), "clip_eps = -1\n");
    let o = icpo(&["train", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("clip_eps"));
}
