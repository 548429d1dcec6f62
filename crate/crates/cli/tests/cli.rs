use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("dragonlab-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dragonlab")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn exit_codes() {
    let s = Scratch::new("exit");
    let dir = &s.0;
    assert_eq!(run(&["plan"], dir).status.code(), Some(0));
    assert_eq!(run(&["--help"], dir).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"], dir).status.code(), Some(1));
    assert_eq!(run(&["derive"], dir).status.code(), Some(1));
    assert_eq!(run(&["derive", "--password", "x", "--profile", "eap-pwd"], dir).status.code(), Some(1));
    assert_eq!(run(&["plan", "--target", "1.5"], dir).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--profile", "eap-pwd", "--samples", "3"], dir).status.code(), Some(1));
    assert_eq!(run(&["parse-traces", "missing.txt"], dir).status.code(), Some(2));
    std::fs::write(s.path("bad.txt"), "not a trace\n").unwrap();
    assert_eq!(run(&["parse-traces", "bad.txt"], dir).status.code(), Some(2));
    std::fs::write(s.path("d.txt"), "a\nb\n").unwrap();
    std::fs::write(s.path("none.jsonl"), "").unwrap();
    assert_eq!(run(&["prune", "--dictionary", "d.txt", "--leaks", "none.jsonl"], dir).status.code(), Some(2));
    let bad = run(&["--seed", "1", "handshake-demo", "--password-a", "x", "--password-b", "y"], dir);
    assert_eq!(bad.status.code(), Some(3));
    let ok = run(&["--seed", "1", "handshake-demo", "--password-a", "x"], dir);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn unseeded_runs_announce_their_seed() {
    let s = Scratch::new("seed");
    let o = run(&["gen-dict", "--size", "3"], &s.0);
    let err = String::from_utf8(o.stderr).unwrap();
    let seed: u64 = err.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let replay = run(&["--seed", &seed.to_string(), "gen-dict", "--size", "3"], &s.0);
    assert_eq!(o.stdout, replay.stdout);
    assert!(run(&["plan"], &s.0).stderr.is_empty());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let s = Scratch::new("config");
    std::fs::write(s.path("c.toml"), "format = \"json\"\n[plan]\ntarget = 0.5\nsizes = [\"1000\", \"2000\"]\n")
        .unwrap();
    let from_file = json(&run(&["--config", "c.toml", "plan"], &s.0));
    assert_eq!(from_file["target"], 0.5);
    assert_eq!(from_file["rows"].as_array().unwrap().len(), 2);
    let overridden = json(&run(&["--config", "c.toml", "plan", "--target", "0.9"], &s.0));
    assert_eq!(overridden["target"], 0.9);
    let text = run(&["--config", "c.toml", "--format", "text", "plan"], &s.0);
    assert!(stdout(&text).starts_with("pruned per trace"));
    assert_eq!(run(&["--config", "absent.toml", "plan"], &s.0).status.code(), Some(2));
}

#[test]
fn derive_matches_between_modes() {
    let s = Scratch::new("derive");
    let v = json(&run(&["--format", "json", "derive", "--password", "hunter2"], &s.0));
    let h = json(&run(&["--format", "json", "derive", "--password", "hunter2", "--mode", "hardened"], &s.0));
    assert_eq!(v["element"], h["element"]);
    assert_eq!(v["success_iteration"], h["success_iteration"]);
    let raw = json(&run(&["--format", "json", "derive", "--password", "hex:68756e74657232"], &s.0));
    assert_eq!(raw["element"], v["element"]);
    let eap = json(&run(
        &["--format", "json", "derive", "--password", "p", "--profile", "eap-pwd", "--token", "01020304"],
        &s.0,
    ));
    assert_eq!(eap["success_iteration"], eap["iterations_executed"]);
}

#[test]
fn simulate_parse_prune_pipeline_recovers_the_password() {
    let s = Scratch::new("pipeline");
    let d = &s.0;
    assert!(run(&["--seed", "5", "gen-dict", "--size", "400", "--plant", "planted-pw", "--out", "dict.txt"], d)
        .status
        .success());
    let sim =
        ["--seed", "5", "simulate", "--traces", "16", "--samples", "10", "--password", "planted-pw", "--noise", "zero"];
    assert!(run(&[&sim[..], &["--out", "t.txt", "--answers", "a.jsonl"]].concat(), d).status.success());
    let parsed =
        json(&run(&["--format", "json", "parse-traces", "t.txt", "--answers", "a.jsonl", "--leaks-out", "l.jsonl"], d));
    assert_eq!(parsed["accuracy"], 1.0);
    assert_eq!(parsed["usable"], 16);
    let pruned = json(&run(&["--format", "json", "prune", "--dictionary", "dict.txt", "--leaks", "l.jsonl"], d));
    assert_eq!(pruned["survivors"], serde_json::json!(["planted-pw"]));

    let jsonl = run(&[&["--format", "json"][..], &sim].concat(), d);
    std::fs::write(s.path("t.jsonl"), &jsonl.stdout).unwrap();
    let again = json(&run(&["--format", "json", "parse-traces", "t.jsonl"], d));
    assert_eq!(again["traces"], parsed["traces"]);
}

#[test]
fn campaign_writes_its_artifacts() {
    let s = Scratch::new("campaign");
    let o = run(
        &[
            "--seed",
            "3",
            "--format",
            "json",
            "campaign",
            "--planted",
            "pw",
            "--dict-size",
            "200",
            "--noise",
            "zero",
            "--identities",
            "12",
            "--samples-per-identity",
            "1",
            "--out-dir",
            "out",
        ],
        &s.0,
    );
    assert!(o.status.success());
    let report = json(&o);
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(s.path("out/report.json")).unwrap()).unwrap();
    assert_eq!(report, written);
    let leaks = std::fs::read_to_string(s.path("out/leaks.jsonl")).unwrap();
    assert_eq!(leaks.lines().count(), report["leaks"].as_array().unwrap().len());
}
