use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use erdosavoid_cli::args::{Cli, Command as Sub};
use erdosavoid_cli::commands::fingerprint;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_erdosavoid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mod1_linear_half_has_gap_one_half() {
    let o = run(&["probe", "mod1", "--seq", "linear", "--y", "1/2", "--N", "100"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["profile"]["max_gap"], "1/2");
    assert_eq!(v["exact"], true);
}

#[test]
fn mod1_sqrt2_is_an_enclosure() {
    let o = run(&["probe", "mod1", "--y", "sqrt:2", "--N", "50"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["exact"], false);
}

#[test]
fn sublacunary_measure_is_exact_and_above_bound() {
    let o = run(&["construct", "sublacunary-avoider", "--seq", "reciprocal", "--levels", "4"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["measure"], "13867583/20092800");
    assert_eq!(v["log"]["measure_bound"], "43/128");
    assert_eq!(v["kind"], "construct");
}

#[test]
fn digit_sweep_certifies_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "certify".to_string(),
            "digit-avoider".into(),
            "--m".into(),
            "4".into(),
            "--grid".into(),
            "12x12".into(),
            "--Nmax".into(),
            "64".into(),
            "--format".into(),
            "csv".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let o1 = bin().args(args(&a)).env("ERDOSAVOID_WORKERS", "1").output().unwrap();
    let o2 = bin().args(args(&b)).env("ERDOSAVOID_WORKERS", "4").output().unwrap();
    assert_eq!(code(&o1), 0);
    assert_eq!(code(&o2), 0);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(text.lines().count(), 1 + 144);
    assert!(text.starts_with("id,x_lo,x_hi,y_lo,y_hi,status,rule,witness\n"));
    assert!(!dir.path().join("a.csv.partial").exists());
}

#[test]
fn inconclusive_boxes_exit_two_but_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = run(&["certify", "sublacunary-avoider", "--grid", "5x5", "--out", path_str(&out)]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["total"], 25);
    let certified = v["certified"].as_u64().unwrap();
    assert!(certified > 0 && certified < 25);
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "bogus = 3\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["certify", "digit-avoider", "--grid", "0x3"],
        vec!["certify", "no-such-object"],
        vec!["probe", "mod1", "--N", "10"],
        vec!["probe", "mod1", "--y", "1/0", "--N", "10"],
        vec!["certify", "digit-avoider", "--config", path_str(&conf)],
        vec!["construct", "middle-tree", "--format", "csv"],
    ];
    for c in cases {
        let o = run(&c);
        assert_eq!(code(&o), 1, "{c:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = bin().args(["probe", "ell", "--f", "1"]).env("ERDOSAVOID_WORKERS", "zero").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["certify", "--help"])), 0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# sweep\ngrid = 3x3\nNmax: 8\nm = 4\n").unwrap();
    let o = run(&["certify", "digit-avoider", "--config", path_str(&conf), "--grid", "2x2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["total"], 4);
    assert_eq!(v["params"]["Nmax"], 8);
    assert_eq!(v["params"]["grid"], "2x2");
}

#[test]
fn sweeps_resume_from_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let argv = ["certify", "digit-avoider", "--grid", "3x3", "--out", path_str(&out)];
    let cli = Cli::try_parse_from(std::iter::once("erdosavoid").chain(argv)).unwrap();
    let Sub::Certify(a) = &cli.command else { panic!() };
    let fp = fingerprint("certify", a).unwrap();

    // a finished row for box 4 carrying a marker a fresh run never produces
    let partial = dir.path().join("r.json.partial");
    let header = serde_json::json!({ "fingerprint": fp });
    let row = r#"{"id":4,"a":["1/3","2/3"],"b":["10/3","20/3"],"status":"certified","rule":"resumed","witness":""}"#;
    std::fs::write(&partial, format!("{header}\n{row}\n{{\"id\":5,\"a\"")).unwrap();
    let o = run(&argv);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 of 9"));
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[4]["rule"], "resumed");
    assert_ne!(rows[5]["rule"], "resumed");
    assert!(!partial.exists());

    // a partial from different parameters is ignored
    std::fs::write(&partial, format!("{{\"fingerprint\":\"other\"}}\n{row}\n")).unwrap();
    let o = run(&argv);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_ne!(v["rows"][4]["rule"], "resumed");
}

#[test]
fn report_is_additive_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    let sweep = |x: &str, out: &str, fmt: &str| {
        let o = run(&["certify", "digit-avoider", "--x", x, "--grid", "4x5", "--format", fmt, "--out", out]);
        assert_eq!(code(&o), 0);
    };
    sweep("0:1/2", &p("left.csv"), "csv");
    sweep("1/2:1", &p("right.json"), "json");
    let o = run(&["construct", "sublacunary-avoider", "--levels", "2", "--out", &p("set.json")]);
    assert_eq!(code(&o), 0);

    let one = run(&["report", &p("left.csv"), &p("right.json"), &p("set.json"), "--out", &p("sum1.json")]);
    let two = run(&["report", &p("left.csv"), &p("right.json"), &p("set.json"), "--out", &p("sum2.json")]);
    assert_eq!(code(&one), 0);
    assert_eq!(code(&two), 0);
    let (s1, s2) = (std::fs::read(p("sum1.json")).unwrap(), std::fs::read(p("sum2.json")).unwrap());
    assert_eq!(s1, s2);

    let v: Value = serde_json::from_slice(&s1).unwrap();
    assert_eq!(v["totals"]["total"], 40);
    assert_eq!(v["totals"]["certified"], 40);
    assert_eq!(v["totals"]["certified_fraction"], "1/1");
    assert_eq!(v["files"][0]["total"], 20);
    assert_eq!(v["files"][1]["total"], 20);
    let ledger = v["measure_ledger"].as_array().unwrap();
    assert_eq!(ledger.len(), 1);
    assert_eq!(ledger[0]["object"], "sublacunary-avoider");
}

#[test]
fn report_names_the_mismatched_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "alpha,beta\n1,2\n").unwrap();
    let also_bad = dir.path().join("weird.json");
    std::fs::write(&also_bad, r#"{"kind":"mystery"}"#).unwrap();
    for f in [&bad, &also_bad] {
        let o = run(&["report", path_str(f)]);
        assert_eq!(code(&o), 1);
        assert!(String::from_utf8_lossy(&o.stderr).contains(path_str(f)));
    }
}

#[test]
fn seed_fixes_sumset_targets() {
    let args = |seed: &str| {
        run(&[
            "probe", "sumset", "--lambda", "3/2", "--targets", "20", "--depth", "6", "--seed", seed, "--format", "csv",
        ])
    };
    let (a, b, c) = (args("7"), args("7"), args("8"));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!([0, 2].contains(&code(&a)));
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 21);
}

#[test]
fn geometric_and_glw_sweeps_run() {
    let o = run(&["certify", "geometric", "--grid", "4x4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["axes"], serde_json::json!(["y", "b"]));
    let o = run(&["certify", "glw", "--grid", "10x10"]);
    assert_eq!(code(&o), 0);
    // deep witnesses need narrower boxes than a 10x10 grid gives
    let o = run(&["certify", "glw", "--grid", "10x10", "--depth", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn construct_objects_report_measures() {
    let o = run(&["construct", "fractional", "--p", "1/3", "--window", "4"]);
    assert_eq!(json(&o)["measure"], "1/3");
    let o = run(&["construct", "middle-tree", "--x-n", "2", "--depth", "3"]);
    let v = json(&o);
    // level 3 of the middle-1/5 tree keeps (4/5)^3
    assert_eq!(v["measure"], "64/125");
    assert_eq!(v["thickness"], "2/1");
    let o = run(&["construct", "digit-avoider", "--m", "4", "--window", "3", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("cell,lo,hi\n"));
}
