use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qlb::landscape::{find_minimum, Landscape};

fn qlb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlb"))
        .args(args)
        .env_remove("QLB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn instance_show_bundled() {
    let o = qlb(&["instance", "show", "--paper"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("edges: 5"));
    assert!(text.contains("max cut: 8"));

    let o = qlb(&["instance", "show", "--paper", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["nodes"], 5);
    assert_eq!(v["edges"].as_array().unwrap().len(), 5);
    assert_eq!(v["edges"][0], serde_json::json!([0, 1, 3.0]));
}

#[test]
fn instance_validate() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let dup = dir.path().join("dup.json");
    fs::write(&good, r#"{"nodes": 3, "edges": [[0, 1, 1.5], [1, 2, 2]]}"#).unwrap();
    fs::write(&dup, r#"{"nodes": 3, "edges": [[0, 1, 1], [1, 0, 2]]}"#).unwrap();
    assert!(qlb(&["instance", "validate", p(&good)]).status.success());
    let o = qlb(&["instance", "validate", p(&dup)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("duplicate"));
    assert_eq!(
        qlb(&["instance", "validate", "/no/such/file.json"]).status.code(),
        Some(4)
    );
}

#[test]
fn exact_landscape_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "1",
        "--exact",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("energy=-6.967485"));
    let csv = fs::read_to_string(dir.path().join("local-exact-p1-s42.csv")).unwrap();
    assert_eq!(csv.lines().count(), 232);
    assert_eq!(csv.lines().next(), Some("gamma,beta,energy"));
    let l = Landscape::load(&dir.path().join("local-exact-p1-s42.json")).unwrap();
    assert_eq!(l.meta().seed, 42);
    // no checkpoint left behind after a finished run
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn usage_and_capability_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "mock-superconducting",
        "--depth",
        "2",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "1",
        "--shots",
        "5",
        "--exact",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "mock-iontrap",
        "--depth",
        "1",
        "--exact",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("mock-iontrap") && err.contains("hint:"), "{err}");

    let o = qlb(&["landscape", "run", "--backend", "nowhere", "--depth", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn seeded_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed_flag: Option<&str>, env_seed: Option<&str>| {
        let out = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qlb"));
        cmd.args(["landscape", "run", "--backend", "mock-superconducting", "--depth", "1"])
            .args(["--shots", "200", "--step-divisor", "8", "--out", p(&out)])
            .env_remove("QLB_SEED");
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(s) = env_seed {
            cmd.env("QLB_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        let name = format!(
            "mock-superconducting-p1-s{}.csv",
            seed_flag.or(env_seed).unwrap_or("42")
        );
        fs::read(out.join(name)).unwrap()
    };
    let a = run("a", Some("5"), None);
    assert_eq!(a, run("b", Some("5"), None));
    assert_eq!(a, run("c", None, Some("5")));
    assert_ne!(a, run("d", Some("6"), None));
    assert_eq!(run("e", None, None), run("f", Some("42"), None));
}

#[test]
fn warm_start_writes_both_depths() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "mock-iontrap",
        "--depth",
        "2",
        "--warm-start",
        "--shots",
        "100",
        "--step-divisor",
        "6",
        "--seed",
        "8",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d1 = Landscape::load(&dir.path().join("mock-iontrap-p1-s8.json")).unwrap();
    let d2 = Landscape::load(&dir.path().join("mock-iontrap-p2-s8.json")).unwrap();
    let m = find_minimum(&d1);
    let fixed = d2.meta().fixed_layer1.unwrap();
    assert_eq!((fixed.gamma, fixed.beta), (m.gamma, m.beta));

    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "2",
        "--fixed-gamma",
        "0.5",
        "--fixed-beta",
        "0.25",
        "--exact",
        "--step-divisor",
        "4",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let l = Landscape::load(&dir.path().join("local-exact-p2-s42.json")).unwrap();
    assert_eq!(l.meta().fixed_layer1.map(|f| (f.gamma, f.beta)), Some((0.5, 0.25)));
}

#[test]
fn metrics_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    let common = ["--step-divisor", "6", "--out", out];
    let exact = qlb(&[
        &[
            "landscape",
            "run",
            "--backend",
            "local-exact",
            "--depth",
            "1",
            "--exact",
        ][..],
        &common,
    ]
    .concat());
    assert!(exact.status.success());
    let noisy = qlb(&[
        &[
            "landscape",
            "run",
            "--backend",
            "mock-iontrap",
            "--depth",
            "1",
            "--shots",
            "100",
        ][..],
        &common,
    ]
    .concat());
    assert!(noisy.status.success());
    let exact_json = dir.path().join("local-exact-p1-s42.json");
    let noisy_json = dir.path().join("mock-iontrap-p1-s42.json");

    let o = qlb(&["metrics", "mad", "--a", p(&exact_json), "--b", p(&exact_json)]);
    assert_eq!(stdout(&o).trim(), "0");

    let report = dir.path().join("report.csv");
    let o = qlb(&[
        "metrics",
        "report",
        "--landscapes",
        p(&noisy_json),
        p(&exact_json),
        "--reference",
        "exact",
        "--graph",
        "paper",
        "--out",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&report).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "backend,depth,replication,mad_sim,mad_mms");
    assert!(lines[2].starts_with("local-exact,1,1,0,"), "{csv}");

    // explicit reference files work the same way
    let o = qlb(&[
        "metrics",
        "report",
        "--landscapes",
        p(&noisy_json),
        "--reference",
        p(&exact_json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    // a landscape on another grid is reported by file name
    let coarse = dir.path().join("coarse");
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "1",
        "--exact",
        "--step-divisor",
        "4",
        "--out",
        p(&coarse),
    ]);
    assert!(o.status.success());
    let coarse_json = coarse.join("local-exact-p1-s42.json");
    let o = qlb(&[
        "metrics",
        "report",
        "--landscapes",
        p(&noisy_json),
        p(&coarse_json),
        "--reference",
        p(&exact_json),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains(p(&coarse_json)), "{}", stderr(&o));
    let o = qlb(&["metrics", "mad", "--a", p(&exact_json), "--b", p(&coarse_json)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn heatmap_export() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qlb(&[
        "landscape",
        "run",
        "--backend",
        "local-exact",
        "--depth",
        "1",
        "--exact",
        "--out",
        p(dir.path())
    ])
    .status
    .success());
    let json = dir.path().join("local-exact-p1-s42.json");
    let pgm = dir.path().join("h.pgm");
    let o = qlb(&["export", "heatmap", "--landscape", p(&json), "--out", p(&pgm)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n# minimum gamma_index=3 beta_index=2"));
    assert!(bytes.len() > 231);
    let body = &bytes[bytes.len() - 231..];
    let darkest = (0..231).min_by_key(|&i| body[i]).unwrap();
    // top row is the largest β
    assert_eq!((darkest % 21, 10 - darkest / 21), (3, 2));
    assert_eq!(body.iter().max(), Some(&255));
}

#[test]
fn backends_jobs_and_circuits() {
    let o = qlb(&["backends", "list"]);
    let text = stdout(&o);
    for name in ["local-exact", "mock-iontrap", "mock-superconducting"] {
        assert!(text.contains(name));
    }
    let o = qlb(&["backends", "list", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("jobs.jsonl");
    let o = qlb(&[
        "landscape",
        "run",
        "--backend",
        "mock-superconducting",
        "--depth",
        "1",
        "--shots",
        "20",
        "--step-divisor",
        "2",
        "--jobs",
        p(&log),
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = qlb(&["job", "list", "--jobs", p(&log)]);
    assert_eq!(stdout(&o).lines().count(), 1 + 6);
    let o = qlb(&["job", "fetch", "job-000001", "--jobs", p(&log)]);
    let raw: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(raw[0]["payload"]["per_shot"].as_array().unwrap().len(), 20);
    let o = qlb(&["job", "fetch", "job-000001", "--jobs", p(&log), "--normalized"]);
    let norm: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(norm[0]["counts"]["shots"], 20);
    assert_eq!(
        qlb(&["job", "fetch", "job-999999", "--jobs", p(&log)]).status.code(),
        Some(4)
    );

    let o = qlb(&["circuit", "build", "--gammas", "0.47", "--betas", "0.31"]);
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["gates"].as_array().unwrap().len(), 25);
    let o = qlb(&[
        "circuit",
        "build",
        "--gammas",
        "0.47",
        "--betas",
        "0.31",
        "--backend",
        "mock-superconducting",
    ]);
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["stats"]["two_qubit_count"], 28);
}

#[test]
fn config_file_defines_backends_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{
            "backends": [{
                "name": "lab-chain", "supports_batching": true, "bit_order": "canonical",
                "result_style": "aggregated", "exposes_compiled": true,
                "device_spec": {"coupling": {"preset": "linear", "qubits": 5}, "native_set": "restricted"},
                "noise": {"p1": 0.0, "p2": 0.0, "p_readout": 0.0}
            }],
            "noise_profiles": {"wrecked": {"p1": 1.0, "p2": 1.0, "p_readout": 0.0}},
            "defaults": {"backend": "lab-chain", "shots": 300, "step_divisor": 4, "seed": 3}
        }"#,
    )
    .unwrap();
    let o = qlb(&["backends", "list", "--config", p(&cfg)]);
    assert!(stdout(&o).contains("lab-chain"));
    let o = qlb(&[
        "landscape",
        "run",
        "--config",
        p(&cfg),
        "--depth",
        "1",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let l = Landscape::load(&dir.path().join("lab-chain-p1-s3.json")).unwrap();
    assert_eq!(l.meta().shots, qlb::landscape::ShotMode::Shots(300));
    assert_eq!(l.grid().gamma_values().len(), 5);

    let o = qlb(&[
        "landscape",
        "run",
        "--config",
        p(&cfg),
        "--depth",
        "1",
        "--noise-profile",
        "wrecked",
        "--out",
        p(&dir.path().join("wrecked")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let w = Landscape::load(&dir.path().join("wrecked/lab-chain-p1-s3.json")).unwrap();
    let spread = w
        .energies()
        .iter()
        .flatten()
        .map(|e| (e + 4.5).abs())
        .fold(0.0, f64::max);
    assert!(spread < 0.6, "{spread}");

    let o = qlb(&[
        "landscape",
        "run",
        "--config",
        p(&cfg),
        "--depth",
        "1",
        "--noise-profile",
        "nope",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(4));
}
