use std::path::Path;
use std::process::{Command, Output};

use chunkgen_harness::manifest::{Manifest, METRIC_SUBSTITUTION};

const SMALL: &str = r#"{
  "world": {
    "chunk_len": 6,
    "frame_shape": {"height": 8, "width": 8, "channels": 3}
  },
  "search": {"chunks": 3, "candidates": 3, "eval_steps": 3, "full_steps": 10}
}"#;

fn chunkgen(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    if !cfg.exists() {
        std::fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_chunkgen"))
        .arg("--quiet")
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn generate_writes_a_verifiable_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = chunkgen(tmp.path(), &["--out", out.to_str().unwrap(), "generate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::read(&out).unwrap();
    assert!(m.verify(&out).is_empty());
    assert_eq!(m.run.as_ref().unwrap().chunks.len(), 3);
    assert!(m.notices.iter().any(|n| n == METRIC_SUBSTITUTION));
    assert_eq!(
        m.files
            .iter()
            .filter(|f| f.path.starts_with("frames/frame_"))
            .count(),
        18
    );
    assert!(out.join("frames/frame_00017.ppm").exists());

    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(!text.contains('\r'));
    let rows = read_csv(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][0], "video");

    let o = chunkgen(
        tmp.path(),
        &["metrics", out.join("video.cbcv").to_str().unwrap()],
    );
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "metric,value");
    // f32 storage moves the recomputed values only in the last digits
    for (line, stored) in lines[1..].iter().zip(&rows[3][7..]) {
        let (_, v) = line.split_once(',').unwrap();
        let (a, b): (f64, f64) = (v.parse().unwrap(), stored.parse().unwrap());
        assert!((a - b).abs() < 1e-6, "{line} vs {stored}");
    }
}

#[test]
fn emit_flags_limit_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("config.json");
    let text = SMALL.replacen('{', "{\"emit_frames\": false, \"emit_tensor\": false,", 1);
    std::fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("run");
    let o = chunkgen(tmp.path(), &["--out", out.to_str().unwrap(), "generate"]);
    assert!(o.status.success());
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "metrics.csv"]);
}

#[test]
fn seed_flag_changes_the_video() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    chunkgen(tmp.path(), &["--out", a.to_str().unwrap(), "generate"]);
    chunkgen(
        tmp.path(),
        &["--out", b.to_str().unwrap(), "--seed", "9", "generate"],
    );
    let ma = Manifest::read(&a).unwrap();
    let mb = Manifest::read(&b).unwrap();
    assert_eq!(mb.config.search.base_seed.value, 9);
    assert_ne!(
        ma.run.unwrap().video.checksum,
        mb.run.unwrap().video.checksum
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"search\": {\"chunks\": 0}}").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_chunkgen"))
        .args(["--quiet", "--config", bad.to_str().unwrap(), "generate"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:1:"), "{err}");

    let o = Command::new(env!("CARGO_BIN_EXE_chunkgen"))
        .args([
            "--config",
            tmp.path().join("nope.json").to_str().unwrap(),
            "generate",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = chunkgen(
        tmp.path(),
        &["--out", blocker.join("run").to_str().unwrap(), "generate"],
    );
    assert_eq!(o.status.code(), Some(2));

    let o = chunkgen(tmp.path(), &["k-sweep", "--k", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let o = Command::new(env!("CARGO_BIN_EXE_chunkgen"))
        .arg("no-such-command")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let junk = tmp.path().join("junk.cbcv");
    std::fs::write(&junk, b"nope").unwrap();
    let o = chunkgen(tmp.path(), &["metrics", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn k_sweep_full_steps_match_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ks");
    let o = chunkgen(
        tmp.path(),
        &[
            "--out",
            out.to_str().unwrap(),
            "k-sweep",
            "--k",
            "2,10",
            "--seeds",
            "4",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("k_sweep.csv"));
    assert_eq!(rows.len(), 8);
    for r in rows.iter().filter(|r| r[0] == "10") {
        assert_eq!(r[2], "1");
        assert_eq!(r[3], "true");
    }
    assert_eq!(rows[0][..2], ["2".to_string(), "0".to_string()]);
}

#[test]
fn noise_study_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ns");
    let o = chunkgen(tmp.path(), &["--out", out.to_str().unwrap(), "noise-study"]);
    assert!(o.status.success());
    let stats = read_csv(&out.join("noise_study.csv"));
    assert_eq!(stats.len(), 4);
    assert_eq!(read_csv(&out.join("noise_study_runs.csv")).len(), 10);

    let eq = tmp.path().join("eq");
    chunkgen(
        tmp.path(),
        &[
            "--out",
            eq.to_str().unwrap(),
            "noise-study",
            "--force-equal",
        ],
    );
    for row in read_csv(&eq.join("noise_study.csv")) {
        assert_eq!(row[3], "0");
        assert_eq!(row[4], "0");
    }
    let o = chunkgen(tmp.path(), &["noise-study", "--noises", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn chunk_ablation_is_factorial_and_order_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "--out".to_string(),
            dir.to_str().unwrap().to_string(),
            "chunk-ablation".into(),
            "--chunks".into(),
            "1,2".into(),
            "--strategies".into(),
            "naive,kstep,bruteforce".into(),
            "--seeds".into(),
            "2".into(),
        ]
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = chunkgen(
        tmp.path(),
        &args(&a).iter().map(String::as_str).collect::<Vec<_>>(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut serial = args(&b);
    serial.insert(0, "1".into());
    serial.insert(0, "--jobs".into());
    chunkgen(
        tmp.path(),
        &serial.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    let runs = read_csv(&a.join("chunk_ablation.csv"));
    assert_eq!(runs.len(), 3 * 2 * 2);
    assert_eq!(read_csv(&a.join("chunk_ablation_summary.csv")).len(), 6);
    for f in ["chunk_ablation.csv", "chunk_ablation_summary.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
    let o = chunkgen(tmp.path(), &["chunk-ablation", "--strategies", "greedy"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn default_config_command_prints_parseable_json() {
    let o = Command::new(env!("CARGO_BIN_EXE_chunkgen"))
        .arg("default-config")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = chunkgen_harness::config::parse_config(&text, "stdout").unwrap();
    assert_eq!(cfg, chunkgen_harness::RunConfig::default());
}
