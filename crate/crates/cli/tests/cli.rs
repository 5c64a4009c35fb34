use std::path::Path;
use std::process::{Command, Output};

fn predcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predcode"))
        .args(args)
        .env_remove("PREDCODE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = predcode(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("m.ckpt");
    let report = dir.path().join("report.txt");
    let preds = dir.path().join("preds");

    ok(&[
        "gen-gol",
        "--episodes",
        "6",
        "--steps",
        "5",
        "--height",
        "8",
        "--width",
        "10",
        "--out",
        s(&data),
    ]);
    let manifest = std::fs::read_to_string(data.join("manifest.json")).unwrap();
    assert!(manifest.contains("ep00005/frame0004.pgm"));

    let stdout = ok(&[
        "train",
        "--model",
        "simple-cnn",
        "--data",
        s(&data),
        "--epochs",
        "2",
        "--out",
        s(&ckpt),
    ]);
    let epochs: Vec<_> = stdout.lines().filter(|l| l.starts_with("epoch=")).collect();
    assert_eq!(epochs.len(), 2, "{stdout}");
    assert!(dir.path().join("m.history.json").is_file());

    let table = ok(&[
        "eval",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data),
        "--baseline",
        "--reverse",
        "--report",
        s(&report),
    ]);
    assert!(table.contains("previous-frame") && table.contains("simple-cnn-k3"));
    assert!(table.contains("gol-reversed"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.with_extension("json")).unwrap())
            .unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(
        rows[0]["mse"], rows[2]["mse"],
        "reversal leaves the baseline unchanged"
    );

    ok(&[
        "predict",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data),
        "--limit",
        "2",
        "--out",
        s(&preds),
    ]);
    let files = std::fs::read_dir(preds.join("ep00001")).unwrap().count();
    assert_eq!(files, 2 * 4, "T-1 predictions plus matching actuals");
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-gol",
        "--episodes",
        "4",
        "--steps",
        "4",
        "--height",
        "8",
        "--width",
        "8",
        "--seed",
        "5",
        "--out",
        s(&data),
    ]);
    let run = |name: &str| {
        let p = dir.path().join(name);
        ok(&[
            "train",
            "--model",
            "simple-cnn",
            "--data",
            s(&data),
            "--epochs",
            "2",
            "--seed",
            "9",
            "--out",
            s(&p),
        ]);
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.ckpt"), run("b.ckpt"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: Option<&str>| {
        let p = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_predcode"));
        cmd.args([
            "gen-gol",
            "--episodes",
            "2",
            "--steps",
            "2",
            "--height",
            "8",
            "--width",
            "8",
            "--out",
            s(&p),
        ])
        .env_remove("PREDCODE_SEED");
        if let Some(seed) = seed {
            cmd.env("PREDCODE_SEED", seed);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(p.join("ep00001/frame0000.pgm")).unwrap()
    };
    assert_eq!(gen("a", Some("42")), gen("b", Some("42")));
    assert_ne!(gen("c", Some("42")), gen("d", None));
}

#[test]
fn usage_and_data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = predcode(&[
        "gen-gol",
        "--episodes",
        "0",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = predcode(&[
        "train",
        "--model",
        "prednet",
        "--data",
        s(&dir.path().join("missing")),
        "--out",
        "m.ckpt",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no manifest"));

    let out = predcode(&[
        "train", "--model", "resnet", "--data", ".", "--out", "m.ckpt",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nan_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-gol",
        "--episodes",
        "3",
        "--steps",
        "3",
        "--height",
        "8",
        "--width",
        "8",
        "--out",
        s(&data),
    ]);
    let out = predcode(&[
        "train",
        "--model",
        "simple-cnn",
        "--data",
        s(&data),
        "--epochs",
        "3",
        "--lr",
        "1e300",
        "--out",
        s(&dir.path().join("m.ckpt")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning rate"));
}

#[test]
fn channel_mismatch_on_eval_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let gol = dir.path().join("gol");
    let src = dir.path().join("src");
    let colour = dir.path().join("colour");
    ok(&[
        "gen-gol",
        "--episodes",
        "3",
        "--steps",
        "3",
        "--height",
        "8",
        "--width",
        "8",
        "--out",
        s(&gol),
    ]);
    std::fs::create_dir(&src).unwrap();
    for t in 0..3 {
        let mut bytes = b"P6\n8 8\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(t as u8 * 40, 8 * 8 * 3));
        std::fs::write(src.join(format!("f{t}.ppm")), bytes).unwrap();
    }
    ok(&[
        "ingest",
        "--src",
        s(&src),
        "--height",
        "8",
        "--width",
        "8",
        "--split",
        "single",
        "--out",
        s(&colour),
    ]);
    let ckpt = dir.path().join("m.ckpt");
    ok(&[
        "train",
        "--model",
        "simple-cnn",
        "--data",
        s(&colour),
        "--val",
        s(&colour),
        "--epochs",
        "1",
        "--out",
        s(&ckpt),
    ]);
    let out = predcode(&[
        "eval",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&gol),
        "--report",
        s(&dir.path().join("r.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_pattern_and_upscaled_frames() {
    let dir = tempfile::tempdir().unwrap();
    let glider = dir.path().join("glider");
    ok(&[
        "gen-pattern",
        "--pattern",
        "glider",
        "--height",
        "12",
        "--width",
        "12",
        "--frames",
        "9",
        "--out",
        s(&glider),
    ]);
    let manifest = std::fs::read_to_string(glider.join("manifest.json")).unwrap();
    assert!(manifest.contains("frame0008.pgm"));

    let big = dir.path().join("big");
    ok(&[
        "gen-gol",
        "--episodes",
        "1",
        "--steps",
        "1",
        "--height",
        "16",
        "--width",
        "20",
        "--upscale",
        "8",
        "--out",
        s(&big),
    ]);
    let frame = std::fs::read(big.join("ep00000/frame0000.pgm")).unwrap();
    assert!(frame.starts_with(b"P5\n160 128\n255\n"));
}

#[test]
fn presets_are_listed() {
    let out = ok(&["presets"]);
    for name in [
        "gol-cnn",
        "gol-cnn-k2",
        "gol-prednet",
        "glider-memorize",
        "gol-baseline",
        "natural-cnn",
        "transfer-eval",
        "reverse-eval",
    ] {
        assert!(out.contains(name), "{name} missing from:\n{out}");
    }
}

#[test]
fn preset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-gol",
        "--episodes",
        "10",
        "--steps",
        "4",
        "--height",
        "8",
        "--width",
        "8",
        "--out",
        s(&data),
    ]);
    let out = dir.path().join("run");
    let table = ok(&[
        "preset",
        "reverse-eval",
        "--data",
        s(&data),
        "--epochs",
        "1",
        "--seed",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(table.contains("-reversed"), "{table}");
    for f in [
        "preset.json",
        "model.ckpt",
        "model.history.json",
        "report.txt",
        "report.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
