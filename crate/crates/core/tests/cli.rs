use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vargan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vargan"))
        .args(args)
        .env("VARGAN_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_theory_passes() {
    let o = vargan(&["verify-theory", "--trials", "100", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("name=single[0]"));
    assert!(text.contains("name=pair[99]"));
    assert!(text.trim_end().ends_with("all_pass=true"));
    assert!(!text.contains("pass=false"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = vargan(&["verify-theory", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let missing = dir.path().join("nope.vgck");
    let targets = dir.path().join("t.csv");
    let o = vargan(&["generate", "--checkpoint", s(&missing), "--targets", s(&targets), "--out", s(&dir.path().join("g"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = vargan(&["train", "--method", "nonsense", "--data", "x", "--out", "y"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = vargan(&["synth-data", "--n", "50", "--seed", "3", "--out", s(&a)]);
    let ob = vargan(&["synth-data", "--n", "50", "--seed", "3", "--out", s(&b)]);
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(stdout(&oa), stdout(&ob));
    for f in ["manifest", "images.bin", "targets.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let oc = vargan(&["synth-data", "--n", "50", "--seed", "4", "--out", s(&dir.path().join("c"))]);
    assert_ne!(stdout(&oa), stdout(&oc));
}

#[test]
fn train_generate_grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    assert_eq!(vargan(&["synth-data", "--n", "40", "--out", s(&data)]).status.code(), Some(0));
    let cfg = root.join("cfg.txt");
    fs::write(&cfg, "steps=100\nbatch=8\nlatent_dim=16\ngamma=0.6\n").unwrap();
    let run = root.join("run");
    let o = vargan(&[
        "train", "--method", "vargan", "--data", s(&data), "--config", s(&cfg), "--steps", "2", "--seed", "1",
        "--out", s(&run),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(echoed.contains("steps=2\n"));
    assert!(echoed.contains("batch=8\n"));
    assert!(echoed.contains("latent_dim=16\n"));
    assert!(echoed.contains("gamma=0.6\n"));
    assert_eq!(fs::read_to_string(run.join("telemetry.csv")).unwrap().lines().count(), 3);

    let targets = root.join("targets.csv");
    let all = fs::read_to_string(data.join("targets.csv")).unwrap();
    fs::write(&targets, all.lines().take(3).collect::<Vec<_>>().join("\n")).unwrap();
    let gen = root.join("gen");
    let ckpt = run.join("final.vgck");
    let args = [
        "generate", "--checkpoint", s(&ckpt), "--targets", s(&targets), "--per-target", "3",
        "--seed", "5", "--grid", "3", "--out", s(&gen),
    ];
    assert_eq!(vargan(&args).status.code(), Some(0));
    let first = fs::read(gen.join("images.bin")).unwrap();
    assert_eq!(first.len(), 6 * 32 * 32);
    assert!(fs::read(gen.join("grid.pgm")).unwrap().starts_with(b"P5\n98 65\n255\n"));
    assert!(fs::read_to_string(gen.join("manifest")).unwrap().contains("config.latent_dim=16"));
    vargan(&args);
    assert_eq!(fs::read(gen.join("images.bin")).unwrap(), first);

    let grid = root.join("g.pgm");
    assert_eq!(vargan(&["grid", "--in", s(&gen), "--cols", "3", "--out", s(&grid)]).status.code(), Some(0));
    assert_eq!(fs::read(&grid).unwrap(), fs::read(gen.join("grid.pgm")).unwrap());

    let mut names: Vec<String> = fs::read_dir(root).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["cfg.txt", "data", "g.pgm", "gen", "run", "targets.csv"]);
}

#[test]
fn evaluate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    assert_eq!(vargan(&["synth-data", "--n", "1000", "--out", s(&data)]).status.code(), Some(0));
    let run = root.join("run");
    let o = vargan(&["train", "--method", "began", "--data", s(&data), "--steps", "1", "--out", s(&run)]);
    assert_eq!(o.status.code(), Some(0));
    let ckpt = run.join("final.vgck");

    let ev = root.join("eval");
    let o = vargan(&["evaluate", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&ev)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(ev.join("report.txt")).unwrap();
    for key in ["fidelity=", "diversity=", "entropy=", "separation=", "feature_space=", "jsd_bins=", "config.method=began"] {
        assert!(report.contains(key), "{key}");
    }
    let oracle = ev.join("oracle.vgck");
    assert!(oracle.is_file());

    let cmp = root.join("cmp");
    let o = vargan(&[
        "compare", "--vargan", s(&ckpt), "--cbigan", s(&ckpt), "--data", s(&data), "--oracle", s(&oracle),
        "--seeds", "0,1", "--out", s(&cmp),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(cmp.join("verdicts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8 + 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",tie")));
    vargan(&[
        "compare", "--vargan", s(&ckpt), "--cbigan", s(&ckpt), "--data", s(&data), "--oracle", s(&oracle),
        "--seeds", "0,1", "--out", s(&cmp),
    ]);
    assert_eq!(fs::read_to_string(cmp.join("verdicts.csv")).unwrap(), csv);

    let other = root.join("other");
    vargan(&["synth-data", "--n", "1000", "--seed", "9", "--out", s(&other)]);
    let o = vargan(&[
        "compare", "--vargan", s(&ckpt), "--cbigan", s(&ckpt), "--data", s(&other), "--oracle", s(&oracle),
        "--out", s(&root.join("cmp2")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
