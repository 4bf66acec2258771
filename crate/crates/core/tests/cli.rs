use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jointlabel::cli::exit_code;
use jointlabel::Error;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointlabel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn synth(dir: &Path) {
    let out = dir.to_str().unwrap();
    let o = run(&[
        "synth",
        "--seed",
        "3",
        "--out",
        out,
        "--set",
        "n_train=60",
        "--set",
        "n_dev=20",
        "--set",
        "n_test=20",
    ]);
    assert!(o.status.success(), "{o:?}");
}

fn quick_train(data: &Path, out: &Path) -> Output {
    let p = |f: &str| data.join(f).to_str().unwrap().to_string();
    run(&[
        "train",
        "--train",
        &p("train.tsv"),
        "--dev",
        &p("dev.tsv"),
        "--test",
        &p("test.tsv"),
        "--out",
        out.to_str().unwrap(),
        "--max-epochs",
        "1",
        "--set",
        "sizes=desk",
    ])
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    synth(&a);
    synth(&b);
    for f in ["train.tsv", "dev.tsv", "test.tsv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let train = fs::read_to_string(a.join("train.tsv")).unwrap();
    assert_eq!(train.matches("#sent").count(), 60);
}

#[test]
fn gradcheck_passes_for_seed_one() {
    let o = run(&["gradcheck", "--seed", "1"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.starts_with("max_relative_error"))
        .unwrap();
    let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(v <= 1e-4);
}

#[test]
fn train_predict_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data);
    let before = fs::read(data.join("train.tsv")).unwrap();
    let model_dir = dir.path().join("model");
    let o = quick_train(&data, &model_dir);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        fs::read(data.join("train.tsv")).unwrap(),
        before,
        "input file was modified"
    );
    for f in ["model.ckpt", "history.csv", "config.resolved"] {
        assert!(model_dir.join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(model_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    let resolved = fs::read_to_string(model_dir.join("config.resolved")).unwrap();
    assert!(resolved.contains("max_epochs = 1\n") && resolved.contains("word_emb = 16\n"));

    let ckpt = model_dir.join("model.ckpt");
    let raw = dir.path().join("raw.tsv");
    fs::write(&raw, "the\nquick\nxqz\nfox\n").unwrap();
    let o = run(&[
        "predict",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        raw.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("#sent "));
    let mut weight_sum = 0.0;
    for (line, tok) in lines[1..].iter().zip(["the", "quick", "xqz", "fox"]) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 3);
        assert_eq!(f[0], tok);
        weight_sum += f[2].parse::<f64>().unwrap();
    }
    assert!((weight_sum - 1.0).abs() < 1e-9);

    let out = dir.path().join("pred");
    let test = data.join("test.tsv");
    let o = run(&[
        "predict",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        test.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let pred = fs::read_to_string(out.join("predictions.tsv")).unwrap();
    assert_eq!(pred.matches("#sent").count(), 20);
    assert_eq!(pred.split("\n\n").count(), 20);

    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        test.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(
        text.contains("sentence acc=") && text.contains("token    acc="),
        "{text}"
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# synthetic corpus\nseed = 5\nn_train = 7\nn_dev = 3\nn_test = 3\n",
    )
    .unwrap();
    let out = dir.path().join("d");
    let o = run(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(
        resolved.contains("seed = 9\n") && resolved.contains("n_train = 7\n"),
        "{resolved}"
    );
    assert_eq!(
        fs::read_to_string(out.join("train.tsv"))
            .unwrap()
            .matches("#sent")
            .count(),
        7
    );
}

#[test]
fn sweep_and_ablate_write_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "--set",
        "n_train=30",
        "--set",
        "n_dev=10",
        "--set",
        "n_test=10",
        "--set",
        "sizes=desk",
        "--max-epochs",
        "1",
        "--seeds",
        "1",
    ];
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--fractions",
        "0,1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(common);
    let o = run(&args);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "fraction,seed,metric_name,value");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,1,token_test_F1,"));

    let out = dir.path().join("ablate");
    let mut args = vec![
        "ablate",
        "--variants",
        "LAST,JOINT",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(common);
    let o = run(&args);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "variant,dev_f1,acc,p,r,f1,f05");
    assert!(lines[1].starts_with("LAST,") && lines[2].starts_with("JOINT,"));
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tsv");
    let m = missing.to_str().unwrap();
    let out = dir.path().join("o");
    let o_dir = out.to_str().unwrap();

    let o = run(&["train", "--train", m, "--dev", m, "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");

    assert_eq!(
        run(&["eval", "--checkpoint", m, "--data", m]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["synth", "--set", "colour=red", "--out", o_dir])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["synth", "--set", "vocab_size=x", "--out", o_dir])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["synth", "--seed", "1", "--set", "seed=2", "--out", o_dir])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["predict", "--data", m]).status.code(), Some(2));
    assert_eq!(run(&["train", "--config", m]).status.code(), Some(2));
    assert_ne!(run(&["frobnicate"]).status.code(), Some(0));

    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"JLCK garbage").unwrap();
    assert_eq!(
        run(&["eval", "--checkpoint", bad.to_str().unwrap(), "--data", m])
            .status
            .code(),
        Some(1)
    );

    assert_eq!(exit_code(&Error::Divergence("loss became NaN".into())), 3);
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
    assert_eq!(exit_code(&Error::Integrity("x".into())), 1);
}
