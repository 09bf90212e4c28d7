use std::path::Path;
use std::process::{Command, Output};

use butterfly_stft::audio::{read_wav, write_wav, AudioClip};
use butterfly_stft::pipeline::{EnhancementModel, ModelConfig};
use butterfly_stft::training::{load_checkpoint, save_checkpoint};

fn bfly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfly")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_exit_codes() {
    let ok = bfly(&["verify", "--all", "--trials", "5"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let table = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(table.lines().filter(|l| l.ends_with(",ok")).count(), 10);

    let faulty = bfly(&["verify", "--n", "32", "--perturb", "1e-3"]);
    assert_eq!(code(&faulty), 1);
    assert!(String::from_utf8_lossy(&faulty.stdout).contains("FAIL(oracle"));

    let bad = bfly(&["verify", "--n", "6"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("invalid size 6"));

    assert_eq!(code(&bfly(&["verify", "--bogus"])), 2);
}

#[test]
fn bench_reports_counts() {
    let out = bfly(&["bench", "--n", "512", "--iters", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], ["512", "18432", "524288", "9216", "262144"]);
}

#[test]
fn train_enhance_evaluate_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&bfly(&["gen-data", "--dir", path(&d.join("toy")), "--seed", "4", "--count", "3"])), 0);
    assert!(d.join("toy/manifest.tsv").exists());

    let config = d.join("tiny.conf");
    std::fs::write(
        &config,
        format!(
            "n = 64\nhop = 32\nhidden = 4\nmax_steps = 3\nbatch_size = 1\ncrop_length = 2000\n\
             snr_list = 0\nmanifest = {}\ncheckpoint = {}\nloss_csv = {}\n",
            d.join("toy/manifest.tsv").display(),
            d.join("a.bfly").display(),
            d.join("a.csv").display()
        ),
    )
    .unwrap();
    let out = bfly(&["train", "--config", path(&config)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("step,loss"));
    assert_eq!(curve.lines().count(), 4);

    // zero steps: the checkpoint is the initialization
    let out = bfly(&[
        "train", "--config", path(&config), "--max-steps", "0",
        "--checkpoint", path(&d.join("b.bfly")), "--loss-csv", path(&d.join("b.csv")),
    ]);
    assert_eq!(code(&out), 0);
    let init = EnhancementModel::new(ModelConfig { n: 64, hop: 32, hidden: 4, ..ModelConfig::default() }).unwrap();
    assert_eq!(load_checkpoint(d.join("b.bfly")).unwrap(), init.to_tensors());

    let noisy = d.join("toy/noise/clip_000.wav");
    let enhanced = d.join("out.wav");
    let out = bfly(&["enhance", "--checkpoint", path(&d.join("a.bfly")), "--in", path(&noisy), "--out", path(&enhanced)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_wav(&enhanced).unwrap().samples.len(), 16_000);

    let metrics = d.join("metrics.csv");
    let out = bfly(&[
        "evaluate", "--checkpoint", path(&d.join("a.bfly")), "--checkpoint", path(&d.join("b.bfly")),
        "--manifest", path(&d.join("toy/manifest.tsv")), "--out", path(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&metrics).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "clip_id,ssnr_in,ssnr_out,loss");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("a:clip_000,"));
    assert!(lines[4].starts_with("b:clip_000,"));
}

#[test]
fn half_masks_quarter_the_power() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = EnhancementModel::new(ModelConfig::default()).unwrap();
    save_checkpoint(d.join("init.bfly"), &model.to_tensors()).unwrap();
    let samples: Vec<f64> = (0..8000).map(|i| 0.3 * (i as f64 * 0.05).sin() + 0.2 * (i as f64 * 0.31).cos()).collect();
    write_wav(d.join("in.wav"), &AudioClip { samples, sample_rate: 16_000 }).unwrap();
    let out = bfly(&[
        "enhance", "--checkpoint", path(&d.join("init.bfly")), "--in", path(&d.join("in.wav")),
        "--out", path(&d.join("out.wav")), "--mask", "0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let x = read_wav(d.join("in.wav")).unwrap().samples;
    let y = read_wav(d.join("out.wav")).unwrap().samples;
    let power = |s: &[f64]| s[256..s.len() - 256].iter().map(|v| v * v).sum::<f64>();
    assert!((power(&y) / power(&x) - 0.25).abs() < 1e-3);
}

#[test]
fn errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "n = 64\nlearning_rat = 0.1\n").unwrap();
    let out = bfly(&["train", "--config", path(&config)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("nope.bfly");
    let out = bfly(&["enhance", "--checkpoint", path(&missing), "--in", "x.wav", "--out", "y.wav"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.bfly"));
}
