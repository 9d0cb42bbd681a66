use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dsrn::checkpoint::Checkpoint;
use dsrn::data::synthetic::write_toy_corpus;
use dsrn::data::{bicubic, color, ImageBuffer};
use dsrn::metrics::psnr;
use dsrn::model::Model;

fn dsrn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsrn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TINY: &[&str] = &[
    "--width",
    "8",
    "--width-in",
    "4",
    "--toy-images",
    "4",
    "--patch",
    "24",
    "--batch",
    "2",
    "--set",
    "toy_size=48",
    "--set",
    "val_patch=24",
    "--set",
    "val_count=2",
];

fn train(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", out.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    dsrn(&args)
}

#[test]
fn missing_config_is_a_usage_error_naming_the_file() {
    let out = dsrn(&["train", "--config", "/no/such/run.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/no/such/run.cfg"), "{}", stderr(&out));
}

#[test]
fn bad_flags_and_values_exit_two() {
    assert_eq!(code(&dsrn(&["train", "--bogus"])), 2);
    assert_eq!(code(&dsrn(&["train", "--model", "vgg"])), 2);
    let out = dsrn(&["train", "--set", "colour=blue"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown key `colour`"));
}

#[test]
fn overrides_reach_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(
        dir.path(),
        &["--model", "dsrn", "--scale", "2", "--T", "7", "--iterations", "2"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(cfg.lines().any(|l| l == "T = 7"), "{cfg}");
    assert!(cfg.lines().any(|l| l == "scale = 2"));
    let ck = Checkpoint::load(&dir.path().join("last.ckpt")).unwrap();
    assert_eq!(ck.manifest.get("T").map(String::as_str), Some("7"));
    assert_eq!(ck.manifest.get("model").map(String::as_str), Some("dsrn"));
    let model = Model::from_checkpoint(&ck).unwrap();
    assert_eq!(model.spec.steps, 7);
}

#[test]
fn smoke_training_succeeds_and_reruns_are_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = train(dir.path(), &["--T", "2", "--iterations", "30", "--seed", "4"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
        (read("last.ckpt"), read("log.csv"), read("config.txt"))
    };
    assert_eq!(run(), run());
}

#[test]
fn resume_continues_a_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), &["--T", "2", "--iterations", "4"])), 0);
    let last = dir.path().join("last.ckpt");
    let out = dsrn(&[
        "train",
        "--out",
        dir.path().to_str().unwrap(),
        "--resume",
        last.to_str().unwrap(),
        "--iterations",
        "6",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("step")).count(), 1);
    assert!(log.lines().last().unwrap().starts_with("6,"));
}

#[test]
fn sr_and_viz_on_a_trained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train(&run, &["--T", "3", "--iterations", "3"])), 0);
    let ck = run.join("last.ckpt");
    let ck = ck.to_str().unwrap();

    let input = dir.path().join("in.png");
    ImageBuffer::from_fn(13, 9, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0)
        .save(&input)
        .unwrap();
    let output = dir.path().join("out.png");
    let out = dsrn(&[
        "sr",
        "--checkpoint",
        ck,
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sr = ImageBuffer::load(&output).unwrap();
    assert_eq!((sr.width(), sr.height(), sr.channels()), (26, 18, 1));

    let mismatch = dsrn(&[
        "sr",
        "--checkpoint",
        ck,
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--scale",
        "3",
    ]);
    assert_eq!(code(&mismatch), 2);

    let maps = dir.path().join("maps");
    let out = dsrn(&[
        "viz",
        "--checkpoint",
        ck,
        "--image",
        input.to_str().unwrap(),
        "--out",
        maps.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut names: Vec<_> = fs::read_dir(&maps)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["energy_t01.png", "energy_t02.png", "energy_t03.png"]);
    for n in &names {
        let m = ImageBuffer::load(&maps.join(n)).unwrap();
        assert_eq!((m.width(), m.height()), (26, 18));
        assert!(m.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn viz_rejects_single_state_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&train(
            dir.path(),
            &["--model", "drrn", "--T", "2", "--iterations", "1"]
        )),
        0
    );
    let input = dir.path().join("in.png");
    ImageBuffer::filled(8, 8, 1, 0.5).save(&input).unwrap();
    let ck = dir.path().join("last.ckpt");
    let out = dsrn(&[
        "viz",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--image",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("not dsrn"));
}

#[test]
fn eval_bicubic_prints_the_protocol() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_corpus(dir.path(), 2, 40, 1).unwrap();
    let out = dsrn(&[
        "eval",
        "--bicubic",
        "--scale",
        "2",
        "--data-root",
        dir.path().to_str().unwrap(),
        "--name",
        "toy",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("border crop 2 px"), "{text}");
    assert!(text.contains("toy"));
    assert_eq!(code(&dsrn(&["eval", "--data-root", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn overfit_model_beats_bicubic_on_its_image() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        code(&dsrn(&[
            "toy",
            "--count",
            "1",
            "--size",
            "48",
            "--seed",
            "2",
            "--out",
            data.to_str().unwrap()
        ])),
        0
    );
    let run = dir.path().join("run");
    let out = dsrn(&[
        "train",
        "--out",
        run.to_str().unwrap(),
        "--data-root",
        data.to_str().unwrap(),
        "--width",
        "16",
        "--width-in",
        "16",
        "--T",
        "2",
        "--patch",
        "48",
        "--batch",
        "1",
        "--iterations",
        "1200",
        "--lr0",
        "0.1",
        "--set",
        "clip_mode=norm",
        "--set",
        "val_patch=48",
        "--set",
        "val_count=1",
        "--set",
        "augment=false",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let hr = color::luminance(&ImageBuffer::load(&data.join("toy_000.png")).unwrap());
    let lr = bicubic::downscale(&hr, 2).unwrap().quantized();
    let input = dir.path().join("lr.png");
    lr.save(&input).unwrap();
    let output = dir.path().join("sr.png");
    let ck = run.join("last.ckpt");
    let out = dsrn(&[
        "sr",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sr = ImageBuffer::load(&output).unwrap();
    let plain = bicubic::upscale(&lr, 2).unwrap().quantized();
    let (a, b) = (psnr(&hr, &sr, 2).unwrap(), psnr(&hr, &plain, 2).unwrap());
    assert!(a > b, "model {a:.3} dB, bicubic {b:.3} dB");
}
