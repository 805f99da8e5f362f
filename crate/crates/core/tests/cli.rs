mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldainit::data::{write_pages, Manifest, CLASS_COUNT, CLASS_NAMES, DEFAULT_PALETTE, MANIFEST_FILE};
use ldainit::init::InitMethod;
use ldainit::network::{document_architecture, Model, Network, Provenance};

fn ldainit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldainit"))
        .args(args)
        .env_remove("LDAINIT_OUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ldainit(args);
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

fn gen(dir: &Path, seed: &str) -> PathBuf {
    let out = ok(&["gen", "--seed", seed, "--pages", "4", "--width", "64", "--height", "64", "--out-dir", s(dir)]);
    PathBuf::from(out.trim())
}

fn init(manifest: &Path, dir: &Path, method: &str, seed: &str) -> PathBuf {
    ok(&[
        "init", "--method", method, "--seed", seed, "--k", "800", "--stride", "4",
        "--manifest", s(manifest), "--out-dir", s(dir),
    ]);
    dir.join(format!("{method}.json"))
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn gen_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let a = gen(&t.path().join("a"), "3");
    let b = gen(&t.path().join("b"), "3");
    let c = gen(&t.path().join("c"), "4");
    assert_eq!(read(&a), read(&b));
    let mut names: Vec<_> = std::fs::read_dir(t.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for n in &names {
        assert_eq!(read(&t.path().join("a").join(n)), read(&t.path().join("b").join(n)));
    }
    assert_ne!(read(&a.with_file_name("train_000.png")), read(&c.with_file_name("train_000.png")));
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [
        &["gen", "--pages", "0"][..],
        &["gen", "--width", "10"],
        &["init", "--k", "many"],
        &["init"],
        &["frobnicate"],
    ] {
        assert_eq!(ldainit(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn data_errors_exit_with_3() {
    let t = tempfile::tempdir().unwrap();
    let missing = t.path().join("nope.json");
    let out = ldainit(&["init", "--manifest", s(&missing), "--out-dir", s(t.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    std::fs::write(&missing, "{").unwrap();
    assert_eq!(ldainit(&["verify", "--model", s(&missing)]).status.code(), Some(3));
}

#[test]
fn init_train_and_verify() {
    let t = tempfile::tempdir().unwrap();
    let manifest = gen(&t.path().join("data"), "5");
    let models = t.path().join("models");
    let lda = init(&manifest, &models, "lda", "7");
    let random = init(&manifest, &models, "random", "7");

    let m = Model::load(&lda).unwrap();
    assert_eq!(m.provenance.init_method, InitMethod::Lda);
    assert_eq!(m.provenance.seed, 7);
    assert_eq!(m.provenance.lda_sample_count, Some(800));
    let r = Model::load(&random).unwrap();
    assert_eq!(r.provenance.init_method, InitMethod::Random);
    assert_eq!(r.provenance.lda_sample_count, None);
    let report: serde_json::Value = serde_json::from_slice(&read(&models.join("lda_init_report.json"))).unwrap();
    assert_eq!(report["method"], "lda");
    assert_eq!(report["spectra"].as_array().unwrap().len(), 3);
    let metrics: serde_json::Value =
        serde_json::from_slice(&read(&models.join("lda_untrained_metrics.json"))).unwrap();
    assert!(metrics["mean_iu"].as_f64().unwrap() <= 1.0);
    let csv = String::from_utf8(read(&models.join("random_untrained_metrics.csv"))).unwrap();
    assert!(csv.starts_with("metric,value\nmean_iu,"));

    assert!(ok(&["verify", "--model", s(&lda)]).contains("[ok] unit_rows"));
    assert!(ok(&["verify", "--model", s(&random)]).contains("[ok] random_bound"));
    // A random model whose weights exceed the init bound fails verification.
    let mut bad = r.clone();
    bad.network.hidden_mut()[0].weights.as_mut_slice()[0] = 5.0;
    let bad_path = models.join("bad.json");
    bad.save(&bad_path).unwrap();
    let out = ldainit(&["verify", "--model", s(&bad_path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] random_bound"));

    // Zero epochs: one curve row, model unchanged.
    let zero = t.path().join("zero");
    let train = |epochs: &str, model: &Path, out: &Path| {
        ok(&[
            "train", "--model", s(model), "--manifest", s(&manifest), "--epochs", epochs, "--samples", "200",
            "--batch-size", "16", "--seed", "9", "--stride", "8", "--out-dir", s(out),
        ])
    };
    train("0", &lda, &zero);
    let curve = String::from_utf8(read(&zero.join("lda_curve.csv"))).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,loss,mean_iu,accuracy");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,,"));
    assert_eq!(Model::load(&zero.join("lda_trained.json")).unwrap().network, m.network);

    // Two epochs at once equal one epoch then a resumed second.
    let full = t.path().join("full");
    train("2", &lda, &full);
    let half = t.path().join("half");
    train("1", &lda, &half);
    let resumed = t.path().join("resumed");
    train("2", &half.join("lda_trained.json"), &resumed);
    let a = Model::load(&full.join("lda_trained.json")).unwrap();
    let b = Model::load(&resumed.join("lda_trained_trained.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.training.as_ref().unwrap().epochs_completed, 2);
    assert_eq!(String::from_utf8(read(&full.join("lda_curve.csv"))).unwrap().lines().count(), 4);

    // Paired training consumes the same stream: the random model trained
    // alone matches its paired counterpart.
    let paired = t.path().join("paired");
    ok(&[
        "train", "--paired", s(&lda), s(&random), "--manifest", s(&manifest), "--epochs", "1", "--samples", "200",
        "--batch-size", "16", "--seed", "9", "--stride", "8", "--out-dir", s(&paired),
    ]);
    assert_eq!(read(&paired.join("lda_trained.json")), read(&half.join("lda_trained.json")));
    assert!(paired.join("random_trained.json").exists());
}

#[test]
fn eval_of_the_oracle_is_perfect() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("coded");
    let page = |seed: u32| {
        common::coded_page(64, 64, move |x, y| ((x / 9 + y / 7 + seed) % 4) as u8)
    };
    let entries = |prefix: &str, s: u32| write_pages(&dir, prefix, &[page(s)]).unwrap();
    let manifest = Manifest {
        format_version: 1,
        class_count: CLASS_COUNT,
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        palette: DEFAULT_PALETTE.to_vec(),
        train: entries("train_", 0),
        validation: Vec::new(),
        test: entries("test_", 1),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let model_path = t.path().join("oracle.json");
    Model::new(
        common::centre_pixel_oracle(),
        Provenance {
            init_method: InitMethod::Random,
            seed: 0,
            lda_sample_count: None,
        },
    )
    .save(&model_path)
    .unwrap();

    let out = t.path().join("eval");
    let stdout = ok(&["eval", "--model", s(&model_path), "--manifest", s(&manifest_path), "--out-dir", s(&out)]);
    assert!(stdout.contains("mean IU 1.0000, accuracy 1.0000"), "{stdout}");
    let metrics: serde_json::Value = serde_json::from_slice(&read(&out.join("metrics.json"))).unwrap();
    assert_eq!(metrics["mean_iu"], 1.0);
    assert_eq!(metrics["accuracy"], 1.0);
    assert_eq!(metrics["per_class_iu"].as_array().unwrap().len(), 4);
    let confusion = metrics["confusion"].as_array().unwrap();
    assert_eq!(confusion.len(), 4);
    let diagonal: u64 = (0..4).map(|c| confusion[c][c].as_u64().unwrap()).sum();
    assert_eq!(diagonal, 42 * 42);
    let csv = String::from_utf8(read(&out.join("metrics.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.contains("\niu_text,1\n"));

    let overlay = image::open(out.join("overlay_000.png")).unwrap().to_rgb8();
    assert_eq!(overlay.dimensions(), (64 - 22, 64 - 22));
    assert!(overlay.pixels().all(|p| p.0 == [0, 0, 0] || p.0 == [0, 255, 0]));
    assert!(out.join("prediction_000.png").exists());

    let val = ldainit(&[
        "eval", "--model", s(&model_path), "--manifest", s(&manifest_path), "--split", "validation",
        "--out-dir", s(&out),
    ]);
    assert_eq!(val.status.code(), Some(3));
}

#[test]
fn features_of_a_zero_model_are_gray() {
    let t = tempfile::tempdir().unwrap();
    let model_path = t.path().join("zero.json");
    Model::new(
        Network::new(3, 4, &document_architecture()).unwrap(),
        Provenance {
            init_method: InitMethod::Random,
            seed: 0,
            lda_sample_count: None,
        },
    )
    .save(&model_path)
    .unwrap();
    let out = t.path().join("f");
    let path = ok(&["features", "--model", s(&model_path), "--scale", "2", "--out-dir", s(&out)]);
    let sheet = image::open(path.trim()).unwrap().to_rgb8();
    let mut gray = 0;
    for p in sheet.pixels() {
        assert!(p.0 == [128, 128, 128] || p.0 == [255, 255, 255]);
        gray += usize::from(p.0[0] == 128);
    }
    // 24 tiles of 10×10 pixels at scale 2.
    assert_eq!(gray, 24 * 100);
}

#[test]
fn out_dir_from_the_environment() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_ldainit"))
        .args(["gen", "--pages", "1", "--width", "64", "--height", "64"])
        .env("LDAINIT_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join(MANIFEST_FILE).exists());
}
