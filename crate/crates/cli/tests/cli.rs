use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use signret::codec::{decode_image, encode_image, Container, HEADER_LEN};
use signret::dataset::example_from_image;
use signret::metrics::positive_fraction;
use signret::network::weights::{hash_hex, model_hash};
use signret::network::{load_weights, save_weights, Model, Variant};
use signret::transform::{quant_table_from_qf, ImagePlane};
use signret::{pgm, synthetic};

fn signret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signret"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = signret(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Fails, returning the single stderr line.
fn fails(args: &[&str]) -> String {
    let out = signret(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().filter(|l| !l.starts_with("warning:")).collect();
    assert_eq!(lines.len(), 1, "expected one error line, got {err:?}");
    assert!(lines[0].starts_with("error: "), "{err:?}");
    lines[0].to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn image_dir(root: &Path, name: &str, count: u64, size: usize, seed: u64) -> PathBuf {
    let dir = root.join(name);
    fs::create_dir_all(&dir).unwrap();
    for i in 0..count {
        let img = synthetic::natural(size, size, seed + i).unwrap();
        pgm::write_plane(dir.join(format!("img{i}.pgm")), &img).unwrap();
    }
    dir
}

fn quick_train(images: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--images",
        s(images),
        "--out",
        s(out),
        "--epochs",
        "4",
        "--crops",
        "6",
        "--crop-size",
        "32",
        "--batch-size",
        "3",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn training_is_deterministic_and_logged() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 3, 64, 10);
    let (a, b) = (t.path().join("a.srw"), t.path().join("b.srw"));
    quick_train(&imgs, &a, &["--seed", "3"]);
    quick_train(&imgs, &b, &["--seed", "3", "--threads", "2"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let log = fs::read_to_string(t.path().join("a.srw.loss.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,loss");
    assert_eq!(lines.len(), 5);
    let loss = |l: &str| l.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(loss(lines[4]) < loss(lines[1]));

    let meta = fs::read_to_string(t.path().join("a.srw.meta")).unwrap();
    assert!(meta.contains("qf=75") && meta.contains("variant=subband") && meta.contains("seed=3"));
}

#[test]
fn naive_variant_has_one_input_channel() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 2, 32, 20);
    let w = t.path().join("n.srw");
    quick_train(&imgs, &w, &["--variant", "naive", "--depth", "3"]);
    let model = load_weights(fs::File::open(&w).unwrap()).unwrap();
    assert_eq!(model.variant(), Variant::Naive);
    assert_eq!(model.depth(), 3);
    assert_eq!(model.layers()[0].in_channels(), 1);
}

#[test]
fn undersized_images_are_skipped() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "small", 2, 16, 30);
    fs::write(imgs.join("broken.pgm"), b"P5 garbage").unwrap();
    let w = t.path().join("m.srw");
    let err = fails(&[
        "train",
        "--images",
        s(&imgs),
        "--out",
        s(&w),
        "--crop-size",
        "32",
    ]);
    assert!(err.contains("32x32"), "{err}");
    let out = signret(&[
        "train",
        "--images",
        s(&imgs),
        "--out",
        s(&w),
        "--crop-size",
        "16",
        "--epochs",
        "1",
        "--crops",
        "2",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: skipping"));
}

#[test]
fn encode_decode_round_trip_is_idempotent() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 2, 64, 40);
    let w = t.path().join("m.srw");
    quick_train(&imgs, &w, &[]);
    let src = t.path().join("src.pgm");
    pgm::write_plane(&src, &synthetic::natural(96, 64, 41).unwrap()).unwrap();
    let (c1, d1, c2) = (
        t.path().join("1.src"),
        t.path().join("1.pgm"),
        t.path().join("2.src"),
    );
    for qf in ["15", "75", "90"] {
        ok(&[
            "encode",
            "--weights",
            s(&w),
            "--image",
            s(&src),
            "--out",
            s(&c1),
            "--qf",
            qf,
        ]);
        ok(&[
            "decode",
            "--weights",
            s(&w),
            "--input",
            s(&c1),
            "--out",
            s(&d1),
        ]);
        ok(&[
            "encode",
            "--weights",
            s(&w),
            "--image",
            s(&d1),
            "--out",
            s(&c2),
            "--qf",
            qf,
        ]);
        assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap(), "QF {qf}");

        // the decoder output equals the encoder-side reconstruction
        let model = load_weights(fs::File::open(&w).unwrap()).unwrap();
        let image = pgm::read_plane(&src).unwrap();
        let local = decode_image(
            &encode_image(&image, qf.parse().unwrap(), &model).unwrap(),
            &model,
        )
        .unwrap();
        assert_eq!(
            pgm::read_plane(&d1).unwrap(),
            ImagePlane::from_u8(96, 64, &local.image.to_u8()).unwrap()
        );
    }
}

#[test]
fn container_errors_are_single_lines() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 1, 64, 50);
    let (w1, w2) = (t.path().join("a.srw"), t.path().join("b.srw"));
    quick_train(&imgs, &w1, &["--seed", "1"]);
    quick_train(&imgs, &w2, &["--seed", "2"]);
    let src = imgs.join("img0.pgm");
    let c = t.path().join("x.src");
    let out = t.path().join("x.pgm");
    ok(&[
        "encode",
        "--weights",
        s(&w1),
        "--image",
        s(&src),
        "--out",
        s(&c),
    ]);

    let err = fails(&[
        "decode",
        "--weights",
        s(&w2),
        "--input",
        s(&c),
        "--out",
        s(&out),
    ]);
    let h = |p: &Path| {
        hash_hex(&model_hash(
            &load_weights(fs::File::open(p).unwrap()).unwrap(),
        ))
    };
    assert!(err.contains(&h(&w1)) && err.contains(&h(&w2)), "{err}");

    let mut bytes = fs::read(&c).unwrap();
    bytes[0] = b'X';
    fs::write(&c, &bytes).unwrap();
    let err = fails(&[
        "decode",
        "--weights",
        s(&w1),
        "--input",
        s(&c),
        "--out",
        s(&out),
    ]);
    assert!(err.contains("magic"), "{err}");
    assert!(!out.exists());

    fails(&[
        "encode",
        "--weights",
        s(&w1),
        "--image",
        s(&t.path().join("missing.pgm")),
        "--out",
        s(&c),
    ]);
    fails(&[
        "encode",
        "--weights",
        s(&w1),
        "--image",
        s(&src),
        "--out",
        s(&c),
        "--qf",
        "101",
    ]);
}

#[test]
fn flat_image_gives_minimal_container() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 1, 64, 60);
    let w = t.path().join("m.srw");
    quick_train(&imgs, &w, &[]);
    let flat = t.path().join("flat.pgm");
    pgm::write(&flat, 64, 64, &[128; 64 * 64]).unwrap();
    let c = t.path().join("flat.src");
    ok(&[
        "encode",
        "--weights",
        s(&w),
        "--image",
        s(&flat),
        "--out",
        s(&c),
    ]);
    let container = Container::from_bytes(&fs::read(&c).unwrap()).unwrap();
    assert!(container.residual.is_empty());
    // per block: DC level 8·128/8 = 128 takes two varint bytes, then 63
    // zero AC bytes; DC signs pack eight blocks per byte
    assert_eq!(container.amplitudes.len(), 64 * (2 + 63));
    assert_eq!(container.dc_signs.len(), 8);
    assert_eq!(fs::read(&c).unwrap().len(), HEADER_LEN + 64 * 65 + 8);
}

#[test]
fn zero_model_recovers_the_positive_fraction() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "test", 2, 64, 70);
    let w = t.path().join("zero.srw");
    let zero: Model<f32> = Model::zeros(Variant::Subband, 2).unwrap();
    save_weights(&zero, fs::File::create(&w).unwrap()).unwrap();
    // no metadata: the QF must be given
    fails(&["retrieve", "--weights", s(&w), "--images", s(&imgs)]);
    let report = ok(&[
        "retrieve",
        "--weights",
        s(&w),
        "--images",
        s(&imgs),
        "--qf",
        "75",
    ]);
    let table = quant_table_from_qf(75).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(
        rows[0],
        "image,significant_ac,correct,recovery_rate,vacuous"
    );
    for (i, row) in rows[1..3].iter().enumerate() {
        let ex = example_from_image(
            &pgm::read_plane(imgs.join(format!("img{i}.pgm"))).unwrap(),
            &table,
        );
        let expected = positive_fraction(&ex.sign, &ex.amp).unwrap();
        let got: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!((got - expected).abs() < 1e-6, "{row} vs {expected}");
    }
    assert!(rows[3].starts_with("all,"));
}

#[test]
fn eval_table_and_heatmaps() {
    let t = tempfile::tempdir().unwrap();
    let train = image_dir(t.path(), "train", 2, 64, 80);
    let test = image_dir(t.path(), "test", 2, 48, 90);
    let w = t.path().join("m.srw");
    quick_train(&train, &w, &[]);
    let (e1, e2, hm) = (
        t.path().join("e1.csv"),
        t.path().join("e2.csv"),
        t.path().join("hm"),
    );
    let args = |out: &Path| {
        vec![
            "eval".to_string(),
            "--weights".into(),
            s(&w).into(),
            "--images".into(),
            s(&test).into(),
            "--qf".into(),
            "15,90".into(),
            "--timing-runs".into(),
            "0".into(),
            "--out".into(),
            s(out).into(),
            "--heatmap-dir".into(),
            s(&hm).into(),
        ]
    };
    let run = |out: &Path| {
        let a = args(out);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(&e1);
    run(&e2);
    let table = fs::read_to_string(&e1).unwrap();
    assert_eq!(table, fs::read_to_string(&e2).unwrap());
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("15,2,") && rows[2].starts_with("90,2,"));
    for name in ["worst", "variance", "mean"] {
        let map = pgm::read(hm.join(format!("qf15_{name}.pgm"))).unwrap();
        assert_eq!((map.width, map.height), (6, 6));
    }

    let out = t.path().join("maps");
    ok(&[
        "heatmap",
        "--weights",
        s(&w),
        "--images",
        s(&test),
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(pgm::read(out.join("mean.pgm")).unwrap().width, 6);
    assert_eq!(
        fs::read_to_string(out.join("mean.csv"))
            .unwrap()
            .lines()
            .count(),
        37
    );
}

#[test]
fn config_file_values_yield_to_flags() {
    let t = tempfile::tempdir().unwrap();
    let imgs = image_dir(t.path(), "train", 1, 32, 100);
    let cfg = t.path().join("run.cfg");
    fs::write(
        &cfg,
        "# quick run\nqf=15\nepochs=2\ncrops=2\ncrop-size=32\n",
    )
    .unwrap();
    let w = t.path().join("m.srw");
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--images",
        s(&imgs),
        "--out",
        s(&w),
        "--qf",
        "30",
    ]);
    assert!(fs::read_to_string(t.path().join("m.srw.meta"))
        .unwrap()
        .contains("qf=30"));
    assert_eq!(
        fs::read_to_string(t.path().join("m.srw.loss.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    fs::write(&cfg, "epochs=2\nlearning-rat=0.1\n").unwrap();
    let err = fails(&[
        "train",
        "--config",
        s(&cfg),
        "--images",
        s(&imgs),
        "--out",
        s(&w),
    ]);
    assert!(err.contains("learning-rat"), "{err}");
    fails(&[
        "train",
        "--images",
        s(&imgs),
        "--out",
        s(&w),
        "--depth",
        "9",
    ]);
}
