use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stegnet::cipher::derive_key;
use stegnet::imaging::{histogram, load_ppm, mse_per_pixel, save_ppm, synth_dataset, ImageBuffer, SynthKind};

fn stegnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stegnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_images(dir: &Path, size: usize) -> (PathBuf, PathBuf) {
    let imgs = synth_dataset(21, 2, size, SynthKind::Shapes).unwrap();
    let cover = dir.join("cover.ppm");
    let secret = dir.join("secret.ppm");
    save_ppm(&cover, &imgs[0]).unwrap();
    save_ppm(&secret, &imgs[1]).unwrap();
    (cover, secret)
}

#[test]
fn keygen_format_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("k.key");
    let out = stegnet(&["keygen", "--seed", "42", "--grid", "14", "--out", p(&key)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&key).unwrap(), "SGKEY1 42 14\n");

    assert_eq!(code(&stegnet(&["keygen", "--grid", "14", "--out", p(&key)])), 2);
    let zero = stegnet(&["keygen", "--seed", "1", "--grid", "0", "--out", p(&key)]);
    assert_eq!(code(&zero), 2);
    assert!(String::from_utf8_lossy(&zero.stderr).contains("--grid"));
    let unwritable = dir.path().join("missing").join("k.key");
    assert_eq!(code(&stegnet(&["keygen", "--seed", "1", "--grid", "2", "--out", p(&unwritable)])), 2);
}

#[test]
fn encrypt_decrypt_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let (cover, _) = write_images(dir.path(), 28);
    let key = dir.path().join("k.key");
    let enc = dir.path().join("enc.ppm");
    let dec = dir.path().join("dec.ppm");
    assert_eq!(code(&stegnet(&["keygen", "--seed", "5", "--grid", "7", "--out", p(&key)])), 0);
    assert_eq!(code(&stegnet(&["encrypt", "--in", p(&cover), "--key", p(&key), "--out", p(&enc)])), 0);
    assert_eq!(code(&stegnet(&["decrypt", "--in", p(&enc), "--key", p(&key), "--out", p(&dec)])), 0);
    assert_eq!(std::fs::read(&cover).unwrap(), std::fs::read(&dec).unwrap());
    assert_ne!(std::fs::read(&cover).unwrap(), std::fs::read(&enc).unwrap());

    let h_in = dir.path().join("h_in.csv");
    let h_out = dir.path().join("h_out.csv");
    for (img, csv) in [(&cover, &h_in), (&enc, &h_out)] {
        let out = stegnet(&["report", "--what", "histogram", "--in", p(img), "--out-csv", p(csv)]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&h_in).unwrap(), std::fs::read(&h_out).unwrap());

    let id = dir.path().join("id.key");
    let same = dir.path().join("same.ppm");
    assert_eq!(code(&stegnet(&["keygen", "--seed", "9", "--grid", "1", "--out", p(&id)])), 0);
    assert_eq!(code(&stegnet(&["encrypt", "--in", p(&cover), "--key", p(&id), "--out", p(&same)])), 0);
    assert_eq!(std::fs::read(&cover).unwrap(), std::fs::read(&same).unwrap());
}

#[test]
fn indivisible_image_exits_3_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let (cover, _) = write_images(dir.path(), 30);
    let key = dir.path().join("k.key");
    assert_eq!(code(&stegnet(&["keygen", "--seed", "5", "--grid", "7", "--out", p(&key)])), 0);
    let out = stegnet(&["encrypt", "--in", p(&cover), "--key", p(&key), "--out", p(&dir.path().join("x.ppm"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("28x28"));
}

#[test]
fn report_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ks.csv");
    assert_eq!(code(&stegnet(&["report", "--what", "keyspace", "--out-csv", p(&csv)])), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 196.0);
    assert!((row[1] - 365.7).abs() < 0.05 && (row[4] - 342.2).abs() < 0.05, "{text}");

    assert_eq!(code(&stegnet(&["report", "--what", "spectrum", "--out-csv", p(&csv)])), 2);

    let flat = dir.path().join("flat.ppm");
    save_ppm(&flat, &ImageBuffer::filled(4, 4, 3, 77).unwrap()).unwrap();
    let heat = dir.path().join("heat.ppm");
    let out = stegnet(&[
        "report", "--what", "histogram", "--in", p(&flat), "--out-csv", p(&csv), "--heatmap", p(&heat),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let nonzero: Vec<_> = text.lines().skip(1).filter(|l| !l.ends_with(",0,0,0")).collect();
    assert_eq!(nonzero, ["77,16,16,16"]);
    assert_eq!(load_ppm(&heat).unwrap().shape(), (3 * 64, 256, 1));

    let corr = dir.path().join("corr.csv");
    let out = stegnet(&["report", "--what", "correlation", "--out-csv", p(&corr)]);
    assert_eq!(code(&out), 0);
    let values: Vec<f64> = std::fs::read_to_string(&corr)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 5);
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
}

const SMOKE_CONFIG: &str = "epochs = 1\nbatch_size = 2\nimage_size = 8\ngrid_side = 2\ndataset_pairs = 3\n";

#[test]
fn train_hide_reveal_attack() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.cfg");
    std::fs::write(&cfg, SMOKE_CONFIG).unwrap();
    let ck = dir.path().join("m.sgn1");
    let ck2 = dir.path().join("m2.sgn1");
    let metrics = dir.path().join("m.csv");
    for c in [&ck, &ck2] {
        let out = stegnet(&["train", "--config", p(&cfg), "--out-checkpoint", p(c), "--metrics-csv", p(&metrics)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&ck).unwrap(), std::fs::read(&ck2).unwrap());
    let csv = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("epoch,encode_loss,reveal_loss,cover_mse,secret_mse\n1,"));

    let (cover, secret) = write_images(dir.path(), 8);
    let key = dir.path().join("k.key");
    assert_eq!(code(&stegnet(&["keygen", "--seed", "3", "--grid", "2", "--out", p(&key)])), 0);
    let container = dir.path().join("container.ppm");
    let container2 = dir.path().join("container2.ppm");
    for c in [&container, &container2] {
        let out = stegnet(&[
            "hide", "--checkpoint", p(&ck), "--key", p(&key), "--cover", p(&cover), "--secret", p(&secret), "--out", p(c),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&container).unwrap(), std::fs::read(&container2).unwrap());

    let revealed = dir.path().join("revealed.ppm");
    let decrypted = dir.path().join("decrypted.ppm");
    let out = stegnet(&[
        "reveal", "--checkpoint", p(&ck), "--key", p(&key), "--container", p(&container),
        "--out", p(&decrypted), "--out-revealed", p(&revealed),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mse = mse_per_pixel(&load_ppm(&secret).unwrap(), &load_ppm(&decrypted).unwrap()).unwrap();
    assert!(mse.is_finite());
    let key_obj = derive_key(3, 2).unwrap();
    assert_eq!(
        stegnet::cipher::decrypt(&load_ppm(&revealed).unwrap(), &key_obj).unwrap(),
        load_ppm(&decrypted).unwrap()
    );

    let big = dir.path().join("big.ppm");
    save_ppm(&big, &ImageBuffer::filled(16, 16, 3, 0).unwrap()).unwrap();
    let out = stegnet(&[
        "hide", "--checkpoint", p(&ck), "--key", p(&key), "--cover", p(&big), "--secret", p(&secret), "--out", p(&container),
    ]);
    assert_eq!(code(&out), 3);

    let residual = dir.path().join("residual.ppm");
    let attack_csv = dir.path().join("attack.csv");
    let out = stegnet(&[
        "attack", "--checkpoint", p(&ck), "--key", p(&key), "--cover", p(&cover), "--secret", p(&secret),
        "--out-residual", p(&residual), "--out-csv", p(&attack_csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&attack_csv).unwrap();
    assert!(text.starts_with("encrypted,similarity\ntrue,"), "{text}");
    assert_eq!(histogram(&load_ppm(&residual).unwrap()).channels(), 1);
}

#[test]
fn non_finite_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, format!("{SMOKE_CONFIG}epochs = 3\nlearning_rate = 1e30\n")).unwrap();
    let out = stegnet(&[
        "train", "--config", p(&cfg), "--out-checkpoint", p(&dir.path().join("x.sgn1")),
        "--metrics-csv", p(&dir.path().join("x.csv")),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ppm");
    std::fs::write(&bad, b"P6\n2 2\n255\n\x00").unwrap();
    let key = dir.path().join("k.key");
    std::fs::write(&key, "SGKEY1 1 2\n").unwrap();
    let out = stegnet(&["encrypt", "--in", p(&bad), "--key", p(&key), "--out", p(&dir.path().join("o.ppm"))]);
    assert_eq!(code(&out), 3);
    std::fs::write(&key, "SGKEY1 one 2\n").unwrap();
    let (cover, _) = write_images(dir.path(), 8);
    let out = stegnet(&["encrypt", "--in", p(&cover), "--key", p(&key), "--out", p(&dir.path().join("o.ppm"))]);
    assert_eq!(code(&out), 3);
}
