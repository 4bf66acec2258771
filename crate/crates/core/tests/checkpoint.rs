use sha2::{Digest, Sha256};

use jointlabel::corpus::{generate_splits, SyntheticConfig};
use jointlabel::model::{LayerSizes, Model};
use jointlabel::trainer::{
    checkpoint_bytes, initial_model, load_checkpoint, parse_checkpoint, save_checkpoint,
    TrainConfig, CHECKPOINT_VERSION,
};
use jointlabel::Error;

fn small_model() -> (Model, TrainConfig) {
    let splits = generate_splits(&SyntheticConfig {
        n_train: 40,
        n_dev: 5,
        n_test: 5,
        ..Default::default()
    })
    .unwrap();
    let mut cfg = TrainConfig::default();
    cfg.set("sizes", "desk").unwrap();
    (initial_model(&cfg, &splits.train).unwrap(), cfg)
}

fn with_digest(mut body: Vec<u8>) -> Vec<u8> {
    let d = Sha256::digest(&body);
    body.extend_from_slice(d.as_slice());
    body
}

#[test]
fn file_round_trip_is_exact() {
    let (model, cfg) = small_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &cfg.to_text(), &path).unwrap();
    assert!(!dir.path().join("m.tmp").exists());
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.model, model);
    assert_eq!(back.config_text, cfg.to_text());
    assert_eq!(
        std::fs::read(&path).unwrap(),
        checkpoint_bytes(&back.model, &back.config_text)
    );
}

#[test]
fn any_flipped_byte_is_detected() {
    let (model, _) = small_model();
    let bytes = checkpoint_bytes(&model, "seed = 1\n");
    let step = (bytes.len() / 97).max(1);
    for pos in (0..bytes.len()).step_by(step).chain([bytes.len() - 1]) {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x40;
        match parse_checkpoint(&bad) {
            Err(Error::Integrity(_)) | Err(Error::Version { .. }) => {}
            other => panic!("flip at {pos}: {other:?}"),
        }
    }
}

#[test]
fn truncation_is_detected() {
    let (model, _) = small_model();
    let bytes = checkpoint_bytes(&model, "");
    for len in [
        0,
        3,
        4,
        10,
        30,
        bytes.len() / 2,
        bytes.len() - 33,
        bytes.len() - 1,
    ] {
        assert!(parse_checkpoint(&bytes[..len]).is_err(), "length {len}");
    }
}

#[test]
fn other_version_is_rejected_before_the_digest() {
    let (model, _) = small_model();
    let bytes = checkpoint_bytes(&model, "");
    let old = CHECKPOINT_VERSION.as_bytes();
    let new = b"jointlabel-ckpt-v9";
    assert_eq!(old.len(), new.len());
    let mut body = bytes[..bytes.len() - 32].to_vec();
    body[8..8 + new.len()].copy_from_slice(new);
    for candidate in [with_digest(body.clone()), body] {
        match parse_checkpoint(&candidate) {
            Err(Error::Version { found, expected }) => {
                assert_eq!(found, "jointlabel-ckpt-v9");
                assert_eq!(expected, CHECKPOINT_VERSION);
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn size_mismatch_names_the_tensor() {
    let (model, _) = small_model();
    let ck = parse_checkpoint(&checkpoint_bytes(&model, "")).unwrap();
    ck.expect_sizes(&model.params.sizes).unwrap();
    let other = LayerSizes {
        hidden: model.params.sizes.hidden + 1,
        ..model.params.sizes
    };
    match ck.expect_sizes(&other) {
        Err(Error::TensorShape {
            name,
            expected,
            found,
        }) => {
            assert!(name.starts_with("hidden"), "{name}");
            assert_ne!(expected, found);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_checkpoint(dir.path().join("none")),
        Err(Error::MissingFile { .. })
    ));
}
