//! File-format round trips and statistical checks on the generator.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use genreid::corpus::synth::{BackgroundSpec, GenreSpec};
use genreid::corpus::{
    default_genres, read_feature_file, synthesize_corpus, synthesize_show, write_feature_file, CorpusManifest,
    FrameMatrix, ShowRecord, Split, SynthConfig,
};

fn chain_config(matrix: Vec<Vec<f64>>, frames: usize) -> SynthConfig {
    let t = matrix.len();
    SynthConfig {
        genres: vec![GenreSpec {
            name: "News".into(),
            background_transition_matrix: matrix,
            background_initial: vec![1.0 / t as f64; t],
            shows_train: 1,
            shows_test: 0,
            frames_per_show: frames,
        }],
        backgrounds: (0..t).map(|i| BackgroundSpec { mean: vec![i as f64], var: vec![1.0] }).collect(),
        dims: 1,
        seed: 123,
        frame_period_ms: 10.0,
    }
}

#[test]
fn manifest_of_332_shows_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let genres = default_genres();
    let shows: Vec<ShowRecord> = (0..332)
        .map(|i| ShowRecord {
            id: format!("show-{i:04}"),
            genre: genres[i % genres.len()].clone(),
            split: if i < 285 { Split::Train } else { Split::Test },
            feat_path: format!("feats/show-{i:04}.feat").into(),
            lab_path: (i % 3 == 0).then(|| format!("labs/show-{i:04}.lab").into()),
        })
        .collect();
    let path = dir.path().join("manifest.json");
    CorpusManifest::with_default_genres(shows).unwrap().save(&path).unwrap();
    let first = CorpusManifest::load(&path).unwrap();
    assert_eq!(first.split(Split::Train).count(), 285);
    assert_eq!(first.split(Split::Test).count(), 47);
    assert!(first.shows()[0].feat_path.starts_with(dir.path()));
    let again = dir.path().join("again.json");
    first.save(&again).unwrap();
    assert_eq!(CorpusManifest::load(&again).unwrap(), first);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn empty_manifest_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(&path, "[]").unwrap();
    assert!(CorpusManifest::load(&path).unwrap().shows().is_empty());
}

#[test]
fn ten_thousand_frames_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let data: Vec<f64> = (0..10_000 * 7)
        .map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-8..8)))
        .collect();
    let frames = FrameMatrix::new(7, 10.0, data).unwrap();
    let path = dir.path().join("x.feat");
    write_feature_file(&path, &frames).unwrap();
    let back = read_feature_file(&path).unwrap();
    assert_eq!(back.len(), 10_000);
    for (a, b) in frames.as_slice().iter().zip(back.as_slice()) {
        assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
    }
}

fn stationary(matrix: &[Vec<f64>]) -> Vec<f64> {
    let t = matrix.len();
    let mut pi = vec![1.0 / t as f64; t];
    for _ in 0..10_000 {
        pi = (0..t).map(|j| (0..t).map(|i| pi[i] * matrix[i][j]).sum()).collect();
    }
    pi
}

#[test]
fn million_frame_chain_statistics() {
    let matrix = vec![vec![0.9, 0.07, 0.03], vec![0.2, 0.7, 0.1], vec![0.05, 0.15, 0.8]];
    let config = chain_config(matrix.clone(), 1_000_000);
    let (_, labels) = synthesize_show(&config, 0, 0).unwrap();
    let x = labels.labels();
    let t = matrix.len();
    let mut counts = vec![vec![0usize; t]; t];
    for w in x.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    for i in 0..t {
        let total: usize = counts[i].iter().sum();
        for j in 0..t {
            let p = counts[i][j] as f64 / total as f64;
            assert!((p - matrix[i][j]).abs() <= 0.01, "cell ({i},{j}): {p} vs {}", matrix[i][j]);
        }
    }
    let pi = stationary(&matrix);
    for (k, target) in pi.iter().enumerate() {
        let freq = x.iter().filter(|&&l| l == k).count() as f64 / x.len() as f64;
        assert!((freq - target).abs() <= 0.02, "state {k}: {freq} vs {target}");
    }
}

#[test]
fn identity_chain_with_one_background_is_constant() {
    let (_, labels) = synthesize_show(&chain_config(vec![vec![1.0]], 500), 0, 0).unwrap();
    assert!(labels.labels().iter().all(|&l| l == 0));
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["feats", "labs"] {
        let mut names: Vec<_> = fs::read_dir(root.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    out.push(("manifest.json".into(), fs::read(root.join("manifest.json")).unwrap()));
    out
}

#[test]
fn same_seed_gives_byte_identical_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = chain_config(vec![vec![0.95, 0.05], vec![0.1, 0.9]], 2000);
    config.genres[0].shows_train = 3;
    config.genres[0].shows_test = 2;
    synthesize_corpus(&config, dir.path().join("a")).unwrap();
    synthesize_corpus(&config, dir.path().join("b")).unwrap();
    assert_eq!(tree_bytes(&dir.path().join("a")), tree_bytes(&dir.path().join("b")));
    config.seed += 1;
    synthesize_corpus(&config, dir.path().join("c")).unwrap();
    assert_ne!(tree_bytes(&dir.path().join("a")), tree_bytes(&dir.path().join("c")));
}
