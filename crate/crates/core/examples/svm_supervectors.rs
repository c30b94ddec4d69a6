//! GMM supervectors and one-vs-rest Gaussian-kernel SVMs.
//!
//! Shows from three sources that differ only in the position of one of two
//! modes are mapped to supervectors against a shared UBM, and the machines
//! trained on them label held-out shows.
//!
//! ```bash
//! cargo run --release -p genreid --example svm_supervectors
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use genreid::corpus::{FrameMatrix, ShowRecord, Split};
use genreid::gmm::GmmTrainOptions;
use genreid::pipeline::{classify_corpus, train_svm_system, LabelledShow, SvmSystemOptions};
use genreid::svm::{kkt_max_violation, solve_smo, SmoParams};

fn main() -> genreid::Result<()> {
    let xs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.0], vec![2.0, 1.0]];
    let ys = vec![-1.0, -1.0, 1.0, 1.0];
    let sol = solve_smo(&xs, &ys, &SmoParams::new(10.0, 0.5))?;
    println!(
        "four-point set: {} support vectors, bias {:.4}, KKT violation {:.2e} after {} iterations",
        sol.model.support_vectors().len(),
        sol.model.bias(),
        kkt_max_violation(&sol.model, &xs, &ys, &sol.alphas)?,
        sol.iterations
    );

    let genres: Vec<String> = ["Comedy", "Drama", "News"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let mut make = |genre: usize, split: Split, i: usize| -> genreid::Result<LabelledShow> {
        let shift = [-1.0, 0.0, 1.0][genre];
        let data = (0..300)
            .map(|n| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if n % 2 == 0 { -4.0 + z } else { 4.0 + shift + z }
            })
            .collect();
        Ok(LabelledShow {
            record: ShowRecord {
                id: format!("{}-{i}", genres[genre]),
                genre: genres[genre].clone(),
                split,
                feat_path: Default::default(),
                lab_path: None,
            },
            frames: FrameMatrix::new(1, 10.0, data)?,
        })
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in 0..3 {
        for i in 0..10 {
            train.push(make(g, Split::Train, i)?);
        }
        for i in 0..4 {
            test.push(make(g, Split::Test, i)?);
        }
    }
    let options = SvmSystemOptions { ubm: GmmTrainOptions::with_components(4), ..Default::default() };
    let system = train_svm_system(&genres, &train, &options)?;
    println!("supervector length {}", system.ubm.num_components() * system.ubm.dims());
    let results = classify_corpus(&system, &test, &genres)?;
    let correct = results.iter().zip(&test).filter(|(r, s)| r.predicted == s.record.genre).count();
    println!("held-out shows correct: {correct}/{}", test.len());
    Ok(())
}
