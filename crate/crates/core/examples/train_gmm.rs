//! Diagonal GMM training by binary splitting and EM, scoring and MAP
//! mean adaptation.
//!
//! ```bash
//! cargo run --release -p genreid --example train_gmm
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use genreid::corpus::FrameMatrix;
use genreid::gmm::{map_adapt_means, train_gmm_em, GmmTrainOptions};

fn main() -> genreid::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let centres = [-6.0, -1.0, 4.0, 9.0];
    let data: Vec<f64> = (0..8000)
        .map(|n| {
            let z: f64 = StandardNormal.sample(&mut rng);
            centres[n % 4] + z
        })
        .collect();
    let frames = FrameMatrix::new(1, 10.0, data)?;

    let options = GmmTrainOptions { components: 4, iters: 50, sweeps_per_split: 30, ..Default::default() };
    let fit = train_gmm_em(&frames, &options)?;
    for (stage, lls) in fit.stages.iter().enumerate() {
        println!(
            "stage {stage}: {} sweeps, log-likelihood {:.1} → {:.1}",
            lls.len() - 1,
            lls[0],
            lls[lls.len() - 1]
        );
    }
    let model = &fit.model;
    for k in 0..model.num_components() {
        println!("component {k}: weight {:.3} mean {:.3} var {:.3}", model.weights()[k], model.mean(k)[0], model.var(k)[0]);
    }
    println!("average frame log-likelihood {:.4}", model.score_show(&frames)? / frames.len() as f64);

    let show = FrameMatrix::new(1, 10.0, vec![4.5, 5.0, 3.8, 4.9, 5.2])?;
    for tau in [0.0, 10.0, 1e9] {
        let adapted = map_adapt_means(model, &show, tau)?;
        let means: Vec<String> = (0..4).map(|k| format!("{:.3}", adapted.mean(k)[0])).collect();
        println!("τ = {tau:>e}: adapted means [{}]", means.join(", "));
    }
    Ok(())
}
