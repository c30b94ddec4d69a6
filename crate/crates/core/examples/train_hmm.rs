//! Ergodic HMM training with Baum-Welch, forward scoring and Viterbi.
//!
//! Sequences from a sticky two-state source are fitted with a two-state
//! model whose learned transition matrix is compared with the source.
//!
//! ```bash
//! cargo run --release -p genreid --example train_hmm
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use genreid::corpus::FrameMatrix;
use genreid::hmm::{train_hmm_baum_welch, HmmTrainOptions};

fn main() -> genreid::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let stay = [0.9, 0.8];
    let means = [-5.0, 5.0];
    let shows: Vec<FrameMatrix> = (0..10)
        .map(|_| {
            let mut s = 0usize;
            let data = (0..500)
                .map(|_| {
                    if !rng.random_bool(stay[s]) {
                        s = 1 - s;
                    }
                    let z: f64 = StandardNormal.sample(&mut rng);
                    means[s] + z
                })
                .collect();
            FrameMatrix::new(1, 10.0, data)
        })
        .collect::<Result<_, _>>()?;

    let options = HmmTrainOptions { states: 2, components: 1, iters: 15, ..Default::default() };
    let fit = train_hmm_baum_welch(&shows, &options)?;
    println!(
        "total log-likelihood {:.1} → {:.1} over {} sweeps",
        fit.log_likelihoods[0],
        fit.log_likelihoods[fit.log_likelihoods.len() - 1],
        fit.log_likelihoods.len() - 1
    );
    for (s, row) in fit.model.trans().iter().enumerate() {
        println!("state {s} (mean {:+.2}): transitions {:.3?}", fit.model.emissions()[s].mean(0)[0], row);
    }
    let (path, best) = fit.model.viterbi_path(&shows[0])?;
    let total = fit.model.forward_log_likelihood(&shows[0])?;
    println!("show 0: forward {total:.2} ≥ best path {best:.2}; first states {:?}", &path[..20]);
    Ok(())
}
