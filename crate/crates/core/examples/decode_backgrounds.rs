//! Asynchronous background decoding with a bank of transforms.
//!
//! A two-background stream is generated with a known label path, decoded
//! with a bank built from the background Gaussians, and compared with the
//! truth at two separations.
//!
//! ```bash
//! cargo run --release -p genreid --example decode_backgrounds
//! ```

use genreid::corpus::synth::{BackgroundSpec, GenreSpec};
use genreid::corpus::{synthesize_show, SynthConfig};
use genreid::transforms::{decode_backgrounds, BackgroundBank, DEFAULT_STAY_PROB};

fn config(separation: f64) -> SynthConfig {
    SynthConfig {
        genres: vec![GenreSpec {
            name: "News".into(),
            background_transition_matrix: vec![vec![0.98, 0.02], vec![0.02, 0.98]],
            background_initial: vec![0.5, 0.5],
            shows_train: 1,
            shows_test: 0,
            frames_per_show: 20_000,
        }],
        backgrounds: vec![
            BackgroundSpec { mean: vec![0.0, 0.0], var: vec![1.0, 1.0] },
            BackgroundSpec { mean: vec![separation, 0.0], var: vec![1.0, 1.0] },
        ],
        dims: 2,
        seed: 3,
        frame_period_ms: 10.0,
    }
}

fn main() -> genreid::Result<()> {
    for separation in [6.0, 2.0] {
        let cfg = config(separation);
        let (frames, truth) = synthesize_show(&cfg, 0, 0)?;
        let means: Vec<Vec<f64>> = cfg.backgrounds.iter().map(|b| b.mean.clone()).collect();
        let vars: Vec<Vec<f64>> = cfg.backgrounds.iter().map(|b| b.var.clone()).collect();
        let bank = BackgroundBank::from_gaussians(&means, &vars, DEFAULT_STAY_PROB)?;
        let decoded = decode_backgrounds(&bank, &frames)?;
        let agree = decoded.labels().iter().zip(truth.labels()).filter(|(a, b)| a == b).count();
        println!(
            "{separation}σ separation: {:.2}% of {} frames labelled correctly",
            100.0 * agree as f64 / truth.len() as f64,
            truth.len()
        );
    }
    Ok(())
}
