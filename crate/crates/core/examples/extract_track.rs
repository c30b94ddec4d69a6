//! Indicator functions and block-averaged background tracks.
//!
//! A label sequence over four backgrounds is summarised every twelve frames,
//! then a longer random sequence is turned into 21-dimensional track
//! features with first and second derivatives.
//!
//! ```bash
//! cargo run -p genreid --example extract_track
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use genreid::bgtrack::{extract_track, indicator, track_to_features};
use genreid::corpus::LabelSequence;

fn main() -> genreid::Result<()> {
    let labels = LabelSequence::new(4, vec![0, 0, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3])?;
    let active: Vec<u8> = (0..4).map(|t| indicator(&labels, t, 5)).collect::<Result<_, _>>()?;
    println!("c_t(5) for t = 0..3: {active:?}");

    let track = extract_track(&labels, 12)?;
    println!("v(0) = {:?}", track.rows()[0]);

    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut x = 0usize;
    let long: Vec<usize> = (0..10_000)
        .map(|_| {
            if rng.random_bool(0.02) {
                x = rng.random_range(0..7);
            }
            x
        })
        .collect();
    let track = extract_track(&LabelSequence::new(7, long)?, 100)?;
    let feats = track_to_features(&track, 10.0, true)?;
    println!(
        "{} windows -> {} feature frames of {} dims every {} ms",
        track.len(),
        feats.len(),
        feats.dims(),
        feats.frame_period_ms()
    );
    let first: Vec<String> = feats.row(0)[..7].iter().map(|v| format!("{v:.2}")).collect();
    println!("first window statics: [{}]", first.join(", "));
    Ok(())
}
