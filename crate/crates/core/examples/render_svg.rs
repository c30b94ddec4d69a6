//! Stacked-bar SVG of one minute of a background track.
//!
//! ```bash
//! cargo run -p genreid --example render_svg -- track.svg
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use genreid::bgtrack::{extract_track, render_track_svg};
use genreid::corpus::LabelSequence;

fn main() -> genreid::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "track.svg".to_string());
    let mut rng = ChaCha20Rng::seed_from_u64(60);
    let mut x = 0usize;
    let labels: Vec<usize> = (0..6000)
        .map(|_| {
            if rng.random_bool(0.01) {
                x = rng.random_range(0..7);
            }
            x
        })
        .collect();
    let track = extract_track(&LabelSequence::new(7, labels)?, 100)?;
    let svg = render_track_svg(&track, 0, 60)?;
    std::fs::write(&out, &svg).map_err(|e| genreid::Error::Io { path: out.clone().into(), source: e })?;
    println!("wrote {} bars ({} bytes) to {out}", track.len(), svg.len());
    Ok(())
}
