//! Background-tracking features.
//!
//! Given the per-frame background labels `x(n)` of an alignment, the
//! indicator `c_t(n)` is 1 exactly when `x(n) = t`. A track averages the
//! indicators over consecutive, non-overlapping blocks of `P` frames:
//!
//! ```text
//! v_t(m) = (1/P) Σ_{p=0}^{P-1} c_t(m·P + p),   m = 0 .. floor(N/P) − 1
//! ```
//!
//! so row `m` is the fraction of block `m` spent in each background. A
//! trailing block shorter than `P` frames is dropped.

mod svg;

pub use svg::{render_track_svg, PALETTE};

use crate::corpus::{compute_deltas, FrameMatrix, LabelSequence, DEFAULT_DELTA_WINDOW};
use crate::error::{Error, Result};

/// Block length used for the default track: 100 frames of 10 ms, one row per second.
pub const DEFAULT_WINDOW: usize = 100;
/// Number of background classes in the default setup.
pub const DEFAULT_BACKGROUNDS: usize = 7;

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundTrack {
    num_backgrounds: usize,
    window: usize,
    rows: Vec<Vec<f64>>,
}

impl BackgroundTrack {
    /// Wraps precomputed rows, checking that each is a distribution over
    /// `num_backgrounds` whose entries are multiples of `1/window`.
    pub fn from_rows(num_backgrounds: usize, window: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if num_backgrounds == 0 || window == 0 {
            return Err(Error::Validation("track needs T ≥ 1 and P ≥ 1".into()));
        }
        let p = window as f64;
        for (m, row) in rows.iter().enumerate() {
            if row.len() != num_backgrounds {
                return Err(Error::Validation(format!(
                    "track row {m} has {} entries, expected {num_backgrounds}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!("track row {m} sums to {sum}")));
            }
            for &v in row {
                let scaled = v * p;
                if !(0.0..=1.0).contains(&v) || (scaled - scaled.round()).abs() > 1e-6 {
                    return Err(Error::Validation(format!(
                        "track row {m} entry {v} is not a multiple of 1/{window} in [0, 1]"
                    )));
                }
            }
        }
        Ok(Self {
            num_backgrounds,
            window,
            rows,
        })
    }

    /// Reads a track back from the first `num_backgrounds` columns of a
    /// feature matrix (statics of a track written with or without deltas).
    pub fn from_features(frames: &FrameMatrix, num_backgrounds: usize, window: usize) -> Result<Self> {
        let statics = frames.leading_columns(num_backgrounds)?;
        Self::from_rows(num_backgrounds, window, statics.rows().map(<[f64]>::to_vec).collect())
    }

    pub fn num_backgrounds(&self) -> usize {
        self.num_backgrounds
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Number of complete windows `M`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `c_t(n)`: 1 when frame `n` is labelled with background `t`.
pub fn indicator(x: &LabelSequence, t: usize, n: usize) -> Result<u8> {
    if n >= x.len() {
        return Err(Error::OutOfRange(format!("frame {n} of {}", x.len())));
    }
    if t >= x.num_backgrounds() {
        return Err(Error::OutOfRange(format!("background {t} of {}", x.num_backgrounds())));
    }
    Ok(u8::from(x.labels()[n] == t))
}

pub fn extract_track(x: &LabelSequence, window: usize) -> Result<BackgroundTrack> {
    if window == 0 {
        return Err(Error::Parameter("track window must be at least one frame".into()));
    }
    let t = x.num_backgrounds();
    let p = window as f64;
    let rows = x
        .labels()
        .chunks_exact(window)
        .map(|block| {
            let mut counts = vec![0usize; t];
            for &label in block {
                counts[label] += 1;
            }
            counts.into_iter().map(|c| c as f64 / p).collect()
        })
        .collect();
    Ok(BackgroundTrack {
        num_backgrounds: t,
        window,
        rows,
    })
}

/// Turns a track into a feature matrix with one frame per window.
///
/// `input_period_ms` is the frame period of the labelled sequence; the
/// output period is `window × input_period_ms`. With `with_deltas` the
/// statics are followed by first and second derivatives.
pub fn track_to_features(track: &BackgroundTrack, input_period_ms: f64, with_deltas: bool) -> Result<FrameMatrix> {
    if track.is_empty() {
        return Err(Error::EmptyInput("track has no complete windows"));
    }
    let period = track.window as f64 * input_period_ms;
    let statics = FrameMatrix::from_rows(track.num_backgrounds, period, &track.rows)?;
    if with_deltas {
        compute_deltas(&statics, DEFAULT_DELTA_WINDOW)
    } else {
        Ok(statics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(t: usize, xs: &[usize]) -> LabelSequence {
        LabelSequence::new(t, xs.to_vec()).unwrap()
    }

    #[test]
    fn indicator_definition() {
        let x = labels(4, &[0, 1, 2, 3, 0, 3]);
        assert_eq!(indicator(&x, 3, 5).unwrap(), 1);
        assert_eq!(indicator(&x, 0, 5).unwrap(), 0);
        for n in 0..x.len() {
            let total: u8 = (0..4).map(|t| indicator(&x, t, n).unwrap()).sum();
            assert_eq!(total, 1);
        }
        assert!(indicator(&x, 4, 0).is_err());
        assert!(indicator(&x, 0, 6).is_err());
    }

    #[test]
    fn twelve_frame_example() {
        let x = labels(4, &[0, 0, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3]);
        let track = extract_track(&x, 12).unwrap();
        assert_eq!(track.len(), 1);
        assert_eq!(track.rows()[0], vec![2.0 / 12.0, 3.0 / 12.0, 4.0 / 12.0, 3.0 / 12.0]);
    }

    #[test]
    fn constant_labels_give_one_hot_rows() {
        let x = labels(4, &[2; 37]);
        for p in [1, 5, 12, 37] {
            let track = extract_track(&x, p).unwrap();
            assert_eq!(track.len(), 37 / p);
            assert!(track.rows().iter().all(|r| r == &[0.0, 0.0, 1.0, 0.0]));
        }
    }

    #[test]
    fn trailing_partial_window_dropped() {
        let x = labels(2, &[0, 1, 1, 0, 1]);
        let track = extract_track(&x, 2).unwrap();
        assert_eq!(track.len(), 2);
        assert!(extract_track(&x, 6).unwrap().is_empty());
        assert!(extract_track(&x, 0).is_err());
    }

    #[test]
    fn feature_conversion() {
        let x = labels(7, &(0..700).map(|n| (n / 37) % 7).collect::<Vec<_>>());
        let track = extract_track(&x, 100).unwrap();
        let plain = track_to_features(&track, 10.0, false).unwrap();
        assert_eq!(plain.dims(), 7);
        assert_eq!(plain.frame_period_ms(), 1000.0);
        for (row, expect) in plain.rows().zip(track.rows()) {
            assert_eq!(row, expect.as_slice());
        }
        let with = track_to_features(&track, 10.0, true).unwrap();
        assert_eq!(with.dims(), 21);
        assert_eq!(with.len(), 7);

        let empty = extract_track(&labels(7, &[0; 50]), 100).unwrap();
        assert!(matches!(track_to_features(&empty, 10.0, true), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn round_trip_through_features() {
        let x = labels(3, &[0, 1, 2, 2, 1, 1, 0, 0, 0, 2, 2, 2]);
        let track = extract_track(&x, 3).unwrap();
        let feats = track_to_features(&track, 10.0, true).unwrap();
        assert_eq!(BackgroundTrack::from_features(&feats, 3, 3).unwrap(), track);
        assert!(BackgroundTrack::from_features(&feats, 3, 2).is_err());
    }

    fn label_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
        (2usize..=7).prop_flat_map(|t| (Just(t), proptest::collection::vec(0..t, 0..400)))
    }

    proptest! {
        #[test]
        fn rows_are_distributions((t, xs) in label_strategy(), p in 1usize..50) {
            let track = extract_track(&labels(t, &xs), p).unwrap();
            prop_assert_eq!(track.len(), xs.len() / p);
            for row in track.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for v in row {
                    prop_assert!((v * p as f64 - (v * p as f64).round()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn relabelling_permutes_columns((t, xs) in label_strategy(), p in 1usize..30, rot in 1usize..7) {
            let perm: Vec<usize> = (0..t).map(|i| (i + rot) % t).collect();
            let relabelled: Vec<usize> = xs.iter().map(|&x| perm[x]).collect();
            let a = extract_track(&labels(t, &xs), p).unwrap();
            let b = extract_track(&labels(t, &relabelled), p).unwrap();
            for (ra, rb) in a.rows().iter().zip(b.rows()) {
                for i in 0..t {
                    prop_assert_eq!(ra[i], rb[perm[i]]);
                }
            }
        }

        #[test]
        fn concatenation_consistency((t, xs) in label_strategy(), (_, ys) in label_strategy(), p in 1usize..20) {
            let ys: Vec<usize> = ys.into_iter().map(|y| y % t).collect();
            let xs = &xs[..xs.len() / p * p];
            let ys = &ys[..ys.len() / p * p];
            let joined: Vec<usize> = xs.iter().chain(ys).copied().collect();
            let whole = extract_track(&labels(t, &joined), p).unwrap();
            let mut parts = extract_track(&labels(t, xs), p).unwrap().rows().to_vec();
            parts.extend_from_slice(extract_track(&labels(t, ys), p).unwrap().rows());
            prop_assert_eq!(whole.rows(), parts.as_slice());
        }
    }
}
