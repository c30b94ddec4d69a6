use crate::corpus::FrameMatrix;
use crate::error::{Error, Result};

/// Default regression half-window.
pub const DEFAULT_DELTA_WINDOW: usize = 2;

/// Appends first and second derivatives to every frame.
///
/// Derivatives use the regression formula
/// `d(n) = Σθ θ·(c(n+θ) − c(n−θ)) / (2·Σθ θ²)` for `θ = 1..=window`, with the
/// sequence padded by repeating its first and last frames. Second
/// derivatives apply the same operator to the first derivatives. The output
/// row is `[statics | deltas | delta-deltas]`.
pub fn compute_deltas(frames: &FrameMatrix, window: usize) -> Result<FrameMatrix> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("cannot compute deltas of zero frames"));
    }
    if window == 0 {
        return Err(Error::Parameter("delta window must be positive".into()));
    }
    let dims = frames.dims();
    let n = frames.len();
    let first = regression(frames.as_slice(), n, dims, window);
    let second = regression(&first, n, dims, window);

    let mut out = Vec::with_capacity(n * dims * 3);
    for i in 0..n {
        out.extend_from_slice(frames.row(i));
        out.extend_from_slice(&first[i * dims..(i + 1) * dims]);
        out.extend_from_slice(&second[i * dims..(i + 1) * dims]);
    }
    FrameMatrix::new(dims * 3, frames.frame_period_ms(), out)
}

fn regression(data: &[f64], n: usize, dims: usize, window: usize) -> Vec<f64> {
    let denom = 2.0 * (1..=window).map(|t| (t * t) as f64).sum::<f64>();
    let last = n - 1;
    let mut out = vec![0.0; n * dims];
    for i in 0..n {
        let row = &mut out[i * dims..(i + 1) * dims];
        for theta in 1..=window {
            let ahead = (i + theta).min(last);
            let behind = i.saturating_sub(theta);
            let w = theta as f64;
            for d in 0..dims {
                row[d] += w * (data[ahead * dims + d] - data[behind * dims + d]);
            }
        }
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    out
}
