use std::fmt::Write as _;

use crate::bgtrack::BackgroundTrack;
use crate::error::{Error, Result};

/// Segment colours, indexed by background (cycled beyond seven backgrounds).
pub const PALETTE: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

const BAR_WIDTH: f64 = 10.0;
const PLOT_HEIGHT: f64 = 200.0;
const MARGIN: f64 = 20.0;
const LEGEND_HEIGHT: f64 = 24.0;

/// Stacked-bar chart of windows `start .. start + count`: one bar per
/// window, background `t` drawn from the bottom with height `v_t(m)`.
/// Output depends only on the input, byte for byte.
pub fn render_track_svg(track: &BackgroundTrack, start: usize, count: usize) -> Result<String> {
    let end = start
        .checked_add(count)
        .filter(|&e| count > 0 && e <= track.len())
        .ok_or_else(|| {
            Error::OutOfRange(format!(
                "windows {start}..{} not within 0..{}",
                start.saturating_add(count),
                track.len()
            ))
        })?;

    let width = 2.0 * MARGIN + BAR_WIDTH * count as f64;
    let height = 2.0 * MARGIN + PLOT_HEIGHT + LEGEND_HEIGHT;
    let base = MARGIN + PLOT_HEIGHT;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<g class="bars">"#);
    for (i, row) in track.rows()[start..end].iter().enumerate() {
        let x = MARGIN + BAR_WIDTH * i as f64;
        let mut top = base;
        for (t, &v) in row.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let h = v * PLOT_HEIGHT;
            top -= h;
            let _ = writeln!(
                out,
                r#"<rect class="seg" x="{x:.3}" y="{top:.3}" width="{BAR_WIDTH:.3}" height="{h:.3}" fill="{}"><title>window {} background {t}: {v:.4}</title></rect>"#,
                PALETTE[t % PALETTE.len()],
                start + i
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="10">"#);
    for t in 0..track.num_backgrounds() {
        let x = MARGIN + 28.0 * t as f64;
        let y = base + 8.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.3}" y="{y:.3}" width="8" height="8" fill="{}"/><text x="{:.3}" y="{:.3}">{t}</text>"#,
            PALETTE[t % PALETTE.len()],
            x + 11.0,
            y + 8.0
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}
