//! Minimal rate-distortion curve rendering: axis frame, one polyline with
//! point markers per series. Enough to eyeball sweeps without a plotting
//! dependency.

use std::path::Path;

use autodiff::NArray;

use crate::imageio;
use crate::{EvalError, Result};

pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: [f32; 3],
}

const W: usize = 640;
const H: usize = 480;
const MARGIN: usize = 48;

fn put(img: &mut NArray<f32>, x: i64, y: i64, color: [f32; 3]) {
    if x < 0 || y < 0 || x >= W as i64 || y >= H as i64 {
        return;
    }
    let at = y as usize * W + x as usize;
    for c in 0..3 {
        img.data_mut()[c * W * H + at] = color[c];
    }
}

fn line(img: &mut NArray<f32>, a: (i64, i64), b: (i64, i64), color: [f32; 3]) {
    let (mut x0, mut y0) = a;
    let (x1, y1) = b;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn marker(img: &mut NArray<f32>, x: i64, y: i64, color: [f32; 3]) {
    for dy in -2..=2i64 {
        for dx in -2..=2i64 {
            if dx.abs() + dy.abs() <= 2 {
                put(img, x + dx, y + dy, color);
            }
        }
    }
}

/// Render series into a PNG. Axes are linear and auto-scaled to the data.
pub fn render_plot(path: &Path, series: &[Series]) -> Result<()> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(EvalError::InvalidArgument("nothing to plot".into()));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }

    let mut img = NArray::filled(&[3, H, W], 1.0f32);
    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let px = MARGIN as f64 + (x - x0) / (x1 - x0) * (W - 2 * MARGIN) as f64;
        let py = (H - MARGIN) as f64 - (y - y0) / (y1 - y0) * (H - 2 * MARGIN) as f64;
        (px.round() as i64, py.round() as i64)
    };

    let frame = [0.25, 0.25, 0.25];
    line(&mut img, to_px(x0, y0), to_px(x1, y0), frame);
    line(&mut img, to_px(x0, y0), to_px(x0, y1), frame);
    line(&mut img, to_px(x0, y1), to_px(x1, y1), frame);
    line(&mut img, to_px(x1, y0), to_px(x1, y1), frame);

    for s in series {
        let mut sorted = s.points.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in sorted.windows(2) {
            line(&mut img, to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1), s.color);
        }
        for &(x, y) in &sorted {
            let (px, py) = to_px(x, y);
            marker(&mut img, px, py, s.color);
        }
    }
    imageio::save_png(path, &img)
}
