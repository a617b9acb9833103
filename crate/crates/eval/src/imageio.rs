use std::path::Path;

use autodiff::NArray;
use image::{ImageBuffer, Rgb};

use crate::{EvalError, Result};

/// Save a `[3, h, w]` image in [0, 1] as an 8-bit PNG.
pub fn save_png(path: &Path, img: &NArray<f32>) -> Result<()> {
    if img.rank() != 3 || img.shape()[0] != 3 {
        return Err(EvalError::InvalidArgument(format!(
            "expected [3, h, w] image, got {:?}",
            img.shape()
        )));
    }
    let (h, w) = (img.shape()[1], img.shape()[2]);
    let plane = h * w;
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let at = y as usize * w + x as usize;
        let px = |c: usize| {
            (img.data()[c * plane + at].clamp(0.0, 1.0) * 255.0).round() as u8
        };
        Rgb([px(0), px(1), px(2)])
    });
    buf.save(path)
        .map_err(|e| EvalError::Image(format!("{}: {e}", path.display())))
}

/// Load an 8-bit PNG as a `[3, h, w]` image in [0, 1].
pub fn load_png(path: &Path) -> Result<NArray<f32>> {
    let img = image::open(path)
        .map_err(|e| EvalError::Image(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = h * w;
    let mut out = NArray::zeros(&[3, h, w]);
    for (x, y, px) in img.enumerate_pixels() {
        let at = y as usize * w + x as usize;
        for c in 0..3 {
            out.data_mut()[c * plane + at] = px.0[c] as f32 / 255.0;
        }
    }
    Ok(out)
}
