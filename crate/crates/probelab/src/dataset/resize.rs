//! Bilinear image resizing (half-pixel-center convention).

use super::FloatImages;
use crate::error::{Error, Result};

/// Resize every image in the batch to `out_h x out_w` with bilinear
/// interpolation. Source coordinates follow the half-pixel-center
/// convention `src = (dst + 0.5) * in/out - 0.5`, clamped at the borders,
/// so constant images stay constant. Resizing to the same size returns the
/// input unchanged.
pub fn resize_bilinear(images: &FloatImages, out_h: usize, out_w: usize) -> Result<FloatImages> {
    if images.n == 0 {
        return Err(Error::invalid("resize_bilinear: empty image batch"));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize_bilinear: output size must be >= 1"));
    }
    if out_h == images.h && out_w == images.w {
        return Ok(images.clone());
    }

    let (h, w, c) = (images.h, images.w, images.c);
    let scale_y = h as f32 / out_h as f32;
    let scale_x = w as f32 / out_w as f32;

    // Precompute per-axis neighbor indices and weights.
    let mut ys = Vec::with_capacity(out_h);
    for oy in 0..out_h {
        ys.push(axis_coords(oy, scale_y, h));
    }
    let mut xs = Vec::with_capacity(out_w);
    for ox in 0..out_w {
        xs.push(axis_coords(ox, scale_x, w));
    }

    let mut data = vec![0.0f32; images.n * out_h * out_w * c];
    for img in 0..images.n {
        let src = images.image(img);
        let dst = &mut data[img * out_h * out_w * c..(img + 1) * out_h * out_w * c];
        for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                for ch in 0..c {
                    let p00 = src[(y0 * w + x0) * c + ch];
                    let p01 = src[(y0 * w + x1) * c + ch];
                    let p10 = src[(y1 * w + x0) * c + ch];
                    let p11 = src[(y1 * w + x1) * c + ch];
                    let top = p00 + (p01 - p00) * tx;
                    let bot = p10 + (p11 - p10) * tx;
                    dst[(oy * out_w + ox) * c + ch] = top + (bot - top) * ty;
                }
            }
        }
    }
    FloatImages::new(images.n, out_h, out_w, c, data)
}

fn axis_coords(out_idx: usize, scale: f32, in_len: usize) -> (usize, usize, f32) {
    let src = (out_idx as f32 + 0.5) * scale - 0.5;
    let floor = src.floor();
    let t = src - floor;
    let i0 = (floor as isize).clamp(0, in_len as isize - 1) as usize;
    let i1 = (floor as isize + 1).clamp(0, in_len as isize - 1) as usize;
    (i0, i1, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(h: usize, w: usize, data: Vec<f32>) -> FloatImages {
        FloatImages::new(1, h, w, 1, data).unwrap()
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = FloatImages::new(2, 3, 5, 2, vec![0.37; 2 * 3 * 5 * 2]).unwrap();
        let out = resize_bilinear(&img, 7, 2).unwrap();
        assert!(out.data.iter().all(|&v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn identity_resize_returns_input_unchanged() {
        let img = single(2, 2, vec![0.0, 0.25, 0.5, 1.0]);
        let out = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn upsample_rows_interpolate_linearly() {
        // 2x2 image [[0,1],[0,1]] -> 2x4. Source x coords are -0.25, 0.25,
        // 0.75, 1.25; clamped bilinear gives 0, 0.25, 0.75, 1 per row.
        let img = single(2, 2, vec![0.0, 1.0, 0.0, 1.0]);
        let out = resize_bilinear(&img, 2, 4).unwrap();
        let expected = [0.0, 0.25, 0.75, 1.0, 0.0, 0.25, 0.75, 1.0];
        for (got, want) in out.data.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{:?}", out.data);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let img = FloatImages::new(0, 2, 2, 1, vec![]).unwrap();
        assert!(resize_bilinear(&img, 4, 4).is_err());
    }
}
