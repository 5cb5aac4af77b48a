//! Space-time heatmaps as binary PPM (`P6`) images.
//!
//! Pixel layout: one pixel per cell, image width `n_t` (time left to right), height
//! `n_x`, with the top image row showing the last grid row (largest x) so that
//! upstream is at the bottom. Header is `P6\n<n_t> <n_x>\n255\n` followed by RGB
//! triplets in image row order.
//!
//! Colormap: speed `v` is clamped to `[0, v_max]`, `s = v / v_max`, and the colour is
//! linearly interpolated between stops
//! `s=0.0 (200,0,0)`, `s=0.5 (255,220,0)`, `s=1.0 (0,160,0)`. Missing cells are
//! `(128,128,128)`.

use ndarray::Array2;

const STOPS: [(f64, [f64; 3]); 3] = [
    (0.0, [200.0, 0.0, 0.0]),
    (0.5, [255.0, 220.0, 0.0]),
    (1.0, [0.0, 160.0, 0.0]),
];

pub const MISSING: [u8; 3] = [128, 128, 128];

pub fn color(v: f64, v_max: f64) -> [u8; 3] {
    if v.is_nan() {
        return MISSING;
    }
    let s = (v / v_max).clamp(0.0, 1.0);
    let (lo, hi) = if s <= STOPS[1].0 { (STOPS[0], STOPS[1]) } else { (STOPS[1], STOPS[2]) };
    let f = (s - lo.0) / (hi.0 - lo.0);
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        *out = (lo.1[c] + f * (hi.1[c] - lo.1[c])).round() as u8;
    }
    rgb
}

pub fn render_ppm(values: &Array2<f64>, v_max: f64) -> Vec<u8> {
    let (n_x, n_t) = values.dim();
    let mut out = format!("P6\n{n_t} {n_x}\n255\n").into_bytes();
    out.reserve(3 * n_x * n_t);
    for j in (0..n_x).rev() {
        for k in 0..n_t {
            out.extend_from_slice(&color(values[(j, k)], v_max));
        }
    }
    out
}
