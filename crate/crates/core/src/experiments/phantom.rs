use crate::error::{Error, Result};
use crate::varexp::Signal;

pub const MIN_PHANTOM_SIDE: usize = 16;

fn in_ellipse(x: f64, y: f64, cx: f64, cy: f64, a: f64, b: f64) -> bool {
    let (u, v) = ((x - cx) / a, (y - cy) / b);
    u * u + v * v <= 1.0
}

/// Sparse piecewise-constant test image, row-major with row 0 at the top.
///
/// Pixel centres are sampled on `[-1, 1]²`: an elliptical ring (0.5), two
/// disks (1.0 and 0.8) and a small rectangle (0.6) on a zero background.
pub fn generate_phantom(side: usize) -> Result<Signal> {
    if side < MIN_PHANTOM_SIDE {
        return Err(Error::SideTooSmall(side));
    }
    let h = 2.0 / side as f64;
    let mut img = Vec::with_capacity(side * side);
    for i in 0..side {
        let y = 1.0 - (i as f64 + 0.5) * h;
        for j in 0..side {
            let x = -1.0 + (j as f64 + 0.5) * h;
            let mut v = 0.0;
            if in_ellipse(x, y, 0.0, 0.0, 0.7, 0.55) && !in_ellipse(x, y, 0.0, 0.0, 0.62, 0.47) {
                v = 0.5;
            }
            if in_ellipse(x, y, -0.25, 0.1, 0.15, 0.15) {
                v = 1.0;
            }
            if in_ellipse(x, y, 0.25, -0.15, 0.1, 0.1) {
                v = 0.8;
            }
            if (-0.1..=0.15).contains(&x) && (0.25..=0.35).contains(&y) {
                v = 0.6;
            }
            img.push(v);
        }
    }
    Signal::new(img)
}
