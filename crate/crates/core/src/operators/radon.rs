//! Ray-driven parallel-beam projector.
//!
//! The image is a square of `image_side × image_side` pixels centred on the
//! origin, stored row-major with row 0 at the top (largest y). For an angle θ
//! the detector axis is `u = (cos θ, sin θ)` and rays travel along
//! `d = (−sin θ, cos θ)`; detector `k` sits at offset
//! `(k − (num_detectors−1)/2)·detector_spacing` along `u`. One ray passes
//! through the centre of each detector cell and its weights are the exact
//! intersection lengths with the pixels it crosses (Siddon traversal). The
//! sinogram is angle-major: row `a·num_detectors + k`.

use rayon::prelude::*;

use super::{Csr, LinearOperator, OperatorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub image_side: usize,
    pub pixel_size: f64,
    pub num_angles: usize,
    /// Degrees.
    pub angle_start: f64,
    /// Degrees.
    pub angle_step: f64,
    pub num_detectors: usize,
    pub detector_spacing: f64,
}

impl Geometry {
    /// Angles `0, 180/n, …` over a half turn with detectors covering the image width.
    pub fn parallel_beam(image_side: usize, pixel_size: f64, num_angles: usize, num_detectors: usize) -> Self {
        Self {
            image_side,
            pixel_size,
            num_angles,
            angle_start: 0.0,
            angle_step: 180.0 / num_angles.max(1) as f64,
            num_detectors,
            detector_spacing: image_side as f64 * pixel_size / num_detectors.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::GeometryInvalid(m.to_string()));
        if self.image_side == 0 || self.num_angles == 0 || self.num_detectors == 0 {
            return bad("image_side, num_angles and num_detectors must be at least 1");
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return bad("pixel_size must be positive");
        }
        if !(self.detector_spacing > 0.0 && self.detector_spacing.is_finite()) {
            return bad("detector_spacing must be positive");
        }
        if !self.angle_start.is_finite() || !self.angle_step.is_finite() {
            return bad("angles must be finite");
        }
        if self.image_side > u32::MAX as usize / self.image_side {
            return bad("image too large");
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn num_rows(&self) -> usize {
        self.num_angles * self.num_detectors
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.num_angles).map(|k| self.angle_start + k as f64 * self.angle_step).collect()
    }

    pub fn detector_offset(&self, k: usize) -> f64 {
        (k as f64 - (self.num_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    /// Sinogram rows owned by angle `a`.
    pub fn rows_of_angle(&self, a: usize) -> std::ops::Range<usize> {
        a * self.num_detectors..(a + 1) * self.num_detectors
    }
}

/// Builds the projector for `geometry` with all ray weights precomputed.
pub fn radon_build(geometry: &Geometry) -> Result<LinearOperator> {
    geometry.validate()?;
    let angles: Vec<(f64, f64)> = geometry
        .angles_deg()
        .into_iter()
        .map(|deg| {
            let t = deg.to_radians();
            (snap(t.cos()), snap(t.sin()))
        })
        .collect();
    let nd = geometry.num_detectors;
    let rows: Vec<Vec<(u32, f64)>> = (0..geometry.num_rows())
        .into_par_iter()
        .map(|row| {
            let (cos, sin) = angles[row / nd];
            trace_ray(geometry, cos, sin, geometry.detector_offset(row % nd))
        })
        .collect();
    let csr = Csr::from_rows(geometry.num_pixels(), rows);
    Ok(LinearOperator::from_csr(OperatorKind::Radon, csr, Some(geometry.clone())))
}

// cos(90°) evaluates to 6e-17; treat such directions as axis-aligned.
fn snap(v: f64) -> f64 {
    if v.abs() < 1e-14 {
        0.0
    } else {
        v
    }
}

/// Intersection lengths of the line `offset·u + t·d` with every pixel.
fn trace_ray(g: &Geometry, cos: f64, sin: f64, offset: f64) -> Vec<(u32, f64)> {
    let n = g.image_side;
    let s = g.pixel_size;
    let half = 0.5 * n as f64 * s;
    let (px, py) = (offset * cos, offset * sin);
    let (dx, dy) = (-sin, cos);

    // Parameter interval inside the square.
    let slab = |p: f64, d: f64| -> Option<(f64, f64)> {
        if d == 0.0 {
            (p > -half && p < half).then_some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            let (a, b) = ((-half - p) / d, (half - p) / d);
            Some((a.min(b), a.max(b)))
        }
    };
    let (Some((tx0, tx1)), Some((ty0, ty1))) = (slab(px, dx), slab(py, dy)) else {
        return Vec::new();
    };
    let (t_min, t_max) = (tx0.max(ty0), tx1.min(ty1));
    if !(t_max > t_min) {
        return Vec::new();
    }

    let mut ts = Vec::with_capacity(2 * n + 4);
    ts.push(t_min);
    ts.push(t_max);
    for (p, d) in [(px, dx), (py, dy)] {
        if d != 0.0 {
            for i in 0..=n {
                let t = (-half + i as f64 * s - p) / d;
                if t > t_min && t < t_max {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let min_len = 1e-12 * s;
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= min_len {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (mx, my) = (px + tm * dx, py + tm * dy);
        let col = (((mx + half) / s).floor() as isize).clamp(0, n as isize - 1) as usize;
        let from_bottom = (((my + half) / s).floor() as isize).clamp(0, n as isize - 1) as usize;
        let row = n - 1 - from_bottom;
        entries.push(((row * n + col) as u32, len));
    }
    entries.sort_by_key(|e| e.0);
    entries.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            true
        } else {
            false
        }
    });
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_pixel_chord() {
        let g = Geometry {
            image_side: 1,
            pixel_size: 0.7,
            num_angles: 1,
            angle_start: 0.0,
            angle_step: 1.0,
            num_detectors: 1,
            detector_spacing: 0.7,
        };
        let a = radon_build(&g).unwrap();
        assert_eq!(a.row_entries(0), vec![(0, 0.7)]);
    }

    #[test]
    fn invalid_geometry() {
        let mut g = Geometry::parallel_beam(8, 1.0, 4, 8);
        g.pixel_size = 0.0;
        assert!(matches!(radon_build(&g), Err(Error::GeometryInvalid(_))));
        let mut g = Geometry::parallel_beam(8, 1.0, 4, 8);
        g.num_angles = 0;
        assert!(radon_build(&g).is_err());
    }

    #[test]
    fn axis_aligned_rays_cross_full_columns() {
        // At 0° each ray is vertical and crosses one pixel column end to end.
        let g = Geometry::parallel_beam(4, 1.0, 2, 4);
        let a = radon_build(&g).unwrap();
        for k in 0..4 {
            let entries = a.row_entries(k);
            assert_eq!(entries.len(), 4);
            assert!(entries.iter().all(|&(c, w)| c % 4 == k && (w - 1.0).abs() < 1e-12));
        }
        // At 90° rays are horizontal; detector 0 (offset −1.5) sits in the bottom row.
        let bottom = a.row_entries(4);
        assert!(bottom.iter().all(|&(c, w)| c / 4 == 3 && (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn total_weight_per_ray_is_chord_length() {
        // A 45° ray through the centre crosses the square along its diagonal.
        let g = Geometry { angle_start: 45.0, ..Geometry::parallel_beam(16, 0.5, 1, 1) };
        let a = radon_build(&g).unwrap();
        let total: f64 = a.row_entries(0).iter().map(|e| e.1).sum();
        assert!((total - 8.0 * 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn adjoint_is_exact() {
        let g = Geometry::parallel_beam(16, 0.1, 12, 20);
        let a = radon_build(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..a.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ax = a.apply(&x).unwrap();
            let aty = a.adjoint_apply(&y).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(u, v)| u * v).sum();
            let rhs: f64 = x.iter().zip(aty.iter()).map(|(u, v)| u * v).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn disk_profile_matches_chord_lengths() {
        let side = 64;
        let pixel = 2.5 / side as f64;
        let g = Geometry {
            image_side: side,
            pixel_size: pixel,
            num_angles: 1,
            angle_start: 0.0,
            angle_step: 1.0,
            num_detectors: 64,
            detector_spacing: pixel,
        };
        let a = radon_build(&g).unwrap();
        let half = 1.25;
        let disk: Vec<f64> = (0..side * side)
            .map(|i| {
                let (r, c) = (i / side, i % side);
                let x = -half + (c as f64 + 0.5) * pixel;
                let y = half - (r as f64 + 0.5) * pixel;
                if x * x + y * y <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let profile = a.apply(&disk).unwrap();
        for k in 0..g.num_detectors {
            let s = g.detector_offset(k);
            let chord = if s.abs() < 1.0 { 2.0 * (1.0 - s * s).sqrt() } else { 0.0 };
            assert!((profile[k] - chord).abs() <= 2.0 * pixel, "k={k}: {} vs {chord}", profile[k]);
        }
    }
}
