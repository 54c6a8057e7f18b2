use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::varexp::Signal;

/// Background threshold relative to `max|y|` when none is given.
pub const DEFAULT_BACKGROUND_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Exactly `round(fraction·len)` entries replaced by `low` or `high`
    /// (defaults: data min / max).
    SaltPepper { fraction: f64, low: Option<f64>, high: Option<f64> },
    /// Multiplicative: `y·(1 + z)`, `z ~ N(mean, variance)`.
    Speckle { mean: f64, variance: f64 },
    /// Additive: `y + z`, `z ~ N(mean, variance)`.
    Gaussian { mean: f64, variance: f64 },
    /// Background (`|y| ≤ threshold`) and foreground corrupted separately.
    Split { background: Box<NoiseModel>, foreground: Box<NoiseModel>, threshold: Option<f64> },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        match self {
            NoiseModel::SaltPepper { fraction, low, high } => {
                if !(0.0..=1.0).contains(fraction) {
                    return bad(format!("salt-and-pepper fraction {fraction} outside [0, 1]"));
                }
                if low.is_some_and(|v| !v.is_finite()) || high.is_some_and(|v| !v.is_finite()) {
                    return bad("salt-and-pepper values must be finite".into());
                }
            }
            NoiseModel::Speckle { mean, variance } | NoiseModel::Gaussian { mean, variance } => {
                if !(*variance >= 0.0 && variance.is_finite()) || !mean.is_finite() {
                    return bad(format!("invalid noise moments mean={mean} variance={variance}"));
                }
            }
            NoiseModel::Split { background, foreground, threshold } => {
                if matches!(**background, NoiseModel::Split { .. }) || matches!(**foreground, NoiseModel::Split { .. }) {
                    return bad("split noise models cannot be nested".into());
                }
                if threshold.is_some_and(|t| !(t >= 0.0)) {
                    return bad("background threshold must be non-negative".into());
                }
                background.validate()?;
                foreground.validate()?;
            }
        }
        Ok(())
    }

    /// Applies the model; impulse defaults come from the whole of `y`.
    pub fn apply<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<Signal> {
        self.validate()?;
        let range = data_range(y);
        let mut out = y.to_vec();
        self.apply_in_place(&mut out, range, rng)?;
        Signal::new(out)
    }

    fn apply_in_place<R: Rng + ?Sized>(&self, y: &mut [f64], range: (f64, f64), rng: &mut R) -> Result<()> {
        match self {
            NoiseModel::SaltPepper { fraction, low, high } => {
                salt_pepper_in_place(y, *fraction, low.unwrap_or(range.0), high.unwrap_or(range.1), rng);
            }
            NoiseModel::Speckle { mean, variance } => {
                let z = normal(*mean, *variance)?;
                y.iter_mut().for_each(|v| *v *= 1.0 + z.sample(rng));
            }
            NoiseModel::Gaussian { mean, variance } => {
                let z = normal(*mean, *variance)?;
                y.iter_mut().for_each(|v| *v += z.sample(rng));
            }
            NoiseModel::Split { background, foreground, threshold } => {
                let (bg, fg) = split_indices(y, *threshold);
                for (model, idx) in [(background, bg), (foreground, fg)] {
                    let mut part: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                    model.apply_in_place(&mut part, range, rng)?;
                    for (&i, v) in idx.iter().zip(part) {
                        y[i] = v;
                    }
                }
            }
        }
        Ok(())
    }
}

fn normal(mean: f64, variance: f64) -> Result<Normal<f64>> {
    Normal::new(mean, variance.sqrt()).map_err(|e| Error::ConfigInvalid(e.to_string()))
}

fn data_range(y: &[f64]) -> (f64, f64) {
    if y.is_empty() {
        return (0.0, 0.0);
    }
    y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Indices with `|yₙ| ≤ threshold` and the rest. The default threshold is
/// `1e-12·max|y|`.
pub fn split_indices(y: &[f64], threshold: Option<f64>) -> (Vec<usize>, Vec<usize>) {
    let t = threshold.unwrap_or_else(|| DEFAULT_BACKGROUND_REL * y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    (0..y.len()).partition(|&i| y[i].abs() <= t)
}

/// Corrupted positions are returned in selection order.
fn salt_pepper_in_place<R: Rng + ?Sized>(y: &mut [f64], fraction: f64, low: f64, high: f64, rng: &mut R) -> Vec<usize> {
    let count = (fraction * y.len() as f64).round() as usize;
    let picked = index::sample(rng, y.len(), count.min(y.len())).into_vec();
    for &i in &picked {
        y[i] = if rng.random_bool(0.5) { high } else { low };
    }
    picked
}

/// Salt-and-pepper noise with impulse values `low`/`high` (defaults: data
/// min / max). Also returns the corrupted positions.
pub fn add_salt_pepper<R: Rng + ?Sized>(
    y: &[f64],
    fraction: f64,
    low: Option<f64>,
    high: Option<f64>,
    rng: &mut R,
) -> Result<(Signal, Vec<usize>)> {
    NoiseModel::SaltPepper { fraction, low, high }.validate()?;
    let (lo, hi) = data_range(y);
    let mut out = y.to_vec();
    let picked = salt_pepper_in_place(&mut out, fraction, low.unwrap_or(lo), high.unwrap_or(hi), rng);
    Ok((Signal::new(out)?, picked))
}

pub fn add_speckle<R: Rng + ?Sized>(y: &[f64], mean: f64, variance: f64, rng: &mut R) -> Result<Signal> {
    NoiseModel::Speckle { mean, variance }.apply(y, rng)
}

pub fn add_gaussian<R: Rng + ?Sized>(y: &[f64], mean: f64, variance: f64, rng: &mut R) -> Result<Signal> {
    NoiseModel::Gaussian { mean, variance }.apply(y, rng)
}

pub fn add_split_noise<R: Rng + ?Sized>(y: &[f64], model: &NoiseModel, rng: &mut R) -> Result<Signal> {
    if !matches!(model, NoiseModel::Split { .. }) {
        return Err(Error::ConfigInvalid("expected a split noise model".into()));
    }
    model.apply(y, rng)
}

/// `‖noisy − clean‖₂`, the realised noise level `δ`.
pub fn noise_level(clean: &[f64], noisy: &[f64]) -> Result<f64> {
    crate::error::check_len(clean.len(), noisy.len())?;
    Ok(clean.iter().zip(noisy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| 1.0 + i as f64 / n as f64).collect()
    }

    #[test]
    fn salt_pepper_exact_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = ramp(46080);
        let (noisy, picked) = add_salt_pepper(&y, 0.15, Some(0.0), Some(5.0), &mut rng).unwrap();
        assert_eq!(picked.len(), 6912);
        let changed = noisy.iter().zip(&y).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 6912);
        assert!(picked.iter().all(|&i| noisy[i] == 0.0 || noisy[i] == 5.0));

        let (same, _) = add_salt_pepper(&y, 0.0, None, None, &mut rng).unwrap();
        assert_eq!(same.as_slice(), y.as_slice());
        let (all, _) = add_salt_pepper(&y, 1.0, None, None, &mut rng).unwrap();
        let (lo, hi) = (y[0], y[y.len() - 1]);
        assert!(all.iter().all(|v| *v == lo || *v == hi));
        assert!(add_salt_pepper(&y, 1.5, None, None, &mut rng).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let y = ramp(1000);
        let model = NoiseModel::Split {
            background: Box::new(NoiseModel::SaltPepper { fraction: 0.1, low: None, high: None }),
            foreground: Box::new(NoiseModel::Speckle { mean: 0.0, variance: 0.01 }),
            threshold: Some(1.2),
        };
        let a = model.apply(&y, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = model.apply(&y, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn speckle_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = ramp(50);
        assert_eq!(add_speckle(&y, 0.0, 0.0, &mut rng).unwrap().as_slice(), y.as_slice());
        assert!(add_speckle(&[0.0; 20], 0.0, 0.5, &mut rng).unwrap().iter().all(|v| *v == 0.0));
        assert!(add_speckle(&y, 0.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn split_noise_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = ramp(100);
        let sp = NoiseModel::SaltPepper { fraction: 0.5, low: Some(-1.0), high: Some(-2.0) };
        let speckle = NoiseModel::Speckle { mean: 0.0, variance: 0.01 };
        // Threshold below min|y|: the foreground model sees every entry.
        let model = NoiseModel::Split {
            background: Box::new(sp.clone()),
            foreground: Box::new(speckle.clone()),
            threshold: Some(0.5),
        };
        let out = add_split_noise(&y, &model, &mut rng).unwrap();
        assert!(out.iter().all(|v| *v > 0.0));
        assert!(out.iter().zip(&y).all(|(a, b)| a != b));

        // All-zero data: only the background model acts.
        let zeros = vec![0.0; 100];
        let model = NoiseModel::Split { background: Box::new(sp), foreground: Box::new(speckle), threshold: None };
        let out = add_split_noise(&zeros, &model, &mut rng).unwrap();
        assert_eq!(out.iter().filter(|v| **v != 0.0).count(), 50);

        assert!(add_split_noise(&y, &NoiseModel::Speckle { mean: 0.0, variance: 0.1 }, &mut rng).is_err());
    }

    #[test]
    fn default_impulses_use_full_data_range() {
        // Background entries are zero, so impulse defaults must come from all of y.
        let mut y = vec![0.0; 200];
        y.extend((1..=200).map(|i| i as f64));
        let model = NoiseModel::Split {
            background: Box::new(NoiseModel::SaltPepper { fraction: 1.0, low: None, high: None }),
            foreground: Box::new(NoiseModel::Gaussian { mean: 0.0, variance: 0.0 }),
            threshold: None,
        };
        let out = model.apply(&y, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(out[..200].iter().all(|v| *v == 0.0 || *v == 200.0));
        assert!(out[..200].contains(&200.0));
        assert_eq!(&out[200..], &y[200..]);
        assert!(noise_level(&y, &out).unwrap() > 0.0);
    }
}
