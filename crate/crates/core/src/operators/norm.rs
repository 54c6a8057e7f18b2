use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Outcome of power iteration on `AᵀA`.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    /// Estimate of the largest singular value of `A`.
    pub norm: f64,
    pub iterations: usize,
    /// Rayleigh quotients `‖A vₖ‖²` of the normalised iterates.
    pub rayleigh: Vec<f64>,
}

/// Power iteration on `AᵀA` from a seeded random start vector.
///
/// Stops once the relative change of the Rayleigh quotient drops below `tol`.
pub fn power_iteration(a: &LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<PowerIteration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalise(&mut v);
    let mut av = vec![0.0; a.rows()];
    let mut rayleigh: Vec<f64> = Vec::new();
    let mut change = f64::INFINITY;

    for it in 1..=max_iter {
        a.apply_into(&v, &mut av)?;
        let estimate: f64 = av.iter().map(|x| x * x).sum();
        if let Some(&prev) = rayleigh.last() {
            change = (estimate - prev).abs() / estimate.max(f64::MIN_POSITIVE);
        }
        rayleigh.push(estimate);
        if estimate == 0.0 {
            return Ok(PowerIteration { norm: 0.0, iterations: it, rayleigh });
        }
        if change < tol {
            return Ok(PowerIteration { norm: estimate.sqrt(), iterations: it, rayleigh });
        }
        a.adjoint_apply_into(&av, &mut v)?;
        normalise(&mut v);
    }
    Err(Error::NoConvergence { iterations: max_iter, change })
}

/// Largest singular value of `a`, see [`power_iteration`].
pub fn operator_norm(a: &LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    power_iteration(a, tol, max_iter, seed).map(|p| p.norm)
}

fn normalise(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{radon_build, Geometry};

    #[test]
    fn simple_norms() {
        let id = LinearOperator::identity(6).unwrap();
        assert!((operator_norm(&id, DEFAULT_TOL, DEFAULT_MAX_ITER, 0).unwrap() - 1.0).abs() < 1e-12);
        let d = LinearOperator::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        assert!((operator_norm(&d, 1e-12, 2000, 0).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = radon_build(&Geometry::parallel_beam(12, 0.2, 8, 12)).unwrap();
        let x = power_iteration(&a, 1e-10, 1000, 9).unwrap();
        let y = power_iteration(&a, 1e-10, 1000, 9).unwrap();
        assert_eq!(x.rayleigh, y.rayleigh);
    }

    #[test]
    fn rayleigh_is_non_decreasing() {
        let a = radon_build(&Geometry::parallel_beam(12, 0.2, 8, 12)).unwrap();
        let p = power_iteration(&a, 1e-12, 2000, 3).unwrap();
        for w in p.rayleigh.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0]);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let d = LinearOperator::diagonal(&[1.0, 0.999, 0.998]).unwrap();
        assert!(matches!(power_iteration(&d, 1e-15, 3, 1), Err(Error::NoConvergence { iterations: 3, .. })));
    }
}
