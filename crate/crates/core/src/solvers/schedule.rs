use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Decaying,
}

/// Constants of the theoretical step bound `μ ≤ 𝚙·c·(1−δ)/K` for modular
/// gradient descent. They are not computable from problem data and are
/// carried for documentation only; no solver reads them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBoundConstants {
    /// Hölder exponent `𝚙 ∈ (1, 2]` of the gradient.
    pub holder_exponent: f64,
    /// Hölder constant `K`.
    pub holder_constant: f64,
    /// Monotonicity constant `c` of `J_ρ̄`.
    pub monotonicity_constant: f64,
    pub delta: f64,
}

impl StepBoundConstants {
    pub fn upper_bound(&self) -> f64 {
        self.holder_exponent * self.monotonicity_constant * (1.0 - self.delta) / self.holder_constant
    }
}

/// `μ_k = μ₀ / (1 + c·(k/N_s)^γ)`, or `μ₀` throughout for a constant schedule.
///
/// `k` counts inner (subset) iterations, so `k/N_s` is the epoch fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub mu0: f64,
    pub decay_c: f64,
    pub gamma: f64,
    pub kind: ScheduleKind,
    pub bounds: Option<StepBoundConstants>,
}

impl StepSchedule {
    pub fn constant(mu0: f64) -> Self {
        Self { mu0, decay_c: 0.0, gamma: 1.0, kind: ScheduleKind::Constant, bounds: None }
    }

    pub fn decaying(mu0: f64, decay_c: f64, gamma: f64) -> Self {
        Self { mu0, decay_c, gamma, kind: ScheduleKind::Decaying, bounds: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::ConfigInvalid(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if self.kind == ScheduleKind::Decaying {
            if !(self.decay_c >= 0.0 && self.decay_c.is_finite()) {
                return Err(Error::ConfigInvalid(format!("decay_c must be non-negative, got {}", self.decay_c)));
            }
            if !(self.gamma > 0.0 && self.gamma.is_finite()) {
                return Err(Error::ConfigInvalid(format!("gamma must be positive, got {}", self.gamma)));
            }
        }
        Ok(())
    }

    pub fn step(&self, k: usize, num_subsets: usize) -> f64 {
        step_size(self, k, num_subsets)
    }
}

pub fn step_size(s: &StepSchedule, k: usize, num_subsets: usize) -> f64 {
    match s.kind {
        ScheduleKind::Constant => s.mu0,
        ScheduleKind::Decaying => {
            let epochs = k as f64 / num_subsets.max(1) as f64;
            s.mu0 / (1.0 + s.decay_c * epochs.powf(s.gamma))
        }
    }
}

/// Decay power `γ = (p−1)/p + 0.01` used with exponent `p` (or `p₋`).
pub fn gamma_for_exponent(p: f64) -> f64 {
    (p - 1.0) / p + 0.01
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = StepSchedule::decaying(0.015, 0.1, 0.5);
        assert_eq!(s.step(0, 30), 0.015);
        for gamma in [0.05, 0.5, 2.0] {
            let s = StepSchedule::decaying(0.015, 0.1, gamma);
            assert!((s.step(30, 30) - 0.015 / 1.1).abs() < 1e-15);
        }
        assert!((gamma_for_exponent(1.05) - 0.057_619_047_619_047_6).abs() < 1e-12);
        assert_eq!(StepSchedule::constant(0.3).step(1000, 7), 0.3);
    }

    #[test]
    fn steps_positive_and_non_increasing() {
        let s = StepSchedule::decaying(0.2, 0.1, 0.51);
        let mut prev = f64::INFINITY;
        for k in 0..5000 {
            let mu = s.step(k, 10);
            assert!(mu > 0.0 && mu <= prev);
            prev = mu;
        }
    }

    #[test]
    fn validation() {
        assert!(StepSchedule::constant(0.0).validate().is_err());
        assert!(StepSchedule::decaying(1.0, -0.1, 1.0).validate().is_err());
        assert!(StepSchedule::decaying(1.0, 0.1, 0.0).validate().is_err());
        assert!(StepSchedule::decaying(1.0, 0.0, 0.5).validate().is_ok());
        let b = StepBoundConstants { holder_exponent: 2.0, holder_constant: 4.0, monotonicity_constant: 0.5, delta: 0.5 };
        assert_eq!(b.upper_bound(), 0.125);
    }
}
