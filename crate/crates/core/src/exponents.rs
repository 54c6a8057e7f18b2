//! Exponent maps from pilot reconstructions and forward projections.

use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;
use crate::solvers::{run, AdaptedMaps, Algorithm, Sampling, SolverConfig, StepSchedule};
use crate::varexp::{ExponentMap, Signal, EXPONENT_GUARD};

/// Target range `[lower, upper]` of a min-max interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationSpec {
    pub lower: f64,
    pub upper: f64,
}

impl InterpolationSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let s = Self { lower, upper };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower >= EXPONENT_GUARD && self.lower <= self.upper && self.upper.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "interpolation range [{}, {}] must satisfy {EXPONENT_GUARD} <= lower <= upper < inf",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// `lower + (upper − lower)·tₙ` with `tₙ` the min-max normalisation of `|srcₙ|`.
/// A flat source gives the constant map `lower`.
pub fn interpolate_magnitudes(src: &[f64], spec: InterpolationSpec) -> Result<ExponentMap> {
    spec.validate()?;
    if src.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(index) = src.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (lo, hi) = src.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v.abs()), h.max(v.abs())));
    let width = spec.upper - spec.lower;
    let values = if hi > lo {
        src.iter().map(|v| (spec.lower + width * ((v.abs() - lo) / (hi - lo))).min(spec.upper)).collect()
    } else {
        vec![spec.lower; src.len()]
    };
    ExponentMap::new(values)
}

pub fn build_p_map(pilot: &[f64], spec: InterpolationSpec) -> Result<ExponentMap> {
    interpolate_magnitudes(pilot, spec)
}

/// Forward-projects the raw `pₙ` values through `a` and interpolates the result.
pub fn build_q_map(a: &LinearOperator, p_map: &ExponentMap, spec: InterpolationSpec) -> Result<ExponentMap> {
    check_len(a.cols(), p_map.len())?;
    interpolate_magnitudes(&a.apply(p_map.values())?, spec)
}

/// Data-space map interpolated directly from `|y|`.
pub fn build_q_map_from_data(y: &[f64], spec: InterpolationSpec) -> Result<ExponentMap> {
    interpolate_magnitudes(y, spec)
}

/// Same rule as [`build_p_map`], applied to the current iterate.
pub fn adapt_p_map(current: &[f64], spec: InterpolationSpec) -> Result<ExponentMap> {
    interpolate_magnitudes(current, spec)
}

/// Adaptation hook for [`run`]: rebuilds `(pₙ)` from the iterate and, when
/// `q_spec` is given, `(qₙ)` from its projection.
pub fn adaptation_hook<'a>(
    a: &'a LinearOperator,
    p_spec: InterpolationSpec,
    q_spec: Option<InterpolationSpec>,
) -> impl FnMut(usize, &[f64]) -> Result<AdaptedMaps> + 'a {
    move |_epoch, x| {
        let p_map = adapt_p_map(x, p_spec)?;
        let q_map = q_spec.map(|s| build_q_map(a, &p_map, s)).transpose()?;
        Ok(AdaptedMaps { p_map, q_map })
    }
}

/// Constant-step Banach SGD in `ℓ^{p_const}` (data space likewise) from zero.
pub fn pilot_reconstruction(
    a: &LinearOperator,
    y: &[f64],
    p_const: f64,
    epochs: usize,
    mu: f64,
    num_subsets: usize,
    seed: u64,
) -> Result<Signal> {
    if !(p_const > 1.0) {
        return Err(Error::ConfigInvalid(format!("pilot exponent must exceed 1, got {p_const}")));
    }
    let mut cfg = SolverConfig::new(Algorithm::SgdP, StepSchedule::constant(mu));
    cfg.p = p_const;
    cfg.q = p_const;
    cfg.num_subsets = num_subsets;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.sampling = Sampling::WithReplacement;
    Ok(run(&cfg, a, y, None, None)?.x)
}
