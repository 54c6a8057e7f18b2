//! Variable exponent sequence spaces `ℓ^(pₙ)`.
//!
//! Everything here is a pure function of its inputs. Signals are plain `f64`
//! slices; [`Signal`] and [`DualElement`] are owned wrappers that carry the
//! finiteness invariant and make the primal/dual distinction visible in
//! signatures that return values.
//!
//! Powers are evaluated as `exp(e·ln|v|)` with magnitudes below `1e-300`
//! flushed to zero, so `sign(0)·0^e = 0` for every exponent, including the
//! negative ones that appear when inverting `J_ρ̄` near `pₙ = 2`.

use std::ops::Deref;

use crate::error::{check_len, Error, Result};

/// Smallest admissible exponent.
pub const EXPONENT_GUARD: f64 = 1.01;

/// Magnitudes below this are treated as exact zeros when raised to a power.
pub const UNDERFLOW: f64 = 1e-300;

const LUX_TOL: f64 = 1e-12;
const LUX_MAX_ITER: usize = 200;

macro_rules! finite_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting NaN and infinities.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                check_finite(&values)?;
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            // Callers guarantee finiteness.
            pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }
    };
}

finite_vector!(
    /// A primal element: an image in lexicographic pixel order or a sinogram
    /// in angle-major order.
    Signal
);

finite_vector!(
    /// An element of the dual space, e.g. the output of a duality map.
    DualElement
);

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Per-coordinate exponents `(pₙ)` with `1.01 ≤ p₋ ≤ pₙ ≤ p₊ < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentMap {
    values: Vec<f64>,
    /// `1/(pₙ−1)`, the exponents of the inverse map.
    inverse: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        let mut p_minus = f64::INFINITY;
        let mut p_plus = f64::NEG_INFINITY;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < EXPONENT_GUARD {
                return Err(Error::ExponentOutOfRange { index, value, min: EXPONENT_GUARD });
            }
            p_minus = p_minus.min(value);
            p_plus = p_plus.max(value);
        }
        let inverse = values.iter().map(|p| 1.0 / (p - 1.0)).collect();
        Ok(Self { values, inverse, p_minus, p_plus })
    }

    pub fn constant(p: f64, len: usize) -> Result<Self> {
        Self::new(vec![p; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// `Some(p)` when every coordinate carries the same exponent.
    pub fn constant_value(&self) -> Option<f64> {
        self.is_constant().then_some(self.p_minus)
    }

    /// Every exponent is exactly 2; all maps reduce to the identity.
    pub fn is_hilbert(&self) -> bool {
        self.constant_value() == Some(2.0)
    }

    /// Pointwise conjugate exponents `pₙ* = pₙ/(pₙ−1)`.
    pub fn conjugate(&self) -> Result<Self> {
        Self::new(self.values.iter().map(|&p| conjugate_exponent(p)).collect())
    }

    /// Restriction to the given coordinates, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            match self.values.get(i) {
                Some(&p) => out.push(p),
                None => return Err(Error::DimensionMismatch { expected: self.len(), found: i + 1 }),
            }
        }
        Self::new(out)
    }
}

/// Validates a raw exponent sequence; see [`ExponentMap::new`].
pub fn validate_exponent_map(raw: &[f64]) -> Result<ExponentMap> {
    ExponentMap::new(raw.to_vec())
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

#[inline]
pub(crate) fn abs_pow(a: f64, e: f64) -> f64 {
    if a < UNDERFLOW {
        0.0
    } else {
        (e * a.ln()).exp()
    }
}

/// `sign(v)·|v|^e`.
#[inline]
pub fn signed_pow(v: f64, e: f64) -> f64 {
    abs_pow(v.abs(), e).copysign(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn half_sq_norm(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `ρ(x) = Σ |xₙ|^{pₙ}`.
pub fn modular_rho(p: &ExponentMap, x: &[f64]) -> Result<f64> {
    check_len(p.len(), x.len())?;
    if p.is_hilbert() {
        return Ok(x.iter().map(|v| v * v).sum());
    }
    Ok(p.values.iter().zip(x).map(|(&pn, &xn)| abs_pow(xn.abs(), pn)).sum())
}

/// `ρ̄(x) = Σ |xₙ|^{pₙ}/pₙ`.
pub fn modular_rho_bar(p: &ExponentMap, x: &[f64]) -> Result<f64> {
    check_len(p.len(), x.len())?;
    if p.is_hilbert() {
        return Ok(half_sq_norm(x));
    }
    Ok(p.values.iter().zip(x).map(|(&pn, &xn)| abs_pow(xn.abs(), pn) / pn).sum())
}

/// Luxemburg norm `inf{λ>0 : ρ(x/λ) ≤ 1}`.
///
/// `λ ↦ ρ(x/λ)` is strictly decreasing for `x ≠ 0`, so the level set is found
/// by bisection. The search runs on `x/max|xₙ|`, where the root lies in
/// `[1, dim^{1/p₋}]`, and the result is scaled back.
pub fn luxemburg_norm(p: &ExponentMap, x: &[f64]) -> Result<f64> {
    check_len(p.len(), x.len())?;
    check_finite(x)?;
    let m = max_abs(x);
    if m == 0.0 {
        return Ok(0.0);
    }
    let u: Vec<f64> = x.iter().map(|v| v.abs() / m).collect();
    let g = |lambda: f64| -> f64 {
        p.values.iter().zip(&u).map(|(&pn, &un)| abs_pow(un / lambda, pn)).sum()
    };

    let spread = (u.len() as f64).powf(1.0 / p.p_minus);
    let mut lo = 1.0 / spread;
    let mut hi = spread;
    while g(lo) < 1.0 {
        lo *= 0.5;
    }
    while g(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..LUX_MAX_ITER {
        if hi - lo <= LUX_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(m * 0.5 * (lo + hi))
}

/// Duality map `J^r_{ℓ^p}` of the constant-exponent space:
/// `‖x‖_p^{r−p}·sign(xₙ)|xₙ|^{p−1}`, zero at `x = 0`.
pub fn duality_map_const(p: f64, r: f64, x: &[f64]) -> Result<DualElement> {
    check_exponent(p)?;
    check_exponent(r)?;
    check_finite(x)?;
    if p == 2.0 && r == 2.0 {
        return Ok(DualElement(x.to_vec()));
    }
    let mut out = vec![0.0; x.len()];
    duality_map_const_into(p, r, x, &mut out);
    finite_or_overflow(out).map(DualElement)
}

pub(crate) fn duality_map_const_into(p: f64, r: f64, x: &[f64], out: &mut [f64]) {
    if p == 2.0 && r == 2.0 {
        out.copy_from_slice(x);
        return;
    }
    let factor = if r == p {
        1.0
    } else {
        let m = max_abs(x);
        if m == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let s: f64 = x.iter().map(|v| abs_pow(v.abs() / m, p)).sum();
        let norm = m * s.powf(1.0 / p);
        norm.powf(r - p)
    };
    for (o, &v) in out.iter_mut().zip(x) {
        *o = factor * signed_pow(v, p - 1.0);
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange { index: 0, value: p, min: 1.0 })
    }
}

fn finite_or_overflow(values: Vec<f64>) -> Result<Vec<f64>> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::Overflow { index }),
        None => Ok(values),
    }
}

/// Duality map `J^r_{ℓ^(pₙ)}` of the variable exponent space.
///
/// With `λ = ‖x‖` and `u = x/λ` the coefficients are
/// `λ^{r−1}·pₙ·sign(uₙ)|uₙ|^{pₙ−1} / Σₘ pₘ|uₘ|^{pₘ}`.
/// The norm is not separable, so each evaluation costs a Luxemburg solve.
pub fn duality_map_varexp(p: &ExponentMap, r: f64, x: &[f64]) -> Result<DualElement> {
    check_exponent(r)?;
    let lambda = luxemburg_norm(p, x)?;
    if lambda == 0.0 {
        return Ok(DualElement::zeros(x.len()));
    }
    let u: Vec<f64> = x.iter().map(|v| v / lambda).collect();
    let denom: f64 = p.values.iter().zip(&u).map(|(&pn, &un)| pn * abs_pow(un.abs(), pn)).sum();
    let scale = lambda.powf(r - 1.0) / denom;
    let out = p
        .values
        .iter()
        .zip(&u)
        .map(|(&pn, &un)| scale * pn * signed_pow(un, pn - 1.0))
        .collect();
    finite_or_overflow(out).map(DualElement)
}

/// Approximate inverse of [`duality_map_varexp`]: the duality map of
/// `ℓ^(pₙ*)` with gauge `r* = r/(r−1)`.
///
/// `(ℓ^(pₙ))*` and `ℓ^(pₙ*)` are isomorphic but not isometrically, so this
/// is only an explicit surrogate for the true inverse; no accuracy bound is
/// claimed. Exact for constant exponents.
pub fn duality_map_varexp_inverse_approx(p: &ExponentMap, r: f64, v: &[f64]) -> Result<Signal> {
    check_exponent(r)?;
    let out = duality_map_varexp(&p.conjugate()?, conjugate_exponent(r), v)?;
    Ok(Signal(out.0))
}

/// Gateaux derivative of `ρ`: `pₙ·sign(xₙ)|xₙ|^{pₙ−1}`.
pub fn j_rho(p: &ExponentMap, x: &[f64]) -> Result<DualElement> {
    check_len(p.len(), x.len())?;
    if p.is_hilbert() {
        return Ok(DualElement(x.iter().map(|v| 2.0 * v).collect()));
    }
    let out = p.values.iter().zip(x).map(|(&pn, &xn)| pn * signed_pow(xn, pn - 1.0)).collect();
    finite_or_overflow(out).map(DualElement)
}

/// Gateaux derivative of `ρ̄`: `sign(xₙ)|xₙ|^{pₙ−1}`.
pub fn j_rho_bar(p: &ExponentMap, x: &[f64]) -> Result<DualElement> {
    let mut out = vec![0.0; x.len()];
    j_rho_bar_into(p, x, &mut out)?;
    finite_or_overflow(out).map(DualElement)
}

/// In-place form of [`j_rho_bar`].
pub fn j_rho_bar_into(p: &ExponentMap, x: &[f64], out: &mut [f64]) -> Result<()> {
    check_len(p.len(), x.len())?;
    check_len(x.len(), out.len())?;
    if p.is_hilbert() {
        out.copy_from_slice(x);
        return Ok(());
    }
    for ((o, &pn), &xn) in out.iter_mut().zip(&p.values).zip(x) {
        *o = signed_pow(xn, pn - 1.0);
    }
    Ok(())
}

/// Inverse of [`j_rho_bar`]: `sign(vₙ)|vₙ|^{1/(pₙ−1)}`.
pub fn j_rho_bar_inverse(p: &ExponentMap, v: &[f64]) -> Result<Signal> {
    let mut out = vec![0.0; v.len()];
    j_rho_bar_inverse_into(p, v, &mut out)?;
    Ok(Signal(out))
}

/// In-place form of [`j_rho_bar_inverse`]. Fails with [`Error::Overflow`] when
/// a coordinate leaves the floating-point range.
pub fn j_rho_bar_inverse_into(p: &ExponentMap, v: &[f64], out: &mut [f64]) -> Result<()> {
    check_len(p.len(), v.len())?;
    check_len(v.len(), out.len())?;
    if p.is_hilbert() {
        out.copy_from_slice(v);
        return check_finite(out).map_err(|e| match e {
            Error::NonFinite { index } => Error::Overflow { index },
            other => other,
        });
    }
    for (index, ((o, &e), &vn)) in out.iter_mut().zip(&p.inverse).zip(v).enumerate() {
        let value = signed_pow(vn, e);
        if !value.is_finite() {
            return Err(Error::Overflow { index });
        }
        *o = value;
    }
    Ok(())
}
