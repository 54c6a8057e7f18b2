//! Single iterations of the five update rules.
//!
//! Dual-space methods keep `J(x)` in [`SolverState`] and only map back to the
//! primal once per step. The stored dual is tied to the exponents it was built
//! with; call [`SolverState::reset_dual`] whenever those change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::operators::{LinearOperator, PartitionedProblem};
use crate::varexp::{
    conjugate_exponent, duality_map_const, duality_map_const_into, half_sq_norm, j_rho_bar_into,
    j_rho_bar_inverse_into, modular_rho_bar, signed_pow, DualElement, ExponentMap, Signal,
};

/// Constant exponents of a Banach method: primal space `ℓ^p` with gauge `p`,
/// data space `ℓ^q` with gauge `r` (normally `r = q`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanachExponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl BanachExponents {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q, r: q }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!("exponent {name} must exceed 1, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    residual: Vec<f64>,
    mapped: Vec<f64>,
    grad: Vec<f64>,
    next: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    /// Inner iterations performed so far.
    pub k: usize,
    x: Vec<f64>,
    dual: Option<Vec<f64>>,
    rng: ChaCha8Rng,
    scratch: Scratch,
}

impl SolverState {
    pub fn new(x0: Vec<f64>, seed: u64) -> Self {
        Self { k: 0, x: x0, dual: None, rng: ChaCha8Rng::seed_from_u64(seed), scratch: Scratch::default() }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    /// Stored dual iterate, if the last step kept one.
    pub fn dual(&self) -> Option<&[f64]> {
        self.dual.as_deref()
    }

    pub fn reset_dual(&mut self) {
        self.dual = None;
    }

    /// Uniform draw from `0..n`.
    pub fn sample_subset(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Fills `scratch.mapped` with `map(Ax − y)` and `scratch.grad` with
    /// `Aᵀ` of it.
    fn gradient_with(
        &mut self,
        a: &LinearOperator,
        y: &[f64],
        map: impl FnOnce(&[f64], &mut [f64]) -> Result<()>,
    ) -> Result<()> {
        check_len(a.rows(), y.len())?;
        check_len(a.cols(), self.x.len())?;
        let s = &mut self.scratch;
        s.residual.resize(a.rows(), 0.0);
        s.mapped.resize(a.rows(), 0.0);
        s.grad.resize(a.cols(), 0.0);
        a.apply_into(&self.x, &mut s.residual)?;
        s.residual.iter_mut().zip(y).for_each(|(r, y)| *r -= y);
        map(&s.residual, &mut s.mapped)?;
        a.adjoint_apply_into(&s.mapped, &mut s.grad)
    }
}

fn residual(a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len(a.rows(), y.len())?;
    let mut r = vec![0.0; a.rows()];
    a.apply_into(x, &mut r)?;
    r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= yi);
    Ok(r)
}

/// `Aᵀ(Ax − y)`, the gradient of `½‖Ax − y‖₂²`.
pub fn gradient_residual_hilbert(a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<Signal> {
    let r = residual(a, y, x)?;
    a.adjoint_apply(&r)
}

/// `Aᵀ J_ρ̄(q)(Ax − y)`, the gradient of `ρ̄_(qₙ)(Ax − y)`.
pub fn gradient_modular(q: &ExponentMap, a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<DualElement> {
    let mut r = residual(a, y, x)?;
    let res = r.clone();
    j_rho_bar_into(q, &res, &mut r)?;
    Ok(DualElement::from_vec_unchecked(a.adjoint_apply(&r)?.into_inner()))
}

/// `Aᵀ J^r_{ℓ^q}(Ax − y)`.
pub fn gradient_banach(exps: BanachExponents, a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<DualElement> {
    let res = residual(a, y, x)?;
    let mut j = vec![0.0; res.len()];
    duality_map_const_into(exps.q, exps.r, &res, &mut j);
    Ok(DualElement::from_vec_unchecked(a.adjoint_apply(&j)?.into_inner()))
}

/// `½‖Ax − y‖₂²`.
pub fn objective_hilbert(a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    Ok(half_sq_norm(&residual(a, y, x)?))
}

/// `(1/r)‖Ax − y‖_q^r`.
pub fn objective_banach(exps: BanachExponents, a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    let res = residual(a, y, x)?;
    if exps.q == 2.0 && exps.r == 2.0 {
        return Ok(half_sq_norm(&res));
    }
    let s: f64 = res.iter().map(|v| v.abs().powf(exps.q)).sum();
    Ok(s.powf(exps.r / exps.q) / exps.r)
}

/// `ρ̄_(qₙ)(Ax − y)`.
pub fn objective_modular(q: &ExponentMap, a: &LinearOperator, y: &[f64], x: &[f64]) -> Result<f64> {
    modular_rho_bar(q, &residual(a, y, x)?)
}

/// `x ← x − μ·Aᵀ(Ax − y)`.
pub fn landweber_step(state: &mut SolverState, a: &LinearOperator, y: &[f64], mu: f64) -> Result<()> {
    state.gradient_with(a, y, |r, out| {
        out.copy_from_slice(r);
        Ok(())
    })?;
    descend(&mut state.x, mu, &state.scratch.grad);
    state.dual = None;
    state.k += 1;
    Ok(())
}

fn descend(dual: &mut [f64], mu: f64, grad: &[f64]) {
    dual.iter_mut().zip(grad).for_each(|(d, g)| *d -= mu * g);
}

/// Dual Landweber: `x ← J^{p*}_{ℓ^{p*}}(J^p_{ℓ^p}(x) − μ·Aᵀ J^r_{ℓ^q}(Ax − y))`.
pub fn dual_landweber_step(
    state: &mut SolverState,
    a: &LinearOperator,
    y: &[f64],
    mu: f64,
    exps: BanachExponents,
) -> Result<()> {
    state.gradient_with(a, y, |r, out| {
        duality_map_const_into(exps.q, exps.r, r, out);
        Ok(())
    })?;
    let mut dual = match state.dual.take() {
        Some(d) => d,
        None => duality_map_const(exps.p, exps.p, &state.x)?.into_inner(),
    };
    descend(&mut dual, mu, &state.scratch.grad);

    let next = &mut state.scratch.next;
    next.resize(dual.len(), 0.0);
    if exps.p == 2.0 {
        next.copy_from_slice(&dual);
    } else {
        let e = conjugate_exponent(exps.p) - 1.0;
        for (index, (o, &d)) in next.iter_mut().zip(&dual).enumerate() {
            let v = signed_pow(d, e);
            if !v.is_finite() {
                return Err(Error::Overflow { index });
            }
            *o = v;
        }
    }
    std::mem::swap(&mut state.x, next);
    state.dual = Some(dual);
    state.k += 1;
    Ok(())
}

/// Modular gradient descent:
/// `x ← J_ρ̄(p)⁻¹(J_ρ̄(p)(x) − μ·Aᵀ J_ρ̄(q)(Ax − y))`.
pub fn modular_gd_step(
    state: &mut SolverState,
    a: &LinearOperator,
    y: &[f64],
    mu: f64,
    p_map: &ExponentMap,
    q_map: &ExponentMap,
) -> Result<()> {
    check_len(p_map.len(), state.x.len())?;
    state.gradient_with(a, y, |r, out| j_rho_bar_into(q_map, r, out))?;
    let mut dual = match state.dual.take() {
        Some(d) => d,
        None => {
            let mut d = vec![0.0; state.x.len()];
            j_rho_bar_into(p_map, &state.x, &mut d)?;
            d
        }
    };
    descend(&mut dual, mu, &state.scratch.grad);
    let next = &mut state.scratch.next;
    next.resize(dual.len(), 0.0);
    j_rho_bar_inverse_into(p_map, &dual, next)?;
    std::mem::swap(&mut state.x, next);
    state.dual = Some(dual);
    state.k += 1;
    Ok(())
}

fn subset(problem: &PartitionedProblem, index: usize) -> Result<&crate::operators::Subset> {
    problem.subsets.get(index).ok_or_else(|| {
        Error::PartitionInvalid(format!("subset {index} out of range ({} subsets)", problem.subsets.len()))
    })
}

/// Dual Landweber step on subset `index` only.
pub fn banach_sgd_step(
    state: &mut SolverState,
    problem: &PartitionedProblem,
    index: usize,
    mu: f64,
    exps: BanachExponents,
) -> Result<()> {
    let s = subset(problem, index)?;
    dual_landweber_step(state, &s.operator, &s.data, mu, exps)
}

/// Modular step on subset `index` with the subset's own `(qₙⁱ)`.
pub fn modular_sgd_step(
    state: &mut SolverState,
    problem: &PartitionedProblem,
    index: usize,
    mu: f64,
    p_map: &ExponentMap,
) -> Result<()> {
    let s = subset(problem, index)?;
    let q = s
        .q_map
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("subset has no data-space exponent map".into()))?;
    modular_gd_step(state, &s.operator, &s.data, mu, p_map, q)
}
