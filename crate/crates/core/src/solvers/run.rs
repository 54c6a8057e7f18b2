use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use super::runlog::{EpochRecord, RunLog};
use super::schedule::StepSchedule;
use super::steps::{
    banach_sgd_step, dual_landweber_step, landweber_step, modular_gd_step, modular_sgd_step, objective_banach,
    objective_hilbert, objective_modular, BanachExponents, SolverState,
};
use crate::error::{check_len, Error, Result};
use crate::experiments::metrics::{mae, psnr, ssim};
use crate::operators::{operator_norm, partition_views, LinearOperator, PartitionedProblem, DEFAULT_MAX_ITER};
use crate::varexp::{ExponentMap, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Gd2,
    GdP,
    GdPnQn,
    Sgd2,
    SgdP,
    SgdPnQn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hilbert,
    Banach,
    Modular,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::Gd2, Algorithm::GdP, Algorithm::GdPnQn, Algorithm::Sgd2, Algorithm::SgdP, Algorithm::SgdPnQn];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gd2 => "gd2",
            Algorithm::GdP => "gd_p",
            Algorithm::GdPnQn => "gd_pnqn",
            Algorithm::Sgd2 => "sgd2",
            Algorithm::SgdP => "sgd_p",
            Algorithm::SgdPnQn => "sgd_pnqn",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Sgd2 | Algorithm::SgdP | Algorithm::SgdPnQn)
    }

    pub fn family(self) -> Family {
        match self {
            Algorithm::Gd2 | Algorithm::Sgd2 => Family::Hilbert,
            Algorithm::GdP | Algorithm::SgdP => Family::Banach,
            Algorithm::GdPnQn | Algorithm::SgdPnQn => Family::Modular,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Independent uniform draws, `N_s` per epoch.
    WithReplacement,
    /// Every subset once per epoch in a fresh random order.
    Permutation,
}

/// Replacement exponent maps returned by an adaptation hook.
#[derive(Debug, Clone)]
pub struct AdaptedMaps {
    pub p_map: ExponentMap,
    /// New data-space map, or `None` to keep the current one.
    pub q_map: Option<ExponentMap>,
}

/// Called after every `adapt_interval` epochs with the epoch number and iterate.
pub type AdaptHook<'a> = dyn FnMut(usize, &[f64]) -> Result<AdaptedMaps> + 'a;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Constant exponents for `gd_p`/`sgd_p`.
    pub p: f64,
    pub q: f64,
    /// Gauge of the data-space duality map; defaults to `q`.
    pub r: Option<f64>,
    /// Variable exponents for `gd_pnqn`/`sgd_pnqn`.
    pub p_map: Option<ExponentMap>,
    pub q_map: Option<ExponentMap>,
    pub schedule: StepSchedule,
    /// Ignored (treated as 1) by the deterministic algorithms.
    pub num_subsets: usize,
    /// Epochs for SGD; iterations for GD.
    pub epochs: usize,
    pub seed: u64,
    /// Adapt the exponent maps every this many epochs; 0 disables.
    pub adapt_interval: usize,
    pub sampling: Sampling,
    /// Starting point; zero when absent.
    pub x0: Option<Signal>,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, schedule: StepSchedule) -> Self {
        Self {
            algorithm,
            p: 2.0,
            q: 2.0,
            r: None,
            p_map: None,
            q_map: None,
            schedule,
            num_subsets: 1,
            epochs: 1,
            seed: 0,
            adapt_interval: 0,
            sampling: Sampling::WithReplacement,
            x0: None,
        }
    }

    pub fn banach_exponents(&self) -> BanachExponents {
        BanachExponents { p: self.p, q: self.q, r: self.r.unwrap_or(self.q) }
    }

    fn effective_subsets(&self) -> usize {
        if self.algorithm.is_stochastic() {
            self.num_subsets
        } else {
            1
        }
    }

    pub fn validate(&self, a: &LinearOperator, y: &[f64]) -> Result<()> {
        check_len(a.rows(), y.len())?;
        self.schedule.validate()?;
        if self.num_subsets == 0 {
            return Err(Error::PartitionInvalid("need at least one subset".into()));
        }
        if let Some(x0) = &self.x0 {
            check_len(a.cols(), x0.len())?;
        }
        match self.algorithm.family() {
            Family::Hilbert => {}
            Family::Banach => self.banach_exponents().validate()?,
            Family::Modular => {
                let p = self.p_map.as_ref().ok_or_else(|| Error::ConfigInvalid("p map required".into()))?;
                let q = self.q_map.as_ref().ok_or_else(|| Error::ConfigInvalid("q map required".into()))?;
                check_len(a.cols(), p.len())?;
                check_len(a.rows(), q.len())?;
            }
        }
        if self.adapt_interval > 0 && self.algorithm.family() != Family::Modular {
            return Err(Error::ConfigInvalid(format!("{} does not use exponent maps to adapt", self.algorithm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub x: Signal,
    /// Final exponent maps of a modular run.
    pub p_map: Option<ExponentMap>,
    pub q_map: Option<ExponentMap>,
}

/// Hilbert initial step `0.95 / maxᵢ ‖Aᵢ‖²` over the subsets of `problem`.
pub fn hilbert_initial_step(problem: &PartitionedProblem, tol: f64, seed: u64) -> Result<f64> {
    let mut max = 0.0f64;
    for s in &problem.subsets {
        max = max.max(operator_norm(&s.operator, tol, DEFAULT_MAX_ITER, seed)?);
    }
    if max == 0.0 {
        return Err(Error::ConfigInvalid("operator is zero".into()));
    }
    Ok(0.95 / (max * max))
}

fn image_side(a: &LinearOperator) -> Option<usize> {
    if let Some(g) = a.geometry() {
        return Some(g.image_side);
    }
    let s = (a.cols() as f64).sqrt().round() as usize;
    (s * s == a.cols()).then_some(s)
}

struct Evaluator<'a> {
    truth: Option<&'a [f64]>,
    side: Option<usize>,
}

impl Evaluator<'_> {
    fn record(
        &self,
        epoch: usize,
        x: &[f64],
        objective: f64,
        step: f64,
        seconds: f64,
    ) -> Result<EpochRecord> {
        let (m, p, s) = match self.truth {
            Some(t) => {
                let s = match self.side {
                    Some(side) if side >= 11 && side * side == x.len() => Some(ssim(x, t)?),
                    _ => None,
                };
                (Some(mae(x, t)?), Some(psnr(x, t)?), s)
            }
            None => (None, None, None),
        };
        Ok(EpochRecord { epoch, objective, mae: m, psnr: p, ssim: s, step, seconds })
    }
}

/// Runs the configured algorithm, logging objective and metrics per epoch.
///
/// For the deterministic algorithms an epoch is one full-operator step.
/// `ground_truth` enables MAE/PSNR/SSIM columns.
pub fn run(
    config: &SolverConfig,
    a: &LinearOperator,
    y: &[f64],
    ground_truth: Option<&[f64]>,
    mut adapt: Option<&mut AdaptHook<'_>>,
) -> Result<RunOutput> {
    config.validate(a, y)?;
    if let Some(t) = ground_truth {
        check_len(a.cols(), t.len())?;
    }
    if config.adapt_interval > 0 && adapt.is_none() {
        return Err(Error::ConfigInvalid("adaptation interval set without an adaptation hook".into()));
    }

    let family = config.algorithm.family();
    let n_s = config.effective_subsets();
    let mut p_map = config.p_map.clone();
    let mut q_map = config.q_map.clone();
    let mut problem = if config.algorithm.is_stochastic() {
        Some(partition_views(a, y, if family == Family::Modular { q_map.as_ref() } else { None }, n_s)?)
    } else {
        None
    };

    let x0 = config.x0.as_ref().map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; a.cols()]);
    let mut state = SolverState::new(x0, config.seed);
    let exps = config.banach_exponents();
    let eval = Evaluator { truth: ground_truth, side: image_side(a) };
    let mut log = RunLog::default();
    let mut elapsed = Duration::ZERO;
    let mut order: Vec<usize> = (0..n_s).collect();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut mu = config.schedule.mu0;
        if config.sampling == Sampling::Permutation {
            order.shuffle(state.rng());
        }
        for j in 0..n_s {
            mu = config.schedule.step(state.k, n_s);
            match &problem {
                None => match family {
                    Family::Hilbert => landweber_step(&mut state, a, y, mu)?,
                    Family::Banach => dual_landweber_step(&mut state, a, y, mu, exps)?,
                    Family::Modular => modular_gd_step(
                        &mut state,
                        a,
                        y,
                        mu,
                        p_map.as_ref().expect("validated"),
                        q_map.as_ref().expect("validated"),
                    )?,
                },
                Some(prob) => {
                    let i = match config.sampling {
                        Sampling::WithReplacement => state.sample_subset(n_s),
                        Sampling::Permutation => order[j],
                    };
                    match family {
                        Family::Hilbert => {
                            let s = &prob.subsets[i];
                            landweber_step(&mut state, &s.operator, &s.data, mu)?
                        }
                        Family::Banach => banach_sgd_step(&mut state, prob, i, mu, exps)?,
                        Family::Modular => {
                            modular_sgd_step(&mut state, prob, i, mu, p_map.as_ref().expect("validated"))?
                        }
                    }
                }
            }
        }

        if let Some(index) = state.x().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }

        if config.adapt_interval > 0 && epoch % config.adapt_interval == 0 {
            let hook = adapt.as_mut().expect("checked above");
            let maps = hook(epoch, state.x())?;
            check_len(a.cols(), maps.p_map.len())?;
            p_map = Some(maps.p_map);
            if let Some(q) = maps.q_map {
                check_len(a.rows(), q.len())?;
                if let Some(prob) = problem.as_mut() {
                    for (s, rows) in prob.subsets.iter_mut().zip(&prob.partition.row_indices) {
                        s.q_map = Some(q.select(rows)?);
                    }
                }
                q_map = Some(q);
            }
            state.reset_dual();
        }
        elapsed += start.elapsed();

        let objective = match family {
            Family::Hilbert => objective_hilbert(a, y, state.x())?,
            Family::Banach => objective_banach(exps, a, y, state.x())?,
            Family::Modular => objective_modular(q_map.as_ref().expect("validated"), a, y, state.x())?,
        };
        log.records.push(eval.record(epoch, state.x(), objective, mu, elapsed.as_secs_f64())?);
    }

    Ok(RunOutput { log, x: Signal::new(state.into_x())?, p_map, q_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{radon_build, Geometry};

    fn small_problem() -> (LinearOperator, Vec<f64>, Vec<f64>) {
        let a = radon_build(&Geometry::parallel_beam(8, 0.25, 12, 12)).unwrap();
        let truth: Vec<f64> = (0..64).map(|i| if (i / 8 + i % 8) % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let y = a.apply(&truth).unwrap().into_inner();
        (a, y, truth)
    }

    #[test]
    fn names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("sgd3".parse::<Algorithm>().is_err());
    }

    #[test]
    fn zero_epochs_returns_start() {
        let (a, y, _) = small_problem();
        let mut cfg = SolverConfig::new(Algorithm::Sgd2, StepSchedule::constant(0.1));
        cfg.epochs = 0;
        cfg.num_subsets = 3;
        let out = run(&cfg, &a, &y, None, None).unwrap();
        assert!(out.log.is_empty());
        assert!(out.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logs_one_row_per_epoch_with_metrics() {
        let (a, y, truth) = small_problem();
        let mut cfg = SolverConfig::new(Algorithm::Sgd2, StepSchedule::decaying(0.5, 0.1, 0.51));
        cfg.epochs = 5;
        cfg.num_subsets = 4;
        let out = run(&cfg, &a, &y, Some(&truth), None).unwrap();
        assert_eq!(out.log.len(), 5);
        for (i, r) in out.log.records.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert!(r.mae.is_some() && r.psnr.is_some() && r.ssim.is_none());
        }
        let secs: Vec<f64> = out.log.records.iter().map(|r| r.seconds).collect();
        assert!(secs.windows(2).all(|w| w[1] >= w[0]));
        assert!((out.log.records[0].step - 0.5 / (1.0 + 0.1 * 0.75f64.powf(0.51))).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_iterates() {
        let (a, y, _) = small_problem();
        let p = ExponentMap::constant(1.3, a.cols()).unwrap();
        let q = ExponentMap::constant(1.6, a.rows()).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::SgdPnQn, StepSchedule::decaying(0.05, 0.1, 0.3));
        cfg.p_map = Some(p);
        cfg.q_map = Some(q);
        cfg.epochs = 4;
        cfg.num_subsets = 6;
        cfg.seed = 42;
        let a1 = run(&cfg, &a, &y, None, None).unwrap();
        let a2 = run(&cfg, &a, &y, None, None).unwrap();
        assert_eq!(a1.x, a2.x);
        cfg.seed = 43;
        let a3 = run(&cfg, &a, &y, None, None).unwrap();
        assert_ne!(a1.x, a3.x);
    }

    #[test]
    fn config_errors() {
        let (a, y, _) = small_problem();
        let cfg = SolverConfig::new(Algorithm::GdPnQn, StepSchedule::constant(0.1));
        assert!(matches!(run(&cfg, &a, &y, None, None), Err(Error::ConfigInvalid(_))));
        let mut cfg = SolverConfig::new(Algorithm::Sgd2, StepSchedule::constant(0.1));
        cfg.num_subsets = 13;
        assert!(matches!(run(&cfg, &a, &y, None, None), Err(Error::PartitionInvalid(_))));
        cfg.num_subsets = 2;
        cfg.adapt_interval = 1;
        assert!(matches!(run(&cfg, &a, &y, None, None), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn adaptation_replaces_maps() {
        let (a, y, _) = small_problem();
        let mut cfg = SolverConfig::new(Algorithm::SgdPnQn, StepSchedule::constant(0.02));
        cfg.p_map = Some(ExponentMap::constant(1.5, a.cols()).unwrap());
        cfg.q_map = Some(ExponentMap::constant(1.5, a.rows()).unwrap());
        cfg.epochs = 4;
        cfg.num_subsets = 3;
        cfg.adapt_interval = 2;
        let mut calls = Vec::new();
        let cols = a.cols();
        let mut hook = |epoch: usize, _x: &[f64]| -> Result<AdaptedMaps> {
            calls.push(epoch);
            Ok(AdaptedMaps { p_map: ExponentMap::constant(1.2, cols)?, q_map: None })
        };
        let out = run(&cfg, &a, &y, None, Some(&mut hook)).unwrap();
        assert_eq!(calls, vec![2, 4]);
        assert_eq!(out.p_map.unwrap().values()[0], 1.2);
    }
}
