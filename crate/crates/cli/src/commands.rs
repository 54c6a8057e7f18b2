//! Pipeline stages. Each reads its inputs from the `[io]` paths, writes its
//! outputs atomically and returns a one-line summary.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varlp::experiments::{generate_phantom, metrics, noise_level};
use varlp::exponents::{
    adaptation_hook, build_p_map, build_q_map, build_q_map_from_data, pilot_reconstruction,
};
use varlp::io::{
    read_exponent_map, read_matrix_csv, read_vector_csv, write_exponent_map, write_image_csv, write_matrix_csv,
    write_pgm, write_runlog,
};
use varlp::operators::{partition_views, radon_build, DEFAULT_TOL};
use varlp::solvers::{hilbert_initial_step, run, AdaptHook, Family, SolverConfig};
use varlp::{Error, LinearOperator, Result};

use crate::config::ExperimentConfig;

fn write_image(cfg: &ExperimentConfig, path: &Path, image: &[f64]) -> Result<()> {
    write_image_csv(path, image)?;
    if cfg.pgm()? {
        let side = (image.len() as f64).sqrt().round() as usize;
        write_pgm(&path.with_extension("pgm"), image, side, side)?;
    }
    Ok(())
}

/// Dense matrix from `io.matrix` when given, otherwise the Radon projector.
pub fn load_operator(cfg: &ExperimentConfig) -> Result<LinearOperator> {
    match cfg.path("matrix") {
        Some(p) => {
            let (data, rows, cols) = read_matrix_csv(&p)?;
            LinearOperator::from_dense(rows, cols, data)
        }
        None => radon_build(&cfg.geometry()?),
    }
}

fn sinogram_cols(a: &LinearOperator) -> usize {
    a.geometry().map_or(1, |g| g.num_detectors)
}

pub fn cmd_phantom(cfg: &ExperimentConfig) -> Result<String> {
    let side = cfg.geometry()?.image_side;
    let out = cfg.require_path("phantom")?;
    let x = generate_phantom(side)?;
    write_image(cfg, &out, &x)?;
    Ok(format!("phantom: {side}x{side} -> {}", out.display()))
}

pub fn cmd_project(cfg: &ExperimentConfig) -> Result<String> {
    let x = read_vector_csv(&cfg.require_path("phantom")?)?;
    let out = cfg.require_path("clean_sinogram")?;
    let a = load_operator(cfg)?;
    let y = a.apply(&x)?;
    write_matrix_csv(&out, &y, sinogram_cols(&a))?;
    Ok(format!("project: {} rays, {} nonzero weights -> {}", a.rows(), a.nnz(), out.display()))
}

pub fn cmd_noise(cfg: &ExperimentConfig) -> Result<String> {
    let (clean, _, cols) = read_matrix_csv(&cfg.require_path("clean_sinogram")?)?;
    let out = cfg.require_path("sinogram")?;
    let noisy = match cfg.noise()? {
        Some(model) => model.apply(&clean, &mut ChaCha8Rng::seed_from_u64(cfg.noise_seed()?))?.into_inner(),
        None => clean.clone(),
    };
    write_matrix_csv(&out, &noisy, cols)?;
    Ok(format!(
        "noise: {} ({} entries, relative level {:.4}) -> {}",
        cfg.raw("noise", "kind").unwrap_or("none"),
        noisy.len(),
        noise_level(&clean, &noisy)?,
        out.display()
    ))
}

pub fn cmd_maps(cfg: &ExperimentConfig) -> Result<String> {
    let y = read_vector_csv(&cfg.require_path("sinogram")?)?;
    let (p_out, q_out) = (cfg.require_path("p_map")?, cfg.require_path("q_map")?);
    let a = load_operator(cfg)?;
    let maps = cfg.maps()?;
    let pilot = cfg.pilot()?;
    let x = pilot_reconstruction(&a, &y, pilot.p, pilot.epochs, pilot.mu, pilot.num_subsets, pilot.seed)?;
    if let Some(path) = cfg.path("pilot") {
        write_image(cfg, &path, &x)?;
    }
    let p_map = build_p_map(&x, maps.p)?;
    let q_map = if maps.q_from_data { build_q_map_from_data(&y, maps.q)? } else { build_q_map(&a, &p_map, maps.q)? };
    write_exponent_map(&p_out, &p_map)?;
    write_exponent_map(&q_out, &q_map)?;
    Ok(format!(
        "maps: p in [{:.4}, {:.4}], q in [{:.4}, {:.4}] -> {}, {}",
        p_map.p_minus(),
        p_map.p_plus(),
        q_map.p_minus(),
        q_map.p_plus(),
        p_out.display(),
        q_out.display()
    ))
}

pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<String> {
    let y = read_vector_csv(&cfg.require_path("sinogram")?)?;
    let truth = cfg.path("phantom").map(|p| read_vector_csv(&p)).transpose()?;
    let (x_out, log_out) = (cfg.require_path("reconstruction")?, cfg.require_path("runlog")?);
    let s = cfg.solver()?;
    let a = load_operator(cfg)?;
    let family = s.algorithm.family();

    let mu0 = match s.mu0 {
        Some(mu) => mu,
        None => {
            let n_s = if s.algorithm.is_stochastic() { s.num_subsets } else { 1 };
            hilbert_initial_step(&partition_views(&a, &y, None, n_s)?, DEFAULT_TOL, s.seed)?
        }
    };
    let mut config = SolverConfig::new(s.algorithm, s.schedule(mu0));
    config.p = s.p;
    config.q = s.q;
    config.r = s.r;
    config.num_subsets = s.num_subsets;
    config.epochs = s.epochs;
    config.seed = s.seed;
    config.adapt_interval = s.adapt_interval;
    config.sampling = s.sampling;
    if family == Family::Modular {
        config.p_map = Some(read_exponent_map(&cfg.require_path("p_map")?)?);
        config.q_map = Some(read_exponent_map(&cfg.require_path("q_map")?)?);
    }

    let maps = cfg.maps()?;
    let mut hook = adaptation_hook(&a, maps.p, s.adapt_q.then_some(maps.q));
    let adapt: Option<&mut AdaptHook<'_>> = if s.adapt_interval > 0 { Some(&mut hook) } else { None };
    let out = run(&config, &a, &y, truth.as_deref(), adapt)?;

    write_image(cfg, &x_out, &out.x)?;
    write_runlog(&log_out, &out.log)?;
    if s.adapt_interval > 0 {
        if let (Some(p), Some(path)) = (&out.p_map, cfg.path("p_map")) {
            write_exponent_map(&adapted(&path), p)?;
        }
    }

    let seconds = out.log.records.last().map_or(0.0, |r| r.seconds);
    let best = out
        .log
        .records
        .iter()
        .filter_map(|r| r.psnr.map(|v| (v, r.epoch)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let quality = best.map_or(String::new(), |(v, e)| format!(", best PSNR {v:.2} dB at epoch {e}"));
    Ok(format!(
        "reconstruct: {} {} epochs, mu0 {mu0:.4e}{quality}, {seconds:.2}s -> {}",
        s.algorithm,
        s.epochs,
        x_out.display()
    ))
}

fn adapted(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_adapted.csv"))
}

pub fn cmd_metrics(cfg: &ExperimentConfig) -> Result<String> {
    let x = read_vector_csv(&cfg.require_path("reconstruction")?)?;
    let truth = read_vector_csv(&cfg.require_path("phantom")?)?;
    if x.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: x.len() });
    }
    let m = metrics(&x, &truth)?;
    let line = format!("mae={} psnr={} ssim={}", m.mae, m.psnr, m.ssim);
    if let Some(path) = cfg.path("metrics") {
        varlp::io::write_atomic(&path, |w| writeln!(w, "mae,psnr,ssim\n{},{},{}", m.mae, m.psnr, m.ssim))?;
    }
    Ok(format!("metrics: {line}"))
}
