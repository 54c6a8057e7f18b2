//! INI-style experiment configuration.
//!
//! ```text
//! [geometry]
//! image_side = 128
//! num_angles = 90
//!
//! [solver]
//! algorithm = sgd_pnqn
//! mu0 = 0.2
//! epochs = 60
//! ```
//!
//! Keys are checked against a fixed schema; relative paths in `[io]` are
//! resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use varlp::experiments::NoiseModel;
use varlp::exponents::InterpolationSpec;
use varlp::solvers::{gamma_for_exponent, Algorithm, Family, Sampling, StepSchedule};
use varlp::{Error, Geometry, Result};

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "geometry",
        &["image_side", "pixel_size", "num_angles", "angle_start", "angle_step", "num_detectors", "detector_spacing"],
    ),
    (
        "noise",
        &[
            "kind",
            "seed",
            "fraction",
            "low",
            "high",
            "mean",
            "variance",
            "threshold",
            "background_kind",
            "background_fraction",
            "background_low",
            "background_high",
            "background_mean",
            "background_variance",
            "foreground_kind",
            "foreground_fraction",
            "foreground_low",
            "foreground_high",
            "foreground_mean",
            "foreground_variance",
        ],
    ),
    (
        "solver",
        &[
            "algorithm",
            "p",
            "q",
            "r",
            "mu0",
            "schedule",
            "decay_c",
            "gamma",
            "num_subsets",
            "epochs",
            "seed",
            "adapt_interval",
            "adapt_q",
            "sampling",
        ],
    ),
    ("maps", &["p_lower", "p_upper", "q_lower", "q_upper", "q_source"]),
    ("pilot", &["p", "epochs", "mu", "num_subsets", "seed"]),
    (
        "io",
        &[
            "matrix",
            "phantom",
            "clean_sinogram",
            "sinogram",
            "pilot",
            "p_map",
            "q_map",
            "reconstruction",
            "runlog",
            "metrics",
            "pgm",
        ],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
}

/// Parsed configuration plus the directory used for relative paths.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    base_dir: PathBuf,
    entries: BTreeMap<(String, String), Entry>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

fn check_key(section: &str, key: &str) -> Result<()> {
    let keys = SCHEMA
        .iter()
        .find(|(s, _)| *s == section)
        .map(|(_, k)| *k)
        .ok_or_else(|| invalid(format!("unknown section [{section}]")))?;
    if !keys.contains(&key) {
        return Err(invalid(format!("unknown key {section}.{key}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base_dir: PathBuf, name: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = strip_inline_comment(raw).trim();
            let origin = format!("{name}:{}", n + 1);
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let s = rest
                    .strip_suffix(']')
                    .ok_or_else(|| invalid(format!("{origin}: malformed section header")))?
                    .trim();
                if !SCHEMA.iter().any(|(k, _)| *k == s) {
                    return Err(invalid(format!("{origin}: unknown section [{s}]")));
                }
                section = Some(s.to_string());
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| invalid(format!("{origin}: expected key = value")))?;
            let sec = section.as_ref().ok_or_else(|| invalid(format!("{origin}: key outside any section")))?;
            let key = key.trim();
            check_key(sec, key).map_err(|e| invalid(format!("{origin}: {}", strip(e))))?;
            let k = (sec.clone(), key.to_string());
            if entries.contains_key(&k) {
                return Err(invalid(format!("{origin}: duplicate key {sec}.{key}")));
            }
            entries.insert(k, Entry { value: value.trim().to_string(), origin });
        }
        Ok(Self { base_dir, entries })
    }

    /// Applies `section.key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (name, value) in overrides {
            let (sec, key) =
                name.split_once('.').ok_or_else(|| invalid(format!("override {name:?} is not section.key")))?;
            check_key(sec, key)?;
            self.entries.insert(
                (sec.to_string(), key.to_string()),
                Entry { value: value.clone(), origin: format!("--{name}") },
            );
        }
        Ok(())
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.value.as_str())
    }

    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| invalid(format!("{}: {section}.{key} = {:?}: {err}", e.origin, e.value))),
        }
    }

    fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| invalid(format!("missing {section}.{key}")))
    }

    fn flag(&self, section: &str, key: &str) -> Result<bool> {
        match self.raw(section, key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(invalid(format!("{section}.{key} = {v:?} is not a boolean"))),
        }
    }

    /// Resolved `[io]` path, if configured.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw("io", key).map(|p| self.base_dir.join(p))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| invalid(format!("missing io.{key}")))
    }

    /// Whether image outputs also get a `.pgm` sibling.
    pub fn pgm(&self) -> Result<bool> {
        self.flag("io", "pgm")
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let side: usize = self.require("geometry", "image_side")?;
        let pixel: f64 = self.get("geometry", "pixel_size")?.unwrap_or(1.0 / side.max(1) as f64);
        let angles: usize = self.require("geometry", "num_angles")?;
        let detectors: usize = self.get("geometry", "num_detectors")?.unwrap_or(side);
        let mut g = Geometry::parallel_beam(side, pixel, angles, detectors);
        if let Some(v) = self.get("geometry", "angle_start")? {
            g.angle_start = v;
        }
        if let Some(v) = self.get("geometry", "angle_step")? {
            g.angle_step = v;
        }
        if let Some(v) = self.get("geometry", "detector_spacing")? {
            g.detector_spacing = v;
        }
        g.validate()?;
        Ok(g)
    }

    pub fn noise_seed(&self) -> Result<u64> {
        Ok(self.get("noise", "seed")?.unwrap_or(0))
    }

    /// `None` when `kind` is absent or `none`.
    pub fn noise(&self) -> Result<Option<NoiseModel>> {
        let kind = self.raw("noise", "kind").unwrap_or("none");
        let model = match kind {
            "none" => return Ok(None),
            "split" => NoiseModel::Split {
                background: Box::new(self.simple_noise("background_")?),
                foreground: Box::new(self.simple_noise("foreground_")?),
                threshold: self.get("noise", "threshold")?,
            },
            _ => self.simple_noise("")?,
        };
        model.validate()?;
        Ok(Some(model))
    }

    fn simple_noise(&self, prefix: &str) -> Result<NoiseModel> {
        let key = |k: &str| format!("{prefix}{k}");
        let kind = self.raw("noise", &key("kind")).ok_or_else(|| invalid(format!("missing noise.{}", key("kind"))))?;
        Ok(match kind {
            "salt_pepper" => NoiseModel::SaltPepper {
                fraction: self.require("noise", &key("fraction"))?,
                low: self.get("noise", &key("low"))?,
                high: self.get("noise", &key("high"))?,
            },
            "speckle" => NoiseModel::Speckle {
                mean: self.get("noise", &key("mean"))?.unwrap_or(0.0),
                variance: self.require("noise", &key("variance"))?,
            },
            "gaussian" => NoiseModel::Gaussian {
                mean: self.get("noise", &key("mean"))?.unwrap_or(0.0),
                variance: self.require("noise", &key("variance"))?,
            },
            other => return Err(invalid(format!("unknown noise kind {other:?}"))),
        })
    }

    pub fn solver(&self) -> Result<SolverSettings> {
        let algorithm: Algorithm = self.require("solver", "algorithm")?;
        let (p, q) = match algorithm.family() {
            Family::Hilbert => (2.0, 2.0),
            _ => {
                let p: f64 = self.get("solver", "p")?.unwrap_or(2.0);
                (p, self.get("solver", "q")?.unwrap_or(p))
            }
        };
        let mu0 = match self.raw("solver", "mu0") {
            Some("auto") if algorithm.family() == Family::Hilbert => None,
            Some("auto") => return Err(invalid("solver.mu0 = auto is only available for gd2 and sgd2")),
            _ => Some(self.require::<f64>("solver", "mu0")?),
        };
        let maps = self.maps()?;
        let gamma = match self.raw("solver", "gamma") {
            None | Some("auto") => gamma_for_exponent(match algorithm.family() {
                Family::Modular => maps.p.lower,
                _ => p,
            }),
            _ => self.require("solver", "gamma")?,
        };
        let decay_c = self.get("solver", "decay_c")?.unwrap_or(0.1);
        let constant = match self.raw("solver", "schedule").unwrap_or("decaying") {
            "decaying" => false,
            "constant" => true,
            other => return Err(invalid(format!("unknown schedule {other:?}"))),
        };
        let sampling = match self.raw("solver", "sampling").unwrap_or("with_replacement") {
            "with_replacement" => Sampling::WithReplacement,
            "permutation" => Sampling::Permutation,
            other => return Err(invalid(format!("unknown sampling {other:?}"))),
        };
        let s = SolverSettings {
            algorithm,
            p,
            q,
            r: self.get("solver", "r")?,
            mu0,
            decay_c,
            gamma,
            constant,
            num_subsets: self.get("solver", "num_subsets")?.unwrap_or(1),
            epochs: self.require("solver", "epochs")?,
            seed: self.get("solver", "seed")?.unwrap_or(0),
            adapt_interval: self.get("solver", "adapt_interval")?.unwrap_or(0),
            adapt_q: self.flag("solver", "adapt_q")?,
            sampling,
        };
        s.schedule(s.mu0.unwrap_or(1.0)).validate()?;
        if s.num_subsets == 0 {
            return Err(invalid("solver.num_subsets must be at least 1"));
        }
        Ok(s)
    }

    pub fn maps(&self) -> Result<MapSettings> {
        let p = InterpolationSpec::new(
            self.get("maps", "p_lower")?.unwrap_or(1.05),
            self.get("maps", "p_upper")?.unwrap_or(1.25),
        )?;
        let q = InterpolationSpec::new(
            self.get("maps", "q_lower")?.unwrap_or(p.lower),
            self.get("maps", "q_upper")?.unwrap_or(p.upper),
        )?;
        let q_from_data = match self.raw("maps", "q_source").unwrap_or("projection") {
            "projection" => false,
            "data" => true,
            other => return Err(invalid(format!("unknown q_source {other:?}"))),
        };
        Ok(MapSettings { p, q, q_from_data })
    }

    pub fn pilot(&self) -> Result<PilotSettings> {
        let s = PilotSettings {
            p: self.get("pilot", "p")?.unwrap_or(1.1),
            epochs: self.get("pilot", "epochs")?.unwrap_or(5),
            mu: self.get("pilot", "mu")?.unwrap_or(1.0),
            num_subsets: match self.get("pilot", "num_subsets")? {
                Some(n) => n,
                None => self.get("solver", "num_subsets")?.unwrap_or(1),
            },
            seed: self.get("pilot", "seed")?.unwrap_or(0),
        };
        if !(s.mu > 0.0 && s.mu.is_finite()) || s.num_subsets == 0 {
            return Err(invalid("pilot.mu must be positive and pilot.num_subsets at least 1"));
        }
        Ok(s)
    }
}

// A comment after a value needs whitespace before the marker.
fn strip_inline_comment(line: &str) -> &str {
    let b = line.as_bytes();
    (1..b.len())
        .find(|&i| (b[i] == b'#' || b[i] == b';') && b[i - 1].is_ascii_whitespace())
        .map_or(line, |i| &line[..i])
}

fn strip(e: Error) -> String {
    match e {
        Error::ConfigInvalid(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub algorithm: Algorithm,
    pub p: f64,
    pub q: f64,
    pub r: Option<f64>,
    /// `None` means derive from the operator norm.
    pub mu0: Option<f64>,
    pub decay_c: f64,
    pub gamma: f64,
    pub constant: bool,
    pub num_subsets: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adapt_interval: usize,
    pub adapt_q: bool,
    pub sampling: Sampling,
}

impl SolverSettings {
    pub fn schedule(&self, mu0: f64) -> StepSchedule {
        if self.constant {
            StepSchedule::constant(mu0)
        } else {
            StepSchedule::decaying(mu0, self.decay_c, self.gamma)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSettings {
    pub p: InterpolationSpec,
    pub q: InterpolationSpec,
    pub q_from_data: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSettings {
    pub p: f64,
    pub epochs: usize,
    pub mu: f64,
    pub num_subsets: usize,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, PathBuf::from("/base"), "test.ini")
    }

    #[test]
    fn parses_sections_and_defaults() {
        let c = cfg("# comment\n[geometry]\nimage_side = 32  # pixels\nnum_angles = 10 ; views\n\n[io]\nphantom = out/ph.csv\n").unwrap();
        let g = c.geometry().unwrap();
        assert_eq!((g.image_side, g.num_angles, g.num_detectors), (32, 10, 32));
        assert_eq!(g.angle_step, 18.0);
        assert_eq!(c.path("phantom").unwrap(), PathBuf::from("/base/out/ph.csv"));
        assert!(c.path("sinogram").is_none());
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        assert!(cfg("[geometry]\nimage_sid = 3\n").is_err());
        assert!(cfg("[geom]\n").is_err());
        assert!(cfg("image_side = 3\n").is_err());
        assert!(cfg("[geometry]\nimage_side\n").is_err());
        assert!(cfg("[geometry]\nimage_side = 3\nimage_side = 4\n").is_err());
        let mut c = cfg("").unwrap();
        assert!(c.apply_overrides(&[("solver.epoch".into(), "3".into())]).is_err());
        assert!(c.apply_overrides(&[("epochs".into(), "3".into())]).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = cfg("[solver]\nalgorithm = sgd2\nmu0 = auto\nepochs = 5\n").unwrap();
        c.apply_overrides(&[("solver.epochs".into(), "40".into())]).unwrap();
        let s = c.solver().unwrap();
        assert_eq!(s.epochs, 40);
        assert_eq!(s.mu0, None);
        assert_eq!((s.p, s.q), (2.0, 2.0));
        assert!((s.gamma - 0.51).abs() < 1e-15);
    }

    #[test]
    fn solver_errors() {
        assert!(cfg("[solver]\nalgorithm = sgd_p\nmu0 = auto\nepochs = 5\n").unwrap().solver().is_err());
        assert!(cfg("[solver]\nalgorithm = sgd_q\nmu0 = 1\nepochs = 5\n").unwrap().solver().is_err());
        assert!(cfg("[solver]\nalgorithm = sgd2\nmu0 = -1\nepochs = 5\n").unwrap().solver().is_err());
        assert!(cfg("[solver]\nalgorithm = sgd2\nmu0 = 1\n").unwrap().solver().is_err());
        assert!(cfg("[solver]\nalgorithm = sgd2\nmu0 = 1\nepochs = x\n").unwrap().solver().is_err());
    }

    #[test]
    fn modular_gamma_follows_lower_map_bound() {
        let c = cfg("[solver]\nalgorithm = sgd_pnqn\nmu0 = 0.2\nepochs = 5\n[maps]\np_lower = 1.1\np_upper = 1.3\n")
            .unwrap();
        let s = c.solver().unwrap();
        assert!((s.gamma - gamma_for_exponent(1.1)).abs() < 1e-15);
        let m = c.maps().unwrap();
        assert_eq!((m.q.lower, m.q.upper), (1.1, 1.3));
    }

    #[test]
    fn noise_models() {
        let c = cfg("[noise]\nkind = salt_pepper\nfraction = 0.15\n").unwrap();
        assert_eq!(c.noise().unwrap(), Some(NoiseModel::SaltPepper { fraction: 0.15, low: None, high: None }));
        let c = cfg("[noise]\nkind = split\nbackground_kind = salt_pepper\nbackground_fraction = 0.1\n\
                     foreground_kind = speckle\nforeground_variance = 0.01\n")
        .unwrap();
        assert!(matches!(c.noise().unwrap(), Some(NoiseModel::Split { threshold: None, .. })));
        assert_eq!(cfg("").unwrap().noise().unwrap(), None);
        assert!(cfg("[noise]\nkind = salt_pepper\nfraction = 2\n").unwrap().noise().is_err());
        assert!(cfg("[noise]\nkind = poisson\n").unwrap().noise().is_err());
    }
}
