//! Run configuration: a flat `key = value` file (TOML syntax) plus command-line
//! overrides. Unknown keys are rejected.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `field` | ground-truth field in the native format | |
//! | `trajectories` | trajectory file in the native CSV format | |
//! | `ngsim` | NGSIM trajectory extract | |
//! | `lane` | NGSIM lane to keep | 2 |
//! | `x_min`, `t_min`, `dx`, `dt`, `n_x`, `n_t` | grid for trajectory input and `synth` | 0, 0, 10, 1, -, - |
//! | `method` | `asm` or `admm` | `admm` |
//! | `detectors` | number of equally spaced detector rows | 4 |
//! | `detector_rows` | explicit detector rows (wins over `detectors`) | |
//! | `wave_speeds` | km/h | `[80, -15]` |
//! | `kernel` | `exponential` or `gaussian` | `exponential` |
//! | `sigma`, `tau` | kernel widths, m and s | half detector spacing, half `dt` |
//! | `cutoff` | kernel support in widths | 6 |
//! | `v_thr`, `delta_v` | ASM weight parameters, km/h | 60, 20 |
//! | `beta`, `eps_abs`, `eps_rel`, `max_iters` | ADMM | 1, 1e-6, 1e-4, 5000 |
//! | `out` | output directory | `out` |
//! | `heatmap`, `v_max` | write PPM heatmaps and their full-scale speed | false, 100 |
//! | `trace` | write the ADMM iteration trace | false |
//! | `counts` | detector counts for `sweep-coverage` | `[1..7]` |
//! | `pairs` | `[[c_cong, c_free], ...]` for `sweep-wavespeeds` | `[[-15, 80]]` |
//! | `free_speed`, `congested_speed`, `noise_std`, `seed` | `synth` | 80, 20, 0, 0 |
//! | `bands` | `synth` bands `[[start_x, start_t, speed, half_width], ...]` | `[]` |

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::admm::AdmmParams;
use crate::asm::AsmParams;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{KernelShape, DEFAULT_CUTOFF};
use crate::pipeline::{EstimationConfig, Method};
use crate::synth::{SyntheticSpec, WaveSegment};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub ngsim: Option<PathBuf>,
    pub lane: Option<u32>,

    pub x_min: Option<f64>,
    pub t_min: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,

    pub method: Option<Method>,
    pub detectors: Option<usize>,
    pub detector_rows: Option<Vec<usize>>,
    pub wave_speeds: Option<Vec<f64>>,
    pub kernel: Option<KernelShape>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub cutoff: Option<f64>,
    pub v_thr: Option<f64>,
    pub delta_v: Option<f64>,
    pub beta: Option<f64>,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub max_iters: Option<usize>,

    pub out: Option<PathBuf>,
    pub heatmap: Option<bool>,
    pub v_max: Option<f64>,
    pub trace: Option<bool>,

    pub counts: Option<Vec<usize>>,
    pub pairs: Option<Vec<(f64, f64)>>,

    pub free_speed: Option<f64>,
    pub congested_speed: Option<f64>,
    pub noise_std: Option<f64>,
    pub seed: Option<u64>,
    pub bands: Option<Vec<[f64; 4]>>,
}

/// Where the ground truth comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Field(PathBuf),
    Trajectories(PathBuf),
    Ngsim { path: PathBuf, lane: u32 },
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file. Relative input paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.field, &mut cfg.trajectories, &mut cfg.ngsim].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `other` replace ours.
    pub fn merge(mut self, other: RunConfig) -> Self {
        overlay!(self, other;
            field, trajectories, ngsim, lane, x_min, t_min, dx, dt, n_x, n_t,
            method, detectors, detector_rows, wave_speeds, kernel, sigma, tau, cutoff,
            v_thr, delta_v, beta, eps_abs, eps_rel, max_iters, out, heatmap, v_max, trace,
            counts, pairs, free_speed, congested_speed, noise_std, seed, bands,
        );
        self
    }

    pub fn input(&self) -> Result<InputSource> {
        let given: Vec<&str> = [
            ("field", self.field.is_some()),
            ("trajectories", self.trajectories.is_some()),
            ("ngsim", self.ngsim.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, set)| set.then_some(k))
        .collect();
        match given.as_slice() {
            ["field"] => Ok(InputSource::Field(self.field.clone().expect("checked"))),
            ["trajectories"] => Ok(InputSource::Trajectories(self.trajectories.clone().expect("checked"))),
            ["ngsim"] => Ok(InputSource::Ngsim {
                path: self.ngsim.clone().expect("checked"),
                lane: self.lane.unwrap_or(2),
            }),
            [] => Err(Error::Config("no input: set one of `field`, `trajectories`, `ngsim`".into())),
            many => Err(Error::Config(format!("exactly one input source allowed, got {}", many.join(", ")))),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let n_x = self.n_x.ok_or_else(|| Error::Config("missing key `n_x`".into()))?;
        let n_t = self.n_t.ok_or_else(|| Error::Config("missing key `n_t`".into()))?;
        GridSpec::new(
            self.x_min.unwrap_or(0.0),
            self.t_min.unwrap_or(0.0),
            self.dx.unwrap_or(10.0),
            self.dt.unwrap_or(1.0),
            n_x,
            n_t,
        )
    }

    pub fn method(&self) -> Method {
        self.method.unwrap_or(Method::Admm)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn estimation(&self) -> Result<EstimationConfig> {
        let defaults = EstimationConfig::default();
        let cfg = EstimationConfig {
            wave_speeds: self.wave_speeds.clone().unwrap_or(defaults.wave_speeds),
            sigma: self.sigma,
            tau: self.tau,
            kernel_shape: self.kernel.unwrap_or_default(),
            cutoff: self.cutoff.unwrap_or(DEFAULT_CUTOFF),
            asm: AsmParams {
                v_thr: self.v_thr.unwrap_or(defaults.asm.v_thr),
                delta_v: self.delta_v.unwrap_or(defaults.asm.delta_v),
            },
            admm: AdmmParams {
                beta: self.beta.unwrap_or(defaults.admm.beta),
                eps_abs: self.eps_abs.unwrap_or(defaults.admm.eps_abs),
                eps_rel: self.eps_rel.unwrap_or(defaults.admm.eps_rel),
                max_iters: self.max_iters.unwrap_or(defaults.admm.max_iters),
            },
        };
        if cfg.wave_speeds.is_empty() {
            return Err(Error::Config("`wave_speeds` must not be empty".into()));
        }
        if cfg.wave_speeds.iter().any(|c| *c == 0.0 || !c.is_finite()) {
            return Err(Error::Config("`wave_speeds` must be finite and nonzero".into()));
        }
        for (key, v) in [("sigma", cfg.sigma), ("tau", cfg.tau)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("`{key}` must be positive, got {v}")));
                }
            }
        }
        if !(cfg.cutoff > 0.0 && cfg.cutoff.is_finite()) {
            return Err(Error::Config(format!("`cutoff` must be positive, got {}", cfg.cutoff)));
        }
        cfg.asm.validate().map_err(config_err)?;
        cfg.admm.validate().map_err(config_err)?;
        Ok(cfg)
    }

    pub fn synthetic(&self) -> Result<SyntheticSpec> {
        let spec = SyntheticSpec {
            grid: self.grid()?,
            free_speed: self.free_speed.unwrap_or(80.0),
            congested_speed: self.congested_speed.unwrap_or(20.0),
            wave_segments: self
                .bands
                .iter()
                .flatten()
                .map(|&[start_x, start_t, speed, half_width]| WaveSegment {
                    start_x,
                    start_t,
                    speed,
                    half_width,
                })
                .collect(),
            noise_std: self.noise_std.unwrap_or(0.0),
            seed: self.seed.unwrap_or(0),
        };
        spec.validate().map_err(config_err)?;
        Ok(spec)
    }

    pub fn v_max(&self) -> f64 {
        self.v_max.unwrap_or(100.0)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("`{name}`: {reason}")),
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let cfg = RunConfig::parse(
            r#"
            field = "truth.txt"
            method = "asm"
            detectors = 4
            wave_speeds = [80, -15]
            pairs = [[-20, 90], [-17.5, 80]]
            bands = [[200, 0, -15, 30]]
            kernel = "gaussian"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.method, Some(Method::Asm));
        assert_eq!(cfg.wave_speeds, Some(vec![80.0, -15.0]));
        assert_eq!(cfg.pairs, Some(vec![(-20.0, 90.0), (-17.5, 80.0)]));
        assert_eq!(cfg.kernel, Some(KernelShape::Gaussian));
        assert_eq!(cfg.input().unwrap(), InputSource::Field("truth.txt".into()));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("bta = 1.0").unwrap_err();
        assert!(err.to_string().contains("bta"), "{err}");
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::parse("beta = 2.0\nmethod = \"asm\"").unwrap();
        let flags = RunConfig {
            beta: Some(0.5),
            ..Default::default()
        };
        let merged = file.merge(flags);
        assert_eq!(merged.beta, Some(0.5));
        assert_eq!(merged.method, Some(Method::Asm));
    }

    #[test]
    fn exactly_one_input() {
        assert!(RunConfig::default().input().is_err());
        let two = RunConfig::parse("field = \"a\"\ntrajectories = \"b\"").unwrap();
        assert!(two.input().unwrap_err().to_string().contains("exactly one"));
    }

    #[test]
    fn estimation_defaults_and_validation() {
        let cfg = RunConfig::default().estimation().unwrap();
        assert_eq!(cfg, EstimationConfig::default());
        let bad = RunConfig {
            wave_speeds: Some(vec![]),
            ..Default::default()
        };
        assert!(bad.estimation().is_err());
        let bad = RunConfig {
            beta: Some(0.0),
            ..Default::default()
        };
        assert!(bad.estimation().unwrap_err().to_string().contains("beta"));
    }
}
