//! End-to-end estimation: observations → a priori bank → ASM or ADMM fusion.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmParams, AdmmResult};
use crate::asm::{self, AsmParams};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationMask, SpeedField};
use crate::kernel::{build_priori_bank, KernelParams, KernelShape, PrioriBank, DEFAULT_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Asm,
    Admm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Asm => "asm",
            Method::Admm => "admm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asm" => Ok(Method::Asm),
            "admm" => Ok(Method::Admm),
            other => Err(Error::param("method", format!("expected `asm` or `admm`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything except the data needed to run one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    /// km/h; for ASM exactly `[free > 0, cong < 0]`.
    pub wave_speeds: Vec<f64>,
    /// metres; defaults to half the average detector spacing.
    pub sigma: Option<f64>,
    /// seconds; defaults to half a grid column.
    pub tau: Option<f64>,
    pub kernel_shape: KernelShape,
    pub cutoff: f64,
    pub asm: AsmParams,
    pub admm: AdmmParams,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            wave_speeds: vec![80.0, -15.0],
            sigma: None,
            tau: None,
            kernel_shape: KernelShape::Exponential,
            cutoff: DEFAULT_CUTOFF,
            asm: AsmParams::default(),
            admm: AdmmParams::default(),
        }
    }
}

impl EstimationConfig {
    /// Kernel parameters for a given grid and detector layout.
    pub fn kernel_params(&self, grid: &GridSpec, mask: &ObservationMask) -> Result<KernelParams> {
        let (sigma, tau) = KernelParams::default_widths(grid, mask.observed_rows().len());
        KernelParams::new(
            self.sigma.unwrap_or(sigma),
            self.tau.unwrap_or(tau),
            self.kernel_shape,
            self.cutoff,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub method: Method,
    pub field: SpeedField,
    /// One weight matrix per a priori field, in bank order.
    pub weights: Vec<Array2<f64>>,
    pub bank: PrioriBank,
    pub kernel: KernelParams,
    /// Solver details for ADMM runs.
    pub admm: Option<AdmmResult>,
}

/// Smooths `observed` (missing outside `mask`) along the configured wave speeds and
/// fuses the a priori fields with the chosen method.
pub fn estimate(observed: &SpeedField, mask: &ObservationMask, method: Method, config: &EstimationConfig) -> Result<Estimate> {
    let kernel = config.kernel_params(observed.grid(), mask)?;
    let bank = build_priori_bank(observed, mask, &config.wave_speeds, &kernel)?;
    fuse_bank(observed, mask, bank, kernel, method, config)
}

/// Fusion step alone, for callers that already hold a bank.
pub fn fuse_bank(
    observed: &SpeedField,
    mask: &ObservationMask,
    bank: PrioriBank,
    kernel: KernelParams,
    method: Method,
    config: &EstimationConfig,
) -> Result<Estimate> {
    match method {
        Method::Asm => {
            let est = asm::asm_estimate(&bank, &config.asm)?;
            let w_free = est.w_cong.mapv(|w| 1.0 - w);
            Ok(Estimate {
                method,
                field: est.field,
                weights: vec![w_free, est.w_cong],
                bank,
                kernel,
                admm: None,
            })
        }
        Method::Admm => {
            let res = admm::solve(observed, mask, &bank, &config.admm)?;
            Ok(Estimate {
                method,
                field: res.fused_field.clone(),
                weights: res.weights.as_slice().to_vec(),
                bank,
                kernel,
                admm: Some(res),
            })
        }
    }
}
