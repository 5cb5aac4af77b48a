//! A priori speed fields: anisotropic kernel smoothing of the observed cells along
//! a characteristic wave speed.
//!
//! For an output cell centred at `(x, t)` and a wave speed `c`, every observation
//! `(x_n, t_n, v_n)` contributes `phi(x - x_n, t - t_n - (x - x_n)/c) * v_n`, and the
//! sum is divided by the sum of the kernel weights. Observations are the centres of
//! observed cells. Wave speeds are given in km/h and converted to m/s.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationMask, SpeedField};

pub const KMH_PER_MS: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    /// `exp(-(|dx|/sigma + |dt|/tau))`
    #[default]
    Exponential,
    /// `exp(-(dx^2/(2 sigma^2) + dt^2/(2 tau^2)))`
    Gaussian,
}

impl std::str::FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(KernelShape::Exponential),
            "gaussian" => Ok(KernelShape::Gaussian),
            other => Err(Error::param("kernel", format!("unknown kernel shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Space smoothing width, metres.
    pub sigma: f64,
    /// Time smoothing width, seconds.
    pub tau: f64,
    pub shape: KernelShape,
    /// The kernel is zero once `|dx|/sigma` or `|dt|/tau` exceeds this.
    pub cutoff: f64,
}

pub const DEFAULT_CUTOFF: f64 = 6.0;

impl KernelParams {
    pub fn new(sigma: f64, tau: f64, shape: KernelShape, cutoff: f64) -> Result<Self> {
        let params = KernelParams {
            sigma,
            tau,
            shape,
            cutoff,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("tau", self.tau), ("cutoff", self.cutoff)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Half the average detector spacing (road length over detector count) and
    /// half the sampling interval (one grid column).
    pub fn default_widths(grid: &GridSpec, detector_count: usize) -> (f64, f64) {
        let spacing = grid.length() / detector_count.max(1) as f64;
        (spacing / 2.0, grid.dt / 2.0)
    }
}

/// Kernel weight for a spatial offset `dx` (m) and a wave-shifted time offset `dt_shifted` (s).
pub fn kernel_weight(dx: f64, dt_shifted: f64, params: &KernelParams) -> f64 {
    let sx = dx.abs() / params.sigma;
    let st = dt_shifted.abs() / params.tau;
    if sx > params.cutoff || st > params.cutoff {
        return 0.0;
    }
    match params.shape {
        KernelShape::Exponential => (-(sx + st)).exp(),
        KernelShape::Gaussian => (-0.5 * (sx * sx + st * st)).exp(),
    }
}

struct ObservedRow<'a> {
    x: f64,
    values: ndarray::ArrayView1<'a, f64>,
    mask: ndarray::ArrayView1<'a, bool>,
}

/// Smooths the observed cells of `observed` along wave speed `c_kmh`.
///
/// Cells whose kernel neighbourhood is empty take the value of the observation
/// closest in scaled distance `|dx|/sigma + |dt_shifted|/tau`.
pub fn smooth_along_wave(
    observed: &SpeedField,
    mask: &ObservationMask,
    c_kmh: f64,
    params: &KernelParams,
) -> Result<SpeedField> {
    if c_kmh == 0.0 || !c_kmh.is_finite() {
        return Err(Error::ZeroWaveSpeed);
    }
    params.validate()?;
    let grid = *observed.grid();
    grid.ensure_same(mask.grid(), "observed field and mask")?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let values = observed.values();
    if values
        .iter()
        .zip(mask.mask().iter())
        .any(|(v, m)| *m && !v.is_finite())
    {
        return Err(Error::MissingValues("observed cell without a speed value".into()));
    }

    let c = c_kmh / KMH_PER_MS;
    let rows: Vec<ObservedRow> = mask
        .observed_rows()
        .into_iter()
        .map(|j| ObservedRow {
            x: grid.x_center(j),
            values: values.row(j),
            mask: mask.mask().row(j),
        })
        .collect();

    let reach_x = params.cutoff * params.sigma;
    let reach_t = params.cutoff * params.tau;
    let last_col = grid.n_t as f64 - 1.0;

    let mut out = Array2::zeros(grid.shape());
    for j in 0..grid.n_x {
        let x = grid.x_center(j);
        for k in 0..grid.n_t {
            let t = grid.t_center(k);
            let mut num = 0.0;
            let mut den = 0.0;
            for row in &rows {
                let dx = x - row.x;
                if dx.abs() > reach_x {
                    continue;
                }
                let shift = dx / c;
                // columns whose centre can fall inside the time cutoff, padded by one
                let lo = ((t - shift - reach_t - grid.t_min) / grid.dt - 0.5).floor() - 1.0;
                let hi = ((t - shift + reach_t - grid.t_min) / grid.dt - 0.5).ceil() + 1.0;
                if hi < 0.0 || lo > last_col {
                    continue;
                }
                let lo = lo.max(0.0) as usize;
                let hi = hi.min(last_col) as usize;
                for kn in lo..=hi {
                    if !row.mask[kn] {
                        continue;
                    }
                    let w = kernel_weight(dx, t - grid.t_center(kn) - shift, params);
                    num += w * row.values[kn];
                    den += w;
                }
            }
            out[(j, k)] = if den > 0.0 {
                num / den
            } else {
                nearest_observation(&rows, &grid, x, t, c, params)
            };
        }
    }
    SpeedField::new(grid, out)
}

fn nearest_observation(rows: &[ObservedRow], grid: &GridSpec, x: f64, t: f64, c: f64, params: &KernelParams) -> f64 {
    let mut best = (f64::INFINITY, f64::NAN);
    for row in rows {
        let dx = x - row.x;
        let shift = dx / c;
        for (kn, (&v, &m)) in row.values.iter().zip(row.mask.iter()).enumerate() {
            if !m {
                continue;
            }
            let d = dx.abs() / params.sigma + (t - grid.t_center(kn) - shift).abs() / params.tau;
            if d < best.0 {
                best = (d, v);
            }
        }
    }
    best.1
}

/// Ordered wave speeds with one dense a priori field per speed.
#[derive(Debug, Clone)]
pub struct PrioriBank {
    wave_speeds: Vec<f64>,
    fields: Vec<SpeedField>,
    params: Option<KernelParams>,
}

impl PrioriBank {
    /// Wraps externally computed fields. They must be dense and share a grid.
    pub fn from_fields(wave_speeds: Vec<f64>, fields: Vec<SpeedField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::param("wave_speeds", "at least one a priori field is required"));
        }
        if wave_speeds.len() != fields.len() {
            return Err(Error::param(
                "wave_speeds",
                format!("{} speeds for {} fields", wave_speeds.len(), fields.len()),
            ));
        }
        let grid = *fields[0].grid();
        for f in &fields {
            grid.ensure_same(f.grid(), "a priori fields")?;
            f.ensure_dense("a priori field")?;
        }
        Ok(PrioriBank {
            wave_speeds,
            fields,
            params: None,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn wave_speeds(&self) -> &[f64] {
        &self.wave_speeds
    }

    pub fn fields(&self) -> &[SpeedField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Array2<f64> {
        self.fields[i].values()
    }

    /// Kernel parameters used to build the bank, if it was built by smoothing.
    pub fn params(&self) -> Option<&KernelParams> {
        self.params.as_ref()
    }
}

pub fn build_priori_bank(
    observed: &SpeedField,
    mask: &ObservationMask,
    wave_speeds: &[f64],
    params: &KernelParams,
) -> Result<PrioriBank> {
    if wave_speeds.is_empty() {
        return Err(Error::param("wave_speeds", "at least one wave speed is required"));
    }
    let fields = wave_speeds
        .iter()
        .map(|&c| smooth_along_wave(observed, mask, c, params))
        .collect::<Result<Vec<_>>>()?;
    let mut bank = PrioriBank::from_fields(wave_speeds.to_vec(), fields)?;
    bank.params = Some(*params);
    Ok(bank)
}
