//! Synthetic ground truth with known wave structure, and an exact weight oracle
//! for two-field banks.

use ndarray::Array2;

use crate::admm::WeightBank;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationMask, SpeedField};
use crate::kernel::{PrioriBank, KMH_PER_MS};

/// SplitMix64. Fully specified so noise sequences are reproducible anywhere:
///
/// ```text
/// state += 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// return z ^ (z >> 31)
/// ```
///
/// (all arithmetic wrapping mod 2^64). Uniforms in `(0, 1]` use the top 53 bits:
/// `((x >> 11) + 1) * 2^-53`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `(0, 1]`.
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by Box-Muller, consuming two uniforms `u1, u2` and returning
    /// `sqrt(-2 ln u1) * cos(2 pi u2)`.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// A congestion band: the set of points within `half_width` metres (measured
/// along x) of the line `x = start_x + speed * (t - start_t) / 3.6`, for `t >= start_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSegment {
    /// metres
    pub start_x: f64,
    /// seconds
    pub start_t: f64,
    /// km/h, signed
    pub speed: f64,
    /// metres
    pub half_width: f64,
}

impl WaveSegment {
    pub fn contains(&self, x: f64, t: f64) -> bool {
        t >= self.start_t && (x - (self.start_x + self.speed * (t - self.start_t) / KMH_PER_MS)).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub grid: GridSpec,
    pub free_speed: f64,
    pub congested_speed: f64,
    pub wave_segments: Vec<WaveSegment>,
    /// km/h
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.congested_speed >= 0.0 && self.free_speed > self.congested_speed) {
            return Err(Error::param(
                "free_speed",
                format!(
                    "need free_speed > congested_speed >= 0, got {} and {}",
                    self.free_speed, self.congested_speed
                ),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std", format!("must be non-negative, got {}", self.noise_std)));
        }
        if let Some(seg) = self.wave_segments.iter().find(|s| s.half_width.is_nan() || s.half_width <= 0.0) {
            return Err(Error::param("half_width", format!("must be positive, got {}", seg.half_width)));
        }
        Ok(())
    }
}

/// Two-level field (free or congested by band membership of the cell centre) plus
/// Gaussian noise drawn in row-major cell order, clamped at zero.
pub fn generate_field(spec: &SyntheticSpec) -> Result<SpeedField> {
    spec.validate()?;
    let g = spec.grid;
    let mut rng = SplitMix64::new(spec.seed);
    let mut values = Array2::zeros(g.shape());
    for j in 0..g.n_x {
        let x = g.x_center(j);
        for k in 0..g.n_t {
            let t = g.t_center(k);
            let congested = spec.wave_segments.iter().any(|s| s.contains(x, t));
            let base = if congested { spec.congested_speed } else { spec.free_speed };
            let noise = if spec.noise_std > 0.0 {
                spec.noise_std * rng.next_normal()
            } else {
                0.0
            };
            values[(j, k)] = (base + noise).max(0.0);
        }
    }
    SpeedField::new(g, values)
}

/// Exact minimiser of the masked misfit for a two-field bank.
///
/// Substituting `W^2 = J - W^1` removes the constraint, and the misfit
/// `Σ_cells M (w z1 + (1 - w) z2 - z)^2` has no cross-cell terms, so each observed
/// cell is an independent 1-D least-squares problem with solution
/// `w = (z - z2) / (z1 - z2)`. Cells with `z1 == z2` (any `w` is optimal) and
/// unobserved cells (the misfit does not depend on `w`) get `w = 1/2`.
pub fn brute_force_weights(observed: &SpeedField, mask: &ObservationMask, bank: &PrioriBank) -> Result<WeightBank> {
    if bank.len() != 2 {
        return Err(Error::OracleFieldCount(bank.len()));
    }
    observed.grid().ensure_same(mask.grid(), "observed field and mask")?;
    bank.grid().ensure_same(mask.grid(), "a priori bank and mask")?;
    let (z1, z2) = (bank.field(0), bank.field(1));
    let w1 = Array2::from_shape_fn(bank.grid().shape(), |(j, k)| {
        if !mask.is_observed(j, k) {
            return 0.5;
        }
        let (a, b, z) = (z1[(j, k)], z2[(j, k)], observed.values()[(j, k)]);
        if a == b {
            0.5
        } else {
            (z - b) * (a - b) / ((a - b) * (a - b))
        }
    });
    let w2 = w1.mapv(|w| 1.0 - w);
    WeightBank::new(vec![w1, w2])
}
