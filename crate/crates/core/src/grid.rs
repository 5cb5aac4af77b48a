//! Spatio-temporal grid, speed fields, observation masks and trajectory aggregation.
//!
//! Rows index space (`j`, metres), columns index time (`k`, seconds). Speeds are
//! stored in km/h. A missing cell is `NaN`, which is distinct from a zero speed.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

/// Uniform grid geometry. Cell `(j, k)` covers
/// `[x_min + j*dx, x_min + (j+1)*dx) x [t_min + k*dt, t_min + (k+1)*dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub t_min: f64,
    pub dx: f64,
    pub dt: f64,
    pub n_x: usize,
    pub n_t: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, t_min: f64, dx: f64, dt: f64, n_x: usize, n_t: usize) -> Result<Self> {
        let grid = GridSpec {
            x_min,
            t_min,
            dx,
            dt,
            n_x,
            n_t,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_x == 0 || self.n_t == 0 {
            return Err(Error::InvalidGrid(format!(
                "cell counts must be at least 1, got {}x{}",
                self.n_x, self.n_t
            )));
        }
        if !self.x_min.is_finite() || !self.t_min.is_finite() {
            return Err(Error::InvalidGrid("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_x, self.n_t)
    }

    pub fn cell_count(&self) -> usize {
        self.n_x * self.n_t
    }

    /// Position of the centre of row `j`, in metres.
    pub fn x_center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    /// Time of the centre of column `k`, in seconds.
    pub fn t_center(&self, k: usize) -> f64 {
        self.t_min + (k as f64 + 0.5) * self.dt
    }

    pub fn length(&self) -> f64 {
        self.n_x as f64 * self.dx
    }

    /// Cell containing `(x, t)`, or `None` outside the grid extent.
    pub fn cell_of(&self, x: f64, t: f64) -> Option<(usize, usize)> {
        let j = ((x - self.x_min) / self.dx).floor();
        let k = ((t - self.t_min) / self.dt).floor();
        if !(j >= 0.0 && k >= 0.0) {
            return None;
        }
        let (j, k) = (j as usize, k as usize);
        (j < self.n_x && k < self.n_t).then_some((j, k))
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

/// Dense speed matrix (km/h) on a grid; `NaN` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    grid: GridSpec,
    values: Array2<f64>,
}

impl SpeedField {
    pub fn new(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        grid.validate()?;
        if values.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                found: values.dim(),
            });
        }
        if let Some(v) = values.iter().find(|v| v.is_infinite() || **v < 0.0) {
            return Err(Error::param("speed", format!("speeds must be finite and non-negative, found {v}")));
        }
        Ok(SpeedField { grid, values })
    }

    /// Builds a field without the non-negativity check. Fused estimates are not
    /// clamped and may dip below zero.
    pub(crate) fn from_raw(grid: GridSpec, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        SpeedField { grid, values }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        SpeedField::new(grid, Array2::from_elem(grid.shape(), value))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        self.values.get((j, k)).copied().filter(|v| !v.is_nan())
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn is_dense(&self) -> bool {
        self.missing_count() == 0
    }

    pub(crate) fn ensure_dense(&self, what: &str) -> Result<()> {
        match self.missing_count() {
            0 => Ok(()),
            n => Err(Error::MissingValues(format!("{what} has {n} missing cells"))),
        }
    }
}

/// Binary matrix of observed cells (the projection onto the observed index set).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    grid: GridSpec,
    mask: Array2<bool>,
}

impl ObservationMask {
    pub fn new(grid: GridSpec, mask: Array2<bool>) -> Result<Self> {
        grid.validate()?;
        if mask.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                found: mask.dim(),
            });
        }
        Ok(ObservationMask { grid, mask })
    }

    pub fn full(grid: GridSpec) -> Self {
        ObservationMask {
            grid,
            mask: Array2::from_elem(grid.shape(), true),
        }
    }

    pub fn empty(grid: GridSpec) -> Self {
        ObservationMask {
            grid,
            mask: Array2::from_elem(grid.shape(), false),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn is_observed(&self, j: usize, k: usize) -> bool {
        self.mask[(j, k)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    /// Fraction of observed cells.
    pub fn coverage(&self) -> f64 {
        self.observed_count() as f64 / self.grid.cell_count() as f64
    }

    /// The mask as a 0/1 matrix (the `M` of the augmented Lagrangian).
    pub fn indicator(&self) -> Array2<f64> {
        self.mask.mapv(|m| if m { 1.0 } else { 0.0 })
    }

    /// Rows with at least one observed cell, ascending.
    pub fn observed_rows(&self) -> Vec<usize> {
        self.mask
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|m| *m))
            .map(|(j, _)| j)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// seconds
    pub t: f64,
    /// metres
    pub x: f64,
    /// km/h
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    vehicle_id: String,
    samples: Vec<Sample>,
}

impl Trajectory {
    /// Samples must be strictly increasing in time with finite, non-negative speeds.
    pub fn new(vehicle_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let vehicle_id = vehicle_id.into();
        let fail = |reason: String| Error::InvalidTrajectory {
            vehicle_id: vehicle_id.clone(),
            reason,
        };
        for s in &samples {
            if !(s.t.is_finite() && s.x.is_finite() && s.v.is_finite()) {
                return Err(fail(format!("non-finite sample {s:?}")));
            }
            if s.v < 0.0 {
                return Err(fail(format!("negative speed {}", s.v)));
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(fail(format!("time not strictly increasing at t={}", w[1].t)));
        }
        Ok(Trajectory { vehicle_id, samples })
    }

    pub fn vehicle_id(&self) -> &str {
        &self.vehicle_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

/// Output of [`aggregate_trajectories`].
#[derive(Debug, Clone)]
pub struct Aggregation {
    /// Dense ground-truth field.
    pub field: SpeedField,
    /// Samples that fell outside the grid extent.
    pub skipped_samples: usize,
    /// Cells without samples, filled from their nearest non-empty cell.
    pub filled_cells: usize,
}

/// Per-cell mean speed of all trajectory samples, with empty cells filled from the
/// nearest non-empty cell.
///
/// Each cell's samples are sorted before summation, so the result does not depend
/// on the order of `trajectories`.
pub fn aggregate_trajectories(trajectories: &[Trajectory], grid: &GridSpec) -> Result<Aggregation> {
    grid.validate()?;
    if trajectories.iter().all(|tr| tr.samples.is_empty()) {
        return Err(Error::NoInputData);
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); grid.cell_count()];
    let mut skipped = 0;
    for s in trajectories.iter().flat_map(|tr| tr.samples.iter()) {
        match grid.cell_of(s.x, s.t) {
            Some((j, k)) => buckets[j * grid.n_t + k].push(s.v),
            None => skipped += 1,
        }
    }
    let means: Vec<f64> = buckets
        .into_iter()
        .map(|mut vs| {
            if vs.is_empty() {
                return f64::NAN;
            }
            vs.sort_by(f64::total_cmp);
            vs.iter().sum::<f64>() / vs.len() as f64
        })
        .collect();
    let mut values = Array2::from_shape_vec(grid.shape(), means).expect("bucket count matches grid");
    if values.iter().all(|v| v.is_nan()) {
        return Err(Error::NoInputData);
    }
    let filled_cells = fill_nearest(&mut values);
    Ok(Aggregation {
        field: SpeedField::new(*grid, values)?,
        skipped_samples: skipped,
        filled_cells,
    })
}

/// Replaces every `NaN` with the value of the nearest non-missing cell (Euclidean
/// distance in cell units, ties to the smaller row then the smaller column).
/// Returns the number of cells filled. A matrix with no defined cell is left as is.
pub fn fill_nearest(values: &mut Array2<f64>) -> usize {
    let (n_x, n_t) = values.dim();
    let source = values.clone();
    if source.iter().all(|v| v.is_nan()) {
        return 0;
    }
    let max_r = n_x.max(n_t) as i64;
    let mut filled = 0;
    for j in 0..n_x {
        for k in 0..n_t {
            if !source[(j, k)].is_nan() {
                continue;
            }
            // (squared distance, row, col)
            let mut best: Option<(i64, usize, usize)> = None;
            for r in 1..=max_r {
                if matches!(best, Some((d2, _, _)) if d2 < r * r) {
                    break;
                }
                for (jj, kk) in ring(j as i64, k as i64, r, n_x as i64, n_t as i64) {
                    if source[(jj, kk)].is_nan() {
                        continue;
                    }
                    let dj = jj as i64 - j as i64;
                    let dk = kk as i64 - k as i64;
                    let cand = (dj * dj + dk * dk, jj, kk);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            let (_, bj, bk) = best.expect("at least one defined cell");
            values[(j, k)] = source[(bj, bk)];
            filled += 1;
        }
    }
    filled
}

/// In-bounds cells at Chebyshev distance exactly `r` from `(j, k)`.
fn ring(j: i64, k: i64, r: i64, n_x: i64, n_t: i64) -> impl Iterator<Item = (usize, usize)> {
    (j - r..=j + r).flat_map(move |jj| {
        let edge = jj == j - r || jj == j + r;
        let ks: Vec<i64> = if edge {
            (k - r..=k + r).collect()
        } else {
            vec![k - r, k + r]
        };
        ks.into_iter()
            .filter(move |&kk| jj >= 0 && jj < n_x && kk >= 0 && kk < n_t)
            .map(move |kk| (jj as usize, kk as usize))
    })
}

/// Mask observing every column of each listed row.
pub fn detector_mask(grid: &GridSpec, detector_rows: &[usize]) -> Result<ObservationMask> {
    grid.validate()?;
    let mut mask = Array2::from_elem(grid.shape(), false);
    let mut seen = vec![false; grid.n_x];
    for &row in detector_rows {
        if row >= grid.n_x {
            return Err(Error::RowOutOfRange { row, n_x: grid.n_x });
        }
        if std::mem::replace(&mut seen[row], true) {
            return Err(Error::DuplicateRow(row));
        }
        mask.row_mut(row).fill(true);
    }
    ObservationMask::new(*grid, mask)
}

/// `count` detector rows at `floor((j + 0.5) * n_x / count)`, deduplicated.
pub fn equally_spaced_detectors(grid: &GridSpec, count: usize) -> Result<Vec<usize>> {
    if count == 0 || count > grid.n_x {
        return Err(Error::DetectorCount { count, n_x: grid.n_x });
    }
    let mut rows: Vec<usize> = (0..count)
        .map(|j| {
            let pos = ((j as f64 + 0.5) * grid.n_x as f64 / count as f64).floor() as usize;
            pos.min(grid.n_x - 1)
        })
        .collect();
    rows.dedup();
    Ok(rows)
}

/// Copy of `field` with every unobserved cell set to missing.
pub fn apply_mask(field: &SpeedField, mask: &ObservationMask) -> Result<SpeedField> {
    field.grid.ensure_same(&mask.grid, "field and mask")?;
    let mut values = field.values.clone();
    Zip::from(&mut values).and(&mask.mask).for_each(|v, &m| {
        if !m {
            *v = f64::NAN;
        }
    });
    Ok(SpeedField::from_raw(field.grid, values))
}
