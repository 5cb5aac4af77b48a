//! Error metrics and the detector-coverage and wave-speed sweeps.

use std::collections::BTreeMap;

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::grid::{apply_mask, detector_mask, equally_spaced_detectors, ObservationMask, SpeedField};
use crate::pipeline::{estimate, EstimationConfig, Method};

/// `||estimate - truth||_F / ||truth||_F` over every cell.
pub fn relative_error(estimate: &SpeedField, truth: &SpeedField) -> Result<f64> {
    estimate.grid().ensure_same(truth.grid(), "estimate and truth")?;
    relative_error_where(estimate, truth, |_| true).ok_or(Error::UndefinedRelativeError)?
}

fn relative_error_where(estimate: &SpeedField, truth: &SpeedField, include: impl Fn(f64) -> bool) -> Option<Result<f64>> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut missing = false;
    Zip::from(estimate.values()).and(truth.values()).for_each(|&e, &t| {
        if !include(t) {
            return;
        }
        if e.is_nan() || t.is_nan() {
            missing = true;
        }
        num += (e - t) * (e - t);
        den += t * t;
    });
    if missing {
        return Some(Err(Error::MissingValues("relative error needs dense fields".into())));
    }
    (den > 0.0).then(|| Ok((num / den).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub relative_error: f64,
    pub cell_count: usize,
    /// Relative error restricted to `congested` (truth below the threshold speed) and
    /// `free` cells. A region with zero truth norm is left out.
    pub per_region_errors: BTreeMap<String, f64>,
    pub negative_speed_cells: usize,
}

pub fn evaluate(estimate: &SpeedField, truth: &SpeedField, v_thr: f64) -> Result<EvalReport> {
    let relative = relative_error(estimate, truth)?;
    let mut regions = BTreeMap::new();
    for (name, congested) in [("congested", true), ("free", false)] {
        if let Some(r) = relative_error_where(estimate, truth, |t| (t < v_thr) == congested) {
            regions.insert(name.to_string(), r?);
        }
    }
    Ok(EvalReport {
        relative_error: relative,
        cell_count: truth.grid().cell_count(),
        per_region_errors: regions,
        negative_speed_cells: estimate.values().iter().filter(|v| **v < 0.0).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePoint {
    pub detectors: usize,
    pub rows: Vec<usize>,
    pub coverage: f64,
    pub relative_error: f64,
}

/// One full estimate per detector count, with equally spaced detectors.
pub fn coverage_sweep(
    truth: &SpeedField,
    detector_counts: &[usize],
    method: Method,
    config: &EstimationConfig,
) -> Result<Vec<CoveragePoint>> {
    if detector_counts.is_empty() {
        return Err(Error::param("counts", "at least one detector count is required"));
    }
    let grid = *truth.grid();
    detector_counts
        .iter()
        .map(|&count| {
            let rows = equally_spaced_detectors(&grid, count)?;
            let mask = detector_mask(&grid, &rows)?;
            let observed = apply_mask(truth, &mask)?;
            let est = estimate(&observed, &mask, method, config)?;
            Ok(CoveragePoint {
                detectors: count,
                coverage: mask.coverage(),
                relative_error: relative_error(&est.field, truth)?,
                rows,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSweepPoint {
    /// Number of (congested, free) pairs used.
    pub pairs: usize,
    /// Wave speeds in bank order.
    pub wave_speeds: Vec<f64>,
    pub relative_error: f64,
    pub objective: f64,
    pub converged: bool,
    pub iters: usize,
}

/// ADMM estimates using the first `k` pairs for `k = 1..=pairs.len()`. Pairs are
/// given as `(c_cong, c_free)`; each enters the bank as `[c_free, c_cong]`, so a
/// single pair reproduces a plain two-speed run.
pub fn wavespeed_sweep(
    truth: &SpeedField,
    mask: &ObservationMask,
    speed_pairs: &[(f64, f64)],
    config: &EstimationConfig,
) -> Result<Vec<WaveSweepPoint>> {
    if speed_pairs.is_empty() {
        return Err(Error::param("pairs", "at least one wave speed pair is required"));
    }
    let observed = apply_mask(truth, mask)?;
    (1..=speed_pairs.len())
        .map(|k| {
            let wave_speeds: Vec<f64> = speed_pairs[..k].iter().flat_map(|&(cong, free)| [free, cong]).collect();
            let cfg = EstimationConfig {
                wave_speeds: wave_speeds.clone(),
                ..config.clone()
            };
            let est = estimate(&observed, mask, Method::Admm, &cfg)?;
            let res = est.admm.as_ref().expect("ADMM run carries solver output");
            Ok(WaveSweepPoint {
                pairs: k,
                relative_error: relative_error(&est.field, truth)?,
                objective: res.objective,
                converged: res.converged,
                iters: res.iters,
                wave_speeds,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn sf(a: Array2<f64>) -> SpeedField {
        let (n_x, n_t) = a.dim();
        SpeedField::new(GridSpec::new(0.0, 0.0, 10.0, 1.0, n_x, n_t).unwrap(), a).unwrap()
    }

    #[test]
    fn relative_error_examples() {
        let t = sf(array![[10.0, 20.0], [30.0, 40.0]]);
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        let doubled = sf(t.values() * 2.0);
        assert_relative_eq!(relative_error(&doubled, &t).unwrap(), 1.0, epsilon = 1e-15);
        let zero = sf(Array2::zeros((2, 2)));
        assert!(matches!(relative_error(&t, &zero), Err(Error::UndefinedRelativeError)));
    }

    #[test]
    fn report_splits_regions() {
        let truth = sf(array![[20.0, 80.0]]);
        let est = sf(array![[30.0, 80.0]]);
        let r = evaluate(&est, &truth, 60.0).unwrap();
        assert_relative_eq!(r.per_region_errors["congested"], 0.5);
        assert_eq!(r.per_region_errors["free"], 0.0);
        assert_eq!(r.cell_count, 2);
        assert_eq!(r.negative_speed_cells, 0);
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let t = sf(Array2::from_elem((4, 6), 50.0));
        let cfg = EstimationConfig::default();
        assert!(coverage_sweep(&t, &[], Method::Asm, &cfg).is_err());
        let mask = ObservationMask::full(*t.grid());
        assert!(wavespeed_sweep(&t, &mask, &[], &cfg).is_err());
    }

    proptest! {
        #[test]
        fn relative_error_is_homogeneous(vals in prop::collection::vec(1.0..100.0f64, 6), err in prop::collection::vec(-5.0..5.0f64, 6), alpha in 0.0..0.9f64) {
            let truth = sf(Array2::from_shape_vec((2, 3), vals.clone()).unwrap());
            let e = Array2::from_shape_vec((2, 3), err).unwrap();
            let est = |s: f64| SpeedField::from_raw(*truth.grid(), truth.values() + &(&e * s));
            let base = relative_error(&est(1.0), &truth).unwrap();
            let scaled = relative_error(&est(alpha), &truth).unwrap();
            prop_assert!((scaled - alpha * base).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
