//! Optimal superposition weights by ADMM.
//!
//! Given a priori fields `Z^1..Z^m` and observations `Z` on a mask `M`, find weights
//! `W^i` minimising `0.5 * ||M ⊙ (Σ W^i ⊙ Z^i - Z)||_F^2` subject to `Σ W^i = J`.
//! With an auxiliary field `Ẑ = Σ W^i ⊙ Z^i` the augmented Lagrangian is
//!
//! ```text
//! L = 0.5 ||M ⊙ (Z - Ẑ)||² + <Λ1, Ẑ - Σ W^i ⊙ Z^i> + β/2 ||Ẑ - Σ W^i ⊙ Z^i||²
//!                          + <Λ2, Σ W^i - J>        + β/2 ||Σ W^i - J||²
//! ```
//!
//! and each iteration minimises `L` over `Ẑ`, then over each `W^i` in turn
//! (Gauss-Seidel, `i = 1..m`), then takes a dual ascent step of size `β`. Every
//! block update is an element-wise closed form:
//!
//! ```text
//! Ẑ   = (M ⊙ Z - Λ1 + β Σ W^i ⊙ Z^i) ⊘ (M + β J)
//! W^i = (β (Ẑ ⊙ Z^i + J - Σ_{r≠i} W^r ⊙ (Z^r ⊙ Z^i + J)) + Λ1 ⊙ Z^i - Λ2) ⊘ (β (Z^i ⊙ Z^i + J))
//! ```
//!
//! All terms are cell-local, so the problem decouples per cell. Unobserved cells
//! start feasible with zero duals and therefore keep their initial uniform weights.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ObservationMask, SpeedField};
use crate::kernel::PrioriBank;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// Penalty weight and dual step size.
    pub beta: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            beta: 1.0,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iters: 5000,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("eps_abs", self.eps_abs), ("eps_rel", self.eps_rel)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// One weight matrix per a priori field.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBank {
    weights: Vec<Array2<f64>>,
}

impl WeightBank {
    pub fn new(weights: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::param("weights", "at least one weight matrix is required"));
        };
        let shape = first.dim();
        if let Some(w) = weights.iter().find(|w| w.dim() != shape) {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: w.dim(),
            });
        }
        Ok(WeightBank { weights })
    }

    /// `J / m` for every field.
    pub fn uniform(m: usize, shape: (usize, usize)) -> Self {
        WeightBank {
            weights: vec![Array2::from_elem(shape, 1.0 / m as f64); m],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> &Array2<f64> {
        &self.weights[i]
    }

    pub fn as_slice(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn into_inner(self) -> Vec<Array2<f64>> {
        self.weights
    }

    /// `Σ W^i`
    pub fn sum(&self) -> Array2<f64> {
        let mut acc = Array2::zeros(self.weights[0].dim());
        for w in &self.weights {
            acc += w;
        }
        acc
    }

    /// `Σ W^i ⊙ Z^i`, accumulated in index order.
    pub fn fuse(&self, bank: &PrioriBank) -> Result<Array2<f64>> {
        self.check_against(bank)?;
        Ok(fuse(&self.weights, bank))
    }

    /// `||Σ W^i - J||_F / sqrt(cells)`
    pub fn sum_violation_rms(&self) -> f64 {
        let s = self.sum();
        let n = s.len() as f64;
        (s.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / n).sqrt()
    }

    fn check_against(&self, bank: &PrioriBank) -> Result<()> {
        if self.len() != bank.len() {
            return Err(Error::param(
                "weights",
                format!("{} weight matrices for {} a priori fields", self.len(), bank.len()),
            ));
        }
        let shape = bank.grid().shape();
        if self.weights[0].dim() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: self.weights[0].dim(),
            });
        }
        Ok(())
    }
}

fn fuse(weights: &[Array2<f64>], bank: &PrioriBank) -> Array2<f64> {
    let mut acc = Array2::zeros(weights[0].dim());
    for (i, w) in weights.iter().enumerate() {
        Zip::from(&mut acc)
            .and(w)
            .and(bank.field(i))
            .for_each(|a, &w, &z| *a += w * z);
    }
    acc
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn frob_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
        .sqrt()
}

/// Observations in the form the updates use: the 0/1 mask `M` and `M ⊙ Z` with
/// unobserved cells set to zero.
#[derive(Debug, Clone)]
pub struct MaskedObservations {
    grid: GridSpec,
    m: Array2<f64>,
    mz: Array2<f64>,
}

impl MaskedObservations {
    pub fn new(observed: &SpeedField, mask: &ObservationMask) -> Result<Self> {
        observed.grid().ensure_same(mask.grid(), "observed field and mask")?;
        let mut mz = Array2::zeros(observed.grid().shape());
        let mut missing = 0;
        Zip::from(&mut mz)
            .and(observed.values())
            .and(mask.mask())
            .for_each(|out, &z, &m| {
                if m {
                    if z.is_finite() {
                        *out = z;
                    } else {
                        missing += 1;
                    }
                }
            });
        if missing > 0 {
            return Err(Error::MissingValues(format!("{missing} observed cells without a speed value")));
        }
        Ok(MaskedObservations {
            grid: *observed.grid(),
            m: mask.indicator(),
            mz,
        })
    }

    pub fn is_empty(&self) -> bool {
        !self.m.iter().any(|v| *v > 0.0)
    }
}

/// `0.5 * ||M ⊙ (Σ W^i ⊙ Z^i - Z)||_F^2`
pub fn objective(weights: &WeightBank, bank: &PrioriBank, observed: &SpeedField, mask: &ObservationMask) -> Result<f64> {
    let obs = MaskedObservations::new(observed, mask)?;
    bank.grid().ensure_same(&obs.grid, "a priori bank and observations")?;
    let fused = weights.fuse(bank)?;
    Ok(masked_misfit(&fused, &obs))
}

fn masked_misfit(fused: &Array2<f64>, obs: &MaskedObservations) -> f64 {
    0.5 * Zip::from(fused)
        .and(&obs.m)
        .and(&obs.mz)
        .fold(0.0, |acc, &f, &m, &mz| acc + (m * f - mz).powi(2))
}

/// Per-iteration convergence record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal: f64,
    pub dual: f64,
}

/// Primal and dual variables plus residual history.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub z_hat: Array2<f64>,
    pub weights: WeightBank,
    pub lambda1: Array2<f64>,
    pub lambda2: Array2<f64>,
    pub iter: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    previous: Option<(Array2<f64>, WeightBank)>,
}

impl AdmmState {
    /// Uniform weights `J/m`, `Ẑ = Σ W^i ⊙ Z^i`, zero duals.
    pub fn init(bank: &PrioriBank) -> Self {
        let shape = bank.grid().shape();
        let weights = WeightBank::uniform(bank.len(), shape);
        let z_hat = fuse(&weights.weights, bank);
        AdmmState {
            z_hat,
            weights,
            lambda1: Array2::zeros(shape),
            lambda2: Array2::zeros(shape),
            iter: 0,
            primal_residuals: Vec::new(),
            dual_residuals: Vec::new(),
            previous: None,
        }
    }

    /// Arbitrary starting point, for exercising the individual updates.
    pub fn from_parts(z_hat: Array2<f64>, weights: WeightBank, lambda1: Array2<f64>, lambda2: Array2<f64>) -> Result<Self> {
        let shape = z_hat.dim();
        for a in [&lambda1, &lambda2, weights.get(0)] {
            if a.dim() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: a.dim(),
                });
            }
        }
        Ok(AdmmState {
            z_hat,
            weights,
            lambda1,
            lambda2,
            iter: 0,
            primal_residuals: Vec::new(),
            dual_residuals: Vec::new(),
            previous: None,
        })
    }

    fn check(&self, bank: &PrioriBank) -> Result<()> {
        self.weights.check_against(bank)?;
        if self.z_hat.dim() != bank.grid().shape() {
            return Err(Error::ShapeMismatch {
                expected: bank.grid().shape(),
                found: self.z_hat.dim(),
            });
        }
        Ok(())
    }
}

/// Augmented Lagrangian at the current state.
pub fn lagrangian(state: &AdmmState, bank: &PrioriBank, obs: &MaskedObservations, beta: f64) -> Result<f64> {
    state.check(bank)?;
    let fused = fuse(&state.weights.weights, bank);
    let total = state.weights.sum();
    let fit = Zip::from(&state.z_hat)
        .and(&obs.m)
        .and(&obs.mz)
        .fold(0.0, |acc, &zh, &m, &mz| acc + 0.5 * (mz - m * zh).powi(2));
    let fusion = Zip::from(&state.z_hat)
        .and(&fused)
        .and(&state.lambda1)
        .fold(0.0, |acc, &zh, &f, &l1| {
            let c = zh - f;
            acc + l1 * c + 0.5 * beta * c * c
        });
    let sum = Zip::from(&total).and(&state.lambda2).fold(0.0, |acc, &s, &l2| {
        let c = s - 1.0;
        acc + l2 * c + 0.5 * beta * c * c
    });
    Ok(fit + fusion + sum)
}

/// Closed-form minimiser of `L` over `Ẑ`.
pub fn update_z_hat(state: &AdmmState, bank: &PrioriBank, obs: &MaskedObservations, params: &AdmmParams) -> Result<Array2<f64>> {
    params.validate()?;
    state.check(bank)?;
    let fused = fuse(&state.weights.weights, bank);
    Ok(z_hat_from_fused(&fused, &state.lambda1, obs, params.beta))
}

fn z_hat_from_fused(fused: &Array2<f64>, lambda1: &Array2<f64>, obs: &MaskedObservations, beta: f64) -> Array2<f64> {
    Zip::from(fused)
        .and(lambda1)
        .and(&obs.m)
        .and(&obs.mz)
        .map_collect(|&f, &l1, &m, &mz| (mz - l1 + beta * f) / (m + beta))
}

/// Closed-form minimiser of `L` over `W^i` with every other block held fixed.
pub fn update_weight(i: usize, state: &AdmmState, bank: &PrioriBank, params: &AdmmParams) -> Result<Array2<f64>> {
    params.validate()?;
    state.check(bank)?;
    if i >= bank.len() {
        return Err(Error::IndexOutOfRange { index: i, len: bank.len() });
    }
    Ok(weight_update(i, state, bank, params.beta))
}

fn weight_update(i: usize, state: &AdmmState, bank: &PrioriBank, beta: f64) -> Array2<f64> {
    let zi = bank.field(i);
    // Σ_{r≠i} W^r ⊙ (Z^r ⊙ Z^i + J)
    let mut coupling = Array2::<f64>::zeros(zi.dim());
    for (r, wr) in state.weights.weights.iter().enumerate() {
        if r == i {
            continue;
        }
        Zip::from(&mut coupling)
            .and(wr)
            .and(bank.field(r))
            .and(zi)
            .for_each(|acc, &w, &zr, &zi| *acc += w * (zr * zi + 1.0));
    }
    Zip::from(&coupling)
        .and(zi)
        .and(&state.z_hat)
        .and(&state.lambda1)
        .and(&state.lambda2)
        .map_collect(|&cpl, &zi, &zh, &l1, &l2| {
            (beta * (zh * zi + 1.0 - cpl) + l1 * zi - l2) / (beta * (zi * zi + 1.0))
        })
}

/// Dual ascent: `Λ1 + β (Ẑ - Σ W^i ⊙ Z^i)` and `Λ2 + β (Σ W^i - J)`.
pub fn update_duals(state: &AdmmState, bank: &PrioriBank, params: &AdmmParams) -> Result<(Array2<f64>, Array2<f64>)> {
    params.validate()?;
    state.check(bank)?;
    let fused = fuse(&state.weights.weights, bank);
    Ok(duals_step(state, &fused, &state.weights.sum(), params.beta))
}

fn duals_step(state: &AdmmState, fused: &Array2<f64>, total: &Array2<f64>, beta: f64) -> (Array2<f64>, Array2<f64>) {
    let l1 = Zip::from(&state.lambda1)
        .and(&state.z_hat)
        .and(fused)
        .map_collect(|&l, &zh, &f| l + beta * (zh - f));
    let l2 = Zip::from(&state.lambda2)
        .and(total)
        .map_collect(|&l, &s| l + beta * (s - 1.0));
    (l1, l2)
}

/// Constraint violations of the current iterate, kept separate for the stopping rule.
#[derive(Debug, Clone, Copy)]
struct Violations {
    /// `||Ẑ - Σ W^i ⊙ Z^i||_F`
    fusion: f64,
    /// `||Σ W^i - J||_F`
    sum: f64,
}

fn violations(state: &AdmmState, fused: &Array2<f64>, total: &Array2<f64>) -> Violations {
    Violations {
        fusion: frob_diff(&state.z_hat, fused),
        sum: total.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>().sqrt(),
    }
}

/// Primal residual `sqrt(||Ẑ - Σ W^i ⊙ Z^i||² + ||Σ W^i - J||²)` and dual residual
/// `β sqrt(Σ ||ΔW^i||² + ||ΔẐ||²)` against the previous iterate.
pub fn residuals(state: &AdmmState, bank: &PrioriBank, params: &AdmmParams) -> Result<(f64, f64)> {
    state.check(bank)?;
    let Some((prev_z_hat, prev_weights)) = state.previous.as_ref().filter(|_| state.iter > 0) else {
        return Err(Error::NoIterate);
    };
    let fused = fuse(&state.weights.weights, bank);
    let v = violations(state, &fused, &state.weights.sum());
    let dual = dual_residual(state, prev_z_hat, prev_weights, params.beta);
    Ok((v.fusion.hypot(v.sum), dual))
}

fn dual_residual(state: &AdmmState, prev_z_hat: &Array2<f64>, prev_weights: &WeightBank, beta: f64) -> f64 {
    let mut sq = frob_diff(&state.z_hat, prev_z_hat).powi(2);
    for (w, pw) in state.weights.weights.iter().zip(&prev_weights.weights) {
        sq += frob_diff(w, pw).powi(2);
    }
    beta * sq.sqrt()
}

/// Performs one full iteration in place and returns the trace row.
pub fn step(state: &mut AdmmState, bank: &PrioriBank, obs: &MaskedObservations, params: &AdmmParams) -> Result<TraceRow> {
    params.validate()?;
    state.check(bank)?;
    let fused = fuse(&state.weights.weights, bank);
    Ok(step_unchecked(state, bank, obs, params.beta, &fused).0)
}

/// One iteration; `fused` must be `Σ W^i ⊙ Z^i` for the current weights.
fn step_unchecked(
    state: &mut AdmmState,
    bank: &PrioriBank,
    obs: &MaskedObservations,
    beta: f64,
    fused: &Array2<f64>,
) -> (TraceRow, Violations, Array2<f64>) {
    let new_z_hat = z_hat_from_fused(fused, &state.lambda1, obs, beta);
    let prev_z_hat = std::mem::replace(&mut state.z_hat, new_z_hat);
    let mut prev_weights = Vec::with_capacity(bank.len());
    for i in 0..bank.len() {
        let w = weight_update(i, state, bank, beta);
        prev_weights.push(std::mem::replace(&mut state.weights.weights[i], w));
    }
    let prev_weights = WeightBank { weights: prev_weights };

    let fused = fuse(&state.weights.weights, bank);
    let total = state.weights.sum();
    let (l1, l2) = duals_step(state, &fused, &total, beta);
    state.lambda1 = l1;
    state.lambda2 = l2;

    let v = violations(state, &fused, &total);
    let primal = v.fusion.hypot(v.sum);
    let dual = dual_residual(state, &prev_z_hat, &prev_weights, beta);
    state.iter += 1;
    state.primal_residuals.push(primal);
    state.dual_residuals.push(dual);
    state.previous = Some((prev_z_hat, prev_weights));
    let row = TraceRow {
        iter: state.iter,
        objective: masked_misfit(&fused, obs),
        primal,
        dual,
    };
    (row, v, fused)
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    /// `Σ W^i ⊙ Z^i` from the returned weights. Not clamped; see `negative_cells`.
    pub fused_field: SpeedField,
    pub weights: WeightBank,
    pub converged: bool,
    pub iters: usize,
    /// (primal, dual) at the last iterate.
    pub final_residuals: (f64, f64),
    pub objective: f64,
    /// Cells where the fused speed is negative.
    pub negative_cells: usize,
    pub trace: Vec<TraceRow>,
}

/// Runs ADMM from the uniform-weight start until the stopping rule holds or
/// `max_iters` is reached.
///
/// Stopping rule, with `n` cells per matrix:
/// - `||Ẑ - Σ W^i ⊙ Z^i|| <= eps_abs sqrt(n) + eps_rel max(||Ẑ||, ||Σ W^i ⊙ Z^i||)`
/// - `||Σ W^i - J|| <= eps_abs sqrt(n)` (J has a fixed scale, so no relative term)
/// - dual residual `<= eps_abs sqrt((m + 1) n) + eps_rel sqrt(||Λ1||² + ||Λ2||²)`
pub fn solve(observed: &SpeedField, mask: &ObservationMask, bank: &PrioriBank, params: &AdmmParams) -> Result<AdmmResult> {
    params.validate()?;
    let obs = MaskedObservations::new(observed, mask)?;
    bank.grid().ensure_same(&obs.grid, "a priori bank and observations")?;
    if obs.is_empty() {
        return Err(Error::EmptyMask);
    }
    for f in bank.fields() {
        f.ensure_dense("a priori field")?;
    }

    let n = bank.grid().cell_count() as f64;
    let m = bank.len() as f64;
    let mut state = AdmmState::init(bank);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut fused = fuse(&state.weights.weights, bank);
    while state.iter < params.max_iters {
        let (row, v, f) = step_unchecked(&mut state, bank, &obs, params.beta, &fused);
        fused = f;
        trace.push(row);
        if !(row.objective.is_finite() && row.primal.is_finite() && row.dual.is_finite()) {
            return Err(Error::Divergence { iter: row.iter, trace });
        }

        let abs = params.eps_abs * n.sqrt();
        let eps_fusion = abs + params.eps_rel * frob(&state.z_hat).max(frob(&fused));
        let eps_sum = abs;
        let eps_dual = params.eps_abs * ((m + 1.0) * n).sqrt()
            + params.eps_rel * frob(&state.lambda1).hypot(frob(&state.lambda2));
        if v.fusion <= eps_fusion && v.sum <= eps_sum && row.dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let grid = *bank.grid();
    let objective = masked_misfit(&fused, &obs);
    let negative_cells = fused.iter().filter(|v| **v < 0.0).count();
    let final_residuals = trace.last().map_or((0.0, 0.0), |r| (r.primal, r.dual));
    Ok(AdmmResult {
        fused_field: SpeedField::from_raw(grid, fused),
        weights: state.weights,
        converged,
        iters: state.iter,
        final_residuals,
        objective,
        negative_cells,
        trace,
    })
}
