//! Independent reference computations shared by the integration suites.

#![allow(dead_code)]

use adaptive_smoothing::prelude::*;
use adaptive_smoothing::synth::SplitMix64;
use ndarray::Array2;

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_unit()
}

pub fn random_matrix(rng: &mut SplitMix64, shape: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| uniform(rng, lo, hi))
}

/// Random mask with at least one observed cell.
pub fn random_mask(rng: &mut SplitMix64, grid: GridSpec, p: f64) -> ObservationMask {
    let mut m = Array2::from_shape_fn(grid.shape(), |_| rng.next_unit() < p);
    if !m.iter().any(|&b| b) {
        m[(0, 0)] = true;
    }
    ObservationMask::new(grid, m).unwrap()
}

pub fn field(grid: GridSpec, values: Array2<f64>) -> SpeedField {
    SpeedField::new(grid, values).unwrap()
}

/// Two-field instance with a free-flow-like and a congested-like a priori field.
pub struct Instance {
    pub observed: SpeedField,
    pub mask: ObservationMask,
    pub bank: PrioriBank,
}

pub fn two_field_instance(rng: &mut SplitMix64, n_x: usize, n_t: usize) -> Instance {
    let grid = GridSpec::new(0.0, 0.0, 10.0, 1.0, n_x, n_t).unwrap();
    let z = random_matrix(rng, (n_x, n_t), 0.0, 110.0);
    let z1 = random_matrix(rng, (n_x, n_t), 60.0, 100.0);
    let z2 = random_matrix(rng, (n_x, n_t), 5.0, 40.0);
    let mask = random_mask(rng, grid, 0.5);
    let observed = apply_mask(&field(grid, z), &mask).unwrap();
    let bank = PrioriBank::from_fields(vec![80.0, -15.0], vec![field(grid, z1), field(grid, z2)]).unwrap();
    Instance { observed, mask, bank }
}

/// Direct evaluation of the wave-shifted kernel average: every output cell
/// against every observed cell, no windowing.
pub fn kernel_reference(observed: &SpeedField, mask: &ObservationMask, c_kmh: f64, p: &KernelParams) -> Array2<f64> {
    let g = *observed.grid();
    let c = c_kmh / 3.6;
    let phi = |dx: f64, dt: f64| -> f64 {
        let (u, s) = (dx.abs() / p.sigma, dt.abs() / p.tau);
        if u > p.cutoff || s > p.cutoff {
            return 0.0;
        }
        match p.shape {
            KernelShape::Exponential => (-(u + s)).exp(),
            KernelShape::Gaussian => (-0.5 * (u * u + s * s)).exp(),
        }
    };
    Array2::from_shape_fn(g.shape(), |(j, k)| {
        let (x, t) = (g.x_center(j), g.t_center(k));
        let (mut num, mut den) = (0.0, 0.0);
        let mut nearest = (f64::INFINITY, f64::NAN);
        for jn in 0..g.n_x {
            for kn in 0..g.n_t {
                if !mask.is_observed(jn, kn) {
                    continue;
                }
                let dx = x - g.x_center(jn);
                let dt = t - g.t_center(kn) - dx / c;
                let v = observed.values()[(jn, kn)];
                let w = phi(dx, dt);
                num += w * v;
                den += w;
                let d = dx.abs() / p.sigma + dt.abs() / p.tau;
                if d < nearest.0 {
                    nearest = (d, v);
                }
            }
        }
        if den > 0.0 {
            num / den
        } else {
            nearest.1
        }
    })
}

/// `Σ W^i ⊙ Z^i`, accumulated from zero in bank order.
pub fn fused_reference(weights: &WeightBank, bank: &PrioriBank) -> Array2<f64> {
    let mut acc = Array2::<f64>::zeros(bank.grid().shape());
    for (w, z) in weights.as_slice().iter().zip(bank.fields()) {
        acc = &acc + &(w * z.values());
    }
    acc
}

/// Central-difference gradient of `f` with respect to every entry of `x`.
pub fn central_gradient(x: &Array2<f64>, h: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * h);
    }
    grad
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
