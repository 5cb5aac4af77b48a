// Cross-check the solver and smoother against direct computations.

use adaptive_smoothing::admm::objective;
use adaptive_smoothing::prelude::*;
use adaptive_smoothing::synth::SplitMix64;
use ndarray::Array2;

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = SplitMix64::new(42);
    let grid = GridSpec::new(0.0, 0.0, 10.0, 1.0, 4, 5)?;
    let mut draw = |lo: f64, hi: f64| Array2::from_shape_fn((4, 5), |_| lo + (hi - lo) * rng.next_unit());
    let truth = SpeedField::new(grid, draw(0.0, 110.0))?;
    let bank = PrioriBank::from_fields(
        vec![80.0, -15.0],
        vec![SpeedField::new(grid, draw(60.0, 100.0))?, SpeedField::new(grid, draw(5.0, 40.0))?],
    )?;
    let mask = detector_mask(&grid, &[0, 2])?;
    let observed = apply_mask(&truth, &mask)?;

    let res = solve(&observed, &mask, &bank, &AdmmParams { max_iters: 100_000, ..AdmmParams::default() })?;
    let exact = brute_force_weights(&observed, &mask, &bank)?;
    let best = objective(&exact, &bank, &observed, &mask)?;
    println!("ADMM objective {:.3e}, exact optimum {:.3e}", res.objective, best);

    // smoother against one cell computed by hand
    let params = KernelParams::new(10.0, 1.0, KernelShape::Exponential, 6.0)?;
    let z = smooth_along_wave(&observed, &mask, 80.0, &params)?;
    let (j, k) = (1, 2);
    let (x, t) = (grid.x_center(j), grid.t_center(k));
    let (mut num, mut den) = (0.0, 0.0);
    for jn in [0, 2] {
        for kn in 0..5 {
            let dx = x - grid.x_center(jn);
            let dt = t - grid.t_center(kn) - dx / (80.0 / 3.6);
            let w = (-(dx.abs() / 10.0 + dt.abs() / 1.0)).exp();
            num += w * truth.values()[(jn, kn)];
            den += w;
        }
    }
    println!("cell ({j},{k}): smoother {:.6}, direct {:.6}", z.values()[(j, k)], num / den);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
