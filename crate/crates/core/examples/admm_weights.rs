// ADMM weight estimation on a small instance, compared with the exact two-field optimum.

use adaptive_smoothing::admm::objective;
use adaptive_smoothing::prelude::*;
use ndarray::array;

pub fn run_example() -> anyhow::Result<()> {
    let grid = GridSpec::new(0.0, 0.0, 10.0, 1.0, 2, 4)?;
    let truth = SpeedField::new(grid, array![[70.0, 52.0, 31.0, 24.0], [75.0, 66.0, 40.0, 22.0]])?;
    let free = SpeedField::new(grid, array![[80.0, 78.0, 70.0, 65.0], [82.0, 80.0, 74.0, 68.0]])?;
    let cong = SpeedField::new(grid, array![[40.0, 30.0, 25.0, 20.0], [45.0, 35.0, 28.0, 18.0]])?;
    let bank = PrioriBank::from_fields(vec![80.0, -15.0], vec![free, cong])?;
    let mask = ObservationMask::new(grid, array![[true, true, true, true], [false, false, false, false]])?;
    let observed = apply_mask(&truth, &mask)?;

    let params = AdmmParams { max_iters: 100_000, ..AdmmParams::default() };
    let res = solve(&observed, &mask, &bank, &params)?;
    println!(
        "converged {} after {} iterations, objective {:.3e}, residuals {:.2e}/{:.2e}",
        res.converged, res.iters, res.objective, res.final_residuals.0, res.final_residuals.1
    );
    println!("W_free:\n{:.3}", res.weights.get(0));

    let exact = brute_force_weights(&observed, &mask, &bank)?;
    println!("exact W_free:\n{:.3}", exact.get(0));
    println!("exact objective {:.3e}", objective(&exact, &bank, &observed, &mask)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
