// Relative error of both methods as detectors are added.

use adaptive_smoothing::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let grid = GridSpec::new(0.0, 0.0, 50.0, 2.0, 40, 100)?;
    let truth = generate_field(&SyntheticSpec {
        grid,
        free_speed: 80.0,
        congested_speed: 20.0,
        wave_segments: vec![WaveSegment { start_x: 1900.0, start_t: 20.0, speed: -15.0, half_width: 200.0 }],
        noise_std: 2.0,
        seed: 7,
    })?;
    let counts = [1, 2, 4, 7];
    let config = EstimationConfig::default();
    let asm = coverage_sweep(&truth, &counts, Method::Asm, &config)?;
    let admm = coverage_sweep(&truth, &counts, Method::Admm, &config)?;

    println!("detectors  coverage  ASM     ADMM");
    for (a, b) in asm.iter().zip(&admm) {
        println!("{:>9}  {:>7.1}%  {:.4}  {:.4}", a.detectors, 100.0 * a.coverage, a.relative_error, b.relative_error);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
