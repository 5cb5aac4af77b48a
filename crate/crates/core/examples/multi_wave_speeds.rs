// Grow the ADMM bank one (congested, free) wave-speed pair at a time.

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
    let mask = detector_mask(&grid, &equally_spaced_detectors(&grid, 4)?)?;
    let pairs = [(-20.0, 90.0), (-17.5, 80.0), (-15.0, 70.0)];
    let config = EstimationConfig::default();

    println!("pairs  m  objective   m_r     converged");
    for p in wavespeed_sweep(&truth, &mask, &pairs, &config)? {
        println!(
            "{:>5} {:>2}  {:.3e}  {:.4}  {}",
            p.pairs,
            p.wave_speeds.len(),
            p.objective,
            p.relative_error,
            p.converged
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
