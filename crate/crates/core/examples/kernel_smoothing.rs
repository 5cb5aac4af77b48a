// Smooth four detector rows along a free-flow and a congested wave speed.

use adaptive_smoothing::prelude::*;

pub fn run_example() -> anyhow::Result<()> {
    let grid = GridSpec::new(0.0, 0.0, 50.0, 2.0, 40, 200)?;
    let truth = generate_field(&SyntheticSpec {
        grid,
        free_speed: 80.0,
        congested_speed: 20.0,
        wave_segments: vec![WaveSegment { start_x: 1900.0, start_t: 40.0, speed: -15.0, half_width: 200.0 }],
        noise_std: 2.0,
        seed: 7,
    })?;
    let rows = equally_spaced_detectors(&grid, 4)?;
    let mask = detector_mask(&grid, &rows)?;
    let observed = apply_mask(&truth, &mask)?;

    let (sigma, tau) = KernelParams::default_widths(&grid, rows.len());
    for shape in [KernelShape::Exponential, KernelShape::Gaussian] {
        let params = KernelParams::new(sigma, tau, shape, 6.0)?;
        for c in [80.0, -15.0] {
            let z = smooth_along_wave(&observed, &mask, c, &params)?;
            println!("{shape:?} c = {c:>5} km/h: m_r = {:.4}", relative_error(&z, &truth)?);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
