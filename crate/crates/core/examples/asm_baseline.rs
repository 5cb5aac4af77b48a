// Conventional adaptive smoothing: tanh blend of the free and congested fields.

use adaptive_smoothing::asm::asm_weight;
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
    let mask = detector_mask(&grid, &equally_spaced_detectors(&grid, 4)?)?;
    let observed = apply_mask(&truth, &mask)?;

    let (sigma, tau) = KernelParams::default_widths(&grid, 4);
    let kernel = KernelParams::new(sigma, tau, KernelShape::Exponential, 6.0)?;
    let bank = build_priori_bank(&observed, &mask, &[80.0, -15.0], &kernel)?;
    let params = AsmParams::default();

    // weight on the congested field for a few speed pairs
    let probe = SpeedField::new(GridSpec::new(0.0, 0.0, 1.0, 1.0, 1, 3)?, ndarray::array![[90.0, 60.0, 20.0]])?;
    let w = asm_weight(&probe, &probe, &params)?;
    println!("w_cong at 90/60/20 km/h: {:.4} {:.4} {:.4}", w[(0, 0)], w[(0, 1)], w[(0, 2)]);

    let est = asm_estimate(&bank, &params)?;
    println!("ASM m_r = {:.4}", relative_error(&est.field, &truth)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
