// Bin vehicle trajectories into a space-time speed field.

use adaptive_smoothing::io::{format_field, parse_trajectories};
use adaptive_smoothing::prelude::*;

const CSV: &str = "\
vehicle_id,time_s,position_m,speed_kmh
1,0.5,5,72
1,1.5,25,72
1,2.5,45,70
2,0.5,15,30
2,1.5,23,28
2,2.5,31,29
3,2.5,5,60
";

pub fn run_example() -> anyhow::Result<()> {
    let trajectories = parse_trajectories(CSV, "inline.csv".as_ref())?;
    let grid = GridSpec::new(0.0, 0.0, 10.0, 1.0, 5, 3)?;
    let agg = aggregate_trajectories(&trajectories, &grid)?;
    println!(
        "{} vehicles, {} samples outside the grid, {} empty cells filled",
        trajectories.len(),
        agg.skipped_samples,
        agg.filled_cells
    );
    print!("{}", format_field(&agg.field));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
