//! Re-runs the plant/gain calibration search and prints the winning
//! configuration as a `schema: 1` JSON document.
//!
//!     cargo run --release -p hapticsim-core --example calibrate > configs/plant.json

use hapticsim_core::pneumo::tuning::{calibrate, TuningGrid};
use hapticsim_core::pneumo::PneumoConfig;

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let grid = TuningGrid::default();
    let cal = calibrate(&grid, threads)
        .expect("calibration runs")
        .expect("at least one feasible plant");
    eprintln!(
        "{} of {} plants feasible; score {:.3}",
        cal.plants_feasible, cal.plants_tried, cal.score
    );
    eprintln!("{:#?}", cal.evaluation);
    let cfg = PneumoConfig {
        schema: 1,
        plant: cal.plant,
        gains: cal.gains,
    };
    print!("{}", cfg.to_json());
}
