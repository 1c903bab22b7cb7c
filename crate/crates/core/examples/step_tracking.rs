//! One measurement jumps from 100 to 180, moving the median from 120 to 160;
//! the agents follow.
//!
//! cargo run --example step_tracking

use median_consensus::analysis::median;
use median_consensus::engine::{run, SimulationConfig};
use median_consensus::network::build_complete;
use median_consensus::protocol::ProtocolParams;
use median_consensus::signals::ReferenceSignal;

fn main() -> median_consensus::Result<()> {
    let signals = vec![
        ReferenceSignal::constant(120.0),
        ReferenceSignal::constant(160.0),
        ReferenceSignal::step(100.0, 180.0, 2000),
    ];
    let params = ProtocolParams::new(9.0, 0.08, 0.003, 0.1, 3);
    let trace = run(&SimulationConfig::new(
        params,
        build_complete(3)?,
        signals,
        4000,
    ))?;

    for k in [1990, 2000, 2010, 2030, 2060, 2100, 2150, 2500, 4000] {
        let row = &trace.rows[k];
        let m = median(&row.z)?.point;
        let worst = row.x.iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
        println!(
            "k={k:>4}  median {m:>5}  x = {:>7.2?}  max |x - m| = {worst:.2}",
            row.x
        );
    }
    Ok(())
}
