//! Three agents on a complete graph agree on the median of constant
//! measurements.
//!
//! cargo run --example convergence

use median_consensus::analysis::{compute_metrics, median, Tolerance};
use median_consensus::engine::{run, SimulationConfig};
use median_consensus::network::build_complete;
use median_consensus::protocol::ProtocolParams;
use median_consensus::signals::ReferenceSignal;

fn main() -> median_consensus::Result<()> {
    let z = [600.0, 1200.0, 100.0];
    let params = ProtocolParams::new(9.0, 0.08, 0.003, 0.1, z.len());
    let signals = z.map(ReferenceSignal::constant).to_vec();
    let config = SimulationConfig::new(params, build_complete(z.len())?, signals, 3000);

    let trace = run(&config)?;
    println!("median of {z:?}: {}", median(&z)?.point);
    for k in [0, 10, 50, 100, 500, 3000] {
        let row = &trace.rows[k];
        println!("k={k:>5}  x = {:>8.2?}  y = {:>6.2?}", row.x, row.y);
    }

    let m = compute_metrics(&trace, &Tolerance::default())?;
    println!(
        "settling time {:?}, convergence time {:?}, steady-state error {:.3}%",
        m.settling_time,
        m.convergence_time,
        100.0 * m.epsilon_ss
    );
    Ok(())
}
