//! Lyapunov value, the instability band and the y bands along a chain run.
//!
//! cargo run --example lyapunov

use median_consensus::engine::{run, SimulationConfig};
use median_consensus::network::{build_chain, neighbor_counts};
use median_consensus::protocol::{instability_band, ProtocolParams};
use median_consensus::signals::ReferenceSignal;

fn main() -> median_consensus::Result<()> {
    let z = [580.0, 750.0, 550.0, 650.0, 880.0];
    let params = ProtocolParams::new(3.0, 0.039, 0.0015, 0.1, 5);
    let topology = build_chain(5)?;
    let r_min = *neighbor_counts(&topology).iter().min().expect("agents");
    let band = instability_band(&params, r_min)?;
    let trace = run(&SimulationConfig::new(
        params,
        topology,
        z.map(ReferenceSignal::constant).to_vec(),
        3000,
    ))?;

    println!("instability band {band:.2}, y bands {:.2?}", trace.y_bands);
    let v = trace.lyapunov_series();
    let first_inside = v.iter().position(|&v| v <= band);
    println!(
        "V starts at {:.1}, first inside the band at step {first_inside:?}",
        v[0]
    );
    for k in (0..=3000).step_by(300) {
        let flags = trace.rows[k].band_violations.iter().filter(|&&f| f).count();
        println!(
            "k={k:>4}  V = {:>8.3}  agents outside their y band: {flags}",
            v[k]
        );
    }
    Ok(())
}
