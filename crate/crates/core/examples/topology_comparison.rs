//! Same agents and parameters on a complete graph and on a chain: the chain
//! needs several times longer to settle.
//!
//! cargo run --release --example topology_comparison

use median_consensus::analysis::{MetricsObserver, Tolerance};
use median_consensus::engine::{run_with, SimulationConfig};
use median_consensus::network::{build_chain, build_complete, neighbor_counts, Topology};
use median_consensus::protocol::ProtocolParams;
use median_consensus::signals::ReferenceSignal;

fn settle(
    topology: Topology,
    params: ProtocolParams,
    z: &[f64],
    steps: usize,
) -> median_consensus::Result<Option<usize>> {
    let signals = z.iter().copied().map(ReferenceSignal::constant).collect();
    let config = SimulationConfig::new(params, topology, signals, steps);
    let mut metrics = MetricsObserver::new(Tolerance::default(), z.len());
    run_with(&config, &mut metrics)?;
    Ok(metrics.report()?.settling_time)
}

fn main() -> median_consensus::Result<()> {
    let cases: [(&[f64], ProtocolParams); 2] = [
        (
            &[600.0, 1200.0, 100.0],
            ProtocolParams::new(9.0, 0.08, 0.003, 0.1, 3),
        ),
        (
            &[580.0, 750.0, 550.0, 650.0, 880.0],
            ProtocolParams::new(3.0, 0.039, 0.0015, 0.1, 5),
        ),
    ];
    for (z, params) in cases {
        let n = z.len();
        let chain = build_chain(n)?;
        println!(
            "n = {n}: chain neighbour counts {:?}",
            neighbor_counts(&chain)
        );
        let complete = settle(build_complete(n)?, params, z, 20_000)?;
        let chain = settle(chain, params, z, 20_000)?;
        println!("  complete settles at {complete:?}, chain at {chain:?}");
        if let (Some(a), Some(b)) = (complete, chain) {
            println!("  ratio {:.2}", b as f64 / a as f64);
        }
    }
    Ok(())
}
