//! Seeded ensembles under increasing packet loss: settling slows down, the
//! steady-state error barely moves.
//!
//! cargo run --release --example packet_loss

use median_consensus::analysis::{ensemble_stats, MetricsObserver, Tolerance};
use median_consensus::engine::{run_ensemble_with, SimulationConfig};
use median_consensus::network::build_complete;
use median_consensus::protocol::{ProtocolParams, ValidationMode};
use median_consensus::signals::ReferenceSignal;

fn main() -> median_consensus::Result<()> {
    let z = [580.0, 750.0, 550.0, 650.0, 880.0];
    let params = ProtocolParams::new(3.0, 0.04, 0.0015, 0.1, 5);
    let mut base = SimulationConfig::new(
        params,
        build_complete(5)?,
        z.map(ReferenceSignal::constant).to_vec(),
        40_000,
    );
    // beta sits exactly on 1/n^2: accepted with a warning
    base.options.validation = ValidationMode::Lenient;

    println!("drop   mean t_s   sd t_s   mean eps_ss");
    for drop in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let config = base.clone().with_loss(drop, 0);
        let runs = run_ensemble_with(&config, 50, 1, |_| {
            MetricsObserver::new(Tolerance::default(), 5)
        })?;
        let reports: Vec<_> = runs.iter().map(|m| m.report()).collect::<Result<_, _>>()?;
        let ts = ensemble_stats(
            &reports
                .iter()
                .map(|r| r.settling_time.map(|t| t as f64))
                .collect::<Vec<_>>(),
        )?;
        let ess = ensemble_stats(
            &reports
                .iter()
                .map(|r| Some(r.epsilon_ss))
                .collect::<Vec<_>>(),
        )?;
        println!(
            "{drop:.1}  {:>9.0}  {:>7.0}   {:.3}%",
            ts.mean,
            ts.std_dev,
            100.0 * ess.mean
        );
    }
    Ok(())
}
