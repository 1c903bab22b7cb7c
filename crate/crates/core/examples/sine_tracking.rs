//! Five phase-shifted sines. Slow signals are tracked closely; after the
//! period drops the agents follow with a delay.
//!
//! cargo run --release --example sine_tracking

use median_consensus::analysis::median;
use median_consensus::engine::{run_with, Observer, SimulationConfig, StepRecord};
use median_consensus::network::build_complete;
use median_consensus::protocol::{ProtocolParams, ValidationMode};
use median_consensus::signals::{PeriodSwitch, ReferenceSignal};

/// Worst tracking error per block of `block` steps.
struct BlockError {
    block: usize,
    worst: Vec<f64>,
}

impl Observer for BlockError {
    fn observe(&mut self, r: &StepRecord<'_>) {
        let m = median(r.z).expect("finite").point;
        let err = r.x.iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
        let b = r.k / self.block;
        if self.worst.len() <= b {
            self.worst.resize(b + 1, 0.0);
        }
        self.worst[b] = self.worst[b].max(err);
    }
}

fn main() -> median_consensus::Result<()> {
    let signals = (0..5)
        .map(|i| ReferenceSignal::Sine {
            offset: 300.0 + 20.0 * i as f64,
            amplitude: 50.0,
            period: 6000.0,
            phase: 0.4 * i as f64,
            switch: Some(PeriodSwitch {
                at: 24_000,
                period: 1000.0,
            }),
        })
        .collect();
    let params = ProtocolParams::new(3.0, 0.04, 0.0015, 0.1, 5);
    let mut config = SimulationConfig::new(params, build_complete(5)?, signals, 36_000);
    config.options.validation = ValidationMode::Lenient;

    let mut errors = BlockError {
        block: 3000,
        worst: Vec::new(),
    };
    run_with(&config, &mut errors)?;
    let total = config.total_steps;
    for (b, e) in errors
        .worst
        .iter()
        .enumerate()
        .filter(|(b, _)| b * 3000 < total)
    {
        let phase = if b * 3000 >= 24_000 { "fast" } else { "slow" };
        let end = ((b + 1) * 3000).min(total + 1);
        println!(
            "steps {:>5}..{:<5} ({phase})  max |x - m| = {e:.2}",
            b * 3000,
            end
        );
    }
    Ok(())
}
