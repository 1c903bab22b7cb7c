//! Scenario file in, trace/metrics/plot files out, and the trace read back.
//!
//! cargo run --example scenario_files [SCENARIO] [OUT_DIR]

use std::path::PathBuf;

use median_consensus::cli::output::read_trace;
use median_consensus::cli::scenario::Scenario;
use median_consensus::cli::{cmd_run, RunArgs, META_FILE, TRACE_FILE};
use median_consensus::engine::run;

fn main() -> median_consensus::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/sim2_chain_n3.toml")
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("median-consensus-example"));

    let loaded = Scenario::load(&scenario)?;
    println!(
        "{}: {} agents, {} steps",
        loaded.name,
        loaded.config.n(),
        loaded.config.total_steps
    );
    println!("--- re-emitted scenario ---\n{}", loaded.to_toml()?);

    let outcome = cmd_run(&RunArgs {
        scenario,
        out: out.clone(),
        ..RunArgs::default()
    })?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }

    let parsed = read_trace(&out.join(TRACE_FILE), &out.join(META_FILE))?;
    let fresh = run(&loaded.config)?;
    println!("trace re-parses identically: {}", parsed == fresh);
    println!("settling time {:?}", outcome.metrics.settling_time);
    Ok(())
}
