//! How alpha, beta, gamma and kappa trade speed against accuracy, using the
//! shipped tuning sweep files.
//!
//! cargo run --release --example tuning

use std::path::Path;

use median_consensus::cli::scenario::Scenario;
use median_consensus::cli::sweep::{run_sweep, SweepSpec};

fn main() -> median_consensus::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in [
        "tuning_alpha",
        "tuning_beta",
        "tuning_gamma",
        "tuning_kappa",
    ] {
        let spec = SweepSpec::load(&dir.join(format!("{name}.toml")))?;
        let base = Scenario::load(&dir.join(&spec.base))?;
        let parameter = spec.dimensions[0].parameter.name();
        for point in run_sweep(&spec, &base)? {
            let ts = point
                .settling
                .map(|s| s.mean.to_string())
                .unwrap_or_else(|| "-".into());
            let ess = point.steady_state_error.map_or(f64::NAN, |s| s.mean);
            println!(
                "{parameter:>6} = {:<7}  t_s = {ts:>6}  eps_ss = {:.3}%",
                point.values[0],
                100.0 * ess
            );
        }
    }
    Ok(())
}
