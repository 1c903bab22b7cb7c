//! The stability conditions under strict, lenient and permissive checking.
//!
//! cargo run --example parameter_validation

use median_consensus::protocol::{validate_params, ProtocolParams, ValidationMode};

fn main() {
    let cases = [
        (
            "three agents",
            ProtocolParams::new(9.0, 0.08, 0.003, 0.1, 3),
        ),
        (
            "five agents, beta = 1/n^2",
            ProtocolParams::new(3.0, 0.04, 0.0015, 0.1, 5),
        ),
        (
            "gamma above beta",
            ProtocolParams::new(3.0, 0.01, 0.02, 0.1, 5),
        ),
    ];
    for (name, params) in cases {
        println!("== {name}");
        for mode in [
            ValidationMode::Strict,
            ValidationMode::Lenient,
            ValidationMode::Permissive,
        ] {
            match validate_params(&params, mode) {
                Ok(report) => {
                    println!("{mode:?}: runs allowed = {}", report.permits_run());
                    print!("{report}");
                }
                Err(e) => println!("{mode:?}: {e}"),
            }
        }
    }
}
