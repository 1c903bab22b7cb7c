//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so every criterion reports
//! even when an earlier one fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use median_consensus::analysis::{median, MetricsObserver, MetricsReport};
use median_consensus::cli::scenario::Scenario;
use median_consensus::cli::sweep::{run_sweep, SweepPoint, SweepSpec};
use median_consensus::engine::{
    apply_step, run, run_with, EngineOptions, Observer, SimulationConfig, StationarityProbe,
    StepRecord,
};
use median_consensus::network::{build_chain, build_complete};
use median_consensus::protocol::{
    validate_params, AgentState, CheckStatus, Condition, ProtocolParams, ValidationMode,
};
use median_consensus::signals::ReferenceSignal;
use median_consensus::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CONSTANT_SCENARIOS: [&str; 6] = [
    "sim1_complete_n3",
    "sim2_chain_n3",
    "sim3_complete_n5",
    "sim4_chain_n5",
    "sim5_complete_n31",
    "sim6_chain_n31",
];

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn metrics(s: &Scenario) -> MetricsReport {
    let mut m = MetricsObserver::new(s.tolerance, s.config.n());
    run_with(&s.config, &mut m).expect("run");
    m.report().expect("report")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sweep(name: &str, values: Option<Vec<f64>>) -> Vec<SweepPoint> {
    let path = scenario_path(name);
    let mut spec = SweepSpec::load(&path).expect("sweep file");
    if let Some(v) = values {
        spec.dimensions[0].values = v;
    }
    let base = Scenario::load(&path.parent().unwrap().join(&spec.base)).expect("base scenario");
    run_sweep(&spec, &base).expect("sweep")
}

fn mean_ts(p: &SweepPoint) -> f64 {
    p.settling.expect("settled").mean
}

fn mean_ess(p: &SweepPoint) -> f64 {
    p.steady_state_error.expect("finite error").mean
}

// 1. Median oracle against an insertion-sort reference.
fn median_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut odd, mut even) = (0, 0);
    for case in 0..1000 {
        let n = rng.random_range(1..=50usize);
        let z: Vec<f64> = (0..n)
            .map(|_| {
                let v = rng.random_range(-1e3..1e3);
                // roughly half the vectors carry ties
                if case % 2 == 0 {
                    f64::round(v / 50.0)
                } else {
                    v
                }
            })
            .collect();
        let mut sorted = z.clone();
        for i in 1..sorted.len() {
            let mut j = i;
            // total order, so -0 sorts before +0 and ties are bit-determined
            while j > 0 && sorted[j - 1].total_cmp(&sorted[j]).is_gt() {
                sorted.swap(j - 1, j);
                j -= 1;
            }
        }
        let (lo, hi) = (sorted[(n - 1) / 2], sorted[n / 2]);
        let m = median(&z).map_err(|e| e.to_string())?;
        ensure(
            m.low.to_bits() == lo.to_bits() && m.high.to_bits() == hi.to_bits(),
            || {
                format!(
                    "case {case}: got [{}, {}], oracle [{lo}, {hi}]",
                    m.low, m.high
                )
            },
        )?;
        // endpoints are bit-exact; the midpoint may differ by rounding
        let point = if n % 2 == 1 { lo } else { (lo + hi) / 2.0 };
        let slack = 2.0 * f64::EPSILON * lo.abs().max(hi.abs());
        ensure((m.point - point).abs() <= slack, || {
            format!("case {case}: point {} vs {point}", m.point)
        })?;
        if n % 2 == 1 {
            odd += 1
        } else {
            even += 1
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 vectors ({odd} odd, {even} even) bit-exact in {elapsed:.2?}"
    ))
}

// 2. Every constant-measurement scenario enters and keeps the 5% band.
fn convergence_to_median() -> Outcome {
    let mut parts = Vec::new();
    for name in CONSTANT_SCENARIOS {
        let s = scenario(name);
        let r = metrics(&s);
        let ts = r.settling_time.ok_or_else(|| {
            format!(
                "{name}: band not held at the end of {} steps",
                s.config.total_steps
            )
        })?;
        parts.push(format!("{name} t_s={ts}"));
    }
    Ok(parts.join(", "))
}

// 3. Re-settling after the median steps from 120 to 160.
fn step_tracking() -> Outcome {
    let s = scenario("step_n3");
    let at = match s.config.signals[2] {
        ReferenceSignal::Step { at, .. } => at,
        _ => return Err("step_n3: third signal is not a step".into()),
    };
    let trace = run(&s.config).map_err(|e| e.to_string())?;
    let tol = s.tolerance;
    let settled = |k: usize| {
        let row = &trace.rows[k];
        let m = median(&row.z).unwrap();
        row.x.iter().all(|&x| m.distance(x) <= tol.allowed(&m))
    };
    let before = median(&trace.rows[at - 1].z).unwrap().point;
    let after = median(&trace.rows[at].z).unwrap().point;
    ensure(before == 120.0 && after == 160.0, || {
        format!("median moves {before} -> {after}")
    })?;
    ensure(settled(at - 1), || {
        "not settled on the old median before the step".into()
    })?;
    let last_unsettled = (at..trace.len()).rev().find(|&k| !settled(k));
    let ts = match last_unsettled {
        None => at,
        Some(k) if k + 1 == trace.len() => return Err("new median band not held at the end".into()),
        Some(k) => k + 1,
    };
    let final_x = &trace.last().unwrap().x;
    Ok(format!(
        "re-settled at k={ts} ({} steps after the step), final x = {final_x:.2?}",
        ts - at
    ))
}

// 4. Chain topologies settle more than twice as slowly as complete ones.
fn topology_ordering() -> Outcome {
    let mut parts = Vec::new();
    for (complete, chain) in [
        ("sim1_complete_n3", "sim2_chain_n3"),
        ("sim3_complete_n5", "sim4_chain_n5"),
    ] {
        let a = metrics(&scenario(complete))
            .settling_time
            .ok_or("complete run did not settle")?;
        let b = metrics(&scenario(chain))
            .settling_time
            .ok_or("chain run did not settle")?;
        let ratio = b as f64 / a as f64;
        ensure(ratio > 2.0, || {
            format!("{chain}/{complete} = {b}/{a} = {ratio:.2}")
        })?;
        parts.push(format!("{chain}/{complete} = {b}/{a} = {ratio:.2}x"));
    }
    Ok(parts.join(", "))
}

// 5. Packet loss slows settling but leaves the steady-state error alone.
fn packet_loss_trend() -> Outcome {
    let pts = sweep("loss_sweep", Some(vec![0.0, 0.1, 0.3, 0.5]));
    let ts: Vec<f64> = pts.iter().map(mean_ts).collect();
    let sd0 = pts[0].settling.unwrap().std_dev;
    let ess: Vec<f64> = pts.iter().map(mean_ess).collect();
    ensure(pts.iter().all(|p| p.runs == 100), || {
        "expected 100 runs per point".into()
    })?;
    ensure(sd0 == 0.0, || format!("sigma(t_s) at drop 0 is {sd0}"))?;
    ensure(ts.windows(2).all(|w| w[1] > w[0]), || {
        format!("mean t_s not increasing: {ts:?}")
    })?;
    let (lo, hi) = ess
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    ensure(hi < 2.0 * lo, || format!("eps_ss spread {lo}..{hi}"))?;
    Ok(format!(
        "mean t_s {:?}, sigma0 = 0, eps_ss within {:.2}x",
        ts.iter().map(|t| t.round()).collect::<Vec<_>>(),
        hi / lo
    ))
}

// 6. Direction of each tuning parameter's influence.
fn tuning_trends() -> Outcome {
    let a = sweep("tuning_alpha", None);
    let b = sweep("tuning_beta", None);
    let g = sweep("tuning_gamma", None);
    let k = sweep("tuning_kappa", None);
    ensure(mean_ts(&a[1]) < mean_ts(&a[0]), || {
        format!("alpha: t_s {} vs {}", mean_ts(&a[1]), mean_ts(&a[0]))
    })?;
    ensure(mean_ess(&a[1]) > mean_ess(&a[0]), || {
        "alpha: eps_ss does not grow with alpha".into()
    })?;
    ensure(mean_ts(&b[1]) < mean_ts(&b[0]), || {
        format!("beta: t_s {} vs {}", mean_ts(&b[1]), mean_ts(&b[0]))
    })?;
    ensure(mean_ts(&g[1]) > mean_ts(&g[0]), || {
        format!("gamma: t_s {} vs {}", mean_ts(&g[1]), mean_ts(&g[0]))
    })?;
    ensure(mean_ess(&k[1]) > mean_ess(&k[0]), || {
        "kappa: eps_ss does not grow with kappa".into()
    })?;
    Ok(format!(
        "alpha 1->3: t_s {}->{}, eps {:.2e}->{:.2e}; beta .01->.08: t_s {}->{}; gamma .0015->.01: t_s {}->{}; kappa .02->.4: eps {:.2e}->{:.2e}",
        mean_ts(&a[0]), mean_ts(&a[1]), mean_ess(&a[0]), mean_ess(&a[1]),
        mean_ts(&b[0]), mean_ts(&b[1]), mean_ts(&g[0]), mean_ts(&g[1]),
        mean_ess(&k[0]), mean_ess(&k[1])
    ))
}

// 7. Stationary |y_i| sits near alpha / r_i for every agent.
fn steady_state_y() -> Outcome {
    let s = scenario("sim3_complete_n5");
    let mut m = MetricsObserver::new(s.tolerance, s.config.n());
    let summary = run_with(&s.config, &mut m).map_err(|e| e.to_string())?;
    ensure(m.report().unwrap().settling_time.is_some(), || {
        "run did not settle".into()
    })?;
    let alpha = s.config.params.alpha;
    let ratios: Vec<f64> = summary
        .final_states
        .iter()
        .map(|st: &AgentState| st.y.abs() / (alpha / st.r as f64))
        .collect();
    let shown = ratios
        .iter()
        .map(|r| format!("{r:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    let bad: Vec<usize> = (0..ratios.len())
        .filter(|&i| (ratios[i] - 1.0).abs() > 0.25)
        .collect();
    ensure(bad.is_empty(), || {
        format!("|y_i|/(alpha/r_i) = [{shown}]; agents {bad:?} outside 25%")
    })?;
    Ok(format!("|y_i|/(alpha/r_i) = [{shown}]"))
}

// 8. Final-cycle stationarity residual is small and below the first cycle's.
fn stationarity() -> Outcome {
    let mut parts = Vec::new();
    for name in CONSTANT_SCENARIOS {
        let s = scenario(name);
        let n = s.config.n();
        let mut obs = (
            MetricsObserver::new(s.tolerance, n),
            StationarityProbe::new(n),
        );
        run_with(&s.config, &mut obs).map_err(|e| e.to_string())?;
        let (m, probe) = obs;
        ensure(m.report().unwrap().settling_time.is_some(), || {
            format!("{name}: not converged")
        })?;
        let z: Vec<f64> = s.config.signals.iter().map(|sig| sig.evaluate(0)).collect();
        let range = z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - z.iter().copied().fold(f64::INFINITY, f64::min);
        let (first, last) = (probe.first_cycle().unwrap(), probe.final_cycle().unwrap());
        ensure(last <= 1e-2 * range, || {
            format!("{name}: final residual {last} > {}", 1e-2 * range)
        })?;
        ensure(last < first, || {
            format!("{name}: final {last} not below first {first}")
        })?;
        parts.push(format!("{name} {:.1e}", last / range));
    }
    Ok(format!("final residual / range: {}", parts.join(", ")))
}

// 9. Sine tracking: tight on the slow half, bounded on the fast half.
struct SineTracker {
    transient: usize,
    switch: usize,
    slow: f64,
    fast: f64,
    finite: bool,
}

impl Observer for SineTracker {
    fn observe(&mut self, r: &StepRecord<'_>) {
        let m = median(r.z).unwrap();
        let err = r.x.iter().map(|&x| (x - m.point).abs()).fold(0.0, f64::max);
        self.finite &= err.is_finite();
        if r.k >= self.switch {
            self.fast = self.fast.max(err);
        } else if r.k >= self.transient {
            self.slow = self.slow.max(err);
        }
    }
}

fn sine_tracking() -> Outcome {
    let s = scenario("sine_n5");
    let (amplitude, switch) = match &s.config.signals[0] {
        ReferenceSignal::Sine {
            amplitude,
            switch: Some(sw),
            ..
        } => (*amplitude, sw.at),
        _ => return Err("sine_n5: first signal is not a switching sine".into()),
    };
    let mut t = SineTracker {
        transient: 3000,
        switch,
        slow: 0.0,
        fast: 0.0,
        finite: true,
    };
    run_with(&s.config, &mut t).map_err(|e| e.to_string())?;
    ensure(t.slow < 0.1 * amplitude, || {
        format!("slow-half error {:.3} >= {}", t.slow, 0.1 * amplitude)
    })?;
    ensure(t.finite && t.fast <= 2.0 * amplitude, || {
        format!("fast-half error {:.3} unbounded", t.fast)
    })?;
    Ok(format!(
        "slow half max error {:.3} (< {}), fast half max error {:.3} (<= {})",
        t.slow,
        0.1 * amplitude,
        t.fast,
        2.0 * amplitude
    ))
}

// 10. Engine invariants as property tests.
fn random_config(n: usize, chain: bool, z: &[f64], steps: usize) -> SimulationConfig {
    let topology = if chain {
        build_chain(n)
    } else {
        build_complete(n)
    }
    .unwrap();
    let beta = 0.9 / (n * n) as f64;
    SimulationConfig::new(
        ProtocolParams::new(3.0, beta, beta / 4.0, 0.1, n),
        topology,
        z.iter().map(|&v| ReferenceSignal::constant(v)).collect(),
        steps,
    )
}

fn timed(name: &str, f: impl FnOnce() -> Result<(), String>) -> Result<String, String> {
    let start = Instant::now();
    f()?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("{name} took {elapsed:?}")
    })?;
    Ok(format!("{name} {elapsed:.0?}"))
}

fn engine_invariants() -> Outcome {
    let runner = || {
        TestRunner::new(Config {
            cases: 32,
            failure_persistence: None,
            ..Config::default()
        })
    };
    let z = prop::collection::vec(0.0f64..1000.0, 2..7);

    let reproducible = timed("reproducibility", || {
        runner()
            .run(
                &(z.clone(), any::<bool>(), any::<u64>(), 0.0f64..=1.0),
                |(z, chain, seed, p)| {
                    let c = random_config(z.len(), chain, &z, 300).with_loss(p, seed);
                    prop_assert_eq!(run(&c).unwrap(), run(&c).unwrap());
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
    })?;

    let silent = timed("drop=1 identity", || {
        runner()
            .run(
                &(z.clone(), any::<bool>(), any::<u64>()),
                |(z, chain, seed)| {
                    // only the transmitter's own, loss-free self-update remains,
                    // and x = z, y = 0 is its fixed point
                    let c = random_config(z.len(), chain, &z, 300).with_loss(1.0, seed);
                    let trace = run(&c).unwrap();
                    let x0 = trace.rows[0].x.clone();
                    for row in &trace.rows {
                        prop_assert_eq!(&row.x, &x0);
                        prop_assert!(row.y.iter().all(|&y| y == 0.0));
                        prop_assert!(row.delivered.iter().all(|&i| Some(i) == row.transmitter));
                    }
                    // without self-update nothing moves, even with moving measurements
                    let mut c = c;
                    c.options.self_update = false;
                    c.signals[0] = ReferenceSignal::sine(z[0], 40.0, 25.0, 0.0);
                    let trace = run(&c).unwrap();
                    for row in &trace.rows {
                        prop_assert_eq!(&row.x, &x0);
                        prop_assert!(row.delivered.is_empty());
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
    })?;

    let order = timed("receiver-order independence", || {
        let states = prop::collection::vec(
            (0.0f64..1000.0, -5.0f64..5.0, 0.0f64..1000.0, 1usize..6),
            2..8,
        );
        runner()
            .run(
                &(
                    states,
                    any::<prop::sample::Index>(),
                    any::<u64>(),
                    any::<Option<u8>>(),
                ),
                |(raw, j, shuffle, q)| {
                    let n = raw.len();
                    let states: Vec<AgentState> = raw
                        .iter()
                        .map(|&(x, y, z, r)| AgentState { x, y, z, r })
                        .collect();
                    let p = ProtocolParams::new(3.0, 0.02, 0.005, 0.1, n);
                    let opts = EngineOptions {
                        quantization: q.map(|q| 0.5 + q as f64),
                        ..EngineOptions::default()
                    };
                    let j = j.index(n);
                    let forward: Vec<usize> = (0..n).collect();
                    let mut permuted = forward.clone();
                    let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
                    for i in (1..n).rev() {
                        permuted.swap(i, rng.random_range(0..=i));
                    }
                    let (mut a, mut b) = (states.clone(), states);
                    apply_step(&mut a, j, &forward, &p, &opts);
                    apply_step(&mut b, j, &permuted, &p, &opts);
                    for (sa, sb) in a.iter().zip(&b) {
                        prop_assert_eq!(sa.x.to_bits(), sb.x.to_bits());
                        prop_assert_eq!(sa.y.to_bits(), sb.y.to_bits());
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string())
    })?;

    Ok(format!("{reproducible}, {silent}, {order}"))
}

// 11. The parameter gate on the published configurations.
fn parameter_gate() -> Outcome {
    let sim1 = ProtocolParams::new(9.0, 0.08, 0.003, 0.1, 3);
    let sim3 = ProtocolParams::new(3.0, 0.04, 0.0015, 0.1, 5);
    let strict = validate_params(&sim1, ValidationMode::Strict).map_err(|e| e.to_string())?;
    ensure(strict.passed(), || "Sim 1 does not pass strictly".into())?;
    match validate_params(&sim3, ValidationMode::Strict) {
        Err(Error::ConstraintViolation { condition }) if condition.contains("beta < 1/n^2") => {}
        other => {
            return Err(format!(
                "Sim 3 strict: expected beta boundary violation, got {other:?}"
            ))
        }
    }
    let lenient = validate_params(&sim3, ValidationMode::Lenient).map_err(|e| e.to_string())?;
    ensure(
        lenient.passed()
            && lenient.status_of(Condition::BetaBelowInverseNSquared) == Some(CheckStatus::Warn),
        || format!("Sim 3 lenient: {lenient}"),
    )?;
    Ok("Sim 1 strict pass; Sim 3 strict fail on beta < 1/n^2, lenient pass with warning".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("C1", "median oracle", median_oracle),
        ("C2", "convergence to median", convergence_to_median),
        ("C3", "step tracking", step_tracking),
        ("C4", "topology ordering", topology_ordering),
        ("C5", "packet-loss trend", packet_loss_trend),
        ("C6", "tuning trends", tuning_trends),
        ("C7", "steady-state y", steady_state_y),
        ("C8", "stationarity", stationarity),
        ("C9", "sine tracking", sine_tracking),
        ("C10", "engine invariants", engine_invariants),
        ("C11", "parameter gate", parameter_gate),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id} {title} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {title} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
