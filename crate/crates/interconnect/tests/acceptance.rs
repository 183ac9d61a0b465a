//! Acceptance harness: one pass/fail line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod core_support;
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use interconnect::tracefile;
use interconnect_core::mapek::IterationOutcome;
use interconnect_core::negotiation::Phase;
use interconnect_core::simnet::{run_scenario, ADMISSION_RATE, SCENARIOS};
use interconnect_core::Rational;
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

const PROPERTY_CASES: u32 = 1000;
const PUBSUB_BUDGET: Duration = Duration::from_secs(60);
const FUZZ_PROGRAMS: usize = 10_000;
const DESCRIPTORS: u32 = 1000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn prop<S: Strategy>(name: &str, cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&s, f).map_err(|e| format!("{name}: {e}"))
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn pubsub() -> Outcome {
    use core_support::pubsub::*;
    let t = Instant::now();
    prop("one-shot exactly-once", PROPERTY_CASES, one_shot_input(), one_shot_exactly_once)?;
    prop("durable temporal decoupling", PROPERTY_CASES, durable_input(), durable_temporal_decoupling)?;
    prop("selector purity", PROPERTY_CASES, purity_input(), selector_purity)?;
    prop("audit completeness", PROPERTY_CASES, audit_input(), audit_completeness)?;
    let took = t.elapsed();
    if took >= PUBSUB_BUDGET {
        return Err(format!("4 properties took {took:?}, budget {PUBSUB_BUDGET:?}"));
    }
    Ok(format!("4 properties x {PROPERTY_CASES} cases in {:.1}s", took.as_secs_f64()))
}

fn negotiation() -> Outcome {
    use core_support::negotiation::*;
    let units: std::collections::BTreeSet<&str> = SCALES.iter().map(|s| s.0).collect();
    if CAPABILITIES.len() > 4 || units.len() > 3 {
        return Err("scope exceeds 4 capabilities / 3 units".into());
    }
    let majors: std::collections::BTreeSet<u64> = peers().iter().map(|p| p.major).collect();
    if majors != [1, 2, 3].into_iter().collect() {
        return Err(format!("majors {majors:?}"));
    }
    let r = enumerate();
    if r.violations > 0 {
        return Err(format!("{} counterexamples, first: {:?}", r.violations, r.counterexamples.first()));
    }
    Ok(format!("{} sessions, {} agreed, {} scale-aligned, 0 counterexamples", r.sessions, r.agreed, r.scaled))
}

fn goldens() -> Outcome {
    let mut lines = 0;
    for name in SCENARIOS {
        let a = run_scenario(name, 0).map_err(|e| format!("{name}: {e}"))?;
        let b = run_scenario(name, 0).map_err(|e| format!("{name}: {e}"))?;
        let (ta, tb) = (a.render_trace(), b.render_trace());
        if ta != tb {
            return Err(format!("{name}: two runs differ"));
        }
        let path = golden_dir().join(format!("{name}.trace"));
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let d = tracefile::compare_trace(&a.trace, &golden).map_err(|e| format!("{name}: {e}"))?;
        if !d.is_empty() || ta != golden {
            return Err(format!("{name}: differs from golden\n{d}"));
        }
        if !a.passed() {
            return Err(format!("{name}: failing checks {:?}", a.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>()));
        }
        lines += a.trace.len();
    }
    let fig11 = run_scenario("fig11-capability-mismatch", 0).unwrap();
    let s = fig11.sessions.last().ok_or("fig11 has no session")?;
    let caps: Vec<&str> = s.agreed_capabilities.names().collect();
    if s.phase() != Phase::Agreed || caps != ["standard-gradient-optimization"] {
        return Err(format!("fig11 ended {:?} on {caps:?}", s.phase()));
    }
    let fig13 = run_scenario("fig13-ossification", 0).unwrap();
    let phases: Vec<Phase> = fig13.sessions.iter().map(|s| s.phase()).collect();
    if phases != [Phase::Failed, Phase::Agreed] || fig13.sessions[1].adapter.is_none() {
        return Err(format!("fig13 phases {phases:?}"));
    }
    Ok(format!("{} scenarios replay identically and match goldens ({lines} lines)", SCENARIOS.len()))
}

fn mapek() -> Outcome {
    let (u0, theta, factor) = (Rational::new(95, 100), Rational::new(4, 5), Rational::new(9, 10));
    // Oracle: smallest k with u0 * factor^k <= theta, by exact iteration.
    let (mut k, mut u) = (0u32, u0);
    while u > theta {
        u = u * factor;
        k += 1;
    }
    let run = run_scenario("mapek-congestion", 0).map_err(|e| e.to_string())?;
    let r = run.loop_report.as_ref().ok_or("no loop report")?;
    let outcomes: Vec<IterationOutcome> = r.iterations.iter().map(|i| i.outcome.clone()).collect();
    if r.converged_at != Some(k) || k != 2 {
        return Err(format!("converged_at={:?}, oracle {k}", r.converged_at));
    }
    if outcomes != [IterationOutcome::Adapted, IterationOutcome::Adapted, IterationOutcome::Healthy] {
        return Err(format!("outcomes {outcomes:?}"));
    }
    let expected_rate = factor * factor;
    let detail = &run.check("below-threshold").ok_or("missing check")?.detail;
    if !detail.contains(&format!("utilization={u}")) || !detail.contains(&format!("{ADMISSION_RATE}={expected_rate}")) {
        return Err(format!("final state `{detail}`, oracle utilization={u}"));
    }
    Ok(format!("converged in {k} iterations, final utilization {u}"))
}

fn guard() -> Outcome {
    let r = core_support::guard::fuzz(FUZZ_PROGRAMS);
    let bad = r.deployed_rejected + r.deployed_unverdicted + r.sandbox_state_changes + r.failed_deploy_state_changes;
    if r.programs != FUZZ_PROGRAMS || bad > 0 {
        return Err(format!("{r:?}"));
    }
    Ok(format!(
        "{} programs, {} accepted, {} deployed, 0 unsafe deploys, 0 sandbox state changes",
        r.programs, r.accepted, r.deployed
    ))
}

fn registry() -> Outcome {
    use support::registry::*;
    prop("round trip", DESCRIPTORS, document(), |d| round_trip(&d).map(|_| ()))?;
    prop("query vs scan", DESCRIPTORS, corpus(), |(docs, qs)| query_matches(&docs, &qs))?;
    Ok(format!("{DESCRIPTORS} descriptors round-trip, {DESCRIPTORS} registries agree with scan"))
}

fn agriculture() -> Outcome {
    let inf = run_scenario("agri-inference", 0).map_err(|e| e.to_string())?;
    let tokens = inf.trace.iter().filter(|l| l.entry == "participate-inference").count();
    let per_token = inf
        .trace
        .iter()
        .filter(|l| l.entry == "envelope" && l.detail.starts_with("inference-result results/"))
        .map(|l| l.detail.clone())
        .collect::<std::collections::BTreeSet<_>>();
    let delivered = inf
        .trace
        .iter()
        .filter(|l| l.entry == "envelope" && l.detail.starts_with("inference-result plans/"))
        .count();
    if tokens != 3 || per_token.len() != tokens || delivered != tokens || !inf.passed() {
        return Err(format!("batches=3 tokens={tokens} results={} delivered={delivered}", per_token.len()));
    }
    let learn = run_scenario("agri-learning", 0).map_err(|e| e.to_string())?;
    let updates: Vec<_> = learn
        .trace
        .iter()
        .filter(|l| l.entry == "envelope" && l.detail.starts_with("model-update "))
        .collect();
    let contributors: Vec<&str> = learn
        .trace
        .iter()
        .filter(|l| l.entry == "participate-learning")
        .map(|l| l.actor.as_str())
        .collect();
    let bump = updates.get(1).and_then(|u| u.message_id.clone()).ok_or("no version bump")?;
    let notified: Vec<&str> = learn
        .trace
        .iter()
        .filter(|l| l.entry == "deliver" && l.message_id.as_deref() == Some(bump.as_str()))
        .map(|l| l.actor.as_str())
        .collect();
    if updates.len() != 2 || notified != contributors || !learn.passed() {
        return Err(format!("updates={} contributors={contributors:?} notified={notified:?}", updates.len()));
    }
    Ok(format!("{tokens} batches -> {tokens} results; 1 version bump notified {}/{}", notified.len(), contributors.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("pub/sub properties", pubsub),
        ("negotiation model check", negotiation),
        ("golden trace replay", goldens),
        ("MAPE-K convergence", mapek),
        ("guard fuzz", guard),
        ("registry round trip and query", registry),
        ("agriculture scenarios", agriculture),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
