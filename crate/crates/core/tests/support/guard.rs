//! Guard fuzzing: randomly generated programs against the deploy gate.

use interconnect_core::guard::{Guard, GuardError, GuardedProgram, HitlPolicy, Invariant, OFFERED_LOAD};
use interconnect_core::simnet::{NetworkState, NodeKind, NodeSpec, SimNode, ADMISSION_RATE, RATE_LIMIT};
use interconnect_core::{NodeId, Rational};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

const NODES: [&str; 4] = ["cell-1", "cell-2", "ric-1", "ghost"];
const KNOBS: [&str; 5] = [RATE_LIMIT, ADMISSION_RATE, "prb-share", "tx-power", "bogus"];
const VALUES: [&str; 10] = ["0", "1/2", "1", "3/4", "2", "-1", "100", "1001", "0.9", "x"];
const EFFECTS: [&str; 6] = [RATE_LIMIT, ADMISSION_RATE, OFFERED_LOAD, "prb-share", "cell-1.rate-limit", "ric-1.tx-power"];
const INVARIANTS: [&str; 4] = ["throughput > 0", "utilization <= 1", "cell-1.admission-rate >= 1/2", "ric-1.tx-power < 90"];

fn line() -> impl Strategy<Value = String> {
    let node = prop::sample::select(&NODES[..]);
    let knob = prop::sample::select(&KNOBS[..]);
    let value = prop::sample::select(&VALUES[..]);
    let op = prop::sample::select(&["set", "scale", "limit"][..]);
    prop_oneof![
        6 => (op, node.clone(), knob, value.clone()).prop_map(|(o, n, k, v)| format!("{o} {n} {k} {v}")),
        2 => (node.clone(), node, value).prop_map(|(a, b, v)| format!("reroute {a} {b} {v}")),
        1 => prop::sample::select(&["repeat 3", "repeat 0", "repeat 200000", "repeat x"][..]).prop_map(String::from),
        1 => Just("end".to_string()),
        1 => prop::sample::select(&["format disk", "# note", "", "set cell-1", "SET CELL-1 RATE-LIMIT 5"][..]).prop_map(String::from),
    ]
}

#[derive(Debug, Clone)]
pub struct Case {
    pub source: String,
    pub effects: Vec<&'static str>,
    pub invariants: Vec<&'static str>,
    pub policy: HitlPolicy,
}

pub fn case() -> impl Strategy<Value = Case> {
    (
        prop::collection::vec(line(), 0..8),
        prop::sample::subsequence(&EFFECTS[..], 0..=EFFECTS.len()),
        prop::sample::subsequence(&INVARIANTS[..], 0..=2),
        prop_oneof![Just(HitlPolicy::Off), Just(HitlPolicy::EscalateOnly), Just(HitlPolicy::Strict)],
    )
        .prop_map(|(lines, effects, invariants, policy)| Case {
            source: lines.join("\n"),
            effects,
            invariants,
            policy,
        })
}

pub fn live() -> NetworkState {
    let q = |s: &str| s.parse::<Rational>().unwrap();
    let mut s = NetworkState::default();
    for spec in [
        NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.9")),
        NodeSpec::new("cell-2", NodeKind::UeGen).load(q("0.3")),
        NodeSpec::new("ric-1", NodeKind::Ric),
    ] {
        s.insert(SimNode::from_spec(spec).unwrap());
    }
    s
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub programs: usize,
    pub accepted: usize,
    pub deployed: usize,
    pub deployed_rejected: usize,
    pub deployed_unverdicted: usize,
    pub sandbox_state_changes: usize,
    pub failed_deploy_state_changes: usize,
}

/// Sandboxes one program, then tries to deploy it, a tampered copy and a
/// never-sandboxed twin.
pub fn run_case(c: &Case, r: &mut FuzzReport) {
    let mut guard = Guard::new(c.policy);
    let mut state = live();
    let invariants: Vec<Invariant> = c.invariants.iter().map(|i| i.parse().unwrap()).collect();
    let p = GuardedProgram::new("fuzz", &c.source, &c.effects, "fuzzer");
    r.programs += 1;

    let before = state.state_hash();
    let verdict = guard.sandbox_run(&p, &invariants, &state);
    if state.state_hash() != before {
        r.sandbox_state_changes += 1;
    }
    r.accepted += usize::from(verdict.accepted());

    let target = NodeId::new("cell-1").unwrap();
    let tampered = GuardedProgram::new("fuzz", &format!("{}\nset cell-1 rate-limit 7", c.source), &c.effects, "fuzzer");
    let twin = GuardedProgram::new("fuzz-twin", &c.source, &c.effects, "fuzzer");
    for (prog, sandboxed) in [(&tampered, false), (&twin, false), (&p, true)] {
        let prior = state.state_hash();
        match guard.deploy(prog, &target, &mut state) {
            Ok(_) => {
                r.deployed += 1;
                if !sandboxed {
                    r.deployed_unverdicted += 1;
                } else if !verdict.accepted() {
                    r.deployed_rejected += 1;
                }
            }
            Err(e) => {
                if state.state_hash() != prior {
                    r.failed_deploy_state_changes += 1;
                }
                if !sandboxed {
                    assert!(matches!(e, GuardError::DeployWithoutVerdict(_)), "{e}");
                }
            }
        }
    }
}

/// Generates `n` cases from a fixed seed and runs them all.
pub fn fuzz(n: usize) -> FuzzReport {
    let mut runner = TestRunner::deterministic();
    let strat = case();
    let mut r = FuzzReport::default();
    for _ in 0..n {
        let c = strat.new_tree(&mut runner).expect("strategy never rejects").current();
        run_case(&c, &mut r);
    }
    r
}
