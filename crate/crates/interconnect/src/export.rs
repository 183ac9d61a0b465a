//! JSON exports for plans, negotiation transcripts and loop reports.

use interconnect_core::broker::TaskPlan;
use interconnect_core::mapek::LoopReport;
use interconnect_core::negotiation::NegotiationSession;
use serde::Serialize;

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("export types serialize");
    s.push('\n');
    s
}

pub fn plan_json(p: &TaskPlan) -> String {
    pretty(p)
}

pub fn transcript_json(s: &NegotiationSession) -> String {
    pretty(s)
}

pub fn loop_report_json(r: &LoopReport) -> String {
    pretty(r)
}

pub fn parse_plan(text: &str) -> serde_json::Result<TaskPlan> {
    serde_json::from_str(text)
}

pub fn parse_transcript(text: &str) -> serde_json::Result<NegotiationSession> {
    serde_json::from_str(text)
}

pub fn parse_loop_report(text: &str) -> serde_json::Result<LoopReport> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use interconnect_core::simnet::run_scenario;

    #[test]
    fn exports_round_trip() {
        let run = run_scenario("fig7-decompose", 0).unwrap();
        for p in &run.plans {
            assert_eq!(&parse_plan(&plan_json(p)).unwrap(), p);
        }
        let run = run_scenario("fig11-capability-mismatch", 0).unwrap();
        assert!(!run.sessions.is_empty());
        for s in &run.sessions {
            assert_eq!(&parse_transcript(&transcript_json(s)).unwrap(), s);
        }
        let run = run_scenario("mapek-congestion", 0).unwrap();
        let r = run.loop_report.as_ref().unwrap();
        assert_eq!(&parse_loop_report(&loop_report_json(r)).unwrap(), r);
    }
}
