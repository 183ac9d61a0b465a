//! File-backed store for human-in-the-loop tickets.

use std::fs;
use std::io;
use std::path::Path;

use interconnect_core::guard::{Decision, Guard, GuardError, HitlTicket};
use interconnect_core::ids::TicketId;

#[derive(Debug, thiserror::Error)]
pub enum TicketStoreError {
    #[error("cannot access ticket store: {0}")]
    Io(#[from] io::Error),
    #[error("ticket store is not valid JSON: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Guard(#[from] GuardError),
}

pub fn load(path: &Path) -> Result<Vec<HitlTicket>, TicketStoreError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(serde_json::from_str(&text)?),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

pub fn save(path: &Path, tickets: &[HitlTicket]) -> Result<(), TicketStoreError> {
    let mut text = serde_json::to_string_pretty(tickets)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Resolves one stored ticket through the guard and writes the store back.
pub fn resolve(path: &Path, id: TicketId, decision: Decision, note: &str) -> Result<HitlTicket, TicketStoreError> {
    let mut guard = Guard::default();
    let tickets = load(path)?;
    for t in tickets.iter().cloned() {
        guard.restore_ticket(t);
    }
    let done = guard.resolve(id, decision, note)?;
    let all: Vec<HitlTicket> = guard.tickets().cloned().collect();
    save(path, &all)?;
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use interconnect_core::guard::{Subject, TicketReason, TicketState};

    #[test]
    fn approve_then_reject_second_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tickets.json");
        assert!(load(&path).unwrap().is_empty());
        let mut g = Guard::default();
        let id = g.open_ticket(Subject::Program("p1".into()), TicketReason::Manual);
        save(&path, &g.tickets().cloned().collect::<Vec<_>>()).unwrap();

        let t = resolve(&path, id, Decision::Approved, "looks fine").unwrap();
        assert_eq!(t.state, TicketState::Approved);
        assert_eq!(load(&path).unwrap()[0].note.as_deref(), Some("looks fine"));
        let again = resolve(&path, id, Decision::Denied, "late");
        assert!(matches!(again, Err(TicketStoreError::Guard(GuardError::TicketClosed(_)))));
    }
}
