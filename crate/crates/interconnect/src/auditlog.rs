//! Audit log flush format: `seq|logicalTime|op|actor|messageId|modelId|outcome`.

use std::io::{self, Write};

use interconnect_core::fabric::{AuditFilter, AuditOp, AuditRecord, Outcome};
use interconnect_core::{MessageId, ModelId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("audit log line {line}: {reason}")]
pub struct AuditParseError {
    pub line: usize,
    pub reason: String,
}

pub fn format_record(r: &AuditRecord) -> String {
    let dash = |s: Option<String>| s.unwrap_or_else(|| "-".into());
    format!(
        "{}|{}|{}|{}|{}|{}|{}",
        r.seq,
        r.logical_time,
        r.op.as_str(),
        r.actor,
        dash(r.message_id.map(|m| m.to_string())),
        dash(r.model_id.as_ref().map(|m| m.to_string())),
        r.outcome
    )
}

pub fn flush<'a, W: Write>(records: impl IntoIterator<Item = &'a AuditRecord>, mut out: W) -> io::Result<()> {
    for r in records {
        writeln!(out, "{}", format_record(r))?;
    }
    out.flush()
}

pub fn parse_record(text: &str, line: usize) -> Result<AuditRecord, AuditParseError> {
    let err = |reason: &str| AuditParseError {
        line,
        reason: reason.to_string(),
    };
    let f: Vec<&str> = text.split('|').collect();
    if f.len() != 7 {
        return Err(err(&format!("expected 7 fields, found {}", f.len())));
    }
    let op: AuditOp = f[2].parse().map_err(|_| err("unknown op"))?;
    if f[3].is_empty() {
        return Err(err("empty actor"));
    }
    let message_id = match f[4] {
        "-" => None,
        s => Some(MessageId::parse(s).ok_or_else(|| err("bad message id"))?),
    };
    let model_id = match f[5] {
        "-" => None,
        s => Some(ModelId::new(s).map_err(|_| err("bad model id"))?),
    };
    let outcome: Outcome = f[6].parse().map_err(|_| err("bad outcome"))?;
    Ok(AuditRecord {
        seq: f[0].parse().map_err(|_| err("bad seq"))?,
        logical_time: f[1].parse().map_err(|_| err("bad logical time"))?,
        op,
        actor: f[3].to_string(),
        message_id,
        model_id,
        outcome,
    })
}

pub fn parse_log(text: &str) -> Result<Vec<AuditRecord>, AuditParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(l, i + 1))
        .collect()
}

pub fn query<'a>(records: &'a [AuditRecord], filter: &AuditFilter) -> Vec<&'a AuditRecord> {
    records.iter().filter(|r| filter.accepts(r)).collect()
}
