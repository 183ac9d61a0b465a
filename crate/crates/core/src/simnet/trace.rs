//! Line-oriented replay traces derived from the fabric journal.
//!
//! One line per journal entry: `seq|logicalTime|entry|actor|messageId|modelId|detail`,
//! with `-` for absent ids. `\`, `|` and newlines inside fields are escaped.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::fabric::JournalEntry;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub seq: u64,
    pub logical_time: u64,
    pub entry: String,
    pub actor: String,
    pub message_id: Option<String>,
    pub model_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\p"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match it.next()? {
            '\\' => '\\',
            'p' => '|',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

fn opt(s: &Option<String>) -> String {
    s.as_deref().map_or_else(|| "-".to_string(), escape)
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}|{}|{}|{}",
            self.seq,
            self.logical_time,
            escape(&self.entry),
            escape(&self.actor),
            opt(&self.message_id),
            opt(&self.model_id),
            escape(&self.detail)
        )
    }
}

impl TraceLine {
    /// `line` is the 1-based position used in errors.
    pub fn parse(text: &str, line: usize) -> Result<Self, TraceParseError> {
        let err = |reason: &str| TraceParseError {
            line,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = text.split('|').collect();
        if fields.len() != 7 {
            return Err(err(&format!("expected 7 fields, found {}", fields.len())));
        }
        let seq = fields[0].parse().map_err(|_| err("bad seq"))?;
        let logical_time = fields[1].parse().map_err(|_| err("bad logical time"))?;
        let un = |s: &str| unescape(s).ok_or_else(|| err("bad escape"));
        let id = |s: &str| if s == "-" { Ok(None) } else { un(s).map(Some) };
        let entry = un(fields[2])?;
        if entry.is_empty() {
            return Err(err("empty entry kind"));
        }
        Ok(TraceLine {
            seq,
            logical_time,
            entry,
            actor: un(fields[3])?,
            message_id: id(fields[4])?,
            model_id: id(fields[5])?,
            detail: un(fields[6])?,
        })
    }
}

pub fn from_journal(journal: &[JournalEntry]) -> Vec<TraceLine> {
    journal
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let seq = i as u64 + 1;
            match e {
                JournalEntry::Audit { record, note } => TraceLine {
                    seq,
                    logical_time: record.logical_time,
                    entry: record.op.as_str().to_string(),
                    actor: record.actor.clone(),
                    message_id: record.message_id.map(|m| m.to_string()),
                    model_id: record.model_id.as_ref().map(|m| m.to_string()),
                    detail: match note {
                        Some(n) => format!("{} {n}", record.outcome),
                        None => record.outcome.to_string(),
                    },
                },
                JournalEntry::Envelope {
                    logical_time,
                    id,
                    topic,
                    kind,
                    origin,
                    model,
                } => TraceLine {
                    seq,
                    logical_time: *logical_time,
                    entry: "envelope".into(),
                    actor: origin.clone(),
                    message_id: Some(id.to_string()),
                    model_id: model.clone(),
                    detail: format!("{kind} {topic}"),
                },
                JournalEntry::Note {
                    logical_time,
                    actor,
                    text,
                } => TraceLine {
                    seq,
                    logical_time: *logical_time,
                    entry: "note".into(),
                    actor: actor.clone(),
                    message_id: None,
                    model_id: None,
                    detail: text.clone(),
                },
            }
        })
        .collect()
}

/// One line per trace entry, newline-terminated.
pub fn render(lines: &[TraceLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}

/// Parses a rendered trace; blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<TraceLine>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| TraceLine::parse(l, i + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_round_trips() {
        let l = TraceLine {
            seq: 3,
            logical_time: 9,
            entry: "note".into(),
            actor: "a".into(),
            message_id: None,
            model_id: Some("m|x".into()),
            detail: "pipe | back \\ nl \n end".into(),
        };
        let text = l.to_string();
        assert!(!text.contains('\n'));
        assert_eq!(text.split('|').count(), 7);
        assert_eq!(TraceLine::parse(&text, 1).unwrap(), l);
    }

    #[test]
    fn corrupted_lines_are_rejected() {
        assert_eq!(parse("1|2|note|a|-|-\n").unwrap_err().line, 1);
        assert!(parse("x|2|note|a|-|-|d\n").is_err());
        assert!(parse("1|2|note|a|-|-|bad\\q\n").is_err());
        assert_eq!(parse("\n1|2|note|a|-|-|ok\n").unwrap().len(), 1);
    }
}
