//! Topic-glob plus flat metadata predicates.
//!
//! Grammar: `pattern` or `pattern[key op value, ...]` where `pattern` is a
//! `/`-separated glob (`*` matches one segment, a trailing `**` matches any
//! suffix including none) and `op` is one of `=`, `!=`, `^=` (prefix).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::envelope::MessageEnvelope;
use crate::ids::is_segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagOp {
    Eq,
    Neq,
    Prefix,
}

impl TagOp {
    fn symbol(self) -> &'static str {
        match self {
            TagOp::Eq => "=",
            TagOp::Neq => "!=",
            TagOp::Prefix => "^=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagPredicate {
    pub key: String,
    pub op: TagOp,
    pub value: String,
}

impl TagPredicate {
    /// A missing key satisfies only `!=`.
    pub fn holds(&self, value: Option<&str>) -> bool {
        match (self.op, value) {
            (TagOp::Eq, Some(v)) => v == self.value,
            (TagOp::Neq, Some(v)) => v != self.value,
            (TagOp::Prefix, Some(v)) => v.starts_with(self.value.as_str()),
            (TagOp::Neq, None) => true,
            (_, None) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum GlobSegment {
    Literal(String),
    One,
    Rest,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selector {
    pattern: Vec<GlobSegment>,
    predicates: Vec<TagPredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("selector syntax error at byte {position}: {message}")]
pub struct SelectorSyntax {
    pub position: usize,
    pub message: String,
}

fn syntax(position: usize, message: &str) -> SelectorSyntax {
    SelectorSyntax {
        position,
        message: message.to_string(),
    }
}

impl Selector {
    pub fn parse(text: &str) -> Result<Self, SelectorSyntax> {
        let (pattern_text, preds_text, preds_start) = match text.find('[') {
            Some(open) => {
                if !text.ends_with(']') || text.len() < open + 2 {
                    return Err(syntax(text.len(), "unterminated predicate list"));
                }
                (&text[..open], Some(&text[open + 1..text.len() - 1]), open + 1)
            }
            None => {
                if text.contains(']') {
                    return Err(syntax(text.find(']').unwrap_or(0), "unexpected `]`"));
                }
                (text, None, text.len())
            }
        };
        if pattern_text.is_empty() {
            return Err(syntax(0, "empty topic pattern"));
        }
        let mut pattern = Vec::new();
        let mut offset = 0;
        let parts: Vec<&str> = pattern_text.split('/').collect();
        for (i, seg) in parts.iter().enumerate() {
            let g = match *seg {
                "**" if i + 1 == parts.len() => GlobSegment::Rest,
                "**" => return Err(syntax(offset, "`**` is only allowed as the last segment")),
                "*" => GlobSegment::One,
                s if is_segment(s) => GlobSegment::Literal(s.to_string()),
                _ => return Err(syntax(offset, "invalid pattern segment")),
            };
            pattern.push(g);
            offset += seg.len() + 1;
        }
        let mut predicates = Vec::new();
        if let Some(body) = preds_text {
            if body.contains('[') || body.contains(']') {
                return Err(syntax(preds_start, "nested brackets"));
            }
            let mut pos = preds_start;
            for raw in body.split(',') {
                predicates.push(parse_predicate(raw.trim(), pos)?);
                pos += raw.len() + 1;
            }
        }
        Ok(Selector {
            pattern,
            predicates,
        })
    }

    pub fn predicates(&self) -> &[TagPredicate] {
        &self.predicates
    }

    pub fn matches_topic(&self, topic: &str) -> bool {
        let segs: Vec<&str> = topic.split('/').collect();
        let mut i = 0;
        for g in &self.pattern {
            match g {
                GlobSegment::Rest => return true,
                GlobSegment::One => {
                    if i >= segs.len() {
                        return false;
                    }
                }
                GlobSegment::Literal(l) => {
                    if i >= segs.len() || segs[i] != l {
                        return false;
                    }
                }
            }
            i += 1;
        }
        i == segs.len()
    }

    /// Pure function of the selector and envelope.
    pub fn matches(&self, envelope: &MessageEnvelope) -> bool {
        self.matches_topic(envelope.topic.name())
            && self
                .predicates
                .iter()
                .all(|p| p.holds(envelope.meta(&p.key)))
    }
}

fn parse_predicate(raw: &str, pos: usize) -> Result<TagPredicate, SelectorSyntax> {
    // Order matters: `!=` and `^=` contain `=`.
    let (op, at, len) = if let Some(i) = raw.find("!=") {
        (TagOp::Neq, i, 2)
    } else if let Some(i) = raw.find("^=") {
        (TagOp::Prefix, i, 2)
    } else if let Some(i) = raw.find('=') {
        (TagOp::Eq, i, 1)
    } else {
        return Err(syntax(pos, "predicate needs an operator (=, !=, ^=)"));
    };
    let key = raw[..at].trim();
    let value = raw[at + len..].trim();
    if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'.' || b == b'_') {
        return Err(syntax(pos, "invalid predicate key"));
    }
    Ok(TagPredicate {
        key: key.to_string(),
        op,
        value: value.to_string(),
    })
}

impl FromStr for Selector {
    type Err = SelectorSyntax;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Selector::parse(s)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.pattern.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match g {
                GlobSegment::Literal(l) => f.write_str(l)?,
                GlobSegment::One => f.write_str("*")?,
                GlobSegment::Rest => f.write_str("**")?,
            }
        }
        if !self.predicates.is_empty() {
            f.write_str("[")?;
            for (i, p) in self.predicates.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}{}{}", p.key, p.op.symbol(), p.value)?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}
