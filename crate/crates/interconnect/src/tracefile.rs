//! Trace files and golden comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use interconnect_core::simnet::trace::{self, TraceLine, TraceParseError};
use similar::{ChangeTag, TextDiff};

#[derive(Debug, thiserror::Error)]
pub enum GoldenError {
    #[error("cannot read golden `{path}`: {source}")]
    Io { path: String, source: io::Error },
    #[error("golden does not parse: {0}")]
    Parse(#[from] TraceParseError),
}

pub fn write_trace(path: &Path, lines: &[TraceLine]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, trace::render(lines))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceLine>, GoldenError> {
    let text = fs::read_to_string(path).map_err(|source| GoldenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(trace::parse(&text)?)
}

/// Rewrites `m-<n>` tokens to `m#<k>`, numbering ids by first appearance.
struct Canon {
    ids: BTreeMap<String, usize>,
}

impl Canon {
    fn id(&mut self, raw: &str) -> String {
        let next = self.ids.len() + 1;
        let k = *self.ids.entry(raw.to_string()).or_insert(next);
        format!("m#{k}")
    }

    fn text(&mut self, s: &str) -> String {
        let b = s.as_bytes();
        let mut out = String::with_capacity(s.len());
        let mut i = 0;
        while i < b.len() {
            let boundary = i == 0 || !b[i - 1].is_ascii_alphanumeric();
            if boundary && b[i] == b'm' && b.get(i + 1) == Some(&b'-') {
                let digits = b[i + 2..].iter().take_while(|c| c.is_ascii_digit()).count();
                let end = i + 2 + digits;
                if digits > 0 && b.get(end).is_none_or(|c| !c.is_ascii_alphanumeric()) {
                    out.push_str(&self.id(&s[i..end]));
                    i = end;
                    continue;
                }
            }
            let ch = s[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
        out
    }
}

/// Comparison form of a trace: sequence numbers dropped, message ids canonical.
pub fn canonical(lines: &[TraceLine]) -> Vec<String> {
    let mut c = Canon { ids: BTreeMap::new() };
    lines
        .iter()
        .map(|l| {
            let mid = l.message_id.as_deref().map_or_else(|| "-".to_string(), |m| c.text(m));
            let detail = c.text(&l.detail);
            let renamed = TraceLine {
                seq: 0,
                message_id: Some(mid),
                detail,
                ..l.clone()
            };
            let text = renamed.to_string();
            text.split_once('|').map(|(_, rest)| rest.to_string()).unwrap_or(text)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffLine {
    Missing(String),
    Extra(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceDiff {
    pub lines: Vec<DiffLine>,
}

impl TraceDiff {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }
}

impl fmt::Display for TraceDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            match l {
                DiffLine::Missing(s) => writeln!(f, "-{s}")?,
                DiffLine::Extra(s) => writeln!(f, "+{s}")?,
            }
        }
        Ok(())
    }
}

pub fn diff(actual: &[TraceLine], golden: &[TraceLine]) -> TraceDiff {
    let a = canonical(actual);
    let g = canonical(golden);
    let a_refs: Vec<&str> = a.iter().map(String::as_str).collect();
    let g_refs: Vec<&str> = g.iter().map(String::as_str).collect();
    let d = TextDiff::from_slices(&g_refs, &a_refs);
    let lines = d
        .iter_all_changes()
        .filter_map(|c| match c.tag() {
            ChangeTag::Equal => None,
            ChangeTag::Delete => Some(DiffLine::Missing(c.value().to_string())),
            ChangeTag::Insert => Some(DiffLine::Extra(c.value().to_string())),
        })
        .collect();
    TraceDiff { lines }
}

/// Compares a trace against golden file text.
pub fn compare_trace(actual: &[TraceLine], golden_text: &str) -> Result<TraceDiff, TraceParseError> {
    Ok(diff(actual, &trace::parse(golden_text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(seq: u64, mid: Option<&str>, detail: &str) -> TraceLine {
        TraceLine {
            seq,
            logical_time: 1,
            entry: "publish".into(),
            actor: "farm-1".into(),
            message_id: mid.map(str::to_string),
            model_id: None,
            detail: detail.into(),
        }
    }

    #[test]
    fn self_diff_is_empty() {
        let t = vec![line(1, Some("m-0"), "ok"), line(2, None, "applied from m-0")];
        assert!(diff(&t, &t).is_empty());
        assert!(compare_trace(&t, &trace::render(&t)).unwrap().is_empty());
    }

    #[test]
    fn message_ids_are_canonical() {
        let a = vec![line(1, Some("m-4"), "ok"), line(2, None, "from m-4 farm-1 m-40x")];
        let b = vec![line(7, Some("m-9"), "ok"), line(8, None, "from m-9 farm-1 m-40x")];
        assert!(diff(&a, &b).is_empty());
        assert_eq!(canonical(&a)[1], "1|publish|farm-1|-|-|from m#1 farm-1 m-40x");
    }

    #[test]
    fn extra_envelope_is_one_line() {
        let g = vec![line(1, Some("m-0"), "ok"), line(3, Some("m-1"), "ok")];
        let mut a = g.clone();
        a.insert(1, line(2, None, "extra"));
        a[2].seq = 3;
        let d = diff(&a, &g);
        assert_eq!(d.len(), 1, "{d}");
        assert!(matches!(&d.lines[0], DiffLine::Extra(s) if s.contains("extra")));
    }

    #[test]
    fn corrupt_golden() {
        assert!(compare_trace(&[], "1|2|3\n").is_err());
    }
}
