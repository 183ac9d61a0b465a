//! Restricted instruction language over simulated-network knobs.
//!
//! One instruction per line, `#` starts a comment:
//!
//! ```text
//! set <node> <knob> <value>
//! scale <node> <knob> <factor>
//! limit <node> <knob> <max>
//! reroute <from-node> <to-node> <fraction>
//! repeat <count>
//!   ...
//! end
//! ```
//!
//! Identifiers are case-folded; numbers are exact rationals (`0.9`, `3/4`).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::hash::{StableHash, StableHasher};
use crate::ids::is_segment;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Set { node: String, knob: String, value: Rational },
    Scale { node: String, knob: String, factor: Rational },
    Limit { node: String, knob: String, max: Rational },
    Reroute { from: String, to: String, fraction: Rational },
    Repeat { count: u64, body: Vec<Instr> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: illegal instruction `{opcode}`")]
    Illegal { line: usize, opcode: String },
}

pub const MAX_REPEAT: u64 = 1_000_000;

fn parse_err(line: usize, message: impl Into<String>) -> DslError {
    DslError::Parse {
        line,
        message: message.into(),
    }
}

fn ident(line: usize, raw: &str) -> Result<String, DslError> {
    let s = raw.to_ascii_lowercase();
    if is_segment(&s) {
        Ok(s)
    } else {
        Err(parse_err(line, format!("bad identifier `{raw}`")))
    }
}

fn number(line: usize, raw: &str) -> Result<Rational, DslError> {
    raw.parse().map_err(|_| parse_err(line, format!("bad number `{raw}`")))
}

pub fn parse(source: &str) -> Result<Vec<Instr>, DslError> {
    // Stack of open blocks: (repeat count, header line, body so far).
    let mut stack: Vec<(u64, usize, Vec<Instr>)> = Vec::new();
    let mut top: Vec<Instr> = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = idx + 1;
        let code = raw_line.split('#').next().unwrap_or("");
        let words: Vec<&str> = code.split_whitespace().collect();
        let Some(op) = words.first() else { continue };
        let op = op.to_ascii_lowercase();
        let args = &words[1..];
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(parse_err(line, format!("`{op}` takes {n} arguments, got {}", args.len())))
            }
        };
        let instr = match op.as_str() {
            "set" | "scale" | "limit" => {
                arity(3)?;
                let node = ident(line, args[0])?;
                let knob = ident(line, args[1])?;
                let v = number(line, args[2])?;
                match op.as_str() {
                    "set" => Instr::Set { node, knob, value: v },
                    "scale" => Instr::Scale { node, knob, factor: v },
                    _ => Instr::Limit { node, knob, max: v },
                }
            }
            "reroute" => {
                arity(3)?;
                Instr::Reroute {
                    from: ident(line, args[0])?,
                    to: ident(line, args[1])?,
                    fraction: number(line, args[2])?,
                }
            }
            "repeat" => {
                arity(1)?;
                let count: u64 = args[0]
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad repeat count `{}`", args[0])))?;
                if count > MAX_REPEAT {
                    return Err(parse_err(line, "repeat count too large"));
                }
                stack.push((count, line, Vec::new()));
                continue;
            }
            "end" => {
                arity(0)?;
                let Some((count, _, body)) = stack.pop() else {
                    return Err(parse_err(line, "`end` without `repeat`"));
                };
                Instr::Repeat { count, body }
            }
            _ => return Err(DslError::Illegal { line, opcode: op }),
        };
        match stack.last_mut() {
            Some((_, _, body)) => body.push(instr),
            None => top.push(instr),
        }
    }
    if let Some((_, line, _)) = stack.last() {
        return Err(parse_err(*line, "`repeat` without `end`"));
    }
    Ok(top)
}

struct Canonical<'a>(&'a [Instr], usize);

impl fmt::Display for Canonical<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pad = "  ".repeat(self.1);
        for i in self.0 {
            match i {
                Instr::Set { node, knob, value } => writeln!(f, "{pad}set {node} {knob} {value}")?,
                Instr::Scale { node, knob, factor } => writeln!(f, "{pad}scale {node} {knob} {factor}")?,
                Instr::Limit { node, knob, max } => writeln!(f, "{pad}limit {node} {knob} {max}")?,
                Instr::Reroute { from, to, fraction } => writeln!(f, "{pad}reroute {from} {to} {fraction}")?,
                Instr::Repeat { count, body } => {
                    writeln!(f, "{pad}repeat {count}")?;
                    write!(f, "{}", Canonical(body, self.1 + 1))?;
                    writeln!(f, "{pad}end")?;
                }
            }
        }
        Ok(())
    }
}

/// Formatting-independent rendering of a parsed program.
pub fn canonical_text(program: &[Instr]) -> String {
    Canonical(program, 0).to_string()
}

/// Hash of the canonical rendering, so comments and spacing never matter.
pub fn structural_hash(program: &[Instr]) -> StableHash {
    let mut h = StableHasher::new();
    h.str(&canonical_text(program));
    h.finish()
}
