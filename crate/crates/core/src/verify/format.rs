//! `efx-allocation v1`: one `vertex <i>: <edge ids>` line per vertex.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{EdgeId, MultigraphInstance};

pub const ALLOCATION_HEADER: &str = "efx-allocation v1";
const WHAT: &str = "allocation";

pub fn serialize_allocation(alloc: &[Vec<EdgeId>]) -> String {
    let mut out = String::new();
    writeln!(out, "{ALLOCATION_HEADER}").unwrap();
    for (v, edges) in alloc.iter().enumerate() {
        write!(out, "vertex {v}:").unwrap();
        for e in edges {
            write!(out, " {e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Structural parse only; coverage and EFX are for the verifier.
pub fn parse_allocation(text: &str, inst: &MultigraphInstance) -> Result<Vec<Vec<EdgeId>>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, ALLOCATION_HEADER)) => {}
        Some((no, other)) => {
            return Err(Error::parse(WHAT, no, format!("expected `{ALLOCATION_HEADER}`, found `{other}`")))
        }
        None => return Err(Error::parse(WHAT, 1, "empty file")),
    }
    let mut alloc: Vec<Option<Vec<EdgeId>>> = vec![None; inst.n()];
    for (no, line) in lines {
        let rest = line
            .strip_prefix("vertex ")
            .ok_or_else(|| Error::parse(WHAT, no, format!("unexpected line `{line}`")))?;
        let (v, edges) = rest
            .split_once(':')
            .ok_or_else(|| Error::parse(WHAT, no, "expected `vertex <i>: <edges>`"))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|e| Error::parse(WHAT, no, format!("bad vertex `{v}`: {e}")))?;
        if v >= inst.n() {
            return Err(Error::parse(WHAT, no, format!("vertex {v} outside [0, {})", inst.n())));
        }
        if alloc[v].is_some() {
            return Err(Error::parse(WHAT, no, format!("vertex {v} listed twice")));
        }
        let edges = edges
            .split_whitespace()
            .map(|e| {
                e.parse::<EdgeId>()
                    .map_err(|err| Error::parse(WHAT, no, format!("bad edge `{e}`: {err}")))
            })
            .collect::<Result<Vec<_>>>()?;
        alloc[v] = Some(edges);
    }
    Ok(alloc.into_iter().map(Option::unwrap_or_default).collect())
}
