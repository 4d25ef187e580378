//! `efx-instance v1` text format.
//!
//! ```text
//! efx-instance v1
//! n 3
//! edge 0 1
//! edge 1 2
//! ```
//!
//! Edge ids follow file order. Dummy edges are never written.

use std::fmt::Write as _;

use super::{build_instance, MultigraphInstance};
use crate::error::{Error, Result};

const HEADER: &str = "efx-instance v1";
const WHAT: &str = "instance";

pub fn serialize_instance(inst: &MultigraphInstance) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "n {}", inst.n()).unwrap();
    for (a, b) in inst.raw_edges() {
        writeln!(out, "edge {a} {b}").unwrap();
    }
    out
}

pub fn parse_instance(text: &str) -> Result<MultigraphInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, HEADER)) => {}
        Some((no, other)) => {
            return Err(Error::parse(WHAT, no, format!("expected `{HEADER}`, found `{other}`")))
        }
        None => return Err(Error::parse(WHAT, 1, "empty file")),
    }

    let n = match lines.next() {
        Some((no, line)) => {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("n"), Some(v), None) => v
                    .parse::<usize>()
                    .map_err(|e| Error::parse(WHAT, no, format!("bad vertex count: {e}")))?,
                _ => return Err(Error::parse(WHAT, no, "expected `n <int>`")),
            }
        }
        None => return Err(Error::parse(WHAT, 2, "missing `n <int>` line")),
    };

    let mut raw = Vec::new();
    let mut line_of = Vec::new();
    for (no, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["edge", a, b] => {
                let a = a
                    .parse::<usize>()
                    .map_err(|e| Error::parse(WHAT, no, format!("bad endpoint: {e}")))?;
                let b = b
                    .parse::<usize>()
                    .map_err(|e| Error::parse(WHAT, no, format!("bad endpoint: {e}")))?;
                raw.push((a, b));
                line_of.push(no);
            }
            _ => return Err(Error::parse(WHAT, no, format!("unexpected line `{line}`"))),
        }
    }

    build_instance(n, &raw).map_err(|err| match err {
        Error::SelfLoop { index } => Error::parse(WHAT, line_of[index], "self-loop"),
        Error::EndpointOutOfRange { index, vertex, n } => Error::parse(
            WHAT,
            line_of[index],
            format!("endpoint {vertex} outside [0, {n})"),
        ),
        other => other,
    })
}
