//! `efx-valuation v1` text format.
//!
//! ```text
//! efx-valuation v1
//! additive 0 0=5 1=3
//! table 1
//! set 0 = 2
//! set 0,1 = 3
//! ```
//!
//! `set - = <int>` names the empty set. Vertices without a block value
//! everything at 0. Table sets that are not listed take the maximum over
//! their covers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ValuationProfile, Value, VertexSpec};
use crate::error::{Error, Result};
use crate::instance::{EdgeId, MultigraphInstance, VertexId};

const HEADER: &str = "efx-valuation v1";
const WHAT: &str = "valuation";
/// Keeps additive sums over 64 edges far from overflow.
const MAX_VALUE: Value = 1 << 48;

/// Canonical text: vertices ascending, additive weights for every relevant
/// edge, table entries only where they differ from the cover maximum.
pub fn serialize_valuation(profile: &ValuationProfile) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    for v in 0..profile.n() {
        if let Some(weights) = profile.additive_weights(v) {
            write!(out, "additive {v}").unwrap();
            for (e, w) in weights {
                write!(out, " {e}={w}").unwrap();
            }
            out.push('\n');
        } else if let Some(entries) = profile.table_entries(v) {
            writeln!(out, "table {v}").unwrap();
            for (set, value) in entries {
                let set = if set.is_empty() {
                    "-".to_string()
                } else {
                    set.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                };
                writeln!(out, "set {set} = {value}").unwrap();
            }
        }
    }
    out
}

pub fn parse_valuation(text: &str, inst: &MultigraphInstance) -> Result<ValuationProfile> {
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

    let mut specs: Vec<Option<(usize, VertexSpec)>> = vec![None; inst.n()];
    let mut open_table: Option<VertexId> = None;

    for (no, line) in lines {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("additive") => {
                let v = parse_vertex(words.next(), inst, no)?;
                let mut weights = BTreeMap::new();
                for item in words {
                    let (e, w) = item
                        .split_once('=')
                        .ok_or_else(|| Error::parse(WHAT, no, format!("expected `<edge>=<int>`, found `{item}`")))?;
                    let e = parse_edge(e, no)?;
                    if weights.insert(e, parse_value(w, no)?).is_some() {
                        return Err(Error::parse(WHAT, no, format!("edge {e} listed twice")));
                    }
                }
                claim(&mut specs, v, no, VertexSpec::Additive(weights))?;
                open_table = None;
            }
            Some("table") => {
                let v = parse_vertex(words.next(), inst, no)?;
                if words.next().is_some() {
                    return Err(Error::parse(WHAT, no, "expected `table <vertex>`"));
                }
                claim(&mut specs, v, no, VertexSpec::Table(BTreeMap::new()))?;
                open_table = Some(v);
            }
            Some("set") => {
                let v = open_table.ok_or_else(|| Error::parse(WHAT, no, "`set` outside a table block"))?;
                let (set, value) = match (words.next(), words.next(), words.next(), words.next()) {
                    (Some(set), Some("="), Some(value), None) => (set, value),
                    _ => return Err(Error::parse(WHAT, no, "expected `set <edges> = <int>`")),
                };
                let mut edges: Vec<EdgeId> = if set == "-" {
                    Vec::new()
                } else {
                    set.split(',').map(|e| parse_edge(e, no)).collect::<Result<_>>()?
                };
                edges.sort_unstable();
                if edges.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::parse(WHAT, no, "repeated edge in set"));
                }
                let value = parse_value(value, no)?;
                let Some((_, VertexSpec::Table(entries))) = &mut specs[v] else {
                    unreachable!("open table block");
                };
                if entries.insert(edges, value).is_some() {
                    return Err(Error::parse(WHAT, no, "set listed twice"));
                }
            }
            _ => return Err(Error::parse(WHAT, no, format!("unexpected line `{line}`"))),
        }
    }

    let mut lines_of = Vec::with_capacity(inst.n());
    let specs: Vec<VertexSpec> = specs
        .into_iter()
        .map(|s| {
            let (line, spec) = s.unwrap_or((0, VertexSpec::Additive(BTreeMap::new())));
            lines_of.push(line);
            spec
        })
        .collect();
    ValuationProfile::from_specs(inst, specs).map_err(|err| match err {
        Error::IrrelevantEdge { vertex, edge } => Error::parse(
            WHAT,
            lines_of[vertex],
            format!("edge {edge} is not a real edge relevant to vertex {vertex}"),
        ),
        Error::DegreeAboveCap { vertex, degree, cap } => Error::parse(
            WHAT,
            lines_of[vertex],
            format!("vertex {vertex} has {degree} relevant edges, above the table cap of {cap}"),
        ),
        other => other,
    })
}

fn claim(
    specs: &mut [Option<(usize, VertexSpec)>],
    v: VertexId,
    no: usize,
    spec: VertexSpec,
) -> Result<()> {
    if specs[v].is_some() {
        return Err(Error::parse(WHAT, no, format!("vertex {v} defined twice")));
    }
    specs[v] = Some((no, spec));
    Ok(())
}

fn parse_vertex(word: Option<&str>, inst: &MultigraphInstance, no: usize) -> Result<VertexId> {
    let word = word.ok_or_else(|| Error::parse(WHAT, no, "missing vertex"))?;
    let v: VertexId = word
        .parse()
        .map_err(|e| Error::parse(WHAT, no, format!("bad vertex `{word}`: {e}")))?;
    if v >= inst.n() {
        return Err(Error::parse(WHAT, no, format!("vertex {v} outside [0, {})", inst.n())));
    }
    Ok(v)
}

fn parse_edge(word: &str, no: usize) -> Result<EdgeId> {
    word.parse()
        .map_err(|e| Error::parse(WHAT, no, format!("bad edge id `{word}`: {e}")))
}

fn parse_value(word: &str, no: usize) -> Result<Value> {
    let v: Value = word
        .parse()
        .map_err(|e| Error::parse(WHAT, no, format!("bad value `{word}`: {e}")))?;
    if v > MAX_VALUE {
        return Err(Error::parse(WHAT, no, format!("value {v} above {MAX_VALUE}")));
    }
    Ok(v)
}
