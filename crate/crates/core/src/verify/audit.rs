//! Parser and auditor for `efx-trace v1` files.
//!
//! The audit recomputes envy, availability, the per-regime envy structure,
//! best non-parallel selections and the unallocated-bundle bound from the raw
//! holdings of each stage, then compares against the claims in the file.

use std::collections::{BTreeMap, BTreeSet};

use crate::cuts::BundleId;
use crate::error::{Error, Result};
use crate::instance::{EdgeId, MultigraphInstance, Pair, Regime, VertexId};
use crate::valuation::{Value, ValuationProfile};

use super::{completeness_witness, efx_witness, Report, Verdict};

const WHAT: &str = "trace";
const HEADER: &str = "efx-trace v1";
/// Largest pool for which best selections are enumerated subset by subset.
const POOL_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedBundle {
    pub id: BundleId,
    pub pair: Pair,
    pub label: String,
    pub edges: Vec<EdgeId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedStage {
    pub name: String,
    pub line: usize,
    pub bundles: Vec<ParsedBundle>,
    pub holdings: Vec<Vec<BundleId>>,
    pub unallocated: Vec<BundleId>,
    pub parks: Vec<(BundleId, VertexId, String)>,
    pub metrics: Vec<(String, u64)>,
    pub checks: Vec<Verdict>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedTrace {
    pub regime: Option<Regime>,
    pub n: usize,
    pub prealloc: Vec<(VertexId, EdgeId)>,
    pub notes: Vec<String>,
    pub stages: Vec<ParsedStage>,
    pub allocation: Option<Vec<Vec<EdgeId>>>,
    pub certificate: Option<String>,
}

fn ids(no: usize, s: &str) -> Result<Vec<usize>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.parse().map_err(|e| Error::parse(WHAT, no, format!("bad id `{t}`: {e}"))))
        .collect()
}

fn num(no: usize, s: Option<&str>, field: &str) -> Result<usize> {
    let s = s.ok_or_else(|| Error::parse(WHAT, no, format!("missing {field}")))?;
    s.parse().map_err(|e| Error::parse(WHAT, no, format!("bad {field} `{s}`: {e}")))
}

/// `hold` and `alloc` lines: `<kw> <vertex> <ids>`.
fn indexed(no: usize, rest: &str, n: usize, slots: &mut [Option<Vec<usize>>]) -> Result<()> {
    let mut it = rest.split_whitespace();
    let v = num(no, it.next(), "vertex")?;
    let list = ids(no, it.next().unwrap_or("-"))?;
    if v >= n {
        return Err(Error::parse(WHAT, no, format!("vertex {v} outside [0, {n})")));
    }
    if slots[v].replace(list).is_some() {
        return Err(Error::parse(WHAT, no, format!("vertex {v} listed twice")));
    }
    Ok(())
}

fn verdict(no: usize, rest: &str) -> Result<Verdict> {
    let mut it = rest.splitn(3, ' ');
    let name = it.next().filter(|s| !s.is_empty()).ok_or_else(|| Error::parse(WHAT, no, "missing check name"))?;
    let pass = match it.next() {
        Some("pass") => true,
        Some("fail") => false,
        other => return Err(Error::parse(WHAT, no, format!("expected pass or fail, found {other:?}"))),
    };
    Ok(Verdict {
        name: name.to_string(),
        pass,
        witness: it.next().map(str::to_string),
    })
}

pub fn parse_trace(text: &str) -> Result<ParsedTrace> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((no, other)) => return Err(Error::parse(WHAT, no, format!("expected `{HEADER}`, found `{other}`"))),
        None => return Err(Error::parse(WHAT, 1, "empty file")),
    }
    let mut t = ParsedTrace::default();
    let mut seen_n = false;
    while let Some((no, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let (kw, rest) = line.split_once(' ').unwrap_or((line, ""));
        match kw {
            "regime" => t.regime = Some(rest.parse().map_err(|e: String| Error::parse(WHAT, no, e))?),
            "n" => {
                t.n = num(no, Some(rest), "n")?;
                seen_n = true;
            }
            "prealloc" => {
                let mut it = rest.split_whitespace();
                t.prealloc.push((num(no, it.next(), "vertex")?, num(no, it.next(), "edge")?));
            }
            "note" => t.notes.push(rest.to_string()),
            "stage" | "final" if !seen_n => return Err(Error::parse(WHAT, no, "block before `n` line")),
            "stage" => {
                let mut s = ParsedStage {
                    name: rest.to_string(),
                    line: no,
                    ..ParsedStage::default()
                };
                let mut holds = vec![None; t.n];
                let mut closed = false;
                let mut last = no;
                for (no, line) in lines.by_ref() {
                    last = no;
                    let (kw, rest) = line.split_once(' ').unwrap_or((line, ""));
                    match kw {
                        "bundle" => {
                            let f: Vec<&str> = rest.split_whitespace().collect();
                            if f.len() != 5 {
                                return Err(Error::parse(WHAT, no, "expected `bundle <id> <lo> <hi> <kind> <edges>`"));
                            }
                            let (lo, hi) = (num(no, Some(f[1]), "lo")?, num(no, Some(f[2]), "hi")?);
                            if lo >= hi {
                                return Err(Error::parse(WHAT, no, format!("pair ({lo}, {hi}) not ordered")));
                            }
                            s.bundles.push(ParsedBundle {
                                id: num(no, Some(f[0]), "bundle id")?,
                                pair: Pair::new(lo, hi),
                                label: f[3].to_string(),
                                edges: ids(no, f[4])?,
                            });
                        }
                        "hold" => indexed(no, rest, t.n, &mut holds)?,
                        "unalloc" => s.unallocated = ids(no, rest.trim())?,
                        "park" => {
                            let f: Vec<&str> = rest.split_whitespace().collect();
                            if f.len() != 3 {
                                return Err(Error::parse(WHAT, no, "expected `park <bundle> <vertex> <branch>`"));
                            }
                            s.parks.push((num(no, Some(f[0]), "bundle")?, num(no, Some(f[1]), "vertex")?, f[2].to_string()));
                        }
                        "metric" => {
                            let (name, value) = rest
                                .split_once(' ')
                                .ok_or_else(|| Error::parse(WHAT, no, "expected `metric <name> <value>`"))?;
                            let value = value.parse().map_err(|e| Error::parse(WHAT, no, format!("bad metric: {e}")))?;
                            s.metrics.push((name.to_string(), value));
                        }
                        "check" => s.checks.push(verdict(no, rest)?),
                        "end" => {
                            closed = true;
                            break;
                        }
                        _ => return Err(Error::parse(WHAT, no, format!("unexpected line `{line}` in stage"))),
                    }
                }
                if !closed {
                    return Err(Error::parse(WHAT, last, format!("stage `{}` is not closed", s.name)));
                }
                s.holdings = holds.into_iter().map(Option::unwrap_or_default).collect();
                t.stages.push(s);
            }
            "final" => {
                let mut slots = vec![None; t.n];
                let mut closed = false;
                let mut last = no;
                for (no, line) in lines.by_ref() {
                    last = no;
                    let (kw, rest) = line.split_once(' ').unwrap_or((line, ""));
                    match kw {
                        "alloc" => indexed(no, rest, t.n, &mut slots)?,
                        "certificate" => t.certificate = Some(rest.to_string()),
                        "end" => {
                            closed = true;
                            break;
                        }
                        _ => return Err(Error::parse(WHAT, no, format!("unexpected line `{line}` in final block"))),
                    }
                }
                if !closed {
                    return Err(Error::parse(WHAT, last, "final block is not closed"));
                }
                t.allocation = Some(slots.into_iter().map(Option::unwrap_or_default).collect());
            }
            _ => return Err(Error::parse(WHAT, no, format!("unexpected line `{line}`"))),
        }
    }
    Ok(t)
}

/// A stage whose table and holdings passed the structural checks.
struct View<'a> {
    stage: &'a ParsedStage,
    /// Bundle by id.
    bundles: Vec<&'a ParsedBundle>,
    holder: Vec<Option<VertexId>>,
    edges: Vec<Vec<EdgeId>>,
    vals: Vec<Vec<Value>>,
    enviers: Vec<Vec<VertexId>>,
}

impl View<'_> {
    fn envied(&self, v: VertexId) -> bool {
        !self.enviers[v].is_empty()
    }

    fn own(&self, v: VertexId) -> Value {
        self.vals[v][v]
    }

    fn free(&self) -> impl Iterator<Item = &ParsedBundle> + '_ {
        self.bundles.iter().copied().filter(|b| self.holder[b.id].is_none())
    }
}

fn table_witness(inst: &MultigraphInstance, s: &ParsedStage) -> Option<String> {
    let mut ids: Vec<BundleId> = s.bundles.iter().map(|b| b.id).collect();
    ids.sort_unstable();
    if ids.iter().enumerate().any(|(i, &b)| i != b) {
        return Some("bundle ids are not 0..len".into());
    }
    let mut covered: BTreeMap<Pair, Vec<EdgeId>> = BTreeMap::new();
    for b in &s.bundles {
        if b.edges.is_empty() {
            return Some(format!("bundle {} is empty", b.id));
        }
        covered.entry(b.pair).or_default().extend(&b.edges);
    }
    let expected: BTreeMap<Pair, Vec<EdgeId>> = inst.pipeline_pairs().map(|(p, c)| (p, c.to_vec())).collect();
    for (pair, mut got) in covered.clone() {
        got.sort_unstable();
        let Some(want) = expected.get(&pair) else {
            return Some(format!("bundles on {pair}, which is not a pipeline pair"));
        };
        let mut want = want.clone();
        want.sort_unstable();
        if got != want {
            return Some(format!("bundles of {pair} cover {got:?}, class is {want:?}"));
        }
    }
    expected
        .keys()
        .find(|p| !covered.contains_key(p))
        .map(|p| format!("pair {p} has no bundles"))
}

fn holdings_witness(s: &ParsedStage, len: usize) -> Option<String> {
    let mut holder = vec![None; len];
    for (v, held) in s.holdings.iter().enumerate() {
        for &b in held {
            if b >= len {
                return Some(format!("vertex {v} holds unknown bundle {b}"));
            }
            if let Some(u) = holder[b].replace(v) {
                return Some(format!("bundle {b} held by {u} and {v}"));
            }
        }
    }
    let free: Vec<BundleId> = (0..len).filter(|&b| holder[b].is_none()).collect();
    let mut listed = s.unallocated.clone();
    listed.sort_unstable();
    (free != listed).then(|| format!("unalloc lists {listed:?}, holdings leave {free:?}"))
}

fn view<'a>(profile: &ValuationProfile, s: &'a ParsedStage) -> View<'a> {
    let mut bundles: Vec<&ParsedBundle> = s.bundles.iter().collect();
    bundles.sort_by_key(|b| b.id);
    let n = s.holdings.len();
    let mut holder = vec![None; bundles.len()];
    let mut edges = vec![Vec::new(); n];
    for (v, held) in s.holdings.iter().enumerate() {
        for &b in held {
            holder[b] = Some(v);
            edges[v].extend(&bundles[b].edges);
        }
        edges[v].sort_unstable();
    }
    let vals: Vec<Vec<Value>> = (0..n).map(|i| edges.iter().map(|x| profile.val(i, x)).collect()).collect();
    let enviers = (0..n)
        .map(|j| (0..n).filter(|&i| i != j && vals[i][i] < vals[i][j]).collect())
        .collect();
    View {
        stage: s,
        bundles,
        holder,
        edges,
        vals,
        enviers,
    }
}

fn p1(profile: &ValuationProfile, w: &View) -> Option<String> {
    for (v, held) in w.stage.holdings.iter().enumerate() {
        let mut pairs = BTreeSet::new();
        for &b in held {
            let pair = w.bundles[b].pair;
            if !pair.contains(v) {
                return Some(format!("vertex {v} holds bundle {b} of {pair}"));
            }
            if !pairs.insert(pair) {
                return Some(format!("vertex {v} holds parallel bundles on {pair}"));
            }
        }
    }
    efx_witness(profile, &w.edges).map(|(i, j, g)| format!("{i} envies {j} after removing edge {g}"))
}

fn p2(profile: &ValuationProfile, w: &View) -> Option<String> {
    w.free().find_map(|b| {
        [b.pair.lo, b.pair.hi]
            .into_iter()
            .find(|&v| profile.val(v, &b.edges) > w.own(v))
            .map(|v| format!("vertex {v} prefers unallocated bundle {}", b.id))
    })
}

fn p3(inst: &MultigraphInstance, regime: Regime, w: &View) -> (&'static str, Option<String>) {
    let envied: Vec<VertexId> = (0..w.enviers.len()).filter(|&v| w.envied(v)).collect();
    match regime {
        Regime::Bipartite => (
            "P3.1",
            w.bundles
                .iter()
                .map(|b| b.pair)
                .find(|p| w.envied(p.lo) && w.envied(p.hi))
                .map(|p| format!("both endpoints of {p} are envied")),
        ),
        Regime::BoundedNeighbors => {
            let bound = inst.active_count() / 2;
            ("P3.2", (envied.len() > bound).then(|| format!("{} envied vertices, bound {bound}", envied.len())))
        }
        Regime::Girth6 => (
            "P3.3",
            envied.iter().find_map(|&a| match w.enviers[a].as_slice() {
                [b] => {
                    let ok = !w.envied(*b) || inst.neighbors(*b).into_iter().any(|c| !w.envied(c));
                    (!ok).then(|| format!("envied {a}: envier {b} and its neighbors are all envied"))
                }
                many => Some(format!("envied {a} has enviers {many:?}")),
            }),
        ),
    }
}

fn envier_witness(w: &View) -> Option<String> {
    (0..w.enviers.len()).filter(|&v| w.envied(v)).find_map(|i| match w.enviers[i].as_slice() {
        [p] => w.stage.holdings[i]
            .iter()
            .find(|&&b| !w.bundles[b].pair.contains(*p))
            .map(|b| format!("envied {i} holds bundle {b} irrelevant to its envier {p}")),
        many => Some(format!("envied {i} has enviers {many:?}")),
    })
}

/// Best value over subsets of the pool with at most one bundle per pair.
fn best_selection_value(profile: &ValuationProfile, v: VertexId, pool: &[&ParsedBundle]) -> Value {
    let mut best = 0;
    for mask in 0u32..(1 << pool.len()) {
        let picked: Vec<&ParsedBundle> = (0..pool.len()).filter(|k| mask >> k & 1 == 1).map(|k| pool[k]).collect();
        let pairs: BTreeSet<Pair> = picked.iter().map(|b| b.pair).collect();
        if pairs.len() != picked.len() {
            continue;
        }
        let edges: Vec<EdgeId> = picked.iter().flat_map(|b| b.edges.iter().copied()).collect();
        best = best.max(profile.val(v, &edges));
    }
    best
}

fn p4(profile: &ValuationProfile, w: &View) -> Option<String> {
    (0..w.enviers.len()).find_map(|v| {
        let mut pool: Vec<&ParsedBundle> = w.free().filter(|b| b.pair.contains(v)).collect();
        if w.envied(v) {
            let [p] = w.enviers[v].as_slice() else {
                return Some(format!("envied {v} has enviers {:?}", w.enviers[v]));
            };
            let pair = Pair::new(v, *p);
            pool.extend(w.stage.holdings[*p].iter().map(|&b| w.bundles[b]).filter(|b| b.pair == pair));
        } else {
            pool.extend(w.stage.holdings[v].iter().map(|&b| w.bundles[b]));
        }
        if pool.len() > POOL_CAP {
            return Some(format!("pool of {v} has {} bundles, above {POOL_CAP}", pool.len()));
        }
        let best = best_selection_value(profile, v, &pool);
        (best > w.own(v)).then(|| format!("vertex {v} has a non-parallel selection worth {best} > {}", w.own(v)))
    })
}

fn free_bound(w: &View, r: usize) -> Option<String> {
    let mut free: BTreeMap<Pair, usize> = BTreeMap::new();
    for b in w.free() {
        *free.entry(b.pair).or_default() += 1;
    }
    free.into_iter().find_map(|(pair, count)| {
        let q = w.envied(pair.lo) as usize + w.envied(pair.hi) as usize;
        (count + 2 > r + q).then(|| format!("pair {pair} has {count} unallocated bundles with {q} envied endpoints"))
    })
}

fn unalloc_envied(w: &View) -> Option<String> {
    w.free()
        .find(|b| !w.envied(b.pair.lo) && !w.envied(b.pair.hi))
        .map(|b| format!("bundle {} of {} has no envied endpoint", b.id, b.pair))
}

fn r_of(regime: Regime) -> usize {
    if regime == Regime::BoundedNeighbors {
        3
    } else {
        2
    }
}

fn step3_checks(inst: &MultigraphInstance, prev: &View, w: &View, out: &mut Vec<(String, Option<String>)>) {
    let s = w.stage;
    let mut expected: Vec<BTreeSet<BundleId>> = prev.stage.holdings.iter().map(|h| h.iter().copied().collect()).collect();
    let mut parks_ok = true;
    let mut seen = BTreeSet::new();
    let mut witness = None;
    for &(b, k, ref branch) in &s.parks {
        let reason = if b >= w.bundles.len() || k >= expected.len() {
            Some(format!("park {b} on {k} out of range"))
        } else if prev.holder[b].is_some() {
            Some(format!("bundle {b} was already allocated"))
        } else if !seen.insert(b) {
            Some(format!("bundle {b} parked twice"))
        } else if w.bundles[b].pair.contains(k) {
            Some(format!("bundle {b} parked on endpoint {k}"))
        } else if !inst.is_active(k) {
            Some(format!("bundle {b} parked on inactive {k}"))
        } else if prev.envied(k) {
            Some(format!("bundle {b} parked on envied {k}"))
        } else if branch != "recipe" && branch != "fallback" {
            Some(format!("unknown branch `{branch}`"))
        } else {
            None
        };
        if reason.is_some() {
            witness = reason;
            parks_ok = false;
            break;
        }
        expected[k].insert(b);
    }
    out.push(("PARK-SAFE".into(), witness));
    let kept = if parks_ok {
        (0..expected.len()).find_map(|v| {
            let got: BTreeSet<BundleId> = s.holdings[v].iter().copied().collect();
            (got != expected[v]).then(|| format!("holdings of {v} differ from step-2 holdings plus parks"))
        })
    } else {
        Some("parks invalid".into())
    };
    out.push(("KEPT".into(), kept));
    out.push((
        "COMPLETE".into(),
        w.free().next().map(|b| format!("bundle {} unallocated", b.id)),
    ));
}

fn same_table(a: &ParsedStage, b: &ParsedStage) -> bool {
    let key = |s: &ParsedStage| {
        let mut v: Vec<_> = s.bundles.iter().map(|b| (b.id, b.pair, b.edges.clone())).collect();
        v.sort();
        v
    };
    key(a) == key(b)
}

/// Audits a serialized trace against the instance and valuations.
pub fn audit_trace(profile: &ValuationProfile, inst: &MultigraphInstance, text: &str) -> Result<Report> {
    let t = parse_trace(text)?;
    let mut report = Report::default();
    let header = if t.n != inst.n() {
        Some(format!("trace has n = {}, instance has {}", t.n, inst.n()))
    } else if t.regime.is_none() {
        Some("no regime line".into())
    } else {
        let mut a = t.prealloc.clone();
        let mut b = inst.preallocation().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        (a != b).then(|| format!("preallocation {a:?} differs from instance {b:?}"))
    };
    let bad_header = header.is_some();
    report.push("header", header);
    if bad_header {
        return Ok(report);
    }
    let regime = t.regime.expect("checked above");
    let names: Vec<&str> = t.stages.iter().map(|s| s.name.as_str()).collect();
    let order_ok = names == ["step1", "step2", "step3"] || (t.allocation.is_none() && ["step1", "step2", "step3"].starts_with(&names));
    report.push(
        "stages",
        (!order_ok).then(|| format!("stages {names:?}, expected step1 step2 step3")),
    );

    let mut views: Vec<View> = Vec::new();
    for s in &t.stages {
        let prefix = &s.name;
        let structural = table_witness(inst, s).or_else(|| holdings_witness(s, s.bundles.len()));
        let broken = structural.is_some();
        report.push(format!("{prefix}/STRUCTURE"), structural);
        if broken {
            return Ok(report);
        }
        let w = view(profile, s);
        let mut out: Vec<(String, Option<String>)> = Vec::new();
        match s.name.as_str() {
            "step1" | "step2" => {
                out.push(("P1".into(), p1(profile, &w)));
                out.push(("P2".into(), p2(profile, &w)));
                let (name, wit) = p3(inst, regime, &w);
                out.push((name.into(), wit));
                out.push(("ENVIER".into(), envier_witness(&w)));
                if s.name == "step2" {
                    out.push(("P4".into(), p4(profile, &w)));
                    let r = r_of(regime);
                    out.push((format!("FREE-BOUND-r{r}"), free_bound(&w, r)));
                    if r == 2 {
                        out.push(("UNALLOC-ENVIED".into(), unalloc_envied(&w)));
                    }
                    if let Some(prev) = views.last() {
                        let newly = inst
                            .active_vertices()
                            .find(|&v| !prev.envied(v) && w.envied(v))
                            .map(|v| format!("vertex {v} became envied"));
                        out.push(("NONENVIED-KEPT".into(), newly));
                    }
                }
            }
            "step3" => {
                let prev = views.last().expect("stage order checked");
                if !same_table(prev.stage, s) {
                    out.push(("TABLE-KEPT".into(), Some("step-3 table differs from step 2".into())));
                }
                step3_checks(inst, prev, &w, &mut out);
                out.push((
                    "EFX".into(),
                    efx_witness(profile, &w.edges).map(|(i, j, g)| format!("{i} envies {j} after removing edge {g}")),
                ));
            }
            _ => {}
        }
        let mut contradicted = Vec::new();
        for c in &s.checks {
            let ours = out.iter().find(|(n, _)| *n == c.name);
            if !c.pass || matches!(ours, Some((_, Some(_)))) {
                contradicted.push(c.name.clone());
            }
        }
        for (name, wit) in out {
            report.push(format!("{prefix}/{name}"), wit);
        }
        report.push(
            format!("{prefix}/CLAIMS"),
            (!contradicted.is_empty()).then(|| format!("claims not upheld: {}", contradicted.join(","))),
        );
        views.push(w);
    }

    if let Some(alloc) = &t.allocation {
        let last = views.last().expect("final block follows the stages");
        let mut expected: Vec<Vec<EdgeId>> = last
            .edges
            .iter()
            .map(|es| es.iter().copied().filter(|&e| !inst.is_dummy(e)).collect())
            .collect();
        for &(v, e) in inst.preallocation() {
            expected[v].push(e);
        }
        let mut got = alloc.clone();
        for a in expected.iter_mut().chain(got.iter_mut()) {
            a.sort_unstable();
        }
        report.push(
            "final/MATCHES-STEP3",
            expected
                .iter()
                .zip(&got)
                .position(|(a, b)| a != b)
                .map(|v| format!("vertex {v}: final {:?}, step 3 gives {:?}", got[v], expected[v])),
        );
        report.push("final/COMPLETE", completeness_witness(inst, alloc));
        report.push(
            "final/EFX",
            efx_witness(profile, alloc).map(|(i, j, g)| format!("{i} envies {j} after removing edge {g}")),
        );
        report.push(
            "final/CERTIFICATE",
            (t.certificate.as_deref() != Some("efx")).then(|| format!("certificate {:?}", t.certificate)),
        );
    } else {
        report.push("final/PRESENT", Some("trace has no final block".into()));
    }
    Ok(report)
}
