//! The `efx` command line: gen, solve, verify, oracle and sweep.
//!
//! Exit codes: 0 success; 1 a check failed or the oracle found nothing;
//! 2 no applicable regime; 3 invariant breach (trace dumped); 4 unreadable
//! input; 5 oracle cap exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::exec::Execution;
use crate::instance::{detect_regimes, generate, parse_instance, serialize_instance, Family, GenParams, MultigraphInstance, Regime};
use crate::pipeline::{solve_traced, SolveOptions};
use crate::valuation::{
    audit_monotone, make_seeded_additive, make_seeded_monotone, parse_valuation, serialize_valuation, ValuationProfile,
    AUDIT_CAP,
};
use crate::verify::{
    assignment_of, audit_trace, brute_force_efx, parse_allocation, serialize_allocation, verify_allocation, ALLOCATION_HEADER,
    DEFAULT_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_NO_REGIME: i32 = 2;
pub const EXIT_BREACH: i32 = 3;
pub const EXIT_INPUT: i32 = 4;
pub const EXIT_CAP: i32 = 5;

/// Overrides every `--seed`.
pub const SEED_ENV: &str = "EFX_SEED";

/// Mixed into the seed for valuations so they do not share the instance stream.
const VALUATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Parser, Debug)]
#[command(name = "efx", version, about = "Complete EFX allocations on multigraphs")]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ValuationKind {
    Additive,
    Monotone,
}

#[derive(clap::Args, Debug, Clone)]
struct GenArgs {
    /// Vertices.
    #[arg(long)]
    n: usize,
    /// Largest number of parallel edges per pair.
    #[arg(long, default_value_t = 3)]
    mult: usize,
    /// Bounded family: neighbor cap (defaults to the regime bound).
    #[arg(long)]
    neighbors: Option<usize>,
    /// Cap on the number of real edges.
    #[arg(long)]
    edges: Option<usize>,
    /// Chance, in percent, that an admissible pair receives edges.
    #[arg(long, default_value_t = 60)]
    edge_percent: u32,
    #[arg(long, value_enum, default_value_t = ValuationKind::Additive)]
    valuation: ValuationKind,
    /// Largest additive weight or monotone increment.
    #[arg(long, default_value_t = 10)]
    scale: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and valuations as PREFIX.inst and PREFIX.val.
    Gen {
        family: Family,
        #[command(flatten)]
        params: GenArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a complete EFX allocation.
    Solve {
        instance: PathBuf,
        valuation: PathBuf,
        /// Force a regime: bipartite, girth6 or bounded.
        #[arg(long)]
        regime: Option<Regime>,
        /// Write the stage trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the allocation here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an allocation certificate or audit a trace.
    Verify {
        instance: PathBuf,
        valuation: PathBuf,
        /// An `efx-allocation v1` or `efx-trace v1` file.
        file: PathBuf,
    },
    /// Enumerate all complete EFX allocations by brute force.
    Oracle {
        instance: PathBuf,
        valuation: PathBuf,
        /// Largest number of assignments to enumerate.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
        /// Report whether this allocation is among them.
        #[arg(long)]
        check: Option<PathBuf>,
    },
    /// Generate and solve a grid of instances, writing one CSV row each.
    Sweep {
        family: Family,
        /// Vertex counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        mult: usize,
        #[arg(long)]
        neighbors: Option<usize>,
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long, default_value_t = 60)]
        edge_percent: u32,
        #[arg(long, value_enum, default_value_t = ValuationKind::Additive)]
        valuation: ValuationKind,
        #[arg(long, default_value_t = 10)]
        scale: u64,
        /// Seeds per vertex count.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV report path.
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: i32,
    message: String,
}

type CliResult = std::result::Result<i32, Failure>;

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn input(e: impl std::fmt::Display) -> Failure {
    fail(EXIT_INPUT, e.to_string())
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_FAIL, format!("{}: {e}", path.display())))
}

fn seed_or_env(seed: u64) -> std::result::Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| fail(EXIT_FAIL, format!("{SEED_ENV}=`{s}`: {e}"))),
        Err(_) => Ok(seed),
    }
}

fn load(inst: &Path, val: &Path) -> std::result::Result<(MultigraphInstance, ValuationProfile), Failure> {
    let inst = parse_instance(&read(inst)?).map_err(input)?;
    let profile = parse_valuation(&read(val)?, &inst).map_err(input)?;
    let audit = audit_monotone(&profile, AUDIT_CAP);
    if let Some(v) = audit.violations.first() {
        return Err(input(format!("valuation is not a monotone normalized set function: {v:?}")));
    }
    Ok((inst, profile))
}

fn gen_params(a: &GenArgs) -> GenParams {
    GenParams {
        n: a.n,
        max_mult: a.mult,
        neighbors: a.neighbors,
        edge_percent: a.edge_percent,
        max_edges: a.edges,
    }
}

fn make_profile(inst: &MultigraphInstance, kind: ValuationKind, seed: u64, scale: u64) -> crate::error::Result<ValuationProfile> {
    let seed = seed ^ VALUATION_SALT;
    match kind {
        ValuationKind::Additive => make_seeded_additive(inst, seed, scale),
        ValuationKind::Monotone => make_seeded_monotone(inst, seed, scale),
    }
}

fn cmd_gen(family: Family, args: &GenArgs, seed: u64, out: &Path) -> CliResult {
    let seed = seed_or_env(seed)?;
    let inst = generate(family, &gen_params(args), seed).map_err(|e| fail(EXIT_FAIL, e.to_string()))?;
    let profile = make_profile(&inst, args.valuation, seed, args.scale).map_err(|e| fail(EXIT_FAIL, e.to_string()))?;
    let prefix = out.as_os_str().to_owned();
    let with = |ext: &str| {
        let mut p = prefix.clone();
        p.push(ext);
        PathBuf::from(p)
    };
    write(&with(".inst"), &serialize_instance(&inst))?;
    write(&with(".val"), &serialize_valuation(&profile))?;
    let report = detect_regimes(&inst);
    let applicable: Vec<&str> = report.applicable.iter().map(Regime::name).collect();
    println!(
        "n {} edges {} bipartite {} girth_ok {} neighbor_bound_ok {} applicable {}",
        inst.n(),
        inst.real_edge_count(),
        report.is_bipartite,
        report.girth_ok,
        report.neighbor_bound_ok,
        applicable.join(",")
    );
    Ok(EXIT_OK)
}

fn cmd_solve(
    exec: Execution,
    inst: &Path,
    val: &Path,
    regime: Option<Regime>,
    trace_path: Option<&Path>,
    out: Option<&Path>,
) -> CliResult {
    let (inst, profile) = load(inst, val)?;
    let (result, trace) = solve_traced(&profile, &inst, SolveOptions { regime, exec });
    let text = trace.serialize();
    match result {
        Ok(sol) => {
            if let Some(p) = trace_path {
                write(p, &text)?;
            }
            let alloc = serialize_allocation(&sol.allocation);
            match out {
                Some(p) => write(p, &alloc)?,
                None => print!("{alloc}"),
            }
            eprintln!(
                "regime {} envied_after_step1 {} step2_rounds {} parked {}",
                sol.regime, sol.stats.envied_after_step1, sol.stats.step2_rounds, sol.stats.parked
            );
            Ok(EXIT_OK)
        }
        Err(e @ (Error::NoRegime(_) | Error::RegimeNotApplicable { .. })) => Err(fail(EXIT_NO_REGIME, e.to_string())),
        Err(e) => {
            match trace_path {
                Some(p) => write(p, &text)?,
                None => eprint!("{text}"),
            }
            Err(fail(EXIT_BREACH, e.to_string()))
        }
    }
}

fn cmd_verify(inst: &Path, val: &Path, file: &Path) -> CliResult {
    let (inst, profile) = load(inst, val)?;
    let text = read(file)?;
    let header = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    let report = if header == ALLOCATION_HEADER {
        let alloc = parse_allocation(&text, &inst).map_err(input)?;
        verify_allocation(&profile, &inst, &alloc)
    } else {
        audit_trace(&profile, &inst, &text).map_err(input)?
    };
    print!("{}", report.render());
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_oracle(exec: Execution, inst: &Path, val: &Path, cap: u128, check: Option<&Path>) -> CliResult {
    let (inst, profile) = load(inst, val)?;
    let wanted = match check {
        Some(p) => {
            let alloc = parse_allocation(&read(p)?, &inst).map_err(input)?;
            Some(assignment_of(&alloc, inst.real_edge_count()).ok_or_else(|| fail(EXIT_FAIL, "allocation is not complete"))?)
        }
        None => None,
    };
    let all = match brute_force_efx(&profile, &inst, cap, exec) {
        Ok(all) => all,
        Err(e @ Error::CapExceeded { .. }) => return Err(fail(EXIT_CAP, e.to_string())),
        Err(e) => return Err(fail(EXIT_FAIL, e.to_string())),
    };
    println!("efx allocations {}", all.len());
    if let Some(first) = all.first() {
        let owners: Vec<String> = first.iter().map(ToString::to_string).collect();
        println!("first owners {}", if owners.is_empty() { "-".into() } else { owners.join(",") });
    }
    if let Some(w) = wanted {
        let member = all.binary_search(&w).is_ok();
        println!("member {member}");
        return Ok(if member { EXIT_OK } else { EXIT_FAIL });
    }
    Ok(if all.is_empty() { EXIT_FAIL } else { EXIT_OK })
}

/// One sweep row: generated, solved in the family's regime, or failed.
struct Row {
    seed: u64,
    n: usize,
    m: usize,
    regime: Regime,
    envied: usize,
    rounds: usize,
    parked: usize,
    error: Option<String>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(exec: Execution, family: Family, sizes: &[usize], base: GenArgs, seeds: u64, seed: u64, out: &Path) -> CliResult {
    let start = seed_or_env(seed)?;
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| (start..start.saturating_add(seeds)).map(move |s| (n, s)))
        .collect();
    let results = exec.map(jobs, |(n, s)| {
        let args = GenArgs { n, ..base.clone() };
        let inst = generate(family, &gen_params(&args), s)?;
        let profile = make_profile(&inst, args.valuation, s, args.scale)?;
        let opts = SolveOptions {
            regime: Some(family.regime()),
            exec: Execution::Sequential,
        };
        let (res, _) = solve_traced(&profile, &inst, opts);
        let mut row = Row {
            seed: s,
            n,
            m: inst.real_edge_count(),
            regime: family.regime(),
            envied: 0,
            rounds: 0,
            parked: 0,
            error: None,
        };
        match res {
            Ok(sol) => {
                row.envied = sol.stats.envied_after_step1;
                row.rounds = sol.stats.step2_rounds;
                row.parked = sol.stats.parked;
                if let Some((i, j, g)) = crate::verify::efx_witness(&profile, &sol.allocation) {
                    row.error = Some(format!("verifier: {i} envies {j} after removing edge {g}"));
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        Ok::<Row, Error>(row)
    });

    let file = fs::File::create(out).map_err(|e| fail(EXIT_FAIL, format!("{}: {e}", out.display())))?;
    let mut csv = csv::Writer::from_writer(file);
    let io = |e: csv::Error| fail(EXIT_FAIL, e.to_string());
    csv.write_record([
        "family",
        "seed",
        "regime",
        "n",
        "m",
        "envied_after_step1",
        "step2_rounds",
        "parked",
        "status",
    ])
    .map_err(io)?;
    let (mut rows, mut max_envied, mut parked, mut rounds) = (0usize, 0usize, 0usize, 0usize);
    for r in results {
        let r = r.map_err(|e| {
            let _ = csv.flush();
            fail(EXIT_FAIL, format!("generation failed: {e}"))
        })?;
        let status = if r.error.is_some() { "FAILED" } else { "EFX" };
        csv.write_record([
            family.name().to_string(),
            r.seed.to_string(),
            r.regime.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.envied.to_string(),
            r.rounds.to_string(),
            r.parked.to_string(),
            status.to_string(),
        ])
        .map_err(io)?;
        if let Some(e) = r.error {
            csv.flush().map_err(|e| fail(EXIT_FAIL, e.to_string()))?;
            return Err(fail(EXIT_BREACH, format!("seed {} with n = {} failed: {e}", r.seed, r.n)));
        }
        rows += 1;
        max_envied = max_envied.max(r.envied);
        parked += r.parked;
        rounds += r.rounds;
    }
    csv.flush().map_err(|e| fail(EXIT_FAIL, e.to_string()))?;
    println!("family {family} rows {rows} efx {rows} max_envied_after_step1 {max_envied} step2_rounds {rounds} parked {parked}");
    Ok(EXIT_OK)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Gen { family, params, seed, out } => cmd_gen(family, &params, seed, &out),
        Command::Solve {
            instance,
            valuation,
            regime,
            trace,
            out,
        } => cmd_solve(exec, &instance, &valuation, regime, trace.as_deref(), out.as_deref()),
        Command::Verify { instance, valuation, file } => cmd_verify(&instance, &valuation, &file),
        Command::Oracle {
            instance,
            valuation,
            cap,
            check,
        } => cmd_oracle(exec, &instance, &valuation, cap, check.as_deref()),
        Command::Sweep {
            family,
            n,
            mult,
            neighbors,
            edges,
            edge_percent,
            valuation,
            scale,
            seeds,
            seed,
            out,
        } => {
            let base = GenArgs {
                n: 0,
                mult,
                neighbors,
                edges,
                edge_percent,
                valuation,
                scale,
            };
            cmd_sweep(exec, family, &n, base, seeds, seed, &out)
        }
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
