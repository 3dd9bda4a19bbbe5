//! `dispo`: one binary tying the toolkit together. Every command is
//! deterministic, so identical arguments produce byte-identical output;
//! exit status is nonzero whenever an internal verification fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dispo_core::construction::{
    default_pipeline, fs_stream, square_census, verify_ledger, ConstructionLedger, Pipeline,
};
use dispo_core::dfao::{eval_dfao, thue_morse};
use dispo_core::disposability::{
    disposable_positions, disposable_positions_verified, first_differences,
    is_disposable_position,
};
use dispo_core::engine::DISPO_POS_COMMAND;
use dispo_core::morphism::vtm_stream;
use dispo_core::repetition::is_squarefree;
use dispo_core::spectral::{accepted_density, empirical_density_series};
use dispo_core::word::avoids;
use dispo_core::{PredicateEnv, TrackAutomaton};

// Writing into a closed pipe (`dispo generate ... | head`) must end the
// process quietly instead of panicking mid-line.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = write!(std::io::stdout(), $($arg)*) {
            crate::handle_write_error(e);
        }
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            crate::handle_write_error(e);
        }
    }};
}

fn handle_write_error(e: std::io::Error) -> ! {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
    eprintln!("error: {e}");
    std::process::exit(1);
}

#[derive(Parser)]
#[command(
    name = "dispo",
    version,
    about = "Squarefree words, disposable positions, and the length-scheduled construction"
)]
struct Cli {
    /// Cap worker threads (default: all cores). Results never depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WordKind {
    Vtm,
    ThueMorse,
    Fs,
    Construction,
}

impl WordKind {
    fn name(self) -> &'static str {
        match self {
            WordKind::Vtm => "vtm",
            WordKind::ThueMorse => "thue-morse",
            WordKind::Fs => "fs",
            WordKind::Construction => "construction",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityMode {
    Exact,
    Empirical,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    /// Scan every position up to this limit; emit CSV.
    #[arg(long)]
    limit: Option<usize>,

    /// Report a single position's verdict as JSON.
    #[arg(long)]
    position: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print a prefix of a named word as a digit string.
    Generate {
        word: WordKind,
        #[arg(long)]
        length: usize,
    },

    /// Re-run the square and avoidance checks on a word prefix (JSON).
    Check {
        word: WordKind,
        #[arg(long)]
        length: usize,
    },

    /// Disposable positions of vtm by seam scanning, optionally verified
    /// against the compiled predicate.
    Disposable {
        #[command(flatten)]
        target: Target,

        /// Largest square half-length the seam scan rules out.
        #[arg(long, default_value_t = 64)]
        max_half: usize,

        /// Cross-check against the compiled dispo_pos automaton, raising
        /// max-half automatically on any disagreement.
        #[arg(long)]
        engine: bool,
    },

    /// Distinct gaps between consecutive disposable positions (after the
    /// initial one), space-separated.
    Gaps {
        #[arg(long)]
        limit: usize,

        #[arg(long, default_value_t = 64)]
        max_half: usize,
    },

    /// Density of disposable positions: exact (spectral) or empirical (CSV).
    Density {
        #[arg(long, value_enum)]
        mode: DensityMode,

        /// Prefix lengths for the empirical series.
        #[arg(long, num_args = 1.., default_values_t = [1u64 << 12, 1 << 14, 1 << 16, 1 << 18, 1 << 20])]
        checkpoints: Vec<u64>,
    },

    /// Compile `eval NAME "FORMULA";` commands from a file; print each
    /// automaton in text form plus its accepted values up to a bound.
    Walnut {
        file: PathBuf,

        #[arg(long, default_value_t = 256)]
        bound: u64,
    },

    /// Run the interleaved construction; write the word prefix and the
    /// disposable-factor ledger.
    Construct {
        #[arg(long)]
        phases: usize,

        /// Where to write the word prefix (digit string).
        #[arg(long)]
        out: PathBuf,

        /// Where to write the ledger (JSON).
        #[arg(long)]
        ledger: PathBuf,

        /// Prefix length to materialize (default: past the last record).
        #[arg(long)]
        length: Option<usize>,
    },

    /// Re-check a ledger against the deterministically rebuilt word (JSON
    /// report; nonzero exit unless everything certifies).
    Verify {
        #[arg(long)]
        ledger: PathBuf,

        /// Largest square half-length the seam scan rules out.
        #[arg(long, default_value_t = 2000)]
        scan: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Generate { word, length } => generate(word, length),
        Command::Check { word, length } => check(word, length),
        Command::Disposable { target, max_half, engine } => disposable(target, max_half, engine),
        Command::Gaps { limit, max_half } => gaps(limit, max_half),
        Command::Density { mode, checkpoints } => density(mode, &checkpoints),
        Command::Walnut { file, bound } => walnut(&file, bound),
        Command::Construct { phases, out, ledger, length } => construct(phases, &out, &ledger, length),
        Command::Verify { ledger, scan } => verify(&ledger, scan),
    }
}

fn digits(letters: &[u8]) -> String {
    letters.iter().map(|&l| char::from(b'0' + l)).collect()
}

fn word_prefix(word: WordKind, length: usize) -> Result<Vec<u8>> {
    Ok(match word {
        WordKind::Vtm => vtm_stream().prefix(length)?.to_vec(),
        WordKind::ThueMorse => {
            let d = thue_morse();
            (0..length as u64).map(|n| eval_dfao(&d, n)).collect()
        }
        WordKind::Fs => fs_stream().prefix(length)?.to_vec(),
        WordKind::Construction => {
            let w = default_pipeline(1)?.w;
            w.prefix(length)?.to_vec()
        }
    })
}

fn generate(word: WordKind, length: usize) -> Result<bool> {
    outln!("{}", digits(&word_prefix(word, length)?));
    Ok(true)
}

fn check(word: WordKind, length: usize) -> Result<bool> {
    let prefix = word_prefix(word, length)?;
    let (ok, detail) = match word {
        WordKind::Vtm => {
            let patterns: [&[u8]; 4] = [&[0, 1, 0], &[2, 1, 2], &[1, 0, 2, 1], &[1, 2, 0, 1]];
            let squarefree = is_squarefree(&prefix);
            let avoided = avoids(&prefix, &patterns);
            (
                squarefree && avoided,
                json!({ "squarefree": squarefree, "avoids_010_212_1021_1201": avoided }),
            )
        }
        WordKind::ThueMorse => {
            let agree = prefix
                .iter()
                .enumerate()
                .all(|(n, &l)| l == (n.count_ones() % 2) as u8);
            (agree, json!({ "matches_bit_parity": agree }))
        }
        WordKind::Fs => {
            let census: Vec<String> =
                square_census(&prefix).iter().map(|s| digits(s)).collect();
            let ok = census == ["00", "0101", "11"];
            (ok, json!({ "square_census": census }))
        }
        WordKind::Construction => {
            let squarefree = is_squarefree(&prefix);
            (squarefree, json!({ "squarefree": squarefree }))
        }
    };
    let report = json!({
        "word": word.name(),
        "length": length,
        "ok": ok,
        "detail": detail,
    });
    outln!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ok)
}

fn dispo_pos_automaton() -> Result<TrackAutomaton> {
    let mut env = PredicateEnv::standard();
    let (_, auto) = env.run_command(DISPO_POS_COMMAND)?;
    Ok(auto.clone())
}

fn disposable(target: Target, max_half: usize, engine: bool) -> Result<bool> {
    let vtm = vtm_stream();
    if let Some(j) = target.position {
        let verdict = is_disposable_position(&vtm, j, max_half)?;
        let mut report = serde_json::to_value(verdict)?;
        let mut ok = true;
        if engine {
            let accepted = dispo_pos_automaton()?.eval(&[j as u64]);
            ok = accepted == verdict.is_disposable();
            report["engine_accepted"] = json!(accepted);
            report["engine_agrees"] = json!(ok);
        }
        outln!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(ok);
    }

    let limit = target.limit.expect("clap enforces one target");
    outln!("# config: command=disposable limit={limit} max_half={max_half} engine={engine}");
    let (positions, final_half) = if engine {
        let auto = dispo_pos_automaton()?;
        disposable_positions_verified(&vtm, limit, max_half, 4096, |j| auto.eval(&[j]))?
    } else {
        (disposable_positions(&vtm, limit, max_half)?, max_half)
    };
    outln!("position,difference");
    let mut prev: Option<u64> = None;
    for &p in &positions {
        match prev {
            Some(q) => outln!("{p},{}", p - q),
            None => outln!("{p},"),
        }
        prev = Some(p);
    }
    if engine {
        outln!("# final_max_half: {final_half}");
    }
    Ok(true)
}

fn gaps(limit: usize, max_half: usize) -> Result<bool> {
    let positions = disposable_positions(&vtm_stream(), limit, max_half)?;
    let mut diffs = first_differences(&positions, true)?;
    diffs.sort_unstable();
    diffs.dedup();
    let line: Vec<String> = diffs.iter().map(u64::to_string).collect();
    outln!("{}", line.join(" "));
    Ok(true)
}

fn density(mode: DensityMode, checkpoints: &[u64]) -> Result<bool> {
    let auto = dispo_pos_automaton()?;
    match mode {
        DensityMode::Exact => outln!("{}", accepted_density(&auto)?),
        DensityMode::Empirical => {
            let joined: Vec<String> = checkpoints.iter().map(u64::to_string).collect();
            outln!(
                "# config: command=density mode=empirical checkpoints={}",
                joined.join(",")
            );
            outln!("n,density");
            for (n, d) in empirical_density_series(|j| auto.eval(&[j]), checkpoints) {
                outln!("{n},{d:.10}");
            }
        }
    }
    Ok(true)
}

/// Groups the file into commands: a line starting with `eval` opens one,
/// indented or bare continuation lines extend it, `#` lines are comments.
fn split_commands(text: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let body = line.trim_end();
        let head = body.trim_start();
        if head.is_empty() || head.starts_with('#') {
            continue;
        }
        if body.starts_with("eval ") {
            out.push(body.to_string());
        } else if let Some(current) = out.last_mut() {
            current.push('\n');
            current.push_str(body);
        } else {
            bail!("continuation line before any eval command: {head:?}");
        }
    }
    Ok(out)
}

fn walnut(file: &Path, bound: u64) -> Result<bool> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let commands = split_commands(&text)?;
    if commands.is_empty() {
        bail!("no eval commands in {}", file.display());
    }
    let mut env = PredicateEnv::standard();
    for command in &commands {
        let (name, auto) = env.run_command(command)?;
        let auto = auto.clone();
        outln!("# eval {name}");
        out!("{}", auto.to_text());
        if auto.tracks().is_empty() {
            outln!("# sentence holds: {}", auto.eval(&[]));
        } else {
            outln!("# accepted values up to {bound} ({})", auto.tracks().join(","));
            for tuple in auto.accepted_values(bound) {
                let row: Vec<String> = tuple.iter().map(u64::to_string).collect();
                outln!("{}", row.join(","));
            }
        }
    }
    Ok(true)
}

fn construct(phases: usize, out: &Path, ledger_path: &Path, length: Option<usize>) -> Result<bool> {
    let Pipeline { plan, w, ledger, .. } = default_pipeline(phases)?;
    let end = ledger.records.iter().map(|r| r.start + r.length).max().unwrap_or(0);
    let len = length.unwrap_or(end + 4000);
    let prefix = w.prefix(len)?;
    fs::write(out, format!("{}\n", digits(&prefix)))
        .with_context(|| format!("writing {}", out.display()))?;
    fs::write(
        ledger_path,
        format!("{}\n", serde_json::to_string_pretty(&ledger)?),
    )
    .with_context(|| format!("writing {}", ledger_path.display()))?;
    outln!(
        "phases={} records={} prefix_letters={} schedule_digest={:#018x}",
        plan.phases.len(),
        ledger.records.len(),
        len,
        ledger.schedule_digest
    );
    Ok(true)
}

fn verify(ledger_path: &Path, scan: usize) -> Result<bool> {
    let text = fs::read_to_string(ledger_path)
        .with_context(|| format!("reading {}", ledger_path.display()))?;
    let ledger: ConstructionLedger = serde_json::from_str(&text)?;
    if ledger.records.is_empty() {
        outln!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "scan": scan, "digest_match": true, "all_certified": true, "records": []
            }))?
        );
        return Ok(true);
    }
    let phases = ledger.records.iter().map(|r| r.phase).max().unwrap();
    let Pipeline { w, ledger: rebuilt, .. } = default_pipeline(phases)?;
    let digest_match = rebuilt.schedule_digest == ledger.schedule_digest;
    let report = verify_ledger(&w, &ledger, scan)?;
    let out = json!({
        "scan": scan,
        "digest_match": digest_match,
        "all_certified": report.all_certified,
        "records": report.records,
    });
    outln!("{}", serde_json::to_string_pretty(&out)?);
    Ok(report.all_certified && digest_match)
}
