use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interconnect::core::fabric::{AuditFilter, AuditOp};
use interconnect::core::simnet::{run_scenario, ScenarioError, ScenarioRun, SCENARIOS};
use interconnect::{auditlog, descriptor, export, tracefile};

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "interconnect", version, about = "Run scenarios and inspect interconnect artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario and check its trace.
    Run {
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Compare against this golden trace.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Overwrite the golden with this run instead of comparing.
        #[arg(long, requires = "golden")]
        bless: bool,
        /// Flush the audit log here.
        #[arg(long)]
        audit_log: Option<PathBuf>,
        /// Write plan, transcript and loop report JSON into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Query a flushed audit log.
    Audit {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        actor: Option<String>,
    },
    /// Model descriptor tools.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
    /// List available scenarios.
    Scenarios,
}

#[derive(Subcommand)]
enum RegistryCommand {
    /// Check a `.model.json` descriptor.
    Validate { file: PathBuf },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("interconnect: {msg}");
    ExitCode::from(code)
}

fn write_exports(dir: &Path, run: &ScenarioRun) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for p in &run.plans {
        fs::write(dir.join(format!("{}.json", p.plan_id)), export::plan_json(p))?;
    }
    for s in &run.sessions {
        fs::write(dir.join(format!("{}.json", s.session_id)), export::transcript_json(s))?;
    }
    if let Some(r) = &run.loop_report {
        fs::write(dir.join(format!("{}.loop.json", r.loop_id)), export::loop_report_json(r))?;
    }
    Ok(())
}

fn run(
    scenario: &str,
    seed: u64,
    trace: Option<&Path>,
    golden: Option<&Path>,
    bless: bool,
    audit_log: Option<&Path>,
    export_dir: Option<&Path>,
) -> ExitCode {
    let run = match run_scenario(scenario, seed) {
        Ok(r) => r,
        Err(e @ ScenarioError::UnknownScenario(_)) => return fail(USAGE, format!("{e}; try `interconnect scenarios`")),
        Err(e) => return fail(FAILED, format!("{scenario} aborted [{}]: {e}", e.code())),
    };
    for c in &run.checks {
        println!("{} {} {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(p) = trace {
        if let Err(e) = tracefile::write_trace(p, &run.trace) {
            return fail(USAGE, format!("cannot write trace {}: {e}", p.display()));
        }
    }
    if let Some(p) = audit_log {
        let out = fs::File::create(p).and_then(|f| auditlog::flush(&run.audit, std::io::BufWriter::new(f)));
        if let Err(e) = out {
            return fail(USAGE, format!("cannot write audit log {}: {e}", p.display()));
        }
    }
    if let Some(dir) = export_dir {
        if let Err(e) = write_exports(dir, &run) {
            return fail(USAGE, format!("cannot export to {}: {e}", dir.display()));
        }
    }
    let mut code = if run.passed() { OK } else { FAILED };
    if let Some(g) = golden {
        if bless {
            if let Err(e) = tracefile::write_trace(g, &run.trace) {
                return fail(USAGE, format!("cannot write golden {}: {e}", g.display()));
            }
            println!("blessed {}", g.display());
        } else {
            match tracefile::read_trace(g) {
                Ok(expected) => {
                    let d = tracefile::diff(&run.trace, &expected);
                    if d.is_empty() {
                        println!("golden match {}", g.display());
                    } else {
                        print!("{d}");
                        eprintln!("interconnect: trace differs from golden in {} lines", d.len());
                        code = FAILED;
                    }
                }
                Err(e @ tracefile::GoldenError::Io { .. }) => return fail(USAGE, e),
                Err(e) => return fail(FAILED, e),
            }
        }
    }
    println!("{} seed={} {}", run.name, run.seed, if code == OK { "ok" } else { "failed" });
    ExitCode::from(code)
}

fn audit(log: &Path, op: Option<&str>, actor: Option<&str>) -> ExitCode {
    let mut filter = AuditFilter::default();
    if let Some(op) = op {
        match op.parse::<AuditOp>() {
            Ok(op) => filter = AuditFilter::op(op),
            Err(_) => return fail(USAGE, format!("unknown op `{op}`")),
        }
    }
    if let Some(a) = actor {
        filter.actor = Some(a.to_string());
    }
    let text = match fs::read_to_string(log) {
        Ok(t) => t,
        Err(e) => return fail(USAGE, format!("cannot read {}: {e}", log.display())),
    };
    let records = match auditlog::parse_log(&text) {
        Ok(r) => r,
        Err(e) => return fail(FAILED, e),
    };
    for r in auditlog::query(&records, &filter) {
        println!("{}", auditlog::format_record(r));
    }
    ExitCode::from(OK)
}

fn validate(file: &Path) -> ExitCode {
    let bytes = match fs::read(file) {
        Ok(b) => b,
        Err(e) => return fail(USAGE, format!("cannot read {}: {e}", file.display())),
    };
    let d = match descriptor::parse_descriptor(&bytes) {
        Ok(d) => d,
        Err(e) => return fail(FAILED, format!("{} invalid [{}]: {e}", file.display(), e.code())),
    };
    if let Err(e) = d.validate() {
        return fail(FAILED, format!("{} invalid: {e}", file.display()));
    }
    println!("valid {} {} ({} capabilities)", d.model_id, d.version, d.capabilities.len());
    ExitCode::from(OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            trace,
            golden,
            bless,
            audit_log,
            export,
        } => run(&scenario, seed, trace.as_deref(), golden.as_deref(), bless, audit_log.as_deref(), export.as_deref()),
        Command::Audit { log, op, actor } => audit(&log, op.as_deref(), actor.as_deref()),
        Command::Registry {
            command: RegistryCommand::Validate { file },
        } => validate(&file),
        Command::Scenarios => {
            for s in SCENARIOS {
                println!("{s}");
            }
            ExitCode::from(OK)
        }
    }
}
