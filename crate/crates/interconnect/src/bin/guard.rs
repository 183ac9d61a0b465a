use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use interconnect::core::guard::{Decision, Guard, Subject, TicketReason};
use interconnect::core::ids::{PlanId, TicketId};
use interconnect::tickets::{self, TicketStoreError};

#[derive(Parser)]
#[command(name = "guard", version, about = "Review human-in-the-loop tickets")]
struct Cli {
    /// Ticket store file.
    #[arg(long, global = true, default_value = "guard-tickets.json")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Tickets {
        #[command(subcommand)]
        command: TicketCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Reason {
    Manual,
    HighImpact,
    ConsensusDisagreement,
}

#[derive(Subcommand)]
enum TicketCommand {
    List,
    /// Open a ticket for a program id or a `plan-N` id.
    Open {
        subject: String,
        #[arg(long, value_enum, default_value_t = Reason::Manual)]
        reason: Reason,
    },
    Approve {
        id: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    Deny {
        id: String,
        #[arg(long)]
        note: String,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("guard: {msg}");
    ExitCode::from(code)
}

fn store_error(e: TicketStoreError) -> ExitCode {
    match e {
        TicketStoreError::Guard(g) => fail(1, format!("[{}] {g}", g.code())),
        other => fail(2, other),
    }
}

fn resolve(cli: &Cli, id: &str, decision: Decision, note: &str) -> ExitCode {
    let Some(id) = TicketId::parse(id) else {
        return fail(2, format!("`{id}` is not a ticket id"));
    };
    match tickets::resolve(&cli.store, id, decision, note) {
        Ok(t) => {
            println!("{} {:?}", t.ticket_id, t.state);
            ExitCode::SUCCESS
        }
        Err(e) => store_error(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Tickets { command } = &cli.command;
    match command {
        TicketCommand::List => match tickets::load(&cli.store) {
            Ok(all) => {
                for t in all {
                    println!("{} {:?} {} {:?} {}", t.ticket_id, t.state, t.subject, t.reason, t.note.unwrap_or_default());
                }
                ExitCode::SUCCESS
            }
            Err(e) => store_error(e),
        },
        TicketCommand::Open { subject, reason } => {
            let subject = match PlanId::parse(subject) {
                Some(p) => Subject::Plan(p),
                None => Subject::Program(subject.clone()),
            };
            let reason = match reason {
                Reason::Manual => TicketReason::Manual,
                Reason::HighImpact => TicketReason::HighImpact,
                Reason::ConsensusDisagreement => TicketReason::ConsensusDisagreement,
            };
            let mut guard = Guard::default();
            let existing = match tickets::load(&cli.store) {
                Ok(t) => t,
                Err(e) => return store_error(e),
            };
            for t in existing {
                guard.restore_ticket(t);
            }
            let id = guard.open_ticket(subject, reason);
            let all: Vec<_> = guard.tickets().cloned().collect();
            match tickets::save(&cli.store, &all) {
                Ok(()) => {
                    println!("{id}");
                    ExitCode::SUCCESS
                }
                Err(e) => store_error(e),
            }
        }
        TicketCommand::Approve { id, note } => resolve(&cli, id, Decision::Approved, note),
        TicketCommand::Deny { id, note } => resolve(&cli, id, Decision::Denied, note),
    }
}
