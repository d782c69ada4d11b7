mod attn;
mod confbench;
mod prior;
mod sample;
mod score;
mod train;

use flowplex_core::MolecularSystem;

use crate::args::Command;
use crate::config::ConfigFile;
use crate::{CliError, CliResult, RunContext};

pub fn dispatch(command: Command, file: &ConfigFile, ctx: &RunContext) -> CliResult<()> {
    let name = command.name();
    match command {
        Command::Prior(a) => prior::run(a.layered(file.section(name)?), ctx),
        Command::Sample(a) => sample::run(a.layered(file.section(name)?), ctx),
        Command::TrainToy(a) => train::run(a.layered(file.section(name)?), ctx),
        Command::Score(a) => score::run(a.layered(file.section(name)?), ctx),
        Command::Confbench(a) => confbench::run(a.layered(file.section(name)?), ctx),
        Command::AttnBench(a) => attn::run(a.layered(file.section(name)?), ctx),
    }
}

fn chain_index(system: &MolecularSystem, id: &str) -> CliResult<usize> {
    system
        .chain_index(id)
        .ok_or_else(|| CliError::Usage(format!("no chain '{id}' in the topology")))
}

/// Write rows of string cells under `header`.
fn write_table(path: &std::path::Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let fail = |e: csv::Error| CliError::Input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
