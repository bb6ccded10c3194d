//! Command-line front end for replicated-design quantile regression.

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod output;

use std::io::Write;
use std::path::Path;

use args::{Cli, Command, OutputArgs};
use error::Result;
use output::OutputTable;

fn emit(table: &OutputTable, out: &OutputArgs) -> Result<()> {
    write_table(table, out.format, out.out.as_deref())
}

pub fn write_table(table: &OutputTable, format: output::Format, path: Option<&Path>) -> Result<()> {
    let text = table.render(format);
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => {
            let report = commands::fit::cmd_fit(&a.config())?;
            if let Some(p) = &a.plot_data {
                write_table(&report.plot_table(), output::Format::Csv, Some(p))?;
            }
            emit(&report.table(), &a.output)
        }
        Command::Simulate(a) => {
            let results = commands::simulate::cmd_simulate(&a.config())?;
            emit(&commands::simulate::results_table(&results), &a.output)
        }
        Command::Asymptotics(a) => {
            let reports = commands::asymptotics::cmd_asymptotics(&a.config())?;
            emit(&commands::asymptotics::report_table(&reports), &a.output)
        }
    }
}
