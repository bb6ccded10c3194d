use clap::Parser;

fn main() {
    let cli = repqr_cli::args::Cli::parse();
    if let Err(e) = repqr_cli::run(&cli) {
        eprintln!("repqr: {e}");
        std::process::exit(e.exit_code());
    }
}
