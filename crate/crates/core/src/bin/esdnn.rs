use clap::Parser;
use esdnn::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("esdnn: {e}");
        std::process::exit(e.exit_code());
    }
}
