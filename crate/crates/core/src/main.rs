use clap::Parser;

use geofilter::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            geofilter::cli::commands::EXIT_ERROR
        }
    };
    std::process::exit(code);
}
