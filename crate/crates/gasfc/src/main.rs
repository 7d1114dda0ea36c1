use clap::Parser;

fn main() {
    let cli = gasfc::cli::Cli::parse();
    if let Err(e) = gasfc::cli::run(cli) {
        eprintln!("error: {e}");
        for line in e.details() {
            eprintln!("  {line}");
        }
        std::process::exit(e.exit_code());
    }
}
