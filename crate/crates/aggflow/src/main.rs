use clap::Parser;

fn main() {
    let cli = aggflow::cli::Cli::parse();
    if let Err(e) = aggflow::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
