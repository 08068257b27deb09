use clap::Parser;

fn main() {
    let cli = mrd_cli::Cli::parse();
    if let Err(e) = mrd_cli::run(cli) {
        eprintln!("mrd: {e}");
        std::process::exit(e.exit_code());
    }
}
