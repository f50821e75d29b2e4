use clap::Parser;

fn main() {
    let cli = nhpp_cli::Cli::parse();
    if let Err(e) = nhpp_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
