use clap::Parser;

fn main() {
    let cli = matan::cli::Cli::parse();
    if let Err(e) = matan::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
