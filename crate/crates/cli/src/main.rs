use clap::Parser;

fn main() {
    let cli = edgeadain_cli::Cli::parse();
    if let Err(err) = edgeadain_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
