use clap::Parser;

fn main() {
    let cli = rpt_cli::config::Cli::parse();
    if let Err(err) = rpt_cli::runner::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
