use clap::Parser;

fn main() {
    let cli = nbv_cli::Cli::parse();
    if let Err(e) = nbv_cli::init_threads().and_then(|()| nbv_cli::run(cli)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
