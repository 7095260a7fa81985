use clap::Parser;
use subcurv_cli::commands::{run, Cli, EXIT_CONFIG};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        eprintln!("cannot start worker threads: {e}");
        std::process::exit(EXIT_CONFIG);
    }
    let code = run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
