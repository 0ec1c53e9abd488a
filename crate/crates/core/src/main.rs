use clap::Parser;

fn main() {
    // clap exits with code 2 on usage errors; runtime failures exit 1.
    let cli = jbsde::cli::Cli::parse();
    if let Err(e) = jbsde::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
