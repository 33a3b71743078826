use clap::Parser;

fn main() {
    std::process::exit(waveinv_cli::run(waveinv_cli::Cli::parse()));
}
