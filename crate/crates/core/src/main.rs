use clap::Parser;

use metricdp::cli::{run, RunConfig};

fn main() {
    env_logger::init();
    let config = RunConfig::parse();
    std::process::exit(run(&config));
}
