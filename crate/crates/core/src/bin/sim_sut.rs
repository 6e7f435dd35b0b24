//! Serves a simulated SUT and its driver over HTTP.

use clap::Parser;
use evorest::sim::{load_spec, SimServer};

#[derive(Parser)]
#[command(name = "sim-sut", about = "Serves a simulated SUT with its driver protocol on localhost.")]
struct Args {
    /// Canned spec (crud-chain, needle, faulty) or path to a JSON spec file
    #[arg(long, default_value = "crud-chain")]
    spec: String,
    /// Port to listen on; 0 picks a free one
    #[arg(long, default_value_t = 40100)]
    port: u16,
    /// Print the simulated API definition as JSON and exit
    #[arg(long)]
    dump: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let spec = match load_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    if args.dump {
        println!("{}", spec.to_json());
        return;
    }
    match SimServer::start(spec, args.port) {
        Ok(server) => {
            println!("sim-sut {} listening on {}", args.spec, server.url());
            server.join();
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
