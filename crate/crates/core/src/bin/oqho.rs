use clap::Parser;
use oqho::cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("oqho: {e}");
        std::process::exit(2);
    }
    let outcome = run(&cli);
    println!("{}", serde_json::to_string_pretty(&outcome.report).expect("reports serialize"));
    if let Some(msg) = outcome.report["result"]["error"]["message"].as_str() {
        eprintln!("oqho: {msg}");
    }
    std::process::exit(outcome.exit_code);
}
