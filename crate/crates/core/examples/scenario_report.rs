//! Runs a bundled scenario through the batch front-end and prints the report body.
//!
//!     cargo run --example scenario_report -- scenarios/weighted_1_2.json

use qnet_privacy::cli::{self, Task};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/ghz_average_d3.json").into()
    });
    let scenario = cli::load_scenario(path.as_ref()).unwrap_or_else(|e| panic!("{e}"));
    match cli::run_task(scenario.task.unwrap_or(Task::Analyze), &scenario) {
        Ok(out) => {
            print!("{}", out.summary);
            println!("{}", out.report.body.to_json());
        }
        Err((code, msg)) => {
            eprintln!("{msg}");
            std::process::exit(code);
        }
    }
}
