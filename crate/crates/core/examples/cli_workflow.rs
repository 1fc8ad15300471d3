//! Drive the `ame` command line through the library entry point: write a network, fit it,
//! check it and export the factor geometry.
//!
//! Usage: cargo run --release --example cli_workflow -- [output-dir]

use ame::cli::run;
use ame::netdata::write_adjacency;
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "ame-cli-demo".into());
    std::fs::create_dir_all(&root)?;
    let adjacency = format!("{root}/network.csv");
    write_adjacency(&adjacency, &gen_ame_data(30, &AmeTruth::default(), 6)?.network)?;
    let steps: Vec<Vec<String>> = [
        format!("fit --adjacency {adjacency} --K 2 --burn 500 --iters 2000 --thin 5 --out-dir {root}/fit"),
        format!("gof --adjacency {adjacency} --out-dir {root}/gof"),
        format!("ppc --adjacency {adjacency} --K 2 --burn 500 --iters 1500 --nsims 200 --out-dir {root}/ppc"),
        format!("cv --adjacency {adjacency} --model logit --S 10 --out-dir {root}/cv"),
        format!("export-factors --multiplicative {root}/fit/multiplicative.csv --additive {root}/fit/additive.csv --out-dir {root}/export"),
    ]
    .iter()
    .map(|s| s.split_whitespace().map(String::from).collect())
    .collect();
    for step in steps {
        let argv = std::iter::once("ame".to_string()).chain(step.iter().cloned());
        let outcome = run(argv);
        println!("ame {} -> exit {}, {} files", step[0], outcome.code, outcome.manifest.len());
        if outcome.code != 0 {
            eprintln!("{}", outcome.message);
            std::process::exit(outcome.code);
        }
    }
    Ok(())
}
