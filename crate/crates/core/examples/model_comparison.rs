//! LFM versus LSM on networks generated with varying reciprocity or sender/receiver
//! heterogeneity; prints median out-of-sample AUCs per scenario.
//!
//! Usage: cargo run --release --example model_comparison -- [egalitarian|reciprocity] [replicates] [n]

use ame::simstudy::{run_comparison, FitBudget, Scenario, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kind: ScenarioKind = args.next().as_deref().unwrap_or("reciprocity").parse()?;
    let replicates = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3);
    let n = args.next().map(|a| a.parse()).transpose()?.unwrap_or(40);
    let scenarios: Vec<Scenario> = kind
        .default_levels()
        .into_iter()
        .map(|level| Scenario { kind, level, n, density_target: 0.2, replicates })
        .collect();
    let table = run_comparison(&scenarios, FitBudget { burn: 1000, kept: 300, thin: 5 }, 1)?;
    println!("{:<12} {:>6} {:>9} {:>9} {:>9} {:>9}", "scenario", "level", "LFM roc", "LSM roc", "LFM pr", "LSM pr");
    for (i, sc) in scenarios.iter().enumerate() {
        let m = |model, metric| table.median(i, model, metric).unwrap_or(f64::NAN);
        println!(
            "{:<12} {:>6.2} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            sc.kind.to_string(), sc.level, m("LFM", "auc_roc"), m("LSM", "auc_roc"), m("LFM", "auc_pr"), m("LSM", "auc_pr")
        );
    }
    Ok(())
}
