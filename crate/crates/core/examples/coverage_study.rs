//! Frequentist coverage of 95% credible intervals over replicated synthetic data sets.
//!
//! Usage: cargo run --release --example coverage_study -- [replicates] [burn] [kept] [literal|adaptive] [K]

use ame::ame::{fit, posterior_summary, FitConfig, RhoProposal};
use ame::randkit::derive_seed;
use ame::simstudy::{gen_ame_data, AmeTruth};
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let replicates: usize = args.first().map_or(Ok(20), |a| a.parse())?;
    let burn: usize = args.get(1).map_or(Ok(1000), |a| a.parse())?;
    let kept: usize = args.get(2).map_or(Ok(300), |a| a.parse())?;
    let rho_proposal = match args.get(3).map(String::as_str) {
        Some("literal") => RhoProposal::Literal,
        _ => RhoProposal::Adaptive(0.1),
    };
    let k: usize = args.get(4).map_or(Ok(2), |a| a.parse())?;
    let truth = AmeTruth { k, ..AmeTruth::default() };
    let targets = [("intercept", truth.beta[0]), ("x1", truth.beta[1]), ("rho", truth.rho)];

    let hits: Vec<([bool; 3], [f64; 3])> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = gen_ame_data(100, &truth, derive_seed(77, r as u64)).expect("valid truth");
            let config = FitConfig { k: truth.k, seed: r as u64 + 1, rho_proposal, ..FitConfig::default() }
                .with_budget(burn, kept, 10);
            let summary = posterior_summary(&fit(&data.network, &data.design, &config).expect("fit")).expect("summary");
            let rho = summary.iter().find(|s| s.name == "rho").expect("rho row");
            let covered = targets.map(|(name, t)| {
                let row = summary.iter().find(|s| s.name == name).expect("row");
                row.q025 <= t && t <= row.q975
            });
            (covered, [rho.mean, rho.q025, rho.q975])
        })
        .collect();
    for (r, (_, rho)) in hits.iter().enumerate() {
        println!("replicate {r:>3}: rho {:.3} [{:.3}, {:.3}]", rho[0], rho[1], rho[2]);
    }
    for (c, (name, _)) in targets.iter().enumerate() {
        let covered = hits.iter().filter(|h| h.0[c]).count();
        println!("{name:<10} covered in {covered}/{replicates}");
    }
    Ok(())
}
