//! Observed network statistics and a posterior-predictive check of a fitted AME model.
//!
//! Usage: cargo run --release --example goodness_of_fit -- [n] [nsims]

use ame::ame::{fit, FitConfig};
use ame::gof::{gof_core4, posterior_predictive_gof, shared_partner_dists, SpMode, StatKind};
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(50);
    let nsims = args.get(1).copied().unwrap_or(500);
    let data = gen_ame_data(n, &AmeTruth::default(), 21)?;

    let observed = gof_core4(&data.network)?;
    for (name, v) in ame::gof::GofVector::NAMES.iter().zip(observed.values()) {
        println!("{name:<11} {v:>8.4}");
    }
    let sp = shared_partner_dists(&data.network, SpMode::Symmetric);
    println!("dyadwise shared partners {:?}", sp.dyadwise);

    let samples = fit(&data.network, &data.design, &FitConfig { k: 2, ..FitConfig::default() }.with_budget(1000, 250, 4))?;
    let report = posterior_predictive_gof(&samples, &data.network, &data.design, nsims, &[StatKind::Core4], 1)?;
    println!("\n{:<11} {:>8} {:>8} {:>18} {:>7}", "statistic", "observed", "sim mean", "95% envelope", "inside");
    for row in &report.rows {
        println!(
            "{:<11} {:>8.4} {:>8.4} [{:>7.4}, {:>7.4}] {:>7}",
            row.statistic, row.observed, row.sim_mean, row.q025, row.q975, row.inside_95()
        );
    }
    Ok(())
}
