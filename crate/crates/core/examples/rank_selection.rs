//! Compare multiplicative-effect ranks K by posterior summaries and cross-validated AUC.
//!
//! Usage: cargo run --release --example rank_selection -- [n] [max-K]

use ame::ame::{fit, posterior_summary, FitConfig};
use ame::eval::{cross_validate, roc_points, CvModel};
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(40);
    let kmax = args.get(1).copied().unwrap_or(3);
    let data = gen_ame_data(n, &AmeTruth::default(), 17)?;
    println!("{:<4} {:>9} {:>9} {:>9}", "K", "intercept", "rho", "CV AUC");
    for k in 0..=kmax {
        let config = FitConfig { k, ..FitConfig::default() }.with_budget(500, 200, 5);
        let summary = posterior_summary(&fit(&data.network, &data.design, &config)?)?;
        let get = |name: &str| summary.iter().find(|r| r.name == name).map_or(f64::NAN, |r| r.mean);
        let preds = cross_validate(&data.network, &data.design, &CvModel::Ame(config), 5, 2)?;
        println!("{:<4} {:>9.3} {:>9.3} {:>9.3}", k, get("intercept"), get("rho"), roc_points(&preds)?.auc);
    }
    Ok(())
}
