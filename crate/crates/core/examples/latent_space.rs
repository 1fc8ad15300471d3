//! Fit the latent space (distance) model with and without sender/receiver effects.
//!
//! Usage: cargo run --release --example latent_space -- [n]

use ame::ame::posterior_summary;
use ame::eval::roc_auc_matrix;
use ame::lsm::{fit_lsm, LsmConfig};
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(40);
    let data = gen_ame_data(n, &AmeTruth::default(), 5)?;
    for sr in [false, true] {
        let config = LsmConfig { sr_effects: sr, ..LsmConfig::default() }.with_budget(1000, 300, 5);
        let samples = fit_lsm(&data.network, &data.design, &config)?;
        let auc = roc_auc_matrix(data.network.cells(), &samples.predict_proba()?)?;
        println!("sender/receiver effects: {sr}, in-sample AUC-ROC {auc:.3}");
        for row in posterior_summary(&samples)? {
            println!("  {:<10} {:>8.3} [{:>7.3}, {:>7.3}]", row.name, row.mean, row.q025, row.q975);
        }
        for a in &samples.acceptance {
            println!("  acceptance {:<10} {:.2}", a.name, a.rate());
        }
    }
    Ok(())
}
