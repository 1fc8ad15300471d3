//! Circle-plot geometry of the posterior mean multiplicative effects: node angles and
//! magnitudes plus the dyads whose latent association exceeds a threshold.
//!
//! Usage: cargo run --release --example factor_geometry -- [n] [svg-path]

use ame::ame::{fit, FitConfig};
use ame::lfm::{export_factor_geometry, ExcessThreshold, LatentFactors};
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n = args.next().map(|a| a.parse()).transpose()?.unwrap_or(30);
    let svg = args.next();
    let data = gen_ame_data(n, &AmeTruth::default(), 4)?;
    let samples = fit(&data.network, &data.design, &FitConfig { k: 2, ..FitConfig::default() }.with_budget(1000, 300, 5))?;
    let latent = samples.latent_term_mean()?;
    let additive = samples.mean_predictor()? - &latent;
    let factors = LatentFactors::from_product(&latent, 2)?;
    let geometry = export_factor_geometry(&factors, &samples.labels, &additive, ExcessThreshold::default())?;
    println!("threshold {:.3}", geometry.threshold);
    print!("{}", geometry.nodes_csv());
    let flagged = geometry.dyads.iter().filter(|d| d.excess).count();
    println!("{flagged} of {} dyads flagged", geometry.dyads.len());
    if let Some(path) = svg {
        std::fs::write(&path, geometry.to_svg())?;
        println!("wrote {path}");
    }
    Ok(())
}
