//! Fit the AME model to data simulated from it and compare estimates with the truth.
//!
//! Usage: cargo run --release --example synthetic_recovery -- [n] [burn] [iterations]

use std::time::Instant;

use ame::ame::{fit, posterior_summary, FitConfig};
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(100);
    let burn = args.get(1).copied().unwrap_or(5000);
    let iterations = args.get(2).copied().unwrap_or(15000);

    let truth = AmeTruth::default();
    let data = gen_ame_data(n, &truth, 2024)?;
    println!("n = {n}, density = {:.3}", data.network.mean().unwrap_or(f64::NAN));

    let config = FitConfig { k: truth.k, burn, iterations, ..FitConfig::default() };
    let start = Instant::now();
    let samples = fit(&data.network, &data.design, &config)?;
    let secs = start.elapsed().as_secs_f64();
    println!("{iterations} sweeps in {secs:.1} s ({:.2} ms/sweep)", 1e3 * secs / iterations as f64);

    let want = [truth.beta[0], truth.beta[1], truth.rho];
    println!("{:<10} {:>8} {:>8} {:>18}", "param", "truth", "mean", "95% interval");
    for row in posterior_summary(&samples)? {
        let t = match row.name.as_str() {
            "intercept" => Some(want[0]),
            "x1" => Some(want[1]),
            "rho" => Some(want[2]),
            "sigma_a2" => Some(truth.sigma_a * truth.sigma_a),
            "sigma_b2" => Some(truth.sigma_b * truth.sigma_b),
            _ => None,
        };
        let t = t.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<10} {:>8} {:>8.3} [{:>7.3}, {:>7.3}]", row.name, t, row.mean, row.q025, row.q975);
    }
    for a in &samples.acceptance {
        println!("{} acceptance: {:.2}", a.name, a.rate());
    }
    Ok(())
}
