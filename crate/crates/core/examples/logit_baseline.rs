//! Logistic regression on stacked dyads, the covariate-only baseline.
//!
//! Usage: cargo run --release --example logit_baseline -- [n]

use ame::glmbase::fit_logit;
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(60);
    let truth = AmeTruth::default();
    let data = gen_ame_data(n, &truth, 9)?;
    let f = fit_logit(&data.network, &data.design)?;
    println!("converged {} after {} Newton steps, separation {}", f.converged, f.iterations, f.separation);
    println!("{:<10} {:>8} {:>8}", "term", "coef", "se");
    for (k, name) in f.names.iter().enumerate() {
        println!("{:<10} {:>8.3} {:>8.3}", name, f.coefficients[k], f.std_errors[k]);
    }
    println!("logit coefficients are on a different scale from the probit truth {:?}", truth.beta);
    Ok(())
}
