//! Out-of-sample link prediction: S-fold cross-validation over ordered dyads for AME, the
//! latent space model and the logistic baseline.
//!
//! Usage: cargo run --release --example cross_validation -- [n] [folds]

use ame::ame::FitConfig;
use ame::eval::{cross_validate, pr_points, roc_points, CvModel};
use ame::lsm::LsmConfig;
use ame::simstudy::{gen_ame_data, AmeTruth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(34);
    let folds = args.get(1).copied().unwrap_or(10);
    let data = gen_ame_data(n, &AmeTruth::default(), 12)?;

    let models = [
        ("AME (k=2)", CvModel::Ame(FitConfig { k: 2, ..FitConfig::default() }.with_budget(500, 200, 5))),
        ("LSM (k=2)", CvModel::Lsm(LsmConfig::default().with_budget(500, 200, 5))),
        ("logit", CvModel::Logit),
    ];
    println!("{folds}-fold CV on {} ordered dyads", n * (n - 1));
    println!("{:<10} {:>8} {:>8}", "model", "AUC-ROC", "AUC-PR");
    for (name, model) in &models {
        let preds = cross_validate(&data.network, &data.design, model, folds, 3)?;
        println!("{:<10} {:>8.3} {:>8.3}", name, roc_points(&preds)?.auc, pr_points(&preds)?.auc);
    }
    Ok(())
}
