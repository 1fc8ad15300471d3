use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ame::netdata::write_adjacency;
use ame::simstudy::{gen_ame_data, AmeTruth};

fn toy(dir: &Path) -> PathBuf {
    let data = gen_ame_data(15, &AmeTruth::default(), 31).unwrap();
    let p = dir.join("y.csv");
    write_adjacency(&p, &data.network).unwrap();
    p
}

fn ame(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ame")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_outputs_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let y = toy(d.path());
    let out = d.path().join("fit");
    let (code, _, err) = ame(&["fit", "--adjacency", s(&y), "--K", "2", "--burn", "20", "--iters", "100", "--seed", "3", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    for f in ["samples.csv", "summary.csv", "probabilities.csv", "multiplicative.csv", "additive.csv", "factors.svg", "metadata.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "fit");
    assert_eq!(meta["seed"], 3);
    let files = meta["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["file"] == "summary.csv"));
    assert!(files.iter().all(|f| f["sha256"].as_str().unwrap().len() == 64));

    let exported = d.path().join("export");
    let (code, _, err) = ame(&[
        "export-factors",
        "--multiplicative", s(&out.join("multiplicative.csv")),
        "--additive", s(&out.join("additive.csv")),
        "--out-dir", s(&exported),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(exported.join("metadata.json").is_file());
}

#[test]
fn several_ranks_share_one_summary() {
    let d = tempfile::tempdir().unwrap();
    let y = toy(d.path());
    let out = d.path().join("fit");
    let (code, _, err) = ame(&["fit", "--adjacency", s(&y), "--K", "0,1", "--burn", "10", "--iters", "40", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let table = fs::read_to_string(out.join("summary_by_k.csv")).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.contains("AME (k=0)") && header.contains("AME (k=1)"), "{header}");
    assert!(out.join("K0").is_dir() && out.join("K1").is_dir());
}

#[test]
fn logit_and_gof_run_without_sampling() {
    let d = tempfile::tempdir().unwrap();
    let y = toy(d.path());
    let out = d.path().join("logit");
    assert_eq!(ame(&["logit-fit", "--adjacency", s(&y), "--out-dir", s(&out)]).0, 0);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("intercept"));
    let out = d.path().join("gof");
    assert_eq!(ame(&["gof", "--adjacency", s(&y), "--out-dir", s(&out)]).0, 0);
    let observed = fs::read_to_string(out.join("gof_observed.csv")).unwrap();
    for stat in ["sd.rowmean", "sd.colmean", "dyad.dep", "triad.dep"] {
        assert!(observed.contains(stat), "{stat} missing");
    }
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, err) = ame(&["fit", "--no-such-flag"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, err) = ame(&["logit-fit", "--adjacency", s(&d.path().join("absent.csv")), "--out-dir", s(&d.path().join("o"))]);
    assert_eq!(code, 2, "{err}");
    let bad = d.path().join("bad.csv");
    fs::write(&bad, ",a,b\na,,x\nb,1,\n").unwrap();
    let (code, _, err) = ame(&["logit-fit", "--adjacency", s(&bad), "--out-dir", s(&d.path().join("o2"))]);
    assert_eq!(code, 2, "{err}");
    let (code, out, _) = ame(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simstudy"));
}
