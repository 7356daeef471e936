#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use miscorr_core::simkit::{simulate_w, simulate_x, simulate_y, stream, Purpose, TruthSpec};
use miscorr_core::{encode_dummy, CategoricalSpec, MisclassMatrix, MisclassModel};

pub fn miscorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miscorr"))
        .args(args)
        .env_remove("MISCORR_THREADS")
        .output()
        .expect("binary runs")
}

pub fn stderr_code(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    v["code"].as_str().unwrap().to_string()
}

pub fn write_matrix(path: &Path, m: &MisclassMatrix) {
    let text: String = (0..m.levels())
        .map(|x| m.row(x).iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, text).unwrap();
}

/// Seeded dataset plus model files and a fit config in `dir`. Returns the
/// config path.
pub fn write_fixture(dir: &Path, model: &MisclassModel, n: usize, sigma: f64, seed: u64) -> PathBuf {
    let spec: CategoricalSpec = model.spec();
    let x = simulate_x(&spec, model.marginals(), n, &mut stream(seed, Purpose::Design, 0, 0)).unwrap();
    let w = simulate_w(&x, model.thetas(), &mut stream(seed, Purpose::Design, 0, 1)).unwrap();
    let xd = encode_dummy(&spec, &x).unwrap().design;
    let truth = TruthSpec::linear(spec.param_count());
    let y = simulate_y(&xd, &truth, sigma, &mut stream(seed, Purpose::Noise, 0, 0)).unwrap();

    let mut data = String::from("y");
    for k in 1..=spec.covariates() {
        data.push_str(&format!(",w{k}"));
    }
    data.push('\n');
    for i in 0..n {
        data.push_str(&format!("{:.17e}", y[i]));
        for v in w.row(i) {
            data.push_str(&format!(",{v}"));
        }
        data.push('\n');
    }
    fs::write(dir.join("data.csv"), data).unwrap();

    let mut theta = Vec::new();
    let mut p = Vec::new();
    for k in 0..spec.covariates() {
        let t = format!("theta_w{}.csv", k + 1);
        write_matrix(&dir.join(&t), &model.thetas()[k]);
        let pf = format!("p_w{}.csv", k + 1);
        let probs = model.marginals()[k].probs().iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>();
        fs::write(dir.join(&pf), probs.join(",") + "\n").unwrap();
        theta.push(t);
        p.push(pf);
    }
    let truth_text = truth.beta_star().iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join("\n");
    fs::write(dir.join("truth.csv"), truth_text + "\n").unwrap();
    let cfg = serde_json::json!({
        "data": "data.csv",
        "theta": theta,
        "p": p,
        "truth": "truth.csv",
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}
