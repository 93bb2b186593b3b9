use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mdingarch"));
    c.env_remove("MDINGARCH_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mdingarch-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn simulated(name: &str, preset: &str, n: &str) -> String {
    let path = scratch(name);
    let out = run(&["simulate", "--preset", preset, "--n", n, "--seed", "7", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_is_reproducible_with_sidecar() {
    let a = simulated("a.csv", "sec6-pois", "3600");
    let b = simulated("b.csv", "sec6-pois", "3600");
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().count(), 3600);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(format!("{a}.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["burn_in"], 500);
    assert_eq!(meta["schema_version"], 1);
}

#[test]
fn seed_falls_back_to_environment() {
    let flag = run(&["simulate", "--preset", "sec6-nb", "--n", "50", "--seed", "99"]);
    let env = bin().args(["simulate", "--preset", "sec6-nb", "--n", "50"]).env("MDINGARCH_SEED", "99").output().unwrap();
    assert_eq!(flag.stdout, env.stdout);
    let other = run(&["simulate", "--preset", "sec6-nb", "--n", "50"]);
    assert_ne!(flag.stdout, other.stdout);
}

#[test]
fn fit_report_layout() {
    let input = simulated("fit.csv", "sec6-pois", "2000");
    let v = json(&run(&["fit", "--input", &input]));
    let names: Vec<&str> = v["parameter_names"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert_eq!(names, ["c", "a", "b", "omega1", "alpha1", "beta1", "omega2", "alpha2", "beta2"]);
    assert_eq!(v["se"].as_array().unwrap().len(), 9);
    let th = v["theta_hat"].as_array().unwrap();
    let pers = th[4].as_f64().unwrap() + th[5].as_f64().unwrap();
    assert!((v["persistence_pos"].as_f64().unwrap() - pers).abs() < 1e-15);
    assert_eq!(v["covariance"]["sigma"].as_array().unwrap().len(), 9);
}

#[test]
fn table_values_give_reported_persistence() {
    let t = mdingarch::model::Theta::order11(0.035, 0.010, 0.930, 0.079, 0.143, 0.813, 0.282, 0.112, 0.824).unwrap();
    assert!((t.psi1.alpha_sum() + t.psi1.beta_sum() - 0.956).abs() < 1e-12);
    assert!((t.psi2.alpha_sum() + t.psi2.beta_sum() - 0.936).abs() < 1e-12);
}

#[test]
fn gof_pit_and_sign_reports() {
    let input = simulated("gof.csv", "sec6-pois", "800");
    let g = json(&run(&["gof", "--input", &input, "--bootstrap", "50", "--seed", "1"]));
    assert_eq!(g["rho_hat"].as_array().unwrap().len(), 10);
    for key in ["p1", "p2", "p1_asymptotic"] {
        assert!((0.0..=1.0).contains(&g[key].as_f64().unwrap()), "{key}");
    }
    let p = json(&run(&["pit", "--input", &input, "--bins", "10"]));
    let total: f64 = p["table"].as_array().unwrap().iter().map(|r| r["height"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let s = json(&run(&["eval-sign", "--input", &input, "--m", "500", "--refit-cadence", "10"]));
    let r = &s["reports"][0];
    assert_eq!(r["mae2"].as_f64(), Some(0.5));
    assert_eq!(s["approximate"], true);
}

#[test]
fn stationarity_of_preset() {
    let v = json(&run(&["stationarity", "--preset", "sec6-pois", "--sign", "iid", "--pi", "0.5"]));
    assert!((v["rho"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((v["e_abs_y"].as_f64().unwrap() - 3.75).abs() < 1e-12);
    assert!((v["e_y"].as_f64().unwrap() + 5.0 / 7.0).abs() < 1e-12);
    assert_eq!(v["sufficient_spectral"], true);
    assert_eq!(v["status"], "stationary");
    let b = json(&run(&["stationarity", "--preset", "sec6-pois"]));
    assert!((b["pi1_plus"].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let bad = scratch("bad.csv");
    std::fs::write(&bad, "y\n1\n-2\nx3\n").unwrap();
    let out = run(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let pos = scratch("pos.csv");
    std::fs::write(&pos, "1\n".repeat(300)).unwrap();
    assert_eq!(run(&["fit", "--input", pos.to_str().unwrap()]).status.code(), Some(3));

    let missing = run(&["stationarity", "--preset", "sec6-pois", "--sign", "iid"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn nonstationary_parameters() {
    let write = |name: &str, body: &str| {
        let p = scratch(name);
        std::fs::write(&p, format!("{{\"p\": 1, \"q\": 1, {body}}}")).unwrap();
        p.to_string_lossy().into_owned()
    };
    // sufficient condition fails, necessary conditions hold: warn and simulate
    let unsure = write("unsure.json", r#""theta": [0.2, 0.2, 0.2, 1.0, 0.8, 0.3, 2.0, 0.3, 0.3]"#);
    let out = run(&["simulate", "--params", &unsure, "--n", "100"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    // a necessary condition fails: refuse unless forced
    let bad = write(
        "bad.json",
        r#""theta": [0.2, 0.2, 0.2, 1.0, 0.9, 0.5, 2.0, 0.9, 0.5], "sign": {"kind": "iid_bernoulli", "pi": 0.5}"#,
    );
    let args = ["simulate", "--params", &bad, "--n", "20", "--burn-in", "0", "--allow-nonstationary"];
    assert_eq!(run(&args[..5]).status.code(), Some(2));
    assert!(run(&args).status.success());
}

#[test]
fn reproduce_single_criterion() {
    let out = run(&["reproduce", "--only", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("[PASS]  1"));
}
