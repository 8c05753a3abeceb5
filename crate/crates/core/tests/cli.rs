use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nehari-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn config(name: &str, body: &str) -> String {
    let p = scratch(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const S5: &str = r#"{"grid": {"dim": 1, "counts": [255]},
    "model": {"kind": "section5", "theta": 12, "eta": 1000}}"#;

#[test]
fn version_and_help() {
    let v = run(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
    let h = run(&["--help"]);
    assert_eq!(h.status.code(), Some(0));
    let text = String::from_utf8_lossy(&h.stdout);
    for cmd in ["spectrum", "classify", "fiber", "landscape", "solve", "minimize", "verify-beta", "section5"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn solve_piecewise_configuration() {
    let cfg = config("s5.json", S5);
    let out = scratch("s5-report.json");
    let field = scratch("s5-u.csv");
    let trace = scratch("s5-trace.csv");
    let o = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--field",
        field.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let c_n = report["ground_state"]["c_n"].as_f64().unwrap();
    assert!(c_n > 0.0 && c_n < 111.2, "{c_n}");
    assert_eq!(report["ground_state"]["outcome"]["status"], "converged");
    let u = std::fs::read_to_string(&field).unwrap();
    assert!(u.starts_with("# dim,1"));
    assert_eq!(u.lines().count(), 256);
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("iteration,psi,delta,t,residual,step"));
}

#[test]
fn misspelled_key_names_the_key() {
    let cfg = config("typo.json", &S5.replace("\"theta\"", "\"thetaa\""));
    let o = run(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("thetaa") && err.contains("model"), "{err}");
}

#[test]
fn minimize_rational_has_no_negative_start() {
    let body = r#"{"grid": {"dim": 1, "counts": [63]},
        "model": {"kind": "rational", "alpha": 0, "eta": 20}}"#;
    let o = run(&["minimize", "--config", &config("rat.json", body)]);
    assert_eq!(o.status.code(), Some(4));
    let forced = body.replace("}}", r#"}, "solve": {"override_hypotheses": true}}"#);
    let o = run(&["minimize", "--config", &config("rat-forced.json", &forced)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no negative energy"));
}

#[test]
fn minimize_coercive_model() {
    let body = r#"{"grid": {"dim": 1, "counts": [63]},
        "model": {"kind": "coercive", "alpha": 20, "eta": 5}}"#;
    let out = scratch("coercive.json");
    let o = run(&["minimize", "--config", &config("coercive-cfg.json", body), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(report["minimum"]["energy"].as_f64().unwrap() < 0.0);
}

#[test]
fn solve_refuses_coercive_model() {
    let body = r#"{"grid": {"dim": 1, "counts": [63]},
        "model": {"kind": "coercive", "alpha": 20, "eta": 5}}"#;
    let o = run(&["solve", "--config", &config("coercive-solve.json", body)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn fiber_and_landscape() {
    let cfg = config("s5-fiber.json", S5);
    let csv = scratch("landscape.csv");
    let o = run(&["fiber", "--config", &cfg, "--landscape", "1,100,9", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let t = report["fiber"]["t_u"].as_f64().unwrap();
    assert!((t - 25.83).abs() < 0.01, "{t}");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 10);

    let o = run(&["landscape", "--config", &cfg, "--range", "1,100,9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sign pattern of h' = +0-"));

    let o = run(&["fiber", "--config", &cfg, "--direction", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fiber_outside_admissible_set() {
    let body = r#"{"grid": {"dim": 1, "counts": [63]},
        "model": {"kind": "coercive", "alpha": 20, "eta": 5}}"#;
    let o = run(&["fiber", "--config", &config("coercive-fiber.json", body)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn classify_and_spectrum_reports() {
    let cfg = config("s5-classify.json", S5);
    let o = run(&["classify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["ff_holds"], false);
    assert_eq!(r["resonance"]["class"], "non_resonant");
    assert_eq!(r["hypotheses"]["f1_ok"]["verdict"], "pass");

    let o = run(&["spectrum", "--config", &cfg, "-m", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let l1 = s["spectrum"]["pairs"][0]["value"].as_f64().unwrap();
    assert!((l1 - std::f64::consts::PI.powi(2) / 1000.0).abs() < 1e-4);
    assert_eq!(s["spectrum"]["pairs"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_beta_needs_a_sobolev_constant() {
    let cfg = config("s5-verify.json", &S5.replace("[255]", "[63]"));
    let o = run(&["verify-beta", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["verify-beta", "--config", &cfg, "--sobolev", "discrete"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--sobolev"));
    let o = run(&["verify-beta", "--config", &cfg, "--sobolev", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["certificate"]["extrapolated"], true);
    assert_eq!(r["certificate"]["sobolev"]["provenance"], "user");
}

#[test]
fn section5_regime() {
    let o = run(&["section5", "--eta", "1000", "--theta", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["report"]["regime"]["status"], "attained");
    assert_eq!(r["report"]["cube_lower_bound"]["holds"], true);
    let o = run(&["section5", "--eta", "1000"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("regime not attained"));
}

#[test]
fn thread_cap_does_not_change_reports() {
    let cfg = config("s5-threads.json", &S5.replace("}}", r#"}, "solve": {"restarts": 3, "seed": 9}}"#));
    let go = |threads: &str| {
        bin()
            .args(["solve", "--config", &cfg])
            .env("NEHARI_LAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = go("1");
    let b = go("3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
