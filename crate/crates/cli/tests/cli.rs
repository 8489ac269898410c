use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_toda-forge"));
    c.env_remove("TODA_FORGE_JOBS");
    c
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn schema_check(schema: &str, doc: &Value) {
    let s: Value = serde_json::from_str(&std::fs::read_to_string(repo_file(&format!("schemas/{schema}"))).unwrap()).unwrap();
    let v = jsonschema::validator_for(&s).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

struct Job {
    dir: tempfile::TempDir,
}

impl Job {
    fn new() -> Self {
        Job { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cfg: &Value, extra: &[&str]) -> (i32, String) {
        let p = self.path("job.json");
        std::fs::write(&p, cfg.to_string()).unwrap();
        let out = bin().arg("--config").arg(&p).args(extra).output().unwrap();
        (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }
}

fn grid(n: usize) -> Value {
    json!({"x_min": 0, "x_max": 1, "nx": n, "y_min": 0, "y_max": 1, "ny": n})
}

#[test]
fn liouville_solve() {
    let job = Job::new();
    let out = job.path("liouville.csv");
    let cfg = json!({"command": "solve", "family": "A", "rank": 1, "phi": ["1"], "psi": ["1"], "grid": grid(3),
                     "out": out});
    let (code, err) = job.run(&cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,y,tau_1,u_1,excluded");
    assert_eq!(lines.len(), 1 + 9);
    let last: Vec<f64> = lines[9].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!((last[0], last[1]), (1.0, 1.0));
    assert!((last[3] + 2f64.ln()).abs() <= 1e-10);
    assert_eq!(last[4], 0.0);
    let side = job.json("liouville.json");
    schema_check("solve_sidecar.schema.json", &side);
    assert_eq!(side["rows"], 9);
    assert_eq!(side["branch_sign"], Value::Null);
    assert_eq!(side["config"]["phi"], json!(["1"]));
}

#[test]
fn b2_sidecar_has_branch_sign() {
    let job = Job::new();
    let cfg = json!({"command": "solve", "family": "B", "rank": 2, "phi": ["1 + 0.3*sin(2*t)", "exp(0.2*t)"],
                     "psi": ["1.2 - 0.1*t", "0.9 + 0.2*cos(t)"], "grid": grid(4)});
    let out = job.path("b2.csv");
    let (code, err) = job.run(&cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let side = job.json("b2.json");
    schema_check("solve_sidecar.schema.json", &side);
    let b = side["branch_sign"].as_f64().unwrap();
    assert!(b == 1.0 || b == -1.0);
    let shift = side["normalization_shift"].as_array().unwrap();
    assert!((shift[0].as_f64().unwrap() - 2f64.ln()).abs() < 1e-14);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 17);
}

#[test]
fn verify_passes_on_constant_a2() {
    let job = Job::new();
    let cfg = json!({"command": "verify", "family": "A", "rank": 2, "phi": ["1", "1"], "psi": ["1", "1"],
                     "grid": grid(3), "tol": 1e-8, "out": job.path("report.json")});
    let (code, err) = job.run(&cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let r = job.json("report.json");
    schema_check("verify_report.schema.json", &r);
    assert_eq!(r["pass"], true);
    assert!(r["max_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["points"], 9);
}

#[test]
fn verify_flags_a_perturbed_side() {
    let job = Job::new();
    let cfg = json!({"command": "verify", "family": "C", "rank": 2, "phi": ["1", "1.2 + 0.1*t"],
                     "psi": ["0.9", "1"], "grid": grid(3), "tol": 1e-8, "out": job.path("report.json"),
                     "perturb": [{"side": "y", "component": 1, "eps": 1e-2, "expr": "sin(3*t) + 2"}]});
    let (code, _) = job.run(&cfg, &[]);
    assert_eq!(code, 1);
    let r = job.json("report.json");
    schema_check("verify_report.schema.json", &r);
    assert_eq!(r["pass"], false);
    assert!(r["max_residual"].as_f64().unwrap() >= 1e-3);
}

#[test]
fn tol_override_changes_verdict() {
    let job = Job::new();
    let cfg = json!({"command": "verify", "family": "B", "rank": 2, "phi": ["1 + 0.3*sin(2*t)", "exp(0.2*t)"],
                     "psi": ["1.2 - 0.1*t", "0.9 + 0.2*cos(t)"], "grid": grid(3), "out": job.path("r.json")});
    assert_eq!(job.run(&cfg, &["--tol", "1e-6"]).0, 0);
    assert_eq!(job.run(&cfg, &["--tol", "1e-30"]).0, 1);
    let r = job.json("r.json");
    assert_eq!(r["tol"], 1e-30);
    assert!(r["standard_form_equations"].as_array().unwrap().iter().all(|e| e["max_residual"].as_f64().unwrap() < 1e-6));
}

#[test]
fn config_errors_exit_2_with_pointer() {
    let job = Job::new();
    let bad_nx = json!({"command": "solve", "family": "A", "rank": 1, "phi": ["1"], "psi": ["1"],
                        "grid": {"x_min": 0, "x_max": 1, "nx": "3", "y_min": 0, "y_max": 1, "ny": 3}});
    let (code, err) = job.run(&bad_nx, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("/grid/nx"), "{err}");
    let short_psi = json!({"command": "verify", "family": "A", "rank": 2, "phi": ["1", "1"], "psi": ["1"], "grid": grid(2)});
    let (code, err) = job.run(&short_psi, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("/psi"), "{err}");
    let bad_expr = json!({"command": "verify", "family": "A", "rank": 1, "phi": ["1 + * 2"], "psi": ["1"], "grid": grid(2)});
    let (code, err) = job.run(&bad_expr, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("/phi/0") && err.contains("byte 4"), "{err}");
    let out = bin().args(["--config", "/nonexistent/job.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonpositive_generating_function_is_rejected() {
    let job = Job::new();
    let cfg = json!({"command": "verify", "family": "A", "rank": 1, "phi": ["t - 0.5"], "psi": ["1"], "grid": grid(2)});
    let (code, err) = job.run(&cfg, &[]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
}

fn identities_cfg(out: &Path) -> Value {
    json!({"command": "identities", "seed": 42, "tol": 1e-8, "out": out,
           "identities": {"cofactor_matrices": 10, "cofactor_max_size": 4,
                          "groups": [{"group": "Sp", "n": 3, "elements": 20}, {"group": "SoOdd", "n": 2, "elements": 6}],
                          "alternating_max_n": 3, "alternating_draws": 10,
                          "shuffle_pairs": 5, "shuffle_max_len": 3, "pairing_max_n": 3}})
}

#[test]
fn identities_deterministic() {
    let job = Job::new();
    let out = job.path("ids.json");
    let (code, err) = job.run(&identities_cfg(&out), &[]);
    assert_eq!(code, 0, "{err}");
    let first = std::fs::read(&out).unwrap();
    let r: Value = serde_json::from_slice(&first).unwrap();
    schema_check("identities_report.schema.json", &r);
    let get = |name: &str| {
        r["identities"].as_array().unwrap().iter().find(|e| e["name"] == name).unwrap()["max_residual"].as_f64().unwrap()
    };
    assert!(get("group_minor_duality Sp(6)") <= 1e-8);
    assert!(get("alternating_sum n=3") <= 1e-8);
    assert_eq!(get("line_structural_zeros"), 0.0);
    let (code, _) = job.run(&identities_cfg(&out), &["--jobs", "3"]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&out).unwrap(), first);
    let (_, _) = job.run(&identities_cfg(&out), &["--seed", "43"]);
    assert_ne!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn jobs_do_not_change_output() {
    let job = Job::new();
    let cfg = json!({"command": "solve", "family": "D", "rank": 3, "phi": ["1", "1.1 + 0.1*t", "0.9"],
                     "psi": ["1", "1.2", "exp(0.1*t)"], "grid": grid(4)});
    let a = job.path("a.csv");
    let b = job.path("b.csv");
    assert_eq!(job.run(&cfg, &["--out", a.to_str().unwrap(), "--jobs", "1"]).0, 0);
    let p = job.path("job.json");
    let out = bin().arg("--config").arg(&p).args(["--out", b.to_str().unwrap()]).env("TODA_FORGE_JOBS", "4").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn shuffle_command() {
    let job = Job::new();
    let cfg = json!({"command": "shuffle", "phi": ["1 + 0.3*sin(2*t)", "exp(0.2*t)", "1.2 - 0.1*t"], "seed": 7,
                     "tol": 1e-8, "out": job.path("s.json"),
                     "shuffle": {"pairs": [[[1, 2], [3]]], "random_pairs": 4, "points": [0.5, 1.0]}});
    let (code, err) = job.run(&cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let r = job.json("s.json");
    schema_check("shuffle_report.schema.json", &r);
    assert_eq!(r["cases"].as_array().unwrap().len(), 10);
    let bad = json!({"command": "shuffle", "phi": ["1"], "shuffle": {"pairs": [[[1], [2]]], "points": [1.0]}});
    let (code, err) = job.run(&bad, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("/shuffle/pairs/0/1"), "{err}");
}

#[test]
fn shipped_configs_match_schema() {
    for entry in std::fs::read_dir(repo_file("configs")).unwrap() {
        let p = entry.unwrap().path();
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        schema_check("config.schema.json", &doc);
        toda_forge::config::parse_config(&doc.to_string()).unwrap();
    }
}
