use std::process::{Command, Output};

use qorth::families::FamilySpec;
use qorth::report::render;
use qorth::{PrecisionContext, QParam};

fn qorth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qorth"))
        .args(args)
        .env_remove("QORTH_BITS")
        .env_remove("QORTH_TOL_EXP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// True when the decimal `text` is within `1e-70` of `want`.
fn close(text: &str, want: &str) -> bool {
    let ctx = PrecisionContext::default();
    let diff = ctx.parse(text).unwrap() - ctx.parse(want).unwrap();
    diff.abs() < 1e-70
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn eval_h_low_degrees() {
    let o = qorth(&["eval", "--family", "h", "--n", "0", "--phi", "0.7"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1\n");
    let o = qorth(&["eval", "--family", "h", "--n", "2", "--phi", "0"]);
    assert_eq!(stdout(&o), "-1\n");
    let o = qorth(&["eval", "--family", "h", "--n", "2", "--x", "0"]);
    assert_eq!(stdout(&o), "-1\n");
}

#[test]
fn eval_d_matches_library() {
    let o = qorth(&["eval", "--family", "D", "--s-mode", "qinv", "--n", "3", "--mu", "2.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ctx = PrecisionContext::default();
    let q = QParam::parse("0.5", &ctx).unwrap();
    let spec = FamilySpec::dual_q_inv(q, &ctx);
    let want = spec.eval(3, &ctx.parse("2.25").unwrap(), &ctx).unwrap();
    assert_eq!(stdout(&o).trim(), render(&want));
}

#[test]
fn eval_d_on_lattice_agrees_with_mu() {
    // mu(2; s) at q = 1/2, s = 1: 4 + 1/8.
    let a = qorth(&["eval", "--family", "D", "--s", "1", "--n", "4", "--x", "2"]);
    let b = qorth(&["eval", "--family", "D", "--s", "1", "--n", "4", "--mu", "4.125"]);
    assert!(a.status.success() && b.status.success());
    let (a, b) = (stdout(&a), stdout(&b));
    let (x, y): (f64, f64) = (a.trim().parse().unwrap(), b.trim().parse().unwrap());
    assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn eval_d_rejects_s_outside_base_range() {
    let o = qorth(&["eval", "--family", "D", "--s", "5", "--n", "1", "--mu", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("s must satisfy 0<s<q^-2"), "{}", stderr(&o));
}

#[test]
fn gram_examples_pass() {
    for args in [
        vec!["gram"],
        vec!["gram", "--measure", "hermite-extremal", "--a", "0.8", "--q", "0.3"],
        vec!["gram", "--measure", "dual-base", "--s", "1.5", "--parity", "odd"],
        vec!["gram", "--measure", "dual-qinv-extremal", "--a", "0.7"],
        vec!["gram", "--measure", "dual-q-extremal", "--a", "0.6"],
    ] {
        let o = qorth(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).ends_with("PASS\n"));
    }
}

#[test]
fn gram_zero_degree_is_total_mass() {
    let o = qorth(&["gram", "--N", "0", "--output", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let gram = v["gram"].as_array().unwrap();
    assert_eq!(gram.len(), 1);
    assert!(close(gram[0][0].as_str().unwrap(), "1"), "{gram:?}");
    assert_eq!(v["N"], 0);
}

#[test]
fn gram_csv_shape() {
    let o = qorth(&["gram", "--N", "3", "--output", "csv"]);
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "n,n_prime,gram,expected");
    assert_eq!(lines.len(), 1 + 16);
    let first: Vec<_> = lines[1].split(',').collect();
    assert_eq!(&first[..2], ["0", "0"]);
    assert!(close(first[2], "1") && first[3] == "1", "{}", lines[1]);
}

#[test]
fn gram_rejects_incompatible_family() {
    let o = qorth(&["gram", "--measure", "dual-qinv-extremal", "--a", "0.7", "--family", "h"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("incompatible"));
}

#[test]
fn gram_rejects_a_below_q() {
    let o = qorth(&["gram", "--a", "0.4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn verify_fails_only_on_product_chain() {
    let o = qorth(&["verify", "--q", "0.5", "--output", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let failing: Vec<_> = text.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("false")).collect();
    assert_eq!(failing.len(), 1, "{text}");
    assert!(failing[0].starts_with("theta-product-chain,"));
    assert_eq!(text.lines().count(), 1 + 9);
}

#[test]
fn verify_list() {
    let o = qorth(&["verify", "--list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 9);
    assert!(stdout(&o).starts_with("even-hermite-as-dual"));
}

#[test]
fn sweep_gives_distinct_hashes() {
    let o = qorth(&["sweep", "--a-from", "q", "--a-to", "0.95", "--steps", "10", "--output", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut hashes: Vec<_> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(hashes.len(), 10);
    hashes.sort();
    hashes.dedup();
    assert_eq!(hashes.len(), 10);
}

#[test]
fn sweep_rejects_bad_range() {
    let o = qorth(&["sweep", "--a-from", "0.9", "--a-to", "0.6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q<=a_from<=a_to<1"));
}

#[test]
fn output_is_deterministic() {
    let args = ["gram", "--measure", "dual-base", "--s", "0.7", "--output", "json"];
    assert_eq!(stdout(&qorth(&args)), stdout(&qorth(&args)));
    let args = ["verify", "--output", "json"];
    assert_eq!(stdout(&qorth(&args)), stdout(&qorth(&args)));
}

#[test]
fn bits_from_environment_and_flag() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_qorth"));
        c.args(["gram", "--N", "1", "--output", "json"]).args(extra).env_remove("QORTH_BITS");
        if let Some(b) = env {
            c.env("QORTH_BITS", b);
        }
        let o = c.output().unwrap();
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["bits"].as_u64().unwrap()
    };
    assert_eq!(run(None, &[]), 256);
    assert_eq!(run(Some("320"), &[]), 320);
    assert_eq!(run(Some("320"), &["--bits", "384"]), 384);
}

#[test]
fn config_file_sits_below_flags() {
    let dir = std::env::temp_dir().join(format!("qorth-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, "q = \"0.3\"\nN = 2\nmeasure = \"dual-base\"\ns = \"2\"\noutput = \"json\"\n").unwrap();
    let p = path.to_str().unwrap();
    let o = qorth(&["gram", "--config", p]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(close(v["q"].as_str().unwrap(), "0.3"));
    assert_eq!(v["N"], 2);
    assert_eq!(v["measure"], "dual-base");
    let o = qorth(&["gram", "--config", p, "--N", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["N"], 3);

    std::fs::write(&path, "bogus = 1\n").unwrap();
    assert_eq!(qorth(&["gram", "--config", p]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_file_receives_output() {
    // h_1(x) = 2x.
    let path = std::env::temp_dir().join(format!("qorth-out-{}.txt", std::process::id()));
    let o = qorth(&["eval", "--family", "h", "--n", "1", "--x", "0.5", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "1\n");
    std::fs::remove_file(&path).ok();
}

#[test]
fn verify_near_one_reports_truncation() {
    let o = qorth(&["verify", "--q", "0.999", "--bits", "128"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("truncation failure"), "{}", stdout(&o));
}

#[test]
fn single_step_sweep_matches_gram() {
    let o = qorth(&["sweep", "--steps", "1", "--N", "4", "--output", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
    let g = qorth(&["gram", "--N", "4", "--output", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&g)).unwrap();
    assert!(close(row[1], v["off_diag_max"].as_str().unwrap()));
    assert!(close(row[2], v["diag_rel_err_max"].as_str().unwrap()));
}
