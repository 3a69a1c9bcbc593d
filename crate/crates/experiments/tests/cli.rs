use std::path::Path;
use std::process::Command;

use irs_wpcn_experiments::compare::compare_files;
use irs_wpcn_experiments::spec::ExperimentSpec;
use irs_wpcn_experiments::sweep::{read_rows, run_sweep, ResultRow};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_irs-wpcn"));
    c.env("IRS_WPCN_THREADS", "1");
    c
}

fn tiny_spec(dir: &Path, output: &str) -> ExperimentSpec {
    ExperimentSpec::from_toml_str(&format!(
        r#"
        axis = "P_A_dbm"
        values = [34.0, 40.0]
        schemes = ["static", "user_adaptive", "no_irs", "random"]
        seeds = [3, 4]
        output = "{}"
        "#,
        dir.join(output).display()
    ))
    .unwrap()
}

// Everything except wall-clock time must be bit-for-bit reproducible.
fn strip_runtime(rows: &[ResultRow]) -> Vec<ResultRow> {
    rows.iter().cloned().map(|r| ResultRow { runtime_ms: 0.0, ..r }).collect()
}

#[test]
fn sweep_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, summary) = run_sweep(&tiny_spec(dir.path(), "a.csv")).unwrap();
    let (b, _) = run_sweep(&tiny_spec(dir.path(), "b.csv")).unwrap();
    assert_eq!(a.len(), 2 * 2 * 4);
    assert_eq!(strip_runtime(&a), strip_runtime(&b));
    assert_eq!(summary.len(), 2 * 4);

    let on_disk = read_rows(&dir.path().join("a.csv")).unwrap();
    assert_eq!(on_disk.len(), a.len());
    assert!(dir.path().join("a_summary.csv").exists());
    for r in &a {
        assert!(["exact", "converged"].contains(&r.status.as_str()), "{r:?}");
        let p_a = 10f64.powf((r.p_a_dbm - 30.0) / 10.0);
        assert!((r.hap_energy_j - p_a * r.tau0_s).abs() <= 1e-9 * r.hap_energy_j.max(1e-30));
        let per_device: f64 = r.device_throughputs.split(';').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((per_device - r.throughput_bps_hz).abs() < 1e-6 * r.throughput_bps_hz.max(1.0));
    }

    let cmp = compare_files(&[dir.path().join("a.csv"), dir.path().join("b.csv")]).unwrap();
    assert_eq!(cmp.len(), summary.len());
    assert!(cmp.iter().all(|c| c.spread() == 0.0));
}

#[test]
fn gen_config_round_trips_through_run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("system.toml");
    let st = bin()
        .args(["gen-config", "--kind", "system", "-o"])
        .arg(&sys)
        .status()
        .unwrap();
    assert!(st.success());

    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        r#"
        base_config = "system.toml"
        axis = "N"
        values = [4.0]
        schemes = ["static", "no_irs"]
        seeds = [1]
        output = "out.csv"
        "#,
    )
    .unwrap();
    let st = bin().arg("run").arg(&spec).status().unwrap();
    assert!(st.success());
    let rows = read_rows(&dir.path().join("out.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.n == 4));

    let out = bin().arg("compare").arg(dir.path().join("out.csv")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("static") && text.contains("no_irs"));

    for kind in ["spec", "props"] {
        let out = bin().args(["gen-config", "--kind", kind]).output().unwrap();
        assert!(out.status.success());
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn bad_input_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "axis = \"P_A_dbm\"\nvalues = []\nschemes = []\nseeds = []\noutput = \"x.csv\"\n").unwrap();
    let st = bin().arg("run").arg(&spec).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().arg("run").arg(dir.path().join("missing.toml")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}
