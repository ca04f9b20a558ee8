//! End-to-end runs of the `sgpuq` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sgpuq::data::Dataset;
use sgpuq::StressStrainCurve;

fn sgpuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgpuq"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_writes_curve_profile_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    assert_ok(&sgpuq(&["simulate", "--out-dir", s(&out)]));
    let curve = StressStrainCurve::load_csv(&out.join("curve.csv")).unwrap();
    assert_eq!(curve.len(), 161);
    assert!((curve.max_strain() - 0.008).abs() < 1e-12);
    let profile = read(&out.join("profile.csv"));
    assert!(profile.starts_with("y_over_l,eps_p"));
    assert_eq!(profile.lines().count(), 32);
    // the sidecar is itself a valid configuration
    let sidecar = out.join("simulate.config.toml");
    assert_ok(&sgpuq(&["simulate", s(&sidecar), "--out-dir", s(&tmp.path().join("again"))]));
    assert_eq!(read(&out.join("curve.csv")), read(&tmp.path().join("again/curve.csv")));
}

#[test]
fn elastic_limit_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[simulate.params]\nl_dis = 20.0\nl_en = 75.0\nyield_strength = 1000.0\nh_iso = 0.062\n\
         r_iso = 298.42\nelastic_modulus = 128.44\nrate_power = 0.0\nrate_coeff = 1.0\npoisson = 0.3\n",
    );
    let out = tmp.path().join("out");
    assert_ok(&sgpuq(&["simulate", s(&cfg), "--out-dir", s(&out)]));
    let curve = StressStrainCurve::load_csv(&out.join("curve.csv")).unwrap();
    for (e, stress) in curve.points().skip(1) {
        assert!((stress - 128.44 * e).abs() < 1e-3 * 128.44 * e);
    }
}

#[test]
fn configuration_and_io_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(tmp.path(), "seeed = 1\n");
    let out = sgpuq(&["simulate", s(&unknown), "--out-dir", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    let bad = write_config(tmp.path(), "[simulate]\nsize = -5.0\n");
    assert_eq!(sgpuq(&["simulate", s(&bad)]).status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(sgpuq(&["simulate", s(&missing)]).status.code(), Some(4));

    let out = sgpuq(&[
        "predict",
        "--posterior",
        s(&tmp.path().join("absent.csv")),
        "--out-dir",
        s(&tmp.path().join("p")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    assert_eq!(sgpuq(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn solver_failure_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model.solver]\nmax_iter = 0\nmax_substep_depth = 0\n");
    let out = sgpuq(&["simulate", s(&cfg), "--out-dir", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

const SMALL_DATA: &str = "[data]\nsizes = [200.0, 300.0]\nreplicates = 2\n";

#[test]
fn gen_data_layout_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_DATA);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&sgpuq(&["gen-data", s(&cfg), "--seed", "3", "--out-dir", s(&a)]));
    assert_ok(&sgpuq(&["gen-data", s(&cfg), "--seed", "3", "--out-dir", s(&b)]));
    for name in ["L200_r1.csv", "L200_r2.csv", "L300_r1.csv", "L300_r2.csv"] {
        assert_eq!(read(&a.join("data").join(name)), read(&b.join("data").join(name)));
    }
    let data = Dataset::ingest(&a.join("data")).unwrap();
    assert_eq!(data.entries.len(), 4);
    assert_eq!(data.sizes(), vec![200.0, 300.0]);

    let zero = write_config(
        tmp.path(),
        &format!("{SMALL_DATA}[data.noise]\nrelative_std = 0.0\n"),
    );
    let z = tmp.path().join("z");
    assert_ok(&sgpuq(&["gen-data", s(&zero), "--out-dir", s(&z)]));
    assert_eq!(read(&z.join("data/L200_r1.csv")), read(&z.join("data/L200_r2.csv")));
}

fn index_rows(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn additive_sensitivity_oracle_is_reproducible_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let base = ["sensitivity", "--test-model", "additive", "--n", "4000", "--seed", "11"];
    let mut args_a = base.to_vec();
    args_a.extend(["--jobs", "1", "--out-dir", s(&a)]);
    let mut args_b = base.to_vec();
    args_b.extend(["--jobs", "2", "--out-dir", s(&b)]);
    assert_ok(&sgpuq(&args_a));
    assert_ok(&sgpuq(&args_b));
    let ia = read(&a.join("indices.csv"));
    assert_eq!(ia, read(&b.join("indices.csv")));
    let rows = index_rows(&ia);
    let exact = [1.0 / 14.0, 4.0 / 14.0, 9.0 / 14.0];
    assert_eq!(rows.len(), 3);
    for ((name, v), e) in rows.iter().zip(exact) {
        assert!((v - e).abs() < 0.03, "{name}: {v} vs {e}");
    }
    assert!(a.join("scatter_L0.csv").is_file());
}

#[test]
fn gaussian_target_recovers_analytic_moments_and_resume_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[inference.chain]\nn_chains = 4\nchain_length = 5000\n",
    );
    let out = tmp.path().join("cal");
    assert_ok(&sgpuq(&["calibrate", s(&cfg), "--gaussian-target", "--seed", "2", "--out-dir", s(&out)]));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    let analytic = &summary["gaussian"];
    for k in 0..6 {
        let m = summary["posterior"]["mean"][k].as_f64().unwrap();
        let sd = summary["posterior"]["std"][k].as_f64().unwrap();
        let m0 = analytic["mean"][k].as_f64().unwrap();
        let sd0 = analytic["std"][k].as_f64().unwrap();
        assert!((m - m0).abs() < 0.15 * sd0, "mean {k}: {m} vs {m0}");
        assert!((sd / sd0 - 1.0).abs() < 0.15, "std {k}: {sd} vs {sd0}");
    }
    let again = tmp.path().join("resumed");
    assert_ok(&sgpuq(&[
        "calibrate",
        s(&cfg),
        "--resume-from",
        s(&out.join("posterior.csv")),
        "--out-dir",
        s(&again),
    ]));
    assert_eq!(read(&out.join("summary.json")), read(&again.join("summary.json")));
}

#[test]
fn calibrate_and_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[data]\nsizes = [200.0, 300.0, 500.0]\nreplicates = 2\n\
         [inference]\ncase = { label = \"small\", training = [300.0, 500.0], testing = [200.0] }\n\
         [inference.chain]\nn_chains = 2\nchain_length = 100\n\
         [predict]\nn_draws = 5\n",
    );
    let out = tmp.path().join("run");
    assert_ok(&sgpuq(&["calibrate", s(&cfg), "--out-dir", s(&out)]));
    let posterior = read(&out.join("posterior.csv"));
    assert!(posterior.starts_with("chain,l_dis,l_en,yield_strength,h_iso,r_iso,elastic_modulus,log_post"));
    assert_eq!(posterior.lines().count(), 1 + 2 * 90);
    assert!(out.join("posterior.meta.json").is_file());

    let pred = sgpuq(&["predict", s(&cfg), "--out-dir", s(&out)]);
    assert_ok(&pred);
    let report = read(&out.join("case_report.csv"));
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "size,set,E,spread,data_mean,model_mean,n_data,n_model");
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("200,testing,"));
    for size in [200, 300, 500] {
        assert!(out.join(format!("band_L{size}.csv")).is_file());
    }
    assert!(String::from_utf8_lossy(&pred.stdout).contains("held-out L = 200 nm: cdf_error"));
}

#[test]
fn collapsed_posterior_gives_a_zero_width_band() {
    let tmp = tempfile::tempdir().unwrap();
    let base = format!(
        "{SMALL_DATA}[inference]\ncase = {{ label = \"c\", training = [300.0], testing = [200.0] }}\n"
    );
    let out = tmp.path().join("run");
    let cal = write_config(tmp.path(), &format!("{base}[inference.chain]\nn_chains = 1\nchain_length = 100\n"));
    assert_ok(&sgpuq(&["calibrate", s(&cal), "--gaussian-target", "--out-dir", s(&out)]));
    // every row at the same point
    let mut rows = String::from("chain,l_dis,l_en,yield_strength,h_iso,r_iso,elastic_modulus,log_post\n");
    for _ in 0..10 {
        rows.push_str("0,150,200,0.047,0.062,298.42,128.44,0\n");
    }
    std::fs::write(out.join("posterior.csv"), rows).unwrap();
    let cfg = write_config(tmp.path(), &format!("{base}[predict]\nn_draws = 4\n"));
    assert_ok(&sgpuq(&["predict", s(&cfg), "--out-dir", s(&out)]));
    let band = read(&out.join("band_L200.csv"));
    for line in band.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], f[5]);
    }
}

#[test]
fn shipped_example_configuration_is_valid() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    assert_ok(&sgpuq(&["simulate", s(&path), "--out-dir", s(&out)]));
    let sidecar = read(&out.join("simulate.config.toml"));
    assert!(sidecar.contains("seed = 42"));
}
