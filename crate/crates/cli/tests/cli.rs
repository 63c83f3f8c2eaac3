use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rte-inverse");

const MEDIUM: &str = r#"
[medium]
a = [{ type = "constant", value = 0.6 }, { type = "gaussian", center = [0.2, -0.1], width = 0.3162, amplitude = 0.5 }]
k = [[{ type = "constant", value = 0.2 }], [{ type = "constant", value = 0.1 }], [{ type = "constant", value = 0.05 }]]
"#;

const SOURCE: &str = r#"
[source]
f0 = [{ type = "gaussian", center = [0.1, 0.1], width = 0.245 }]
F.perp_gradient = [{ type = "gaussian", center = [-0.15, 0.05], width = 0.2236, amplitude = 0.3 }]
"#;

fn grid(nr: usize) -> String {
    format!("[grid]\nnr = {nr}\nnbeta = {}\nntheta = 32\n", 4 * nr)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_values(csv: &str) -> Vec<f64> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("beta"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

fn report_value(report: &str, key: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing"));
    line.split(" = ").nth(1).unwrap().parse().unwrap()
}

#[test]
fn zero_source_gives_zero_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.toml",
        &format!("{}{MEDIUM}[source]\n", grid(8)),
    );
    let out = tmp.path().join("out");
    let o = run(&["forward", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = std::fs::read_to_string(out.join("g.csv")).unwrap();
    let vals = data_values(&g);
    assert_eq!(vals.len(), 32 * 32);
    assert!(vals.iter().all(|&v| v == 0.0));
}

#[test]
fn forward_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}", grid(8)),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert!(run(&["forward", "--config", p(&cfg), "--out", p(out)])
            .status
            .success());
    }
    let ga = std::fs::read(a.join("g.csv")).unwrap();
    assert_eq!(ga, std::fs::read(b.join("g.csv")).unwrap());
    assert!(String::from_utf8(ga)
        .unwrap()
        .starts_with("# rte-inverse 0.1.0 config_sha256="));
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SOURCE.replace("width = 0.245", "width = -0.245");
    let cfg = write_config(tmp.path(), "bad.toml", &format!("{}{MEDIUM}{bad}", grid(8)));
    let o = run(&[
        "forward",
        "--config",
        p(&cfg),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("source.f0[0]") && err.contains("width"),
        "{err}"
    );

    let cfg = write_config(
        tmp.path(),
        "unknown.toml",
        &format!("{}{MEDIUM}{SOURCE}[solver]\ntolerance = 1\n", grid(8)),
    );
    let o = run(&["forward", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}", grid(8)),
    );
    let out = tmp.path().join("o");
    assert!(run(&["forward", "--config", p(&cfg), "--out", p(&out)])
        .status
        .success());
    let g = out.join("g.csv");
    let o = run(&[
        "reconstruct",
        "--config",
        p(&cfg),
        "--variant",
        "twodata",
        "--data",
        p(&g),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data2"));
    let o = run(&[
        "reconstruct",
        "--config",
        p(&cfg),
        "--variant",
        "bogus",
        "--data",
        p(&g),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["convergence", "--config", p(&cfg), "--levels", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inconsistent_data_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}", grid(16)),
    );
    let mut csv = String::from("beta,theta,value\n");
    for j in 0..64 {
        for m in 0..32 {
            let v = ((j * 7919 + m * 104729) % 1000) as f64 / 1000.0 - 0.5;
            csv.push_str(&format!(
                "{},{},{v}\n",
                2.0 * std::f64::consts::PI * j as f64 / 64.0,
                2.0 * std::f64::consts::PI * m as f64 / 32.0
            ));
        }
    }
    let g = write_config(tmp.path(), "g.csv", &csv);
    let o = run(&[
        "reconstruct",
        "--config",
        p(&cfg),
        "--variant",
        "divfree",
        "--data",
        p(&g),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn divfree_round_trip_with_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{}{MEDIUM}{SOURCE}[reconstruct]\nvariant = \"divfree\"\n",
        grid(32)
    );
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("o");
    assert!(run(&["forward", "--config", p(&cfg), "--out", p(&out)])
        .status
        .success());
    let g = out.join("g.csv");
    let rec = tmp.path().join("r");
    let o = run(&[
        "reconstruct",
        "--config",
        p(&cfg),
        "--data",
        p(&g),
        "--out",
        p(&rec),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(rec.join("report.txt")).unwrap();
    assert!(report_value(&report, "rel_l2.f0") < 0.2, "{report}");
    assert!(report_value(&report, "rel_l2.F") < 0.2, "{report}");
    assert!(report.contains("noisy_data = false"));
    for f in ["f0.csv", "F_x.csv", "F_y.csv", "modes.csv", "timings.txt"] {
        assert!(rec.join(f).exists(), "{f}");
    }

    let noisy = write_config(
        tmp.path(),
        "n.toml",
        &format!("{body}[solver]\nnoise_std = 0.001\n"),
    );
    let rec = tmp.path().join("rn");
    let o = run(&[
        "reconstruct",
        "--config",
        p(&noisy),
        "--data",
        p(&g),
        "--out",
        p(&rec),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(rec.join("report.txt")).unwrap();
    assert!(report.contains("noisy_data = true"), "{report}");
}

#[test]
fn twodata_uses_isotropic_data_from_forward() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{}{MEDIUM}{SOURCE}[reconstruct]\nvariant = \"twodata\"\n",
        grid(16)
    );
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("o");
    assert!(run(&["forward", "--config", p(&cfg), "--out", p(&out)])
        .status
        .success());
    assert!(out.join("g0.csv").exists());
    let o = run(&[
        "reconstruct",
        "--config",
        p(&cfg),
        "--data",
        p(&out.join("g.csv")),
        "--data2",
        p(&out.join("g0.csv")),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gauge_identical_sources_agree_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let gauge = "[gauge]\nf0 = [{ type = \"gaussian\", center = [0.1, 0.1], width = 0.245 }]\n";
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}{gauge}", grid(16)),
    );
    let out = tmp.path().join("o");
    let o = run(&["gauge", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("gauge_report.txt")).unwrap();
    assert_eq!(report_value(&report, "sup"), 0.0, "{report}");
}

#[test]
fn gauge_rejects_potential_not_vanishing_on_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let gauge = "[gauge]\nf0 = [{ type = \"constant\", value = 1.0 }]\n";
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}{gauge}", grid(16)),
    );
    let o = run(&[
        "gauge",
        "--config",
        p(&cfg),
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("boundary"));
}

#[test]
fn convergence_errors_decrease() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!("{}{MEDIUM}{SOURCE}", grid(8)),
    );
    let out = tmp.path().join("o");
    let o = run(&[
        "convergence",
        "--config",
        p(&cfg),
        "--levels",
        "2",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    let errors = |study: &str, quantity: &str| -> Vec<f64> {
        csv.lines()
            .filter(|l| l.starts_with(study) && l.contains(&format!(",{quantity},")))
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect()
    };
    let poisson = errors("poisson", "max_error");
    assert_eq!(poisson.len(), 3);
    assert!(poisson.windows(2).all(|w| w[1] < w[0] / 3.0), "{poisson:?}");
    let f0 = errors("roundtrip", "rel_l2.f0");
    assert_eq!(f0.len(), 2, "{csv}");
    assert!(f0[1] < f0[0], "{f0:?}");
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all checks passed"));
}
