use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paraosc_core::Preset;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_paraosc"));
    cmd.env_remove("PARAOSC_OUT_DIR");
    cmd
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn scenario(preset: &str, params: &str, state: &str, t1: f64, dt: &str) -> String {
    format!(
        "outputs = [\"moments\", \"propagator\", \"invariant_residuals\", \"classical\"]\n\
         [hamiltonian]\npreset = \"{preset}\"\nparams = {{ {params} }}\n\
         [state]\n{state}\n\
         [time]\nt1 = {t1}\ndt = {dt}\n"
    )
}

fn text(out: &Output) -> (String, String) {
    (String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn run_writes_csvs_plots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "sho.toml", &scenario("constant_sho", "omega = 2.0", "kind = \"number\"\nn = [0]", 3.0, "1e-3"));
    let out = dir.path().join("out");
    let res = bin().args(["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert!(res.status.success(), "{:?}", text(&res));
    for f in [
        "moments.csv",
        "propagator.csv",
        "invariant_residuals.csv",
        "classical.csv",
        "var_q.svg",
        "var_p.svg",
        "mean_q.svg",
        "mean_p.svg",
        "uncertainty.svg",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let moments = std::fs::read_to_string(out.join("moments.csv")).unwrap();
    let mut lines = moments.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "var_q0").unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3001);
    for row in rows {
        let v: f64 = row.split(',').nth(col).unwrap().parse().unwrap();
        assert!((v - 0.25).abs() < 1e-12, "{v}");
    }
    for csv in ["propagator.csv", "invariant_residuals.csv", "classical.csv"] {
        assert_eq!(std::fs::read_to_string(out.join(csv)).unwrap().lines().count(), 3002, "{csv}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resolved"]["steps"], 3000);
    assert!(manifest["residuals"]["canonical"].as_f64().unwrap() < 1e-8);
    assert_eq!(manifest["content_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 9);
}

#[test]
fn overrides_and_env_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "drv.toml", &scenario("driven_sho", "force = 1.0", "kind = \"number\"\nn = [0]", 10.0, "1e-3"));
    let out = dir.path().join("from-env");
    let res = bin()
        .env("PARAOSC_OUT_DIR", &out)
        .args(["run", sc.to_str().unwrap(), "--dt", "0.01", "--t-end", "2.0"])
        .output()
        .unwrap();
    assert!(res.status.success(), "{:?}", text(&res));
    let rows = std::fs::read_to_string(out.join("moments.csv")).unwrap().lines().count();
    assert_eq!(rows, 202);
}

#[test]
fn missing_step_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = scenario("constant_sho", "", "kind = \"number\"\nn = [0]", 1.0, "1e-3").replace("dt = 1e-3\n", "");
    let sc = write(dir.path(), "bad.toml", &body);
    let res = bin().args(["run", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    let (_, err) = text(&res);
    assert!(err.contains("`dt`") && err.contains("line"), "{err}");

    let res = bin().args(["validate", "/definitely/not/here.toml"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn oversized_step_aborts_run_and_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "sho.toml", &scenario("constant_sho", "", "kind = \"number\"\nn = [0]", 20.0, "\"auto\""));
    let res = bin().args(["validate", sc.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{:?}", text(&res));

    // 100× the default step
    let big = format!("{}", 100.0 * 2.0 * std::f64::consts::PI / 1000.0);
    let res = bin().args(["validate", sc.to_str().unwrap(), "--dt", &big]).output().unwrap();
    assert_eq!(res.status.code(), Some(3));
    let (out, _) = text(&res);
    let line = out.lines().find(|l| l.starts_with("canonical")).unwrap();
    assert!(line.contains("FAIL") && line.contains("reduce the time step"), "{line}");

    let res = bin().args(["run", sc.to_str().unwrap(), "--dt", &big, "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res).1.contains("reduce the time step"));
}

#[test]
fn every_preset_validates_at_the_default_step() {
    let dir = tempfile::tempdir().unwrap();
    for p in Preset::ALL {
        let state = match p.name() {
            "coupled_pair_qq" | "coupled_pair_pp" | "coupled_qp" => "kind = \"number\"\nn = [1, 0]",
            _ => "kind = \"number\"\nn = [1]",
        };
        // two periods of the slowest reference oscillator (ω = 1 for all defaults)
        let sc = write(dir.path(), &format!("{}.toml", p.name()), &scenario(p.name(), "", state, 12.6, "\"auto\""));
        let res = bin().args(["validate", sc.to_str().unwrap()]).output().unwrap();
        assert_eq!(res.status.code(), Some(0), "{}: {:?}", p.name(), text(&res));
    }
}

#[test]
fn sampled_table_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
omegas = [1.0]
[hamiltonian.table]
times = [0.0, 1.0, 2.0]
a = [[[0.5, 0.0], [0.0, 0.5]], [[0.7, 0.0], [0.0, 0.5]], [[0.5, 0.0], [0.0, 0.5]]]
[state]
kind = "number"
n = [0]
[time]
t1 = 2.0
dt = 1e-3
"#;
    let sc = write(dir.path(), "table.toml", body);
    let res = bin().args(["validate", sc.to_str().unwrap()]).output().unwrap();
    let (out, _) = text(&res);
    assert!(out.contains("reduced-order"), "{out}");
    assert_eq!(res.status.code(), Some(0), "{out}");
}

#[test]
fn oracle_compare_on_driven_oscillator() {
    let dir = tempfile::tempdir().unwrap();
    let body = scenario("driven_sho", "force = 1.0", "kind = \"coherent\"\nalpha = [[0.3, 0.1]]", 6.3, "1e-3")
        + "[oracle]\ncutoff = 40\ndt_oracle = 5e-3\n";
    let sc = write(dir.path(), "drv.toml", &body);
    let out = dir.path().join("cmp");
    let res = bin().args(["oracle-compare", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    let (stdout, _) = text(&res);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    let line = stdout.lines().find(|l| l.starts_with("oracle-compare")).unwrap();
    let dev: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(dev <= 1e-4, "{line}");
    let csv = std::fs::read_to_string(out.join("oracle_compare.csv")).unwrap();
    assert!(csv.starts_with("t,mean_q0_invariant,mean_q0_oracle"));

    let no_block = write(dir.path(), "plain.toml", &scenario("driven_sho", "", "kind = \"number\"\nn = [0]", 1.0, "1e-3"));
    let res = bin().args(["oracle-compare", no_block.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn directory_of_scenarios_runs_each_into_its_own_folder() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scen");
    std::fs::create_dir(&scen).unwrap();
    write(&scen, "a.toml", &scenario("constant_sho", "", "kind = \"number\"\nn = [0]", 1.0, "1e-2"));
    write(&scen, "b.toml", &scenario("coupled_qp", "", "kind = \"number\"\nn = [0, 1]", 1.0, "1e-2"));
    write(&scen, "c.toml", "not toml at all = = =");
    let out = dir.path().join("out");
    let res = bin().args(["run", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(out.join("a/manifest.json").is_file());
    assert!(out.join("b/manifest.json").is_file());
    assert!(text(&res).1.contains("c.toml"));
}
