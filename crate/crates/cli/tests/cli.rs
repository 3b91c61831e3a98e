use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn llg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llg"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").canonicalize().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn data_rows(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_string).collect()
}

#[test]
fn validate_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("stability.toml");
    let o = llg(&["validate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("epsilon") && out.contains("llg version"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nexperiment = \"stability\"\ntypo = 3\n[time]\nk_ps = [0]\n").unwrap();
    let o = llg(&["validate", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("typo"), "{err}");

    let wall = configs().join("wall.toml");
    let o = llg(&["stability", "--config", wall.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    let o = llg(&["simulate"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn oracle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = llg(&["oracle", "--out", "checks"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(!data_rows(&dir.path().join("checks/oracle.csv")).is_empty());
}

#[test]
fn converge_writes_an_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = llg(&["converge", "--scheme", "bdf3-proposed", "--dim", "1", "-o", "conv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("conv");
    assert_eq!(data_rows(&out.join("bdf3-proposed_temporal_1d.csv")).len(), 5);
    let header = fs::read_to_string(out.join("orders.csv")).unwrap();
    assert!(header.starts_with("# llg version"));
    assert!(out.join("verdict.json").exists());
}

#[test]
fn simulate_stays_inside_its_output_directory() {
    let work = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = work.path().join("sim.toml");
    fs::write(
        &cfg,
        format!(
            "[run]\nexperiment = \"simulate\"\nscheme = \"bdf2\"\nalpha = 1.0\noutput = {:?}\ndump_every = 5\n\
             [grid]\ncounts = [32, 1, 1]\nlengths = [8, 1, 1]\n\
             [dimensionless]\nepsilon = 1.0\nq = 0.1\n\
             [time]\nk = 0.02\nt_end = 0.2\n\
             [initial]\nkind = \"neel-wall\"\nx0 = 4\nwidth = 1\n",
            out.path().display().to_string()
        ),
    )
    .unwrap();
    let o = llg(&["simulate", "--config", "sim.toml"], work.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(work.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["sim.toml"]);
    for f in ["energy.csv", "final.bin", "final.vtk", "verdict.json", "config.txt", "m_000005.bin"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let verdict = fs::read_to_string(out.path().join("verdict.json")).unwrap();
    assert!(verdict.contains("stable"));
}

#[test]
fn small_wall_run_reports_a_velocity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wall.toml");
    fs::write(
        &cfg,
        "[run]\nexperiment = \"wall\"\nscheme = \"bdf3-proposed\"\nalpha = 1\noutput = \"w\"\n\
         [grid]\ncounts = [64, 8, 1]\nlengths_nm = [400, 40, 4]\n\
         [physical]\nms = 8.0e5\ncex = 1.3e-11\nku = 100.0\n\
         [time]\nk_ps = 1.0\nt_end_ns = 0.04\n\
         [wall]\nx0_nm = 150\nrelax_ns = 0.01\nrelax_alpha = 5\nfields_mt = [5]\nframe_every = 2\nedge_margin_nm = 20\n",
    )
    .unwrap();
    let o = llg(&["wall", "--config", "wall.toml", "--alpha", "0.1", "--he", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&dir.path().join("w/wall.csv"));
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    assert!(v.is_finite() && v > 0.0, "{v}");
    assert!(dir.path().join("w/relaxed.bin").exists());
}
