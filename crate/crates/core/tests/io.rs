use std::fs;
use std::path::{Path, PathBuf};

use llg_core::grid::{GridSpec, VectorField3};
use llg_core::harness::convergence::fit_order;
use llg_core::harness::oracle::random_unit_field;
use llg_core::integrators::SchemeKind;
use llg_core::io::{decode_dump, encode_dump, execute, parse_config, read_dump, write_dump, Experiment, RunConfig};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Header names and data rows of a CSV written by the harness.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let c = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[c].parse().unwrap()).collect()
}

#[test]
fn dump_round_trip_is_bitwise() {
    let g = GridSpec::new([5, 4, 1], [1.7, 0.9, 0.3]).unwrap();
    let mut m = random_unit_field(g, 77);
    m.time = 0.123456789;
    for scheme in [None, Some(SchemeKind::Bdf3Existing)] {
        let bytes = encode_dump(&m, scheme);
        let back = decode_dump(&bytes).unwrap();
        assert_eq!(back.scheme, scheme);
        assert_eq!(back.m.time.to_bits(), m.time.to_bits());
        assert_eq!(back.m.grid(), m.grid());
        let same = back.m.flat().iter().zip(m.flat()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
        assert_eq!(encode_dump(&back.m, back.scheme), bytes);
    }
}

#[test]
fn dump_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::line(6, 2.0).unwrap();
    let m = VectorField3::uniform(g, [0.0, 0.6, 0.8]);
    let path = dir.path().join("m.bin");
    write_dump(&path, &m, Some(SchemeKind::Bdf1)).unwrap();
    assert_eq!(read_dump(&path).unwrap().m.flat(), m.flat());
    fs::write(&path, b"not a dump at all, far too short").unwrap();
    assert!(read_dump(&path).is_err());
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
            cfg.validate().unwrap();
            assert!(!cfg.echo().is_empty());
            seen += 1;
        }
    }
    assert!(seen >= 6);
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        "[run]\nexperiment = \"nope\"\n",
        "[run]\nexperiment = \"stability\"\nbogus = 1\n",
        "[run]\nexperiment = \"converge-time\"\n[wall]\nfields_mt = [5]\n",
        "[run]\nexperiment = \"stability\"\n[time]\nk_ps = [-1]\n",
    ] {
        let bad = parse_config(text).and_then(|c| c.validate().map(|_| c));
        assert!(bad.is_err(), "{text}");
    }
}

#[test]
fn convergence_csv_reproduces_the_fitted_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(Experiment::ConvergeTime);
    cfg.schemes = vec![SchemeKind::Bdf1];
    cfg.dim = 1;
    cfg.output = dir.path().to_path_buf();
    let outcome = execute(&cfg).unwrap();
    assert!(outcome.all_stable);

    let (header, rows) = read_csv(&dir.path().join("bdf1_temporal_1d.csv"));
    let levels = llg_core::harness::convergence::temporal_divisors(SchemeKind::Bdf1, 1).len();
    assert_eq!(rows.len(), levels);
    let k = column(&header, &rows, "k");
    let (oh, orows) = read_csv(&dir.path().join("orders.csv"));
    assert_eq!(orows.len(), 1);
    for norm in ["linf", "l2", "h1"] {
        let refit = fit_order(&k, &column(&header, &rows, norm)).unwrap();
        let written = column(&oh, &orows, &format!("order_{norm}"))[0];
        assert!((refit - written).abs() <= 1e-12, "{norm}: {refit} vs {written}");
    }
    assert!(dir.path().join("verdict.json").exists());
    assert!(dir.path().join("config.txt").exists());
}

fn simulate_once(out: &Path) {
    let text = format!(
        "[run]\nexperiment = \"simulate\"\nscheme = \"bdf3-proposed\"\nalpha = 0.5\noutput = {:?}\ndump_every = 10\n\
         [grid]\ncounts = [32, 1, 1]\nlengths = [8, 1, 1]\n\
         [dimensionless]\nepsilon = 1.0\nq = 0.1\nhe = [0.05, 0, 0]\n\
         [time]\nk = 0.01\nt_end = 0.3\n\
         [initial]\nkind = \"neel-wall\"\nx0 = 4\nwidth = 1\n",
        out.display().to_string()
    );
    let cfg = parse_config(&text).unwrap();
    let outcome = execute(&cfg).unwrap();
    assert!(outcome.all_stable);
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_once(a.path());
    simulate_once(b.path());

    let (ha, ra) = read_csv(&a.path().join("energy.csv"));
    let (hb, rb) = read_csv(&b.path().join("energy.csv"));
    assert_eq!(ha, hb);
    assert_eq!(ra.len(), rb.len());
    assert!(ra.len() > 10);
    for (x, y) in ra.iter().zip(&rb) {
        for ((name, u), v) in ha.iter().zip(x).zip(y) {
            if !name.ends_with("_seconds") {
                assert_eq!(u, v, "{name}");
            }
        }
    }
    assert_eq!(fs::read(a.path().join("final.bin")).unwrap(), fs::read(b.path().join("final.bin")).unwrap());

    let snaps: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("m_"))
        .collect();
    assert!(!snaps.is_empty());
    let last = read_dump(&a.path().join("final.bin")).unwrap();
    assert_eq!(last.scheme, Some(SchemeKind::Bdf3Proposed));
    assert!(last.m.max_unit_deviation() <= 1e-14);
    assert!(fs::read_to_string(a.path().join("final.vtk")).unwrap().starts_with("# vtk DataFile"));
}
