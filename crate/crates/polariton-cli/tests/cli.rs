use std::fs;
use std::path::Path;
use std::process::Command;

const LATTICE_SCAN: &str = r#"
method = "dhf"
electrons = 2
seed = 7

[mode]
omega = "0.8 hartree"
g_over_omega = 0.2

[lattice]
sites = 4
photon_basis = 4

[scan]
axis = "g_over_omega"
values = [0.0, 0.3, 0.6, 0.9]
"#;

fn polariton(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_polariton")).args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

#[test]
fn scan_rows_keep_input_order_with_several_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.toml");
    fs::write(&cfg, LATTICE_SCAN).unwrap();
    let out = dir.path().join("out");
    let o = polariton(&["scan", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rows = data_rows(&out.join("scan.dat"));
    let xs: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(xs, vec![0.0, 0.3, 0.6, 0.9]);
    assert!(rows.iter().all(|r| r[3] == "true"));
    for i in 0..4 {
        assert!(out.join(format!("point_{i:03}/summary.txt")).exists());
    }
    let header = fs::read_to_string(out.join("scan.dat")).unwrap();
    assert!(header.contains("# method dhf"));
    assert!(header.contains("# seed 7"));
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, LATTICE_SCAN.replace("method = \"dhf\"", "method = \"exact\"")).unwrap();
    let mut summaries = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = polariton(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        summaries.push(fs::read_to_string(out.join("summary.txt")).unwrap());
        assert!(out.join("occupations.dat").exists());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn invalid_config_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "method = \"hf\"\n[grid]\nlength = \"20\"\nspacing = \"0.1 bohr\"\n").unwrap();
    let o = polariton(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid.length"), "{err}");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = polariton(&["check", "--config", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
