use std::path::Path;
use std::process::{Command, Output};

fn kcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn basis_prints_effective_states() {
    let o = kcm(&["basis", "-L", "7", "-m", "N0"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert_eq!(out.lines().next(), Some("index,bitstring,value,frozen"));
    assert_eq!(out.lines().count(), 1 + 29);
}

#[test]
fn fragment_with_golden_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kcm(&["fragment", "-L", "10..14", "-m", "N1", "-o", out, "--golden", "fragmentation"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("golden fragmentation: 15 cells compared, 0 failed"));
    assert!(dir.path().join("fragmentation_N1_k0.Ip.csv").exists());
    assert!(dir.path().join("classification_N1_k0.Ip.json").exists());
}

#[test]
fn perturbed_cells_give_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kcm(&["report", "--preset", "table1", "-o", out]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));

    let cells = dir.path().join("cells.csv");
    let check = |p: &Path| kcm(&["golden-check", "--table", "effective_dimensions", "--cells", p.to_str().unwrap()]);
    assert_eq!(code(&check(&cells)), 0);

    let tampered = std::fs::read_to_string(&cells)
        .unwrap()
        .replace("effective_dimensions,N2,L9,492", "effective_dimensions,N2,L9,493");
    let bad = dir.path().join("tampered.csv");
    std::fs::write(&bad, tampered).unwrap();
    let o = check(&bad);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("effective_dimensions[N2, L9]: expected 492 got 493"));
}

#[test]
fn config_errors_give_exit_two() {
    assert_eq!(code(&kcm(&["fragment", "-L", "10", "-m", "N7"])), 2);
    assert_eq!(code(&kcm(&["fragment", "-m", "N1"])), 2);
    assert_eq!(code(&kcm(&["chaos", "-L", "12", "-m", "N1", "--sector", "k0.Ix"])), 2);
    assert_eq!(code(&kcm(&["report", "--preset", "nonexistent"])), 2);
    assert_eq!(code(&kcm(&["bogus-command"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "name = 'x'\nsites = 10\nanalyses = ['fragmentation']\nmodels = ['N1']\ntypo = 3\n").unwrap();
    let o = kcm(&["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("configuration error"));
}

#[test]
fn schema_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cells = dir.path().join("cells.csv");
    std::fs::write(&cells, "table,row,value\nfragmentation,x,1\n").unwrap();
    let o = kcm(&["golden-check", "--table", "fragmentation", "--cells", cells.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("schema mismatch"));
}

#[test]
fn dense_cap_gives_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("capped.toml");
    std::fs::write(
        &cfg,
        "name = 'capped'\nsites = 14\nanalyses = ['spectrum']\nmodels = ['QGL']\nblock = 'sector'\ncaps = { dense = 100 }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = kcm(&["report", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("stage `spectral` failed"));
}

#[test]
fn quench_writes_return_probability() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kcm(&["quench", "-L", "12", "-m", "N0", "--points", "50", "-o", out, "-j", "1"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("return_N0_L12.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(text(&o.stdout).contains("\"analysis\":\"dynamics\""));
}

#[test]
fn chaos_and_observe_run_on_small_chains() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kcm(&["chaos", "-L", "12", "-m", "QGL", "--window", "central:0.6", "-o", out]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(dir.path().join("sff_QGL_k0.Ip_largest_L12.csv").exists());
    let o = kcm(&["observe", "-L", "10", "-m", "N1", "--block", "sector", "-o", out]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("eigenstates_N1_k0.Ip_sector_L10.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("E,S_half,M,PR,fragment_id,sector"));
    assert_eq!(csv.lines().count(), 1 + 78);
}
