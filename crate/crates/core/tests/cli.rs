use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn floosim(args: &[&str], out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floosim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FLOOSIM_SEED")
        .output()
        .unwrap()
}

#[test]
fn run_preset_reads_a_workload_next_to_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("run.toml");
    let o = floosim(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let transfers = std::fs::read_to_string(dir.path().join("transfers.csv")).unwrap();
    // 3 explicit transfers and one neighbour transfer per tile
    assert_eq!(transfers.lines().count(), 1 + 3 + 32);
    assert!(dir.path().join("flits.csv").exists());
}

#[test]
fn example_configs_load() {
    for name in ["run.toml", "rob.toml"] {
        floosim::config::load_config(&configs().join(name), &[]).unwrap();
    }
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = floosim(&["traffic", "--mesh.x_tiles=0"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("mesh.x_tiles"));

    let short = floosim(&["traffic", "--max_cycles=10"], dir.path());
    assert_eq!(short.status.code(), Some(2));

    let unknown = floosim(&["nonsense"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn env_seed_changes_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &std::path::Path, seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_floosim"))
            .args(["ordering-compare", "--out"])
            .arg(dir)
            .env("FLOOSIM_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(dir.join("latency_rob.csv")).unwrap()
    };
    assert_ne!(run(a.path(), "1"), run(b.path(), "2"));
}
