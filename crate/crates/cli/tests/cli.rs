use std::path::Path;
use std::process::{Command, Output};

use valleyscan::samplers::ingest_reads;
use valleyscan::ValleyRegistry;

fn valleyscan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valleyscan"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const FERROMAGNET: &str = "# ising n=2\nJ 0 1 1.0\n";

fn ferromagnet_config(dir: &Path, extra: &str) -> String {
    let model = dir.join("ferro.txt");
    std::fs::write(&model, FERROMAGNET).unwrap();
    write_config(
        dir,
        &format!(
            "model.source = file\nmodel.path = {}\nsearch.cycles = 50\nsearch.rates = 0.5,0.9\nsearch.cuts = 1,10\n{extra}",
            model.display()
        ),
    )
}

#[test]
fn ferromagnet_search_finds_both_ground_states() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ferromagnet_config(dir.path(), "");
    let out = valleyscan(&["search", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let registry = ValleyRegistry::read(&dir.path().join("registry.txt")).unwrap();
    let keys: Vec<String> = registry.keys().map(|k| k.to_string()).collect();
    assert_eq!(keys, ["++", "--"]);
    let cuts = std::fs::read_to_string(dir.path().join("cuts.csv")).unwrap();
    assert!(cuts.ends_with("all,2\n"), "{cuts}");
    assert!(std::fs::read_to_string(dir.path().join("timing.txt")).unwrap().contains("stage=search"));
}

#[test]
fn budget_stop_then_resume_matches_uninterrupted_run() {
    let model = "# ising n=10\n".to_string()
        + &(0..10)
            .map(|i| format!("J {i} {} {}\nh {i} {}\n", (i + 1) % 10, if i % 3 == 0 { -1.0 } else { 0.5 }, 0.25 * (i as f64 - 4.5)))
            .collect::<String>();
    let full = tempfile::tempdir().unwrap();
    let parted = tempfile::tempdir().unwrap();
    for dir in [full.path(), parted.path()] {
        std::fs::write(dir.join("m.txt"), &model).unwrap();
    }
    let base = |dir: &Path, extra: &str| {
        write_config(
            dir,
            &format!(
                "model.source = file\nmodel.path = {}\nsearch.cycles = 40\nsearch.rates = 0.8,0.9\nsearch.checkpoint_every = 4\n{extra}",
                dir.join("m.txt").display()
            ),
        )
    };

    let cfg = base(full.path(), "");
    assert!(valleyscan(&["search", "--config", &cfg], full.path()).status.success());

    let capped = base(parted.path(), "search.max_sweeps = 1000\n");
    let out = valleyscan(&["search", "--config", &capped], parted.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let uncapped = base(parted.path(), "");
    let out = valleyscan(&["search", "--resume", "--config", &uncapped], parted.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for file in ["registry.txt", "cuts.csv", "search.checkpoint"] {
        assert_eq!(
            std::fs::read(full.path().join(file)).unwrap(),
            std::fs::read(parted.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn resume_refuses_a_different_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ferromagnet_config(dir.path(), "");
    assert!(valleyscan(&["search", "--config", &cfg], dir.path()).status.success());
    let out = valleyscan(&["search", "--resume", "--seed", "99", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ingested_reads_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ferromagnet_config(dir.path(), "samplers = fast\nsampler.fast.kind = sa\nsampler.fast.reads = 50\nsampler.fast.sweeps = 5\n");
    assert!(valleyscan(&["sample", "--config", &cfg], dir.path()).status.success());
    let produced = dir.path().join("reads_fast.txt");
    let external = dir.path().join("external.txt");
    std::fs::copy(&produced, &external).unwrap();

    let cfg = ferromagnet_config(
        dir.path(),
        &format!("samplers = hw\nsampler.hw.kind = ingest\nsampler.hw.path = {}\n", external.display()),
    );
    let out = valleyscan(&["sample", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let original = ingest_reads(&produced, 2).unwrap();
    let ingested = ingest_reads(&dir.path().join("reads_hw.txt"), 2).unwrap();
    assert_eq!(original.reads(), ingested.reads());
    assert_eq!(ingested.sampler_name, "hw");
    assert_eq!(ingested.metadata.fields.get("ingested_as").map(String::as_str), Some("fast"));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nsearch.cylces = 10\n");
    let out = valleyscan(&["search", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("search.cylces"));

    let missing = dir.path().join("absent.cfg");
    let out = valleyscan(&["search", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ferromagnet_config(dir.path(), "");
    let out = valleyscan(&["characterize", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let model = dir.path().join("broken.txt");
    std::fs::write(&model, "# ising n=2\nJ 0 5 1.0\n").unwrap();
    let cfg = write_config(dir.path(), &format!("model.source = file\nmodel.path = {}\n", model.display()));
    let out = valleyscan(&["oracle", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn oracle_writes_landscape_and_minima() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ferromagnet_config(dir.path(), "");
    assert!(valleyscan(&["oracle", "--config", &cfg], dir.path()).status.success());
    let minima = std::fs::read_to_string(dir.path().join("oracle_minima.csv")).unwrap();
    assert_eq!(minima.lines().count(), 3, "{minima}");
    let landscape = std::fs::read_to_string(dir.path().join("landscape.csv")).unwrap();
    assert_eq!(landscape.lines().count(), 5, "{landscape}");
}

#[test]
fn train_then_search_an_rbm_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.source = rbm\nmodel.rbm_snapshot = 2\nrbm.n_visible = 4\nrbm.n_hidden = 3\nrbm.epochs = 2\nrbm.snapshot_epochs = 1,2\nrbm.synthetic_patterns = 40\nsearch.cycles = 20\nsearch.rates = 0.5\n",
    );
    let out = valleyscan(&["train", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["rbm_epoch_1.txt", "rbm_epoch_2.txt", "training.csv", "dataset.txt"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    assert!(valleyscan(&["search", "--config", &cfg], dir.path()).status.success());
    assert_eq!(ValleyRegistry::read(&dir.path().join("registry.txt")).unwrap().n(), 7);
}

#[test]
fn long_help_lists_config_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_valleyscan")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("search.rates"));
    assert!(text.contains("warming.chains"));
}
