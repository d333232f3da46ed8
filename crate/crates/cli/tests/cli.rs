use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn caal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caal"))
        .args(args)
        .current_dir(dir)
        .env("CAAL_WORKERS", "1")
        .output()
        .unwrap()
}

fn gen(dir: &Path, name: &str, states: &str, seed: &str) {
    let out = caal(
        &[
            "gen",
            "--states",
            states,
            "--inputs",
            "2",
            "--outputs",
            "2",
            "--seed",
            seed,
        ],
        dir,
    );
    assert!(out.status.success());
    fs::write(dir.join(name), out.stdout).unwrap();
}

#[test]
fn gen_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "a.dot", "4", "1");
    gen(dir.path(), "b.dot", "4", "2");

    let same = caal(&["verify", "a.dot", "a.dot"], dir.path());
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim(), "equivalent");

    let differ = caal(&["verify", "a.dot", "b.dot"], dir.path());
    assert_eq!(differ.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&differ.stdout).starts_with("counterexample:"));

    let missing = caal(&["verify", "a.dot", "nope.dot"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_writes_csv_models_and_events() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "t.dot", "5", "5");
    let out = caal(
        &[
            "run",
            "--target",
            "t.dot",
            "--learner",
            "kv",
            "--runs",
            "2",
            "--noise-kind",
            "output",
            "--noise-level",
            "0.01",
            "--min-repeats",
            "5",
            "--max-repeats",
            "10",
            "--id",
            "cell",
            "-o",
            "out.csv",
            "--models",
            "models",
            "--events",
            "events",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim(), "2/2 runs succeeded");

    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("experiment_id,run_id,framework"));
    assert!(lines[1].starts_with("cell,0,ceal,kv,"));

    for k in 0..2 {
        let model = dir.path().join(format!("models/cell-{k}.dot"));
        let v = caal(&["verify", model.to_str().unwrap(), "t.dot"], dir.path());
        assert_eq!(v.status.code(), Some(0));
        let events = fs::read_to_string(dir.path().join(format!("events/cell-{k}.jsonl"))).unwrap();
        assert!(events.lines().any(|l| l.contains("\"hypothesis\"")));
    }
}

#[test]
fn bench_runs_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "t.dot", "4", "3");
    let mut config = String::new();
    for framework in ["mat", "ceal"] {
        config += &format!(
            "[[cell]]\nid = \"{framework}\"\ntarget = \"t.dot\"\nframework = \"{framework}\"\nlearner = \"lstar_rs\"\n\
             update = \"most_recent\"\nselection = \"most_frequent\"\nmin_repeats = 1\nmax_repeats = 1\n\
             noise_kind = \"none\"\nnoise_level = 0.0\nbase_seed = 0\nruns = 2\n\n"
        );
    }
    fs::write(dir.path().join("grid.toml"), config).unwrap();
    let out = caal(&["bench", "grid.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mat: 2/2") && stderr.contains("ceal: 2/2"), "{stderr}");
}

#[test]
fn unsupported_learner_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "t.dot", "3", "0");
    fs::write(
        dir.path().join("grid.toml"),
        "[[cell]]\nid = \"x\"\ntarget = \"t.dot\"\nframework = \"ceal\"\nlearner = \"ttt\"\n\
         update = \"most_recent\"\nselection = \"most_frequent\"\nmin_repeats = 1\nmax_repeats = 1\n\
         noise_kind = \"none\"\nnoise_level = 0.0\nbase_seed = 0\n",
    )
    .unwrap();
    let out = caal(&["bench", "grid.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported learner `ttt`"));
}
