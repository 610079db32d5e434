use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypergconv::harness::{run_cell, ExperimentConfig, Kind};

/// Fresh scratch directory per test, under the system temp dir.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hypergconv-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn hypergconv(dir: &Path, kind: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hypergconv"))
        .arg(kind)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("HYPERGCONV_THREADS")
        .output()
        .expect("binary runs")
}

fn csv_lines(dir: &Path, kind: &str) -> Vec<String> {
    fs::read_to_string(dir.join("out").join(format!("{kind}.csv")))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn grid_of_one_is_a_single_run() {
    let a = scratch("one-a");
    let b = scratch("one-b");
    let scalar = r#"{"T": 8, "r": 2, "player": "polyak", "seed": 4}"#;
    let arrays = r#"{"T": [8], "r": [2], "player": ["polyak"], "seed": [4]}"#;
    let oa = hypergconv(&a, "lb-nonsmooth", scalar, &["--no-runtime"]);
    let ob = hypergconv(&b, "lb-nonsmooth", arrays, &["--no-runtime"]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    let la = csv_lines(&a, "lb-nonsmooth");
    assert_eq!(la.len(), 2);
    assert_eq!(la, csv_lines(&b, "lb-nonsmooth"));

    // and it is the very cell the library runs on its own
    let cfg = ExperimentConfig::parse(Kind::LbNonsmooth, scalar, None).unwrap();
    let o = run_cell(Kind::LbNonsmooth, &cfg.cells()[0]);
    let measured: f64 = la[1].split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(measured, o.measured);
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = scratch("empty");
    let o = hypergconv(&dir, "lb-nonsmooth", r#"{"T": [], "r": 1, "player": "rgd"}"#, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = csv_lines(&dir, "lb-nonsmooth");
    assert_eq!(
        lines,
        vec!["T,r,player,seed,measured,bound,relation,pass,note,runtime_s".to_string()]
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/lb-nonsmooth.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn three_by_three_grid_gives_nine_rows() {
    let dir = scratch("grid");
    let o = hypergconv(
        &dir,
        "lb-nonsmooth",
        r#"{"T": [4, 8, 16], "r": [1, 2, 5], "player": "polyak", "seed": 2}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = csv_lines(&dir, "lb-nonsmooth");
    assert_eq!(lines.len(), 10);
    // last axis varies fastest
    let cells: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(cells[0], ("4", "1"));
    assert_eq!(cells[1], ("4", "2"));
    assert_eq!(cells[3], ("8", "1"));
    assert_eq!(cells[8], ("16", "5"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/lb-nonsmooth.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 9);
    assert_eq!(json["rng"], "ChaCha8");
}

#[test]
fn failing_row_exits_one_and_is_named() {
    let dir = scratch("fail");
    // one normal sample is too few for the adversary against the center player
    let o = hypergconv(
        &dir,
        "cut-game",
        r#"{"d": 3, "r": 3, "eps": 0.3, "player": ["uniform", "center"], "games": 5, "normals": 1, "seed": 1}"#,
        &["--no-runtime"],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("FAIL row 1:"), "{err}");
    assert!(!err.contains("FAIL row 0:"), "{err}");
    let lines = csv_lines(&dir, "cut-game");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",true,"));
    assert!(lines[2].contains(",false,"));
}

#[test]
fn config_problems_exit_two() {
    let cases = [
        ("lb-nonsmooth", "{ not json"),
        ("lb-nonsmooth", r#"{"T": 4}"#),
        ("lb-nonsmooth", r#"{"T": 4, "r": 1, "typo": 1}"#),
        ("lb-nonsmooth", r#"{"kind": "interp", "T": 4, "r": 1}"#),
        ("polyak-worst", r#"{"eps": 0.3, "r": 10}"#),
        ("gradient-descent", r#"{"T": 4, "r": 1}"#),
    ];
    for (i, (kind, text)) in cases.iter().enumerate() {
        let dir = scratch(&format!("bad{i}"));
        let o = hypergconv(&dir, kind, text, &[]);
        assert_eq!(o.status.code(), Some(2), "{kind} {text}: {}", stderr(&o));
        assert!(!dir.join("out").exists(), "{kind} {text} wrote output");
    }

    let dir = scratch("missing");
    let o = Command::new(env!("CARGO_BIN_EXE_hypergconv"))
        .args(["interp", "--config"])
        .arg(dir.join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_two() {
    let dir = scratch("threads");
    let cfg = dir.join("c.json");
    fs::write(&cfg, r#"{"mode": "minimal", "n": 5}"#).unwrap();
    for bad in ["0", "many"] {
        let o = Command::new(env!("CARGO_BIN_EXE_hypergconv"))
            .arg("interp")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join("out"))
            .env("HYPERGCONV_THREADS", bad)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn seed_flag_and_thread_cap_keep_output_stable() {
    let text = r#"{"T": [4, 8], "r": [1, 5], "player": "random", "seed": 1}"#;
    let run = |name: &str, threads: &str, seed: &str| {
        let dir = scratch(name);
        let cfg = dir.join("c.json");
        fs::write(&cfg, text).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_hypergconv"))
            .args(["lb-nonsmooth", "--no-runtime", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join("out"))
            .env("HYPERGCONV_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(dir.join("out/lb-nonsmooth.csv")).unwrap()
    };
    let one = run("stable1", "1", "11");
    assert_eq!(one, run("stable2", "3", "11"));
    assert_ne!(one, run("stable3", "1", "12"));
    let text = String::from_utf8(one).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("11")));
}
