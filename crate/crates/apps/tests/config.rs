use std::path::Path;
use std::process::Command;

use stormkit_apps::config::{Config, ConfigError};
use stormkit_apps::forks::{run_forks, ForksOptions};
use stormkit_apps::Outcome;
use stormkit_core::deliberate::Heading;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("stormkit-config-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn bundled_warehouse_is_cleared() {
    let cfg = Config::default_forks();
    let s = cfg.forks_scenario().unwrap();
    assert_eq!(s.forklifts.len(), 2);
    assert_eq!(s.forklifts[1].heading, Heading::W);
    let r = run_forks(&s, &ForksOptions { seed: cfg.seed.unwrap(), max_ticks: cfg.ticks.unwrap() }).unwrap();
    assert_eq!(r.report.outcome, Outcome::Solved, "{}", r.report.summary());
}

#[test]
fn clause_files_are_relative_to_the_config() {
    let dir = scratch("files");
    std::fs::write(dir.join("start.pl"), "holding(9).\n").unwrap();
    let toml = r#"
[forks]
layout = [".B.", "...", "..."]
beliefs = "start.pl"
deliberate = false

[[forks.forklift]]
name = "f"
x = 1
y = 1

[[forks.reaction]]
name = "grab"
situation = "boxInFront"
skill = "graspBox"
effects = ["assert(holding(Box))"]
"#;
    std::fs::write(dir.join("s.toml"), toml).unwrap();
    let s = Config::load(&dir.join("s.toml")).unwrap().forks_scenario().unwrap();
    assert_eq!(s.beliefs, "holding(9).\n");
    assert!(!s.deliberate);
    assert_eq!(s.forklifts[0].heading, Heading::N);
    assert_eq!(s.reactions.len(), 1);
    assert_eq!(s.reactions[0].name, "grab");
    assert_eq!(s.reactions[0].precondition.to_string(), "true");
}

#[test]
fn bad_configs_are_rejected() {
    let base = Path::new(".");
    assert!(matches!(Config::parse("seed = \"one\"", base), Err(ConfigError::Toml(_))));
    assert!(matches!(Config::parse("colour = 1", base), Err(ConfigError::Toml(_))));
    let heading = "[forks]\nlayout=[\"...\"]\n[[forks.forklift]]\nname=\"f\"\nx=0\ny=0\nheading=\"up\"\n";
    assert!(matches!(Config::parse(heading, base).unwrap().forks_scenario(), Err(ConfigError::Invalid(_))));
    let on_wall = "[forks]\nlayout=[\"#..\"]\n[[forks.forklift]]\nname=\"f\"\nx=0\ny=0\n";
    assert!(matches!(Config::parse(on_wall, base).unwrap().forks_scenario(), Err(ConfigError::Invalid(_))));
    let missing = "[forks]\nlayout=[\"...\"]\nsituations=\"nowhere.pl\"\n[[forks.forklift]]\nname=\"f\"\nx=0\ny=0\n";
    assert!(matches!(Config::parse(missing, base).unwrap().forks_scenario(), Err(ConfigError::Io { .. })));
    assert!(matches!(Config::parse("", base).unwrap().forks_scenario(), Err(ConfigError::Invalid(_))));
}

fn stormkit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stormkit")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes_follow_the_outcome() {
    let (code, out) = stormkit(&["queens", "run", "--n", "4", "--seed", "1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("outcome: solved"));
    assert_eq!(stormkit(&["queens", "run", "--n", "3"]).0, 2);
    assert_eq!(stormkit(&["queens", "run", "--n", "8", "--messages", "5"]).0, 2);
    assert_eq!(stormkit(&["forks", "run", "--ticks", "3"]).0, 2);
    assert_eq!(stormkit(&["forks", "run", "--config", "/nonexistent.toml"]).0, 1);
    assert_eq!(stormkit(&["queens", "run"]).0, 1);
}

#[test]
fn cli_trace_round_trip() {
    let dir = scratch("trace");
    let a = dir.join("a.trace");
    let b = dir.join("b.trace");
    for p in [&a, &b] {
        let (code, _) = stormkit(&["forks", "run", "--seed", "2", "--trace", p.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);

    let (code, out) = stormkit(&["trace", "show", a.to_str().unwrap(), "--agent", "f1", "--kind", "GoalCommitted"]);
    assert_eq!(code, 0);
    assert!(!out.is_empty());
    assert!(out.lines().all(|l| l.split('|').nth(1) == Some("f1") && l.split('|').nth(2) == Some("GoalCommitted")), "{out}");

    std::fs::write(dir.join("junk"), "not a trace\n").unwrap();
    assert_eq!(stormkit(&["trace", "show", dir.join("junk").to_str().unwrap()]).0, 1);
}
