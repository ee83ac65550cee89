use std::path::Path;
use std::process::{Command, Output};

use nasforge::orchestrator::parse_archs;
use nasforge::{Registry, Session};

fn nasforge(home: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nasforge"))
        .args(args)
        .env("NASFORGE_HOME", home)
        .current_dir(home)
        .output()
        .unwrap()
}

fn ok(home: &Path, args: &[&str]) -> String {
    let out = nasforge(home, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(home: &Path, args: &[&str]) -> i32 {
    nasforge(home, args).status.code().unwrap()
}

fn with_config(home: &Path, extra: &[&str]) {
    let mut args = vec!["gen-sample-config"];
    args.extend_from_slice(extra);
    std::fs::write(home.join("config.yaml"), ok(home, &args)).unwrap();
}

const SUBCOMMANDS: [&str; 12] = [
    "search",
    "mpsearch",
    "random-sample",
    "sample",
    "derive",
    "eval-arch",
    "train",
    "test",
    "gen-sample-config",
    "gen-final-sample-config",
    "registry",
    "hwcost",
];

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["--help"]), 0);
    assert_eq!(code(dir.path(), &["--version"]), 0);
    for sub in SUBCOMMANDS {
        let out = nasforge(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn registry_lists_the_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["registry"]);
    let controllers = text.lines().filter(|l| l.starts_with("controller ")).count();
    assert!(controllers >= 5, "{text}");
    for kind in ["dataset", "objective", "search_space", "controller", "weights_manager", "evaluator", "trainer"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}

#[test]
fn generated_configs_assemble() {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::with_builtins();
    for space in ["cell", "toy_mlp", "blockwise"] {
        for controller in ["random", "sa", "evo", "rl", "predictor"] {
            let text = ok(dir.path(), &["gen-sample-config", "--search-space", space, "--controller", controller]);
            Session::from_yaml(&text, &registry).unwrap_or_else(|e| panic!("{space}/{controller}: {e}"));
        }
    }
    let text = ok(dir.path(), &["gen-final-sample-config"]);
    let s = Session::from_yaml(&text, &registry).unwrap();
    assert_eq!(s.weights_manager.type_name(), "supernet");
}

#[test]
fn search_then_random_sample() {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path();
    with_config(home, &[]);
    ok(home, &["search", "-c", "config.yaml", "--epochs", "1"]);
    assert!(home.join("run/search.log.jsonl").exists());
    assert!(home.join("run/ckpt/epoch_1/meta.json").exists());

    let text = ok(home, &["random-sample", "-c", "config.yaml", "-n", "3"]);
    let s = Session::from_yaml(&std::fs::read_to_string(home.join("config.yaml")).unwrap(), &Registry::with_builtins()).unwrap();
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        s.space.parse_genotype(line).unwrap();
    }
    let derived = ok(home, &["sample", "-c", "config.yaml", "-n", "2", "--mode", "derive", "--load", "run"]);
    assert_eq!(derived.lines().count(), 2);
}

#[test]
fn derive_eval_train_test() {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path();
    with_config(home, &[]);
    ok(home, &["search", "-c", "config.yaml", "--epochs", "1", "--out", "run"]);
    ok(home, &["derive", "-c", "config.yaml", "--load", "run", "-n", "5", "-o", "archs.yaml"]);
    let s = Session::from_yaml(&std::fs::read_to_string(home.join("config.yaml")).unwrap(), &Registry::with_builtins()).unwrap();
    let (entries, errors) = parse_archs(&s.space, &std::fs::read_to_string(home.join("archs.yaml")).unwrap()).unwrap();
    assert_eq!((entries.len(), errors.len()), (5, 0));

    let mut bad = std::fs::read_to_string(home.join("archs.yaml")).unwrap();
    bad.push_str("  - \"mlp(nope)\"\n");
    std::fs::write(home.join("bad.yaml"), bad).unwrap();
    let out = ok(home, &["eval-arch", "-c", "config.yaml", "--load", "run", "bad.yaml"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines.iter().filter(|v| v.get("error").is_some()).count(), 1);

    ok(home, &["train", "-c", "config.yaml", "--archs", "archs.yaml", "--steps", "300", "--save", "m.bin"]);
    let report = ok(home, &["test", "-c", "config.yaml", "--model", "m.bin"]);
    assert!(report.contains("mse"), "{report}");
}

#[test]
fn resumed_cli_search_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path();
    with_config(home, &["--controller", "rl"]);
    let cfg = std::fs::read_to_string(home.join("config.yaml")).unwrap();
    let cfg = cfg.replace("epochs: 10", "epochs: 3").replace("controller_samples_per_epoch: 50", "controller_samples_per_epoch: 10");
    std::fs::write(home.join("config.yaml"), cfg).unwrap();

    ok(home, &["search", "-c", "config.yaml", "--out", "full"]);
    ok(home, &["search", "-c", "config.yaml", "--out", "part", "--stop-after", "1"]);
    ok(home, &["search", "-c", "config.yaml", "--out", "part", "--resume", "part"]);
    let a = ok(home, &["derive", "-c", "config.yaml", "--load", "full", "-n", "4"]);
    let b = ok(home, &["derive", "-c", "config.yaml", "--load", "part", "-n", "4"]);
    assert_eq!(a, b);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path();
    assert_eq!(code(home, &["no-such-command"]), 1);
    assert_eq!(code(home, &["search"]), 1);
    assert_eq!(code(home, &["search", "-c", "missing.yaml"]), 2);

    with_config(home, &[]);
    let cfg = std::fs::read_to_string(home.join("config.yaml")).unwrap();
    std::fs::write(home.join("bad_type.yaml"), cfg.replace("population_size: 50", "population_size: lots")).unwrap();
    std::fs::write(home.join("unknown.yaml"), cfg.replace("type: evo", "type: bogus")).unwrap();
    std::fs::write(home.join("extra.yaml"), cfg.replace("tournament_size: 10", "tournament_size: 10\n  tournament_sise: 3")).unwrap();
    for bad in ["bad_type.yaml", "unknown.yaml", "extra.yaml"] {
        let out = nasforge(home, &["search", "-c", bad]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("controller"), "{bad}");
    }

    std::fs::write(home.join("final.yaml"), ok(home, &["gen-final-sample-config"])).unwrap();
    assert_eq!(code(home, &["mpsearch", "-c", "final.yaml", "--epochs", "1"]), 3);
    assert_eq!(code(home, &["derive", "-c", "config.yaml", "--load", "nowhere"]), 3);
}

#[test]
fn hwcost_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path();
    let text = ok(home, &["hwcost", "--device", "fpga_like", "--train", "60", "--test", "30", "--epochs", "2", "--out", "hw"]);
    assert!(text.contains("lstm"));
    for f in ["table.csv", "report.txt", "report.csv", "scatter.csv"] {
        assert!(home.join("hw").join(f).exists(), "{f}");
    }
}
