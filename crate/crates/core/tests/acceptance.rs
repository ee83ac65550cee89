//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nasforge::controller::{Controller, RlController, RlSettings};
use nasforge::evaluator::SupernetManager;
use nasforge::hwcost::{run_pipeline, CostModelKind, DeviceSimulator, TrainSettings};
use nasforge::orchestrator::{
    async_search, derive, latest_checkpoint, load_checkpoint, parse_archs, simple_search, SearchOptions, SearchReport,
};
use nasforge::rng::stream_rng;
use nasforge::space::{BlockwiseSpace, CellSpace, ToyMlpSpace};
use nasforge::{SearchSpace, Tensor};

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hwcost_models() -> Outcome {
    let start = Instant::now();
    let space = BlockwiseSpace::default();
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        for device in [DeviceSimulator::gpu_like(seed), DeviceSimulator::fpga_like(seed)] {
            let out = run_pipeline(&space, &device, &CostModelKind::ALL, 2000, 1000, &TrainSettings::default(), seed)
                .map_err(|e| e.to_string())?;
            let rmse = |m: &str| out.report.row(m).expect("model row").rmse;
            let naive = rmse("sum");
            let ratio = |m: &str| rmse(m) / naive;
            if device.name() == "gpu_like" {
                let (mlp, lstm, lin2) = (ratio("mlp"), ratio("lstm"), ratio("linear2"));
                lines.push(format!("seed {seed} gpu_like mlp {mlp:.3} lstm {lstm:.3} linear2 {lin2:.3}"));
                ensure(mlp <= 0.5 && lstm <= 0.5 && lin2 <= 0.67, || lines.join("; "))?;
            } else {
                let best = ["linear1", "linear2", "mlp", "lstm"].map(ratio).into_iter().fold(f64::INFINITY, f64::min);
                lines.push(format!("seed {seed} fpga_like best {best:.3}"));
                ensure(best <= 0.33, || lines.join("; "))?;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("pipeline took {secs:.0} s"))?;
    Ok(format!("rmse/naive: {}; {secs:.0} s", lines.join("; ")))
}

fn gradient_checks() -> Outcome {
    let checks: [(&str, fn(u64) -> f64); 6] = [
        ("dense", dense_error),
        ("lstm", lstm_error),
        ("losses", losses_error),
        ("mlp", mlp_error),
        ("mlp cost model", mlp_cost_error),
        ("lstm cost model", lstm_cost_error),
    ];
    let mut worst = 0.0f64;
    for (name, check) in checks {
        for seed in 0..20 {
            let err = check(seed);
            ensure(err < 1e-4, || format!("{name} seed {seed}: max relative error {err:.2e}"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("6 checks x 20 seeds, worst relative error {worst:.2e}"))
}

fn search_effectiveness() -> Outcome {
    let start = Instant::now();
    let mut hits = [0usize; 3];
    let names = ["evo", "sa", "random"];
    let mut top = 0;
    for seed in 0..10u64 {
        let mut table = None;
        for (k, name) in names.iter().enumerate() {
            let text = tabular_yaml(
                seed,
                "{type: cell}",
                &format!("{{type: {name}}}"),
                "{type: simple, epochs: 10, controller_samples_per_epoch: 50}",
            );
            let mut s = session(&text);
            let table = table.get_or_insert_with(|| all_rewards(&s));
            ensure(table.len() == 2916, || format!("cell space enumerates {} genotypes", table.len()))?;
            top = (table.len() as f64 * 0.005).ceil() as usize;
            let report = simple_search(&mut s, &SearchOptions::default()).map_err(|e| e.to_string())?;
            ensure(report.records.len() == 500, || format!("{} evaluations", report.records.len()))?;
            let best = report.records.iter().map(|r| r.reward).fold(f64::NEG_INFINITY, f64::max);
            if rank_of(table, best) < top {
                hits[k] += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "top {top} of 2916 reached: evo {}/10, sa {}/10, random {}/10; {secs:.1} s",
        hits[0], hits[1], hits[2]
    );
    ensure(hits[0] >= 9 && hits[1] >= 9 && secs < 60.0, || summary.clone())?;
    Ok(summary)
}

fn bandit_probability(seed: u64) -> f64 {
    let space = ToyMlpSpace::new(1, vec![8, 16], vec![nasforge::nn::Activation::Relu]).unwrap();
    let space = std::sync::Arc::new(SearchSpace::ToyMlp(space));
    let settings = RlSettings {
        learning_rate: 0.01,
        ..RlSettings::default()
    };
    let mut rl = RlController::new(space, settings, seed).unwrap();
    let mut rng = stream_rng(seed, "bandit");
    for _ in 0..2000 {
        let mut r = rl.explore(1, &mut rng).unwrap();
        let reward = if r[0].genotype[0] == 1 { 1.0 } else { 0.0 };
        r[0].perf.insert("reward".into(), reward);
        rl.step(&r, &mut rng).unwrap();
    }
    rl.probs(&[1, 0]).unwrap()[0][1]
}

fn bandit_convergence() -> Outcome {
    let probs: Vec<f64> = (0..10).map(bandit_probability).collect();
    let hits = probs.iter().filter(|&&p| p > 0.9).count();
    let min = probs.iter().copied().fold(1.0, f64::min);
    let summary = format!("p(optimal arm) > 0.9 in {hits}/10 seeds, min {min:.3}");
    ensure(hits >= 9, || summary.clone())?;
    Ok(summary)
}

fn spaces() -> Vec<(&'static str, SearchSpace)> {
    vec![
        ("cell", SearchSpace::Cell(CellSpace::new(2, vec!["sep_conv_3x3".into(), "max_pool_3x3".into(), "skip_connect".into()]).unwrap())),
        ("toy_mlp", SearchSpace::ToyMlp(ToyMlpSpace::default())),
        ("blockwise-1", SearchSpace::Blockwise(BlockwiseSpace::with_stages(1))),
        ("blockwise", SearchSpace::Blockwise(BlockwiseSpace::default())),
    ]
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sizes = Vec::new();
    for (name, space) in spaces() {
        for _ in 0..1000 {
            let g = space.random_genotype(&mut rng);
            let text = space.genotype_to_string(&g).map_err(|e| e.to_string())?;
            let back = space.parse_genotype(&text).map_err(|e| format!("{name}: {text}: {e}"))?;
            ensure(space.canonicalize(&back) == space.canonicalize(&g), || format!("{name}: {text} round-trips to {back:?}"))?;
        }
        if space.size() <= 10_000 {
            let all = space.enumerate().map_err(|e| e.to_string())?;
            let distinct: std::collections::HashSet<Vec<usize>> = all.iter().map(|g| space.canonicalize(g)).collect();
            ensure(all.len() as u128 == space.size() && distinct.len() == all.len(), || {
                format!("{name}: size {} but {} enumerated, {} distinct", space.size(), all.len(), distinct.len())
            })?;
            sizes.push(format!("{name} {}", all.len()));
        }
    }
    ensure(sizes.contains(&"cell 2916".to_string()) && sizes.contains(&"blockwise-1 7371".to_string()), || sizes.join(", "))?;

    // Weight sharing: a width-8 candidate only touches its leading blocks.
    let s = session(&yaml(3, "{type: toy_mlp}", "{type: random}", "{type: supernet}", "{type: supernet}", "{type: simple}"));
    let task = s.dataset.clone();
    let manager = SupernetManager::new(s.space.clone(), &task, &mut rng).map_err(|e| e.to_string())?;
    let before = manager.snapshot().unwrap();
    let genotype = vec![0, 1, 0, 0, 0, 1];
    let cand = manager.candidate(&genotype).unwrap();
    let (x, y): (Tensor, Tensor) = task.sample_batch(&mut rng);
    cand.sgd_step(&x, &y, 0.1).unwrap();
    let after = manager.snapshot().unwrap();
    let mut touched = 0;
    let mut fan_in = task.input_dim;
    let width = 8;
    let mut layers: Vec<_> = before.hidden.iter().zip(&after.hidden).map(|(b, a)| (b, a, width)).collect();
    layers.push((&before.output, &after.output, before.output.outputs()));
    for (b, a, rows) in layers {
        for r in 0..b.weight.rows() {
            for c in 0..b.weight.cols() {
                let inside = r < rows && c < fan_in;
                let same = b.weight.get(r, c).to_bits() == a.weight.get(r, c).to_bits();
                ensure(inside || same, || format!("untouched weight ({r},{c}) changed"))?;
                touched += usize::from(inside && !same);
            }
            let same = b.bias[r].to_bits() == a.bias[r].to_bits();
            ensure(r < rows || same, || format!("untouched bias {r} changed"))?;
        }
        fan_in = width;
    }
    ensure(touched > 0, || "sgd step changed nothing".into())?;

    // Tabular determinism: two independently built evaluators, repeated calls.
    let text = tabular_yaml(9, "{type: cell}", "{type: random}", "{type: simple}");
    let (a, b) = (session(&text), session(&text));
    for _ in 0..500 {
        let g = a.space.random_genotype(&mut rng);
        let r = reward_of(&a, &g);
        ensure(r.to_bits() == reward_of(&a, &g).to_bits() && r.to_bits() == reward_of(&b, &g).to_bits(), || {
            format!("reward of {g:?} varies")
        })?;
    }
    Ok(format!("round-trip 4 spaces x 1000; sizes {}; containment ok; tabular variance 0", sizes.join(", ")))
}

fn records(report: &SearchReport) -> Vec<(String, f64)> {
    report.records.iter().map(|r| (r.genotype.clone(), r.reward)).collect()
}

fn async_equivalence() -> Outcome {
    let trainer = |workers: usize| {
        format!("{{type: async, num_workers: {workers}, max_inflight: 8, epochs: 4, controller_samples_per_epoch: 50}}")
    };
    // Serial re-evaluation of every async result.
    let text = tabular_yaml(11, "{type: cell}", "{type: evo, population_size: 20}", &trainer(4));
    let mut s = session(&text);
    let report = async_search(&mut s, 4, 8, &SearchOptions::default()).map_err(|e| e.to_string())?;
    let serial = session(&text);
    let rerun = report.records.iter().map(|r| {
        let g = serial.space.parse_genotype(&r.genotype).unwrap();
        (r.genotype.clone(), reward_of(&serial, &g))
    });
    ensure(multiset(records(&report)) == multiset(rerun), || "async rewards differ from serial re-evaluation".into())?;
    ensure(report.records.len() == 200, || format!("{} records", report.records.len()))?;

    // One worker reproduces the simple trainer.
    for controller in ["{type: evo, population_size: 20}", "{type: sa}", "{type: rl}"] {
        let mut one = session(&tabular_yaml(12, "{type: cell}", controller, &trainer(1)));
        let mut simple = session(&tabular_yaml(12, "{type: cell}", controller, &trainer(1)));
        let a = async_search(&mut one, 1, 8, &SearchOptions::default()).map_err(|e| e.to_string())?;
        let b = simple_search(&mut simple, &SearchOptions::default()).map_err(|e| e.to_string())?;
        ensure(records(&a) == records(&b), || format!("{controller}: one-worker async differs from simple"))?;
        let (da, db) = (derive(&mut one, 5).unwrap(), derive(&mut simple, 5).unwrap());
        ensure(da == db, || format!("{controller}: derive differs"))?;
    }

    // Stress: ten runs with budget 200, each under a deadline.
    let mut slowest = 0.0f64;
    for rep in 0..10u64 {
        let controller = ["{type: evo, population_size: 20}", "{type: sa}", "{type: rl}", "{type: random}"][rep as usize % 4];
        let text = tabular_yaml(100 + rep, "{type: cell}", controller, &trainer(4));
        let (tx, rx) = mpsc::channel();
        let start = Instant::now();
        std::thread::spawn(move || {
            let mut s = session(&text);
            let _ = tx.send(async_search(&mut s, 4, 8, &SearchOptions::default()).map(|r| r.records.len()));
        });
        match rx.recv_timeout(Duration::from_secs(60)) {
            Ok(Ok(200)) => slowest = slowest.max(start.elapsed().as_secs_f64()),
            Ok(Ok(n)) => return Err(format!("stress run {rep}: {n} records")),
            Ok(Err(e)) => return Err(format!("stress run {rep}: {e}")),
            Err(_) => return Err(format!("stress run {rep}: no result within 60 s")),
        }
    }
    Ok(format!("multiset equal; 1 worker == simple for 3 controllers; 10 stress runs, slowest {slowest:.2} s"))
}

fn run_cli(home: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_nasforge"))
        .args(args)
        .env("NASFORGE_HOME", home)
        .current_dir(home)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`nasforge {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn cli_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let home = dir.path();
    let start = Instant::now();
    let config = run_cli(home, &["gen-sample-config"])?;
    std::fs::write(home.join("config.yaml"), &config).map_err(|e| e.to_string())?;
    run_cli(home, &["search", "-c", "config.yaml", "--epochs", "1", "--out", "run"])?;
    run_cli(home, &["derive", "-c", "config.yaml", "--load", "run", "-n", "5", "-o", "derived.yaml"])?;
    let evals = run_cli(home, &["eval-arch", "-c", "config.yaml", "--load", "run", "derived.yaml"])?;
    run_cli(home, &["train", "-c", "config.yaml", "--archs", "derived.yaml", "--save", "model.bin"])?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("pipeline took {secs:.0} s"))?;
    ensure(evals.lines().count() == 5, || format!("eval-arch printed {} lines", evals.lines().count()))?;
    ensure(home.join("model.bin").exists(), || "no model written".into())?;

    let s = session(&config);
    let text = std::fs::read_to_string(home.join("derived.yaml")).map_err(|e| e.to_string())?;
    let (entries, errors) = parse_archs(&s.space, &text).map_err(|e| e.to_string())?;
    ensure(entries.len() == 5 && errors.is_empty(), || format!("derived file: {} entries, {} errors", entries.len(), errors.len()))?;
    let top = reward_of(&s, &entries[0].genotype);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut random: Vec<f64> = (0..100).map(|_| reward_of(&s, &s.space.random_genotype(&mut rng))).collect();
    random.sort_by(f64::total_cmp);
    let median = (random[49] + random[50]) / 2.0;
    ensure(top >= median, || format!("top derived reward {top:.4} below random median {median:.4}"))?;
    Ok(format!("5 commands exit 0 in {secs:.1} s; top reward {top:.4} vs random median {median:.4}"))
}

fn derived(s: &mut nasforge::Session) -> Vec<(Vec<usize>, Vec<u64>)> {
    derive(s, 5)
        .unwrap()
        .iter()
        .map(|d| (s.space.parse_genotype(&d.genotype).unwrap(), d.perf.values().map(|v| v.to_bits()).collect()))
        .collect()
}

fn checkpoint_resume() -> Outcome {
    let mut checked = Vec::new();
    for controller in ["random", "sa", "evo", "rl", "predictor"] {
        let text = tabular_yaml(
            31,
            "{type: cell}",
            &format!("{{type: {controller}}}"),
            "{type: simple, epochs: 4, controller_samples_per_epoch: 20}",
        );
        let mut full = session(&text);
        simple_search(&mut full, &SearchOptions::default()).map_err(|e| e.to_string())?;

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = SearchOptions {
            checkpoint_root: Some(dir.path().to_path_buf()),
            ..SearchOptions::default()
        };
        let mut first = session(&text);
        simple_search(
            &mut first,
            &SearchOptions {
                stop_after: Some(2),
                ..opts.clone()
            },
        )
        .map_err(|e| e.to_string())?;
        drop(first);
        let mut resumed = session(&text);
        let ckpt = latest_checkpoint(dir.path()).map_err(|e| e.to_string())?.ok_or("no checkpoint written")?;
        load_checkpoint(&mut resumed, &ckpt).map_err(|e| e.to_string())?;
        ensure(resumed.progress.epochs_done == 2, || format!("{controller}: resumed at epoch {}", resumed.progress.epochs_done))?;
        simple_search(&mut resumed, &opts).map_err(|e| e.to_string())?;

        ensure(derived(&mut full) == derived(&mut resumed), || format!("{controller}: derive differs after resume"))?;
        let same_state = full.controller.save().unwrap().to_bytes() == resumed.controller.save().unwrap().to_bytes();
        ensure(same_state, || format!("{controller}: controller state differs after resume"))?;
        checked.push(controller);
    }
    Ok(format!("stop at epoch 2 of 4 and resume: identical derive for {}", checked.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("hardware cost models beat naive addition", hwcost_models),
        ("gradient checks", gradient_checks),
        ("search effectiveness on the cell space", search_effectiveness),
        ("REINFORCE bandit convergence", bandit_convergence),
        ("property suites", properties),
        ("async/serial equivalence", async_equivalence),
        ("end-to-end CLI", cli_end_to_end),
        ("checkpoint/resume", checkpoint_resume),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS {name} ({detail}) [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {name} ({detail}) [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
