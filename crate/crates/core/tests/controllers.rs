use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nasforge::controller::sa::accept;
use nasforge::controller::{
    Controller, EvoController, EvoSettings, PredictorController, PredictorSettings, RandomController, RlController, RlSettings, SaController,
    SaSettings,
};
use nasforge::nn::{Activation, TensorArchive};
use nasforge::rng::{stream_rng, StreamRng};
use nasforge::space::{BlockwiseSpace, CellSpace, ToyMlpSpace};
use nasforge::{DiscreteRollout, SearchSpace};

fn cell() -> Arc<SearchSpace> {
    Arc::new(SearchSpace::Cell(
        CellSpace::new(2, vec!["sep_conv_3x3".into(), "max_pool_3x3".into(), "skip_connect".into()]).unwrap(),
    ))
}

fn controllers(space: &Arc<SearchSpace>, seed: u64) -> Vec<Box<dyn Controller>> {
    let predictor = PredictorSettings {
        candidates_per_round: 30,
        epochs: 5,
        ..PredictorSettings::default()
    };
    vec![
        Box::new(RandomController::new(space.clone(), seed)),
        Box::new(SaController::new(space.clone(), SaSettings::default(), seed).unwrap()),
        Box::new(EvoController::new(space.clone(), EvoSettings::default(), seed).unwrap()),
        Box::new(RlController::new(space.clone(), RlSettings::default(), seed).unwrap()),
        Box::new(PredictorController::new(space.clone(), predictor, seed).unwrap()),
    ]
}

/// Reward that prefers low decision indices.
fn score(g: &[usize]) -> f64 {
    1.0 / (1.0 + g.iter().sum::<usize>() as f64)
}

fn run(c: &mut dyn Controller, steps: usize, batch: usize, rng: &mut StreamRng) -> Vec<DiscreteRollout> {
    let mut seen = Vec::new();
    for _ in 0..steps {
        let mut rs = c.explore(batch, rng).unwrap();
        for r in &mut rs {
            r.perf.insert("reward".into(), score(&r.genotype));
        }
        c.step(&rs, rng).unwrap();
        seen.extend(rs);
    }
    seen
}

#[test]
fn every_strategy_emits_valid_genotypes() {
    let spaces = [
        cell(),
        Arc::new(SearchSpace::ToyMlp(ToyMlpSpace::default())),
        Arc::new(SearchSpace::Blockwise(BlockwiseSpace::default())),
    ];
    for space in &spaces {
        for mut c in controllers(space, 1) {
            let mut rng = stream_rng(1, "valid");
            let name = c.type_name();
            // Predictor proposals cost a surrogate pass each; fewer rounds.
            let (steps, batch) = if name == "predictor" { (40, 25) } else { (200, 50) };
            let seen = run(c.as_mut(), steps, batch, &mut rng);
            assert_eq!(seen.len(), steps * batch);
            for r in &seen {
                space.validate(&r.genotype).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
            for r in c.derive(10).unwrap() {
                space.validate(&r.genotype).unwrap();
            }
        }
    }
}

#[test]
fn explore_rejects_zero_and_step_needs_rewards() {
    let space = cell();
    for mut c in controllers(&space, 0) {
        let mut rng = stream_rng(0, "x");
        assert!(c.explore(0, &mut rng).is_err());
        let rs = c.explore(2, &mut rng).unwrap();
        assert!(c.step(&rs, &mut rng).is_err(), "{}", c.type_name());
    }
}

#[test]
fn sa_acceptance_rate_matches_metropolis() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let hits = (0..n).filter(|_| accept(-0.5, 1.0, &mut rng)).count() as f64;
    let p = (-0.5f64).exp();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 3.0 * sigma, "rate {} vs {p}", hits / n as f64);
    assert!((p - 0.6065).abs() < 1e-4);
    assert!(accept(0.1, 1e-9, &mut rng));
}

#[test]
fn sa_temperature_strictly_decreases() {
    let space = cell();
    let mut sa = SaController::new(space, SaSettings::with_reward_scale(1.0), 2).unwrap();
    assert!((sa.state().temperature - 0.1).abs() < 1e-15);
    let mut rng = stream_rng(2, "sa");
    let mut last = sa.state().temperature;
    for _ in 0..500 {
        run(&mut sa, 1, 1, &mut rng);
        let t = sa.state().temperature;
        assert!(t > 0.0 && t < last);
        last = t;
    }
    assert!(SaController::new(cell(), SaSettings { initial_temperature: 1.0, cooling: 1.0 }, 0).is_err());
}

#[test]
fn evo_population_is_capped_and_best_is_monotone() {
    let space = cell();
    let settings = EvoSettings {
        population_size: 10,
        tournament_size: 3,
    };
    let mut evo = EvoController::new(space, settings, 4).unwrap();
    let mut rng = stream_rng(4, "evo");
    let mut best = f64::NEG_INFINITY;
    for _ in 0..300 {
        run(&mut evo, 1, 1, &mut rng);
        assert!(evo.state().population.len() <= 10);
        let b = evo.state().best.best().unwrap().1;
        assert!(b >= best);
        best = b;
    }
    let births: Vec<u64> = evo.state().population.iter().map(|m| m.birth).collect();
    assert_eq!(births, (290..300).collect::<Vec<_>>());
}

#[test]
fn evo_evicts_the_oldest_member() {
    let space = cell();
    let settings = EvoSettings {
        population_size: 3,
        tournament_size: 2,
    };
    let mut evo = EvoController::new(space.clone(), settings, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..3 {
        evo.insert(space.random_genotype(&mut rng), 0.5);
    }
    evo.insert(space.random_genotype(&mut rng), 0.9);
    let births: Vec<u64> = evo.state().population.iter().map(|m| m.birth).collect();
    assert_eq!(births, vec![1, 2, 3]);
}

#[test]
fn cold_start_is_uniform_for_every_strategy() {
    // Before any step every strategy samples like the random controller.
    let space = Arc::new(SearchSpace::ToyMlp(ToyMlpSpace::new(1, vec![1, 2, 3, 4], vec![Activation::Relu]).unwrap()));
    for mut c in controllers(&space, 9) {
        let mut rng = stream_rng(9, "cold");
        let rs = c.explore(4000, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for r in &rs {
            counts[r.genotype[0]] += 1;
        }
        for k in counts {
            assert!((k as f64 - 1000.0).abs() < 4.0 * (4000.0f64 * 0.25 * 0.75).sqrt(), "{}: {counts:?}", c.type_name());
        }
    }
}

#[test]
fn rl_derive_is_deterministic_and_leaves_state_alone() {
    let space = cell();
    let mut rl = RlController::new(space, RlSettings::default(), 5).unwrap();
    let mut rng = stream_rng(5, "rl");
    run(&mut rl, 20, 4, &mut rng);
    let before = rl.save().unwrap().to_bytes();
    let a = rl.derive(3).unwrap();
    let b = rl.derive(3).unwrap();
    assert_eq!(a, b);
    assert_eq!(rl.save().unwrap().to_bytes(), before);
}

#[test]
fn rl_bandit_converges() {
    let space = Arc::new(SearchSpace::ToyMlp(ToyMlpSpace::new(1, vec![8, 16], vec![Activation::Relu]).unwrap()));
    let settings = RlSettings {
        learning_rate: 0.01,
        ..RlSettings::default()
    };
    let mut rl = RlController::new(space, settings, 0).unwrap();
    let mut rng = stream_rng(0, "bandit");
    for _ in 0..2000 {
        let mut r = rl.explore(1, &mut rng).unwrap();
        let reward = if r[0].genotype[0] == 1 { 1.0 } else { 0.0 };
        r[0].perf.insert("reward".into(), reward);
        rl.step(&r, &mut rng).unwrap();
    }
    assert!(rl.probs(&[1, 0]).unwrap()[0][1] > 0.9);
    assert_eq!(rl.derive(1).unwrap()[0].genotype, vec![1, 0]);
}

#[test]
fn save_load_preserves_derive_for_all_strategies() {
    let space = cell();
    for (mut trained, mut fresh) in controllers(&space, 6).into_iter().zip(controllers(&space, 6)) {
        let mut rng = stream_rng(6, "io");
        run(trained.as_mut(), 10, 5, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        trained.save().unwrap().save(&path).unwrap();
        fresh.load(&TensorArchive::load(&path).unwrap()).unwrap();
        assert_eq!(trained.derive(5).unwrap(), fresh.derive(5).unwrap(), "{}", trained.type_name());
        assert_eq!(trained.save().unwrap().to_bytes(), fresh.save().unwrap().to_bytes());
    }
}

#[test]
fn loading_another_kind_fails_and_keeps_state() {
    let space = cell();
    let mut rng = stream_rng(7, "kind");
    let mut sa = SaController::new(space.clone(), SaSettings::default(), 7).unwrap();
    run(&mut sa, 5, 2, &mut rng);
    let mut evo = EvoController::new(space, EvoSettings::default(), 7).unwrap();
    run(&mut evo, 5, 2, &mut rng);
    let before = evo.save().unwrap().to_bytes();
    assert!(evo.load(&sa.save().unwrap()).is_err());
    assert_eq!(evo.save().unwrap().to_bytes(), before);
}

#[test]
fn truncated_checkpoint_is_rejected_and_state_kept() {
    let space = cell();
    for mut c in controllers(&space, 8) {
        let mut rng = stream_rng(8, "trunc");
        run(c.as_mut(), 5, 3, &mut rng);
        let bytes = c.save().unwrap().to_bytes();
        for cut in [0, 4, bytes.len() / 2, bytes.len() - 1] {
            assert!(TensorArchive::from_bytes(&bytes[..cut]).is_err(), "{} cut at {cut}", c.type_name());
        }
        let mut corrupt = bytes.clone();
        let mid = corrupt.len() / 2;
        corrupt[mid] ^= 0xff;
        assert!(TensorArchive::from_bytes(&corrupt).is_err());
        assert_eq!(c.save().unwrap().to_bytes(), bytes);
    }
}

#[test]
fn predictor_surrogate_halves_its_training_error() {
    let space = Arc::new(SearchSpace::ToyMlp(ToyMlpSpace::default()));
    let settings = PredictorSettings {
        epochs: 200,
        ..PredictorSettings::default()
    };
    let mut pred = PredictorController::new(space.clone(), settings, 1).unwrap();
    let mut rng = stream_rng(1, "pred");
    let mut rs: Vec<DiscreteRollout> = (0..200).map(|_| space.random_rollout(&mut rng)).collect();
    for r in &mut rs {
        let x = space.one_hot(&r.genotype);
        let y: f64 = x.iter().enumerate().map(|(i, v)| v * (i as f64 * 0.1 - 0.4)).sum();
        r.perf.insert("reward".into(), y);
    }
    let before = pred.surrogate().mse(&rs.iter().map(|r| space.one_hot(&r.genotype)).collect::<Vec<_>>(), &rs.iter().map(|r| r.reward().unwrap()).collect::<Vec<_>>()).unwrap();
    pred.step(&rs, &mut rng).unwrap();
    let after = pred.surrogate_mse().unwrap();
    assert!(after <= 0.5 * before, "{before} -> {after}");
}

#[test]
fn predictor_proposals_are_unseen_after_training() {
    let space = cell();
    let mut pred = PredictorController::new(space.clone(), PredictorSettings::default(), 2).unwrap();
    let mut rng = stream_rng(2, "pred");
    let seen = run(&mut pred, 4, 5, &mut rng);
    let seen: std::collections::HashSet<Vec<usize>> = seen.iter().map(|r| space.canonicalize(&r.genotype)).collect();
    for r in pred.explore(10, &mut rng).unwrap() {
        assert!(!seen.contains(&space.canonicalize(&r.genotype)));
    }
}
