mod common;

use nasforge::config::ComponentConfig;
use nasforge::controller::SampleMode;
use nasforge::rollout::argmax_first;
use nasforge::{ComponentKind, Config, DifferentiableRollout, Error, Registry, Session};

use common::*;

fn cell_config() -> String {
    tabular_yaml(11, "{type: cell}", "{type: evo, population_size: 20}", "{type: simple}")
}

#[test]
fn validation_errors_name_the_offending_path() {
    let registry = Registry::with_builtins();
    let text = cell_config().replace("population_size: 20", "population_size: twenty");
    match Config::from_str_validated(&text, &registry) {
        Err(Error::Validation { path, .. }) => assert_eq!(path, "controller.population_size"),
        other => panic!("{other:?}"),
    }
    let text = cell_config().replace("population_size: 20", "populaton_size: 20");
    match Config::from_str_validated(&text, &registry) {
        Err(Error::Validation { path, .. }) => assert_eq!(path, "controller.populaton_size"),
        other => panic!("{other:?}"),
    }
    let text = cell_config().replace("{type: evo, population_size: 20}", "{population_size: 20}");
    assert!(matches!(Config::parse(&text), Err(Error::Validation { path, .. }) if path == "controller"));
    let text = cell_config().replace("seed: 11", "seed: -1");
    assert!(matches!(Config::parse(&text), Err(Error::Validation { path, .. }) if path == "seed"));
    assert!(matches!(Config::parse("seed: [1"), Err(Error::Parse { .. })));
}

#[test]
fn every_component_kind_is_required() {
    let full = cell_config();
    for kind in ComponentKind::ALL {
        let text: String = full.lines().filter(|l| !l.starts_with(&format!("{}:", kind.name()))).map(|l| format!("{l}\n")).collect();
        match Config::parse(&text) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, kind.name()),
            other => panic!("{kind}: {other:?}"),
        }
    }
    let extra = format!("{full}optimizer: {{type: sgd}}\n");
    assert!(Config::parse(&extra).is_err());
}

#[test]
fn unknown_component_lists_the_registered_names() {
    let text = cell_config().replace("type: evo", "type: bogus");
    let err = Session::from_yaml(&text, &Registry::with_builtins()).err().unwrap();
    match err {
        Error::UnknownComponent { kind, name, registered } => {
            assert_eq!(kind, ComponentKind::Controller);
            assert_eq!(name, "bogus");
            assert!(registered.contains(&"evo".to_string()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn build_errors_carry_the_component_kind() {
    let registry = Registry::with_builtins();
    let text = cell_config().replace("population_size: 20", "population_size: 0");
    let err = Session::from_yaml(&text, &registry).err().unwrap();
    assert!(matches!(err, Error::Component { kind: ComponentKind::Controller, .. }), "{err}");
    assert!(err.to_string().starts_with("controller: "));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let text = cell_config().replace("{type: tabular}", &format!("{{type: tabular, mode: file, path: {}}}", missing.display()));
    let err = Session::from_yaml(&text, &registry).err().unwrap();
    assert!(err.to_string().starts_with("evaluator: "), "{err}");
}

#[test]
fn registry_rejects_duplicates_and_reports_unknowns() {
    let mut registry = Registry::with_builtins();
    let evo = registry.lookup(ComponentKind::Controller, "evo").unwrap().clone();
    assert!(matches!(registry.register(evo.clone()), Err(Error::DuplicateComponent { .. })));
    let mut renamed = evo;
    renamed.name = "evo2".into();
    registry.register(renamed).unwrap();
    assert!(registry.names(ComponentKind::Controller).contains(&"evo2".to_string()));
    assert!(registry.lookup(ComponentKind::Evaluator, "evo").is_err());

    let mut empty = Registry::new();
    assert!(empty.lookup(ComponentKind::Controller, "evo").is_err());
    assert!(empty.iter().next().is_none());
    let reg = Registry::with_builtins().lookup(ComponentKind::Trainer, "simple").unwrap().clone();
    empty.register(reg).unwrap();
    assert_eq!(empty.names(ComponentKind::Trainer), vec!["simple".to_string()]);
}

#[test]
fn programmatic_config_matches_the_text_form() {
    let registry = Registry::with_builtins();
    let parsed = Config::from_str_validated(&cell_config(), &registry).unwrap();
    let mut edited = parsed.clone();
    *edited.component_mut(ComponentKind::Controller) = ComponentConfig::new("evo").with("population_size", 20i64);
    assert_eq!(edited, parsed);
    assert_eq!(parsed.seed(), 11);
    assert_eq!(parsed.component(ComponentKind::SearchSpace).type_name, "cell");
}

#[test]
fn same_seed_same_session() {
    for controller in ["{type: random}", "{type: sa}", "{type: evo}", "{type: rl}", "{type: predictor}"] {
        let text = tabular_yaml(12, "{type: toy_mlp}", controller, "{type: simple}");
        let (mut a, mut b) = (session(&text), session(&text));
        let ga: Vec<_> = a.sample(10, SampleMode::Explore).unwrap().into_iter().map(|r| r.genotype).collect();
        let gb: Vec<_> = b.sample(10, SampleMode::Explore).unwrap().into_iter().map(|r| r.genotype).collect();
        assert_eq!(ga, gb, "{controller}");
        let other = session(&tabular_yaml(13, "{type: toy_mlp}", controller, "{type: simple}"))
            .sample(10, SampleMode::Explore)
            .unwrap()
            .into_iter()
            .map(|r| r.genotype)
            .collect::<Vec<_>>();
        assert_ne!(ga, other, "{controller}");
    }
}

#[test]
fn discretize_takes_the_row_argmax() {
    let r = DifferentiableRollout::new(vec![vec![0.1, 2.0, -1.0], vec![3.0, 3.0], vec![-5.0]]);
    assert_eq!(r.discretize().genotype, vec![1, 0, 0]);
    let probs = r.probs();
    for row in &probs {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(probs[1], vec![0.5, 0.5]);
    assert_eq!(argmax_first(&[1.0, 4.0, 4.0, 2.0]), 1);
    assert_eq!(argmax_first(&[f64::NEG_INFINITY, -1.0]), 1);
}
