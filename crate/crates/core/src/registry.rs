//! `(kind, name)` → constructor table with per-component parameter schemas.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::config::{ComponentKind, ParamSpec, ParamType, Params, Value};
use crate::controller::{
    Controller, EvoController, EvoSettings, PredictorController, PredictorSettings, RandomController, RlController,
    RlSettings, SaController, SaSettings,
};
use crate::error::{Error, Result};
use crate::evaluator::{
    Evaluator, NullWeightsManager, Objective, RegressionTask, SupernetEvaluator, SupernetManager, SyntheticOracle,
    TabularEvaluator, TabularSource, WeightsManager,
};
use crate::hwcost::{DeviceKind, DeviceSimulator};
use crate::nn::Activation;
use crate::orchestrator::{TrainerMode, TrainerSettings};
use crate::rng::{derive_seed, stream_rng};
use crate::space::{BlockwiseSpace, CellSpace, SearchSpace, StageLayout, ToyMlpSpace};

/// A constructed component.
pub enum Component {
    Dataset(Arc<RegressionTask>),
    Objective(Arc<Objective>),
    SearchSpace(Arc<SearchSpace>),
    Controller(Box<dyn Controller>),
    WeightsManager(Arc<dyn WeightsManager>),
    Evaluator(Box<dyn Evaluator>),
    Trainer(TrainerSettings),
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Component::Dataset(_) => "Dataset",
            Component::Objective(_) => "Objective",
            Component::SearchSpace(_) => "SearchSpace",
            Component::Controller(c) => c.type_name(),
            Component::WeightsManager(w) => w.type_name(),
            Component::Evaluator(e) => e.type_name(),
            Component::Trainer(_) => "Trainer",
        };
        write!(f, "Component({name})")
    }
}

/// Components built so far, in build order, plus the session seed.
#[derive(Default)]
pub struct BuildContext {
    pub seed: u64,
    pub search_space: Option<Arc<SearchSpace>>,
    pub dataset: Option<Arc<RegressionTask>>,
    pub objective: Option<Arc<Objective>>,
    pub weights_manager: Option<Arc<dyn WeightsManager>>,
}

impl BuildContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    /// Seed of the independent stream for `label`.
    pub fn stream_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    pub fn space(&self) -> Result<Arc<SearchSpace>> {
        self.search_space.clone().ok_or_else(|| missing("search_space"))
    }

    pub fn task(&self) -> Result<Arc<RegressionTask>> {
        self.dataset.clone().ok_or_else(|| missing("dataset"))
    }

    pub fn objective(&self) -> Result<Arc<Objective>> {
        self.objective.clone().ok_or_else(|| missing("objective"))
    }

    pub fn manager(&self) -> Result<Arc<dyn WeightsManager>> {
        self.weights_manager.clone().ok_or_else(|| missing("weights_manager"))
    }
}

fn missing(kind: &str) -> Error {
    Error::InvalidArgument(format!("{kind} has not been built yet"))
}

pub type Builder = Arc<dyn Fn(&Params<'_>, &BuildContext) -> Result<Component> + Send + Sync>;

#[derive(Clone)]
pub struct Registration {
    pub kind: ComponentKind,
    pub name: String,
    pub doc: &'static str,
    pub schema: Vec<ParamSpec>,
    pub build: Builder,
}

impl fmt::Debug for Registration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registration")
            .field("kind", &self.kind)
            .field("name", &self.name)
            .field("schema", &self.schema.iter().map(|s| s.name).collect::<Vec<_>>())
            .finish()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Registry {
    entries: BTreeMap<(ComponentKind, String), Registration>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        register_builtins(&mut r).expect("builtin names are unique");
        r
    }

    pub fn register(&mut self, reg: Registration) -> Result<()> {
        let key = (reg.kind, reg.name.clone());
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateComponent {
                kind: reg.kind,
                name: reg.name,
            });
        }
        self.entries.insert(key, reg);
        Ok(())
    }

    pub fn lookup(&self, kind: ComponentKind, name: &str) -> Result<&Registration> {
        self.entries
            .get(&(kind, name.to_string()))
            .ok_or_else(|| Error::UnknownComponent {
                kind,
                name: name.to_string(),
                registered: self.names(kind),
            })
    }

    pub fn names(&self, kind: ComponentKind) -> Vec<String> {
        self.entries.keys().filter(|(k, _)| *k == kind).map(|(_, n)| n.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Registration> {
        self.entries.values()
    }
}

fn reg(
    kind: ComponentKind,
    name: &str,
    doc: &'static str,
    schema: Vec<ParamSpec>,
    build: impl Fn(&Params<'_>, &BuildContext) -> Result<Component> + Send + Sync + 'static,
) -> Registration {
    Registration {
        kind,
        name: name.to_string(),
        doc,
        schema,
        build: Arc::new(build),
    }
}

fn ints(v: &[i64]) -> Vec<Value> {
    v.iter().map(|&i| Value::Int(i)).collect()
}

fn strs(v: &[&str]) -> Vec<Value> {
    v.iter().map(|&s| Value::from(s)).collect()
}

fn positive_list(p: &Params<'_>, key: &str) -> Result<Vec<usize>> {
    p.int_list(key)?
        .into_iter()
        .map(|v| usize::try_from(v).ok().filter(|&v| v > 0).ok_or_else(|| p.invalid(key, "entries must be positive")))
        .collect()
}

fn space_component(space: SearchSpace) -> Result<Component> {
    Ok(Component::SearchSpace(Arc::new(space)))
}

fn register_builtins(r: &mut Registry) -> Result<()> {
    use ComponentKind as K;
    use ParamType as T;

    r.register(reg(
        K::Dataset,
        "synthetic_regression",
        "y = sin(W x) with seed-derived W; inputs uniform on [-1, 1]",
        vec![
            ParamSpec::new("input_dim", T::Int, 4i64, "input features"),
            ParamSpec::new("output_dim", T::Int, 2i64, "regression targets"),
            ParamSpec::new("train_size", T::Int, 1024i64, "training points"),
            ParamSpec::new("test_size", T::Int, 256i64, "held-out points"),
            ParamSpec::new("batch_size", T::Int, 32i64, "minibatch size"),
            ParamSpec::new("frequency", T::Real, 1.5, "scale of W"),
        ],
        |p, ctx| {
            let task = RegressionTask::new(
                p.count("input_dim", 1)?,
                p.count("output_dim", 1)?,
                p.count("train_size", 1)?,
                p.count("test_size", 1)?,
                p.count("batch_size", 1)?,
                p.real("frequency")?,
                ctx.stream_seed("dataset"),
            )?;
            Ok(Component::Dataset(Arc::new(task)))
        },
    ))?;

    r.register(reg(
        K::Objective,
        "weighted",
        "reward = sum of weight * metric; any violated upper bound gives the penalty",
        vec![
            ParamSpec::map("weights", &[("acc", 1.0)], "metric coefficients"),
            ParamSpec::map("constraints", &[], "metric upper bounds"),
            ParamSpec::new("penalty", T::Real, -1.0, "reward when a constraint is violated"),
        ],
        |p, _| {
            let o = Objective::new(p.real_map("weights")?, p.real_map("constraints")?, p.real("penalty")?)?;
            Ok(Component::Objective(Arc::new(o)))
        },
    ))?;

    r.register(reg(
        K::SearchSpace,
        "cell",
        "cell of intermediate nodes, each with two (predecessor, op) edges",
        vec![
            ParamSpec::new("num_intermediate_nodes", T::Int, 2i64, "intermediate nodes"),
            ParamSpec::list("ops", T::StrList, strs(&["sep_conv_3x3", "max_pool_3x3", "skip_connect"]), "op names"),
        ],
        |p, _| space_component(SearchSpace::Cell(CellSpace::new(p.count("num_intermediate_nodes", 1)?, p.str_list("ops")?)?)),
    ))?;

    r.register(reg(
        K::SearchSpace,
        "blockwise",
        "stages of inverted-bottleneck blocks with depth, expansion and kernel choices",
        vec![
            ParamSpec::new("num_stages", T::Int, 5i64, "stages, taking the first n default stage layouts"),
            ParamSpec::list("depth_choices", T::IntList, ints(&[2, 3, 4]), "blocks per stage"),
            ParamSpec::list("expansion_choices", T::IntList, ints(&[3, 4, 6]), "expansion ratios"),
            ParamSpec::list("kernel_choices", T::IntList, ints(&[3, 5, 7]), "kernel sizes"),
            ParamSpec::list("stage_channels", T::IntList, vec![], "override per-stage output channels"),
            ParamSpec::list("stage_strides", T::IntList, vec![], "override per-stage strides"),
            ParamSpec::new("input_resolution", T::Int, 32i64, "input height and width"),
            ParamSpec::new("stem_channels", T::Int, 16i64, "channels entering the first stage"),
        ],
        |p, _| {
            let n = p.count("num_stages", 1)?;
            let mut s = BlockwiseSpace::with_stages(n);
            let channels = positive_list(p, "stage_channels")?;
            let strides = positive_list(p, "stage_strides")?;
            if !channels.is_empty() || !strides.is_empty() || s.stages.len() < n {
                if channels.len() != n || strides.len() != n {
                    return Err(p.invalid(
                        "stage_channels",
                        format!("beyond the defaults, stage_channels and stage_strides must both list {n} entries"),
                    ));
                }
                s.stages = channels
                    .into_iter()
                    .zip(strides)
                    .map(|(channels, stride)| StageLayout { channels, stride })
                    .collect();
            }
            s.depth_choices = positive_list(p, "depth_choices")?;
            s.expansion_choices = positive_list(p, "expansion_choices")?;
            s.kernel_choices = positive_list(p, "kernel_choices")?;
            s.input_resolution = p.count("input_resolution", 1)?;
            s.stem_channels = p.count("stem_channels", 1)?;
            space_component(SearchSpace::Blockwise(s.validated()?))
        },
    ))?;

    r.register(reg(
        K::SearchSpace,
        "toy_mlp",
        "per-layer width and activation of a small MLP",
        vec![
            ParamSpec::new("num_layers", T::Int, 3i64, "hidden layers"),
            ParamSpec::list("width_choices", T::IntList, ints(&[8, 16, 32]), "hidden widths"),
            ParamSpec::list("activation_choices", T::StrList, strs(&["relu", "tanh"]), "activations"),
        ],
        |p, _| {
            let acts = p
                .str_list("activation_choices")?
                .iter()
                .map(|a| Activation::from_name(a).ok_or_else(|| p.invalid("activation_choices", format!("unknown activation {a:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let s = ToyMlpSpace::new(p.count("num_layers", 1)?, positive_list(p, "width_choices")?, acts)?;
            space_component(SearchSpace::ToyMlp(s))
        },
    ))?;

    r.register(reg(K::Controller, "random", "uniform sampling; derive returns the best seen", vec![], |_, ctx| {
        Ok(Component::Controller(Box::new(RandomController::new(ctx.space()?, ctx.stream_seed("controller")))))
    }))?;

    r.register(reg(
        K::Controller,
        "sa",
        "simulated annealing with one mutation per proposal",
        vec![
            ParamSpec::new("reward_scale", T::Real, 1.0, "typical reward magnitude; sets the default temperature"),
            ParamSpec::optional("initial_temperature", T::Real, "overrides 0.1 * reward_scale"),
            ParamSpec::new("cooling", T::Real, 0.98, "temperature factor per step"),
        ],
        |p, ctx| {
            let mut s = SaSettings::with_reward_scale(p.real("reward_scale")?);
            if p.has("initial_temperature") {
                s.initial_temperature = p.real("initial_temperature")?;
            }
            s.cooling = p.real("cooling")?;
            Ok(Component::Controller(Box::new(SaController::new(ctx.space()?, s, ctx.stream_seed("controller"))?)))
        },
    ))?;

    let evo = EvoSettings::default();
    r.register(reg(
        K::Controller,
        "evo",
        "aging evolution with tournament selection",
        vec![
            ParamSpec::new("population_size", T::Int, evo.population_size as i64, "population capacity"),
            ParamSpec::new("tournament_size", T::Int, evo.tournament_size as i64, "tournament sample size"),
        ],
        |p, ctx| {
            let s = EvoSettings {
                population_size: p.count("population_size", 1)?,
                tournament_size: p.count("tournament_size", 1)?,
            };
            Ok(Component::Controller(Box::new(EvoController::new(ctx.space()?, s, ctx.stream_seed("controller"))?)))
        },
    ))?;

    let rl = RlSettings::default();
    r.register(reg(
        K::Controller,
        "rl",
        "LSTM policy trained with REINFORCE and a moving-average baseline",
        vec![
            ParamSpec::new("hidden_size", T::Int, rl.hidden_size as i64, "LSTM hidden units"),
            ParamSpec::new("embedding_size", T::Int, rl.embedding_size as i64, "decision embedding size"),
            ParamSpec::new("learning_rate", T::Real, rl.learning_rate, "Adam learning rate"),
            ParamSpec::new("entropy_weight", T::Real, rl.entropy_weight, "entropy bonus coefficient"),
            ParamSpec::new("baseline_decay", T::Real, rl.baseline_decay, "baseline moving-average decay"),
        ],
        |p, ctx| {
            let s = RlSettings {
                hidden_size: p.count("hidden_size", 1)?,
                embedding_size: p.count("embedding_size", 1)?,
                learning_rate: p.real("learning_rate")?,
                entropy_weight: p.real("entropy_weight")?,
                baseline_decay: p.real("baseline_decay")?,
            };
            Ok(Component::Controller(Box::new(RlController::new(ctx.space()?, s, ctx.stream_seed("controller"))?)))
        },
    ))?;

    let pr = PredictorSettings::default();
    r.register(reg(
        K::Controller,
        "predictor",
        "MLP surrogate ranks random candidates; the top scored are proposed",
        vec![
            ParamSpec::new("candidates_per_round", T::Int, pr.candidates_per_round as i64, "random candidates scored per round"),
            ParamSpec::new("top_k", T::Int, pr.top_k as i64, "proposals taken per round"),
            ParamSpec::new("hidden_size", T::Int, pr.hidden_size as i64, "surrogate hidden units"),
            ParamSpec::new("epochs", T::Int, pr.epochs as i64, "surrogate epochs per step"),
            ParamSpec::new("learning_rate", T::Real, pr.learning_rate, "surrogate Adam learning rate"),
            ParamSpec::new("batch_size", T::Int, pr.batch_size as i64, "surrogate minibatch size"),
        ],
        |p, ctx| {
            let s = PredictorSettings {
                candidates_per_round: p.count("candidates_per_round", 1)?,
                top_k: p.count("top_k", 1)?,
                hidden_size: p.count("hidden_size", 1)?,
                epochs: p.count("epochs", 0)?,
                learning_rate: p.real("learning_rate")?,
                batch_size: p.count("batch_size", 1)?,
            };
            Ok(Component::Controller(Box::new(PredictorController::new(ctx.space()?, s, ctx.stream_seed("controller"))?)))
        },
    ))?;

    r.register(reg(K::WeightsManager, "none", "attaches no candidate", vec![], |_, ctx| {
        Ok(Component::WeightsManager(Arc::new(NullWeightsManager::new(ctx.space()?))))
    }))?;

    r.register(reg(
        K::WeightsManager,
        "supernet",
        "shared maximal-width MLP weights; candidates are leading-unit slices",
        vec![],
        |_, ctx| {
            let mut rng = stream_rng(ctx.seed, "weights_manager");
            let m = SupernetManager::new(ctx.space()?, ctx.task()?.as_ref(), &mut rng)?;
            Ok(Component::WeightsManager(Arc::new(m)))
        },
    ))?;

    r.register(reg(
        K::Evaluator,
        "tabular",
        "accuracy from a synthetic oracle or a genotype,accuracy CSV file",
        vec![
            ParamSpec::new("mode", T::Str, "synthetic", "synthetic or file"),
            ParamSpec::optional("path", T::Str, "CSV table for file mode"),
            ParamSpec::optional("optimum", T::Str, "optimum genotype string for the synthetic oracle"),
            ParamSpec::new("interaction", T::Real, 0.1, "weight of the adjacent-mismatch term"),
            ParamSpec::new("hardware", T::Str, "none", "none, gpu_like or fpga_like (blockwise spaces)"),
        ],
        |p, ctx| {
            let space = ctx.space()?;
            let objective = ctx.objective()?;
            let mut e = match p.str("mode")? {
                "synthetic" => {
                    let optimum = p.opt_str("optimum")?.map(|s| space.parse_genotype(s)).transpose()?;
                    let oracle =
                        SyntheticOracle::new(&space, optimum, p.real("interaction")?, ctx.stream_seed("evaluator"))?;
                    TabularEvaluator::new(space, objective, TabularSource::Synthetic(oracle))
                }
                "file" => {
                    let path = p.opt_str("path")?.ok_or_else(|| p.invalid("path", "file mode needs a path"))?;
                    TabularEvaluator::from_file(space, objective, std::path::Path::new(path))?
                }
                other => return Err(p.invalid("mode", format!("expected synthetic or file, got {other:?}"))),
            };
            match p.str("hardware")? {
                "none" => {}
                name => {
                    let kind = DeviceKind::from_name(name)
                        .ok_or_else(|| p.invalid("hardware", format!("unknown device {name:?}")))?;
                    e = e.with_hardware(DeviceSimulator::new(kind, ctx.stream_seed("device")))?;
                }
            }
            Ok(Component::Evaluator(Box::new(e)))
        },
    ))?;

    r.register(reg(
        K::Evaluator,
        "supernet",
        "acc = 1 - MSE / Var(y) on held-out data; updates train the shared weights",
        vec![
            ParamSpec::new("learning_rate", T::Real, 0.05, "SGD learning rate for shared weights"),
            ParamSpec::new("samples_per_update", T::Int, 4i64, "candidates trained per update"),
        ],
        |p, ctx| {
            let manager = ctx.manager()?;
            let e = SupernetEvaluator::new(
                manager.as_ref(),
                ctx.objective()?,
                ctx.task()?,
                p.real("learning_rate")?,
                p.count("samples_per_update", 1)?,
            )?;
            Ok(Component::Evaluator(Box::new(e)))
        },
    ))?;

    let trainer_schema = |extra: Vec<ParamSpec>| {
        let d = TrainerSettings::default();
        let mut v = vec![
            ParamSpec::new("epochs", T::Int, d.epochs as i64, "search epochs"),
            ParamSpec::new(
                "controller_samples_per_epoch",
                T::Int,
                d.controller_samples_per_epoch as i64,
                "evaluated rollouts per epoch",
            ),
            ParamSpec::new(
                "evaluator_updates_per_epoch",
                T::Int,
                d.evaluator_updates_per_epoch as i64,
                "evaluator updates per epoch",
            ),
            ParamSpec::new("derive_count", T::Int, d.derive_count as i64, "architectures emitted by derive"),
            ParamSpec::new("checkpoint_every", T::Int, d.checkpoint_every as i64, "epochs between checkpoints; 0 disables"),
            ParamSpec::new("final_steps", T::Int, d.final_steps as i64, "optimizer steps of final training"),
            ParamSpec::new("final_learning_rate", T::Real, d.final_learning_rate, "Adam learning rate of final training"),
        ];
        v.extend(extra);
        v
    };
    r.register(reg(
        K::Trainer,
        "simple",
        "sample, assemble, evaluate and step one rollout at a time",
        trainer_schema(vec![]),
        |p, _| Ok(Component::Trainer(trainer_settings(p, TrainerMode::Simple)?)),
    ))?;
    r.register(reg(
        K::Trainer,
        "async",
        "worker threads evaluate concurrently; steps follow completion order",
        trainer_schema(vec![
            ParamSpec::new("num_workers", T::Int, 4i64, "evaluation threads"),
            ParamSpec::new("max_inflight", T::Int, 8i64, "dispatched but unreturned rollouts"),
        ]),
        |p, _| {
            let mode = TrainerMode::Async {
                num_workers: p.count("num_workers", 1)?,
                max_inflight: p.count("max_inflight", 1)?,
            };
            Ok(Component::Trainer(trainer_settings(p, mode)?))
        },
    ))?;
    Ok(())
}

fn trainer_settings(p: &Params<'_>, mode: TrainerMode) -> Result<TrainerSettings> {
    Ok(TrainerSettings {
        mode,
        epochs: p.count("epochs", 1)?,
        controller_samples_per_epoch: p.count("controller_samples_per_epoch", 0)?,
        evaluator_updates_per_epoch: p.count("evaluator_updates_per_epoch", 0)?,
        derive_count: p.count("derive_count", 1)?,
        checkpoint_every: p.count("checkpoint_every", 0)?,
        final_steps: p.count("final_steps", 0)?,
        final_learning_rate: p.real("final_learning_rate")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_registration_fails() {
        let mut r = Registry::with_builtins();
        let again = r.lookup(ComponentKind::Controller, "random").unwrap().clone();
        assert!(matches!(r.register(again), Err(Error::DuplicateComponent { .. })));
    }

    #[test]
    fn unknown_lookup_lists_known_names() {
        let r = Registry::with_builtins();
        let msg = r.lookup(ComponentKind::Controller, "nonexistent").unwrap_err().to_string();
        for name in ["random", "sa", "evo", "rl", "predictor"] {
            assert!(msg.contains(name), "{msg}");
        }
    }
}
