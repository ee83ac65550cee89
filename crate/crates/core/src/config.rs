//! Configuration tree, its YAML-subset text form, and schema validation.
//!
//! A config file has exactly one top-level mapping per [`ComponentKind`]
//! plus an optional integer `seed`. Each component mapping names its
//! implementation under `type`; every other key must be declared by that
//! implementation's parameter schema.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub const DEFAULT_SEED: u64 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Dataset,
    Objective,
    SearchSpace,
    Controller,
    WeightsManager,
    Evaluator,
    Trainer,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 7] = [
        ComponentKind::Dataset,
        ComponentKind::Objective,
        ComponentKind::SearchSpace,
        ComponentKind::Controller,
        ComponentKind::WeightsManager,
        ComponentKind::Evaluator,
        ComponentKind::Trainer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::Dataset => "dataset",
            ComponentKind::Objective => "objective",
            ComponentKind::SearchSpace => "search_space",
            ComponentKind::Controller => "controller",
            ComponentKind::WeightsManager => "weights_manager",
            ComponentKind::Evaluator => "evaluator",
            ComponentKind::Trainer => "trainer",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComponentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown component kind {s:?}")))
    }
}

/// A node of the configuration tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Seq(Vec<Value>),
    Map(IndexMap<String, Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Str(_) => "string",
            Value::Seq(_) => "sequence",
            Value::Map(_) => "mapping",
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            Value::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    fn from_yaml(v: serde_yaml::Value, path: &str) -> Result<Self> {
        use serde_yaml::Value as Y;
        Ok(match v {
            Y::Bool(b) => Value::Bool(b),
            Y::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Value::Int(i)
                } else {
                    let f = n.as_f64().unwrap_or(f64::NAN);
                    if !f.is_finite() {
                        return Err(invalid(path, "non-finite or out-of-range number"));
                    }
                    Value::Real(f)
                }
            }
            Y::String(s) => Value::Str(s),
            Y::Sequence(items) => Value::Seq(
                items
                    .into_iter()
                    .enumerate()
                    .map(|(k, item)| Value::from_yaml(item, &format!("{path}[{k}]")))
                    .collect::<Result<_>>()?,
            ),
            Y::Mapping(m) => {
                let mut out = IndexMap::new();
                for (k, item) in m {
                    let Y::String(key) = k else {
                        return Err(invalid(path, "mapping keys must be strings"));
                    };
                    let child = Value::from_yaml(item, &join(path, &key))?;
                    out.insert(key, child);
                }
                Value::Map(out)
            }
            Y::Null => return Err(invalid(path, "null values are not supported")),
            Y::Tagged(_) => return Err(invalid(path, "YAML tags are not supported")),
        })
    }

    fn to_yaml(&self) -> serde_yaml::Value {
        use serde_yaml::Value as Y;
        match self {
            Value::Bool(b) => Y::Bool(*b),
            Value::Int(i) => Y::Number((*i).into()),
            Value::Real(f) => Y::Number((*f).into()),
            Value::Str(s) => Y::String(s.clone()),
            Value::Seq(items) => Y::Sequence(items.iter().map(Value::to_yaml).collect()),
            Value::Map(m) => Y::Mapping(m.iter().map(|(k, v)| (Y::String(k.clone()), v.to_yaml())).collect()),
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn invalid(path: &str, msg: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_string(),
        msg: msg.into(),
    }
}

/// Declared type of a component parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    Bool,
    Int,
    Real,
    Str,
    IntList,
    StrList,
    RealMap,
}

impl ParamType {
    pub fn accepts(self, v: &Value) -> bool {
        match (self, v) {
            (ParamType::Bool, Value::Bool(_))
            | (ParamType::Int, Value::Int(_))
            | (ParamType::Real, Value::Real(_) | Value::Int(_))
            | (ParamType::Str, Value::Str(_)) => true,
            (ParamType::IntList, Value::Seq(items)) => items.iter().all(|i| matches!(i, Value::Int(_))),
            (ParamType::StrList, Value::Seq(items)) => items.iter().all(|i| matches!(i, Value::Str(_))),
            (ParamType::RealMap, Value::Map(m)) => m.values().all(|i| i.as_real().is_some()),
            _ => false,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ParamType::Bool => "bool",
            ParamType::Int => "int",
            ParamType::Real => "real",
            ParamType::Str => "string",
            ParamType::IntList => "list of int",
            ParamType::StrList => "list of string",
            ParamType::RealMap => "mapping of string to real",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub ty: ParamType,
    /// `None` marks an optional parameter without a default.
    pub default: Option<Value>,
    pub doc: &'static str,
}

impl ParamSpec {
    pub fn new(name: &'static str, ty: ParamType, default: impl Into<Value>, doc: &'static str) -> Self {
        Self {
            name,
            ty,
            default: Some(default.into()),
            doc,
        }
    }

    pub fn optional(name: &'static str, ty: ParamType, doc: &'static str) -> Self {
        Self {
            name,
            ty,
            default: None,
            doc,
        }
    }

    pub fn list(name: &'static str, ty: ParamType, default: Vec<Value>, doc: &'static str) -> Self {
        Self {
            name,
            ty,
            default: Some(Value::Seq(default)),
            doc,
        }
    }

    pub fn map(name: &'static str, default: &[(&str, f64)], doc: &'static str) -> Self {
        let m = default.iter().map(|(k, v)| (k.to_string(), Value::Real(*v))).collect();
        Self {
            name,
            ty: ParamType::RealMap,
            default: Some(Value::Map(m)),
            doc,
        }
    }
}

/// One component subtree: its `type` plus explicitly given parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentConfig {
    pub type_name: String,
    pub params: IndexMap<String, Value>,
}

impl ComponentConfig {
    pub fn new(type_name: impl Into<String>) -> Self {
        Self {
            type_name: type_name.into(),
            params: IndexMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: Option<i64>,
    pub components: IndexMap<ComponentKind, ComponentConfig>,
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.seed.map_or(DEFAULT_SEED, |s| s as u64)
    }

    pub fn component(&self, kind: ComponentKind) -> &ComponentConfig {
        &self.components[&kind]
    }

    pub fn component_mut(&mut self, kind: ComponentKind) -> &mut ComponentConfig {
        self.components.get_mut(&kind).expect("validated config has every kind")
    }

    /// Parses the text form and checks the top-level shape. Does not consult
    /// a registry; see [`Config::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let doc: serde_yaml::Value = serde_yaml::from_str(text).map_err(|e| Error::Parse {
            line: e.location().map_or(0, |l| l.line()),
            msg: e.to_string(),
        })?;
        let Value::Map(top) = Value::from_yaml(doc, "")? else {
            return Err(invalid("<root>", "top level must be a mapping"));
        };
        let mut seed = None;
        let mut components = IndexMap::new();
        for (key, value) in top {
            if key == "seed" {
                match value {
                    Value::Int(s) if s >= 0 => seed = Some(s),
                    other => return Err(invalid("seed", format!("expected non-negative int, got {}", other.type_name()))),
                }
                continue;
            }
            let kind: ComponentKind = key
                .parse()
                .map_err(|_| invalid(&key, "unknown top-level key (expected a component kind or `seed`)"))?;
            let Value::Map(mut body) = value else {
                return Err(invalid(&key, "component subtree must be a mapping"));
            };
            let type_name = match body.shift_remove("type") {
                Some(Value::Str(t)) => t,
                Some(other) => return Err(invalid(&join(&key, "type"), format!("expected string, got {}", other.type_name()))),
                None => return Err(invalid(&key, "missing mandatory `type` key")),
            };
            components.insert(kind, ComponentConfig { type_name, params: body });
        }
        for kind in ComponentKind::ALL {
            if !components.contains_key(&kind) {
                return Err(invalid(kind.name(), format!("missing component subtree `{kind}`")));
            }
        }
        components.sort_by(|a, _, b, _| a.cmp(b));
        Ok(Self { seed, components })
    }

    /// Fail-closed check of every component subtree against the registry.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        for (kind, comp) in &self.components {
            let reg = registry.lookup(*kind, &comp.type_name)?;
            for (key, value) in &comp.params {
                let path = format!("{kind}.{key}");
                let spec = reg
                    .schema
                    .iter()
                    .find(|s| s.name == key)
                    .ok_or_else(|| invalid(&path, format!("unknown key for {kind} type {:?}", comp.type_name)))?;
                if !spec.ty.accepts(value) {
                    return Err(invalid(
                        &path,
                        format!("expected {}, got {}", spec.ty.describe(), value.type_name()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_str_validated(text: &str, registry: &Registry) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate(registry)?;
        Ok(cfg)
    }

    pub fn to_yaml_string(&self) -> String {
        let mut top = serde_yaml::Mapping::new();
        if let Some(seed) = self.seed {
            top.insert("seed".into(), seed.into());
        }
        for (kind, comp) in &self.components {
            let mut body = serde_yaml::Mapping::new();
            body.insert("type".into(), comp.type_name.clone().into());
            for (k, v) in &comp.params {
                body.insert(k.clone().into(), v.to_yaml());
            }
            top.insert(kind.name().into(), serde_yaml::Value::Mapping(body));
        }
        serde_yaml::to_string(&serde_yaml::Value::Mapping(top)).expect("yaml serialization")
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path, registry: &Registry) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::from_str_validated(&text, registry)
}

/// Default component choice per kind for generated configs.
pub const SAMPLE_CHOICES: [(ComponentKind, &str); 7] = [
    (ComponentKind::Dataset, "synthetic_regression"),
    (ComponentKind::Objective, "weighted"),
    (ComponentKind::SearchSpace, "toy_mlp"),
    (ComponentKind::Controller, "evo"),
    (ComponentKind::WeightsManager, "none"),
    (ComponentKind::Evaluator, "tabular"),
    (ComponentKind::Trainer, "simple"),
];

/// A complete config listing every parameter of the chosen components with
/// its default and a comment. `choices` overrides [`SAMPLE_CHOICES`].
pub fn sample_config(registry: &Registry, choices: &[(ComponentKind, &str)], header: &str) -> Result<String> {
    let mut out = String::new();
    for line in header.lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!("seed: {DEFAULT_SEED}\n"));
    for (kind, default) in SAMPLE_CHOICES {
        let name = choices.iter().rev().find(|(k, _)| *k == kind).map_or(default, |(_, n)| n);
        let reg = registry.lookup(kind, name)?;
        out.push_str(&format!("\n# {}; choices: {}\n{kind}:\n  type: {name}\n", reg.doc, registry.names(kind).join(", ")));
        for spec in &reg.schema {
            let Some(default) = &spec.default else {
                out.push_str(&format!("  # {} ({}, optional)\n  # {}:\n", spec.doc, spec.ty.describe(), spec.name));
                continue;
            };
            let mut one = serde_yaml::Mapping::new();
            one.insert(spec.name.into(), default.to_yaml());
            let body = serde_yaml::to_string(&serde_yaml::Value::Mapping(one)).expect("yaml serialization");
            out.push_str(&format!("  # {}\n", spec.doc));
            for line in body.lines() {
                out.push_str(&format!("  {line}\n"));
            }
        }
    }
    Ok(out)
}

/// Typed read access to one component's parameters with schema defaults.
pub struct Params<'a> {
    kind: ComponentKind,
    given: &'a IndexMap<String, Value>,
    schema: &'a [ParamSpec],
}

impl<'a> Params<'a> {
    pub fn new(kind: ComponentKind, given: &'a IndexMap<String, Value>, schema: &'a [ParamSpec]) -> Self {
        Self { kind, given, schema }
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.given
            .get(key)
            .or_else(|| self.schema.iter().find(|s| s.name == key).and_then(|s| s.default.as_ref()))
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.kind)
    }

    fn require(&self, key: &str) -> Result<&Value> {
        self.raw(key).ok_or_else(|| invalid(&self.path(key), "required parameter not set"))
    }

    fn mismatch(&self, key: &str, want: &str, got: &Value) -> Error {
        invalid(&self.path(key), format!("expected {want}, got {}", got.type_name()))
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    pub fn int(&self, key: &str) -> Result<i64> {
        match self.require(key)? {
            Value::Int(v) => Ok(*v),
            other => Err(self.mismatch(key, "int", other)),
        }
    }

    /// Non-negative integer, optionally bounded below.
    pub fn count(&self, key: &str, min: usize) -> Result<usize> {
        let v = self.int(key)?;
        if v < min as i64 {
            return Err(invalid(&self.path(key), format!("must be >= {min}, got {v}")));
        }
        Ok(v as usize)
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.as_real().ok_or_else(|| self.mismatch(key, "real", v))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.require(key)? {
            Value::Bool(v) => Ok(*v),
            other => Err(self.mismatch(key, "bool", other)),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        match self.require(key)? {
            Value::Str(v) => Ok(v),
            other => Err(self.mismatch(key, "string", other)),
        }
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<&str>> {
        if self.has(key) {
            self.str(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn int_list(&self, key: &str) -> Result<Vec<i64>> {
        match self.require(key)? {
            Value::Seq(items) => items
                .iter()
                .map(|i| match i {
                    Value::Int(v) => Ok(*v),
                    other => Err(self.mismatch(key, "list of int", other)),
                })
                .collect(),
            other => Err(self.mismatch(key, "list of int", other)),
        }
    }

    pub fn str_list(&self, key: &str) -> Result<Vec<String>> {
        match self.require(key)? {
            Value::Seq(items) => items
                .iter()
                .map(|i| match i {
                    Value::Str(v) => Ok(v.clone()),
                    other => Err(self.mismatch(key, "list of string", other)),
                })
                .collect(),
            other => Err(self.mismatch(key, "list of string", other)),
        }
    }

    pub fn real_map(&self, key: &str) -> Result<IndexMap<String, f64>> {
        match self.require(key)? {
            Value::Map(m) => m
                .iter()
                .map(|(k, v)| {
                    v.as_real()
                        .map(|r| (k.clone(), r))
                        .ok_or_else(|| self.mismatch(key, "real", v))
                })
                .collect(),
            other => Err(self.mismatch(key, "mapping", other)),
        }
    }

    pub fn invalid(&self, key: &str, msg: impl Into<String>) -> Error {
        invalid(&self.path(key), msg)
    }
}
