//! Genotype files, derivation and batch evaluation of listed architectures.
//!
//! A genotype file holds a top-level `archs:` key followed by one entry per
//! line, either `- "<genotype>"` or `- {genotype: "<genotype>", note: "…"}`.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::controller::SampleMode;
use crate::error::{Error, Result};
use crate::rollout::REWARD;
use crate::session::Session;
use crate::space::SearchSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchEntry {
    pub line: usize,
    pub genotype: Vec<usize>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedArch {
    pub genotype: String,
    pub perf: BTreeMap<String, f64>,
}

impl DerivedArch {
    pub fn reward(&self) -> f64 {
        self.perf.get(REWARD).copied().unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchRecord {
    pub line: usize,
    pub genotype: String,
    pub perf: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalArchReport {
    pub records: Vec<ArchRecord>,
    pub errors: Vec<ArchError>,
}

fn entry_text(line: &str) -> std::result::Result<(String, Option<String>), String> {
    let item = line.trim_start().strip_prefix('-').ok_or("expected a `- <genotype>` list entry")?;
    let value: serde_yaml::Value = serde_yaml::from_str(item.trim()).map_err(|e| e.to_string())?;
    match value {
        serde_yaml::Value::String(s) => Ok((s, None)),
        serde_yaml::Value::Mapping(m) => {
            let mut genotype = None;
            let mut note = None;
            for (k, v) in m {
                match (k.as_str(), v) {
                    (Some("genotype"), serde_yaml::Value::String(s)) => genotype = Some(s),
                    (Some("note"), serde_yaml::Value::String(s)) => note = Some(s),
                    (Some(k), _) => return Err(format!("unexpected or non-string key {k:?}")),
                    (None, _) => return Err("non-string key".into()),
                }
            }
            Ok((genotype.ok_or("entry lacks `genotype`")?, note))
        }
        other => Err(format!("expected a string or mapping, got {other:?}")),
    }
}

/// Parses a genotype file line by line. Bad entries are reported with
/// their 1-based line and do not stop the rest; a missing `archs:` header
/// is an error for the whole file.
pub fn parse_archs(space: &SearchSpace, text: &str) -> Result<(Vec<ArchEntry>, Vec<ArchError>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    match lines.next() {
        Some((_, l)) if l.trim_end() == "archs:" => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                line: i + 1,
                msg: "expected `archs:`".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                msg: "empty genotype file".into(),
            })
        }
    }
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        match entry_text(l).and_then(|(g, note)| {
            space
                .parse_genotype(&g)
                .map(|genotype| ArchEntry { line, genotype, note })
                .map_err(|e| e.to_string())
        }) {
            Ok(e) => entries.push(e),
            Err(message) => errors.push(ArchError { line, message }),
        }
    }
    Ok((entries, errors))
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Genotype file text for `archs`, each with an optional note.
pub fn write_archs(archs: &[(String, Option<String>)]) -> String {
    let mut out = String::from("archs:\n");
    for (g, note) in archs {
        match note {
            Some(n) => writeln!(out, "  - {{genotype: {}, note: {}}}", quote(g), quote(n)),
            None => writeln!(out, "  - {}", quote(g)),
        }
        .expect("writing to a string");
    }
    out
}

/// Derive-mode sample of `n` rollouts, each evaluated once, sorted by
/// reward descending (stable).
pub fn derive(session: &mut Session, n: usize) -> Result<Vec<DerivedArch>> {
    let mut rollouts = session.sample(n, SampleMode::Derive)?;
    let mut out = Vec::with_capacity(n);
    for r in &mut rollouts {
        session.evaluate(r)?;
        out.push(DerivedArch {
            genotype: session.space.genotype_to_string(&r.genotype)?,
            perf: r.perf.clone(),
        });
    }
    out.sort_by(|a, b| b.reward().total_cmp(&a.reward()));
    Ok(out)
}

pub fn derived_to_archs(derived: &[DerivedArch]) -> String {
    let entries: Vec<(String, Option<String>)> = derived
        .iter()
        .map(|d| {
            let note = d.perf.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
            (d.genotype.clone(), Some(note))
        })
        .collect();
    write_archs(&entries)
}

/// Evaluates every parseable entry in input order; parse and evaluation
/// failures become per-line errors.
pub fn eval_arch(session: &Session, text: &str) -> Result<EvalArchReport> {
    let (entries, mut errors) = parse_archs(&session.space, text)?;
    let mut records = Vec::with_capacity(entries.len());
    for e in entries {
        let mut rollout = crate::rollout::DiscreteRollout::new(e.genotype);
        match session.evaluate(&mut rollout) {
            Ok(()) => records.push(ArchRecord {
                line: e.line,
                genotype: session.space.genotype_to_string(&rollout.genotype)?,
                perf: rollout.perf,
            }),
            Err(err) => errors.push(ArchError {
                line: e.line,
                message: err.to_string(),
            }),
        }
    }
    errors.sort_by_key(|e| e.line);
    Ok(EvalArchReport { records, errors })
}
