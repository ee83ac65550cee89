use std::fmt::Write as _;
use std::path::Path;

use super::dataset::{build_cost_dataset, CostDataset, CostSample};
use super::device::DeviceSimulator;
use super::models::{fit, CostModel, CostModelKind, FitReport, TrainSettings};
use super::profiling::{profile_primitives, ProfilingTable};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::space::BlockwiseSpace;

/// Root-mean-squared error in the metric's native units.
pub fn evaluate_rmse(model: &CostModel, test: &[&CostSample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("empty test split".into()));
    }
    let mut acc = 0.0;
    for s in test {
        acc += (model.predict(&s.features)? - s.cost).powi(2);
    }
    Ok((acc / test.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub rmse: f64,
    /// `rmse(sum) / rmse(model)`; above 1 means better than naive addition.
    pub improvement_vs_sum: f64,
    /// `(prediction, truth)` per test sample.
    pub scatter: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub device: String,
    pub metric: String,
    pub rows: Vec<ReportRow>,
}

impl CostReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("device: {}  metric: {}\n", self.device, self.metric);
        let _ = writeln!(out, "{:<10} {:>12} {:>20}", "model", "rmse", "improvement_vs_sum");
        for r in &self.rows {
            let _ = writeln!(out, "{:<10} {:>12.6} {:>19.3}x", r.model, r.rmse, r.improvement_vs_sum);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "rmse", "improvement_vs_sum"])?;
        for r in &self.rows {
            w.write_record([r.model.clone(), format!("{}", r.rmse), format!("{}", r.improvement_vs_sum)])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?).unwrap())
    }

    pub fn scatter_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "prediction", "truth"])?;
        for r in &self.rows {
            for (p, t) in &r.scatter {
                w.write_record([r.model.clone(), format!("{p}"), format!("{t}")])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?).unwrap())
    }
}

/// Test-split rMSE of every model and its ratio to the naive sum.
pub fn compare_report(models: &[CostModel], dataset: &CostDataset, device: &str, metric: &str) -> Result<CostReport> {
    let test = dataset.test_samples();
    let baseline = evaluate_rmse(&CostModel::Sum, &test)?;
    let rows = models
        .iter()
        .map(|m| {
            let rmse = evaluate_rmse(m, &test)?;
            let scatter = test
                .iter()
                .map(|s| Ok((m.predict(&s.features)?, s.cost)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ReportRow {
                model: m.kind().name().to_string(),
                rmse,
                improvement_vs_sum: if rmse > 0.0 { baseline / rmse } else { f64::INFINITY },
                scatter,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport {
        device: device.to_string(),
        metric: metric.to_string(),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub table: ProfilingTable,
    pub dataset: CostDataset,
    pub models: Vec<CostModel>,
    pub fits: Vec<FitReport>,
    pub report: CostReport,
}

/// Profile → dataset → fit every requested model → report, all seeded
/// from `seed`.
pub fn run_pipeline(
    space: &BlockwiseSpace,
    device: &DeviceSimulator,
    kinds: &[CostModelKind],
    n_train: usize,
    n_test: usize,
    settings: &TrainSettings,
    seed: u64,
) -> Result<PipelineOutput> {
    let table = profile_primitives(space, device);
    let mut rng = stream_rng(seed, "cost-dataset");
    let dataset = build_cost_dataset(space, device, &table, n_train, n_test, &mut rng)?;
    let train = dataset.train_samples();
    let settings = TrainSettings {
        seed,
        ..settings.clone()
    };
    let mut models = Vec::new();
    let mut fits = Vec::new();
    for &kind in kinds {
        let (m, f) = fit(kind, &train, &settings)?;
        models.push(m);
        fits.push(f);
    }
    let report = compare_report(&models, &dataset, device.name(), device.metric())?;
    Ok(PipelineOutput {
        table,
        dataset,
        models,
        fits,
        report,
    })
}

impl PipelineOutput {
    /// Writes `table.csv`, `report.txt`, `report.csv` and `scatter.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.table.save(&dir.join("table.csv"))?;
        let files = [
            ("report.txt", self.report.to_text()),
            ("report.csv", self.report.to_csv()?),
            ("scatter.csv", self.report.scatter_csv()?),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
