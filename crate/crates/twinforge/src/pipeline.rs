//! End-to-end orchestration of the eight framework steps with per-stage
//! resumability: every stage records a digest of its effective inputs in the
//! run manifest and is skipped on rerun while the digest and its artifacts
//! still match.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twinforge_core::doe::{
    self, compute_features, select_test_group, FeatureVector, PartnerChart,
};
use twinforge_core::fom::simulate_fom;
use twinforge_core::metrics::{self, GlobalMetrics, MetricSet};
use twinforge_core::rom::{select_complexity, Scenario};
use twinforge_core::signals::{gen_aprbs, gen_multisine, gen_sinaprbs, ExcitationSignal};
use twinforge_core::{DataSet, RomModel};

use crate::config::{Direction, PipelineConfig};
use crate::model_file::{load_model, save_model};
use crate::report::{self, fmt_num, ScatterPoint};
use crate::store::{sha256_hex, write_atomic, Store};
use crate::{AppError, AppResult};

/// Ordered stage names; each stage depends on all earlier ones.
pub const STAGES: [&str; 9] = [
    "signals",
    "simulate",
    "features",
    "select_test",
    "train",
    "evaluate",
    "correlate",
    "partner_chart",
    "finalize",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StageRecord {
    digest: String,
    artifacts: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RunManifest {
    stages: BTreeMap<String, StageRecord>,
}

/// Per-ROM evaluation row (one trained model, scored on the test group).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub aug: usize,
    pub metrics: GlobalMetrics,
}

/// Final report written by the finalize stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub base_id: String,
    pub partners_tried: Vec<(String, f64)>,
    pub selected_partner: String,
    /// Test-group rmse of the selected 2-data-set model, K.
    pub final_rmseg: f64,
    pub best_single_id: String,
    pub best_single_rmseg: f64,
    /// Positive when the 2-set model beats the best 1-set model.
    pub reduction_percent: f64,
    /// Explicit flag: no confirmed partner improved on the best 1-set model.
    pub no_improvement: bool,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    report_dir: PathBuf,
    store_root: PathBuf,
    manifest: RunManifest,
    config_digest: String,
}

fn stage_err(stage: &'static str) -> impl Fn(anyhow::Error) -> AppError {
    move |source| AppError::Stage { stage, source }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> AppResult<Self> {
        cfg.validate().map_err(AppError::Validation)?;
        let store_root = cfg.store_root().map_err(AppError::Validation)?;
        let report_dir = cfg.report_dir.clone();
        fs::create_dir_all(&report_dir)
            .with_context(|| format!("creating {}", report_dir.display()))
            .map_err(AppError::Validation)?;

        // Hash only the science-relevant configuration: where the artifacts
        // land must not change what they contain.
        let hashed = PipelineConfig {
            store_root: None,
            report_dir: PathBuf::from("report"),
            ..cfg.clone()
        };
        let config_digest =
            sha256_hex(serde_json::to_string(&hashed).expect("config serializes").as_bytes());
        let manifest_path = report_dir.join("run_manifest.json");
        let manifest = if manifest_path.exists() {
            serde_json::from_slice(
                &fs::read(&manifest_path).map_err(|e| AppError::Validation(e.into()))?,
            )
            .map_err(|e| AppError::Validation(anyhow!("run manifest: {e}")))?
        } else {
            RunManifest::default()
        };
        Ok(Self { cfg, report_dir, store_root, manifest, config_digest })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn report_dir(&self) -> &Path {
        &self.report_dir
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.report_dir.join(name)
    }

    /// Digest of a stage: its own inputs chained onto the previous stage.
    fn stage_digest(&self, stage: &str) -> String {
        let own = match stage {
            "signals" => serde_json::to_string(&self.cfg.signals),
            "simulate" => serde_json::to_string(&self.cfg.fom),
            "select_test" => serde_json::to_string(&self.cfg.test_group),
            "train" | "evaluate" => serde_json::to_string(&self.cfg.train),
            "partner_chart" => serde_json::to_string(&self.cfg.base_rule),
            "finalize" => serde_json::to_string(&self.cfg.partner_count),
            _ => Ok(String::new()),
        }
        .expect("config serializes");
        let pos = STAGES.iter().position(|s| *s == stage).expect("known stage");
        let prev = if pos == 0 {
            String::new()
        } else {
            self.stage_digest(STAGES[pos - 1])
        };
        sha256_hex(format!("{stage}|{own}|{prev}").as_bytes())
    }

    fn is_done(&self, stage: &str) -> bool {
        match self.manifest.stages.get(stage) {
            Some(rec) => {
                rec.digest == self.stage_digest(stage)
                    && rec.artifacts.iter().all(|a| self.artifact(a).exists())
            }
            None => false,
        }
    }

    fn mark_done(&mut self, stage: &str, artifacts: Vec<String>) -> Result<()> {
        // A changed upstream digest invalidates everything downstream.
        let pos = STAGES.iter().position(|s| *s == stage).expect("known stage");
        for later in &STAGES[pos + 1..] {
            let stale = self
                .manifest
                .stages
                .get(*later)
                .is_some_and(|rec| rec.digest != self.stage_digest(later));
            if stale {
                self.manifest.stages.remove(*later);
            }
        }
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord { digest: self.stage_digest(stage), artifacts },
        );
        let bytes = serde_json::to_vec_pretty(&self.manifest)?;
        write_atomic(&self.artifact("run_manifest.json"), &bytes)?;
        Ok(())
    }

    // ---- stage 1: signal synthesis -------------------------------------

    pub fn ensure_signals(&mut self) -> AppResult<Vec<ExcitationSignal>> {
        let fail = stage_err("signals");
        if self.is_done("signals") {
            let bytes = fs::read(self.artifact("signals.json")).map_err(|e| fail(e.into()))?;
            return serde_json::from_slice(&bytes).map_err(|e| fail(e.into()));
        }
        let signals = self.generate_signals().map_err(&fail)?;
        let bytes = serde_json::to_vec_pretty(&signals).map_err(|e| fail(e.into()))?;
        write_atomic(&self.artifact("signals.json"), &bytes).map_err(|e| fail(e.into()))?;
        self.mark_done("signals", vec!["signals.json".into()]).map_err(&fail)?;
        Ok(signals)
    }

    fn generate_signals(&self) -> Result<Vec<ExcitationSignal>> {
        let plan = &self.cfg.signals;
        let grid = plan.grid.to_grid()?;
        let mut signals = Vec::with_capacity(plan.total());
        let mut seed = plan.seed_base;
        let mut push = |sig: Result<ExcitationSignal>, id: String| -> Result<()> {
            let mut sig = sig?;
            sig.id = id;
            signals.push(sig);
            Ok(())
        };
        for j in 0..plan.n_aprbs {
            let s = gen_aprbs(&plan.aprbs, &grid, seed).map_err(|e| anyhow!("{e}"));
            push(s, format!("AP{:03}", j + 1))?;
            seed += 1;
        }
        for j in 0..plan.n_sinaprbs {
            let s = gen_sinaprbs(&plan.sinaprbs, &grid, seed).map_err(|e| anyhow!("{e}"));
            push(s, format!("SA{:03}", j + 1))?;
            seed += 1;
        }
        for j in 0..plan.n_multisine {
            let s = gen_multisine(&plan.multisine, &grid, seed).map_err(|e| anyhow!("{e}"));
            push(s, format!("MS{:03}", j + 1))?;
            seed += 1;
        }
        Ok(signals)
    }

    // ---- stage 2: FOM simulation into the store ------------------------

    pub fn ensure_datasets(&mut self) -> AppResult<BTreeMap<String, DataSet>> {
        let signals = self.ensure_signals()?;
        let fail = stage_err("simulate");
        if self.is_done("simulate") {
            let store = Store::open(&self.store_root).map_err(|e| fail(e.into()))?;
            let mut map = BTreeMap::new();
            for sig in &signals {
                let ds = store.load_dataset(&sig.id).map_err(|e| fail(e.into()))?;
                map.insert(sig.id.clone(), ds);
            }
            return Ok(map);
        }

        let provenance = sha256_hex(
            format!(
                "{}|{}",
                serde_json::to_string(&self.cfg.fom).expect("config serializes"),
                self.cfg.signals.seed_base
            )
            .as_bytes(),
        );
        let fom = self.cfg.fom;
        let mut datasets: Vec<DataSet> = signals
            .par_iter()
            .map(|sig| {
                let mut ds = simulate_fom(sig, &fom).map_err(|e| anyhow!("{}: {e}", sig.id))?;
                ds.id = sig.id.clone();
                ds.provenance = provenance.clone();
                Ok(ds)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(&fail)?;
        datasets.sort_by(|a, b| a.id.cmp(&b.id));

        let mut store = Store::open(&self.store_root).map_err(|e| fail(e.into()))?;
        for ds in &datasets {
            if !store.contains(&ds.id) {
                store.save_dataset(ds).map_err(|e| fail(e.into()))?;
            }
        }
        self.mark_done("simulate", Vec::new()).map_err(&fail)?;
        Ok(datasets.into_iter().map(|ds| (ds.id.clone(), ds)).collect())
    }

    // ---- stage 3: features ----------------------------------------------

    pub fn ensure_features(&mut self) -> AppResult<BTreeMap<String, FeatureVector>> {
        let datasets = self.ensure_datasets()?;
        let fail = stage_err("features");
        let features: BTreeMap<String, FeatureVector> = datasets
            .iter()
            .map(|(id, ds)| (id.clone(), compute_features(ds)))
            .collect();
        if !self.is_done("features") {
            let mut header = vec!["id"];
            header.extend(FeatureVector::NAMES);
            let rows: Vec<Vec<String>> = features
                .iter()
                .map(|(id, fv)| {
                    let mut row = vec![id.clone()];
                    row.extend(
                        FeatureVector::NAMES
                            .iter()
                            .map(|n| fv.get(n).map(fmt_num).unwrap_or_default()),
                    );
                    row
                })
                .collect();
            report::write_csv(
                &self.artifact("features.csv"),
                &self.config_digest,
                &header,
                &rows,
            )
            .map_err(&fail)?;
            self.mark_done("features", vec!["features.csv".into()]).map_err(&fail)?;
        }
        Ok(features)
    }

    // ---- stage 4: chi-square test-group selection -----------------------

    pub fn ensure_test_group(&mut self) -> AppResult<Vec<String>> {
        let datasets = self.ensure_datasets()?;
        self.ensure_features()?;
        let fail = stage_err("select_test");
        if self.is_done("select_test") {
            return read_id_csv(&self.artifact("test_group.csv")).map_err(&fail);
        }
        let all: Vec<DataSet> = datasets.values().cloned().collect();
        let ids = select_test_group(&all, self.cfg.test_group.k, self.cfg.test_group.bins)
            .map_err(|e| fail(anyhow!("{e}")))?;
        let rows: Vec<Vec<String>> = ids.iter().map(|id| vec![id.clone()]).collect();
        report::write_csv(&self.artifact("test_group.csv"), &self.config_digest, &["id"], &rows)
            .map_err(&fail)?;
        self.mark_done("select_test", vec!["test_group.csv".into()]).map_err(&fail)?;
        Ok(ids)
    }

    // ---- stage 5: one ROM per training data set --------------------------

    pub fn ensure_single_roms(&mut self) -> AppResult<BTreeMap<String, RomModel>> {
        let datasets = self.ensure_datasets()?;
        let test_ids = self.ensure_test_group()?;
        let fail = stage_err("train");

        let train_ids: Vec<String> = datasets
            .keys()
            .filter(|id| !test_ids.contains(id))
            .cloned()
            .collect();
        let models_dir = self.artifact("models");
        if self.is_done("train") {
            let mut map = BTreeMap::new();
            for id in &train_ids {
                let model =
                    load_model(&models_dir.join(format!("{id}.json"))).map_err(|e| fail(e.into()))?;
                map.insert(id.clone(), model);
            }
            return Ok(map);
        }

        fs::create_dir_all(&models_dir).map_err(|e| fail(e.into()))?;
        let train_cfg = self.cfg.train;
        // Independent jobs; results merged in id order below.
        let trained: Vec<(String, RomModel, usize)> = train_ids
            .par_iter()
            .map(|id| {
                let sc = Scenario::from(&datasets[id]);
                let (model, aug) = select_complexity(&[sc], 2, &train_cfg)
                    .map_err(|e| anyhow!("{id}: {e}"))?;
                Ok((id.clone(), model, aug))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(&fail)?;

        let mut artifacts = Vec::new();
        let mut rows = Vec::new();
        let mut map = BTreeMap::new();
        for (id, model, aug) in trained {
            let rel = format!("models/{id}.json");
            save_model(&models_dir.join(format!("{id}.json")), &model)
                .map_err(|e| fail(e.into()))?;
            let train_rmse = doe::mean_rmse_on_group(&model, &[datasets[&id].clone()])
                .map_err(|e| fail(anyhow!("{e}")))?;
            rows.push(vec![id.clone(), aug.to_string(), fmt_num(train_rmse)]);
            artifacts.push(rel);
            map.insert(id, model);
        }
        artifacts.push("train_summary.csv".into());
        report::write_csv(
            &self.artifact("train_summary.csv"),
            &self.config_digest,
            &["id", "i", "train_rmse"],
            &rows,
        )
        .map_err(&fail)?;
        self.mark_done("train", artifacts).map_err(&fail)?;
        Ok(map)
    }

    // ---- stage 6: evaluation on the test group ---------------------------

    pub fn ensure_evaluations(&mut self) -> AppResult<Vec<EvalRow>> {
        let datasets = self.ensure_datasets()?;
        let test_ids = self.ensure_test_group()?;
        let models = self.ensure_single_roms()?;
        let fail = stage_err("evaluate");

        let test_sets: Vec<&DataSet> = test_ids.iter().map(|id| &datasets[id]).collect();
        let mut rows = Vec::new();
        for (id, model) in &models {
            let metrics = evaluate_on_group(model, &test_sets).map_err(&fail)?;
            rows.push(EvalRow { id: id.clone(), aug: model.aug, metrics });
        }

        if !self.is_done("evaluate") {
            let mut header = vec!["id", "i"];
            header.extend(MetricSet::NAMES);
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.id.clone(), r.aug.to_string()];
                    row.extend(
                        MetricSet::NAMES
                            .iter()
                            .map(|n| fmt_num(r.metrics.mean.get(n).expect("known measure"))),
                    );
                    row
                })
                .collect();
            report::write_csv(&self.artifact("eval.csv"), &self.config_digest, &header, &csv_rows)
                .map_err(&fail)?;
            self.mark_done("evaluate", vec!["eval.csv".into()]).map_err(&fail)?;
        }
        Ok(rows)
    }

    // ---- stage 7: feature/error correlation matrix -----------------------

    pub fn ensure_correlation(&mut self) -> AppResult<()> {
        let features = self.ensure_features()?;
        let evals = self.ensure_evaluations()?;
        let fail = stage_err("correlate");
        if self.is_done("correlate") {
            return Ok(());
        }

        let fvs: Vec<FeatureVector> = evals.iter().map(|r| features[&r.id].clone()).collect();
        let gms: Vec<GlobalMetrics> = evals.iter().map(|r| r.metrics.clone()).collect();
        let cm = doe::corr_matrix(&fvs, &gms).map_err(|e| fail(anyhow!("{e}")))?;

        let mut header = vec!["measure"];
        header.extend(cm.feature_names.iter().map(String::as_str));
        let value_rows: Vec<Vec<String>> = cm
            .measure_names
            .iter()
            .zip(&cm.values)
            .map(|(m, row)| {
                let mut out = vec![m.clone()];
                out.extend(row.iter().map(|c| c.map(fmt_num).unwrap_or_default()));
                out
            })
            .collect();
        report::write_csv(
            &self.artifact("corr_matrix.csv"),
            &self.config_digest,
            &header,
            &value_rows,
        )
        .map_err(&fail)?;
        let count_rows: Vec<Vec<String>> = cm
            .measure_names
            .iter()
            .zip(&cm.counts)
            .map(|(m, row)| {
                let mut out = vec![m.clone()];
                out.extend(row.iter().map(|c| c.to_string()));
                out
            })
            .collect();
        report::write_csv(
            &self.artifact("corr_counts.csv"),
            &self.config_digest,
            &header,
            &count_rows,
        )
        .map_err(&fail)?;

        // Scatter of the strongest defined cell.
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in cm.values.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(r) = cell {
                    if best.map_or(true, |(_, _, b)| r.abs() > b.abs()) {
                        best = Some((i, j, *r));
                    }
                }
            }
        }
        if let Some((mi, fj, r)) = best {
            let feature = &cm.feature_names[fj];
            let measure = &cm.measure_names[mi];
            let points: Vec<ScatterPoint> = evals
                .iter()
                .filter_map(|row| {
                    let x = features[&row.id].get(feature)?;
                    Some(ScatterPoint {
                        x,
                        y: row.metrics.mean.get(measure).expect("known measure"),
                        label: row.id.clone(),
                        category: "ROM".into(),
                    })
                })
                .collect();
            report::write_scatter_svg(
                &self.artifact("corr_scatter.svg"),
                &format!("{feature} vs {measure} (R = {r:.3})"),
                feature,
                measure,
                &points,
            )
            .map_err(&fail)?;
        }
        self.mark_done(
            "correlate",
            vec!["corr_matrix.csv".into(), "corr_counts.csv".into(), "corr_scatter.svg".into()],
        )
        .map_err(&fail)?;
        Ok(())
    }

    /// Base data set per the configured rule, among the non-test sets.
    /// Ties break on the lexicographically smallest id.
    pub fn pick_base(&mut self) -> AppResult<String> {
        let features = self.ensure_features()?;
        let test_ids = self.ensure_test_group()?;
        let fail = stage_err("partner_chart");
        let rule = self.cfg.base_rule.clone();
        let mut best: Option<(String, f64)> = None;
        for (id, fv) in &features {
            if test_ids.contains(id) {
                continue;
            }
            let Some(v) = fv.get(&rule.feature) else { continue };
            let better = match &best {
                None => true,
                Some((_, b)) => match rule.direction {
                    Direction::Maximize => v > *b,
                    Direction::Minimize => v < *b,
                },
            };
            if better {
                best = Some((id.clone(), v));
            }
        }
        best.map(|(id, _)| id)
            .ok_or_else(|| fail(anyhow!("no non-test set exposes feature '{}'", rule.feature)))
    }

    // ---- stage 8: partner chart ------------------------------------------

    pub fn ensure_partner_chart(&mut self) -> AppResult<PartnerChart> {
        let datasets = self.ensure_datasets()?;
        let test_ids = self.ensure_test_group()?;
        let models = self.ensure_single_roms()?;
        self.ensure_correlation()?;
        let base_id = self.pick_base()?;
        let fail = stage_err("partner_chart");

        let candidates: Vec<DataSet> = datasets
            .values()
            .filter(|ds| !test_ids.contains(&ds.id))
            .cloned()
            .collect();
        let test_sets: Vec<DataSet> = test_ids.iter().map(|id| datasets[id].clone()).collect();
        let base_rom = models
            .get(&base_id)
            .ok_or_else(|| fail(anyhow!("no model for base '{base_id}'")))?;
        let chart = doe::partner_chart(&base_id, &candidates, base_rom, &models, &test_sets)
            .map_err(|e| fail(anyhow!("{e}")))?;

        if !self.is_done("partner_chart") {
            let rows: Vec<Vec<String>> = chart
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.id.clone(),
                        fmt_num(r.similarity),
                        fmt_num(r.base_rom_error),
                        fmt_num(r.own_rom_error),
                        r.category.as_str().to_string(),
                        r.score.to_string(),
                    ]
                })
                .collect();
            report::write_csv(
                &self.artifact("partner_chart.csv"),
                &self.config_digest,
                &["id", "similarity", "base_rom_error", "own_rom_error", "category", "score"],
                &rows,
            )
            .map_err(&fail)?;
            let points: Vec<ScatterPoint> = chart
                .rows
                .iter()
                .map(|r| ScatterPoint {
                    x: r.base_rom_error,
                    y: r.own_rom_error,
                    label: r.id.clone(),
                    category: r.category.as_str().to_string(),
                })
                .collect();
            report::write_scatter_svg(
                &self.artifact("partner_chart.svg"),
                &format!("training-partner chart, base {base_id}"),
                "base-ROM error on candidate [K]",
                "candidate's own-ROM test error [K]",
                &points,
            )
            .map_err(&fail)?;
            self.mark_done(
                "partner_chart",
                vec!["partner_chart.csv".into(), "partner_chart.svg".into()],
            )
            .map_err(&fail)?;
        }
        Ok(chart)
    }

    // ---- stage 9: confirm partners, export the final model ---------------

    pub fn ensure_final(&mut self) -> AppResult<RunSummary> {
        let datasets = self.ensure_datasets()?;
        let test_ids = self.ensure_test_group()?;
        let evals = self.ensure_evaluations()?;
        let chart = self.ensure_partner_chart()?;
        let fail = stage_err("finalize");
        if self.is_done("finalize") {
            let bytes =
                fs::read(self.artifact("run_summary.json")).map_err(|e| fail(e.into()))?;
            return serde_json::from_slice(&bytes).map_err(|e| fail(e.into()));
        }

        let base_id = chart.base_id.clone();
        let mut partner_ids: Vec<String> = chart
            .recommended()
            .filter(|r| r.id != base_id)
            .take(self.cfg.partner_count)
            .map(|r| r.id.clone())
            .collect();
        if partner_ids.is_empty() {
            // Nothing recommended; fall back to the best-scored non-base rows
            // so a final model always exists.
            partner_ids = chart
                .rows
                .iter()
                .filter(|r| r.id != base_id)
                .take(self.cfg.partner_count)
                .map(|r| r.id.clone())
                .collect();
        }
        if partner_ids.is_empty() {
            return Err(fail(anyhow!("no candidate partners besides the base set")));
        }

        let test_sets: Vec<&DataSet> = test_ids.iter().map(|id| &datasets[id]).collect();
        let train_cfg = self.cfg.train;
        let base_ds = datasets[&base_id].clone();
        let tried: Vec<(String, RomModel, f64)> = partner_ids
            .par_iter()
            .map(|pid| {
                let scenarios =
                    vec![Scenario::from(&base_ds), Scenario::from(&datasets[pid])];
                let (model, _) = select_complexity(&scenarios, 2, &train_cfg)
                    .map_err(|e| anyhow!("{base_id}+{pid}: {e}"))?;
                let gm = evaluate_on_group(&model, &test_sets)?;
                Ok((pid.clone(), model, gm.mean.rmse))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(&fail)?;

        let (selected_partner, final_model, final_rmseg) = tried
            .iter()
            .min_by(|a, b| a.2.partial_cmp(&b.2).expect("finite").then(a.0.cmp(&b.0)))
            .map(|(id, m, r)| (id.clone(), m.clone(), *r))
            .expect("at least one partner");

        let best_single = evals
            .iter()
            .min_by(|a, b| {
                a.metrics
                    .mean
                    .rmse
                    .partial_cmp(&b.metrics.mean.rmse)
                    .expect("finite")
                    .then(a.id.cmp(&b.id))
            })
            .expect("at least one single-set model");
        let best_single_rmseg = best_single.metrics.mean.rmse;
        let reduction_percent = (1.0 - final_rmseg / best_single_rmseg) * 100.0;

        let summary = RunSummary {
            base_id,
            partners_tried: tried.iter().map(|(id, _, r)| (id.clone(), *r)).collect(),
            selected_partner,
            final_rmseg,
            best_single_id: best_single.id.clone(),
            best_single_rmseg,
            reduction_percent,
            no_improvement: final_rmseg > best_single_rmseg,
        };

        save_model(&self.artifact("final_model.json"), &final_model)
            .map_err(|e| fail(e.into()))?;
        let mut bytes = serde_json::to_vec_pretty(&summary).map_err(|e| fail(e.into()))?;
        bytes.push(b'\n');
        write_atomic(&self.artifact("run_summary.json"), &bytes).map_err(|e| fail(e.into()))?;
        self.mark_done("finalize", vec!["final_model.json".into(), "run_summary.json".into()])
            .map_err(&fail)?;
        Ok(summary)
    }

    /// Runs every stage; the entry point behind `twinforge run`.
    pub fn run_all(&mut self) -> AppResult<RunSummary> {
        self.ensure_final()
    }
}

/// GlobalMetrics of one model over a test group, starting each trajectory
/// from the group member's own initial outputs.
pub fn evaluate_on_group(model: &RomModel, group: &[&DataSet]) -> Result<GlobalMetrics> {
    let mut sets = Vec::with_capacity(group.len());
    for ds in group {
        let x0: Vec<f64> = ds.outputs.iter().map(|ch| ch[0]).collect();
        let traj = model
            .integrate(&ds.excitation, &x0)
            .map_err(|e| anyhow!("{}: {e}", ds.id))?;
        sets.push(
            metrics::evaluate(&traj.outputs, &ds.outputs).map_err(|e| anyhow!("{}: {e}", ds.id))?,
        );
    }
    metrics::aggregate(&sets).map_err(|e| anyhow!("{e}"))
}

fn read_id_csv(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut ids = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line == "id" || line.is_empty() {
            continue;
        }
        ids.push(line.to_string());
    }
    if ids.is_empty() {
        bail!("no ids in {}", path.display());
    }
    Ok(ids)
}
