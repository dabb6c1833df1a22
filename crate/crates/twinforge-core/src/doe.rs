//! Design-of-experiments analytics: data-set features, chi-square test-group
//! selection, feature/error correlation, signal similarity and the training
//! partner chart.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::fom::DataSet;
use crate::metrics::{self, GlobalMetrics, MetricSet};
use crate::rom::RomModel;
use crate::signals::{ExcitationSignal, SignalKind};
use crate::stats;

pub use crate::stats::{linfit_bounds, pearson, LinFit};

/// Named scalar features of one data set. Jump-based entries exist only for
/// APRBS-family signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Mean of the plateau levels, K.
    pub mean_levels: Option<f64>,
    /// Mean of all signed jump deltas, K.
    pub mean_jumps: Option<f64>,
    /// Mean of the signed jump deltas excluding the first, K.
    pub mean_jumps_excl_first: Option<f64>,
    /// Mean of the absolute jump deltas, K.
    pub mean_abs_jumps: Option<f64>,
    pub mean_oven: f64,
    pub std_oven: f64,
    /// Crest factor of the mean-removed oven signal (peak / rms).
    pub crest_oven: f64,
    pub std_ta: f64,
    pub std_tb: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 9] = [
        "mean_levels",
        "mean_jumps",
        "mean_jumps_excl_first",
        "mean_abs_jumps",
        "mean_oven",
        "std_oven",
        "crest_oven",
        "std_ta",
        "std_tb",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "mean_levels" => self.mean_levels,
            "mean_jumps" => self.mean_jumps,
            "mean_jumps_excl_first" => self.mean_jumps_excl_first,
            "mean_abs_jumps" => self.mean_abs_jumps,
            "mean_oven" => Some(self.mean_oven),
            "std_oven" => Some(self.std_oven),
            "crest_oven" => Some(self.crest_oven),
            "std_ta" => Some(self.std_ta),
            "std_tb" => Some(self.std_tb),
            _ => None,
        }
    }
}

/// Derives the feature vector of one data set. Standard deviations use the
/// population convention (divide by N).
pub fn compute_features(ds: &DataSet) -> FeatureVector {
    let sig = &ds.excitation;
    let (mean_levels, mean_jumps, mean_jumps_excl_first, mean_abs_jumps) =
        if sig.kind == SignalKind::Multisine || sig.jumps.is_empty() {
            (None, None, None, None)
        } else {
            let levels = sig.plateau_levels().expect("APRBS-family signal");
            let deltas: Vec<f64> = sig.jumps.iter().map(|j| j.delta).collect();
            let excl: Vec<f64> = deltas.iter().skip(1).cloned().collect();
            (
                Some(stats::mean(&levels)),
                Some(stats::mean(&deltas)),
                if excl.is_empty() { None } else { Some(stats::mean(&excl)) },
                Some(stats::mean(&deltas.iter().map(|d| libm::fabs(*d)).collect::<Vec<_>>())),
            )
        };

    let mean_oven = stats::mean(&sig.values);
    let std_oven = stats::std_pop(&sig.values);
    let crest_oven = if std_oven > 0.0 {
        let peak = sig
            .values
            .iter()
            .map(|&v| libm::fabs(v - mean_oven))
            .fold(0.0, f64::max);
        peak / std_oven
    } else {
        0.0
    };

    FeatureVector {
        mean_levels,
        mean_jumps,
        mean_jumps_excl_first,
        mean_abs_jumps,
        mean_oven,
        std_oven,
        crest_oven,
        std_ta: stats::std_pop(&ds.outputs[0]),
        std_tb: stats::std_pop(&ds.outputs[1]),
    }
}

fn chi_square(bin_counts: &[usize], k: usize) -> f64 {
    let expected = k as f64 / bin_counts.len() as f64;
    bin_counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc *= (n - j) as f64 / (j + 1) as f64;
        if acc > 1e12 {
            return acc;
        }
    }
    acc
}

/// Selects `k` data sets whose T_A medians are as uniformly distributed as
/// possible over `bins` equal-width bins (minimum chi-square against the
/// uniform target). Exhaustive when the subset count is small, otherwise
/// greedy construction plus pairwise-swap hill climbing. Ties break on the
/// lexicographic id order.
pub fn select_test_group(datasets: &[DataSet], k: usize, bins: usize) -> CoreResult<Vec<String>> {
    if k > datasets.len() {
        return Err(CoreError::KTooLarge { k, count: datasets.len() });
    }
    if bins < 2 {
        return Err(CoreError::InvalidConfig("bins must be at least 2".into()));
    }

    // Work on indices sorted by id so enumeration order is the id order.
    let mut order: Vec<usize> = (0..datasets.len()).collect();
    order.sort_by(|&a, &b| datasets[a].id.cmp(&datasets[b].id));

    let medians: Vec<f64> = order
        .iter()
        .map(|&i| stats::median(&datasets[i].outputs[0]))
        .collect();
    let lo = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(CoreError::DegenerateRange);
    }
    let bin_of = |median: f64| -> usize {
        let b = ((median - lo) / (hi - lo) * bins as f64) as usize;
        b.min(bins - 1)
    };
    let bin_idx: Vec<usize> = medians.iter().map(|&m| bin_of(m)).collect();

    if k == datasets.len() {
        return Ok(order.iter().map(|&i| datasets[i].id.clone()).collect());
    }

    let count = datasets.len();
    let score = |subset: &[usize]| -> f64 {
        let mut counts = vec![0usize; bins];
        for &s in subset {
            counts[bin_idx[s]] += 1;
        }
        chi_square(&counts, k)
    };

    let best = if binomial(count, k) <= 1e5 {
        exhaustive_best(count, k, &score)
    } else {
        greedy_with_swaps(count, k, &score)
    };
    Ok(best.iter().map(|&s| datasets[order[s]].id.clone()).collect())
}

/// Lexicographic enumeration of all k-subsets; first strict improvement wins,
/// so the result is the lexicographically smallest optimum.
fn exhaustive_best(count: usize, k: usize, score: &dyn Fn(&[usize]) -> f64) -> Vec<usize> {
    let mut subset: Vec<usize> = (0..k).collect();
    let mut best = subset.clone();
    let mut best_score = score(&subset);
    loop {
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + count - k {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
        let s = score(&subset);
        if s < best_score {
            best_score = s;
            best = subset.clone();
        }
    }
}

fn greedy_with_swaps(count: usize, k: usize, score: &dyn Fn(&[usize]) -> f64) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut remaining: Vec<usize> = (0..count).collect();
    for _ in 0..k {
        let mut best_idx = 0;
        let mut best_score = f64::INFINITY;
        for (pos, &cand) in remaining.iter().enumerate() {
            let mut trial = selected.clone();
            trial.push(cand);
            let s = score(&trial);
            if s < best_score {
                best_score = s;
                best_idx = pos;
            }
        }
        selected.push(remaining.remove(best_idx));
    }
    // Pairwise-swap hill climbing to a local minimum.
    let mut current = score(&selected);
    loop {
        let mut improved = false;
        'outer: for si in 0..selected.len() {
            for ri in 0..remaining.len() {
                let mut trial = selected.clone();
                trial[si] = remaining[ri];
                let s = score(&trial);
                if s < current {
                    core::mem::swap(&mut selected[si], &mut remaining[ri]);
                    current = s;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }
    selected.sort_unstable();
    selected
}

/// Pearson correlations between the six error measures (rows) and the nine
/// data-set features (columns), with per-cell sample counts. Cells where a
/// feature is absent or constant are reported as undefined rather than
/// failing the whole matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub measure_names: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major (measure x feature); `None` marks undefined cells.
    pub values: Vec<Vec<Option<f64>>>,
    /// Per-cell number of ROMs entering the correlation.
    pub counts: Vec<Vec<usize>>,
}

pub fn corr_matrix(
    features: &[FeatureVector],
    errors: &[GlobalMetrics],
) -> CoreResult<CorrelationMatrix> {
    if features.len() != errors.len() {
        return Err(CoreError::LengthMismatch { left: features.len(), right: errors.len() });
    }
    if features.len() < 3 {
        return Err(CoreError::InvalidConfig("correlation needs at least 3 ROMs".into()));
    }
    let measure_names: Vec<String> = MetricSet::NAMES.iter().map(|s| s.to_string()).collect();
    let feature_names: Vec<String> = FeatureVector::NAMES.iter().map(|s| s.to_string()).collect();

    let mut values = Vec::with_capacity(measure_names.len());
    let mut counts = Vec::with_capacity(measure_names.len());
    for measure in &measure_names {
        let mut row_vals = Vec::with_capacity(feature_names.len());
        let mut row_counts = Vec::with_capacity(feature_names.len());
        for feature in &feature_names {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (fv, gm) in features.iter().zip(errors) {
                if let Some(x) = fv.get(feature) {
                    xs.push(x);
                    ys.push(gm.mean.get(measure).expect("known measure"));
                }
            }
            row_counts.push(xs.len());
            row_vals.push(if xs.len() >= 3 { stats::pearson(&xs, &ys).ok() } else { None });
        }
        values.push(row_vals);
        counts.push(row_counts);
    }
    Ok(CorrelationMatrix { measure_names, feature_names, values, counts })
}

/// Root-mean-square of the sample-wise difference between two excitation
/// signals on the same grid.
pub fn similarity(a: &ExcitationSignal, b: &ExcitationSignal) -> CoreResult<f64> {
    if a.grid != b.grid {
        return Err(CoreError::GridMismatch);
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(libm::sqrt(sum / a.values.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartnerCategory {
    /// Too close to the base signal to contribute new information.
    TooSimilar,
    /// Own 1-data-set model is weak; excluded from recommendations.
    DissimilarWeak,
    /// On the rising diagonal with very high base-model error.
    HighBaseError,
    GoodPartnerSimilarity,
}

impl PartnerCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartnerCategory::TooSimilar => "TOO_SIMILAR",
            PartnerCategory::DissimilarWeak => "DISSIMILAR_WEAK",
            PartnerCategory::HighBaseError => "HIGH_BASE_ERROR",
            PartnerCategory::GoodPartnerSimilarity => "GOOD_PARTNER_SIMILARITY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerRow {
    pub id: String,
    /// rms distance of the candidate signal to the base signal, K.
    pub similarity: f64,
    /// rmse of the base model evaluated on the candidate data set, K.
    pub base_rom_error: f64,
    /// Mean test-group rmse of the candidate's own 1-data-set model, K.
    pub own_rom_error: f64,
    pub category: PartnerCategory,
    /// Lower is better; rank sum over base error (descending) and own
    /// error (ascending).
    pub score: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerChart {
    pub base_id: String,
    /// Rows sorted by recommendation score, ties by id.
    pub rows: Vec<PartnerRow>,
}

impl PartnerChart {
    /// Candidates eligible as training partners, best first.
    pub fn recommended(&self) -> impl Iterator<Item = &PartnerRow> {
        self.rows.iter().filter(|r| {
            matches!(
                r.category,
                PartnerCategory::GoodPartnerSimilarity | PartnerCategory::HighBaseError
            )
        })
    }
}

fn rmse_on(model: &RomModel, ds: &DataSet) -> CoreResult<f64> {
    let x0: Vec<f64> = ds.outputs.iter().map(|ch| ch[0]).collect();
    let traj = model.integrate(&ds.excitation, &x0)?;
    Ok(metrics::evaluate(&traj.outputs, &ds.outputs)?.rmse)
}

/// Mean rmse of a model over a test group.
pub fn mean_rmse_on_group(model: &RomModel, group: &[DataSet]) -> CoreResult<f64> {
    if group.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    let mut sum = 0.0;
    for ds in group {
        sum += rmse_on(model, ds)?;
    }
    Ok(sum / group.len() as f64)
}

/// Builds the training-partner chart for a base data set.
///
/// Category thresholds are cohort-relative percentiles over the non-base
/// candidates: similarity below the 10th percentile marks TOO_SIMILAR, own
/// model error above the median marks DISSIMILAR_WEAK, and the remaining
/// diagonal splits at the 75th percentile of the base-model error.
pub fn partner_chart(
    base_id: &str,
    candidates: &[DataSet],
    base_rom: &RomModel,
    own_roms: &BTreeMap<String, RomModel>,
    test_group: &[DataSet],
) -> CoreResult<PartnerChart> {
    let base = candidates
        .iter()
        .find(|ds| ds.id == base_id)
        .ok_or_else(|| CoreError::MissingRom(base_id.to_string()))?;

    struct Raw {
        id: String,
        similarity: f64,
        base_rom_error: f64,
        own_rom_error: f64,
    }

    let mut raws = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let own = own_roms
            .get(&cand.id)
            .ok_or_else(|| CoreError::MissingRom(cand.id.clone()))?;
        raws.push(Raw {
            id: cand.id.clone(),
            similarity: similarity(&base.excitation, &cand.excitation)?,
            base_rom_error: rmse_on(base_rom, cand)?,
            own_rom_error: mean_rmse_on_group(own, test_group)?,
        });
    }

    // Cohort thresholds over the non-base rows.
    let cohort: Vec<&Raw> = raws.iter().filter(|r| r.id != base_id).collect();
    if cohort.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    let collect = |f: &dyn Fn(&Raw) -> f64| -> Vec<f64> { cohort.iter().map(|r| f(r)).collect() };
    let sim_p10 = stats::percentile(&collect(&|r| r.similarity), 10.0);
    let own_p50 = stats::percentile(&collect(&|r| r.own_rom_error), 50.0);
    let base_p75 = stats::percentile(&collect(&|r| r.base_rom_error), 75.0);

    // Rank sums for the recommendation score.
    let rank_of = |key: &dyn Fn(&Raw) -> f64, descending: bool| -> BTreeMap<String, usize> {
        let mut idx: Vec<usize> = (0..raws.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ka, kb) = (key(&raws[a]), key(&raws[b]));
            let ord = ka.partial_cmp(&kb).expect("finite");
            let ord = if descending { ord.reverse() } else { ord };
            ord.then_with(|| raws[a].id.cmp(&raws[b].id))
        });
        idx.iter()
            .enumerate()
            .map(|(rank, &i)| (raws[i].id.clone(), rank))
            .collect()
    };
    let base_rank = rank_of(&|r| r.base_rom_error, true);
    let own_rank = rank_of(&|r| r.own_rom_error, false);

    let mut rows: Vec<PartnerRow> = raws
        .iter()
        .map(|r| {
            let category = if r.id == base_id || r.similarity < sim_p10 {
                PartnerCategory::TooSimilar
            } else if r.own_rom_error > own_p50 {
                PartnerCategory::DissimilarWeak
            } else if r.base_rom_error >= base_p75 {
                PartnerCategory::HighBaseError
            } else {
                PartnerCategory::GoodPartnerSimilarity
            };
            PartnerRow {
                id: r.id.clone(),
                similarity: r.similarity,
                base_rom_error: r.base_rom_error,
                own_rom_error: r.own_rom_error,
                category,
                score: base_rank[&r.id] + own_rank[&r.id],
            }
        })
        .collect();
    rows.sort_by(|a, b| a.score.cmp(&b.score).then_with(|| a.id.cmp(&b.id)));

    Ok(PartnerChart { base_id: base_id.to_string(), rows })
}
