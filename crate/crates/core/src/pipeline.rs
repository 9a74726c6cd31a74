//! End-to-end glue: dictionary building, query features, evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dictionary::{default_ridge, fit_cluster, GestureDictionary, GestureEntry, DEFAULT_TAU};
use crate::eigenspace::{self, vectorize, EigenspaceModel, FeatureVector};
use crate::error::{Error, Result};
use crate::flow::FlowSequence;
use crate::matcher::{recognize, RankedMatch};
use crate::segmentation::{segment, SegmentationParams};

/// Parameters for building and querying a dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub segmentation: SegmentationParams,
    /// Eigenspace dimension.
    pub k: usize,
    /// Mahalanobis match threshold.
    pub tau: f64,
    /// Ridge added to every cluster covariance; `None` uses
    /// `1e-6 · trace(Σ) / k` per cluster.
    pub ridge: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmentation: SegmentationParams::default(),
            k: 4,
            tau: DEFAULT_TAU,
            ridge: None,
        }
    }
}

/// Repeated performances of one gesture.
#[derive(Debug, Clone)]
pub struct TrainingGesture {
    pub name: String,
    pub repetitions: Vec<FlowSequence>,
    /// 1-based partial action positions to focus on.
    pub important: BTreeSet<usize>,
}

/// Segments every repetition, fits one eigenspace over all partial action
/// images, then fits one cluster per partial action position.
///
/// Repetitions are aligned positionally: the i-th partial action of every
/// repetition feeds cluster i, so all repetitions of a gesture must yield
/// the same number of partial actions.
pub fn build_dictionary(gestures: &[TrainingGesture], cfg: &PipelineConfig) -> Result<GestureDictionary> {
    if gestures.is_empty() {
        return Err(Error::invalid("no gestures to build a dictionary from"));
    }
    let mut dims = None;
    // per gesture, per repetition, the appearance vectors in label order
    let mut per_gesture = Vec::with_capacity(gestures.len());
    for g in gestures {
        if g.repetitions.len() < 2 {
            return Err(Error::Alignment {
                gesture: g.name.clone(),
                detail: format!("needs at least 2 repetitions, got {}", g.repetitions.len()),
            });
        }
        let mut reps = Vec::with_capacity(g.repetitions.len());
        for (ri, seq) in g.repetitions.iter().enumerate() {
            let d = seq.dims();
            if dims.is_none() {
                dims = d;
            } else if d.is_some() && d != dims {
                return Err(Error::invalid(format!(
                    "gesture `{}` repetition {ri} is {:?}, expected {:?}",
                    g.name,
                    d.unwrap_or_default(),
                    dims.unwrap_or_default()
                )));
            }
            let pas = segment(seq, &cfg.segmentation)?;
            reps.push(pas.actions.iter().map(vectorize).collect::<Vec<_>>());
        }
        let counts: Vec<usize> = reps.iter().map(Vec::len).collect();
        if counts[0] == 0 || counts.iter().any(|&c| c != counts[0]) {
            return Err(Error::Alignment {
                gesture: g.name.clone(),
                detail: format!("repetitions yield differing or zero partial action counts {counts:?}"),
            });
        }
        if let Some(&k) = g.important.iter().find(|&&k| k < 1 || k > counts[0]) {
            return Err(Error::Alignment {
                gesture: g.name.clone(),
                detail: format!("important index {k} outside [1, {}]", counts[0]),
            });
        }
        per_gesture.push(reps);
    }

    let all: Vec<_> = per_gesture.iter().flatten().flatten().cloned().collect();
    let model = eigenspace::fit(&all, cfg.k)?;

    let mut entries = Vec::with_capacity(gestures.len());
    for (g, reps) in gestures.iter().zip(&per_gesture) {
        let positions = reps[0].len();
        let mut clusters = Vec::with_capacity(positions);
        for pos in 0..positions {
            let feats = reps
                .iter()
                .map(|r| model.project(&r[pos]))
                .collect::<Result<Vec<_>>>()?;
            let ridge = match cfg.ridge {
                Some(r) => r,
                None => default_ridge(&scatter(&feats)),
            };
            let cluster = fit_cluster(&feats, ridge).map_err(|e| Error::Alignment {
                gesture: g.name.clone(),
                detail: format!("cluster {}: {e}", pos + 1),
            })?;
            clusters.push(cluster);
        }
        entries.push(GestureEntry::new(g.name.clone(), clusters, g.important.clone())?);
    }
    GestureDictionary::new(model, entries, cfg.tau)
}

fn scatter(feats: &[FeatureVector]) -> nalgebra::DMatrix<f64> {
    let k = feats[0].dim();
    let n = feats.len() as f64;
    let mean: Vec<f64> = (0..k).map(|c| feats.iter().map(|f| f.0[c]).sum::<f64>() / n).collect();
    nalgebra::DMatrix::from_fn(k, k, |r, c| {
        feats
            .iter()
            .map(|f| (f.0[r] - mean[r]) * (f.0[c] - mean[c]))
            .sum::<f64>()
            / n
    })
}

/// Segments a sequence and projects each partial action onto `model`.
pub fn extract_features(
    seq: &FlowSequence,
    model: &EigenspaceModel,
    params: &SegmentationParams,
) -> Result<Vec<FeatureVector>> {
    let pas = segment(seq, params)?;
    pas.actions.iter().map(|a| model.project(&vectorize(a))).collect()
}

/// Extracts features from `seq` and ranks the dictionary against them.
/// With `focus == false` every important set is ignored.
pub fn recognize_sequence(
    dict: &GestureDictionary,
    seq: &FlowSequence,
    params: &SegmentationParams,
    focus: bool,
) -> Result<Vec<RankedMatch>> {
    let features = extract_features(seq, dict.eigenspace(), params)?;
    if features.is_empty() {
        return Err(Error::invalid("query sequence contains no partial actions"));
    }
    if focus {
        recognize(dict, &features)
    } else {
        recognize(&dict.without_focus(), &features)
    }
}

/// Top-1 tallies for one gesture.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GestureScore {
    pub queries: usize,
    pub focused_correct: usize,
    pub unfocused_correct: usize,
}

impl GestureScore {
    pub fn focused_rate(&self) -> f64 {
        rate(self.focused_correct, self.queries)
    }

    pub fn unfocused_rate(&self) -> f64 {
        rate(self.unfocused_correct, self.queries)
    }
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Focused vs unfocused top-1 accuracy over a labeled test set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gestures: BTreeMap<String, GestureScore>,
    /// Mean of the per-gesture focused rates.
    pub focused_average: f64,
    /// Mean of the per-gesture unfocused rates.
    pub unfocused_average: f64,
    /// Queries that produced no usable features (counted as misses).
    pub failed: usize,
}

impl EvalReport {
    pub fn total_queries(&self) -> usize {
        self.gestures.values().map(|g| g.queries).sum()
    }

    pub fn focused_correct(&self) -> usize {
        self.gestures.values().map(|g| g.focused_correct).sum()
    }

    pub fn unfocused_correct(&self) -> usize {
        self.gestures.values().map(|g| g.unfocused_correct).sum()
    }

    /// Plain-text table, one row per gesture plus the average.
    pub fn table(&self) -> String {
        let width = self
            .gestures
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("gesture".len());
        let mut out = format!(
            "{:<width$}  {:>7}  {:>8}  {:>10}\n",
            "gesture", "queries", "focused", "unfocused"
        );
        for (name, s) in &self.gestures {
            out += &format!(
                "{:<width$}  {:>7}  {:>7.1}%  {:>9.1}%\n",
                name,
                s.queries,
                100.0 * s.focused_rate(),
                100.0 * s.unfocused_rate()
            );
        }
        out += &format!(
            "{:<width$}  {:>7}  {:>7.1}%  {:>9.1}%\n",
            "average",
            self.total_queries(),
            100.0 * self.focused_average,
            100.0 * self.unfocused_average
        );
        out
    }
}

/// Runs every labeled query through focused and unfocused recognition.
pub fn evaluate<'a>(
    dict: &GestureDictionary,
    queries: impl IntoIterator<Item = (&'a str, &'a FlowSequence)>,
    params: &SegmentationParams,
) -> EvalReport {
    let unfocused = dict.without_focus();
    let mut report = EvalReport::default();
    for (label, seq) in queries {
        let score = report.gestures.entry(label.to_string()).or_default();
        score.queries += 1;
        let features = match extract_features(seq, dict.eigenspace(), params) {
            Ok(f) if !f.is_empty() => f,
            _ => {
                report.failed += 1;
                continue;
            }
        };
        let top = |d: &GestureDictionary| {
            recognize(d, &features)
                .ok()
                .and_then(|r| r.into_iter().next())
                .is_some_and(|m| m.name == label)
        };
        score.focused_correct += usize::from(top(dict));
        score.unfocused_correct += usize::from(top(&unfocused));
    }
    let n = report.gestures.len();
    if n > 0 {
        report.focused_average = report.gestures.values().map(GestureScore::focused_rate).sum::<f64>() / n as f64;
        report.unfocused_average = report.gestures.values().map(GestureScore::unfocused_rate).sum::<f64>() / n as f64;
    }
    report
}
