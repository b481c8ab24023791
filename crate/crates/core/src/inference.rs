//! Scoring, neutral-band labelling, per-group attribution and metrics.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group, Instance};
use crate::error::{Error, Result};
use crate::objective::{mean_of, predict_score};
use crate::scalar::Scalar;
use crate::trainer::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Neutral,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Neutral => "neutral",
        })
    }
}

/// Half-width `b` of the open abstention interval `(0.5 - b, 0.5 + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralBand {
    b: f64,
}

impl NeutralBand {
    pub const DEFAULT_WIDTH: f64 = 0.048;

    pub fn new(b: f64) -> Result<Self> {
        if (0.0..0.5).contains(&b) {
            Ok(Self { b })
        } else {
            Err(Error::InvalidConfig(format!(
                "neutral band must lie in [0, 0.5), got {b}"
            )))
        }
    }

    pub fn none() -> Self {
        Self { b: 0.0 }
    }

    pub fn width(&self) -> f64 {
        self.b
    }
}

impl Default for NeutralBand {
    fn default() -> Self {
        Self {
            b: Self::DEFAULT_WIDTH,
        }
    }
}

/// Scores on the band edges take the non-neutral label; with `b = 0` a
/// score of exactly 0.5 is positive.
pub fn classify(score: f64, band: NeutralBand) -> Label {
    if score >= 0.5 + band.b {
        Label::Positive
    } else if score <= 0.5 - band.b {
        Label::Negative
    } else {
        Label::Neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub id: String,
    pub score: f64,
    pub label: Label,
}

/// Model scores for `instances`, order preserved.
pub fn score_instances<T: Scalar>(model: &Model<T>, instances: &[Instance<T>]) -> Result<Vec<T>> {
    instances
        .par_iter()
        .map(|inst| predict_score(&model.theta, inst.features()))
        .collect()
}

pub fn predict<T: Scalar>(
    model: &Model<T>,
    instances: &[Instance<T>],
    band: NeutralBand,
) -> Result<Vec<InstancePrediction>> {
    let scores = score_instances(model, instances)?;
    Ok(instances
        .iter()
        .zip(scores)
        .map(|(inst, s)| {
            let score = s.as_f64();
            InstancePrediction {
                id: inst.id().to_string(),
                score,
                label: classify(score, band),
            }
        })
        .collect())
}

fn member_scores<T: Scalar>(
    model: &Model<T>,
    group: &Group,
    dataset: &Dataset<T>,
) -> Result<Vec<T>> {
    group
        .members
        .iter()
        .map(|id| {
            let i = dataset
                .instance_index(id)
                .ok_or_else(|| Error::UnknownInstance(id.clone()))?;
            predict_score(&model.theta, dataset.features(i))
        })
        .collect()
}

/// Mean member score, duplicates counted once per occurrence.
pub fn group_score<T: Scalar>(model: &Model<T>, group: &Group, dataset: &Dataset<T>) -> Result<T> {
    if group.members.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(mean_of(member_scores(model, group, dataset)?.into_iter()))
}

fn group_label(score: f64) -> Label {
    if score >= 0.5 {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn classify_group<T: Scalar>(
    model: &Model<T>,
    group: &Group,
    dataset: &Dataset<T>,
) -> Result<Label> {
    Ok(group_label(group_score(model, group, dataset)?.as_f64()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub group_id: String,
    pub group_score: f64,
    pub group_label: Label,
    /// One row per member occurrence, most positive first.
    pub members: Vec<InstancePrediction>,
}

impl Attribution {
    pub fn most_positive(&self) -> &InstancePrediction {
        &self.members[0]
    }

    pub fn most_negative(&self) -> &InstancePrediction {
        &self.members[self.members.len() - 1]
    }
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "group {}  score {:.6}  {}",
            self.group_id, self.group_score, self.group_label
        )?;
        let width = self
            .members
            .iter()
            .map(|m| m.id.len())
            .max()
            .unwrap_or(2)
            .max(2);
        writeln!(f, "  {:<width$}  {:>8}  label", "id", "score")?;
        for m in &self.members {
            let sign = match m.label {
                Label::Positive => '+',
                Label::Negative => '-',
                Label::Neutral => '~',
            };
            writeln!(f, "{sign} {:<width$}  {:>8.6}  {}", m.id, m.score, m.label)?;
        }
        Ok(())
    }
}

/// Per-member scores for one group, sorted by descending score (ties by id,
/// then by position).
pub fn attribute<T: Scalar>(
    model: &Model<T>,
    group: &Group,
    dataset: &Dataset<T>,
    band: NeutralBand,
) -> Result<Attribution> {
    let scores = member_scores(model, group, dataset)?;
    if scores.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let group_score = mean_of(scores.iter().copied()).as_f64();
    let mut members: Vec<InstancePrediction> = group
        .members
        .iter()
        .zip(&scores)
        .map(|(id, s)| InstancePrediction {
            id: id.clone(),
            score: s.as_f64(),
            label: classify(s.as_f64(), band),
        })
        .collect();
    members.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    Ok(Attribution {
        group_id: group.id.clone(),
        group_score,
        group_label: group_label(group_score),
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeutralPolicy {
    /// Keep the predictions' neutral labels and leave them out of precision.
    IgnoreNeutral,
    /// Re-label with `b = 0`, so nothing abstains.
    NoNeutralBand,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub neutral: usize,
}

impl Confusion {
    pub fn decided(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn correct(&self) -> usize {
        self.true_positive + self.true_negative
    }

    pub fn total(&self) -> usize {
        self.decided() + self.neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Correct among non-neutral predictions; `None` when every prediction
    /// abstained.
    pub precision: Option<f64>,
    /// Fraction of items that received a non-neutral label.
    pub recall: f64,
    /// Correct over all items, abstentions counted as misses.
    pub accuracy: f64,
    pub counts: Confusion,
    pub neutral_policy: NeutralPolicy,
}

pub fn evaluate_instances(
    predictions: &[InstancePrediction],
    truths: &[bool],
    policy: NeutralPolicy,
) -> Result<MetricsReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: predictions.len(),
            found: truths.len(),
        });
    }
    let mut c = Confusion::default();
    for (p, &truth) in predictions.iter().zip(truths) {
        let label = match policy {
            NeutralPolicy::IgnoreNeutral => p.label,
            NeutralPolicy::NoNeutralBand => classify(p.score, NeutralBand::none()),
        };
        match (label, truth) {
            (Label::Neutral, _) => c.neutral += 1,
            (Label::Positive, true) => c.true_positive += 1,
            (Label::Positive, false) => c.false_positive += 1,
            (Label::Negative, false) => c.true_negative += 1,
            (Label::Negative, true) => c.false_negative += 1,
        }
    }
    let total = c.total() as f64;
    Ok(MetricsReport {
        precision: (c.decided() > 0).then(|| c.correct() as f64 / c.decided() as f64),
        recall: c.decided() as f64 / total,
        accuracy: c.correct() as f64 / total,
        counts: c,
        neutral_policy: policy,
    })
}

/// Truth labels for `instances`, read through the evaluation-only path.
pub fn truth_labels<T: Scalar>(instances: &[Instance<T>]) -> Result<Vec<bool>> {
    instances
        .iter()
        .map(|i| {
            i.evaluation_label()
                .ok_or_else(|| Error::MissingLabel(i.id().to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

/// Fraction of groups whose averaged-score label matches their binary score.
pub fn evaluate_groups<T: Scalar>(model: &Model<T>, dataset: &Dataset<T>) -> Result<GroupMetrics> {
    let groups = dataset.groups();
    if groups.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if let Some(g) = groups.iter().find(|g| g.score != 0.0 && g.score != 1.0) {
        return Err(Error::NonBinaryScore {
            group: g.id.clone(),
            score: g.score,
        });
    }
    let mut correct = 0;
    for g in groups {
        let predicted = classify_group(model, g, dataset)? == Label::Positive;
        if predicted == (g.score == 1.0) {
            correct += 1;
        }
    }
    Ok(GroupMetrics {
        accuracy: correct as f64 / groups.len() as f64,
        correct,
        total: groups.len(),
    })
}

/// Widest band whose non-neutral fraction is still at least `target_recall`.
/// A target of 1 yields `b = 0`.
pub fn calibrate_band(scores: &[f64], target_recall: f64) -> Result<NeutralBand> {
    if scores.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if !(target_recall > 0.0 && target_recall <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target recall must lie in (0, 1], got {target_recall}"
        )));
    }
    if target_recall == 1.0 {
        return Ok(NeutralBand::none());
    }
    let n = scores.len();
    // Items needed outside the band; the epsilon absorbs 0.762 * 1000 = 762.0000000000001.
    let needed = ((target_recall * n as f64) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    let mut dist: Vec<f64> = scores.iter().map(|s| (s - 0.5).abs()).collect();
    dist.sort_by(|a, b| b.total_cmp(a));
    let b = dist[needed - 1];
    // Scores of exactly 0 or 1 would put b at 0.5, which the band excludes.
    let b = if b >= 0.5 { 0.5 - f64::EPSILON } else { b };
    NeutralBand::new(b)
}

/// Fraction of `scores` outside the open band.
pub fn recall_at(scores: &[f64], band: NeutralBand) -> f64 {
    let kept = scores
        .iter()
        .filter(|&&s| classify(s, band) != Label::Neutral)
        .count();
    kept as f64 / scores.len() as f64
}

/// Area under the ROC curve (Mann-Whitney, ties share rank). `None` unless
/// both classes are present.
pub fn auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their average.
        let avg = (start + 1 + end) as f64 / 2.0;
        rank_sum += avg * order[start..end].iter().filter(|&&i| positive[i]).count() as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}
