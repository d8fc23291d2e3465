//! Trial segmentation, baseline removal, and mean-concentration features.
//!
//! The continuous filtered stream is cut into protocol-timed trials
//! (14 s baseline, 3 s cue, 1 s start, 15 s task at 10 Hz). Each channel's
//! task window is referenced to the mean of the final 1.5 s of its own
//! baseline, then averaged into one feature per channel.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::optics::HemoSeries;

/// Trial class. The declaration order is the fixed tie-break order used by
/// the classifier's argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
    Rest,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Yes, Label::No, Label::Rest];

    pub fn index(self) -> usize {
        match self {
            Label::Yes => 0,
            Label::No => 1,
            Label::Rest => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s {
            "yes" => Ok(Label::Yes),
            "no" => Ok(Label::No),
            "rest" => Ok(Label::Rest),
            other => Err(Error::InvalidInput(format!("unknown label '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "yes",
            Label::No => "no",
            Label::Rest => "rest",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// Per-trial protocol timing. Defaults to the 14/3/1/15 s structure at 10 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTiming {
    pub baseline_s: f64,
    pub cue_s: f64,
    pub start_s: f64,
    pub task_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for ProtocolTiming {
    fn default() -> Self {
        ProtocolTiming {
            baseline_s: 14.0,
            cue_s: 3.0,
            start_s: 1.0,
            task_s: 15.0,
            sample_rate_hz: 10.0,
        }
    }
}

/// Baseline reference window: the final 1.5 s of the baseline period.
pub const BASELINE_TAIL_S: f64 = 1.5;

impl ProtocolTiming {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("baseline_s", self.baseline_s),
            ("cue_s", self.cue_s),
            ("start_s", self.start_s),
            ("task_s", self.task_s),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("baseline", self.baseline_s),
            ("cue", self.cue_s),
            ("start", self.start_s),
            ("task", self.task_s),
            ("baseline tail", BASELINE_TAIL_S),
        ] {
            let samples = v * self.sample_rate_hz;
            if (samples - samples.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "{name} duration {v} s is not an integer number of samples at {} Hz",
                    self.sample_rate_hz
                )));
            }
        }
        Ok(())
    }

    pub fn baseline_samples(&self) -> usize {
        (self.baseline_s * self.sample_rate_hz).round() as usize
    }

    pub fn cue_samples(&self) -> usize {
        (self.cue_s * self.sample_rate_hz).round() as usize
    }

    pub fn start_samples(&self) -> usize {
        (self.start_s * self.sample_rate_hz).round() as usize
    }

    pub fn task_samples(&self) -> usize {
        (self.task_s * self.sample_rate_hz).round() as usize
    }

    /// Offset of task onset from trial onset: baseline + cue + start.
    pub fn task_offset_samples(&self) -> usize {
        self.baseline_samples() + self.cue_samples() + self.start_samples()
    }

    pub fn trial_samples(&self) -> usize {
        self.task_offset_samples() + self.task_samples()
    }

    pub fn baseline_tail_samples(&self) -> usize {
        (BASELINE_TAIL_S * self.sample_rate_hz).round() as usize
    }
}

/// One row of the events table: where a trial starts and what it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub onset_sample: usize,
    pub label: Label,
    pub session: usize,
    pub block: usize,
    pub trial: usize,
}

/// A segmented trial: per-channel baseline and task windows plus provenance.
#[derive(Debug, Clone)]
pub struct TrialEpoch {
    pub label: Label,
    /// `(channels, baseline_samples)` [HbO] segment.
    pub baseline_window: Array2<f64>,
    /// `(channels, task_samples)` [HbO] segment.
    pub task_window: Array2<f64>,
    pub sample_rate_hz: f64,
    pub session: usize,
    pub block: usize,
    pub trial: usize,
}

/// Mean-[HbO] feature vector: one value per channel, in µM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Label,
    pub session: usize,
    pub block: usize,
    pub trial: usize,
}

/// Labeled feature collection; `N` examples of uniform dimension.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    examples: Vec<FeatureVector>,
}

impl LabeledDataset {
    pub fn new(examples: Vec<FeatureVector>) -> Result<LabeledDataset> {
        let ds = LabeledDataset { examples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.examples.first() {
            let d = first.values.len();
            for (i, ex) in self.examples.iter().enumerate() {
                if ex.values.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "example {i} has dimension {}, expected {d}",
                        ex.values.len()
                    )));
                }
                if ex.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!("example {i} has a non-finite feature")));
                }
            }
        }
        Ok(())
    }

    pub fn push(&mut self, example: FeatureVector) -> Result<()> {
        if let Some(first) = self.examples.first() {
            if example.values.len() != first.values.len() {
                return Err(Error::InvalidInput(format!(
                    "example dimension {} does not match dataset dimension {}",
                    example.values.len(),
                    first.values.len()
                )));
            }
        }
        self.examples.push(example);
        Ok(())
    }

    pub fn extend(&mut self, examples: impl IntoIterator<Item = FeatureVector>) -> Result<()> {
        for ex in examples {
            self.push(ex)?;
        }
        Ok(())
    }

    pub fn examples(&self) -> &[FeatureVector] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Feature dimension; 0 when empty.
    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.values.len())
    }

    /// Labels present, in fixed class order.
    pub fn classes(&self) -> Vec<Label> {
        Label::ALL
            .into_iter()
            .filter(|l| self.examples.iter().any(|e| e.label == *l))
            .collect()
    }

    pub fn class_indices(&self, label: Label) -> Vec<usize> {
        self.examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    /// Dataset with example `i` removed (for leave-one-out folds).
    pub fn without(&self, i: usize) -> LabeledDataset {
        let examples = self
            .examples
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, e)| e.clone())
            .collect();
        LabeledDataset { examples }
    }
}

/// Cuts one epoch per event at exact sample indices; order preserved.
pub fn segment_trials(
    series: &HemoSeries,
    events: &[TrialEvent],
    timing: &ProtocolTiming,
) -> Result<Vec<TrialEpoch>> {
    timing.validate()?;
    series.validate()?;
    let trial_len = timing.trial_samples();
    let mut epochs = Vec::with_capacity(events.len());
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].onset_sample < pair[0].onset_sample + trial_len {
            return Err(Error::InvalidInput(format!(
                "events {} and {} overlap: onsets {} and {} with trial length {trial_len}",
                i,
                i + 1,
                pair[0].onset_sample,
                pair[1].onset_sample
            )));
        }
    }
    for event in events {
        let end = event.onset_sample + trial_len;
        if end > series.samples() {
            return Err(Error::InvalidInput(format!(
                "trial (session {}, block {}, trial {}) at sample {} runs to {} but the series has {} samples",
                event.session,
                event.block,
                event.trial,
                event.onset_sample,
                end,
                series.samples()
            )));
        }
        let b0 = event.onset_sample;
        let b1 = b0 + timing.baseline_samples();
        let t0 = event.onset_sample + timing.task_offset_samples();
        let t1 = t0 + timing.task_samples();
        epochs.push(TrialEpoch {
            label: event.label,
            baseline_window: series.hbo.slice(ndarray::s![.., b0..b1]).to_owned(),
            task_window: series.hbo.slice(ndarray::s![.., t0..t1]).to_owned(),
            sample_rate_hz: series.sample_rate_hz,
            session: event.session,
            block: event.block,
            trial: event.trial,
        });
    }
    Ok(epochs)
}

/// Subtracts each channel's mean over the final 1.5 s of baseline from every
/// task-window sample of that channel.
pub fn remove_baseline(epoch: &TrialEpoch) -> Result<Array2<f64>> {
    let tail = (BASELINE_TAIL_S * epoch.sample_rate_hz).round() as usize;
    let available = epoch.baseline_window.ncols();
    if available < tail {
        return Err(Error::InvalidInput(format!(
            "baseline window has {available} samples; {tail} needed for the {BASELINE_TAIL_S} s reference"
        )));
    }
    let tail_view = epoch
        .baseline_window
        .slice(ndarray::s![.., available - tail..]);
    let tail_means = tail_view.mean_axis(Axis(1)).expect("nonempty tail");
    let mut corrected = epoch.task_window.clone();
    for (mut row, &m) in corrected.rows_mut().into_iter().zip(tail_means.iter()) {
        row.mapv_inplace(|v| v - m);
    }
    Ok(corrected)
}

/// Per-channel arithmetic mean over the task window.
pub fn extract_features(
    corrected_task: &Array2<f64>,
    expected_channels: usize,
    expected_samples: usize,
) -> Result<Vec<f64>> {
    let (channels, samples) = corrected_task.dim();
    if channels != expected_channels || samples != expected_samples {
        return Err(Error::InvalidInput(format!(
            "task window is {channels} channels x {samples} samples, expected {expected_channels} x {expected_samples}"
        )));
    }
    Ok(corrected_task
        .mean_axis(Axis(1))
        .expect("nonempty window")
        .to_vec())
}

/// Full per-epoch path: baseline removal then feature extraction.
pub fn featurize_epochs(
    epochs: &[TrialEpoch],
    timing: &ProtocolTiming,
    expected_channels: usize,
) -> Result<LabeledDataset> {
    let mut examples = Vec::with_capacity(epochs.len());
    for epoch in epochs {
        let corrected = remove_baseline(epoch)?;
        let values = extract_features(&corrected, expected_channels, timing.task_samples())?;
        examples.push(FeatureVector {
            values,
            label: epoch.label,
            session: epoch.session,
            block: epoch.block,
            trial: epoch.trial,
        });
    }
    LabeledDataset::new(examples)
}
