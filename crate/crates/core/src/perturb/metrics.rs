use serde::{Deserialize, Serialize};

use crate::features::FeatureTensor;
use crate::gcn::argmax;
use crate::shap::Predictor;
use crate::{Error, Result};

/// One-vs-rest confusion counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `tp / (tp + fn)`; `None` when the class is absent.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; `None` when every sample is in the class.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    /// Correct predictions within the class over the class size, which for
    /// one-vs-rest counts equals sensitivity.
    pub fn class_accuracy(&self) -> Option<f64> {
        self.sensitivity()
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Sensitivity,
    Specificity,
    ClassAccuracy,
    /// Mean probability of the class over its own samples.
    ClassProbability,
}

/// A metric value tagged with what it measures, so gaps are only taken
/// between like quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub class_index: usize,
    pub value: Option<f64>,
}

/// Predictions of a model on a labeled split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub probabilities: Vec<Vec<f64>>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Evaluation {
    pub fn confusion(&self, class: usize) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for (&p, &y) in self.predictions.iter().zip(&self.labels) {
            match (y == class, p == class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn accuracy(&self) -> Option<f64> {
        let correct = self.predictions.iter().zip(&self.labels).filter(|(p, y)| p == y).count();
        ratio(correct, self.labels.len())
    }

    pub fn metric(&self, kind: MetricKind, class: usize) -> Metric {
        let c = self.confusion(class);
        let value = match kind {
            MetricKind::Sensitivity => c.sensitivity(),
            MetricKind::Specificity => c.specificity(),
            MetricKind::ClassAccuracy => c.class_accuracy(),
            MetricKind::ClassProbability => {
                let probs: Vec<f64> = self
                    .probabilities
                    .iter()
                    .zip(&self.labels)
                    .filter(|(_, &y)| y == class)
                    .map(|(p, _)| p[class])
                    .collect();
                (!probs.is_empty()).then(|| probs.iter().sum::<f64>() / probs.len() as f64)
            }
        };
        Metric { kind, class_index: class, value }
    }
}

/// Runs the model over a labeled split.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, samples: &[FeatureTensor], labels: &[usize]) -> Result<Evaluation> {
    if samples.len() != labels.len() {
        return Err(Error::Data(format!("{} samples but {} labels", samples.len(), labels.len())));
    }
    let classes = model.num_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let probabilities = model.predict_batch(samples)?;
    let predictions = probabilities.iter().map(|p| argmax(p)).collect();
    Ok(Evaluation { probabilities, predictions, labels: labels.to_vec(), num_classes: classes })
}

/// Prediction gaps `baseline − perturbed` for the important (PGI) and
/// unimportant (PGU) perturbations. Undefined inputs give undefined gaps.
pub fn pgi_pgu(baseline: Metric, important: Metric, unimportant: Metric) -> Result<(Option<f64>, Option<f64>)> {
    for m in [important, unimportant] {
        if m.kind != baseline.kind || m.class_index != baseline.class_index {
            return Err(Error::Config(format!(
                "cannot compare {:?} of class {} with {:?} of class {}",
                m.kind, m.class_index, baseline.kind, baseline.class_index
            )));
        }
    }
    let gap = |m: Metric| Some(baseline.value? - m.value?);
    Ok((gap(important), gap(unimportant)))
}

/// Per-sample variant: mean drop of the class probability over all samples.
pub fn probability_gap(baseline: &Evaluation, perturbed: &Evaluation, class: usize) -> Result<f64> {
    if baseline.labels != perturbed.labels || class >= baseline.num_classes {
        return Err(Error::Config("probability gaps need the same split and a valid class".into()));
    }
    let n = baseline.probabilities.len();
    if n == 0 {
        return Err(Error::Data("probability gap of an empty split".into()));
    }
    let sum: f64 = baseline.probabilities.iter().zip(&perturbed.probabilities).map(|(b, p)| b[class] - p[class]).sum();
    Ok(sum / n as f64)
}
