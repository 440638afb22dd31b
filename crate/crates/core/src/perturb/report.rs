use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, pgi_pgu, probability_gap, Evaluation, MetricKind};
use super::plan::{apply_plan, build_plan, PerturbMode, Selection};
use crate::features::FeatureTensor;
use crate::gcn::{Real, StGcn};
use crate::{Error, Result};

/// Metrics of one model view for the explained class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// Overall accuracy across classes.
    pub accuracy: Option<f64>,
    pub class_probability: Option<f64>,
}

impl MetricSet {
    pub fn from_evaluation(e: &Evaluation, class: usize) -> Self {
        Self {
            sensitivity: e.metric(MetricKind::Sensitivity, class).value,
            specificity: e.metric(MetricKind::Specificity, class).value,
            accuracy: e.accuracy(),
            class_probability: e.metric(MetricKind::ClassProbability, class).value,
        }
    }
}

/// Important and unimportant perturbations of the same size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformedRow {
    pub k: usize,
    pub important_targets: Vec<usize>,
    pub unimportant_targets: Vec<usize>,
    pub important: MetricSet,
    pub unimportant: MetricSet,
    pub pgi_sensitivity: Option<f64>,
    pub pgu_sensitivity: Option<f64>,
    pub pgi_specificity: Option<f64>,
    pub pgu_specificity: Option<f64>,
    /// Mean drop of the class probability over all samples.
    pub pgi_prob: f64,
    pub pgu_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub class_index: usize,
    pub mode: PerturbMode,
    pub ranking: Vec<usize>,
    pub baseline: MetricSet,
    pub rows: Vec<InformedRow>,
}

fn check_ks(ks: &[usize], n: usize) -> Result<()> {
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Config(format!("k = {bad} must lie in 1..={n}")));
    }
    Ok(())
}

/// Perturbs the top-k and bottom-k key points of `ranking` for every `k`
/// and reports metric gaps against the unperturbed model.
pub fn informed_report<T: Real>(
    model: &StGcn<T>,
    samples: &[FeatureTensor],
    labels: &[usize],
    ranking: &[usize],
    class: usize,
    mode: PerturbMode,
    ks: &[usize],
) -> Result<PerturbReport> {
    mode.validate()?;
    check_ks(ks, ranking.len())?;
    if class >= model.num_classes() {
        return Err(Error::Config(format!("class {class} out of range")));
    }
    let base_eval = evaluate(model, samples, labels)?;
    let baseline = MetricSet::from_evaluation(&base_eval, class);
    let rows = ks
        .par_iter()
        .map(|&k| -> Result<InformedRow> {
            let imp = build_plan(ranking, k, mode, Selection::Important, class)?;
            let unimp = build_plan(ranking, k, mode, Selection::Unimportant, class)?;
            let e_imp = evaluate(&apply_plan(model, &imp)?, samples, labels)?;
            let e_unimp = evaluate(&apply_plan(model, &unimp)?, samples, labels)?;
            let gaps =
                |kind| pgi_pgu(base_eval.metric(kind, class), e_imp.metric(kind, class), e_unimp.metric(kind, class));
            let (pgi_sensitivity, pgu_sensitivity) = gaps(MetricKind::Sensitivity)?;
            let (pgi_specificity, pgu_specificity) = gaps(MetricKind::Specificity)?;
            Ok(InformedRow {
                k,
                important_targets: imp.targets,
                unimportant_targets: unimp.targets,
                important: MetricSet::from_evaluation(&e_imp, class),
                unimportant: MetricSet::from_evaluation(&e_unimp, class),
                pgi_sensitivity,
                pgu_sensitivity,
                pgi_specificity,
                pgu_specificity,
                pgi_prob: probability_gap(&base_eval, &e_imp, class)?,
                pgu_prob: probability_gap(&base_eval, &e_unimp, class)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbReport { class_index: class, mode, ranking: ranking.to_vec(), baseline, rows })
}

/// Informed reports for each scale factor in `epsilons`.
pub fn threshold_sweep<T: Real>(
    model: &StGcn<T>,
    samples: &[FeatureTensor],
    labels: &[usize],
    ranking: &[usize],
    class: usize,
    epsilons: &[f64],
    ks: &[usize],
) -> Result<Vec<PerturbReport>> {
    if epsilons.is_empty() {
        return Err(Error::Config("threshold sweep needs at least one scale factor".into()));
    }
    epsilons
        .iter()
        .map(|&epsilon| informed_report(model, samples, labels, ranking, class, PerturbMode::Scale { epsilon }, ks))
        .collect()
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[Option<f64>]) -> Self {
        let v: Vec<f64> = values.iter().flatten().copied().collect();
        if v.is_empty() {
            return Self { mean: None, std: None };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean: Some(mean), std: Some(std) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomRow {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub sensitivity: Summary,
    pub specificity: Summary,
    pub accuracy: Summary,
    /// Mean of `baseline − perturbed` sensitivity over seeds.
    pub sensitivity_drop: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomReport {
    pub class_index: usize,
    pub mode: PerturbMode,
    pub baseline: MetricSet,
    pub rows: Vec<RandomRow>,
}

/// Perturbs `k` uniformly drawn key points per seed. `k = 0` reproduces
/// the baseline.
pub fn random_control<T: Real>(
    model: &StGcn<T>,
    samples: &[FeatureTensor],
    labels: &[usize],
    class: usize,
    mode: PerturbMode,
    ks: &[usize],
    seeds: &[u64],
) -> Result<RandomReport> {
    mode.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("random control needs at least one seed".into()));
    }
    let n = model.config().keypoints();
    if let Some(&bad) = ks.iter().find(|&&k| k > n) {
        return Err(Error::Config(format!("k = {bad} exceeds {n} key points")));
    }
    let base_eval = evaluate(model, samples, labels)?;
    let baseline = MetricSet::from_evaluation(&base_eval, class);
    let identity: Vec<usize> = (0..n).collect();
    let rows = ks
        .iter()
        .map(|&k| -> Result<RandomRow> {
            let sets: Vec<MetricSet> = if k == 0 {
                vec![baseline; seeds.len()]
            } else {
                seeds
                    .par_iter()
                    .map(|&seed| {
                        let plan = build_plan(&identity, k, mode, Selection::Random { seed }, class)?;
                        let e = evaluate(&apply_plan(model, &plan)?, samples, labels)?;
                        Ok(MetricSet::from_evaluation(&e, class))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let pick = |f: fn(&MetricSet) -> Option<f64>| sets.iter().map(f).collect::<Vec<_>>();
            let drops: Vec<Option<f64>> = sets.iter().map(|s| Some(baseline.sensitivity? - s.sensitivity?)).collect();
            Ok(RandomRow {
                k,
                seeds: seeds.to_vec(),
                sensitivity: Summary::of(&pick(|s| s.sensitivity)),
                specificity: Summary::of(&pick(|s| s.specificity)),
                accuracy: Summary::of(&pick(|s| s.accuracy)),
                sensitivity_drop: Summary::of(&drops),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomReport { class_index: class, mode, baseline, rows })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn targets(t: &[usize]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub const INFORMED_COLUMNS: [&str; 16] = [
    "class",
    "mode",
    "epsilon",
    "k",
    "selection",
    "targets",
    "sensitivity",
    "specificity",
    "accuracy",
    "class_probability",
    "pgi_sensitivity",
    "pgi_specificity",
    "pgi_prob",
    "pgu_sensitivity",
    "pgu_specificity",
    "pgu_prob",
];

/// One row per (class, ε, k, selection); the baseline appears as `k = 0`
/// with empty gap columns.
pub fn write_informed_csv<W: Write>(w: W, reports: &[PerturbReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(INFORMED_COLUMNS)?;
    for r in reports {
        let head = |k: usize, sel: &str, t: &[usize], m: &MetricSet| {
            vec![
                r.class_index.to_string(),
                r.mode.name().to_string(),
                fmt(r.mode.epsilon()),
                k.to_string(),
                sel.to_string(),
                targets(t),
                fmt(m.sensitivity),
                fmt(m.specificity),
                fmt(m.accuracy),
                fmt(m.class_probability),
            ]
        };
        let mut row = head(0, "baseline", &[], &r.baseline);
        row.extend(std::iter::repeat_n(String::new(), 6));
        out.write_record(&row)?;
        for k in &r.rows {
            let mut row = head(k.k, "important", &k.important_targets, &k.important);
            row.extend([fmt(k.pgi_sensitivity), fmt(k.pgi_specificity), fmt(Some(k.pgi_prob))]);
            row.extend(std::iter::repeat_n(String::new(), 3));
            out.write_record(&row)?;
            let mut row = head(k.k, "unimportant", &k.unimportant_targets, &k.unimportant);
            row.extend(std::iter::repeat_n(String::new(), 3));
            row.extend([fmt(k.pgu_sensitivity), fmt(k.pgu_specificity), fmt(Some(k.pgu_prob))]);
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub const RANDOM_COLUMNS: [&str; 13] = [
    "class",
    "mode",
    "epsilon",
    "k",
    "seeds",
    "sensitivity_mean",
    "sensitivity_std",
    "specificity_mean",
    "specificity_std",
    "accuracy_mean",
    "accuracy_std",
    "sensitivity_drop_mean",
    "sensitivity_drop_std",
];

pub fn write_random_csv<W: Write>(w: W, reports: &[RandomReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RANDOM_COLUMNS)?;
    for r in reports {
        for row in &r.rows {
            out.write_record([
                r.class_index.to_string(),
                r.mode.name().to_string(),
                fmt(r.mode.epsilon()),
                row.k.to_string(),
                row.seeds.len().to_string(),
                fmt(row.sensitivity.mean),
                fmt(row.sensitivity.std),
                fmt(row.specificity.mean),
                fmt(row.specificity.std),
                fmt(row.accuracy.mean),
                fmt(row.accuracy.std),
                fmt(row.sensitivity_drop.mean),
                fmt(row.sensitivity_drop.std),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
