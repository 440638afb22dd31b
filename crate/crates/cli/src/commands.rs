//! One function per pipeline stage. Each reads the artifacts of earlier
//! stages from the run directory and records its own in the manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use skelshap_core::gcn::{self, Checkpoint, Model, ModelConfig, TrainReport};
use skelshap_core::perturb::{
    informed_report, random_control, threshold_sweep, write_informed_csv, write_random_csv, MetricSet, PerturbReport,
    RandomReport,
};
use skelshap_core::selfcheck::run_quick;
use skelshap_core::shap::io::{read_attributions, write_attributions, write_beeswarm, write_local};
use skelshap_core::shap::{class_keypoint_scores, explain_dataset, rank_keypoints, Direction};
use skelshap_core::skeleton::io::SkeletonJson;
use skelshap_core::skeleton::{generate_synthetic, SyntheticConfig, TopologyFile};
use skelshap_core::{
    assemble, Attribution, BackgroundSet, Error, FeatureTensor, Granularity, GraphTopology, Result, SkeletonSequence,
};

use crate::artifacts::{check_single_hash, tagged_csv, Stage};
use crate::config::{DatasetMode, RunConfig};

const TRAIN: &str = "train.json";
const VAL: &str = "val.json";
const TOPOLOGY: &str = "topology.json";
const MODEL: &str = "model.gcnc";
const ATTRIBUTIONS: &str = "attributions.phiv";

/// Skeleton split tagged with the producing config.
#[derive(Debug, Serialize, Deserialize)]
struct DataFile {
    config_hash: String,
    sequences: Vec<SkeletonJson>,
}

struct Split {
    x: Vec<FeatureTensor>,
    y: Vec<usize>,
    ids: Vec<String>,
}

struct Loaded {
    topology: GraphTopology,
    train: Split,
    val: Split,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}; run the earlier stage first", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn load_sequences(path: &Path) -> Result<Vec<SkeletonSequence>> {
    #[derive(Deserialize)]
    struct Records {
        sequences: Vec<SkeletonJson>,
    }
    let records: Records = read_json(path)?;
    records.sequences.iter().map(SkeletonJson::to_sequence).collect()
}

fn load_data(config: &RunConfig) -> Result<Loaded> {
    let dir = &config.out;
    let topology = TopologyFile::load(dir.join(TOPOLOGY))
        .map_err(|e| Error::Data(format!("topology: {e}; run `gen` first")))?
        .build()?;
    let split = |file: &str| -> Result<Split> {
        let seqs = load_sequences(&dir.join(file))?;
        let x = seqs.iter().map(|s| assemble(s, &topology, &config.features)).collect::<Result<Vec<_>>>()?;
        Ok(Split {
            x,
            y: seqs.iter().map(|s| s.label()).collect(),
            ids: seqs.iter().map(|s| s.subject_id().to_string()).collect(),
        })
    };
    let (train, val) = (split(TRAIN)?, split(VAL)?);
    if train.x.is_empty() || val.x.is_empty() {
        return Err(Error::Data("training and validation splits must be nonempty".into()));
    }
    Ok(Loaded { topology, train, val })
}

fn load_model(config: &RunConfig, topology: &GraphTopology) -> Result<Model> {
    let path = config.out.join(MODEL);
    if !path.exists() {
        return Err(Error::Data(format!("{} not found; run `train` first", path.display())));
    }
    Checkpoint::load(path)?.into_model(topology)
}

pub fn gen(config: &RunConfig) -> Result<String> {
    config.check_inputs()?;
    let hash = config.hash()?;
    let mut stage = Stage::new(&config.out, "gen", &hash, config.seed);
    let topology_file = config.topology_file()?;
    let topology = topology_file.build()?;
    let (train, val) = match config.dataset.mode {
        DatasetMode::Synthetic => {
            let split = |seed: u64, n_samples: usize| {
                generate_synthetic(&SyntheticConfig { seed, n_samples, ..config.dataset.synthetic.clone() })
            };
            let (train_seed, val_seed) = (2 * config.seed, 2 * config.seed + 1);
            stage.seed("train_split", train_seed)?;
            stage.seed("val_split", val_seed)?;
            (split(train_seed, config.dataset.train_samples)?, split(val_seed, config.dataset.val_samples)?)
        }
        DatasetMode::CpLike | DatasetMode::NtuLike => {
            let load = |p: &Option<std::path::PathBuf>| load_sequences(p.as_deref().expect("checked above"));
            (load(&config.dataset.train_path)?, load(&config.dataset.val_path)?)
        }
    };
    for s in train.iter().chain(&val) {
        if s.keypoints() != topology.n() {
            return Err(Error::Data(format!(
                "sequence {:?} has {} key points, the topology {}",
                s.subject_id(),
                s.keypoints(),
                topology.n()
            )));
        }
        // Fail early on sequences the feature recipe cannot handle.
        assemble(s, &topology, &config.features)?;
    }
    for (file, seqs) in [(TRAIN, &train), (VAL, &val)] {
        let data =
            DataFile { config_hash: hash.clone(), sequences: seqs.iter().map(SkeletonJson::from_sequence).collect() };
        stage.write(file, &serde_json::to_vec(&data)?)?;
    }
    stage.write(TOPOLOGY, &serde_json::to_vec_pretty(&topology_file)?)?;
    stage.write("config.json", &serde_json::to_vec_pretty(&Tagged { config_hash: &hash, value: config })?)?;
    stage.finish()?;
    Ok(format!("gen: {} training and {} validation sequences, topology {}", train.len(), val.len(), topology.hash()))
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    config_hash: &'a str,
    #[serde(flatten)]
    value: &'a T,
}

pub fn train(config: &RunConfig) -> Result<String> {
    let data = load_data(config)?;
    let hash = config.hash()?;
    let mut stage = Stage::new(&config.out, "train", &hash, config.seed);
    let classes = data.train.y.iter().chain(&data.val.y).max().map_or(0, |&m| m + 1).max(2);
    let model_config = ModelConfig {
        channels: config.model.channels.clone(),
        strides: config.model.strides.clone(),
        temporal_kernel: config.model.temporal_kernel,
        ..ModelConfig::new(data.train.x[0].shape(), classes)
    };
    let mut model = Model::new(model_config, data.topology.clone(), config.seed)?;
    let report: TrainReport = gcn::train(
        &mut model,
        &data.train.x,
        &data.train.y,
        Some((&data.val.x, &data.val.y)),
        &config.train,
        config.seed,
    )?;
    stage.seed("init_and_shuffle", config.seed)?;
    let mut bytes = Vec::new();
    Checkpoint::from_model(&model).write(&mut bytes)?;
    stage.write(MODEL, &bytes)?;
    stage.write("train_report.json", &serde_json::to_vec_pretty(&Tagged { config_hash: &hash, value: &report })?)?;
    stage.finish()?;
    Ok(format!(
        "train: {} epochs, train accuracy {:.3}, validation accuracy {:.3}",
        report.epochs_run,
        report.train_accuracy,
        report.val_accuracy.unwrap_or(f64::NAN)
    ))
}

pub fn explain(config: &RunConfig) -> Result<String> {
    let data = load_data(config)?;
    let model = load_model(config, &data.topology)?;
    let hash = config.hash()?;
    let mut stage = Stage::new(&config.out, "explain", &hash, config.seed);
    let background = BackgroundSet::sample_from(&data.train.x, config.explain.background, config.seed)?;
    stage.seed("background", config.seed)?;
    stage.seed("estimator", config.explain.estimator)?;
    let count = config.explain.max_samples.unwrap_or(data.val.x.len()).min(data.val.x.len());
    let samples = &data.val.x[..count];
    let ids = &data.val.ids[..count];
    let attributions = explain_dataset(&model, samples, &background, &config.explain_config())?;

    let shape = samples.first().map_or(model.config().input_shape, |x| x.shape());
    let mut bytes = Vec::new();
    write_attributions(&mut bytes, shape, ids, &attributions, serde_json::json!({ "config_hash": hash }))?;
    stage.write(ATTRIBUTIONS, &bytes)?;

    let mut csv = Vec::new();
    write_beeswarm(&mut csv, &attributions, samples, ids)?;
    stage.write("beeswarm.csv", &tagged_csv(&hash, &csv))?;
    let mut csv = Vec::new();
    write_local(&mut csv, &attributions, ids, shape[0], shape[3])?;
    stage.write("local.csv", &tagged_csv(&hash, &csv))?;

    if config.explain.granularity != Granularity::PerGroup {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["class", "keypoint", "score", "rank"])?;
        for (class, scores) in class_scores(&attributions, &data.val.y[..count], model.num_classes(), shape)? {
            let ranking = rank_keypoints(&scores, Direction::Important);
            for (v, s) in scores.iter().enumerate() {
                let rank = ranking.iter().position(|&r| r == v).expect("ranking covers every key point");
                out.write_record([class.to_string(), v.to_string(), format!("{s:.9e}"), (rank + 1).to_string()])?;
            }
        }
        let body = out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        stage.write("keypoint_scores.csv", &tagged_csv(&hash, &body))?;
    }
    stage.finish()?;
    let worst = attributions.iter().map(|a| a.efficiency_gap().abs()).fold(0.0, f64::max);
    Ok(format!("explain: {} attributions for {count} samples, max efficiency gap {worst:.1e}", attributions.len()))
}

/// Per-class key-point scores for every class with explained samples.
fn class_scores(
    attributions: &[Attribution],
    labels: &[usize],
    classes: usize,
    shape: [usize; 5],
) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for class in 0..classes {
        let present = attributions.iter().any(|a| a.class_index == class && labels.get(a.sample_index) == Some(&class));
        if present {
            out.push((class, class_keypoint_scores(attributions, labels, class, shape[0], shape[3])?));
        }
    }
    Ok(out)
}

struct Ranked {
    data: Loaded,
    model: Model,
    rankings: Vec<(usize, Vec<usize>)>,
}

fn ranked(config: &RunConfig) -> Result<Ranked> {
    let data = load_data(config)?;
    let model = load_model(config, &data.topology)?;
    let path = config.out.join(ATTRIBUTIONS);
    let file = std::fs::File::open(&path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}; run `explain` first", path.display())))?;
    let (header, attributions) = read_attributions(file)?;
    if header.granularity == Granularity::PerGroup {
        return Err(Error::Config("perturbation needs key-point attributions, not per-group players".into()));
    }
    let labels = &data.val.y[..header.sample_ids.len().min(data.val.y.len())];
    let scores = class_scores(&attributions, labels, model.num_classes(), header.input_shape)?;
    let wanted = config.perturb.classes.clone();
    let rankings: Vec<(usize, Vec<usize>)> = scores
        .into_iter()
        .filter(|(c, _)| wanted.as_ref().is_none_or(|w| w.contains(c)))
        .map(|(c, s)| (c, rank_keypoints(&s, Direction::Important)))
        .collect();
    if let Some(w) = &wanted {
        if let Some(missing) = w.iter().find(|c| !rankings.iter().any(|(r, _)| r == *c)) {
            return Err(Error::Data(format!("no explained samples of class {missing}")));
        }
    }
    if rankings.is_empty() {
        return Err(Error::Data("no class has explained samples of its own label".into()));
    }
    Ok(Ranked { data, model, rankings })
}

fn ks(config: &RunConfig, n: usize) -> Vec<usize> {
    (1..=config.perturb.k_max.min(n)).collect()
}

fn baseline_csv(reports: &[PerturbReport]) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["class", "sensitivity", "specificity", "accuracy", "class_probability"])?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in reports {
        let m: &MetricSet = &r.baseline;
        out.write_record([
            r.class_index.to_string(),
            fmt(m.sensitivity),
            fmt(m.specificity),
            fmt(m.accuracy),
            fmt(m.class_probability),
        ])?;
    }
    out.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct PerturbJson<'a> {
    config_hash: &'a str,
    informed: &'a [PerturbReport],
    random: &'a [RandomReport],
}

pub fn perturb(config: &RunConfig) -> Result<String> {
    let Ranked { data, model, rankings } = ranked(config)?;
    let hash = config.hash()?;
    let mut stage = Stage::new(&config.out, "perturb", &hash, config.seed);
    let ks = ks(config, data.topology.n());
    let mode = config.perturb.mode;
    let (x, y) = (&data.val.x, &data.val.y);
    let mut informed = Vec::new();
    let mut random = Vec::new();
    for (class, ranking) in &rankings {
        informed.push(informed_report(&model, x, y, ranking, *class, mode, &ks)?);
        if !ks.is_empty() {
            random.push(random_control(&model, x, y, *class, mode, &ks, &config.perturb.random_seeds)?);
        }
    }
    if ks.is_empty() {
        stage.write("perturb_baseline.csv", &tagged_csv(&hash, &baseline_csv(&informed)?))?;
    } else {
        stage.seed("random_control", &config.perturb.random_seeds)?;
        let mut body = Vec::new();
        write_informed_csv(&mut body, &informed)?;
        stage.write("perturb_informed.csv", &tagged_csv(&hash, &body))?;
        let mut body = Vec::new();
        write_random_csv(&mut body, &random)?;
        stage.write("perturb_random.csv", &tagged_csv(&hash, &body))?;
    }
    let json = PerturbJson { config_hash: &hash, informed: &informed, random: &random };
    stage.write("perturb.json", &serde_json::to_vec_pretty(&json)?)?;
    stage.finish()?;

    let mut lines = vec![format!("perturb: {} mode, k in 1..={}", mode.name(), ks.len())];
    for r in &informed {
        let holds = r
            .rows
            .iter()
            .filter(|row| matches!((row.pgi_sensitivity, row.pgu_sensitivity), (Some(i), Some(u)) if i >= u))
            .count();
        lines.push(format!(
            "  class {}: ranking {:?}, PGI >= PGU (sensitivity) for {holds}/{} k",
            r.class_index,
            r.ranking,
            r.rows.len()
        ));
    }
    Ok(lines.join("\n"))
}

pub fn sweep(config: &RunConfig) -> Result<String> {
    let Ranked { data, model, rankings } = ranked(config)?;
    let hash = config.hash()?;
    let mut stage = Stage::new(&config.out, "sweep", &hash, config.seed);
    let ks = ks(config, data.topology.n());
    if ks.is_empty() {
        return Err(Error::Config("the sweep needs k_max >= 1".into()));
    }
    let mut reports = Vec::new();
    for (class, ranking) in &rankings {
        reports.extend(threshold_sweep(
            &model,
            &data.val.x,
            &data.val.y,
            ranking,
            *class,
            &config.sweep.epsilons,
            &ks,
        )?);
    }
    let mut body = Vec::new();
    write_informed_csv(&mut body, &reports)?;
    stage.write("sweep.csv", &tagged_csv(&hash, &body))?;
    stage.finish()?;
    Ok(format!(
        "sweep: {} scale factors x {} classes x k in 1..={}",
        config.sweep.epsilons.len(),
        rankings.len(),
        ks.len()
    ))
}

/// Runs the quick self-checks and, when the run directory exists, checks
/// that its artifacts share one config hash. Returns whether all passed.
pub fn verify(config: &RunConfig) -> Result<(bool, String)> {
    let mut lines = Vec::new();
    let mut passed = true;
    for c in run_quick(config.seed)? {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        passed &= c.passed;
        let detail = if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) };
        lines.push(format!("[{tag}] {}: {:.3e} <= {:.0e}{detail}", c.name, c.value, c.tolerance));
    }
    if config.out.is_dir() {
        match check_single_hash(&config.out)? {
            Some(h) => lines.push(format!("[PASS] run directory {}: single config hash {h}", config.out.display())),
            None => lines.push(format!("[PASS] run directory {}: no tagged artifacts", config.out.display())),
        }
    }
    Ok((passed, lines.join("\n")))
}
