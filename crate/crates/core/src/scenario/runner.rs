use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::manifest::ExperimentManifest;
use super::report::{emit_report, MetricName, MetricRow, MetricsTable, ReportFormat, Split};
use crate::autoencoder::{
    train, train_multitask, AutoencoderConfig, AutoencoderModel, Checkpoint, TaskTarget,
    TrainConfig,
};
use crate::data::{
    join_embeddings, load_csv, row_split, Dataset, EmbeddingTable, JoinMode, RowSplit,
    ScalerParams, Task, VerticalSplit,
};
use crate::downstream::{
    labels_from, random_search_cv, LearnerSpec, Metric, Predictions, SearchSpace,
};
use crate::exchange::{read_embedding_file, write_embedding_file};
use crate::metrics::{self, ReconstructionReport, CORRECT_APE_THRESHOLD};
use crate::numeric::{Matrix, Rng};
use crate::{Error, Result};

const STREAM_SUBSAMPLE: u64 = 1;
const STREAM_ROW_SPLIT: u64 = 2;
const STREAM_VERTICAL: u64 = 3;
const STREAM_LEARNER: u64 = 4;
const STREAM_SEARCH: u64 = 5;
/// Autoencoder init/shuffle streams; peer B uses the next pair.
const STREAM_AE: u64 = 10;

/// A named 64-bit seed derived from the manifest seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    Rng::derive(seed, stream).next_u64()
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub table: MetricsTable,
    pub run_dir: PathBuf,
    /// Width of the matrix the downstream learner was trained on.
    pub feature_width: usize,
    pub learner: LearnerSpec,
}

/// Runs the manifest's scenario and writes every artifact under
/// [`ExperimentManifest::run_dir`].
pub fn run_scenario(m: &ExperimentManifest) -> Result<RunOutcome> {
    m.validate()?;
    let started = now_unix();
    let mut out = run(m).map_err(|e| Error::Scenario {
        scenario: m.scenario,
        source: Box::new(e),
    })?;
    out.table.started_unix = Some(started);
    out.table.finished_unix = Some(now_unix());
    fs::write(
        out.run_dir.join("report.json"),
        emit_report(std::slice::from_ref(&out.table), ReportFormat::Json)?,
    )?;
    Ok(out)
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Serialize)]
struct SplitIds<'a> {
    train: Vec<&'a str>,
    validation: Vec<&'a str>,
    test: Vec<&'a str>,
}

fn split_rows(split: &RowSplit, s: Split) -> &[usize] {
    match s {
        Split::Train => &split.train,
        Split::Validation => &split.validation,
        Split::Test => &split.test,
    }
}

fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run(m: &ExperimentManifest) -> Result<RunOutcome> {
    let spec = &m.dataset;
    let mut ds = load_csv(
        &spec.path,
        &spec.id_column,
        Some(&spec.target_column),
        spec.task,
    )?;
    if let Some(k) = spec.subsample {
        if k < ds.n() {
            ds = ds.subsample(k, sub_seed(m.seed, STREAM_SUBSAMPLE))?;
        }
    }
    let split = row_split(ds.n(), m.split, sub_seed(m.seed, STREAM_ROW_SPLIT))?;
    let y = ds
        .target()
        .ok_or_else(|| {
            Error::Data(format!(
                "dataset has no target column '{}'",
                spec.target_column
            ))
        })?
        .to_vec();

    let run_dir = m.run_dir();
    fs::create_dir_all(&run_dir)?;
    fs::write(run_dir.join("manifest.json"), m.to_json())?;
    let ids_of = |idx: &[usize]| idx.iter().map(|&i| ds.ids()[i].as_str()).collect();
    write_json(
        run_dir.join("split.json"),
        &SplitIds {
            train: ids_of(&split.train),
            validation: ids_of(&split.validation),
            test: ids_of(&split.test),
        },
    )?;

    let mut recon: Vec<Vec<ReconstructionReport>> = Vec::new();
    let features: [Matrix; 3] = match m.scenario {
        0 => {
            let scaler = ScalerParams::fit(ds.features(), &split.train)?;
            write_json(run_dir.join("scaler.json"), &scaler)?;
            let x = scaler.transform_matrix(ds.features())?;
            Split::ALL.map(|s| x.select_rows(split_rows(&split, s)))
        }
        1 | 3 => {
            let peer = train_peer(m, &ds, &split, "shared", STREAM_AE, &run_dir)?;
            recon.push(peer.reconstruction);
            Split::ALL.map(|s| peer.table.vectors().select_rows(split_rows(&split, s)))
        }
        2 | 4 => {
            let vspec = m.vertical_split.as_ref().ok_or_else(|| {
                Error::Manifest(format!("scenario {} needs a vertical_split", m.scenario))
            })?;
            let plan = VerticalSplit::plan(&ds, vspec, sub_seed(m.seed, STREAM_VERTICAL))?;
            write_json(run_dir.join("vertical_split.json"), &plan)?;
            let (a, b) = plan.apply(&ds)?;
            let pa = train_peer(m, &a, &split, "peer_a", STREAM_AE, &run_dir)?;
            let pb = train_peer(m, &b, &split, "peer_b", STREAM_AE + 2, &run_dir)?;
            recon.push(pa.reconstruction);
            recon.push(pb.reconstruction);
            let mut joined = Vec::with_capacity(3);
            for s in Split::ALL {
                let idx = split_rows(&split, s);
                let j = join_embeddings(
                    &subset(&pa.table, idx)?,
                    &subset(&pb.table, idx)?,
                    JoinMode::Strict,
                )?;
                if j.ids.iter().zip(idx).any(|(id, &i)| *id != ds.ids()[i]) {
                    return Err(Error::Data(format!(
                        "joined {} rows are not in split order",
                        s.label()
                    )));
                }
                joined.push(j.features);
            }
            let [tr, va, te]: [Matrix; 3] = joined.try_into().expect("three splits");
            [tr, va, te]
        }
        other => {
            return Err(Error::Manifest(format!(
                "scenario must be 0..=4, got {other}"
            )))
        }
    };
    let feature_width = features[0].cols();

    let y_split: [Vec<f64>; 3] =
        Split::ALL.map(|s| split_rows(&split, s).iter().map(|&i| y[i]).collect());
    let learner = choose_learner(m, &features[0], &y_split[0], &run_dir)?;
    let model = learner.fit(&features[0], &y_split[0])?;
    write_json(run_dir.join("learner.json"), &model)?;

    let mut rows = Vec::new();
    for (k, s) in Split::ALL.into_iter().enumerate() {
        let pred = model.predict(&features[k])?;
        let truth = &y_split[k];
        let mut push = |metric, value| {
            rows.push(MetricRow {
                split: s,
                metric,
                value,
            })
        };
        match (&pred, ds.task()) {
            (Predictions::Regression(p), Task::Regression) => {
                push(MetricName::R2, metrics::r2(truth, p)?);
                push(MetricName::Mape, metrics::mape(truth, p)?.value);
            }
            (Predictions::Classification { labels, .. }, Task::Classification) => {
                let cm =
                    metrics::classification_metrics(&labels_from(truth)?, labels, ds.n_classes()?)?;
                push(MetricName::Accuracy, cm.accuracy);
                push(MetricName::Precision, cm.precision);
                push(MetricName::Recall, cm.recall);
            }
            _ => {
                return Err(Error::Manifest(
                    "learner does not match the dataset task".into(),
                ))
            }
        }
        if !recon.is_empty() {
            let mean = |f: fn(&ReconstructionReport) -> f64| {
                recon.iter().map(|r| f(&r[k])).sum::<f64>() / recon.len() as f64
            };
            push(
                MetricName::RepresentationError,
                mean(|r| r.representation_error),
            );
            push(MetricName::CorrectRate, mean(|r| r.correct_rate));
        }
    }

    let table = MetricsTable {
        name: m.name.clone(),
        scenario: m.scenario,
        seed: m.seed,
        task: ds.task(),
        manifest_digest: m.digest(),
        started_unix: None,
        finished_unix: None,
        rows,
    };
    let one = std::slice::from_ref(&table);
    fs::write(
        run_dir.join("report.csv"),
        emit_report(one, ReportFormat::Csv)?,
    )?;
    fs::write(
        run_dir.join("report.txt"),
        emit_report(one, ReportFormat::Text)?,
    )?;
    Ok(RunOutcome {
        table,
        run_dir,
        feature_width,
        learner,
    })
}

fn choose_learner(
    m: &ExperimentManifest,
    x: &Matrix,
    y: &[f64],
    run_dir: &Path,
) -> Result<LearnerSpec> {
    if let Some(spec) = &m.learner {
        let mut spec = spec.clone();
        if let LearnerSpec::Logistic(p) = &mut spec {
            p.seed = sub_seed(m.seed, STREAM_LEARNER);
        }
        return Ok(spec);
    }
    let settings = m.search.clone().unwrap_or_default();
    let seed = sub_seed(m.seed, STREAM_SEARCH);
    let (mut space, metric) = match m.dataset.task {
        Task::Regression => (SearchSpace::ridge(seed), Metric::R2),
        Task::Classification => (SearchSpace::logistic(seed), Metric::Accuracy),
    };
    space.n_samples = settings.n_samples;
    space.n_folds = settings.n_folds;
    let outcome = random_search_cv(x, y, &space, metric)?;
    fs::write(run_dir.join("cv_table.csv"), outcome.table.to_csv_string())?;
    Ok(outcome.best)
}

struct PeerOutput {
    /// Embeddings as read back from the exchanged file.
    table: EmbeddingTable,
    /// One report per split.
    reconstruction: Vec<ReconstructionReport>,
}

/// Scales, trains and encodes one peer's columns; only training rows reach
/// the scaler and the autoencoder fit.
fn train_peer(
    m: &ExperimentManifest,
    ds: &Dataset,
    split: &RowSplit,
    tag: &str,
    stream: u64,
    run_dir: &Path,
) -> Result<PeerOutput> {
    let scaler = ScalerParams::fit(ds.features(), &split.train)?;
    write_json(run_dir.join(format!("scaler_{tag}.json")), &scaler)?;
    let x = scaler.transform_matrix(ds.features())?;
    let x_train = x.select_rows(&split.train);
    let x_val = x.select_rows(&split.validation);

    let ae = &m.autoencoder;
    let mut cfg = AutoencoderConfig {
        encoder_hidden: ae.encoder_hidden,
        ..AutoencoderConfig::new(ds.d(), ae.latent_dim)
    }
    .with_output_activation(ae.output_activation);
    let multitask = m.scenario >= 3;
    if multitask {
        let classes = match ds.task() {
            Task::Regression => 1,
            Task::Classification => ds.n_classes()?,
        };
        cfg = cfg.with_multitask(ds.task(), classes, ae.lambda);
    }
    let mut model = AutoencoderModel::build(cfg, &mut Rng::new(sub_seed(m.seed, stream)))?;
    let tc = TrainConfig {
        epochs: m.training.epochs,
        batch_size: m.training.batch_size,
        learning_rate: m.training.learning_rate,
        seed: sub_seed(m.seed, stream + 1),
        shuffle: true,
    };

    let history = if multitask {
        let y = ds
            .target()
            .ok_or_else(|| Error::Data("multitask autoencoder needs a target".into()))?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<f64>>();
        let (y_train, y_val) = (pick(&split.train), pick(&split.validation));
        match ds.task() {
            Task::Regression => train_multitask(
                &mut model,
                &x_train,
                TaskTarget::Regression(&y_train),
                Some((&x_val, TaskTarget::Regression(&y_val))),
                &tc,
            )?,
            Task::Classification => {
                let (l_train, l_val) = (labels_from(&y_train)?, labels_from(&y_val)?);
                train_multitask(
                    &mut model,
                    &x_train,
                    TaskTarget::Classes(&l_train),
                    Some((&x_val, TaskTarget::Classes(&l_val))),
                    &tc,
                )?
            }
        }
    } else {
        train(&mut model, &x_train, Some(&x_val), &tc)?
    };
    write_json(run_dir.join(format!("history_{tag}.json")), &history)?;
    Checkpoint::new(model.clone(), ds.feature_names().to_vec(), Some(scaler))
        .save(run_dir.join(format!("{tag}.ckpt.json")))?;

    let lse = run_dir.join(format!("{tag}.lse"));
    write_embedding_file(&model.encode(ds.ids(), &x, tag)?, &lse)?;
    let table = read_embedding_file(&lse)?;

    let mut reconstruction = Vec::with_capacity(3);
    for s in Split::ALL {
        let xs = x.select_rows(split_rows(split, s));
        reconstruction.push(metrics::reconstruction_report(
            &xs,
            &model.reconstruct(&xs)?,
            CORRECT_APE_THRESHOLD,
        )?);
    }
    Ok(PeerOutput {
        table,
        reconstruction,
    })
}

fn subset(t: &EmbeddingTable, idx: &[usize]) -> Result<EmbeddingTable> {
    EmbeddingTable::new(
        idx.iter().map(|&i| t.ids()[i].clone()).collect(),
        t.vectors().select_rows(idx),
        t.source_tag(),
    )
}
