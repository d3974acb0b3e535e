//! TOML-configured replicate runner.
//!
//! A run directory holds `config.json` (the resolved configuration), one
//! `replicate-NNN/` folder per replicate with `metrics.jsonl` and
//! `checkpoint.json` (plus `checkpoint-ITER.json` when `checkpoint_every` is
//! set), `summary.json` and `curves.csv`.
//!
//! ```toml
//! name = "shifting-bar-mt"
//! replicates = 25
//! seed_base = 0
//! report = ["table1"]
//!
//! [dataset]
//! kind = "shifting_bar"
//! length = 9
//! bar = 1
//!
//! [model]
//! n_hidden = 4
//!
//! [train]
//! n_updates = 50000
//! learning_rate = { kind = "constant", rate = 0.2 }
//! mode = { p_max = 0.1, alpha = 0.0004, beta = -6.0 }
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{bars_and_stripes, load_mnist, random_support, shifting_bar};
use crate::distribution::DataDistribution;
use crate::error::{Error, Result};
use crate::io::{load_distribution, save_checkpoint, MetricsWriter};
use crate::training::{MetricsRecord, TrainConfig, Trainer, TrainingData};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MODETRAIN_OUT";

/// Mixed into the replicate seed when a random support is drawn per
/// replicate, so support and initialisation use unrelated streams.
const SUPPORT_SEED_SALT: u64 = 0x0bb0_12ce_5eed_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    ShiftingBar {
        length: usize,
        bar: usize,
        #[serde(default)]
        inverted: bool,
    },
    BarsAndStripes {
        side: usize,
    },
    /// Uniform over `size` distinct random patterns. Without `seed` every
    /// replicate draws its own support.
    RandomSupport {
        n_visible: usize,
        size: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default = "default_threshold")]
        threshold: f64,
        /// Keep only the first `limit` images.
        #[serde(default)]
        limit: Option<usize>,
    },
    /// A distribution exported by `make-data`.
    File {
        path: PathBuf,
    },
}

fn default_threshold() -> f64 {
    0.5
}

/// Materialised training set.
#[derive(Debug, Clone)]
pub enum Dataset {
    Distribution(DataDistribution),
    Rows(Array2<f64>),
}

impl Dataset {
    pub fn as_training(&self) -> TrainingData<'_> {
        match self {
            Dataset::Distribution(d) => TrainingData::Distribution(d),
            Dataset::Rows(r) => TrainingData::Rows(r),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.as_training().n_visible()
    }
}

impl DatasetSpec {
    /// Whether `build` depends on the replicate seed.
    pub fn per_replicate(&self) -> bool {
        matches!(self, DatasetSpec::RandomSupport { seed: None, .. })
    }

    pub fn build(&self, replicate_seed: u64) -> Result<Dataset> {
        Ok(match self {
            DatasetSpec::ShiftingBar {
                length,
                bar,
                inverted,
            } => Dataset::Distribution(shifting_bar(*length, *bar, *inverted)?),
            DatasetSpec::BarsAndStripes { side } => {
                Dataset::Distribution(bars_and_stripes(*side)?)
            }
            DatasetSpec::RandomSupport {
                n_visible,
                size,
                seed,
            } => {
                let seed = seed.unwrap_or(replicate_seed ^ SUPPORT_SEED_SALT);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Dataset::Distribution(random_support(*n_visible, *size, &mut rng)?)
            }
            DatasetSpec::Mnist {
                images,
                labels,
                threshold,
                limit,
            } => {
                let set = load_mnist(images, labels, *threshold)?;
                let rows = match limit {
                    Some(k) if *k < set.count() => {
                        set.images.slice(ndarray::s![..*k, ..]).to_owned()
                    }
                    _ => set.images,
                };
                Dataset::Rows(rows)
            }
            DatasetSpec::File { path } => Dataset::Distribution(load_distribution(path)?),
        })
    }

    /// Binarisation threshold, when the data was thresholded.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            DatasetSpec::Mnist { threshold, .. } => Some(*threshold),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    /// Checked against the dataset when given.
    #[serde(default)]
    pub n_visible: Option<usize>,
    pub n_hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub model: ModelShape,
    /// `n_hidden` comes from `model`; the `seed` field is replaced by
    /// `seed_base + replicate index`.
    pub train: TrainConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Defaults to `<output root>/<name>`.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Free-form labels of the table or figure the run reproduces.
    #[serde(default)]
    pub report: Vec<String>,
    /// Intermediate checkpoint interval in updates.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
}

fn default_replicates() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidArgument(format!(
                "invalid experiment name {:?}",
                self.name
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.train.n_hidden != 0 && self.train.n_hidden != self.model.n_hidden {
            return Err(Error::InvalidArgument(format!(
                "train.n_hidden = {} disagrees with model.n_hidden = {}",
                self.train.n_hidden, self.model.n_hidden
            )));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::InvalidArgument("checkpoint_every must be positive".into()));
        }
        self.replicate_config(0).validate()
    }

    /// Training settings of replicate `index`.
    pub fn replicate_config(&self, index: usize) -> TrainConfig {
        let mut tc = self.train.clone();
        tc.n_hidden = self.model.n_hidden;
        tc.seed = self.replicate_seed(index);
        tc
    }

    pub fn replicate_seed(&self, index: usize) -> u64 {
        self.seed_base.wrapping_add(index as u64)
    }

    pub fn bundle_dir(&self, root: &Path) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| root.join(&self.name))
    }
}

/// Per-replicate outcome as listed in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub index: usize,
    pub seed: u64,
    pub final_log_likelihood: Option<f64>,
    pub final_mean_log_likelihood: Option<f64>,
    pub final_kl: Option<f64>,
    pub best_log_likelihood: Option<f64>,
    pub best_iter: Option<usize>,
    pub mode_updates: usize,
}

/// Order statistics of one quantity across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub best: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    /// `best` is the maximum when `higher_is_better`, else the minimum.
    /// `None` when `values` is empty.
    pub fn of(values: &[f64], higher_is_better: bool) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (min, max) = (v[0], v[v.len() - 1]);
        Some(Spread {
            best: if higher_is_better { max } else { min },
            median: median_sorted(&v),
            min,
            max,
        })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub init_std: f64,
    pub convention: crate::rbm::Convention,
    pub binarization_threshold: Option<f64>,
    pub n_visible: usize,
    pub n_hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub report: Vec<String>,
    pub replicates: usize,
    pub metadata: Metadata,
    pub final_log_likelihood: Option<Spread>,
    pub best_log_likelihood: Option<Spread>,
    pub final_kl: Option<Spread>,
    pub runs: Vec<ReplicateSummary>,
}

/// Reduces one replicate's metrics stream.
pub fn summarize_replicate(index: usize, seed: u64, records: &[MetricsRecord]) -> ReplicateSummary {
    let last = records.last();
    let best = records
        .iter()
        .filter_map(|r| r.log_likelihood.map(|ll| (r.iter, ll)))
        .fold(None, |acc: Option<(usize, f64)>, (it, ll)| match acc {
            Some((_, b)) if b >= ll => acc,
            _ => Some((it, ll)),
        });
    ReplicateSummary {
        index,
        seed,
        final_log_likelihood: last.and_then(|r| r.log_likelihood),
        final_mean_log_likelihood: last.and_then(|r| r.mean_log_likelihood),
        final_kl: last.and_then(|r| r.kl),
        best_log_likelihood: best.map(|b| b.1),
        best_iter: best.map(|b| b.0),
        mode_updates: last.map_or(0, |r| r.mode_updates),
    }
}

/// Builds the summary from per-replicate metrics streams.
pub fn summarize(
    cfg: &ExperimentConfig,
    metadata: Metadata,
    streams: &[Vec<MetricsRecord>],
) -> Summary {
    let runs: Vec<ReplicateSummary> = streams
        .iter()
        .enumerate()
        .map(|(i, recs)| summarize_replicate(i, cfg.replicate_seed(i), recs))
        .collect();
    let collect = |f: fn(&ReplicateSummary) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(f).collect()
    };
    Summary {
        name: cfg.name.clone(),
        report: cfg.report.clone(),
        replicates: cfg.replicates,
        metadata,
        final_log_likelihood: Spread::of(&collect(|r| r.final_log_likelihood), true),
        best_log_likelihood: Spread::of(&collect(|r| r.best_log_likelihood), true),
        final_kl: Spread::of(&collect(|r| r.final_kl), false),
        runs,
    }
}

/// Median/min/max of log-likelihood and KL per evaluation iteration.
pub fn write_curves_csv<W: Write>(streams: &[Vec<MetricsRecord>], mut out: W) -> Result<()> {
    writeln!(
        out,
        "iter,median_ll,min_ll,max_ll,median_kl,min_kl,max_kl"
    )?;
    let Some(first) = streams.first() else {
        return Ok(());
    };
    for (t, rec) in first.iter().enumerate() {
        let at = |f: fn(&MetricsRecord) -> Option<f64>| -> Vec<f64> {
            streams
                .iter()
                .filter_map(|s| s.get(t).filter(|r| r.iter == rec.iter).and_then(f))
                .collect()
        };
        let fmt = |s: Option<Spread>| match s {
            Some(s) => format!("{},{},{}", s.median, s.min, s.max),
            None => ",,".to_string(),
        };
        writeln!(
            out,
            "{},{},{}",
            rec.iter,
            fmt(Spread::of(&at(|r| r.log_likelihood), true)),
            fmt(Spread::of(&at(|r| r.kl), false))
        )?;
    }
    Ok(())
}

/// Paths and summary of a finished run.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub summary: Summary,
}

pub fn replicate_dir(bundle: &Path, index: usize) -> PathBuf {
    bundle.join(format!("replicate-{index:03}"))
}

fn run_replicate(
    cfg: &ExperimentConfig,
    index: usize,
    shared: Option<&Dataset>,
    bundle: &Path,
) -> Result<Vec<MetricsRecord>> {
    let tc = cfg.replicate_config(index);
    let owned;
    let data = match shared {
        Some(d) => d,
        None => {
            owned = cfg.dataset.build(tc.seed)?;
            &owned
        }
    };
    let dir = replicate_dir(bundle, index);
    fs::create_dir_all(&dir)?;
    let mut writer = MetricsWriter::new(BufWriter::new(fs::File::create(
        dir.join("metrics.jsonl"),
    )?));
    let mut records = Vec::new();
    let mut trainer = Trainer::new(tc, data.as_training())?;
    loop {
        if trainer.should_record() {
            let rec = trainer.record()?;
            writer.write(&rec)?;
            records.push(rec);
        }
        if let Some(every) = cfg.checkpoint_every {
            let it = trainer.iteration();
            if it > 0 && it % every == 0 && !trainer.is_finished() {
                save_checkpoint(trainer.rbm(), &dir.join(format!("checkpoint-{it}.json")))?;
            }
        }
        if trainer.is_finished() {
            break;
        }
        trainer.step()?;
    }
    writer.finish()?;
    save_checkpoint(trainer.rbm(), &dir.join("checkpoint.json"))?;
    Ok(records)
}

/// Runs every replicate on a pool of `jobs` threads (`0` = rayon default)
/// and writes the bundle under [`ExperimentConfig::bundle_dir`].
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path, jobs: usize) -> Result<Bundle> {
    cfg.validate()?;
    let shared = if cfg.dataset.per_replicate() {
        None
    } else {
        Some(cfg.dataset.build(cfg.seed_base)?)
    };
    let probe = match &shared {
        Some(d) => d.n_visible(),
        None => cfg.dataset.build(cfg.replicate_seed(0))?.n_visible(),
    };
    if let Some(n) = cfg.model.n_visible {
        if n != probe {
            return Err(Error::DimensionMismatch {
                what: "model.n_visible",
                expected: probe,
                found: n,
            });
        }
    }
    let dir = cfg.bundle_dir(root);
    fs::create_dir_all(&dir)?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let streams: Vec<Vec<MetricsRecord>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|i| run_replicate(cfg, i, shared.as_ref(), &dir))
            .collect::<Result<_>>()
    })?;

    let metadata = Metadata {
        init_std: cfg.train.init_std,
        convention: cfg.train.convention,
        binarization_threshold: cfg.dataset.threshold(),
        n_visible: probe,
        n_hidden: cfg.model.n_hidden,
    };
    let summary = summarize(cfg, metadata, &streams);
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    let mut curves = BufWriter::new(fs::File::create(dir.join("curves.csv"))?);
    write_curves_csv(&streams, &mut curves)?;
    curves.flush()?;
    Ok(Bundle { dir, summary })
}
