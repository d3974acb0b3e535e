//! File formats: model checkpoints, metrics streams and dataset exports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::distribution::DataDistribution;
use crate::error::{Error, Result};
use crate::rbm::{Convention, RbmParams};
use crate::training::MetricsRecord;

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint layout. Weights are stored row-major
/// (`n_visible` rows of `n_hidden`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub convention: Convention,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Checkpoint {
    pub fn from_rbm(rbm: &RbmParams) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            convention: rbm.convention,
            n_visible: rbm.n_visible(),
            n_hidden: rbm.n_hidden(),
            weights: rbm.weights.iter().copied().collect(),
            visible_bias: rbm.visible_bias.to_vec(),
            hidden_bias: rbm.hidden_bias.to_vec(),
        }
    }

    pub fn into_rbm(self) -> Result<RbmParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let found = self.weights.len();
        let weights = Array2::from_shape_vec((self.n_visible, self.n_hidden), self.weights)
            .map_err(|_| Error::DimensionMismatch {
                what: "checkpoint weights",
                expected: self.n_visible * self.n_hidden,
                found,
            })?;
        RbmParams::new(
            weights,
            Array1::from(self.visible_bias),
            Array1::from(self.hidden_bias),
            self.convention,
        )
    }
}

pub fn write_checkpoint<W: Write>(rbm: &RbmParams, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &Checkpoint::from_rbm(rbm))?;
    writeln!(out)?;
    Ok(())
}

pub fn read_checkpoint<R: std::io::Read>(input: R) -> Result<RbmParams> {
    let ck: Checkpoint = serde_json::from_reader(input)?;
    ck.into_rbm()
}

pub fn save_checkpoint(rbm: &RbmParams, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint(rbm, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<RbmParams> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

/// Writes one JSON object per line.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Self {
        MetricsWriter { out }
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parses a metrics stream; blank lines are skipped.
pub fn read_metrics<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            format: "metrics JSONL",
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    read_metrics(BufReader::new(File::open(path)?))
}

pub fn write_distribution<W: Write>(data: &DataDistribution, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, data)?;
    writeln!(out)?;
    Ok(())
}

pub fn load_distribution(path: &Path) -> Result<DataDistribution> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
