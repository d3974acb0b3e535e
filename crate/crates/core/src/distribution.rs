use std::collections::HashMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::Convention;

/// Empirical distribution over binary visible vectors: the distinct
/// patterns of the support, their probability masses and the multiset
/// counts they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct DataDistribution {
    patterns: Vec<Vec<u8>>,
    masses: Vec<f64>,
    counts: Vec<u64>,
}

impl DataDistribution {
    /// Build from distinct patterns and positive multiplicities.
    pub fn from_counts(patterns: Vec<Vec<u8>>, counts: Vec<u64>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if patterns.len() != counts.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} patterns but {} counts",
                patterns.len(),
                counts.len()
            )));
        }
        let width = patterns[0].len();
        if width == 0 {
            return Err(Error::InvalidDistribution("zero-length patterns".into()));
        }
        let mut seen = HashMap::with_capacity(patterns.len());
        for (i, p) in patterns.iter().enumerate() {
            if p.len() != width {
                return Err(Error::InvalidDistribution(format!(
                    "pattern {i} has length {} (expected {width})",
                    p.len()
                )));
            }
            if p.iter().any(|&b| b > 1) {
                return Err(Error::InvalidDistribution(format!(
                    "pattern {i} is not binary"
                )));
            }
            if let Some(j) = seen.insert(p.as_slice(), i) {
                return Err(Error::InvalidDistribution(format!(
                    "patterns {j} and {i} are identical"
                )));
            }
        }
        if counts.contains(&0) {
            return Err(Error::InvalidDistribution("zero multiplicity".into()));
        }
        let total: u64 = counts.iter().sum();
        let masses = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            patterns,
            masses,
            counts,
        })
    }

    /// Equal mass on every (distinct) pattern.
    pub fn uniform(patterns: Vec<Vec<u8>>) -> Result<Self> {
        let counts = vec![1; patterns.len()];
        Self::from_counts(patterns, counts)
    }

    /// Merge a multiset of samples; patterns keep first-occurrence order.
    pub fn from_samples<I: IntoIterator<Item = Vec<u8>>>(samples: I) -> Result<Self> {
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut patterns = Vec::new();
        let mut counts = Vec::new();
        for s in samples {
            match index.get(&s) {
                Some(&i) => counts[i] += 1,
                None => {
                    index.insert(s.clone(), patterns.len());
                    patterns.push(s);
                    counts.push(1);
                }
            }
        }
        Self::from_counts(patterns, counts)
    }

    pub fn n_visible(&self) -> usize {
        self.patterns[0].len()
    }

    /// Number of distinct patterns.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[Vec<u8>] {
        &self.patterns
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pattern `i` as a node vector in the given alphabet.
    pub fn pattern_vector(&self, i: usize, convention: Convention) -> Array1<f64> {
        self.patterns[i]
            .iter()
            .map(|&b| convention.from_bit(b == 1))
            .collect()
    }

    /// Multiset expansion as a `{0,1}` matrix, one row per sample.
    pub fn expand(&self) -> Array2<f64> {
        let rows = self.total_count() as usize;
        let mut out = Array2::zeros((rows, self.n_visible()));
        let mut r = 0;
        for (p, &c) in self.patterns.iter().zip(&self.counts) {
            for _ in 0..c {
                for (k, &b) in p.iter().enumerate() {
                    out[[r, k]] = b as f64;
                }
                r += 1;
            }
        }
        out
    }

    pub fn pattern_string(&self, i: usize) -> String {
        self.patterns[i]
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect()
    }
}

/// On-disk form: patterns as `0`/`1` strings.
#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    patterns: Vec<String>,
    masses: Vec<f64>,
    counts: Vec<u64>,
}

impl From<DataDistribution> for DistributionRepr {
    fn from(d: DataDistribution) -> Self {
        let patterns = (0..d.len()).map(|i| d.pattern_string(i)).collect();
        DistributionRepr {
            patterns,
            masses: d.masses,
            counts: d.counts,
        }
    }
}

impl TryFrom<DistributionRepr> for DataDistribution {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        let patterns = r
            .patterns
            .iter()
            .map(|s| {
                s.chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        other => Err(Error::InvalidDistribution(format!(
                            "pattern character {other:?}"
                        ))),
                    })
                    .collect::<Result<Vec<u8>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let d = DataDistribution::from_counts(patterns, r.counts)?;
        let max_dev = d
            .masses
            .iter()
            .zip(&r.masses)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if r.masses.len() != d.masses.len() || max_dev > 1e-12 {
            return Err(Error::InvalidDistribution(
                "masses are not proportional to counts".into(),
            ));
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_ragged_patterns() {
        assert!(DataDistribution::uniform(vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(DataDistribution::uniform(vec![vec![0, 1], vec![0]]).is_err());
        assert!(DataDistribution::uniform(vec![vec![2]]).is_err());
        assert!(DataDistribution::uniform(vec![]).is_err());
    }

    #[test]
    fn merges_samples_into_counts() {
        let d = DataDistribution::from_samples(vec![vec![1, 0], vec![0, 0], vec![1, 0]]).unwrap();
        assert_eq!(d.patterns(), &[vec![1, 0], vec![0, 0]]);
        assert_eq!(d.counts(), &[2, 1]);
        assert!((d.masses()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.expand().nrows(), 3);
    }

    #[test]
    fn json_round_trip() {
        let d = DataDistribution::from_counts(vec![vec![1, 0, 1], vec![0, 0, 0]], vec![1, 2])
            .unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"101\""));
        let back: DataDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
