use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::assignment::max_weight_assignment;
use crate::corpus::{Clustering, MentionSpan};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PRF {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PRF {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PRF { precision, recall, f1 }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Unreduced numerators and denominators, summed across documents for
/// micro-averaged corpus scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl MetricCounts {
    pub fn prf(&self) -> PRF {
        PRF::new(
            ratio(self.precision_num, self.precision_den),
            ratio(self.recall_num, self.recall_den),
        )
    }

    pub fn add(&mut self, other: &MetricCounts) {
        self.recall_num += other.recall_num;
        self.recall_den += other.recall_den;
        self.precision_num += other.precision_num;
        self.precision_den += other.precision_den;
    }
}

/// Recall side of MUC: Σ(|K| − p(K)) over Σ(|K| − 1).
fn muc_side(key: &Clustering, response: &Clustering) -> (f64, f64) {
    let index = response.cluster_index();
    let (mut num, mut den) = (0usize, 0usize);
    for cluster in key.clusters() {
        let mut blocks = BTreeSet::new();
        let mut missing = 0;
        for m in cluster {
            match index.get(m) {
                Some(&r) => {
                    blocks.insert(r);
                }
                None => missing += 1,
            }
        }
        num += cluster.len() - (blocks.len() + missing);
        den += cluster.len() - 1;
    }
    (num as f64, den as f64)
}

pub fn muc_counts(key: &Clustering, response: &Clustering) -> MetricCounts {
    let (recall_num, recall_den) = muc_side(key, response);
    let (precision_num, precision_den) = muc_side(response, key);
    MetricCounts {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    }
}

pub fn muc(key: &Clustering, response: &Clustering) -> PRF {
    muc_counts(key, response).prf()
}

/// Recall side of B³: Σ_m |K_m ∩ R_m| / |K_m| over key mentions, where a
/// mention absent from the response stands alone.
fn b3_side(key: &Clustering, response: &Clustering) -> (f64, f64) {
    let index = response.cluster_index();
    let mut num = 0.0;
    let mut den = 0.0;
    for cluster in key.clusters() {
        let mut per_block: HashMap<usize, usize> = HashMap::new();
        for m in cluster {
            if let Some(&r) = index.get(m) {
                *per_block.entry(r).or_default() += 1;
            }
        }
        let k = cluster.len() as f64;
        for m in cluster {
            let overlap = index.get(m).map_or(1, |r| per_block[r]);
            num += overlap as f64 / k;
            den += 1.0;
        }
    }
    (num, den)
}

pub fn b_cubed_counts(key: &Clustering, response: &Clustering) -> MetricCounts {
    let (recall_num, recall_den) = b3_side(key, response);
    let (precision_num, precision_den) = b3_side(response, key);
    MetricCounts {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    }
}

pub fn b_cubed(key: &Clustering, response: &Clustering) -> PRF {
    b_cubed_counts(key, response).prf()
}

pub fn phi4(k: &[MentionSpan], r: &[MentionSpan]) -> f64 {
    if k.is_empty() && r.is_empty() {
        return 0.0;
    }
    let rs: BTreeSet<_> = r.iter().collect();
    let common = k.iter().filter(|m| rs.contains(m)).count();
    2.0 * common as f64 / (k.len() + r.len()) as f64
}

pub fn ceaf_phi4_counts(key: &Clustering, response: &Clustering) -> MetricCounts {
    let weights: Vec<Vec<f64>> = key
        .clusters()
        .iter()
        .map(|k| response.clusters().iter().map(|r| phi4(k, r)).collect())
        .collect();
    let (total, _) = max_weight_assignment(&weights);
    MetricCounts {
        recall_num: total,
        recall_den: key.len() as f64,
        precision_num: total,
        precision_den: response.len() as f64,
    }
}

pub fn ceaf_phi4(key: &Clustering, response: &Clustering) -> PRF {
    ceaf_phi4_counts(key, response).prf()
}

pub fn conll_f1(muc: &PRF, b3: &PRF, ceaf: &PRF) -> f64 {
    (muc.f1 + b3.f1 + ceaf.f1) / 3.0
}

/// Which sides lose their size-1 clusters before scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingletonPolicy {
    #[default]
    KeepBoth,
    DropBoth,
    #[serde(rename = "drop-response")]
    DropResponseKeepKey,
}

impl SingletonPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            SingletonPolicy::KeepBoth => "keep-both",
            SingletonPolicy::DropBoth => "drop-both",
            SingletonPolicy::DropResponseKeepKey => "drop-response",
        }
    }

    /// Whether unmatched registry entries may survive as response singletons.
    pub fn keeps_response_singletons(&self) -> bool {
        matches!(self, SingletonPolicy::KeepBoth)
    }
}

impl fmt::Display for SingletonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SingletonPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "keep-both" => Ok(SingletonPolicy::KeepBoth),
            "drop-both" => Ok(SingletonPolicy::DropBoth),
            "drop-response" | "drop-response-keep-key" => Ok(SingletonPolicy::DropResponseKeepKey),
            other => Err(format!("unknown singleton policy `{other}` (keep-both, drop-both, drop-response)")),
        }
    }
}

pub fn apply_singleton_policy(key: &Clustering, response: &Clustering, policy: SingletonPolicy) -> (Clustering, Clustering) {
    match policy {
        SingletonPolicy::KeepBoth => (key.clone(), response.clone()),
        SingletonPolicy::DropBoth => (key.without_singletons(), response.without_singletons()),
        SingletonPolicy::DropResponseKeepKey => (key.clone(), response.without_singletons()),
    }
}
