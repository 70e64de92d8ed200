//! Stratified document sampling by (length bin, mention-count bin).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("candidate pool is empty")]
    NoCandidates,
    #[error("bin widths must be positive")]
    ZeroWidth,
    #[error("{path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocProfile {
    pub doc_id: String,
    pub token_count: usize,
    pub mention_count: usize,
}

impl DocProfile {
    /// Mention count from the gold annotation, 0 when absent.
    pub fn from_document(doc: &Document) -> Self {
        DocProfile {
            doc_id: doc.key(),
            token_count: doc.tokens.len(),
            mention_count: doc.gold_clusters.as_ref().map_or(0, |c| c.mention_count()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub length_bin: usize,
    pub mention_bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub length_bin_width: usize,
    pub mention_bin_width: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            length_bin_width: 500,
            mention_bin_width: 50,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn stratum(&self, p: &DocProfile) -> StratumKey {
        StratumKey {
            length_bin: p.token_count / self.length_bin_width,
            mention_bin: p.mention_count / self.mention_bin_width,
        }
    }

    pub fn histogram<'a>(&self, profiles: impl IntoIterator<Item = &'a DocProfile>) -> BTreeMap<StratumKey, usize> {
        let mut h = BTreeMap::new();
        for p in profiles {
            *h.entry(self.stratum(p)).or_insert(0) += 1;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub stratum: StratumKey,
    pub wanted: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleResult {
    /// Sampled ids, grouped by stratum in key order.
    pub doc_ids: Vec<String>,
    pub shortfalls: Vec<Shortfall>,
}

/// Draws, for each stratum, as many candidates as the reference holds there
/// (or all of them when fewer), uniformly without replacement.
pub fn stratified_sample(
    candidates: &[DocProfile],
    reference: &[DocProfile],
    config: &SamplingConfig,
) -> Result<SampleResult, SamplingError> {
    if candidates.is_empty() {
        return Err(SamplingError::NoCandidates);
    }
    if config.length_bin_width == 0 || config.mention_bin_width == 0 {
        return Err(SamplingError::ZeroWidth);
    }
    let wanted = config.histogram(reference);
    let mut pools: BTreeMap<StratumKey, Vec<&DocProfile>> = BTreeMap::new();
    for c in candidates {
        pools.entry(config.stratum(c)).or_default().push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut doc_ids = Vec::new();
    let mut shortfalls = Vec::new();
    for (key, &want) in &wanted {
        let pool = pools.get(key).map(Vec::as_slice).unwrap_or_default();
        let take = want.min(pool.len());
        if take < want {
            shortfalls.push(Shortfall {
                stratum: *key,
                wanted: want,
                available: pool.len(),
            });
        }
        let mut picked = sample(&mut rng, pool.len(), take).into_vec();
        picked.sort_unstable();
        doc_ids.extend(picked.into_iter().map(|i| pool[i].doc_id.clone()));
    }
    Ok(SampleResult { doc_ids, shortfalls })
}

fn read_err(path: &Path, e: impl std::fmt::Display) -> SamplingError {
    SamplingError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads profiles from CSV (`doc_id,token_count,mention_count` header) or,
/// for `.json` files, a JSON array of objects with the same fields.
pub fn read_profiles(path: impl AsRef<Path>) -> Result<Vec<DocProfile>, SamplingError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| read_err(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return serde_json::from_reader(BufReader::new(file)).map_err(|e| read_err(path, e));
    }
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file)
        .deserialize()
        .collect::<Result<Vec<DocProfile>, _>>()
        .map_err(|e| read_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(id: &str, t: usize, m: usize) -> DocProfile {
        DocProfile {
            doc_id: id.into(),
            token_count: t,
            mention_count: m,
        }
    }

    #[test]
    fn bins_floor() {
        let c = SamplingConfig::default();
        assert_eq!(c.stratum(&p("a", 499, 50)), StratumKey { length_bin: 0, mention_bin: 1 });
        assert_eq!(c.stratum(&p("a", 1000, 49)), StratumKey { length_bin: 2, mention_bin: 0 });
    }

    #[test]
    fn single_stratum_deterministic() {
        let cands = vec![p("a", 10, 1), p("b", 20, 2), p("c", 30, 3)];
        let reference = vec![p("x", 1, 1), p("y", 2, 2)];
        let cfg = SamplingConfig { seed: 7, ..Default::default() };
        let a = stratified_sample(&cands, &reference, &cfg).unwrap();
        assert_eq!(a.doc_ids.len(), 2);
        assert_eq!(a, stratified_sample(&cands, &reference, &cfg).unwrap());
        assert!(a.shortfalls.is_empty());
    }

    #[test]
    fn shortfall_reported() {
        let cands = vec![p("a", 10, 1)];
        let reference = vec![p("x", 600, 1), p("y", 10, 1)];
        let r = stratified_sample(&cands, &reference, &SamplingConfig::default()).unwrap();
        assert_eq!(r.doc_ids, vec!["a"]);
        assert_eq!(
            r.shortfalls,
            vec![Shortfall {
                stratum: StratumKey { length_bin: 1, mention_bin: 0 },
                wanted: 1,
                available: 0
            }]
        );
        assert!(matches!(
            stratified_sample(&[], &reference, &SamplingConfig::default()),
            Err(SamplingError::NoCandidates)
        ));
    }

    #[test]
    fn reads_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("p.csv");
        std::fs::write(&csv_path, "doc_id,token_count,mention_count\na, 10, 2\nb,20,3\n").unwrap();
        let json_path = dir.path().join("p.json");
        std::fs::write(&json_path, r#"[{"doc_id":"a","token_count":10,"mention_count":2},{"doc_id":"b","token_count":20,"mention_count":3}]"#).unwrap();
        let a = read_profiles(&csv_path).unwrap();
        assert_eq!(a, read_profiles(&json_path).unwrap());
        assert_eq!(a[0], p("a", 10, 2));
        std::fs::write(&csv_path, "doc_id,token_count,mention_count\na,x,2\n").unwrap();
        assert!(read_profiles(&csv_path).is_err());
    }

    proptest! {
        #[test]
        fn counts_bounded_and_unique(
            cands in prop::collection::vec((0usize..2000, 0usize..200), 1..60),
            refs in prop::collection::vec((0usize..2000, 0usize..200), 0..60),
            seed in any::<u64>(),
        ) {
            let cands: Vec<_> = cands.iter().enumerate().map(|(i, &(t, m))| p(&format!("c{i}"), t, m)).collect();
            let refs: Vec<_> = refs.iter().enumerate().map(|(i, &(t, m))| p(&format!("r{i}"), t, m)).collect();
            let cfg = SamplingConfig { seed, ..Default::default() };
            let r = stratified_sample(&cands, &refs, &cfg).unwrap();
            let mut ids = r.doc_ids.clone();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), r.doc_ids.len());
            prop_assert!(r.doc_ids.len() <= refs.len());
            let by_id: BTreeMap<_, _> = cands.iter().map(|c| (c.doc_id.clone(), c)).collect();
            let got = cfg.histogram(r.doc_ids.iter().map(|id| by_id[id]));
            let want = cfg.histogram(&refs);
            let pool = cfg.histogram(&cands);
            for (k, &n) in &want {
                prop_assert_eq!(got.get(k).copied().unwrap_or(0), n.min(pool.get(k).copied().unwrap_or(0)));
            }
        }
    }
}
