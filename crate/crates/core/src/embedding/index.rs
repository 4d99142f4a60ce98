//! Inverted-file cosine index: spherical k-means partitions, exact scan
//! inside the probed partitions.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BowVector, EmbedError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub num_partitions: usize,
    pub nprobe: usize,
    /// Default number of neighbors returned by queries.
    pub k: usize,
    /// Entries whose known cycle share is below this percentage are left
    /// out of the index.
    pub min_cost_pct: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            num_partitions: 16,
            nprobe: 4,
            k: 500,
            min_cost_pct: 0.01,
            seed: 0x5eed,
            max_iterations: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub vector: BowVector,
    #[serde(default)]
    pub cycles_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Unit-length mean direction of the members, sparse.
    pub centroid: BTreeMap<String, f64>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Default, Clone)]
struct Lookup {
    by_id: HashMap<String, usize>,
    members: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorIndex {
    pub entries: Vec<IndexEntry>,
    pub partitions: Vec<Partition>,
    pub config: IndexConfig,
    #[serde(skip)]
    lookup: OnceLock<Lookup>,
}

/// Dense unit vector over a shared vocabulary.
fn unit_dense(v: &BowVector, vocab: &HashMap<&str, usize>) -> Vec<(usize, f64)> {
    let norm = (v.squared_norm() as f64).sqrt();
    if norm == 0.0 {
        return Vec::new();
    }
    v.counts
        .iter()
        .map(|(t, &c)| (vocab[t.as_str()], c as f64 / norm))
        .collect()
}

fn sparse_dot(x: &[(usize, f64)], dense: &[f64]) -> f64 {
    x.iter().map(|&(i, w)| w * dense[i]).sum()
}

pub fn build_index(entries: Vec<IndexEntry>, config: IndexConfig) -> Result<VectorIndex, EmbedError> {
    let entries: Vec<IndexEntry> = entries
        .into_iter()
        .filter(|e| e.cycles_pct.is_none_or(|c| c >= config.min_cost_pct))
        .collect();
    if entries.iter().all(|e| e.vector.is_zero()) {
        return Err(EmbedError::EmptyIndex);
    }
    let mut seen = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        if seen.insert(e.id.as_str(), i).is_some() {
            return Err(EmbedError::DuplicateId(e.id.clone()));
        }
    }

    let mut vocab: HashMap<&str, usize> = HashMap::new();
    for e in &entries {
        for t in e.vector.counts.keys() {
            let n = vocab.len();
            vocab.entry(t.as_str()).or_insert(n);
        }
    }
    let dim = vocab.len();
    let points: Vec<Vec<(usize, f64)>> = entries.iter().map(|e| unit_dense(&e.vector, &vocab)).collect();
    let live: Vec<usize> = (0..points.len()).filter(|&i| !points[i].is_empty()).collect();
    let k = config.num_partitions.clamp(1, live.len());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_pp_init(&points, &live, k, dim, &mut rng);
    let mut assign = vec![0usize; points.len()];
    for iter in 0..config.max_iterations.max(1) {
        let mut changed = false;
        for &i in &live {
            let best = nearest(&points[i], &centroids);
            if best != assign[i] || iter == 0 {
                changed |= best != assign[i];
                assign[i] = best;
            }
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        for &i in &live {
            for &(d, w) in &points[i] {
                sums[assign[i]][d] += w;
            }
        }
        for (c, s) in centroids.iter_mut().zip(sums) {
            let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                *c = s.into_iter().map(|x| x / n).collect();
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }
    // Final assignment against the final centroids so membership always
    // reflects the nearest centroid.
    for &i in &live {
        assign[i] = nearest(&points[i], &centroids);
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centroids.len()];
    for (i, p) in points.iter().enumerate() {
        // Zero vectors have no direction; park them in the first partition.
        let part = if p.is_empty() { 0 } else { assign[i] };
        members[part].push(i);
    }
    let terms: Vec<&str> = {
        let mut t = vec![""; dim];
        for (s, &i) in &vocab {
            t[i] = s;
        }
        t
    };
    let partitions: Vec<Partition> = centroids
        .iter()
        .zip(&members)
        .filter(|(_, m)| !m.is_empty())
        .map(|(c, m)| Partition {
            centroid: c
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (terms[i].to_string(), *w))
                .collect(),
            members: m.iter().map(|&i| entries[i].id.clone()).collect(),
        })
        .collect();

    Ok(VectorIndex {
        entries,
        partitions,
        config,
        lookup: OnceLock::new(),
    })
}

fn nearest(p: &[(usize, f64)], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (c, cent) in centroids.iter().enumerate() {
        let s = sparse_dot(p, cent);
        if s > best_sim {
            best_sim = s;
            best = c;
        }
    }
    best
}

fn kmeans_pp_init(
    points: &[Vec<(usize, f64)>],
    live: &[usize],
    k: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let to_dense = |p: &[(usize, f64)]| {
        let mut d = vec![0.0; dim];
        for &(i, w) in p {
            d[i] = w;
        }
        d
    };
    let mut centroids = vec![to_dense(&points[live[rng.gen_range(0..live.len())]])];
    let mut best_sim: Vec<f64> = live
        .iter()
        .map(|&i| sparse_dot(&points[i], &centroids[0]))
        .collect();
    while centroids.len() < k {
        let weights: Vec<f64> = best_sim.iter().map(|s| (1.0 - s).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total <= 0.0 {
            // Every remaining point coincides with a centroid.
            break;
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = live.len() - 1;
            for (j, w) in weights.iter().enumerate() {
                if r < *w {
                    chosen = j;
                    break;
                }
                r -= w;
            }
            chosen
        };
        let c = to_dense(&points[live[pick]]);
        for (j, &i) in live.iter().enumerate() {
            best_sim[j] = best_sim[j].max(sparse_dot(&points[i], &c));
        }
        centroids.push(c);
    }
    centroids
}

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self) -> &Lookup {
        self.lookup.get_or_init(|| {
            let by_id: HashMap<String, usize> = self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| (e.id.clone(), i))
                .collect();
            let members = self
                .partitions
                .iter()
                .map(|p| p.members.iter().filter_map(|m| by_id.get(m).copied()).collect())
                .collect();
            Lookup { by_id, members }
        })
    }

    pub fn entry(&self, id: &str) -> Option<&IndexEntry> {
        self.lookup().by_id.get(id).map(|&i| &self.entries[i])
    }

    /// Partitions ordered by centroid similarity to the query, best first.
    fn probe_order(&self, query: &BowVector) -> Vec<usize> {
        let norm = (query.squared_norm() as f64).sqrt();
        let mut scored: Vec<(usize, f64)> = self
            .partitions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s: f64 = query
                    .counts
                    .iter()
                    .filter_map(|(t, &c)| p.centroid.get(t).map(|w| w * c as f64 / norm))
                    .sum();
                (i, s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.into_iter().map(|(i, _)| i).collect()
    }

    /// Top-`k` entries by cosine distance, ascending, ties by id. `exact`
    /// scans everything; otherwise only the `nprobe` closest partitions.
    pub fn query_topk(&self, query: &BowVector, k: usize, exact: bool) -> Result<Vec<Hit>, EmbedError> {
        if k == 0 {
            return Err(EmbedError::InvalidK);
        }
        if query.is_zero() {
            return Err(EmbedError::ZeroQueryVector);
        }
        let candidates: Vec<usize> = if exact {
            (0..self.entries.len()).collect()
        } else {
            let lookup = self.lookup();
            self.probe_order(query)
                .into_iter()
                .take(self.config.nprobe.max(1))
                .flat_map(|p| lookup.members[p].iter().copied())
                .collect()
        };
        let mut hits: Vec<Hit> = candidates
            .into_iter()
            .map(|i| Hit {
                id: self.entries[i].id.clone(),
                distance: query.cosine_distance(&self.entries[i].vector),
            })
            .collect();
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k);
        Ok(hits)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| EmbedError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbedError::Io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(pairs: &[(&str, u32)]) -> BowVector {
        BowVector::from_counts(pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect())
    }

    fn random_entries(n: usize, seed: u64) -> Vec<IndexEntry> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut counts = BTreeMap::new();
                for _ in 0..rng.gen_range(1..8) {
                    *counts.entry(format!("t{}", rng.gen_range(0..30))).or_insert(0) += 1;
                }
                IndexEntry {
                    id: format!("e{i:03}"),
                    vector: BowVector::from_counts(counts),
                    cycles_pct: None,
                }
            })
            .collect()
    }

    #[test]
    fn every_entry_in_exactly_one_partition() {
        let idx = build_index(
            random_entries(100, 1),
            IndexConfig {
                num_partitions: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!idx.partitions.is_empty() && idx.partitions.len() <= 4);
        let mut all: Vec<&String> = idx.partitions.iter().flat_map(|p| &p.members).collect();
        all.sort();
        let before = all.len();
        all.dedup();
        assert_eq!(before, 100);
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn cost_filter() {
        let mut entries = random_entries(100, 2);
        for e in entries.iter_mut().take(5) {
            e.cycles_pct = Some(0.001);
        }
        for e in entries.iter_mut().skip(5).take(10) {
            e.cycles_pct = Some(3.0);
        }
        let idx = build_index(entries, IndexConfig::default()).unwrap();
        assert_eq!(idx.len(), 95);
    }

    #[test]
    fn duplicates_share_a_partition() {
        let mut entries = random_entries(60, 3);
        let dup = entries[7].vector.clone();
        for j in 0..3 {
            entries.push(IndexEntry {
                id: format!("dup{j}"),
                vector: dup.clone(),
                cycles_pct: None,
            });
        }
        let idx = build_index(entries, IndexConfig { num_partitions: 6, ..Default::default() }).unwrap();
        let home = |id: &str| idx.partitions.iter().position(|p| p.members.iter().any(|m| m == id));
        let h = home("e007");
        assert!(h.is_some());
        for j in 0..3 {
            assert_eq!(home(&format!("dup{j}")), h);
        }
    }

    #[test]
    fn self_retrieval_and_oversized_k() {
        let entries = random_entries(50, 4);
        let probe = entries[10].vector.clone();
        let idx = build_index(entries, IndexConfig::default()).unwrap();
        let hits = idx.query_topk(&probe, 3, true).unwrap();
        assert_eq!(hits[0].distance, 0.0);
        assert!(hits.iter().any(|h| h.id == "e010"));
        assert_eq!(idx.query_topk(&probe, 1000, true).unwrap().len(), 50);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_index(vec![], IndexConfig::default()),
            Err(EmbedError::EmptyIndex)
        ));
        let idx = build_index(
            vec![IndexEntry {
                id: "a".into(),
                vector: vec_of(&[("x", 1)]),
                cycles_pct: None,
            }],
            IndexConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            idx.query_topk(&BowVector::default(), 1, true),
            Err(EmbedError::ZeroQueryVector)
        ));
        assert!(matches!(
            idx.query_topk(&vec_of(&[("x", 1)]), 0, true),
            Err(EmbedError::InvalidK)
        ));
    }

    #[test]
    fn ties_break_by_id() {
        let v = vec_of(&[("a", 1), ("b", 2)]);
        let entries = ["zeta", "alpha", "mid"]
            .iter()
            .map(|id| IndexEntry {
                id: id.to_string(),
                vector: v.clone(),
                cycles_pct: None,
            })
            .collect();
        let idx = build_index(entries, IndexConfig::default()).unwrap();
        let ids: Vec<_> = idx
            .query_topk(&v, 3, true)
            .unwrap()
            .into_iter()
            .map(|h| h.id)
            .collect();
        assert_eq!(ids, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn save_load_round_trip() {
        let idx = build_index(random_entries(40, 5), IndexConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        idx.save(&path).unwrap();
        let back = VectorIndex::load(&path).unwrap();
        let q = vec_of(&[("t1", 2), ("t5", 1)]);
        assert_eq!(
            idx.query_topk(&q, 10, false).unwrap(),
            back.query_topk(&q, 10, false).unwrap()
        );
    }
}
