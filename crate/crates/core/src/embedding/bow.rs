use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::NormalizedTokens;

/// Common keywords excluded from bag-of-words vectors by default.
pub const DEFAULT_STOPLIST: &[&str] = &["return", "this", "static", "inline"];

pub fn default_stoplist() -> BTreeSet<String> {
    DEFAULT_STOPLIST.iter().map(|s| s.to_string()).collect()
}

/// Sparse token-frequency vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    pub counts: BTreeMap<String, u32>,
    pub l2_norm: f64,
}

impl BowVector {
    pub fn from_counts(counts: BTreeMap<String, u32>) -> Self {
        let counts: BTreeMap<String, u32> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let mut v = Self {
            counts,
            l2_norm: 0.0,
        };
        v.l2_norm = (v.squared_norm() as f64).sqrt();
        v
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, term: &str) -> u32 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    /// Exact integer sum of squared counts.
    pub fn squared_norm(&self) -> u64 {
        self.counts.values().map(|&c| c as u64 * c as u64).sum()
    }

    pub fn dot(&self, other: &BowVector) -> u64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(t, &c)| c as u64 * large.get(t) as u64)
            .sum()
    }

    /// Cosine similarity, 0 when either vector is zero. Identical vectors
    /// give exactly 1 because the integer dot product equals the squared norm.
    pub fn cosine(&self, other: &BowVector) -> f64 {
        let denom = (self.squared_norm() as f64 * other.squared_norm() as f64).sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        (self.dot(other) as f64 / denom).clamp(0.0, 1.0)
    }

    /// `1 - cosine`, in [0, 1] for count vectors.
    pub fn cosine_distance(&self, other: &BowVector) -> f64 {
        1.0 - self.cosine(other)
    }

    /// Sub-vector over the given terms.
    pub fn restrict<'a>(&self, terms: impl IntoIterator<Item = &'a str>) -> BowVector {
        let counts = terms
            .into_iter()
            .filter_map(|t| self.counts.get(t).map(|&c| (t.to_string(), c)))
            .collect();
        BowVector::from_counts(counts)
    }
}

/// True for tokens made only of operator/punctuation characters.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(|c| c.is_alphanumeric() || c == '_')
}

/// Counts tokens that are neither punctuation nor in the stoplist.
pub fn embed_bow(norm: &NormalizedTokens, stoplist: &BTreeSet<String>) -> BowVector {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for t in &norm.tokens {
        if is_punctuation(t) || stoplist.contains(t) {
            continue;
        }
        *counts.entry(t.clone()).or_default() += 1;
    }
    BowVector::from_counts(counts)
}
