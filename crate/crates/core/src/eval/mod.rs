//! Retrieval evaluation with MAP@k over a corpus with known relevance.

mod corpus;
mod metrics;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use corpus::{build_seeded_corpus, CorpusParams, PlantedPair, SeededCorpus};
pub use metrics::{average_precision_at_k, mean_average_precision};

use crate::embedding::{build_index, EmbedError, IndexConfig, IndexEntry, VectorIndex};
use crate::rank::{rank, Candidate, CodeFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Function,
    CodeDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub query_kind: QueryKind,
    pub relevant_ids: BTreeSet<String>,
    /// Database id that must not count as a hit (the query's own function).
    pub exclude_id: Option<String>,
    pub features: CodeFeatures,
}

/// One query per planted pair: the planted function itself, or its fix
/// diff. Its own function is excluded from scoring.
pub fn seeded_queries(corpus: &SeededCorpus, kind: QueryKind) -> Result<Vec<EvalQuery>, EmbedError> {
    let by_id: HashMap<&str, _> = corpus.functions.iter().map(|f| (f.id.as_str(), f)).collect();
    corpus
        .planted
        .iter()
        .map(|p| {
            let features = match kind {
                QueryKind::Function => CodeFeatures::of_function(by_id[p.function_id.as_str()]),
                QueryKind::CodeDiff => CodeFeatures::of_diff(&p.diff)?,
            };
            Ok(EvalQuery {
                query_id: p.function_id.clone(),
                query_kind: kind,
                relevant_ids: corpus.relevant_to(p.category, &p.function_id),
                exclude_id: Some(p.function_id.clone()),
                features,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct RetrievalConfig {
    pub index: IndexConfig,
    /// Scan every entry instead of probing partitions.
    pub exact: bool,
}


/// An indexed database together with the features the re-ranker needs.
pub struct EvalDatabase {
    pub index: VectorIndex,
    pub features: HashMap<String, CodeFeatures>,
    pub exact: bool,
}

impl EvalDatabase {
    pub fn build(
        functions: &[crate::ir::FunctionRecord],
        config: &RetrievalConfig,
    ) -> Result<Self, EmbedError> {
        let features = crate::rank::corpus_features(functions);
        let entries = functions
            .iter()
            .map(|f| IndexEntry {
                id: f.id.clone(),
                vector: features[&f.id].bow.clone(),
                cycles_pct: f.cycles_pct(),
            })
            .collect();
        Ok(Self {
            index: build_index(entries, config.index)?,
            features,
            exact: config.exact,
        })
    }

    /// Ids in retrieval order, optionally re-ranked, without the excluded id.
    pub fn retrieve(&self, query: &EvalQuery, ranked: bool) -> Result<Vec<String>, EmbedError> {
        let hits = self
            .index
            .query_topk(&query.features.bow, self.index.config.k, self.exact)?;
        let hits = hits
            .into_iter()
            .filter(|h| query.exclude_id.as_deref() != Some(h.id.as_str()));
        if !ranked {
            return Ok(hits.map(|h| h.id).collect());
        }
        let hits: Vec<_> = hits.collect();
        let candidates: Vec<Candidate<'_>> = hits
            .iter()
            .map(|h| Candidate {
                id: &h.id,
                ann_distance: h.distance,
                features: &self.features[&h.id],
            })
            .collect();
        Ok(rank(&query.features, &candidates).into_iter().map(|c| c.id).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub query: QueryKind,
    pub ranked: bool,
    /// MAP by cutoff k.
    pub map: BTreeMap<usize, f64>,
}

pub const DEFAULT_KS: [usize; 3] = [5, 10, 20];

/// MAP@k for every cutoff over a query set.
pub fn map_at_ks(
    db: &EvalDatabase,
    queries: &[EvalQuery],
    ranked: bool,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>, EmbedError> {
    let rankings: Vec<Vec<String>> = queries
        .par_iter()
        .map(|q| db.retrieve(q, ranked))
        .collect::<Result<_, _>>()?;
    Ok(ks
        .iter()
        .map(|&k| {
            let aps: Vec<f64> = rankings
                .iter()
                .zip(queries)
                .map(|(r, q)| average_precision_at_k(r, &q.relevant_ids, k))
                .collect();
            (k, mean_average_precision(&aps))
        })
        .collect())
}

/// The four BOW configurations (function or diff queries, with or without
/// re-ranking) on one seeded corpus.
pub fn evaluate_seeded(
    params: &CorpusParams,
    config: &RetrievalConfig,
    ks: &[usize],
) -> Result<Vec<EvalRow>, EmbedError> {
    let corpus = build_seeded_corpus(params);
    let db = EvalDatabase::build(&corpus.functions, config)?;
    let mut rows = Vec::new();
    for kind in [QueryKind::Function, QueryKind::CodeDiff] {
        let queries = seeded_queries(&corpus, kind)?;
        for ranked in [false, true] {
            rows.push(EvalRow {
                model: "BOW".into(),
                query: kind,
                ranked,
                map: map_at_ks(&db, &queries, ranked, ks)?,
            });
        }
    }
    Ok(rows)
}

pub fn find_row(rows: &[EvalRow], query: QueryKind, ranked: bool) -> Option<&EvalRow> {
    rows.iter().find(|r| r.query == query && r.ranked == ranked)
}

fn query_label(q: QueryKind) -> &'static str {
    match q {
        QueryKind::Function => "Function",
        QueryKind::CodeDiff => "Code Diff",
    }
}

/// Fixed-width text table with columns Model, Query, Ranked, MAP@k...
pub fn render_table(rows: &[EvalRow]) -> String {
    let ks: BTreeSet<usize> = rows.iter().flat_map(|r| r.map.keys().copied()).collect();
    let mut s = format!("{:<6} {:<10} {:<7}", "Model", "Query", "Ranked");
    for k in &ks {
        let _ = write!(s, " {:>8}", format!("MAP@{k}"));
    }
    s.push('\n');
    for r in rows {
        let _ = write!(
            s,
            "{:<6} {:<10} {:<7}",
            r.model,
            query_label(r.query),
            if r.ranked { "yes" } else { "no" }
        );
        for k in &ks {
            let _ = write!(s, " {:>8.4}", r.map.get(k).copied().unwrap_or(0.0));
        }
        s.push('\n');
    }
    s
}

pub fn render_csv(rows: &[EvalRow]) -> String {
    let ks: BTreeSet<usize> = rows.iter().flat_map(|r| r.map.keys().copied()).collect();
    let mut s = String::from("model,query,ranked");
    for k in &ks {
        let _ = write!(s, ",map@{k}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{}", r.model, query_label(r.query), r.ranked);
        for k in &ks {
            let _ = write!(s, ",{:.6}", r.map.get(k).copied().unwrap_or(0.0));
        }
        s.push('\n');
    }
    s
}
