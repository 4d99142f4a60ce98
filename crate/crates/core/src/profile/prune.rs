use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{CallTreeNode, ProfileError};

/// Pruning thresholds. Percentages are of the binary's total cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    pub c_min: f64,
    pub c_max: f64,
    /// A function present in at least this many binaries is shared.
    pub shared_binary_threshold: u32,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            c_min: 0.1,
            c_max: 25.0,
            shared_binary_threshold: 10,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(0.0 <= self.c_min && self.c_min < self.c_max && self.c_max <= 100.0) {
            return Err(ProfileError::Config(format!(
                "need 0 <= c_min < c_max <= 100, got c_min={} c_max={}",
                self.c_min, self.c_max
            )));
        }
        Ok(())
    }
}

/// Shared iff the function appears in at least the threshold number of
/// binaries. Unknown functions are application-specific.
pub fn classify_shared(
    fn_name: &str,
    binaries_containing: &HashMap<String, u32>,
    cfg: &PruneConfig,
) -> bool {
    binaries_containing
        .get(fn_name)
        .is_some_and(|&n| n >= cfg.shared_binary_threshold)
}

/// Sets the `shared` flag on every node below the root.
pub fn mark_shared(
    tree: &mut CallTreeNode,
    binaries_containing: &HashMap<String, u32>,
    cfg: &PruneConfig,
) {
    for c in &mut tree.children {
        c.walk_mut(&mut |n| n.shared = classify_shared(&n.fn_name, binaries_containing, cfg));
    }
}

pub fn should_prune(f: &CallTreeNode, parent: &CallTreeNode, cfg: &PruneConfig) -> bool {
    if parent.inclusive_pct > cfg.c_max {
        return false;
    }
    if f.shared {
        return true;
    }
    f.inclusive_pct < cfg.c_min || f.inclusive_pct > cfg.c_max
}

/// Lowest costly application-specific functions under `f`. Pruned
/// subtrees are attributed to the nearest surviving ancestor.
pub fn get_costly_fns<'a>(
    f: &'a CallTreeNode,
    parent: &CallTreeNode,
    cfg: &PruneConfig,
) -> Vec<&'a CallTreeNode> {
    if f.is_leaf() {
        if should_prune(f, parent, cfg) {
            return Vec::new();
        }
        return vec![f];
    }
    let mut costly = Vec::new();
    for callee in &f.children {
        costly.extend(get_costly_fns(callee, f, cfg));
    }
    if costly.is_empty() && !should_prune(f, parent, cfg) {
        return vec![f];
    }
    costly
}

/// Runs the search from every top-level frame with the synthetic root as
/// parent.
pub fn costly_functions<'a>(tree: &'a CallTreeNode, cfg: &PruneConfig) -> Vec<&'a CallTreeNode> {
    tree.children
        .iter()
        .flat_map(|c| get_costly_fns(c, tree, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostlyFunction {
    pub fn_name: String,
    pub attributed_pct: f64,
}

/// Costly functions with their inclusive percentage, which already holds
/// the cycles of every pruned descendant. Occurrences of the same function
/// in disjoint subtrees are summed. Sorted by percentage descending, then
/// name.
pub fn attribute_and_report(tree: &CallTreeNode, cfg: &PruneConfig) -> Vec<CostlyFunction> {
    let mut by_name: BTreeMap<&str, f64> = BTreeMap::new();
    for n in costly_functions(tree, cfg) {
        *by_name.entry(&n.fn_name).or_default() += n.inclusive_pct;
    }
    let mut out: Vec<CostlyFunction> = by_name
        .into_iter()
        .map(|(name, pct)| CostlyFunction {
            fn_name: name.to_string(),
            attributed_pct: pct,
        })
        .collect();
    out.sort_by(|a, b| {
        b.attributed_pct
            .total_cmp(&a.attributed_pct)
            .then_with(|| a.fn_name.cmp(&b.fn_name))
    });
    out
}
