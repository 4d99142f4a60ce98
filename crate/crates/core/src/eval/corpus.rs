//! Synthetic retrieval corpus with planted anti-patterns.
//!
//! Every function is a random arrangement of independent filler statements
//! drawn from one shared pool, with fresh identifier names. Planted
//! functions additionally carry the core lines of one category together
//! with a known fix. Relevance labels are therefore exact.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edit::diff::unified_diff;
use crate::ir::{extract_annotated, FunctionRecord};
use crate::mine::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub per_category: BTreeMap<Category, usize>,
    pub distractors: usize,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            per_category: [(Category::Copy, 4), (Category::Map, 4), (Category::Vector, 4)].into(),
            distractors: 48,
            seed: 1,
        }
    }
}

/// A planted function and the diff that fixes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub function_id: String,
    pub category: Category,
    pub diff: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededCorpus {
    pub functions: Vec<FunctionRecord>,
    /// Function source text by id.
    pub sources: BTreeMap<String, String>,
    pub planted: Vec<PlantedPair>,
}

impl SeededCorpus {
    pub fn category_of(&self, id: &str) -> Option<Category> {
        self.planted.iter().find(|p| p.function_id == id).map(|p| p.category)
    }

    /// Planted functions of `category` other than `exclude`.
    pub fn relevant_to(&self, category: Category, exclude: &str) -> BTreeSet<String> {
        self.planted
            .iter()
            .filter(|p| p.category == category && p.function_id != exclude)
            .map(|p| p.function_id.clone())
            .collect()
    }
}

const NAMES: &[&str] = &[
    "acc", "batch", "buf", "cache", "cfg", "count", "cursor", "data", "delta", "dest", "entry",
    "extra", "flags", "hits", "idx", "input", "item", "items", "key", "keys", "label", "last",
    "limit", "line", "lookup", "map", "misses", "name", "node", "offset", "out", "parts", "pending",
    "prefix", "rec", "records", "result", "rows", "scale", "seen", "shard", "size", "slot", "src",
    "state", "step", "table", "tag", "target", "total", "value", "values", "weight", "width",
    "window", "work",
];

const HELPERS: &[&str] = &[
    "Normalize", "Lookup", "Hash", "Score", "Encode", "Clamp", "Resolve", "Merge", "Decode",
    "Measure", "Validate", "Combine",
];

const VERBS: &[&str] = &[
    "Build", "Collect", "Compute", "Emit", "Fetch", "Gather", "Load", "Prepare", "Process",
    "Refresh", "Scan", "Update",
];

const PARAM_TYPES: &[&str] = &[
    "const std::vector<Record>&",
    "const std::map<std::string, int>&",
    "const std::vector<Item>&",
    "const std::string&",
    "int",
    "double",
    "const Options&",
    "std::vector<int>&",
];

/// Draws distinct identifiers for one function.
struct Names<'r> {
    rng: &'r mut ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Names<'_> {
    fn fresh(&mut self) -> String {
        loop {
            let base = NAMES[self.rng.gen_range(0..NAMES.len())];
            let name = if self.rng.gen_bool(0.5) {
                base.to_string()
            } else {
                format!("{base}_{}", self.rng.gen_range(0..10))
            };
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// One filler statement over two locals drawn from the pools of ints and
/// doubles declared so far. Drawing from a pool keeps any one name from
/// dominating the counts.
fn filler(rng: &mut ChaCha8Rng, names: &mut Names<'_>, ints: &mut Vec<String>, doubles: &mut Vec<String>) -> Vec<String> {
    let h = HELPERS[rng.gen_range(0..HELPERS.len())];
    let i = ints[rng.gen_range(0..ints.len())].clone();
    let d = doubles[rng.gen_range(0..doubles.len())].clone();
    let k = rng.gen_range(1..9);
    let t = names.fresh();
    let kind = rng.gen_range(0..12);
    match kind {
        0 | 11 => ints.push(t.clone()),
        3 => doubles.push(t.clone()),
        _ => {}
    }
    match kind {
        0 => vec![format!("int {t} = {h}({i}) * {k} + 1;")],
        1 => vec![format!("{i} += {h}({k});")],
        2 => vec![format!("if ({i} > {k}) {{"), format!("  {d} *= 0.{k};"), "}".into()],
        3 => vec![format!("double {t} = std::sqrt({d} + {k}.0);")],
        4 => vec![format!("std::string {t} = {h}(\"{t}\");")],
        5 => vec![format!("while ({i} > {k}00) {{"), format!("  {i} /= {k} + 1;"), "}".into()],
        6 => vec![format!("{d} = std::max({d}, {h}({i}) / {k}.0);")],
        7 => vec![format!("auto {t} = {h}({i}, {d});")],
        8 => vec![format!("if ({h}({d})) {{"), format!("  ++{i};"), "} else {".into(), format!("  --{i};"), "}".into()],
        9 => vec![format!("LOG(INFO) << \"{t} \" << {i};")],
        10 => vec![format!("{i} = std::min({i}, {k} * {h}({d}));")],
        _ => vec![format!("const int {t} = {k} << {i};")],
    }
}

/// A block of the same length as a pattern that is not an anti-pattern,
/// so planted functions are not singled out by length.
fn benign(rng: &mut ChaCha8Rng, names: &mut Names<'_>) -> Vec<String> {
    let h = HELPERS[rng.gen_range(0..HELPERS.len())];
    let (a, b, j) = (names.fresh(), names.fresh(), names.fresh());
    match rng.gen_range(0..5) {
        0 => vec![
            format!("std::vector<int> {a} = {h}Ids();"),
            format!("long {b} = 0;"),
            format!("for (size_t {j} = 0; {j} < {a}.size(); ++{j}) {{"),
            format!("  if ({a}[{j}] < 0) continue;"),
            format!("  {b} += {a}[{j}] * 2;"),
            "}".into(),
            format!("{b} = {b} / 3;"),
            format!("Publish({b});"),
        ],
        1 => vec![
            format!("std::vector<int> {a} = {h}Ids();"),
            format!("if ({a}.empty()) return 0;"),
            format!("std::sort({a}.begin(), {a}.end());"),
            format!("auto {b} = std::unique({a}.begin(), {a}.end());"),
            format!("{a}.erase({b}, {a}.end());"),
            format!("int {j} = {a}.front() + {a}.back();"),
            format!("{j} = {h}({j});"),
            format!("Publish({a}.size(), {j});"),
        ],
        2 => vec![
            format!("const std::string {a} = {h}Name();"),
            format!("std::string {b};"),
            format!("{b}.append({a});"),
            format!("{b}.append(\"/{j}\");"),
            format!("if ({b}.size() > 64) {{"),
            format!("  {b}.resize(64);"),
            "}".into(),
            format!("Publish({h}({b}));"),
        ],
        3 => vec![
            format!("int {a} = {h}Mode();"),
            format!("switch ({a} % 3) {{"),
            format!("  case 0: {b}({a}); break;"),
            format!("  case 1: {h}({a}); break;"),
            format!("  case 2: {j}({a} + 1); break;"),
            format!("  default: break;"),
            "}".into(),
            format!("Publish({a});"),
        ],
        _ => vec![
            format!("const Options {a} = {h}Options();"),
            "try {".into(),
            format!("  {h}({a});"),
            format!("  {b}({a}.{j});"),
            "} catch (const std::exception& e) {".into(),
            format!("  LOG(ERROR) << e.what() << {a}.{b};"),
            "}".into(),
            format!("Publish({a});"),
        ],
    }
}

/// Core lines of a category and their fixed form. The container is a typed
/// local and the change sits mid-block, so the changed region and its
/// context carry the category rather than the signature.
fn pattern(category: Category, rng: &mut ChaCha8Rng, names: &mut Names<'_>) -> (Vec<String>, Vec<String>) {
    let h = HELPERS[rng.gen_range(0..HELPERS.len())];
    match category {
        Category::Vector => {
            let (out, src, e) = (names.fresh(), names.fresh(), names.fresh());
            let before = vec![
                format!("const std::vector<Item>& {src} = {h}Items();"),
                format!("if ({src}.empty()) return 0;"),
                format!("std::vector<Entry> {out};"),
                format!("for (const auto& {e} : {src}) {{"),
                format!("  {out}.push_back({h}({e}));"),
                format!("  {out}.back().weight = {e}.size();"),
                "}".into(),
                format!("Publish({out}.size(), {out});"),
            ];
            let mut after = before.clone();
            after.insert(3, format!("{out}.reserve({src}.size());"));
            (before, after)
        }
        Category::Map => {
            let (m, key, v, it) = (names.fresh(), names.fresh(), names.fresh(), names.fresh());
            let head = [
                format!("const std::map<std::string, int>& {m} = {h}Table();"),
                format!("const std::string {key} = {h}Key();"),
                format!("int {v} = 0;"),
            ];
            let tail = ["}".to_string(), format!("Publish({v}, {m}.size());")];
            let mut before = head.to_vec();
            before.extend([
                format!("if ({m}.count({key}) > 0) {{"),
                format!("  {v} = {m}.at({key});"),
            ]);
            before.extend(tail.clone());
            let mut after = head.to_vec();
            after.extend([
                format!("auto {it} = {m}.find({key});"),
                format!("if ({it} != {m}.end()) {{"),
                format!("  {v} = {it}->second;"),
            ]);
            after.extend(tail);
            (before, after)
        }
        _ => {
            let (recs, r, sum) = (names.fresh(), names.fresh(), names.fresh());
            let before = vec![
                format!("const std::vector<Record>& {recs} = {h}Records();"),
                format!("if ({recs}.empty()) return 0;"),
                format!("size_t {sum} = 0;"),
                format!("for (auto {r} : {recs}) {{"),
                format!("  {sum} += {r}.payload.size();"),
                format!("  {sum} += {r}.name.size();"),
                "}".into(),
                format!("Publish({sum}, {recs}.size());"),
            ];
            let mut after = before.clone();
            after[3] = format!("for (const auto& {r} : {recs}) {{");
            (before, after)
        }
    }
}

fn render(name: &str, params: &[String], decls: &[String], blocks: &[Vec<String>], ret: &str) -> String {
    let mut s = format!("int {name}({}) {{\n", params.join(", "));
    for line in decls.iter().chain(blocks.iter().flatten()) {
        s.push_str("  ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(&format!("  return {ret};\n}}\n"));
    s
}

struct Generated {
    before: String,
    after: Option<String>,
}

fn generate_function(rng: &mut ChaCha8Rng, name: &str, category: Option<Category>) -> Generated {
    let mut names = Names {
        rng: &mut ChaCha8Rng::seed_from_u64(rng.gen()),
        used: BTreeSet::new(),
    };
    let (i, d) = (names.fresh(), names.fresh());
    let params: Vec<String> = (0..rng.gen_range(0..3))
        .map(|_| format!("{} {}", PARAM_TYPES[rng.gen_range(0..PARAM_TYPES.len())], names.fresh()))
        .collect();
    let decls = vec![format!("int {i} = {};", rng.gen_range(0..5)), format!("double {d} = 1.0;")];
    let (mut ints, mut doubles) = (vec![i.clone()], vec![d.clone()]);
    let mut blocks: Vec<Vec<String>> = (0..rng.gen_range(6..11))
        .map(|_| filler(rng, &mut names, &mut ints, &mut doubles))
        .collect();
    for _ in 0..rng.gen_range(0..3) {
        let at = rng.gen_range(0..=blocks.len());
        blocks.insert(at, vec![format!("// {} the {} first", VERBS[rng.gen_range(0..VERBS.len())].to_lowercase(), names.fresh())]);
    }
    blocks.shuffle(rng);
    let mut after_blocks = None;
    if let Some(cat) = category {
        let (before, after) = pattern(cat, rng, &mut names);
        let at = rng.gen_range(0..=blocks.len());
        let mut fixed = blocks.clone();
        blocks.insert(at, before);
        fixed.insert(at, after);
        after_blocks = Some(fixed);
    } else {
        let block = benign(rng, &mut names);
        let at = rng.gen_range(0..=blocks.len());
        blocks.insert(at, block);
    }
    Generated {
        before: render(name, &params, &decls, &blocks, &i),
        after: after_blocks.map(|b| render(name, &params, &decls, &b, &i)),
    }
}

/// Builds the database and the planted pairs. Function order is shuffled
/// so position carries no signal.
pub fn build_seeded_corpus(params: &CorpusParams) -> SeededCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut plan: Vec<Option<Category>> = params
        .per_category
        .iter()
        .flat_map(|(&c, &n)| std::iter::repeat_n(Some(c), n))
        .chain(std::iter::repeat_n(None, params.distractors))
        .collect();
    plan.shuffle(&mut rng);

    let mut corpus = SeededCorpus {
        functions: Vec::new(),
        sources: BTreeMap::new(),
        planted: Vec::new(),
    };
    for (n, category) in plan.into_iter().enumerate() {
        let verb = VERBS[rng.gen_range(0..VERBS.len())];
        let name = format!("{verb}{}{n:03}", NAMES[rng.gen_range(0..NAMES.len())].replace('_', ""));
        let file = format!("seeded/f{n:03}.cc");
        let g = generate_function(&mut rng, &name, category);
        let mut records = extract_annotated(&g.before, &file).expect("generated code is well formed");
        let record = records.remove(0);
        if let (Some(cat), Some(after)) = (category, &g.after) {
            corpus.planted.push(PlantedPair {
                function_id: record.id.clone(),
                category: cat,
                diff: unified_diff(&g.before, after, Some(&file)),
            });
        }
        corpus.sources.insert(record.id.clone(), g.before);
        corpus.functions.push(record);
    }
    corpus
}
