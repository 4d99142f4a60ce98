use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use optiscout_core::edit::completion::{CompletionService, HttpCompletion, ReplayCompletion};
use optiscout_core::edit::diff::{apply_hunks, parse_diff};
use optiscout_core::edit::prompt::{render_prompt, PromptRecipe, RecipeKind};
use optiscout_core::edit::proposal::select_conservative;
use optiscout_core::edit::{completion::prompt_hash, generate_proposals};
use optiscout_core::embedding::{build_index, default_stoplist, embed_diff_query, embed_function, IndexEntry, VectorIndex};
use optiscout_core::eval::{evaluate_seeded, render_csv, render_table, CorpusParams, RetrievalConfig};
use optiscout_core::ir::{discover_sources, extract_annotated, extract_corpus, span_text, CostAnnotation, FunctionRecord};
use optiscout_core::mine::rules::{category_table, default_rules, parse_rules};
use optiscout_core::mine::{build_examples, ingest_curated, load_examples, save_examples, scan_commits, Category};
use optiscout_core::profile::{attribute_and_report, mark_shared, parse_call_tree_json, parse_folded_stacks, CostlyFunction};
use optiscout_core::rank::{looks_like_diff, rank, Candidate, CodeFeatures};
use optiscout_core::verify::{
    check_valid, measure_speedup, read_ledger, record_outcome, run_shell, scratch_copy, summarize, EditOutcome,
    FileEdit, OutcomeStatus,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_by_extension, PipelineConfig};
use crate::*;

/// Runs one subcommand and returns what it prints.
pub fn run(cli: Cli) -> Result<String> {
    let pretty = cli.pretty;
    if let Command::Eval(EvalCommand::Map(args)) = &cli.command {
        return eval_map(args, cli.config.as_deref(), pretty);
    }
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Mine(a) => mine(a, pretty),
        Command::Extract(a) => extract(a, &cfg, pretty),
        Command::Prune(a) => prune(a, &cfg, pretty),
        Command::Index(IndexCommand::Build(a)) => index_build(a, &cfg, pretty),
        Command::Index(IndexCommand::Query(a)) => index_query(a, pretty),
        Command::Query(a) => query(a, &cfg, pretty),
        Command::Rank(a) => rank_cmd(a, pretty),
        Command::GenEdit(a) => gen_edit(a, &cfg, pretty),
        Command::Verify(a) => verify(a, &cfg, pretty),
        Command::Bench(a) => bench(a, &cfg, pretty),
        Command::Eval(_) => unreachable!("handled above"),
        Command::Outcome(OutcomeCommand::Record(a)) => outcome_record(a, pretty),
        Command::Outcome(OutcomeCommand::Summary(a)) => outcome_summary(a, pretty),
    }
}

fn emit<T: Serialize + ?Sized>(value: &T, pretty: bool) -> Result<String> {
    let mut s = if pretty {
        serde_json::to_string_pretty(value)?
    } else {
        serde_json::to_string(value)?
    };
    s.push('\n');
    Ok(s)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for it in items {
        text.push_str(&serde_json::to_string(it)?);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn mine(a: MineArgs, pretty: bool) -> Result<String> {
    let rules = match &a.rules {
        Some(p) => parse_rules(&read(p)?)?,
        None => default_rules(),
    };
    let mut hits = scan_commits(&a.repo, &rules)?;
    let mut warnings = Vec::new();
    if let Some(feed) = &a.feed {
        let (curated, w) = ingest_curated(&a.repo, &read(feed)?)?;
        warnings = w;
        for c in curated {
            // A curated commit that also matched a keyword keeps one entry
            // with the curated category.
            match hits.iter_mut().find(|h| h.commit_id == c.commit_id) {
                Some(h) => h.category_hint = c.category_hint.or(h.category_hint),
                None => hits.push(c),
            }
        }
    }
    let (examples, diagnostics) = build_examples(&hits, &category_table());
    save_examples(&a.out, &examples)?;
    let mut by_category: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in &examples {
        *by_category.entry(ex.category.as_str()).or_default() += 1;
    }
    emit(
        &json!({
            "commits": hits.len(),
            "examples": examples.len(),
            "by_category": by_category,
            "diagnostics": diagnostics,
            "warnings": warnings,
        }),
        pretty,
    )
}

/// True when a profile frame name and a qualified function name refer to
/// the same function, allowing either side to omit leading qualifiers.
fn same_function(frame: &str, name: &str) -> bool {
    frame == name || frame.ends_with(&format!("::{name}")) || name.ends_with(&format!("::{frame}"))
}

fn extract(a: ExtractArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let paths: Vec<PathBuf> = match (&a.manifest, &a.root) {
        (Some(m), _) => read(m)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(PathBuf::from)
            .collect(),
        (None, Some(root)) => discover_sources(root),
        (None, None) if !cfg.corpus.is_empty() => cfg
            .corpus
            .iter()
            .flat_map(|p| if p.is_dir() { discover_sources(p) } else { vec![p.clone()] })
            .collect(),
        (None, None) => bail!("pass --manifest or --root, or list corpus paths in the config"),
    };
    let (mut records, diagnostics) = extract_corpus(&paths);
    let mut annotated = 0;
    if let Some(costs) = &a.costs {
        let report: Vec<CostlyFunction> = serde_json::from_str(&read(costs)?)
            .with_context(|| format!("parsing {}", costs.display()))?;
        let source = costs.display().to_string();
        for r in &mut records {
            if let Some(c) = report.iter().find(|c| same_function(&c.fn_name, &r.name)) {
                r.cost = Some(CostAnnotation::new(c.attributed_pct.min(100.0), None, source.clone())?);
                annotated += 1;
            }
        }
    }
    write_jsonl(&a.out, &records)?;
    emit(
        &json!({"files": paths.len(), "records": records.len(), "annotated": annotated, "diagnostics": diagnostics}),
        pretty,
    )
}

fn prune(a: PruneArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let path = a
        .profile
        .or_else(|| cfg.profiles.first().cloned())
        .ok_or_else(|| anyhow!("pass --profile or list a profile in the config"))?;
    let mut pc = cfg.prune;
    if let Some(v) = a.cmin {
        pc.c_min = v;
    }
    if let Some(v) = a.cmax {
        pc.c_max = v;
    }
    if let Some(v) = a.shared_threshold {
        pc.shared_binary_threshold = v;
    }
    pc.validate()?;
    let text = read(&path)?;
    let mut tree = if path.extension().is_some_and(|e| e == "json") {
        parse_call_tree_json(&text)?
    } else {
        parse_folded_stacks(&text)?
    };
    if let Some(b) = &a.binaries {
        let counts: HashMap<String, u32> = serde_json::from_str(&read(b)?)?;
        mark_shared(&mut tree, &counts, &pc);
    }
    emit(&attribute_and_report(&tree, &pc), pretty)
}

fn index_build(a: IndexBuildArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let mut ic = cfg.index;
    if let Some(v) = a.partitions {
        ic.num_partitions = v;
    }
    if let Some(v) = a.nprobe {
        ic.nprobe = v;
    }
    if let Some(v) = a.min_cost_pct {
        ic.min_cost_pct = v;
    }
    if let Some(v) = a.seed {
        ic.seed = v;
    }
    let records: Vec<FunctionRecord> = read_jsonl(&a.records)?;
    let entries = records
        .iter()
        .map(|r| IndexEntry {
            id: r.id.clone(),
            vector: embed_function(r).1,
            cycles_pct: r.cycles_pct(),
        })
        .collect();
    let index = build_index(entries, ic)?;
    index.save(&a.out)?;
    emit(
        &json!({"entries": index.len(), "partitions": index.partitions.len(), "config": index.config}),
        pretty,
    )
}

fn find_record<'a>(records: &'a [FunctionRecord], id: &str) -> Result<&'a FunctionRecord> {
    records
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| anyhow!("no function with id {id}"))
}

fn index_query(a: IndexQueryArgs, pretty: bool) -> Result<String> {
    let index = VectorIndex::load(&a.index)?;
    let bow = match (&a.source.function, &a.source.diff) {
        (Some(id), _) => {
            let path = a.records.as_ref().ok_or_else(|| anyhow!("--function needs --records"))?;
            let records: Vec<FunctionRecord> = read_jsonl(path)?;
            embed_function(find_record(&records, id)?).1
        }
        (None, Some(diff)) => embed_diff_query(&read(diff)?, &default_stoplist())?.1,
        (None, None) => bail!("pass --function or --diff"),
    };
    let hits = index.query_topk(&bow, a.k.unwrap_or(index.config.k), a.exact)?;
    emit(&hits, pretty)
}

fn query(a: QueryArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let index = VectorIndex::load(&a.index)?;
    let records: Vec<FunctionRecord> = read_jsonl(&a.records)?;
    let (features, self_id) = match (&a.source.function, &a.source.diff) {
        (Some(id), _) => (CodeFeatures::of_function(find_record(&records, id)?), Some(id.clone())),
        (None, Some(diff)) => (CodeFeatures::of_diff(&read(diff)?)?, None),
        (None, None) => bail!("pass --function or --diff"),
    };
    let exact = a.exact || cfg.ranking.exact;
    let top = a.top.unwrap_or(cfg.ranking.top);
    let hits: Vec<_> = index
        .query_topk(&features.bow, a.k.unwrap_or(index.config.k), exact)?
        .into_iter()
        .filter(|h| self_id.as_deref() != Some(h.id.as_str()))
        .collect();
    if a.no_rank || !cfg.ranking.enabled {
        let hits: Vec<_> = hits.into_iter().take(top).collect();
        return emit(&json!({"ranked": false, "results": hits}), pretty);
    }
    let by_id: HashMap<&str, &FunctionRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let feats: Vec<CodeFeatures> = hits
        .iter()
        .map(|h| {
            by_id
                .get(h.id.as_str())
                .map(|r| CodeFeatures::of_function(r))
                .ok_or_else(|| anyhow!("index entry {} is missing from the records", h.id))
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<Candidate<'_>> = hits
        .iter()
        .zip(&feats)
        .map(|(h, f)| Candidate {
            id: &h.id,
            ann_distance: h.distance,
            features: f,
        })
        .collect();
    let ranked: Vec<_> = rank(&features, &candidates).into_iter().take(top).collect();
    emit(&json!({"ranked": true, "results": ranked}), pretty)
}

fn rank_cmd(a: RankArgs, pretty: bool) -> Result<String> {
    let records: Vec<FunctionRecord> = read_jsonl(&a.records)?;
    let query_path = Path::new(&a.query);
    let features = if query_path.is_file() {
        let text = read(query_path)?;
        if !looks_like_diff(&text) {
            bail!("{} is not a unified diff", a.query);
        }
        CodeFeatures::of_diff(&text)?
    } else {
        CodeFeatures::of_function(find_record(&records, &a.query)?)
    };
    let feats: Vec<CodeFeatures> = a
        .candidates
        .iter()
        .map(|id| find_record(&records, id).map(CodeFeatures::of_function))
        .collect::<Result<_>>()?;
    let candidates: Vec<Candidate<'_>> = a
        .candidates
        .iter()
        .zip(&feats)
        .map(|(id, f)| Candidate {
            id,
            ann_distance: features.bow.cosine_distance(&f.bow),
            features: f,
        })
        .collect();
    emit(&rank(&features, &candidates), pretty)
}

/// The whole file, or the text of one function in it.
fn target_text(path: &Path, function: Option<&str>) -> Result<String> {
    let text = read(path)?;
    let Some(name) = function else { return Ok(text) };
    let records = extract_annotated(&text, &path.display().to_string())?;
    let r = records
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| anyhow!("no function named {name} in {}", path.display()))?;
    Ok(span_text(&text, r.span))
}

fn gen_edit(a: GenEditArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let kind: RecipeKind = match &a.recipe {
        Some(r) => r.parse()?,
        None => cfg.recipe.kind,
    };
    let target = target_text(&a.target, a.function.as_deref())?;
    let recipe = if kind == RecipeKind::FewShot {
        let db = a
            .shots
            .as_ref()
            .or(cfg.recipe.shots.as_ref())
            .ok_or_else(|| anyhow!("few-shot prompts need --shots"))?;
        let mut examples = load_examples(db)?;
        let wanted = Category::from_tag(&a.category);
        examples.sort_by(|x, y| (x.category != wanted).cmp(&(y.category != wanted)).then_with(|| x.id.cmp(&y.id)));
        PromptRecipe::few_shot(examples.iter().take(cfg.recipe.num_shots.max(1)).map(|e| e.to_shot()).collect())
    } else {
        PromptRecipe::new(kind)
    };
    let prompt = render_prompt(&recipe, &target, &a.category)?;
    let replay = a.replay.clone().or_else(|| cfg.completion.replay.clone());
    let endpoint = a.endpoint.clone().or_else(|| cfg.completion.endpoint.clone());
    let service: Box<dyn CompletionService> = match (replay, endpoint) {
        (Some(p), _) => Box::new(ReplayCompletion::load(&p)?),
        (None, Some(url)) => {
            let secs = cfg.completion.timeout_secs.unwrap_or(120);
            Box::new(HttpCompletion::new(url, Duration::from_secs(secs)))
        }
        (None, None) => bail!("pass --replay or --endpoint, or configure a completion service"),
    };
    let mut gen = cfg.recipe.generation.clone();
    if let Some(n) = a.samples {
        gen.samples = n;
    }
    gen.self_review |= a.self_review;
    let mut proposals = generate_proposals(service.as_ref(), &recipe, &target, &a.category, &gen)?;
    let selected = select_conservative(&mut proposals).ok();
    emit(
        &json!({
            "recipe": kind,
            "category": a.category,
            "prompt_sha256": prompt_hash(&prompt),
            "selected": selected,
            "proposals": proposals,
        }),
        pretty,
    )
}

/// The file replacement described by `--edited` or `--diff`, if any. A diff
/// with hunks that do not apply is an error.
fn resolve_edit(a: &EditArgs) -> Result<Option<FileEdit>> {
    let Some(file) = &a.file else { return Ok(None) };
    let contents = match (&a.edited, &a.diff) {
        (Some(p), _) => read(p)?,
        (None, Some(d)) => {
            let original = read(&a.workspace.join(file))?;
            let hunks = parse_diff(&read(d)?);
            if hunks.is_empty() {
                bail!("{} holds no diff hunks", d.display());
            }
            let out = apply_hunks(&original, &hunks);
            if out.failed > 0 {
                bail!("{} of {} hunks do not apply to {}", out.failed, hunks.len(), file.display());
            }
            out.text
        }
        (None, None) => return Ok(None),
    };
    Ok(Some(FileEdit {
        path: file.clone(),
        contents,
    }))
}

fn verify(a: VerifyArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let edit = resolve_edit(&a.edit)?.ok_or_else(|| anyhow!("pass --file with --edited or --diff"))?;
    let build = a.build.as_deref().or(cfg.commands.build.as_deref());
    let test = a.test.as_deref().or(cfg.commands.test.as_deref());
    let timeout = Duration::from_secs(a.timeout.unwrap_or(cfg.commands.timeout_secs));
    emit(&check_valid(&a.edit.workspace, &edit, build, test, timeout)?, pretty)
}

fn bench(a: BenchArgs, cfg: &PipelineConfig, pretty: bool) -> Result<String> {
    let cmd = a
        .cmd
        .as_deref()
        .or(cfg.commands.bench.as_deref())
        .ok_or_else(|| anyhow!("pass --cmd or configure a bench command"))?;
    let build = a.build.as_deref().or(cfg.commands.build.as_deref());
    let runs = a.runs.unwrap_or(cfg.commands.runs);
    let timeout = Duration::from_secs(a.timeout.unwrap_or(cfg.commands.timeout_secs));
    let edit = resolve_edit(&a.edit)?;

    let baseline = scratch_copy(&a.edit.workspace, None)?;
    if let Some(b) = build {
        let r = run_shell(b, baseline.path(), timeout)?;
        if !r.success {
            bail!("baseline build failed: {}", r.stderr.trim());
        }
    }
    let mut rejected: Option<EditOutcome> = None;
    let edited = match &edit {
        Some(e) => {
            let dir = scratch_copy(&a.edit.workspace, Some(e))?;
            match build.map(|b| run_shell(b, dir.path(), timeout)).transpose()? {
                Some(r) if !r.success => {
                    rejected = Some(EditOutcome {
                        status: if r.timed_out { OutcomeStatus::R_OTHER } else { OutcomeStatus::R_TEST },
                        note: "edited build failed".into(),
                    });
                    None
                }
                _ => Some(dir),
            }
        }
        None => None,
    };
    let result = measure_speedup(cmd, baseline.path(), edited.as_ref().map(|d| d.path()), runs, timeout)?;
    emit(&json!({"result": result, "rejected": rejected}), pretty)
}

fn eval_map(a: &EvalMapArgs, config: Option<&Path>, pretty: bool) -> Result<String> {
    let retrieval = match config {
        None => RetrievalConfig::default(),
        Some(p) => {
            let text = read(p)?;
            match parse_by_extension::<PipelineConfig>(p, &text) {
                Ok(pc) => {
                    pc.validate(p.parent().unwrap_or(Path::new(".")))?;
                    pc.retrieval()
                }
                Err(_) => parse_by_extension::<RetrievalConfig>(p, &text)?,
            }
        }
    };
    if a.k.contains(&0) {
        bail!("--k values must be positive");
    }
    let mut per_seed = Vec::new();
    for &seed in &a.seeds {
        let params = CorpusParams {
            seed,
            ..Default::default()
        };
        per_seed.push((seed, evaluate_seeded(&params, &retrieval, &a.k)?));
    }
    if a.csv || pretty {
        let mut out = String::new();
        for (seed, rows) in &per_seed {
            if per_seed.len() > 1 {
                out.push_str(&format!("# seed {seed}\n"));
            }
            out.push_str(&if a.csv { render_csv(rows) } else { render_table(rows) });
        }
        return Ok(out);
    }
    let value: Vec<_> = per_seed
        .iter()
        .map(|(seed, rows)| json!({"seed": seed, "rows": rows}))
        .collect();
    emit(&value, false)
}

fn outcome_record(a: OutcomeRecordArgs, pretty: bool) -> Result<String> {
    let status = OutcomeStatus::parse(&a.status).ok_or_else(|| anyhow!("unknown status {}", a.status))?;
    let entry = record_outcome(
        &a.ledger,
        &a.edit_id,
        &EditOutcome {
            status,
            note: a.note,
        },
    )?;
    emit(&entry, pretty)
}

fn outcome_summary(a: OutcomeSummaryArgs, pretty: bool) -> Result<String> {
    emit(&summarize(&read_ledger(&a.ledger)?), pretty)
}

#[cfg(test)]
mod tests {
    use super::same_function;

    #[test]
    fn frame_names_match_qualified_records() {
        assert!(same_function("ns::Foo::Bar", "Foo::Bar"));
        assert!(same_function("Bar", "ns::Bar"));
        assert!(!same_function("Bar", "ns::Baz"));
        assert!(!same_function("ar", "ns::Bar"));
    }
}
