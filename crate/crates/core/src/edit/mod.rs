//! Prompting, completion, diff handling and conservative edit selection.

pub mod codebleu;
pub mod completion;
pub mod diff;
pub mod prompt;
pub mod proposal;
pub mod react;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use completion::{CompletionRequest, CompletionService, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use prompt::{render_prompt, PromptError, PromptRecipe, RecipeKind};
use proposal::{EditProposal, ProposalStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub samples: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Upper bound on concurrent completion calls.
    pub parallelism: usize,
    pub max_steps: usize,
    pub self_review: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            samples: 5,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            parallelism: 5,
            max_steps: react::DEFAULT_MAX_STEPS,
            self_review: false,
        }
    }
}

/// Draws `config.samples` proposals for one target, ordered by sample
/// index whatever order the calls complete in.
pub fn generate_proposals(
    service: &dyn CompletionService,
    recipe: &PromptRecipe,
    target_code: &str,
    category: &str,
    config: &GenerationConfig,
) -> Result<Vec<EditProposal>, PromptError> {
    let prompt = render_prompt(recipe, target_code, category)?;
    let base = CompletionRequest {
        prompt,
        temperature: config.temperature,
        max_tokens: config.max_tokens,
    };
    let draw = |idx: usize| -> EditProposal {
        let mut p = if recipe.kind == RecipeKind::React {
            react::react_proposal(service, &base, idx, target_code, config.max_steps)
        } else {
            match service.complete(&base, idx) {
                Ok(r) => EditProposal::from_completion(idx, recipe.kind, target_code, r.text),
                Err(e) => EditProposal::failed(idx, recipe.kind, e.to_string()),
            }
        };
        if config.self_review && p.status == ProposalStatus::Candidate {
            match self_review(service, &p, config) {
                Ok(true) => {}
                Ok(false) => p.status = ProposalStatus::RejectedReview,
                Err(e) => {
                    p.status = ProposalStatus::RejectedReview;
                    p.error = Some(e.to_string());
                }
            }
        }
        p
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .expect("thread pool");
    Ok(pool.install(|| (0..config.samples).into_par_iter().map(draw).collect()))
}

pub const REVIEW_QUESTIONS: &[&str] = &[
    "Does the change preserve the observable behavior of the code?",
    "Does the change compile without new includes or build dependencies?",
    "Is the change free of new undefined behavior, such as use after move or dangling references?",
    "Does the change reduce work on the common path rather than merely moving it?",
];

pub fn review_prompt(diff: &str) -> String {
    let mut s = String::from("Review this C++ change. Answer each question with yes or no on its own numbered line.\n\n```diff\n");
    s.push_str(diff);
    if !diff.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("```\n\n");
    for (i, q) in REVIEW_QUESTIONS.iter().enumerate() {
        s.push_str(&format!("{}. {q}\n", i + 1));
    }
    s
}

/// True unless any answer line starts with "no".
pub fn review_passes(answer: &str) -> bool {
    !answer.lines().any(|l| {
        let t = l
            .trim_start()
            .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == ':')
            .trim_start()
            .to_ascii_lowercase();
        t == "no" || t.starts_with("no ") || t.starts_with("no,") || t.starts_with("no.")
    })
}

/// One extra completion asking fixed yes/no questions about the diff.
pub fn self_review(
    service: &dyn CompletionService,
    proposal: &EditProposal,
    config: &GenerationConfig,
) -> Result<bool, completion::CompletionError> {
    let req = CompletionRequest {
        prompt: review_prompt(&proposal.diff),
        temperature: config.temperature,
        max_tokens: config.max_tokens,
    };
    Ok(review_passes(&service.complete(&req, proposal.sample_idx)?.text))
}
