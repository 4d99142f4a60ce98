use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::completion::{CompletionError, CompletionRequest, CompletionService};
use super::diff::{apply_hunks, parse_diff};
use super::prompt::{RecipeKind, REACT_TARGET_PATH};
use super::proposal::EditProposal;

pub const DEFAULT_MAX_STEPS: usize = 8;

/// In-memory files the agent can read and patch.
pub type Workspace = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Cat { path: String },
    Patch { path: String, diff: String },
    Finish,
    Disallowed { name: String },
    Missing,
}

/// One model turn and the executor's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub model_text: String,
    pub action: Action,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactRun {
    pub steps: Vec<Step>,
    pub finished: bool,
    pub workspace: Workspace,
    pub applied_hunks: usize,
    pub failed_hunks: usize,
}

/// Cuts a model turn at the first hallucinated observation or follow-up
/// thought after its action.
fn truncate_turn(text: &str) -> &str {
    let mut seen_action = false;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        if seen_action && (t.starts_with("Observe") || t.starts_with("Thought:")) {
            return &text[..offset];
        }
        if t.starts_with("Action:") {
            seen_action = true;
        }
        offset += line.len();
    }
    text
}

/// Reads the action out of one model turn. A patch targets the path in
/// its `+++` header when that names a workspace file, else the target.
pub fn parse_action(turn: &str, workspace: &Workspace) -> Action {
    let Some(pos) = turn.find("Action:") else {
        return Action::Missing;
    };
    let rest = &turn[pos + "Action:".len()..];
    let (line, after) = rest.split_once('\n').unwrap_or((rest, ""));
    let mut words = line.split_whitespace();
    let name = words.next().unwrap_or("").to_ascii_lowercase();
    match name.as_str() {
        "cat" => Action::Cat {
            path: words.next().unwrap_or(REACT_TARGET_PATH).to_string(),
        },
        "patch" => {
            let path = after
                .lines()
                .find_map(|l| l.strip_prefix("+++ "))
                .map(|p| {
                    let p = p.split('\t').next().unwrap_or(p).trim();
                    p.strip_prefix("b/").unwrap_or(p).to_string()
                })
                .filter(|p| workspace.contains_key(p))
                .unwrap_or_else(|| REACT_TARGET_PATH.to_string());
            Action::Patch {
                path,
                diff: after.to_string(),
            }
        }
        "finish" => Action::Finish,
        "" => Action::Missing,
        other => Action::Disallowed {
            name: other.to_string(),
        },
    }
}

/// Runs the thought/action/observe loop against `workspace` until the
/// model finishes or `max_steps` turns have been spent. The prompt of every
/// turn is the full transcript so far.
pub fn react_loop(
    service: &dyn CompletionService,
    base: &CompletionRequest,
    sample_idx: usize,
    workspace: Workspace,
    max_steps: usize,
) -> Result<ReactRun, CompletionError> {
    let mut ws = workspace;
    let mut transcript = base.prompt.clone();
    let mut run = ReactRun {
        steps: Vec::new(),
        finished: false,
        workspace: Workspace::new(),
        applied_hunks: 0,
        failed_hunks: 0,
    };
    for _ in 0..max_steps {
        let req = CompletionRequest {
            prompt: transcript.clone(),
            ..base.clone()
        };
        let reply = service.complete(&req, sample_idx)?;
        let turn = truncate_turn(&reply.text).to_string();
        let action = parse_action(&turn, &ws);
        let observation = match &action {
            Action::Cat { path } => match ws.get(path) {
                Some(text) => text.clone(),
                None => format!("error: no such file {path}"),
            },
            Action::Patch { path, diff } => {
                let hunks = parse_diff(diff);
                let source = ws.get(path).cloned().unwrap_or_default();
                let out = apply_hunks(&source, &hunks);
                run.applied_hunks += out.applied;
                run.failed_hunks += out.failed;
                if hunks.is_empty() {
                    "error: patch contained no diff hunks".to_string()
                } else {
                    ws.insert(path.clone(), out.text);
                    format!("applied {} hunk(s), {} failed", out.applied, out.failed)
                }
            }
            Action::Finish => "done".to_string(),
            Action::Disallowed { name } => {
                format!("error: action {name} is not allowed; use cat, patch or finish")
            }
            Action::Missing => "error: no Action line found".to_string(),
        };
        transcript.push_str(&turn);
        if !turn.ends_with('\n') {
            transcript.push('\n');
        }
        transcript.push_str(&format!("Observe: {observation}\nThought:"));
        let done = action == Action::Finish;
        run.steps.push(Step {
            model_text: turn,
            action,
            observation,
        });
        if done {
            run.finished = true;
            break;
        }
    }
    run.workspace = ws;
    Ok(run)
}

/// Proposal made from the target file delta after an agent run.
pub fn react_proposal(
    service: &dyn CompletionService,
    base: &CompletionRequest,
    sample_idx: usize,
    original: &str,
    max_steps: usize,
) -> EditProposal {
    let ws: Workspace = [(REACT_TARGET_PATH.to_string(), original.to_string())].into();
    match react_loop(service, base, sample_idx, ws, max_steps) {
        Ok(run) => {
            let edited = run.workspace.get(REACT_TARGET_PATH).cloned().unwrap_or_default();
            let raw = run
                .steps
                .iter()
                .map(|s| format!("{}Observe: {}\n", s.model_text, s.observation))
                .collect::<String>();
            let mut p = EditProposal::from_edit(sample_idx, RecipeKind::React, original, &edited, raw);
            p.invalid_hunks = run.failed_hunks;
            p
        }
        Err(e) => EditProposal::failed(sample_idx, RecipeKind::React, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::completion::{FixtureEntry, ReplayCompletion};
    use crate::edit::proposal::ProposalStatus;

    /// Plays back a fixed list of turns regardless of the prompt.
    struct Script(Vec<&'static str>, std::sync::Mutex<usize>);

    impl CompletionService for Script {
        fn complete(
            &self,
            _req: &CompletionRequest,
            _idx: usize,
        ) -> Result<super::super::completion::CompletionResponse, CompletionError> {
            let mut i = self.1.lock().unwrap();
            let text = self.0.get(*i).copied().unwrap_or(" idle\nAction: think\n");
            *i += 1;
            Ok(super::super::completion::CompletionResponse { text: text.into() })
        }
    }

    const SRC: &str = "void F(std::vector<int>& v) {\n  for (int i = 0; i < 100; ++i) v.push_back(i);\n}\n";
    const PATCH: &str = "@@ -1,3 +1,4 @@\n void F(std::vector<int>& v) {\n+  v.reserve(v.size() + 100);\n   for (int i = 0; i < 100; ++i) v.push_back(i);\n }\n";

    #[test]
    fn cat_patch_finish() {
        let patch_turn: &'static str =
            Box::leak(format!(" Let's make a patch.\nAction: patch\n{PATCH}Observe: fake\n").into_boxed_str());
        let s = Script(
            vec![" Let's examine the code.\nAction: cat target.cc\n", patch_turn, " Done.\nAction: finish\n"],
            Default::default(),
        );
        let p = react_proposal(&s, &CompletionRequest::new("start"), 0, SRC, 8);
        assert_eq!(p.status, ProposalStatus::Candidate);
        assert_eq!(p.edited_source(SRC), crate::edit::diff::apply_hunks(SRC, &parse_diff(PATCH)).text);
        assert_eq!(p.valid_hunks, 1);
    }

    #[test]
    fn exhausted_without_patch_is_empty() {
        let s = Script(vec![], Default::default());
        let run = react_loop(&s, &CompletionRequest::new("p"), 0, Workspace::new(), 3).unwrap();
        assert_eq!(run.steps.len(), 3);
        assert!(!run.finished);
        assert!(run.steps[0].observation.contains("not allowed"));
        let p = react_proposal(&s, &CompletionRequest::new("p"), 0, SRC, 2);
        assert_eq!(p.status, ProposalStatus::RejectedEmpty);
    }

    #[test]
    fn failing_patch_is_observed() {
        let s = Script(
            vec![" Try.\nAction: patch\n@@ -1,1 +1,1 @@\n-nothing like this\n+x\n", " Stop.\nAction: finish\n"],
            Default::default(),
        );
        let ws: Workspace = [(REACT_TARGET_PATH.to_string(), SRC.to_string())].into();
        let run = react_loop(&s, &CompletionRequest::new("p"), 0, ws, 8).unwrap();
        assert_eq!(run.steps[0].observation, "applied 0 hunk(s), 1 failed");
        assert_eq!(run.workspace[REACT_TARGET_PATH], SRC);
        assert!(run.finished);
    }

    #[test]
    fn replay_transcript_keys() {
        // Each turn's prompt is the transcript, so fixtures chain by hash.
        let base = "scaffold\nThought:";
        let t1 = " Look.\nAction: cat target.cc\n";
        let p2 = format!("{base}{t1}Observe: {SRC}\nThought:");
        let t2 = " Stop.\nAction: finish\n";
        let mut r = ReplayCompletion::default();
        r.insert(base, FixtureEntry::Single(t1.into()));
        r.insert(&p2, FixtureEntry::Single(t2.into()));
        let ws: Workspace = [(REACT_TARGET_PATH.to_string(), SRC.to_string())].into();
        let run = react_loop(&r, &CompletionRequest::new(base), 0, ws, 8).unwrap();
        assert!(run.finished);
        assert_eq!(run.steps.len(), 2);
    }
}
