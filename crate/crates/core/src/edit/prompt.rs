use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// File name the target code lives under in an agent workspace.
pub const REACT_TARGET_PATH: &str = "target.cc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecipeKind {
    ZeroShot,
    FewShot,
    Cot,
    React,
}

impl RecipeKind {
    pub const ALL: [RecipeKind; 4] = [Self::ZeroShot, Self::FewShot, Self::Cot, Self::React];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroShot => "zero-shot",
            Self::FewShot => "few-shot",
            Self::Cot => "cot",
            Self::React => "react",
        }
    }
}

impl fmt::Display for RecipeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecipeKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "zero-shot" | "zeroshot" | "zs" => Ok(Self::ZeroShot),
            "few-shot" | "fewshot" | "fs" => Ok(Self::FewShot),
            "cot" | "chain-of-thought" => Ok(Self::Cot),
            "react" => Ok(Self::React),
            _ => Err(PromptError::UnknownRecipe(s.to_string())),
        }
    }
}

/// One worked example shown to the model: code before the fix and the fix
/// as a diff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub before: String,
    pub diff: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("few-shot recipe needs at least one shot")]
    MissingShots,
    #[error("{0} recipe takes no shots")]
    UnexpectedShots(RecipeKind),
    #[error("target code is empty")]
    EmptyTarget,
    #[error("unknown recipe {0:?}")]
    UnknownRecipe(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecipe {
    pub kind: RecipeKind,
    #[serde(default)]
    pub shots: Vec<Shot>,
    /// Instruction line; `{category}` expands to a description of the
    /// anti-pattern.
    pub instruction_template: String,
}

pub const DEFAULT_INSTRUCTION: &str =
    "Improve the performance of the following C++ code by fixing {category}.";

impl PromptRecipe {
    pub fn new(kind: RecipeKind) -> Self {
        Self {
            kind,
            shots: Vec::new(),
            instruction_template: DEFAULT_INSTRUCTION.to_string(),
        }
    }

    pub fn few_shot(shots: Vec<Shot>) -> Self {
        Self {
            shots,
            ..Self::new(RecipeKind::FewShot)
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match (self.kind, self.shots.is_empty()) {
            (RecipeKind::FewShot, true) => Err(PromptError::MissingShots),
            (RecipeKind::FewShot, false) | (_, true) => Ok(()),
            (k, false) => Err(PromptError::UnexpectedShots(k)),
        }
    }

    fn instruction(&self, category: &str) -> String {
        self.instruction_template
            .replace("{category}", category_description(category))
    }
}

/// Human wording for an anti-pattern category name.
pub fn category_description(category: &str) -> &str {
    match category.to_ascii_lowercase().as_str() {
        "alloc" => "unnecessary memory allocations",
        "args" => "inefficient argument passing",
        "copy" => "unnecessary copies",
        "map" => "redundant map look-ups",
        "move" => "missing std::move calls",
        "sort" => "inefficient sorting",
        "vector" => "missing vector reserve calls",
        "other" | "" => "performance anti-patterns",
        _ => category,
    }
}

const DIFF_REQUEST: &str =
    "Answer with a unified diff against the code above (lines prefixed by ' ', '-' or '+', hunks starting with @@).";

fn fenced(label: &str, body: &str) -> String {
    let mut s = format!("```{label}\n{body}");
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("```\n");
    s
}

/// Renders the prompt text for a recipe. ReAct prompts refer to the target
/// through [`REACT_TARGET_PATH`] and end awaiting the first thought.
pub fn render_prompt(
    recipe: &PromptRecipe,
    target_code: &str,
    category: &str,
) -> Result<String, PromptError> {
    recipe.validate()?;
    if target_code.trim().is_empty() {
        return Err(PromptError::EmptyTarget);
    }
    let instruction = recipe.instruction(category);
    let mut out = String::new();
    match recipe.kind {
        RecipeKind::ZeroShot => {
            out.push_str(&instruction);
            out.push_str("\n\n");
            out.push_str(&fenced("cpp", target_code));
            out.push('\n');
            out.push_str(DIFF_REQUEST);
            out.push('\n');
        }
        RecipeKind::FewShot => {
            out.push_str(&instruction);
            out.push_str("\nHere are examples of such edits.\n");
            for (i, shot) in recipe.shots.iter().enumerate() {
                out.push_str(&format!("\nExample {}:\n", i + 1));
                out.push_str(&fenced("cpp", &shot.before));
                out.push_str("Fix:\n");
                out.push_str(&fenced("diff", &shot.diff));
            }
            out.push_str("\nApply the same kind of edit to this code:\n");
            out.push_str(&fenced("cpp", target_code));
            out.push('\n');
            out.push_str(DIFF_REQUEST);
            out.push('\n');
        }
        RecipeKind::Cot => {
            out.push_str(&instruction);
            out.push_str("\n\n");
            out.push_str(&fenced("cpp", target_code));
            out.push_str(
                "\nThink step by step. First list the places where the code does avoidable work, \
                 then explain how to remove each one, and only then write the change.\n",
            );
            out.push_str(DIFF_REQUEST);
            out.push('\n');
        }
        RecipeKind::React => {
            out.push_str(&instruction);
            out.push_str(&format!(
                "\nThe code is in the file {REACT_TARGET_PATH}.\n\
                 Work in steps. Each step is a Thought line followed by exactly one Action line:\n\
                 Action: cat <path>      show a file\n\
                 Action: patch           apply the unified diff that follows the action line\n\
                 Action: finish          stop; the accumulated changes are the answer\n\
                 After every action an Observe line reports the result.\n\n\
                 Thought:"
            ));
        }
    }
    Ok(out)
}
