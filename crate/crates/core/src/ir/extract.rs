use std::collections::BTreeSet;

use super::lexer::{lex, Token, TokenKind};
use super::{FunctionRecord, IrError};

/// Location of a function signature inside a declaration token slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    /// Name as written, including qualifiers such as `Foo::` or `~`.
    pub name: String,
    /// Indices of the parameter list's `(` and `)`.
    pub params: (usize, usize),
}

enum Scope {
    /// Namespace or class; the name extends the qualified prefix. Empty
    /// names (anonymous namespaces, `extern "C"`) are transparent.
    Named(String),
}

const NOT_FUNCTION_NAMES: &[&str] = &[
    "decltype", "noexcept", "alignas", "alignof", "sizeof", "throw", "requires",
    "__attribute__", "__declspec", "static_assert", "typeid",
];

/// Finds functions at namespace and class scope. Anything nested in a
/// function body (lambdas, local classes) stays part of the enclosing record.
pub fn extract_functions(source: &str, file_path: &str) -> Result<Vec<FunctionRecord>, IrError> {
    let tokens = lex(source)?;
    let code: Vec<usize> = (0..tokens.len())
        .filter(|&i| tokens[i].kind != TokenKind::Comment)
        .collect();
    let ctoks: Vec<&Token> = code.iter().map(|&i| &tokens[i]).collect();
    let matching = match_delimiters(&ctoks)?;

    let mut records = Vec::new();
    let mut scopes: Vec<Scope> = Vec::new();
    let mut stmt_start = 0usize;
    let mut i = 0usize;
    while i < ctoks.len() {
        let t = ctoks[i];
        match t.text.as_str() {
            ";" => stmt_start = i + 1,
            ":" if i > stmt_start
                && i - stmt_start == 1
                && matches!(ctoks[stmt_start].text.as_str(), "public" | "private" | "protected") =>
            {
                stmt_start = i + 1;
            }
            "}" => {
                scopes.pop();
                stmt_start = i + 1;
            }
            "{" => {
                let close = matching[i];
                let decl = &ctoks[stmt_start..i];
                if let Some(name) = namespace_name(decl) {
                    scopes.push(Scope::Named(name));
                    stmt_start = i + 1;
                } else if let Some(sig) = find_signature(decl) {
                    if brace_initializer(decl, sig.params.1) {
                        // Member initializer such as `x_{a}` inside a ctor init list.
                        i = close + 1;
                        continue;
                    }
                    let prefix = scopes
                        .iter()
                        .map(|Scope::Named(n)| n.as_str())
                        .filter(|n| !n.is_empty())
                        .collect::<Vec<_>>();
                    let name = if prefix.is_empty() {
                        sig.name.clone()
                    } else {
                        format!("{}::{}", prefix.join("::"), sig.name)
                    };
                    let first = code[stmt_start];
                    let last = code[close];
                    let span = (tokens[first].line, tokens[last].line);
                    records.push(FunctionRecord {
                        id: FunctionRecord::make_id(file_path, &name, span.0),
                        name,
                        file: file_path.to_string(),
                        span,
                        tokens: tokens[first..=last].to_vec(),
                        type_set: BTreeSet::new(),
                        cost: None,
                    });
                    i = close + 1;
                    stmt_start = i;
                    continue;
                } else if let Some(name) = class_name(decl) {
                    scopes.push(Scope::Named(name));
                    stmt_start = i + 1;
                } else if is_linkage_block(decl) {
                    scopes.push(Scope::Named(String::new()));
                    stmt_start = i + 1;
                } else {
                    // enum bodies, aggregate initializers, and the like.
                    i = close + 1;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    Ok(records)
}

fn match_delimiters(toks: &[&Token]) -> Result<Vec<usize>, IrError> {
    let mut matching = vec![usize::MAX; toks.len()];
    let mut stack: Vec<(usize, char)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let (open, close) = match t.text.as_str() {
            "{" => (Some('{'), None),
            "(" => (Some('('), None),
            "[" => (Some('['), None),
            "}" => (None, Some('{')),
            ")" => (None, Some('(')),
            "]" => (None, Some('[')),
            _ => (None, None),
        };
        if let Some(o) = open {
            stack.push((i, o));
        } else if let Some(want) = close {
            match stack.pop() {
                Some((j, o)) if o == want => {
                    matching[i] = j;
                    matching[j] = i;
                }
                _ => {
                    return Err(IrError::UnbalancedBraces {
                        delim: want,
                        line: t.line,
                    })
                }
            }
        }
    }
    if let Some((j, o)) = stack.pop() {
        return Err(IrError::UnbalancedBraces {
            delim: o,
            line: toks[j].line,
        });
    }
    Ok(matching)
}

fn namespace_name(decl: &[&Token]) -> Option<String> {
    let pos = decl.iter().position(|t| t.is("namespace"))?;
    if decl[..pos].iter().any(|t| !t.is("inline")) {
        return None;
    }
    Some(
        decl[pos + 1..]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<String>(),
    )
}

fn is_linkage_block(decl: &[&Token]) -> bool {
    decl.len() == 2 && decl[0].is("extern") && decl[1].kind == TokenKind::LiteralString
}

fn class_name(decl: &[&Token]) -> Option<String> {
    let mut angle = 0i32;
    let mut paren = 0i32;
    for (k, t) in decl.iter().enumerate() {
        match t.text.as_str() {
            "(" => paren += 1,
            ")" => paren -= 1,
            "<" if paren == 0 => angle += 1,
            ">" if paren == 0 => angle -= 1,
            ">>" if paren == 0 => angle -= 2,
            "class" | "struct" | "union" if angle <= 0 && paren == 0 => {
                let rest = &decl[k + 1..];
                return Some(
                    rest.iter()
                        .enumerate()
                        .find(|(j, t)| {
                            matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName)
                                && !rest.get(j + 1).is_some_and(|n| n.is("("))
                        })
                        .map(|(_, t)| t.text.clone())
                        .unwrap_or_default(),
                );
            }
            "enum" | "=" if angle <= 0 && paren == 0 => return None,
            _ => {}
        }
    }
    None
}

/// Locates the parameter list and name of a function declaration that is
/// about to open a body. Returns `None` for non-function declarations.
pub fn find_signature(decl: &[&Token]) -> Option<Signature> {
    if decl.is_empty() {
        return None;
    }
    // Statements containing these at depth zero are not function heads.
    let mut angle = 0i32;
    let mut paren = 0i32;
    let mut k = 0usize;
    while k < decl.len() {
        let t = decl[k];
        if t.is("operator") && paren == 0 && angle <= 0 {
            // The operator symbol may itself be `(`, `<`, `=` ...
            let open = if decl.get(k + 1).is_some_and(|n| n.is("(")) {
                k + 1
            } else {
                (k + 1..decl.len()).find(|&j| decl[j].is("("))?
            };
            return signature_at(decl, open);
        }
        match t.text.as_str() {
            "(" => {
                if paren == 0 && angle <= 0 {
                    if let Some(sig) = signature_at(decl, k) {
                        return Some(sig);
                    }
                }
                paren += 1;
            }
            ")" => paren -= 1,
            "<" if paren == 0 => angle += 1,
            ">" if paren == 0 && angle > 0 => angle -= 1,
            ">>" if paren == 0 && angle > 0 => angle = (angle - 2).max(0),
            "=" | "class" | "struct" | "union" | "enum" | "namespace" | "using" | "typedef"
                if paren == 0 && angle <= 0 =>
            {
                return None;
            }
            _ => {}
        }
        k += 1;
    }
    None
}

fn signature_at(decl: &[&Token], open: usize) -> Option<Signature> {
    if open == 0 {
        return None;
    }
    let close = matching_paren(decl, open)?;
    let before = decl[open - 1];

    // `operator()` : the first group is part of the name.
    if before.is("operator") && close == open + 1 {
        let params_open = close + 1;
        if decl.get(params_open).is_some_and(|t| t.is("(")) {
            let params_close = matching_paren(decl, params_open)?;
            let name = qualified_name(decl, open - 1, "operator()");
            return Some(Signature {
                name,
                params: (params_open, params_close),
            });
        }
        return None;
    }

    // `operator==`, `operator[]`, `operator new` ...
    if let Some(op_pos) = (open.saturating_sub(3)..open).find(|&j| decl[j].is("operator")) {
        let sym: String = decl[op_pos + 1..open]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(if decl[op_pos + 1..open]
                .iter()
                .all(|t| t.kind == TokenKind::Punctuation)
            {
                ""
            } else {
                " "
            });
        if !sym.is_empty() {
            let name = qualified_name(decl, op_pos, &format!("operator{sym}"));
            return Some(Signature {
                name,
                params: (open, close),
            });
        }
    }

    let name_ok = match before.kind {
        TokenKind::Identifier => !NOT_FUNCTION_NAMES.contains(&before.text.as_str()),
        // Constructors and destructors.
        TokenKind::TypeName => {
            open >= 2 && (decl[open - 2].is("::") || decl[open - 2].is("~"))
                || decl[..open - 1]
                    .iter()
                    .all(|t| matches!(t.text.as_str(), "explicit" | "inline" | "constexpr"))
        }
        _ => false,
    };
    if !name_ok {
        return None;
    }
    let mut base = before.text.clone();
    let mut start = open - 1;
    if start >= 1 && decl[start - 1].is("~") {
        base = format!("~{base}");
        start -= 1;
    }
    if !tail_is_function_suffix(&decl[close + 1..]) {
        return None;
    }
    Some(Signature {
        name: qualified_name(decl, start, &base),
        params: (open, close),
    })
}

fn matching_paren(decl: &[&Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (k, t) in decl.iter().enumerate().skip(open) {
        if t.is("(") {
            depth += 1;
        } else if t.is(")") {
            depth -= 1;
            if depth == 0 {
                return Some(k);
            }
        }
    }
    None
}

/// Qualifiers, trailing return types, and ctor init lists can follow the
/// parameter list. Anything else (e.g. a second declarator) rules it out.
fn tail_is_function_suffix(tail: &[&Token]) -> bool {
    let mut k = 0;
    while k < tail.len() {
        let t = tail[k];
        match t.text.as_str() {
            "const" | "volatile" | "noexcept" | "override" | "final" | "&" | "&&" | "throw"
            | "mutable" | "constexpr" | "try" => k += 1,
            "(" => {
                // noexcept(...) / throw(...) operand
                let mut depth = 0;
                while k < tail.len() {
                    if tail[k].is("(") {
                        depth += 1;
                    } else if tail[k].is(")") {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    k += 1;
                }
                k += 1;
            }
            "[" => {
                // [[attributes]]
                while k < tail.len() && !tail[k].is("]") {
                    k += 1;
                }
                while k < tail.len() && tail[k].is("]") {
                    k += 1;
                }
            }
            // Trailing return types, requires-clauses and init lists take
            // the rest of the head.
            "->" | ":" | "requires" => return true,
            _ if t.kind == TokenKind::Identifier && t.text.chars().all(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_digit()) => {
                // Annotation macros such as LOCKS_EXCLUDED(mu_).
                k += 1;
            }
            _ => return false,
        }
    }
    true
}

fn qualified_name(decl: &[&Token], name_start: usize, base: &str) -> String {
    let mut parts = vec![base.to_string()];
    let mut k = name_start;
    while k >= 2 && decl[k - 1].is("::") {
        let mut q = k - 2;
        // Skip template arguments of a qualifier: Foo<T>::bar
        if decl[q].is(">") {
            let mut depth = 0i32;
            loop {
                if decl[q].is(">") {
                    depth += 1;
                } else if decl[q].is("<") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                if q == 0 {
                    return parts.into_iter().rev().collect::<Vec<_>>().join("::");
                }
                q -= 1;
            }
            if q == 0 {
                break;
            }
            q -= 1;
        }
        let t = decl[q];
        if !matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) {
            break;
        }
        parts.push(t.text.clone());
        k = q;
    }
    parts.into_iter().rev().collect::<Vec<_>>().join("::")
}

/// Inside a ctor init list a `{` right after a member name or template
/// argument list initializes that member; it is not the body.
fn brace_initializer(decl: &[&Token], params_close: usize) -> bool {
    let Some(last) = decl.last() else {
        return false;
    };
    let has_init_list = decl[params_close + 1..].iter().any(|t| t.is(":"));
    has_init_list
        && (matches!(last.kind, TokenKind::Identifier | TokenKind::TypeName) || last.is(">"))
}
