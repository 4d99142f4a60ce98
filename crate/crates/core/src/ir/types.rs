//! Lexical detection of declared types in a function.

use std::collections::BTreeSet;

use super::extract::find_signature;
use super::lexer::{Token, TokenKind};
use super::FunctionRecord;

/// A variable declaration found lexically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    /// Qualified type names used by the declaration, including template
    /// arguments, e.g. `std::vector` and `int` for `std::vector<int> v`.
    pub types: Vec<String>,
    pub variable: String,
    /// Index of the variable token in the code-token slice.
    pub var_index: usize,
}

const DECL_SPECIFIERS: &[&str] = &[
    "const", "static", "constexpr", "volatile", "mutable", "register", "thread_local", "inline",
    "typename", "struct", "class", "enum",
];

const DECLARATOR_FOLLOW: &[&str] = &[";", "=", "(", "{", ",", ")", "[", ":"];

const STATEMENT_BOUNDARY: &[&str] = &["{", "}", ";", "(", ",", ")"];

/// Fills `type_set` from parameter and local declarations.
pub fn annotate_types(mut record: FunctionRecord) -> FunctionRecord {
    let code: Vec<&Token> = record.code_tokens().collect();
    record.type_set = declared_types(&code);
    record
}

/// Types from the parameter list (when a signature is present) and from
/// declarations in the body. The return type is not included.
pub fn declared_types(code: &[&Token]) -> BTreeSet<String> {
    let (params, body_open) = match code.iter().position(|t| t.is("{")) {
        Some(first_brace) => match find_signature(&code[..first_brace]) {
            Some(sig) => {
                let open = (sig.params.1..code.len())
                    .find(|&k| code[k].is("{"))
                    .unwrap_or(code.len());
                (Some(sig.params), open)
            }
            None => (None, 0),
        },
        None => (None, 0),
    };
    let mut out = BTreeSet::new();
    for d in find_declarations(code) {
        let in_params = params.is_some_and(|(o, c)| o < d.var_index && d.var_index < c);
        if in_params || d.var_index > body_open || params.is_none() {
            out.extend(d.types);
        }
    }
    out
}

/// Scans for `type-expr declarator` patterns after statement boundaries.
pub fn find_declarations(code: &[&Token]) -> Vec<Declaration> {
    let mut out = Vec::new();
    let mut p = 0;
    while p < code.len() {
        let at_boundary = p == 0 || STATEMENT_BOUNDARY.contains(&code[p - 1].text.as_str());
        if at_boundary {
            if let Some((decl, next)) = parse_declaration(code, p) {
                out.push(decl);
                // Continue after the declarator so `int a, b;` picks up only
                // the first; the type is the same for the rest.
                p = next;
                continue;
            }
        }
        p += 1;
    }
    out
}

fn parse_declaration(code: &[&Token], mut p: usize) -> Option<(Declaration, usize)> {
    while p < code.len() && DECL_SPECIFIERS.contains(&code[p].text.as_str()) {
        p += 1;
    }
    let mut types = Vec::new();
    let (base, plain_ident, mut p) = parse_type_name(code, p, &mut types)?;
    // Multi-word builtins: unsigned long long, long double ...
    let builtin = !base.contains("::") && super::lexer::is_known_type(&base);
    while builtin && p < code.len() && code[p].kind == TokenKind::TypeName {
        types.push(code[p].text.clone());
        p += 1;
    }
    types.insert(0, base);
    let mut indirection = false;
    while p < code.len() && matches!(code[p].text.as_str(), "*" | "&" | "&&" | "const" | "volatile")
    {
        indirection |= !code[p].is("const") && !code[p].is("volatile");
        p += 1;
    }
    // `a * b;` and `a & b` are more likely expressions than declarations
    // when `a` is not a known type.
    if plain_ident && indirection {
        return None;
    }
    let var = code.get(p)?;
    if var.kind != TokenKind::Identifier {
        return None;
    }
    let follow = code.get(p + 1)?;
    if !DECLARATOR_FOLLOW.contains(&follow.text.as_str()) {
        return None;
    }
    Some((
        Declaration {
            types,
            variable: var.text.clone(),
            var_index: p,
        },
        p + 1,
    ))
}

/// Parses `[::] name (:: name)* [<args>] (:: name [<args>])*`. Returns the
/// qualified base name, whether it was a single unknown identifier, and the
/// position after it. Type names in template arguments go to `extra`.
fn parse_type_name(
    code: &[&Token],
    mut p: usize,
    extra: &mut Vec<String>,
) -> Option<(String, bool, usize)> {
    let mut parts: Vec<&str> = Vec::new();
    let mut last_kind;
    if code.get(p).is_some_and(|t| t.is("::")) {
        p += 1;
    }
    loop {
        let t = code.get(p)?;
        if !matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) {
            return None;
        }
        parts.push(&t.text);
        last_kind = t.kind;
        p += 1;
        if code.get(p).is_some_and(|t| t.is("<")) {
            p = parse_template_args(code, p, extra)?;
        }
        if code.get(p).is_some_and(|t| t.is("::"))
            && code
                .get(p + 1)
                .is_some_and(|t| matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName))
        {
            p += 1;
            continue;
        }
        break;
    }
    let plain = parts.len() == 1 && last_kind == TokenKind::Identifier;
    Some((parts.join("::"), plain, p))
}

/// `p` points at `<`. Returns the position after the matching `>`.
fn parse_template_args(code: &[&Token], mut p: usize, extra: &mut Vec<String>) -> Option<usize> {
    let mut depth = 0i32;
    while p < code.len() {
        let t = code[p];
        match t.text.as_str() {
            "<" => depth += 1,
            ">" => depth -= 1,
            ">>" => depth -= 2,
            ";" | "{" | "}" => return None,
            _ => {
                if matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName)
                    && !code.get(p.wrapping_sub(1)).is_some_and(|t| t.is("::"))
                {
                    // Collect the qualified name starting here.
                    let mut q = p;
                    let mut parts = vec![t.text.as_str()];
                    let mut last = t.kind;
                    while code.get(q + 1).is_some_and(|t| t.is("::")) {
                        match code.get(q + 2) {
                            Some(n) if matches!(n.kind, TokenKind::Identifier | TokenKind::TypeName) => {
                                parts.push(&n.text);
                                last = n.kind;
                                q += 2;
                            }
                            _ => break,
                        }
                    }
                    if last == TokenKind::TypeName || parts.len() > 1 {
                        extra.push(parts.join("::"));
                    }
                }
            }
        }
        p += 1;
        if depth <= 0 {
            return if depth == 0 { Some(p) } else { None };
        }
    }
    None
}
