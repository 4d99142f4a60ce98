//! A C++ lexer good enough for function extraction and code similarity.
//!
//! It does not expand macros. Preprocessor directives (including their
//! line continuations) become single `Comment` tokens so downstream passes
//! can drop them together with real comments.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    TypeName,
    LiteralNumber,
    LiteralString,
    Punctuation,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// 1-based source line of the first character.
    pub line: u32,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind, line: u32) -> Self {
        Self {
            text: text.into(),
            kind,
            line,
        }
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    /// Line comments and preprocessor directives run to the end of the line.
    pub fn ends_at_newline(&self) -> bool {
        self.kind == TokenKind::Comment && !self.text.starts_with("/*")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated block comment starting at line {0}")]
    UnterminatedComment(u32),
    #[error("unterminated literal starting at line {0}")]
    UnterminatedLiteral(u32),
    #[error("unexpected character {ch:?} at line {line}")]
    UnexpectedChar { ch: char, line: u32 },
}

const KEYWORDS: &[&str] = &[
    "alignas", "alignof", "and", "and_eq", "asm", "auto", "bitand", "bitor", "break", "case",
    "catch", "class", "co_await", "co_return", "co_yield", "compl", "concept", "const",
    "consteval", "constexpr", "constinit", "const_cast", "continue", "decltype", "default",
    "delete", "do", "dynamic_cast", "else", "enum", "explicit", "export", "extern", "false",
    "final", "for", "friend", "goto", "if", "inline", "mutable", "namespace", "new", "noexcept",
    "not", "not_eq", "nullptr", "operator", "or", "or_eq", "override", "private", "protected",
    "public", "register", "reinterpret_cast", "requires", "return", "sizeof", "static",
    "static_assert", "static_cast", "struct", "switch", "template", "this", "thread_local",
    "throw", "true", "try", "typedef", "typeid", "typename", "union", "using", "virtual",
    "volatile", "while", "xor", "xor_eq",
];

/// Builtin types plus the standard-library vocabulary types that show up in
/// performance anti-patterns.
const TYPE_NAMES: &[&str] = &[
    "bool", "char", "char8_t", "char16_t", "char32_t", "wchar_t", "short", "int", "long",
    "signed", "unsigned", "float", "double", "void", "size_t", "ssize_t", "ptrdiff_t",
    "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t",
    "intptr_t", "uintptr_t", "string", "string_view", "wstring", "vector", "array", "deque",
    "list", "forward_list", "map", "multimap", "set", "multiset", "unordered_map",
    "unordered_set", "unordered_multimap", "unordered_multiset", "flat_hash_map",
    "flat_hash_set", "node_hash_map", "node_hash_set", "btree_map", "btree_set",
    "InlinedVector", "FixedArray", "Cord", "StatusOr", "Status", "Span", "pair", "tuple",
    "optional", "variant", "any", "unique_ptr", "shared_ptr", "weak_ptr", "function",
    "stringstream", "ostringstream", "istringstream", "ostream", "istream", "queue",
    "priority_queue", "stack", "bitset", "mutex", "atomic", "thread",
];

pub fn is_keyword(word: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| KEYWORDS.iter().copied().collect())
        .contains(word)
}

pub fn is_known_type(word: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| TYPE_NAMES.iter().copied().collect())
        .contains(word)
}

// Longest first so that maximal munch works by linear scan.
const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "<=>", "...", "->*", "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", ".*", "##", "{", "}",
    "(", ")", "[", "]", ";", ":", ",", ".", "?", "+", "-", "*", "/", "%", "&", "|", "^", "!",
    "~", "=", "<", ">", "#",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, bytes: usize) {
        let end = self.pos + bytes;
        while self.pos < end {
            self.bump();
        }
    }
}

/// Tokenizes C++ source. User-declared type names (class/struct/enum/union
/// names and `using`/`typedef` aliases) are promoted to `TypeName` in a
/// second pass over the whole input.
pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = lex_raw(source)?;
    promote_user_types(&mut tokens);
    Ok(tokens)
}

/// Lexes text that may be a fragment (e.g. one side of a diff hunk). On a
/// lexing error the input is lexed line by line and failing lines are
/// dropped.
pub fn lex_lossy(source: &str) -> Vec<Token> {
    if let Ok(t) = lex(source) {
        return t;
    }
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        if let Ok(toks) = lex_raw(line) {
            out.extend(toks.into_iter().map(|mut t| {
                t.line = i as u32 + 1;
                t
            }));
        }
    }
    promote_user_types(&mut out);
    out
}

fn lex_raw(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
    };
    let mut tokens = Vec::new();
    // Whether only whitespace has been seen since the last newline, for
    // recognizing preprocessor directives.
    let mut at_line_start = true;

    while let Some(c) = cur.peek() {
        if c == '\n' {
            cur.bump();
            at_line_start = true;
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let line = cur.line;
        let start = cur.pos;

        if c == '#' && at_line_start {
            // Directive, honoring backslash continuations.
            loop {
                match cur.peek() {
                    None | Some('\n') => break,
                    Some('\\') if cur.peek_at(1) == Some('\n') => {
                        cur.bump();
                        cur.bump();
                    }
                    Some('/') if cur.peek_at(1) == Some('*') => {
                        skip_block_comment(&mut cur, line)?;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            let text = cur.src[start..cur.pos].trim_end();
            tokens.push(Token::new(text, TokenKind::Comment, line));
            continue;
        }
        at_line_start = false;

        if c == '/' && cur.peek_at(1) == Some('/') {
            while let Some(ch) = cur.peek() {
                if ch == '\n' {
                    break;
                }
                cur.bump();
            }
            let text = cur.src[start..cur.pos].trim_end();
            tokens.push(Token::new(text, TokenKind::Comment, line));
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            skip_block_comment(&mut cur, line)?;
            tokens.push(Token::new(&cur.src[start..cur.pos], TokenKind::Comment, line));
            continue;
        }

        if is_ident_start(c) {
            if let Some(prefix_len) = raw_string_prefix(cur.rest()) {
                lex_raw_string(&mut cur, prefix_len, line)?;
                tokens.push(Token::new(
                    &cur.src[start..cur.pos],
                    TokenKind::LiteralString,
                    line,
                ));
                continue;
            }
            if let Some(prefix_len) = encoding_prefix(cur.rest()) {
                cur.bump_n(prefix_len);
                let quote = cur.peek().unwrap_or('"');
                lex_quoted(&mut cur, quote, line)?;
                tokens.push(Token::new(
                    &cur.src[start..cur.pos],
                    TokenKind::LiteralString,
                    line,
                ));
                continue;
            }
            while cur.peek().is_some_and(is_ident_continue) {
                cur.bump();
            }
            let word = &cur.src[start..cur.pos];
            let kind = if is_known_type(word) {
                TokenKind::TypeName
            } else if is_keyword(word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token::new(word, kind, line));
            continue;
        }

        if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()))
        {
            lex_number(&mut cur);
            tokens.push(Token::new(
                &cur.src[start..cur.pos],
                TokenKind::LiteralNumber,
                line,
            ));
            continue;
        }

        if c == '"' || c == '\'' {
            lex_quoted(&mut cur, c, line)?;
            tokens.push(Token::new(
                &cur.src[start..cur.pos],
                TokenKind::LiteralString,
                line,
            ));
            continue;
        }

        if let Some(p) = PUNCTUATORS.iter().find(|p| cur.rest().starts_with(**p)) {
            cur.bump_n(p.len());
            tokens.push(Token::new(*p, TokenKind::Punctuation, line));
            continue;
        }

        if c == '\\' || c == '@' || c == '$' || c == '`' {
            // Stray characters that only appear in macros or broken code.
            cur.bump();
            tokens.push(Token::new(c.to_string(), TokenKind::Punctuation, line));
            continue;
        }

        return Err(LexError::UnexpectedChar { ch: c, line });
    }
    Ok(tokens)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

fn skip_block_comment(cur: &mut Cursor<'_>, line: u32) -> Result<(), LexError> {
    cur.bump_n(2);
    loop {
        if cur.rest().starts_with("*/") {
            cur.bump_n(2);
            return Ok(());
        }
        if cur.bump().is_none() {
            return Err(LexError::UnterminatedComment(line));
        }
    }
}

fn encoding_prefix(rest: &str) -> Option<usize> {
    ["u8\"", "u8'", "u\"", "u'", "U\"", "U'", "L\"", "L'"]
        .iter()
        .find(|p| rest.starts_with(**p))
        .map(|p| p.len() - 1)
}

fn raw_string_prefix(rest: &str) -> Option<usize> {
    ["u8R\"", "uR\"", "UR\"", "LR\"", "R\""]
        .iter()
        .find(|p| rest.starts_with(**p))
        .map(|p| p.len())
}

fn lex_raw_string(cur: &mut Cursor<'_>, prefix_len: usize, line: u32) -> Result<(), LexError> {
    cur.bump_n(prefix_len);
    let rest = cur.rest();
    let open = rest.find('(').ok_or(LexError::UnterminatedLiteral(line))?;
    let delim = &rest[..open];
    let closing = format!("){delim}\"");
    let body_start = open + 1;
    let end = rest[body_start..]
        .find(&closing)
        .ok_or(LexError::UnterminatedLiteral(line))?;
    cur.bump_n(body_start + end + closing.len());
    Ok(())
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char, line: u32) -> Result<(), LexError> {
    cur.bump();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(LexError::UnterminatedLiteral(line)),
            Some('\\') => {
                if cur.bump().is_none() {
                    return Err(LexError::UnterminatedLiteral(line));
                }
            }
            Some(c) if c == quote => return Ok(()),
            Some(_) => {}
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    // pp-number: digits, letters, dots, digit separators and signed exponents.
    let mut prev = '\0';
    while let Some(c) = cur.peek() {
        let exp_sign = (c == '+' || c == '-') && matches!(prev, 'e' | 'E' | 'p' | 'P');
        let separator = c == '\'' && cur.peek_at(1).is_some_and(|d| d.is_ascii_alphanumeric());
        if c.is_ascii_alphanumeric() || c == '.' || c == '_' || exp_sign || separator {
            prev = c;
            cur.bump();
        } else {
            break;
        }
    }
}

fn promote_user_types(tokens: &mut [Token]) {
    let mut user_types: HashSet<String> = HashSet::new();
    let code: Vec<usize> = (0..tokens.len())
        .filter(|&i| tokens[i].kind != TokenKind::Comment)
        .collect();
    for (ci, &i) in code.iter().enumerate() {
        let next = |k: usize| code.get(ci + k).map(|&j| &tokens[j]);
        match tokens[i].text.as_str() {
            "class" | "struct" | "union" | "enum" => {
                let mut k = 1;
                if next(k).is_some_and(|t| t.is("class") || t.is("struct")) {
                    k += 1;
                }
                if let Some(t) = next(k) {
                    if t.kind == TokenKind::Identifier {
                        user_types.insert(t.text.clone());
                    }
                }
            }
            "using" => {
                if let (Some(name), Some(eq)) = (next(1), next(2)) {
                    if name.kind == TokenKind::Identifier && eq.is("=") {
                        user_types.insert(name.text.clone());
                    }
                }
            }
            "typedef" => {
                // The alias is the last identifier before the terminating ';'.
                let mut k = 1;
                let mut last = None;
                while let Some(t) = next(k) {
                    if t.is(";") {
                        break;
                    }
                    if t.kind == TokenKind::Identifier {
                        last = Some(t.text.clone());
                    }
                    k += 1;
                }
                if let Some(name) = last {
                    user_types.insert(name);
                }
            }
            _ => {}
        }
    }
    if user_types.is_empty() {
        return;
    }
    for t in tokens.iter_mut() {
        if t.kind == TokenKind::Identifier && user_types.contains(&t.text) {
            t.kind = TokenKind::TypeName;
        }
    }
}

/// Joins token texts with single spaces. Tokens that run to the end of a
/// line are followed by a newline instead so that the output re-lexes to
/// the same sequence.
pub fn render_tokens<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    let mut out = String::new();
    for t in tokens {
        if !out.is_empty() && !out.ends_with('\n') {
            out.push(' ');
        }
        if t.ends_at_newline() && !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&t.text);
        if t.ends_at_newline() {
            out.push('\n');
        }
    }
    out
}
