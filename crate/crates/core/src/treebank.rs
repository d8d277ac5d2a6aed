//! Penn-Treebank style bracketed constituency trees.
//!
//! Trees are ingested pre-parsed, one per sentence:
//!
//! ```text
//! (S (NP (PRP I)) (VP (VBD ran)))
//! ```
//!
//! A preterminal such as `(PRP I)` becomes a leaf node carrying its token.
//! A single outer wrapper with an empty label, as emitted by most treebank
//! tools (`( (S ...) )`), is unwrapped.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of empty constituents / traces.
const TRACE_LABEL: &str = "-NONE-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unbalanced brackets at byte {offset}")]
    UnbalancedBrackets { offset: usize },
    #[error("empty label at byte {offset}")]
    EmptyLabel { offset: usize },
    #[error("empty tree at byte {offset}")]
    EmptyTree { offset: usize },
    #[error("unexpected token {token:?} at byte {offset}")]
    UnexpectedToken { token: String, offset: usize },
    #[error("empty constituent (-NONE-) at byte {offset}")]
    TraceLeaf { offset: usize },
}

/// Half-open token interval over the sentence's leaf sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Position of a node: child indices walked from the root.
pub type NodePath = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    label: String,
    /// Set only on leaves (preterminals).
    token: Option<String>,
    children: Vec<TreeNode>,
    span: Span,
}

impl TreeNode {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Label with function tags and co-indices removed, so `NP-SBJ-1` and
    /// `NP=2` both become `NP`. Labels starting with `-` (`-LRB-`, `-NONE-`)
    /// are returned as-is.
    pub fn base_label(&self) -> &str {
        base_label(&self.label)
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn children(&self) -> &[TreeNode] {
        &self.children
    }

    pub fn span(&self) -> Span {
        self.span
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        if let Some(tok) = &self.token {
            out.push(' ');
            out.push_str(tok);
        }
        for child in &self.children {
            out.push(' ');
            child.write_bracketed(out);
        }
        out.push(')');
    }
}

pub fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) => &label[..i],
        None => label,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituencyTree {
    sentence_id: String,
    root: TreeNode,
    tokens: Vec<String>,
}

impl ConstituencyTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn with_sentence_id(mut self, id: impl Into<String>) -> Self {
        self.sentence_id = id.into();
        self
    }

    /// Leaf tokens in order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The sentence reconstructed from the leaves, single-space joined.
    pub fn sentence(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn node(&self, path: &[usize]) -> Option<&TreeNode> {
        let mut node = &self.root;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Leaves under `node`, in order.
    pub fn yield_text(&self, node: &TreeNode) -> &[String] {
        &self.tokens[node.span.range()]
    }

    /// Strict ancestors of the node at `path` whose base label equals
    /// `label`, innermost first.
    pub fn ancestors_with_label(&self, path: &[usize], label: &str) -> Vec<(NodePath, &TreeNode)> {
        let mut chain = Vec::with_capacity(path.len());
        let mut node = &self.root;
        for (depth, &i) in path.iter().enumerate() {
            chain.push((path[..depth].to_vec(), node));
            match node.children.get(i) {
                Some(child) => node = child,
                None => return Vec::new(),
            }
        }
        chain
            .into_iter()
            .rev()
            .filter(|(_, n)| n.base_label() == label)
            .collect()
    }

    /// All nodes with their paths, pre-order.
    pub fn preorder(&self) -> Vec<(NodePath, &TreeNode)> {
        fn walk<'a>(node: &'a TreeNode, path: &mut NodePath, out: &mut Vec<(NodePath, &'a TreeNode)>) {
            out.push((path.clone(), node));
            for (i, child) in node.children.iter().enumerate() {
                path.push(i);
                walk(child, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Canonical single-line bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.root.write_bracketed(&mut out);
        out
    }
}

impl fmt::Display for ConstituencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Lexeme<'_>)> {
    let mut out = Vec::new();
    let mut atom_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = atom_start.take() {
                out.push((s, Lexeme::Atom(&text[s..i])));
            }
            match c {
                '(' => out.push((i, Lexeme::Open)),
                ')' => out.push((i, Lexeme::Close)),
                _ => {}
            }
        } else if atom_start.is_none() {
            atom_start = Some(i);
        }
    }
    if let Some(s) = atom_start {
        out.push((s, Lexeme::Atom(&text[s..])));
    }
    out
}

/// Intermediate node before spans are assigned.
struct RawNode {
    label: String,
    offset: usize,
    token: Option<String>,
    children: Vec<RawNode>,
}

struct Parser<'a> {
    lexemes: Vec<(usize, Lexeme<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(usize, Lexeme<'a>)> {
        self.lexemes.get(self.pos)
    }

    fn offset_here(&self) -> usize {
        self.peek().map(|(o, _)| *o).unwrap_or(self.end)
    }

    /// Parses one `( label ... )` group; the cursor is on its `(`.
    fn node(&mut self) -> Result<RawNode, TreeError> {
        let open = self.offset_here();
        self.pos += 1;
        // the label must touch its bracket: `( dog)` has an empty label
        let label = match self.peek() {
            Some((off, Lexeme::Atom(a))) if *off == open + 1 => {
                let a = a.to_string();
                self.pos += 1;
                a
            }
            _ => String::new(),
        };
        let mut token = None;
        let mut children = Vec::new();
        loop {
            match self.peek().cloned() {
                None => return Err(TreeError::UnbalancedBrackets { offset: self.end }),
                Some((_, Lexeme::Close)) => {
                    self.pos += 1;
                    break;
                }
                Some((_, Lexeme::Open)) => {
                    if token.is_some() {
                        return Err(TreeError::UnexpectedToken {
                            token: "(".into(),
                            offset: self.offset_here(),
                        });
                    }
                    children.push(self.node()?);
                }
                Some((off, Lexeme::Atom(a))) => {
                    if token.is_some() || !children.is_empty() {
                        return Err(TreeError::UnexpectedToken {
                            token: a.to_string(),
                            offset: off,
                        });
                    }
                    token = Some(a.to_string());
                    self.pos += 1;
                }
            }
        }
        if token.is_none() && children.is_empty() {
            return Err(TreeError::EmptyTree { offset: open });
        }
        if label == TRACE_LABEL {
            return Err(TreeError::TraceLeaf { offset: open });
        }
        Ok(RawNode {
            label,
            offset: open,
            token,
            children,
        })
    }
}

fn check_labels(node: &RawNode) -> Result<(), TreeError> {
    if node.label.is_empty() {
        return Err(TreeError::EmptyLabel { offset: node.offset });
    }
    node.children.iter().try_for_each(check_labels)
}

fn assign_spans(raw: RawNode, tokens: &mut Vec<String>) -> TreeNode {
    let start = tokens.len();
    if let Some(tok) = raw.token {
        tokens.push(tok.clone());
        return TreeNode {
            label: raw.label,
            token: Some(tok),
            children: Vec::new(),
            span: Span::new(start, start + 1),
        };
    }
    let children: Vec<TreeNode> = raw.children.into_iter().map(|c| assign_spans(c, tokens)).collect();
    TreeNode {
        label: raw.label,
        token: None,
        children,
        span: Span::new(start, tokens.len()),
    }
}

/// Parses one bracketed tree. The sentence id is left empty; attach one with
/// [`ConstituencyTree::with_sentence_id`].
pub fn parse_bracketed(text: &str) -> Result<ConstituencyTree, TreeError> {
    let lexemes = lex(text);
    let mut parser = Parser {
        lexemes,
        pos: 0,
        end: text.len(),
    };
    match parser.peek() {
        None => return Err(TreeError::EmptyTree { offset: 0 }),
        Some((_, Lexeme::Open)) => {}
        Some((off, Lexeme::Close)) => return Err(TreeError::UnbalancedBrackets { offset: *off }),
        Some((off, Lexeme::Atom(a))) => {
            return Err(TreeError::UnexpectedToken {
                token: a.to_string(),
                offset: *off,
            })
        }
    }
    let mut raw = parser.node()?;
    if let Some((off, lexeme)) = parser.peek() {
        return Err(match lexeme {
            Lexeme::Close => TreeError::UnbalancedBrackets { offset: *off },
            Lexeme::Open => TreeError::UnexpectedToken {
                token: "(".into(),
                offset: *off,
            },
            Lexeme::Atom(a) => TreeError::UnexpectedToken {
                token: a.to_string(),
                offset: *off,
            },
        });
    }
    // `( (S ...) )` wrapper
    if raw.label.is_empty() && raw.token.is_none() && raw.children.len() == 1 {
        raw = raw.children.pop().expect("one child");
    }
    check_labels(&raw)?;
    let mut tokens = Vec::new();
    let root = assign_spans(raw, &mut tokens);
    Ok(ConstituencyTree {
        sentence_id: String::new(),
        root,
        tokens,
    })
}
