//! CoNLL-U treebank reading, gold dependency trees, and corpus statistics.
//!
//! The reader keeps every byte it needs to reproduce well-formed input
//! (comments, multiword ranges, empty nodes), while [`GoldTree`] is the
//! validated per-sentence view the parsing machinery consumes: a head/label
//! array plus precomputed left/right dependent indexes.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::par;

/// Which CoNLL-U column supplies the POS feature.
///
/// `Xpos` prefers the language-specific tag and falls back to UPOS for
/// tokens whose XPOS column is `_`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosSource {
    #[default]
    Xpos,
    Upos,
}

impl fmt::Display for PosSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PosSource::Xpos => write!(f, "xpos"),
            PosSource::Upos => write!(f, "upos"),
        }
    }
}

impl std::str::FromStr for PosSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xpos" => Ok(PosSource::Xpos),
            "upos" => Ok(PosSource::Upos),
            other => Err(format!(
                "unknown POS column `{other}` (expected xpos or upos)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence} (line {line}): {message}")]
    Structure {
        sentence: usize,
        line: usize,
        message: String,
    },
}

/// One syntactic token of a gold tree. `head` is 0 for the root word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub pos: String,
    pub head: usize,
    pub label: String,
}

/// A validated dependency tree: single root, acyclic, fully connected.
///
/// Dependent indexes are precomputed per head; index 0 stands for the
/// virtual ROOT, whose only dependent is the root word (kept in
/// `right_deps[0]` for the transition machinery, never counted in stats).
#[derive(Debug, Clone)]
pub struct GoldTree {
    tokens: Vec<Token>,
    left_deps: Vec<Vec<usize>>,
    right_deps: Vec<Vec<usize>>,
    projective: bool,
}

impl GoldTree {
    /// Validates the head array and builds the dependent indexes.
    pub fn new(tokens: Vec<Token>) -> Result<Self, TreebankError> {
        Self::with_context(tokens, 0, 0)
    }

    fn with_context(
        tokens: Vec<Token>,
        sentence: usize,
        line: usize,
    ) -> Result<Self, TreebankError> {
        let n = tokens.len();
        let fail = |message: String| TreebankError::Structure {
            sentence,
            line,
            message,
        };
        if n == 0 {
            return Err(fail("sentence has no syntactic tokens".into()));
        }
        let mut roots = 0usize;
        for (i, tok) in tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(fail(format!(
                    "token ids must be 1..{n} in order, found {} at position {}",
                    tok.index,
                    i + 1
                )));
            }
            if tok.head > n {
                return Err(fail(format!(
                    "token {} has head {} beyond sentence length {n}",
                    tok.index, tok.head
                )));
            }
            if tok.head == tok.index {
                return Err(fail(format!("token {} is its own head", tok.index)));
            }
            if tok.head == 0 {
                roots += 1;
            }
        }
        if roots == 0 {
            return Err(fail("no root token (head = 0)".into()));
        }
        if roots > 1 {
            return Err(fail(format!("{roots} root tokens, expected exactly one")));
        }

        let mut left_deps = vec![Vec::new(); n + 1];
        let mut right_deps = vec![Vec::new(); n + 1];
        for tok in &tokens {
            if tok.index < tok.head {
                left_deps[tok.head].push(tok.index);
            } else {
                right_deps[tok.head].push(tok.index);
            }
        }

        // Reachability from the root word proves acyclicity: every non-root
        // token has exactly one parent, so unreached tokens sit on a cycle.
        let root = tokens.iter().find(|t| t.head == 0).unwrap().index;
        let mut seen = vec![false; n + 1];
        let mut stack = vec![root];
        let mut reached = 0usize;
        while let Some(h) = stack.pop() {
            if seen[h] {
                continue;
            }
            seen[h] = true;
            reached += 1;
            stack.extend(left_deps[h].iter().copied());
            stack.extend(right_deps[h].iter().copied());
        }
        if reached != n {
            return Err(fail(format!(
                "head links contain a cycle ({} of {n} tokens reachable from the root)",
                reached
            )));
        }

        let heads: Vec<usize> = tokens.iter().map(|t| t.head).collect();
        let projective = crossing_free(&heads);
        Ok(GoldTree {
            tokens,
            left_deps,
            right_deps,
            projective,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token at 1-based position `i`.
    pub fn token(&self, i: usize) -> &Token {
        &self.tokens[i - 1]
    }

    /// Head of token `i` (0 = ROOT).
    pub fn head_of(&self, i: usize) -> usize {
        self.tokens[i - 1].head
    }

    pub fn label_of(&self, i: usize) -> &str {
        &self.tokens[i - 1].label
    }

    /// Dependents of `h` to its left, ascending. `h` may be 0 (always empty).
    pub fn left_deps(&self, h: usize) -> &[usize] {
        &self.left_deps[h]
    }

    /// Dependents of `h` to its right, ascending. `right_deps(0)` holds the
    /// root word.
    pub fn right_deps(&self, h: usize) -> &[usize] {
        &self.right_deps[h]
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }

    /// Build a tree from a bare head array with placeholder forms and tags;
    /// `heads[i]` is the head of token `i + 1`. Handy for fixtures and
    /// enumeration over tree shapes.
    pub fn from_heads(heads: &[usize]) -> Result<Self, TreebankError> {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token {
                index: i + 1,
                form: format!("w{}", i + 1),
                pos: "X".into(),
                head: h,
                label: "dep".into(),
            })
            .collect();
        GoldTree::new(tokens)
    }

    /// All tokens in the subtree of `h`, including `h` itself.
    pub fn yield_of(&self, h: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![h];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.left_deps[x].iter().copied());
            stack.extend(self.right_deps[x].iter().copied());
        }
        out.sort_unstable();
        out
    }
}

/// Crossing-arc test over a head array (`heads[i]` is the head of token
/// `i + 1`, 0 = ROOT). The root arc participates like any other arc.
pub fn crossing_free(heads: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let d = i + 1;
            (h.min(d), h.max(d))
        })
        .collect();
    for (k, &(a, b)) in arcs.iter().enumerate() {
        for &(c, d) in &arcs[k + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                return false;
            }
        }
    }
    true
}

/// Raw token-line kinds kept for byte-faithful output.
#[derive(Debug, Clone)]
pub enum RawLine {
    /// A syntactic word: exactly ten tab-separated fields.
    Word { fields: Vec<String>, line: usize },
    /// Multiword-token range (`1-2`) or empty node (`1.1`), kept verbatim.
    Passthrough(String),
}

#[derive(Debug, Clone, Default)]
pub struct RawSentence {
    pub comments: Vec<String>,
    pub lines: Vec<RawLine>,
    pub start_line: usize,
}

impl RawSentence {
    pub fn word_rows(&self) -> impl Iterator<Item = (&Vec<String>, usize)> {
        self.lines.iter().filter_map(|l| match l {
            RawLine::Word { fields, line } => Some((fields, *line)),
            RawLine::Passthrough(_) => None,
        })
    }

    pub fn word_count(&self) -> usize {
        self.word_rows().count()
    }

    /// Replace HEAD/DEPREL of the word rows, leaving every other column as
    /// read. `heads[i]`/`labels[i]` belong to word `i + 1`.
    pub fn set_predictions(&mut self, heads: &[usize], labels: &[String]) {
        let mut w = 0usize;
        for line in &mut self.lines {
            if let RawLine::Word { fields, .. } = line {
                fields[6] = heads[w].to_string();
                fields[7] = labels[w].clone();
                w += 1;
            }
        }
    }
}

/// A CoNLL-U file as read: sentence blocks with comments and skipped lines
/// preserved in order.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub sentences: Vec<RawSentence>,
}

impl Document {
    pub fn read(path: &Path) -> Result<Document, TreebankError> {
        let file = File::open(path).map_err(|source| TreebankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Document::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: Read>(reader: BufReader<R>) -> Result<Document, TreebankError> {
        let mut sentences = Vec::new();
        let mut current = RawSentence::default();
        let mut line_no = 0usize;
        for line in reader.lines() {
            line_no += 1;
            let mut line = line.map_err(|source| TreebankError::Io {
                path: "<reader>".into(),
                source,
            })?;
            if line.ends_with('\r') {
                line.pop();
            }
            if line.trim().is_empty() {
                if !current.comments.is_empty() || !current.lines.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
                continue;
            }
            if current.comments.is_empty() && current.lines.is_empty() {
                current.start_line = line_no;
            }
            if line.starts_with('#') {
                current.comments.push(line);
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
            if fields.len() != 10 {
                return Err(TreebankError::Parse {
                    line: line_no,
                    message: format!("expected 10 tab-separated columns, found {}", fields.len()),
                });
            }
            let id = &fields[0];
            if id.contains('-') || id.contains('.') {
                current.lines.push(RawLine::Passthrough(line));
            } else {
                if id.parse::<usize>().is_err() {
                    return Err(TreebankError::Parse {
                        line: line_no,
                        message: format!("invalid token id `{id}`"),
                    });
                }
                current.lines.push(RawLine::Word {
                    fields,
                    line: line_no,
                });
            }
        }
        if !current.comments.is_empty() || !current.lines.is_empty() {
            sentences.push(current);
        }
        Ok(Document { sentences })
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for sent in &self.sentences {
            for c in &sent.comments {
                writeln!(out, "{c}")?;
            }
            for line in &sent.lines {
                match line {
                    RawLine::Word { fields, .. } => writeln!(out, "{}", fields.join("\t"))?,
                    RawLine::Passthrough(raw) => writeln!(out, "{raw}")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Extract gold trees, validating heads and tree structure.
    pub fn gold_trees(&self, pos: PosSource) -> Result<Vec<GoldTree>, TreebankError> {
        let mut trees = Vec::with_capacity(self.sentences.len());
        for (ordinal, sent) in self.sentences.iter().enumerate() {
            if sent.word_count() == 0 {
                continue;
            }
            let tokens = sentence_tokens_gold(sent, pos)?;
            trees.push(GoldTree::with_context(
                tokens,
                ordinal + 1,
                sent.start_line,
            )?);
        }
        Ok(trees)
    }
}

fn select_pos(fields: &[String], pos: PosSource) -> String {
    match pos {
        PosSource::Upos => fields[3].clone(),
        PosSource::Xpos => {
            if fields[4] == "_" {
                fields[3].clone()
            } else {
                fields[4].clone()
            }
        }
    }
}

fn sentence_tokens_gold(sent: &RawSentence, pos: PosSource) -> Result<Vec<Token>, TreebankError> {
    let mut tokens = Vec::with_capacity(sent.word_count());
    for (fields, line) in sent.word_rows() {
        let index: usize = fields[0].parse().unwrap();
        let head: usize = fields[6].parse().map_err(|_| TreebankError::Parse {
            line,
            message: format!("invalid HEAD `{}`", fields[6]),
        })?;
        tokens.push(Token {
            index,
            form: fields[1].clone(),
            pos: select_pos(fields, pos),
            head,
            label: fields[7].clone(),
        });
    }
    Ok(tokens)
}

/// Tokens of a sentence for parsing: form and POS only; heads need not be
/// annotated. Errors when the selected POS column is missing (`_`).
pub fn sentence_words(
    sent: &RawSentence,
    pos: PosSource,
) -> Result<Vec<(String, String)>, TreebankError> {
    let mut out = Vec::with_capacity(sent.word_count());
    for (fields, line) in sent.word_rows() {
        let tag = select_pos(fields, pos);
        if tag == "_" {
            return Err(TreebankError::Parse {
                line,
                message: format!("token `{}` has no POS tag", fields[1]),
            });
        }
        out.push((fields[1].clone(), tag));
    }
    Ok(out)
}

/// Read a CoNLL-U file into validated gold trees.
pub fn read_conllu(path: &Path, pos: PosSource) -> Result<Vec<GoldTree>, TreebankError> {
    Document::read(path)?.gold_trees(pos)
}

/// Corpus-level counts: branching direction and arc-standard ambiguity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct TreebankStats {
    pub sentences: u64,
    pub tokens: u64,
    /// Tokens whose head lies strictly to their right.
    pub left_dep: u64,
    /// Tokens whose head lies strictly to their left, root arcs excluded,
    /// so `left_dep + right_dep = tokens - sentences`.
    pub right_dep: u64,
    pub amb_sentences: u64,
    /// Heads with at least one dependent on each side.
    pub amb_heads: u64,
    /// Tokens inside the yield (head inclusive) of at least one ambiguous head.
    pub amb_tokens: u64,
}

impl TreebankStats {
    pub fn merge(self, other: TreebankStats) -> TreebankStats {
        TreebankStats {
            sentences: self.sentences + other.sentences,
            tokens: self.tokens + other.tokens,
            left_dep: self.left_dep + other.left_dep,
            right_dep: self.right_dep + other.right_dep,
            amb_sentences: self.amb_sentences + other.amb_sentences,
            amb_heads: self.amb_heads + other.amb_heads,
            amb_tokens: self.amb_tokens + other.amb_tokens,
        }
    }

    pub const TSV_HEADER: &'static str =
        "sentences\ttokens\tleft_dep\tright_dep\tamb_sentences\tamb_heads\tamb_tokens";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.sentences,
            self.tokens,
            self.left_dep,
            self.right_dep,
            self.amb_sentences,
            self.amb_heads,
            self.amb_tokens
        )
    }
}

fn tree_stats(tree: &GoldTree) -> TreebankStats {
    let n = tree.len();
    let mut s = TreebankStats {
        sentences: 1,
        tokens: n as u64,
        ..TreebankStats::default()
    };
    for tok in tree.tokens() {
        if tok.head > tok.index {
            s.left_dep += 1;
        } else if tok.head != 0 {
            s.right_dep += 1;
        }
    }
    let mut in_ambiguous_yield: HashSet<usize> = HashSet::new();
    for h in 1..=n {
        if !tree.left_deps(h).is_empty() && !tree.right_deps(h).is_empty() {
            s.amb_heads += 1;
            in_ambiguous_yield.extend(tree.yield_of(h));
        }
    }
    s.amb_tokens = in_ambiguous_yield.len() as u64;
    if s.amb_heads > 0 {
        s.amb_sentences = 1;
    }
    s
}

/// Aggregate statistics over a treebank. Per-sentence counts are pure, so
/// the fold fans out across `threads` workers.
pub fn compute_stats(trees: &[GoldTree], threads: usize) -> TreebankStats {
    par::map_reduce(
        trees,
        threads,
        tree_stats,
        TreebankStats::default,
        TreebankStats::merge,
    )
}
