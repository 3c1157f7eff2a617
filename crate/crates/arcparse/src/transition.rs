//! The arc-standard transition machine.
//!
//! A configuration is the triple (stack, buffer, arc set). The virtual ROOT
//! is an explicit pseudo-token with index 0 sitting at the front of the
//! buffer, so a sentence of `n` words is parsed in exactly `2(n+1) - 1`
//! transitions: `n + 1` shifts (ROOT included) and `n` arc creations.
//!
//! Configurations are immutable values: [`Configuration::apply`] returns a
//! fresh configuration, which keeps exploration and backtracking trivial.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::treebank::GoldTree;

/// Index of the virtual ROOT pseudo-token.
pub const ROOT: usize = 0;

/// A parser action. Variant order matches the textual rendering
/// (`larc:L` < `rarc:L` < `shift`), so derived ordering is the
/// lexicographic order used by the sequence enumerator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    LeftArc(String),
    RightArc(String),
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Shift,
    LeftArc,
    RightArc,
}

impl Transition {
    pub fn kind(&self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::LeftArc(_) => TransitionKind::LeftArc,
            Transition::RightArc(_) => TransitionKind::RightArc,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Transition::Shift => None,
            Transition::LeftArc(l) | Transition::RightArc(l) => Some(l),
        }
    }

    pub fn is_arc(&self) -> bool {
        !matches!(self, Transition::Shift)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Shift => write!(f, "shift"),
            Transition::LeftArc(l) => write!(f, "larc:{l}"),
            Transition::RightArc(l) => write!(f, "rarc:{l}"),
        }
    }
}

impl FromStr for Transition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "shift" {
            return Ok(Transition::Shift);
        }
        if let Some(l) = s.strip_prefix("larc:") {
            return Ok(Transition::LeftArc(l.to_owned()));
        }
        if let Some(l) = s.strip_prefix("rarc:") {
            return Ok(Transition::RightArc(l.to_owned()));
        }
        Err(format!("unknown transition `{s}`"))
    }
}

/// Render a transition sequence as a single line.
pub fn render_sequence(seq: &[Transition]) -> String {
    seq.iter()
        .map(Transition::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A dependency arc `<head, label, dependent>`; head 0 is ROOT.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arc {
    pub head: usize,
    pub label: String,
    pub dependent: usize,
}

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("sentence length must be at least 1")]
    EmptySentence,
    #[error("illegal transition {transition} at {summary}")]
    Illegal { transition: String, summary: String },
}

/// Per-token counts of gold dependents not yet attached. Maintained only on
/// oracle-driven walks; meaningless once a non-gold arc is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Counters {
    left: Vec<u32>,
    right: Vec<u32>,
}

/// A parsing state: stack (top last), buffer cursor, created arcs, and
/// optional unattached-dependent counters for oracle bookkeeping.
#[derive(Debug, Clone)]
pub struct Configuration {
    n: usize,
    stack: Vec<usize>,
    cursor: usize,
    arcs: Vec<Arc>,
    counters: Option<Counters>,
}

/// The set of transition kinds whose preconditions hold in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegalKinds {
    pub shift: bool,
    pub left_arc: bool,
    pub right_arc: bool,
}

impl LegalKinds {
    pub fn contains(&self, kind: TransitionKind) -> bool {
        match kind {
            TransitionKind::Shift => self.shift,
            TransitionKind::LeftArc => self.left_arc,
            TransitionKind::RightArc => self.right_arc,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TransitionKind> + '_ {
        [
            (TransitionKind::Shift, self.shift),
            (TransitionKind::LeftArc, self.left_arc),
            (TransitionKind::RightArc, self.right_arc),
        ]
        .into_iter()
        .filter_map(|(k, ok)| ok.then_some(k))
    }
}

impl Configuration {
    /// Initial configuration for a sentence of `n` words: empty stack,
    /// buffer `ROOT, w1, ..., wn`, no arcs, no counters.
    pub fn initial(n: usize) -> Result<Self, TransitionError> {
        if n == 0 {
            return Err(TransitionError::EmptySentence);
        }
        Ok(Configuration {
            n,
            stack: Vec::with_capacity(n + 2),
            cursor: 0,
            arcs: Vec::with_capacity(n),
            counters: None,
        })
    }

    /// Initial configuration with unattached-dependent counters primed from
    /// the gold tree, for oracle-driven walks.
    pub fn initial_for(gold: &GoldTree) -> Self {
        let n = gold.len();
        let mut c = Configuration::initial(n).expect("gold trees are nonempty");
        let left = (0..=n).map(|i| gold.left_deps(i).len() as u32).collect();
        let right = (0..=n).map(|i| gold.right_deps(i).len() as u32).collect();
        c.counters = Some(Counters { left, right });
        c
    }

    pub fn sentence_len(&self) -> usize {
        self.n
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// Stack top.
    pub fn stack0(&self) -> Option<usize> {
        self.stack.last().copied()
    }

    /// Second stack item from the top.
    pub fn stack1(&self) -> Option<usize> {
        self.stack.len().checked_sub(2).map(|i| self.stack[i])
    }

    /// Front of the unconsumed buffer.
    pub fn buffer_front(&self) -> Option<usize> {
        (self.cursor <= self.n).then_some(self.cursor)
    }

    pub fn buffer_len(&self) -> usize {
        self.n + 1 - self.cursor
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn has_counters(&self) -> bool {
        self.counters.is_some()
    }

    /// Drop oracle bookkeeping, e.g. before applying transitions that are
    /// not known to create gold arcs.
    pub fn without_counters(mut self) -> Self {
        self.counters = None;
        self
    }

    /// Unattached gold left dependents of token `i`; `None` without counters.
    pub fn unattached_left(&self, i: usize) -> Option<u32> {
        self.counters.as_ref().map(|c| c.left[i])
    }

    /// Unattached gold right dependents of token `i`; `None` without counters.
    pub fn unattached_right(&self, i: usize) -> Option<u32> {
        self.counters.as_ref().map(|c| c.right[i])
    }

    /// Unattached gold dependents of token `i` on either side.
    pub fn unattached(&self, i: usize) -> Option<u32> {
        self.counters.as_ref().map(|c| c.left[i] + c.right[i])
    }

    /// Which transition kinds are applicable. ROOT may never be a
    /// dependent, so LeftArc additionally requires `s1 != ROOT`.
    pub fn legal(&self) -> LegalKinds {
        let two = self.stack.len() >= 2;
        LegalKinds {
            shift: self.cursor <= self.n,
            left_arc: two && self.stack[self.stack.len() - 2] != ROOT,
            right_arc: two,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.stack.len() == 1
            && self.stack[0] == ROOT
            && self.cursor > self.n
            && self.arcs.len() == self.n
    }

    fn summary(&self) -> String {
        format!(
            "(stack {:?}, buffer {}..={}, {} arcs)",
            self.stack,
            self.cursor,
            self.n,
            self.arcs.len()
        )
    }

    /// Apply a transition, returning the successor configuration.
    ///
    /// Shift moves the buffer front onto the stack; RightArc pops s0 and
    /// adds `<s1, l, s0>`; LeftArc pops s1 and adds `<s0, l, s1>`. New arcs
    /// decrement the head's matching unattached counter when counters are
    /// maintained.
    pub fn apply(&self, t: &Transition) -> Result<Configuration, TransitionError> {
        if !self.legal().contains(t.kind()) {
            return Err(TransitionError::Illegal {
                transition: t.to_string(),
                summary: self.summary(),
            });
        }
        let mut next = self.clone();
        match t {
            Transition::Shift => {
                next.stack.push(next.cursor);
                next.cursor += 1;
            }
            Transition::LeftArc(label) => {
                let s0 = next.stack.pop().unwrap();
                let s1 = next.stack.pop().unwrap();
                next.stack.push(s0);
                next.push_arc(s0, label, s1);
            }
            Transition::RightArc(label) => {
                let s0 = next.stack.pop().unwrap();
                let s1 = *next.stack.last().unwrap();
                next.push_arc(s1, label, s0);
            }
        }
        Ok(next)
    }

    fn push_arc(&mut self, head: usize, label: &str, dependent: usize) {
        debug_assert!(
            self.arcs.iter().all(|a| a.dependent != dependent),
            "dependent {dependent} already has a head"
        );
        if let Some(counters) = &mut self.counters {
            // Only meaningful for gold arcs; a zero counter here means the
            // caller has left the gold path.
            let slot = if dependent < head {
                &mut counters.left[head]
            } else {
                &mut counters.right[head]
            };
            debug_assert!(*slot > 0, "counter underflow for head {head}");
            *slot = slot.saturating_sub(1);
        }
        self.arcs.push(Arc {
            head,
            label: label.to_owned(),
            dependent,
        });
    }

    /// Recompute unattached counts for every token directly from the gold
    /// tree and the current arc set. Used to validate the incremental
    /// counters in tests and debug assertions.
    pub fn recount_unattached(&self, gold: &GoldTree) -> (Vec<u32>, Vec<u32>) {
        let n = gold.len();
        let mut left: Vec<u32> = (0..=n).map(|i| gold.left_deps(i).len() as u32).collect();
        let mut right: Vec<u32> = (0..=n).map(|i| gold.right_deps(i).len() as u32).collect();
        for arc in &self.arcs {
            if gold.head_of(arc.dependent) == arc.head {
                if arc.dependent < arc.head {
                    left[arc.head] -= 1;
                } else {
                    right[arc.head] -= 1;
                }
            }
        }
        (left, right)
    }
}
