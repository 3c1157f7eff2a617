//! Training oracles for the arc-standard system.
//!
//! The standard (static) oracle resolves shift/left-arc ambiguity by always
//! attaching left dependents first. The hybrid oracle instead reports the
//! full set of correct transitions for a configuration (one or two of them)
//! and picks the applied transition at random among them, so training can
//! both soften its targets and explore alternative correct sequences.
//!
//! Ambiguity queries are answered from per-token unattached-dependent
//! counters maintained by [`Configuration`], so each oracle call is constant
//! time after the per-sentence initialization. Debug builds cross-check the
//! counters against a full recount.
//!
//! [`SequenceSearch`] is the module's independent testing oracle: an
//! exhaustive, memoized search over all transition sequences that reach the
//! gold arc set. It also backs the `enumerate` command.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::transition::{Configuration, Transition, ROOT};
use crate::treebank::GoldTree;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no correct transition from {summary}; configuration cannot reach the gold tree")]
    GoldInconsistent { summary: String },
    #[error("hybrid oracle requires unattached-dependent counters (build the configuration with Configuration::initial_for)")]
    CountersMissing,
    #[error("tree is not projective; no arc-standard sequence exists")]
    NonProjective,
    #[error(
        "sequence search exceeded {cap} memoized states; tree too ambiguous for exhaustive search"
    )]
    SearchSpaceExceeded { cap: usize },
}

/// What the hybrid oracle returns for one configuration: the transition to
/// apply plus every correct transition. When two transitions are correct
/// they are exactly `[shift, larc:L]`, in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutcome {
    pub chosen: Transition,
    pub correct_set: Vec<Transition>,
}

fn stuck(c: &Configuration) -> OracleError {
    OracleError::GoldInconsistent {
        summary: format!(
            "(stack {:?}, {} buffered, {} arcs)",
            c.stack(),
            c.buffer_len(),
            c.arcs().len()
        ),
    }
}

#[cfg(debug_assertions)]
fn debug_check_consistency(c: &Configuration, gold: &GoldTree) {
    // Counters are only meaningful on gold-consistent walks; drift against
    // a full recount means the incremental bookkeeping is broken.
    if c.has_counters() {
        let (left, right) = c.recount_unattached(gold);
        for i in 0..=gold.len() {
            debug_assert_eq!(
                c.unattached_left(i),
                Some(left[i]),
                "left counter drift at {i}"
            );
            debug_assert_eq!(
                c.unattached_right(i),
                Some(right[i]),
                "right counter drift at {i}"
            );
        }
    }
}

#[cfg(not(debug_assertions))]
fn debug_check_consistency(_c: &Configuration, _gold: &GoldTree) {}

/// Unattached-dependent counts for `i`, from counters when present,
/// otherwise recomputed from the arc set.
fn unattached_both(c: &Configuration, gold: &GoldTree, i: usize) -> u32 {
    match c.unattached(i) {
        Some(u) => u,
        None => {
            let (left, right) = c.recount_unattached(gold);
            left[i] + right[i]
        }
    }
}

/// The static oracle: left-arc when the top two stack items form a gold
/// left arc, else right-arc once the top item has collected all of its
/// dependents, else shift.
///
/// Only defined on configurations that can still reach the gold tree;
/// a configuration with no correct transition is reported as an error.
pub fn standard_oracle(c: &Configuration, gold: &GoldTree) -> Result<Transition, OracleError> {
    debug_check_consistency(c, gold);
    if let (Some(s0), Some(s1)) = (c.stack0(), c.stack1()) {
        if s1 != ROOT && gold.head_of(s1) == s0 {
            return Ok(Transition::LeftArc(gold.label_of(s1).to_owned()));
        }
        if gold.head_of(s0) == s1 && unattached_both(c, gold, s0) == 0 {
            return Ok(Transition::RightArc(gold.label_of(s0).to_owned()));
        }
    }
    if c.buffer_front().is_some() {
        Ok(Transition::Shift)
    } else {
        Err(stuck(c))
    }
}

/// The correct-transition set of the hybrid oracle, without the random
/// choice: `[shift, larc:L]` when the stack top still has unattached right
/// dependents at a gold left arc, otherwise a single transition.
pub fn hybrid_correct_set(
    c: &Configuration,
    gold: &GoldTree,
) -> Result<Vec<Transition>, OracleError> {
    if !c.has_counters() {
        return Err(OracleError::CountersMissing);
    }
    debug_check_consistency(c, gold);
    if let (Some(s0), Some(s1)) = (c.stack0(), c.stack1()) {
        if s1 != ROOT && gold.head_of(s1) == s0 {
            let larc = Transition::LeftArc(gold.label_of(s1).to_owned());
            return Ok(if c.unattached_right(s0).unwrap() > 0 {
                vec![Transition::Shift, larc]
            } else {
                vec![larc]
            });
        }
        if gold.head_of(s0) == s1 && c.unattached(s0).unwrap() == 0 {
            return Ok(vec![Transition::RightArc(gold.label_of(s0).to_owned())]);
        }
    }
    if c.buffer_front().is_some() {
        Ok(vec![Transition::Shift])
    } else {
        Err(stuck(c))
    }
}

/// Hybrid oracle with the default tie-break: on a two-way ambiguity the
/// left arc is chosen when a uniform draw falls below 0.5.
pub fn hybrid_oracle<R: Rng>(
    c: &Configuration,
    gold: &GoldTree,
    rng: &mut R,
) -> Result<OracleOutcome, OracleError> {
    hybrid_oracle_with(c, gold, rng, 0.5)
}

/// Hybrid oracle with a configurable shift probability at ambiguous
/// configurations. `p_shift = 0` always prefers the left arc (the static
/// path); `p_shift = 0.5` is the uniform tie-break.
pub fn hybrid_oracle_with<R: Rng>(
    c: &Configuration,
    gold: &GoldTree,
    rng: &mut R,
    p_shift: f64,
) -> Result<OracleOutcome, OracleError> {
    let correct_set = hybrid_correct_set(c, gold)?;
    let chosen = if correct_set.len() == 2 {
        let u: f64 = rng.random();
        if u < 1.0 - p_shift {
            correct_set[1].clone()
        } else {
            correct_set[0].clone()
        }
    } else {
        correct_set[0].clone()
    };
    Ok(OracleOutcome {
        chosen,
        correct_set,
    })
}

/// Linear-time completability test: roll the static left-arc-first policy
/// forward from `c` and report whether it terminates in the gold arc set.
///
/// On configurations whose arcs are a subset of the gold arcs this agrees
/// with the exhaustive search (cross-checked exhaustively in tests), while
/// staying O(n) per call, so it scales to real sentences.
pub fn greedy_completable(c: &Configuration, gold: &GoldTree) -> bool {
    let n = gold.len();
    for arc in c.arcs() {
        if gold.head_of(arc.dependent) != arc.head || gold.label_of(arc.dependent) != arc.label {
            return false;
        }
    }
    let (mut left, mut right) = c.recount_unattached(gold);
    let mut stack: Vec<usize> = c.stack().to_vec();
    let mut cursor = n + 1 - c.buffer_len();
    let mut arcs = c.arcs().len();
    loop {
        if stack.len() == 1 && stack[0] == ROOT && cursor > n {
            return arcs == n;
        }
        if stack.len() >= 2 {
            let s0 = stack[stack.len() - 1];
            let s1 = stack[stack.len() - 2];
            if s1 != ROOT && gold.head_of(s1) == s0 {
                if left[s1] + right[s1] != 0 {
                    // Popping s1 would orphan its pending dependents.
                    return false;
                }
                stack.remove(stack.len() - 2);
                left[s0] -= 1;
                arcs += 1;
                continue;
            }
            if gold.head_of(s0) == s1 && left[s0] + right[s0] == 0 {
                stack.pop();
                if s0 < s1 {
                    left[s1] -= 1;
                } else {
                    right[s1] -= 1;
                }
                arcs += 1;
                continue;
            }
        }
        if cursor <= n {
            stack.push(cursor);
            cursor += 1;
        } else {
            return false;
        }
    }
}

/// All correct transition sequences for a gold tree, exhaustively.
#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Total number of correct sequences (saturating at `u64::MAX`).
    pub total: u64,
    /// The first sequences in lexicographic transition order, at most
    /// `limit` of them.
    pub sequences: Vec<Vec<Transition>>,
    pub truncated: bool,
}

/// Exhaustive, memoized search over gold-consistent transition sequences.
///
/// The memo key is (stack contents, buffer cursor): on gold-consistent
/// paths the arc set is implied, because every consumed-and-reduced token
/// carries exactly its gold arc. Intended for short sentences; the state
/// cap guards against combinatorial blowup.
pub struct SequenceSearch<'g> {
    gold: &'g GoldTree,
    memo: HashMap<(Vec<usize>, usize), u64>,
    cap: usize,
}

impl<'g> SequenceSearch<'g> {
    pub fn new(gold: &'g GoldTree) -> Self {
        SequenceSearch {
            gold,
            memo: HashMap::new(),
            cap: 4_000_000,
        }
    }

    /// Transitions creating only gold arcs, in lexicographic order.
    fn candidates(&self, c: &Configuration) -> Vec<Transition> {
        let mut out = Vec::with_capacity(3);
        if let (Some(s0), Some(s1)) = (c.stack0(), c.stack1()) {
            if s1 != ROOT && self.gold.head_of(s1) == s0 {
                out.push(Transition::LeftArc(self.gold.label_of(s1).to_owned()));
            }
            if self.gold.head_of(s0) == s1 {
                out.push(Transition::RightArc(self.gold.label_of(s0).to_owned()));
            }
        }
        if c.buffer_front().is_some() {
            out.push(Transition::Shift);
        }
        out
    }

    /// Number of correct sequences from `c` to the gold tree.
    pub fn sequence_count(&mut self, c: &Configuration) -> Result<u64, OracleError> {
        let key = (c.stack().to_vec(), c.sentence_len() + 1 - c.buffer_len());
        if let Some(&count) = self.memo.get(&key) {
            return Ok(count);
        }
        if self.memo.len() >= self.cap {
            return Err(OracleError::SearchSpaceExceeded { cap: self.cap });
        }
        let count = if c.is_terminal() {
            1
        } else {
            let mut total = 0u64;
            for t in self.candidates(c) {
                let child = c.apply(&t).expect("candidate transitions are legal");
                total = total.saturating_add(self.sequence_count(&child)?);
            }
            total
        };
        self.memo.insert(key, count);
        Ok(count)
    }

    /// The legal transitions from which the gold tree remains reachable.
    /// Empty at terminal configurations.
    pub fn correct_set(&mut self, c: &Configuration) -> Result<Vec<Transition>, OracleError> {
        let mut out = Vec::new();
        for t in self.candidates(c) {
            let child = c.apply(&t).expect("candidate transitions are legal");
            if self.sequence_count(&child)? > 0 {
                out.push(t);
            }
        }
        Ok(out)
    }

    fn collect(
        &mut self,
        c: &Configuration,
        path: &mut Vec<Transition>,
        limit: usize,
        out: &mut Vec<Vec<Transition>>,
    ) -> Result<(), OracleError> {
        if out.len() >= limit {
            return Ok(());
        }
        if c.is_terminal() {
            out.push(path.clone());
            return Ok(());
        }
        for t in self.candidates(c) {
            let child = c.apply(&t).expect("candidate transitions are legal");
            if self.sequence_count(&child)? == 0 {
                continue;
            }
            path.push(t);
            self.collect(&child, path, limit, out)?;
            path.pop();
            if out.len() >= limit {
                break;
            }
        }
        Ok(())
    }
}

/// The set of legal transitions from which some completion reaches the gold
/// arc set exactly, by exhaustive search. The testing oracle for the hybrid
/// oracle; intended for short sentences.
pub fn correct_set_bruteforce(c: &Configuration, gold: &GoldTree) -> Vec<Transition> {
    SequenceSearch::new(gold)
        .correct_set(c)
        .expect("exhaustive search is meant for short sentences")
}

/// Enumerate all correct transition sequences for a projective gold tree,
/// in lexicographic order, materializing at most `limit` of them.
pub fn enumerate_sequences(gold: &GoldTree, limit: usize) -> Result<Enumeration, OracleError> {
    if !gold.is_projective() {
        return Err(OracleError::NonProjective);
    }
    let initial = Configuration::initial(gold.len()).expect("gold trees are nonempty");
    let mut search = SequenceSearch::new(gold);
    let total = search.sequence_count(&initial)?;
    let mut sequences = Vec::new();
    let mut path = Vec::new();
    search.collect(&initial, &mut path, limit, &mut sequences)?;
    Ok(Enumeration {
        total,
        truncated: total > sequences.len() as u64,
        sequences,
    })
}

/// Every configuration (terminal included) reachable from the initial one
/// by repeatedly taking any correct transition. Configurations carry
/// counters, so they are valid hybrid-oracle inputs.
pub fn reachable_correct_configurations(
    gold: &GoldTree,
) -> Result<Vec<Configuration>, OracleError> {
    let mut search = SequenceSearch::new(gold);
    let mut seen: HashMap<(Vec<usize>, usize), ()> = HashMap::new();
    let mut queue = vec![Configuration::initial_for(gold)];
    let mut out = Vec::new();
    while let Some(c) = queue.pop() {
        let key = (c.stack().to_vec(), c.sentence_len() + 1 - c.buffer_len());
        if seen.insert(key, ()).is_some() {
            continue;
        }
        for t in search.correct_set(&c)? {
            queue.push(c.apply(&t).expect("correct transitions are legal"));
        }
        out.push(c);
    }
    Ok(out)
}

/// Sample a uniformly labeled random projective single-root tree by running
/// the transition machine with random legal choices (root attachment
/// deferred until the end). Test and benchmark workload generator.
pub fn random_projective_tree<R: Rng>(rng: &mut R, n: usize) -> GoldTree {
    assert!(n >= 1);
    let mut c = Configuration::initial(n).expect("n >= 1");
    loop {
        if c.is_terminal() {
            break;
        }
        let legal = c.legal();
        let mut options: Vec<Transition> = Vec::with_capacity(3);
        if legal.shift {
            options.push(Transition::Shift);
        }
        if legal.left_arc {
            options.push(Transition::LeftArc("dep".into()));
        }
        // Keep the root word unattached until the very last step so the
        // result has a single root.
        if legal.right_arc && !(c.stack1() == Some(ROOT) && c.buffer_front().is_some()) {
            options.push(Transition::RightArc("dep".into()));
        }
        let t = &options[rng.random_range(0..options.len())];
        c = c.apply(t).expect("option is legal");
    }
    let mut heads = vec![0usize; n];
    for arc in c.arcs() {
        heads[arc.dependent - 1] = arc.head;
    }
    GoldTree::from_heads(&heads).expect("terminal arc set forms a tree")
}
