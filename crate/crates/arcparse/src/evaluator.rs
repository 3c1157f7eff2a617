//! Greedy decoding and attachment-score evaluation.
//!
//! Decoding masks illegal transition kinds before the argmax, so any model
//! terminates in exactly 2(n+1) - 1 steps with one head per token.
//! Scoring follows the usual convention of excluding punctuation (by gold
//! POS tag) from UAS/LAS/UEM, and reports recall split by signed arc
//! length, low-count lengths aggregated into per-side tail buckets.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::neural::{encode, score as model_score, ModelParams, Real, Vocab};
use crate::par;
use crate::transition::{Arc, Configuration, Transition, TransitionKind};
use crate::treebank::GoldTree;

/// Gold POS tags treated as punctuation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PunctSet {
    tags: HashSet<String>,
}

impl PunctSet {
    pub fn empty() -> Self {
        PunctSet::default()
    }

    /// Named tag sets: `ctb` = {PU}, `ud-zh` = {`` '' : , .}, and
    /// `upos-punct` = {PUNCT} for UPOS-tagged input.
    pub fn preset(name: &str) -> Option<Self> {
        let tags: &[&str] = match name {
            "ctb" => &["PU"],
            "ud-zh" => &["``", "''", ":", ",", "."],
            "upos-punct" => &["PUNCT"],
            "none" => &[],
            _ => return None,
        };
        Some(Self::from_tags(tags.iter().copied()))
    }

    pub fn from_tags<'a, I: IntoIterator<Item = &'a str>>(tags: I) -> Self {
        PunctSet {
            tags: tags.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn sorted_tags(&self) -> Vec<String> {
        let mut v: Vec<String> = self.tags.iter().cloned().collect();
        v.sort();
        v
    }
}

impl Serialize for PunctSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let tags = self.sorted_tags();
        let mut seq = serializer.serialize_seq(Some(tags.len()))?;
        for t in &tags {
            seq.serialize_element(t)?;
        }
        seq.end()
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} sentences but predictions cover {pred}")]
    SentenceCountMismatch { gold: usize, pred: usize },
    #[error("sentence {sentence}: gold has {gold} tokens, prediction {pred}")]
    LengthMismatch {
        sentence: usize,
        gold: usize,
        pred: usize,
    },
}

/// Predicted heads and labels for one sentence (`heads[i]` belongs to token
/// `i + 1`; 0 means ROOT).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

impl Prediction {
    pub fn from_arcs(n: usize, arcs: &[Arc]) -> Prediction {
        let mut heads = vec![0usize; n];
        let mut labels = vec![String::new(); n];
        for arc in arcs {
            heads[arc.dependent - 1] = arc.head;
            labels[arc.dependent - 1] = arc.label.clone();
        }
        Prediction { heads, labels }
    }
}

/// Decode one sentence greedily: per step, the highest-probability legal
/// transition kind, with the argmax label over the full inventory for arc
/// transitions.
pub fn greedy_decode<F: Real>(
    words: &[(String, String)],
    params: &ModelParams<F>,
    vocab: &Vocab,
) -> Vec<Arc> {
    assert!(!words.is_empty(), "cannot decode an empty sentence");
    let word_ids: Vec<u32> = words.iter().map(|(w, _)| vocab.word_id(w)).collect();
    let pos_ids: Vec<u32> = words.iter().map(|(_, p)| vocab.pos_id(p)).collect();
    let enc = encode(&word_ids, &pos_ids, params);
    let mut config = Configuration::initial(words.len()).expect("nonempty sentence");
    while !config.is_terminal() {
        let (kind_probs, label_probs) = model_score(&config, &enc, params);
        let legal = config.legal();
        let mut best: Option<(TransitionKind, F)> = None;
        for (kind, idx) in [
            (TransitionKind::Shift, 0usize),
            (TransitionKind::LeftArc, 1),
            (TransitionKind::RightArc, 2),
        ] {
            if !legal.contains(kind) {
                continue;
            }
            let p = kind_probs[idx];
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((kind, p));
            }
        }
        let (kind, _) = best.expect("a legal transition always exists before terminal");
        let transition = match kind {
            TransitionKind::Shift => Transition::Shift,
            arc_kind => {
                let mut best_label = 0usize;
                for i in 1..label_probs.len() {
                    if label_probs[i] > label_probs[best_label] {
                        best_label = i;
                    }
                }
                let label = vocab.label(best_label as u32).to_owned();
                match arc_kind {
                    TransitionKind::LeftArc => Transition::LeftArc(label),
                    _ => Transition::RightArc(label),
                }
            }
        };
        config = config.apply(&transition).expect("masked kind is legal");
    }
    config.arcs().to_vec()
}

/// Decode a batch of sentences, fanning out across `threads` workers over
/// the shared read-only model. Output order matches input order.
pub fn decode_all<F: Real>(
    sentences: &[Vec<(String, String)>],
    params: &ModelParams<F>,
    vocab: &Vocab,
    threads: usize,
) -> Vec<Prediction> {
    par::map(sentences, threads, |words| {
        Prediction::from_arcs(words.len(), &greedy_decode(words, params, vocab))
    })
}

/// Decode gold trees (using their forms and tags) for dev-set evaluation.
pub fn decode_gold_trees<F: Real>(
    trees: &[GoldTree],
    params: &ModelParams<F>,
    vocab: &Vocab,
    threads: usize,
) -> Vec<Prediction> {
    par::map(trees, threads, |tree| {
        let words: Vec<(String, String)> = tree
            .tokens()
            .iter()
            .map(|t| (t.form.clone(), t.pos.clone()))
            .collect();
        Prediction::from_arcs(tree.len(), &greedy_decode(&words, params, vocab))
    })
}

/// Read predicted heads and labels from a CoNLL-U file without requiring
/// the predictions to form a valid tree.
pub fn read_predictions(
    path: &std::path::Path,
) -> Result<Vec<Prediction>, crate::treebank::TreebankError> {
    let doc = crate::treebank::Document::read(path)?;
    let mut out = Vec::with_capacity(doc.sentences.len());
    for sent in &doc.sentences {
        if sent.word_count() == 0 {
            continue;
        }
        let mut heads = Vec::with_capacity(sent.word_count());
        let mut labels = Vec::with_capacity(sent.word_count());
        for (fields, line) in sent.word_rows() {
            let head: usize =
                fields[6]
                    .parse()
                    .map_err(|_| crate::treebank::TreebankError::Parse {
                        line,
                        message: format!("invalid HEAD `{}`", fields[6]),
                    })?;
            heads.push(head);
            labels.push(fields[7].clone());
        }
        out.push(Prediction { heads, labels });
    }
    Ok(out)
}

/// Recall bucket key: a signed arc length (dependent minus head), one of
/// the per-side tail aggregates, or the root-arc bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BucketKey {
    NegTail,
    Length(i64),
    PosTail,
    Root,
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::NegTail => write!(f, "neg_tail"),
            BucketKey::Length(l) => write!(f, "{l}"),
            BucketKey::PosTail => write!(f, "pos_tail"),
            BucketKey::Root => write!(f, "root"),
        }
    }
}

impl Serialize for BucketKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArcLengthBucket {
    pub bucket: BucketKey,
    pub gold: u64,
    pub recalled: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub uas: f64,
    pub las: f64,
    pub uem: f64,
    pub evaluated_tokens: u64,
    pub excluded_punct: u64,
    pub arc_length_recall: Vec<ArcLengthBucket>,
}

impl EvalReport {
    pub const BUCKET_TSV_HEADER: &'static str = "bucket\tgold\trecalled\trecall";

    pub fn buckets_tsv(&self) -> String {
        let mut out = String::from(Self::BUCKET_TSV_HEADER);
        for b in &self.arc_length_recall {
            let recall = if b.gold == 0 {
                0.0
            } else {
                100.0 * b.recalled as f64 / b.gold as f64
            };
            out.push_str(&format!(
                "\n{}\t{}\t{}\t{:.2}",
                b.bucket, b.gold, b.recalled, recall
            ));
        }
        out
    }
}

fn check_alignment(gold: &[GoldTree], pred: &[Prediction]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCountMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.heads.len() {
            return Err(EvalError::LengthMismatch {
                sentence: i + 1,
                gold: g.len(),
                pred: p.heads.len(),
            });
        }
    }
    Ok(())
}

/// UAS, LAS, and unlabeled exact match over non-punctuation tokens, plus
/// the arc-length recall buckets (tail aggregation threshold 100).
pub fn score(
    gold: &[GoldTree],
    pred: &[Prediction],
    punct: &PunctSet,
) -> Result<EvalReport, EvalError> {
    check_alignment(gold, pred)?;
    let mut evaluated = 0u64;
    let mut excluded = 0u64;
    let mut heads_ok = 0u64;
    let mut labeled_ok = 0u64;
    let mut exact_sentences = 0u64;
    for (g, p) in gold.iter().zip(pred) {
        let mut exact = true;
        for tok in g.tokens() {
            if punct.contains(&tok.pos) {
                excluded += 1;
                continue;
            }
            evaluated += 1;
            if p.heads[tok.index - 1] == tok.head {
                heads_ok += 1;
                if p.labels[tok.index - 1] == tok.label {
                    labeled_ok += 1;
                }
            } else {
                exact = false;
            }
        }
        if exact {
            exact_sentences += 1;
        }
    }
    let pct = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    Ok(EvalReport {
        uas: pct(heads_ok, evaluated),
        las: pct(labeled_ok, evaluated),
        uem: pct(exact_sentences, gold.len() as u64),
        evaluated_tokens: evaluated,
        excluded_punct: excluded,
        arc_length_recall: arc_length_recall(gold, pred, punct, 100)?,
    })
}

/// Per-length recall of gold arcs among non-punctuation tokens. Signed
/// length is dependent minus head (negative = dependent left of its head);
/// root arcs go to a dedicated bucket. Lengths with fewer than
/// `min_bucket_count` gold arcs merge into their side's tail aggregate.
pub fn arc_length_recall(
    gold: &[GoldTree],
    pred: &[Prediction],
    punct: &PunctSet,
    min_bucket_count: u64,
) -> Result<Vec<ArcLengthBucket>, EvalError> {
    check_alignment(gold, pred)?;
    let mut by_length: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    let mut root = (0u64, 0u64);
    for (g, p) in gold.iter().zip(pred) {
        for tok in g.tokens() {
            if punct.contains(&tok.pos) {
                continue;
            }
            let recalled = u64::from(p.heads[tok.index - 1] == tok.head);
            if tok.head == 0 {
                root.0 += 1;
                root.1 += recalled;
            } else {
                let len = tok.index as i64 - tok.head as i64;
                let e = by_length.entry(len).or_insert((0, 0));
                e.0 += 1;
                e.1 += recalled;
            }
        }
    }
    let mut neg_tail = (0u64, 0u64);
    let mut pos_tail = (0u64, 0u64);
    let mut kept: Vec<ArcLengthBucket> = Vec::new();
    for (&len, &(g, r)) in &by_length {
        if g < min_bucket_count {
            let tail = if len < 0 {
                &mut neg_tail
            } else {
                &mut pos_tail
            };
            tail.0 += g;
            tail.1 += r;
        } else {
            kept.push(ArcLengthBucket {
                bucket: BucketKey::Length(len),
                gold: g,
                recalled: r,
            });
        }
    }
    let mut out = Vec::new();
    if neg_tail.0 > 0 {
        out.push(ArcLengthBucket {
            bucket: BucketKey::NegTail,
            gold: neg_tail.0,
            recalled: neg_tail.1,
        });
    }
    out.extend(kept);
    if pos_tail.0 > 0 {
        out.push(ArcLengthBucket {
            bucket: BucketKey::PosTail,
            gold: pos_tail.0,
            recalled: pos_tail.1,
        });
    }
    if root.0 > 0 {
        out.push(ArcLengthBucket {
            bucket: BucketKey::Root,
            gold: root.0,
            recalled: root.1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelDims;
    use crate::treebank::Token;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ambig3() -> GoldTree {
        GoldTree::new(vec![
            tok(1, "在", "P", 2, "case"),
            tok(2, "文", "NN", 0, "root"),
            tok(3, "中", "LC", 2, "case"),
        ])
        .unwrap()
    }

    fn tok(index: usize, form: &str, pos: &str, head: usize, label: &str) -> Token {
        Token {
            index,
            form: form.into(),
            pos: pos.into(),
            head,
            label: label.into(),
        }
    }

    fn exact_prediction(tree: &GoldTree) -> Prediction {
        Prediction {
            heads: tree.tokens().iter().map(|t| t.head).collect(),
            labels: tree.tokens().iter().map(|t| t.label.clone()).collect(),
        }
    }

    #[test]
    fn random_parameters_still_terminate() {
        let trees = vec![ambig3()];
        let vocab = Vocab::build(&trees);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let params = crate::neural::ModelParams::<f32>::init(
            vocab.word_count(),
            vocab.pos_count(),
            vocab.label_count(),
            ModelDims::micro(),
            &mut rng,
        );
        for n in [1usize, 2, 5, 9] {
            let words: Vec<(String, String)> =
                (0..n).map(|i| (format!("w{i}"), "X".to_string())).collect();
            let arcs = greedy_decode(&words, &params, &vocab);
            assert_eq!(arcs.len(), n);
            let mut seen = vec![false; n + 1];
            for arc in &arcs {
                assert!(!seen[arc.dependent]);
                seen[arc.dependent] = true;
            }
        }
    }

    #[test]
    fn perfect_predictions_score_100() {
        let trees = vec![ambig3(), GoldTree::from_heads(&[0, 1, 2]).unwrap()];
        let preds: Vec<Prediction> = trees.iter().map(exact_prediction).collect();
        let report = score(&trees, &preds, &PunctSet::empty()).unwrap();
        assert_eq!(report.uas, 100.0);
        assert_eq!(report.las, 100.0);
        assert_eq!(report.uem, 100.0);
        assert_eq!(report.evaluated_tokens, 6);
    }

    #[test]
    fn one_wrong_label_drops_las_only() {
        let trees = vec![ambig3()];
        let mut pred = exact_prediction(&trees[0]);
        pred.labels[0] = "nmod".into();
        let report = score(&trees, &[pred], &PunctSet::empty()).unwrap();
        assert_eq!(report.uas, 100.0);
        assert!((report.las - 66.66666666666667).abs() < 1e-9);
        assert_eq!(report.uem, 100.0);
    }

    #[test]
    fn uem_counts_exact_sentences() {
        let trees = vec![ambig3(), GoldTree::from_heads(&[2, 0]).unwrap()];
        let mut preds: Vec<Prediction> = trees.iter().map(exact_prediction).collect();
        preds[1].heads[0] = 0; // one head error in sentence 2
        let report = score(&trees, &preds, &PunctSet::empty()).unwrap();
        assert_eq!(report.uem, 50.0);
        assert!(report.las <= report.uas);
    }

    #[test]
    fn punctuation_is_excluded_by_gold_tag() {
        let tree = GoldTree::new(vec![
            tok(1, "word", "NN", 2, "nsubj"),
            tok(2, "runs", "VV", 0, "root"),
            tok(3, "。", "PU", 2, "punct"),
        ])
        .unwrap();
        let mut pred = exact_prediction(&tree);
        pred.heads[2] = 1; // wrong head, but on punctuation
        let punct = PunctSet::preset("ctb").unwrap();
        let report = score(&[tree], &[pred], &punct).unwrap();
        assert_eq!(report.uas, 100.0);
        assert_eq!(report.uem, 100.0);
        assert_eq!(report.evaluated_tokens, 2);
        assert_eq!(report.excluded_punct, 1);
    }

    #[test]
    fn ambig3_buckets() {
        let trees = vec![ambig3()];
        let preds = vec![exact_prediction(&trees[0])];
        let buckets = arc_length_recall(&trees, &preds, &PunctSet::empty(), 1).unwrap();
        assert_eq!(
            buckets,
            vec![
                ArcLengthBucket {
                    bucket: BucketKey::Length(-1),
                    gold: 1,
                    recalled: 1
                },
                ArcLengthBucket {
                    bucket: BucketKey::Length(1),
                    gold: 1,
                    recalled: 1
                },
                ArcLengthBucket {
                    bucket: BucketKey::Root,
                    gold: 1,
                    recalled: 1
                },
            ]
        );
    }

    #[test]
    fn all_wrong_heads_recall_zero() {
        let trees = vec![ambig3()];
        let pred = Prediction {
            heads: vec![3, 1, 1],
            labels: vec!["x".into(); 3],
        };
        let buckets = arc_length_recall(&trees, &[pred], &PunctSet::empty(), 1).unwrap();
        assert!(buckets.iter().all(|b| b.recalled == 0));
        let total: u64 = buckets.iter().map(|b| b.gold).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn low_count_lengths_merge_into_tails() {
        // Two sentences with varied lengths; threshold 2 keeps only the
        // lengths that occur twice.
        let trees = vec![
            GoldTree::from_heads(&[2, 0, 2, 3]).unwrap(), // lengths -1, +1, +1(4->3)
            GoldTree::from_heads(&[2, 0, 2, 2]).unwrap(), // lengths -1, +1, +2
        ];
        let preds: Vec<Prediction> = trees.iter().map(exact_prediction).collect();
        let buckets = arc_length_recall(&trees, &preds, &PunctSet::empty(), 2).unwrap();
        let keys: Vec<BucketKey> = buckets.iter().map(|b| b.bucket).collect();
        assert_eq!(
            keys,
            vec![
                BucketKey::Length(-1),
                BucketKey::Length(1),
                BucketKey::PosTail,
                BucketKey::Root,
            ]
        );
        let total: u64 = buckets.iter().map(|b| b.gold).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn score_is_permutation_invariant() {
        let trees = vec![
            ambig3(),
            GoldTree::from_heads(&[0, 1, 1]).unwrap(),
            GoldTree::from_heads(&[2, 0]).unwrap(),
        ];
        let mut preds: Vec<Prediction> = trees.iter().map(exact_prediction).collect();
        preds[1].heads[2] = 2;
        let a = score(&trees, &preds, &PunctSet::empty()).unwrap();
        let order = [2usize, 0, 1];
        let trees_p: Vec<GoldTree> = order.iter().map(|&i| trees[i].clone()).collect();
        let preds_p: Vec<Prediction> = order.iter().map(|&i| preds[i].clone()).collect();
        let b = score(&trees_p, &preds_p, &PunctSet::empty()).unwrap();
        assert_eq!(a.uas, b.uas);
        assert_eq!(a.las, b.las);
        assert_eq!(a.uem, b.uem);
    }

    #[test]
    fn length_mismatch_names_the_sentence() {
        let trees = vec![ambig3()];
        let pred = Prediction {
            heads: vec![2, 0],
            labels: vec!["a".into(), "b".into()],
        };
        match score(&trees, &[pred], &PunctSet::empty()) {
            Err(EvalError::LengthMismatch { sentence, .. }) => assert_eq!(sentence, 1),
            other => panic!("expected length mismatch, got {other:?}"),
        }
    }

    #[test]
    fn bucket_gold_counts_partition_the_evaluated_tokens() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let trees: Vec<GoldTree> = (0..rng.random_range(1..=10))
                .map(|_| {
                    let n = rng.random_range(1..=15);
                    crate::oracle::random_projective_tree(&mut rng, n)
                })
                .collect();
            // Random (often wrong) predictions with arbitrary heads.
            let preds: Vec<Prediction> = trees
                .iter()
                .map(|t| Prediction {
                    heads: (1..=t.len())
                        .map(|_| rng.random_range(0..=t.len()))
                        .collect(),
                    labels: vec!["dep".into(); t.len()],
                })
                .collect();
            let min_bucket = rng.random_range(1..=5);
            let report = score(&trees, &preds, &PunctSet::empty()).unwrap();
            let buckets =
                arc_length_recall(&trees, &preds, &PunctSet::empty(), min_bucket).unwrap();
            let total: u64 = buckets.iter().map(|b| b.gold).sum();
            assert_eq!(total, report.evaluated_tokens);
            assert!(buckets.iter().all(|b| b.recalled <= b.gold));
            assert!(report.las <= report.uas);
        }
    }

    #[test]
    fn decode_all_is_thread_count_invariant() {
        let trees: Vec<GoldTree> = (0..12)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(i);
                let n = rng.random_range(1..=8);
                crate::oracle::random_projective_tree(&mut rng, n)
            })
            .collect();
        let vocab = Vocab::build(&trees);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = crate::neural::ModelParams::<f32>::init(
            vocab.word_count(),
            vocab.pos_count(),
            vocab.label_count(),
            ModelDims::micro(),
            &mut rng,
        );
        let a = decode_gold_trees(&trees, &params, &vocab, 1);
        let b = decode_gold_trees(&trees, &params, &vocab, 4);
        assert_eq!(a, b);
    }
}
