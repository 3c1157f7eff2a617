//! The transition classifier: word/POS embeddings, a one-layer BiLSTM
//! encoder, and two feed-forward heads sharing the same features (the
//! encodings of the two topmost stack items and the buffer front) — one
//! over the three transition kinds, one over the dependency labels.
//!
//! Targets may put mass on several transition kinds at once; the loss is
//! plain cross-entropy against that distribution (see [`soft_cross_entropy`]).
//! Gradients are hand-rolled reverse mode, checked against central finite
//! differences on small models.

mod adam;
mod graph;
mod io;
mod loss;
mod scalar;

pub use adam::{Adam, AdamConfig};
pub use graph::{
    encode, encode_train, feature_slots, kind_index, score, Encoding, Slot, StepSupervision,
};
pub(crate) use graph::{encode_traced_train, forward_backward};
pub use io::{load_model, save_model, ModelIoError, SavedModel};
pub use loss::{soft_cross_entropy, softmax, TargetDistribution};
pub use scalar::Real;

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::treebank::GoldTree;
use scalar::c;

pub const UNK: &str = "<unk>";

/// String-to-id tables for words, POS tags, and dependency labels.
/// Id 0 of the word and POS tables is the unknown symbol; lookups of
/// unseen strings fall back to it. Label ids cover the training inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    word_freq: Vec<u32>,
    word_ids: HashMap<String, u32>,
    pos: Vec<String>,
    pos_ids: HashMap<String, u32>,
    labels: Vec<String>,
    label_ids: HashMap<String, u32>,
}

impl Vocab {
    /// Collect tables from gold trees in corpus order (deterministic ids).
    pub fn build<'a, I>(trees: I) -> Vocab
    where
        I: IntoIterator<Item = &'a GoldTree>,
    {
        let mut v = Vocab {
            words: vec![UNK.to_owned()],
            word_freq: vec![0],
            word_ids: HashMap::from([(UNK.to_owned(), 0)]),
            pos: vec![UNK.to_owned()],
            pos_ids: HashMap::from([(UNK.to_owned(), 0)]),
            labels: Vec::new(),
            label_ids: HashMap::new(),
        };
        for tree in trees {
            for tok in tree.tokens() {
                match v.word_ids.get(&tok.form) {
                    Some(&id) => v.word_freq[id as usize] += 1,
                    None => {
                        let id = v.words.len() as u32;
                        v.word_ids.insert(tok.form.clone(), id);
                        v.words.push(tok.form.clone());
                        v.word_freq.push(1);
                    }
                }
                if !v.pos_ids.contains_key(&tok.pos) {
                    let id = v.pos.len() as u32;
                    v.pos_ids.insert(tok.pos.clone(), id);
                    v.pos.push(tok.pos.clone());
                }
                if !v.label_ids.contains_key(&tok.label) {
                    let id = v.labels.len() as u32;
                    v.label_ids.insert(tok.label.clone(), id);
                    v.labels.push(tok.label.clone());
                }
            }
        }
        v
    }

    pub(crate) fn from_tables(
        words: Vec<String>,
        word_freq: Vec<u32>,
        pos: Vec<String>,
        labels: Vec<String>,
    ) -> Vocab {
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let pos_ids = pos
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        let label_ids = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Vocab {
            words,
            word_freq,
            word_ids,
            pos,
            pos_ids,
            labels,
            label_ids,
        }
    }

    pub fn word_id(&self, form: &str) -> u32 {
        self.word_ids.get(form).copied().unwrap_or(0)
    }

    pub fn pos_id(&self, tag: &str) -> u32 {
        self.pos_ids.get(tag).copied().unwrap_or(0)
    }

    pub fn label_id(&self, label: &str) -> Option<u32> {
        self.label_ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> &str {
        &self.labels[id as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn pos_count(&self) -> usize {
        self.pos.len()
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Training frequency below 2: subject to word dropout during training.
    pub fn is_rare_word(&self, id: u32) -> bool {
        self.word_freq[id as usize] < 2
    }

    pub(crate) fn tables(&self) -> (&[String], &[u32], &[String], &[String]) {
        (&self.words, &self.word_freq, &self.pos, &self.labels)
    }
}

/// Layer widths. Production defaults: 50-dim word and POS embeddings,
/// 200 recurrent units per direction, 200 hidden units in each head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub word_emb: usize,
    pub pos_emb: usize,
    pub lstm: usize,
    pub hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_emb: 50,
            pos_emb: 50,
            lstm: 200,
            hidden: 200,
        }
    }
}

impl ModelDims {
    /// Tiny dims for gradient checks and fast tests.
    pub fn micro() -> Self {
        ModelDims {
            word_emb: 3,
            pos_emb: 2,
            lstm: 4,
            hidden: 4,
        }
    }

    /// Width of one token encoding (both LSTM directions).
    pub fn ctx(&self) -> usize {
        2 * self.lstm
    }

    /// Width of the head input: encodings of s1, s0, b0.
    pub fn feature(&self) -> usize {
        3 * self.ctx()
    }

    fn input(&self) -> usize {
        self.word_emb + self.pos_emb
    }
}

/// One recurrent direction. Gate rows are ordered input, forget, cell,
/// output; the forget block of the bias starts at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<F> {
    pub w_ih: Array2<F>,
    pub w_hh: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Every learned parameter of the classifier. Also used, zero-initialized,
/// as the gradient accumulator and as the Adam moment buffers, since those
/// share the block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub dims: ModelDims,
    pub word_emb: Array2<F>,
    pub pos_emb: Array2<F>,
    pub fw: LstmParams<F>,
    pub bw: LstmParams<F>,
    /// Learned encoding of the virtual ROOT token.
    pub root_ctx: Array1<F>,
    /// Learned stand-in for an empty stack or buffer slot.
    pub missing_ctx: Array1<F>,
    pub trans_hidden: LinearParams<F>,
    pub trans_out: LinearParams<F>,
    pub label_hidden: LinearParams<F>,
    pub label_out: LinearParams<F>,
}

/// Mutable view of one named parameter block as a flat slice.
pub enum BlockMut<'a, F> {
    M(&'a mut Array2<F>),
    V(&'a mut Array1<F>),
}

impl<'a, F> BlockMut<'a, F> {
    pub fn as_slice_mut(&mut self) -> &mut [F] {
        match self {
            BlockMut::M(m) => m.as_slice_mut().expect("standard layout"),
            BlockMut::V(v) => v.as_slice_mut().expect("standard layout"),
        }
    }
}

/// Shared view of one named parameter block.
pub enum BlockRef<'a, F> {
    M(&'a Array2<F>),
    V(&'a Array1<F>),
}

impl<'a, F> BlockRef<'a, F> {
    pub fn as_slice(&self) -> &[F] {
        match self {
            BlockRef::M(m) => m.as_slice().expect("standard layout"),
            BlockRef::V(v) => v.as_slice().expect("standard layout"),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            BlockRef::M(m) => (m.nrows(), m.ncols()),
            BlockRef::V(v) => (v.len(), 0),
        }
    }
}

impl<F: Real> ModelParams<F> {
    /// Randomly initialized parameters: embeddings and the ROOT/missing
    /// vectors uniform in (-0.1, 0.1), dense weights Xavier-uniform,
    /// biases zero except the forget-gate block at 1.
    pub fn init<R: Rng>(
        words: usize,
        pos: usize,
        labels: usize,
        dims: ModelDims,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(words, pos, labels, dims);
        fill_uniform(&mut p.word_emb, rng, 0.1);
        fill_uniform(&mut p.pos_emb, rng, 0.1);
        init_lstm(&mut p.fw, rng);
        init_lstm(&mut p.bw, rng);
        fill_uniform_vec(&mut p.root_ctx, rng, 0.1);
        fill_uniform_vec(&mut p.missing_ctx, rng, 0.1);
        xavier(&mut p.trans_hidden.weight, rng);
        xavier(&mut p.trans_out.weight, rng);
        xavier(&mut p.label_hidden.weight, rng);
        xavier(&mut p.label_out.weight, rng);
        p
    }

    pub fn zeros(words: usize, pos: usize, labels: usize, dims: ModelDims) -> Self {
        let h = dims.lstm;
        let lstm = || LstmParams {
            w_ih: Array2::zeros((4 * h, dims.input())),
            w_hh: Array2::zeros((4 * h, h)),
            bias: Array1::zeros(4 * h),
        };
        ModelParams {
            dims,
            word_emb: Array2::zeros((words, dims.word_emb)),
            pos_emb: Array2::zeros((pos, dims.pos_emb)),
            fw: lstm(),
            bw: lstm(),
            root_ctx: Array1::zeros(dims.ctx()),
            missing_ctx: Array1::zeros(dims.ctx()),
            trans_hidden: LinearParams {
                weight: Array2::zeros((dims.hidden, dims.feature())),
                bias: Array1::zeros(dims.hidden),
            },
            trans_out: LinearParams {
                weight: Array2::zeros((3, dims.hidden)),
                bias: Array1::zeros(3),
            },
            label_hidden: LinearParams {
                weight: Array2::zeros((dims.hidden, dims.feature())),
                bias: Array1::zeros(dims.hidden),
            },
            label_out: LinearParams {
                weight: Array2::zeros((labels, dims.hidden)),
                bias: Array1::zeros(labels),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(
            self.word_emb.nrows(),
            self.pos_emb.nrows(),
            self.label_out.weight.nrows(),
            self.dims,
        )
    }

    pub fn label_count(&self) -> usize {
        self.label_out.weight.nrows()
    }

    /// Reset all blocks to zero, keeping allocations.
    pub fn fill_zero(&mut self) {
        for (_, mut b) in self.blocks_mut() {
            b.as_slice_mut().fill(F::zero());
        }
    }

    /// Named parameter blocks in a fixed order shared by gradients,
    /// optimizer moments, and the serialized format.
    pub fn blocks(&self) -> Vec<(&'static str, BlockRef<'_, F>)> {
        vec![
            ("word_emb", BlockRef::M(&self.word_emb)),
            ("pos_emb", BlockRef::M(&self.pos_emb)),
            ("fw.w_ih", BlockRef::M(&self.fw.w_ih)),
            ("fw.w_hh", BlockRef::M(&self.fw.w_hh)),
            ("fw.bias", BlockRef::V(&self.fw.bias)),
            ("bw.w_ih", BlockRef::M(&self.bw.w_ih)),
            ("bw.w_hh", BlockRef::M(&self.bw.w_hh)),
            ("bw.bias", BlockRef::V(&self.bw.bias)),
            ("root_ctx", BlockRef::V(&self.root_ctx)),
            ("missing_ctx", BlockRef::V(&self.missing_ctx)),
            (
                "trans_hidden.weight",
                BlockRef::M(&self.trans_hidden.weight),
            ),
            ("trans_hidden.bias", BlockRef::V(&self.trans_hidden.bias)),
            ("trans_out.weight", BlockRef::M(&self.trans_out.weight)),
            ("trans_out.bias", BlockRef::V(&self.trans_out.bias)),
            (
                "label_hidden.weight",
                BlockRef::M(&self.label_hidden.weight),
            ),
            ("label_hidden.bias", BlockRef::V(&self.label_hidden.bias)),
            ("label_out.weight", BlockRef::M(&self.label_out.weight)),
            ("label_out.bias", BlockRef::V(&self.label_out.bias)),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, BlockMut<'_, F>)> {
        vec![
            ("word_emb", BlockMut::M(&mut self.word_emb)),
            ("pos_emb", BlockMut::M(&mut self.pos_emb)),
            ("fw.w_ih", BlockMut::M(&mut self.fw.w_ih)),
            ("fw.w_hh", BlockMut::M(&mut self.fw.w_hh)),
            ("fw.bias", BlockMut::V(&mut self.fw.bias)),
            ("bw.w_ih", BlockMut::M(&mut self.bw.w_ih)),
            ("bw.w_hh", BlockMut::M(&mut self.bw.w_hh)),
            ("bw.bias", BlockMut::V(&mut self.bw.bias)),
            ("root_ctx", BlockMut::V(&mut self.root_ctx)),
            ("missing_ctx", BlockMut::V(&mut self.missing_ctx)),
            (
                "trans_hidden.weight",
                BlockMut::M(&mut self.trans_hidden.weight),
            ),
            (
                "trans_hidden.bias",
                BlockMut::V(&mut self.trans_hidden.bias),
            ),
            ("trans_out.weight", BlockMut::M(&mut self.trans_out.weight)),
            ("trans_out.bias", BlockMut::V(&mut self.trans_out.bias)),
            (
                "label_hidden.weight",
                BlockMut::M(&mut self.label_hidden.weight),
            ),
            (
                "label_hidden.bias",
                BlockMut::V(&mut self.label_hidden.bias),
            ),
            ("label_out.weight", BlockMut::M(&mut self.label_out.weight)),
            ("label_out.bias", BlockMut::V(&mut self.label_out.bias)),
        ]
    }

    /// First block whose gradient contains a non-finite value, if any.
    pub fn non_finite_block(&self) -> Option<&'static str> {
        self.blocks()
            .into_iter()
            .find(|(_, b)| b.as_slice().iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }
}

fn fill_uniform<F: Real, R: Rng>(a: &mut Array2<F>, rng: &mut R, scale: f64) {
    for x in a.iter_mut() {
        *x = c(rng.random_range(-scale..scale));
    }
}

fn fill_uniform_vec<F: Real, R: Rng>(a: &mut Array1<F>, rng: &mut R, scale: f64) {
    for x in a.iter_mut() {
        *x = c(rng.random_range(-scale..scale));
    }
}

fn xavier<F: Real, R: Rng>(w: &mut Array2<F>, rng: &mut R) {
    let limit = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
    for x in w.iter_mut() {
        *x = c(rng.random_range(-limit..limit));
    }
}

fn init_lstm<F: Real, R: Rng>(p: &mut LstmParams<F>, rng: &mut R) {
    xavier(&mut p.w_ih, rng);
    xavier(&mut p.w_hh, rng);
    let h = p.w_hh.ncols();
    // Forget-gate bias at 1 stabilizes early training.
    for i in h..2 * h {
        p.bias[i] = c(1.0);
    }
}
