//! Forward and backward passes.
//!
//! Encoding runs the BiLSTM once per sentence; the per-step heads are then
//! batched over all parser steps of the sentence (the oracle fixes the path
//! before any scoring, so training steps need not interleave with the
//! network). Backward is hand-written reverse mode accumulating into a
//! gradient buffer shaped like the parameters.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;

use super::loss::{soft_cross_entropy, softmax_in_place, softmax_rows, TargetDistribution};
use super::scalar::{c, sigmoid, Real};
use super::{LstmParams, ModelParams};
use crate::transition::{Configuration, TransitionKind};

/// Class index of a transition kind in the kind head.
pub fn kind_index(kind: TransitionKind) -> usize {
    match kind {
        TransitionKind::Shift => 0,
        TransitionKind::LeftArc => 1,
        TransitionKind::RightArc => 2,
    }
}

/// What fills a feature position: a sentence token, the ROOT vector, or the
/// learned stand-in for an empty slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Missing,
    Root,
    Token(usize),
}

/// The three feature slots of a configuration: s1, s0, and the buffer front.
pub fn feature_slots(config: &Configuration) -> [Slot; 3] {
    let slot = |x: Option<usize>| match x {
        None => Slot::Missing,
        Some(0) => Slot::Root,
        Some(i) => Slot::Token(i),
    };
    [
        slot(config.stack1()),
        slot(config.stack0()),
        slot(config.buffer_front()),
    ]
}

/// Per-token context vectors: row 0 is the ROOT vector, rows 1..=n the
/// BiLSTM outputs (dropout-scaled when built in training mode).
#[derive(Debug, Clone)]
pub struct Encoding<F> {
    ctx: Array2<F>,
    missing: Array1<F>,
}

impl<F: Real> Encoding<F> {
    /// Number of sentence tokens (ROOT excluded).
    pub fn sentence_len(&self) -> usize {
        self.ctx.nrows() - 1
    }

    /// All n + 1 context vectors (ROOT first).
    pub fn vectors(&self) -> &Array2<F> {
        &self.ctx
    }

    pub fn slot_vector(&self, slot: Slot) -> ArrayView1<'_, F> {
        match slot {
            Slot::Missing => self.missing.view(),
            Slot::Root => self.ctx.row(0),
            Slot::Token(i) => self.ctx.row(i),
        }
    }
}

pub(crate) struct DirTrace<F> {
    i: Array2<F>,
    f: Array2<F>,
    g: Array2<F>,
    o: Array2<F>,
    c: Array2<F>,
    tanh_c: Array2<F>,
    h: Array2<F>,
}

impl<F: Real> DirTrace<F> {
    fn zeros(n: usize, h: usize) -> Self {
        DirTrace {
            i: Array2::zeros((n, h)),
            f: Array2::zeros((n, h)),
            g: Array2::zeros((n, h)),
            o: Array2::zeros((n, h)),
            c: Array2::zeros((n, h)),
            tanh_c: Array2::zeros((n, h)),
            h: Array2::zeros((n, h)),
        }
    }
}

pub(crate) struct EncodeTrace<F> {
    word_ids: Vec<u32>,
    pos_ids: Vec<u32>,
    x: Array2<F>,
    fw: DirTrace<F>,
    bw: DirTrace<F>,
    /// Inverted-dropout mask over the BiLSTM outputs; absent at inference.
    mask: Option<Array2<F>>,
    pub(crate) enc: Encoding<F>,
}

fn lstm_forward<F: Real>(p: &LstmParams<F>, x: &Array2<F>, reverse: bool) -> DirTrace<F> {
    let n = x.nrows();
    let hd = p.w_hh.ncols();
    let mut tr = DirTrace::zeros(n, hd);
    let xw = x.dot(&p.w_ih.t());
    let mut h_prev = Array1::<F>::zeros(hd);
    let mut c_prev = Array1::<F>::zeros(hd);
    let order: Vec<usize> = if reverse {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    for t in order {
        let zh = p.w_hh.dot(&h_prev);
        for j in 0..hd {
            let zi = xw[[t, j]] + zh[j] + p.bias[j];
            let zf = xw[[t, hd + j]] + zh[hd + j] + p.bias[hd + j];
            let zg = xw[[t, 2 * hd + j]] + zh[2 * hd + j] + p.bias[2 * hd + j];
            let zo = xw[[t, 3 * hd + j]] + zh[3 * hd + j] + p.bias[3 * hd + j];
            let gi = sigmoid(zi);
            let gf = sigmoid(zf);
            let gg = zg.tanh();
            let go = sigmoid(zo);
            let cc = gf * c_prev[j] + gi * gg;
            let tc = cc.tanh();
            tr.i[[t, j]] = gi;
            tr.f[[t, j]] = gf;
            tr.g[[t, j]] = gg;
            tr.o[[t, j]] = go;
            tr.c[[t, j]] = cc;
            tr.tanh_c[[t, j]] = tc;
            tr.h[[t, j]] = go * tc;
        }
        h_prev.assign(&tr.h.row(t));
        c_prev.assign(&tr.c.row(t));
    }
    tr
}

#[allow(clippy::too_many_arguments)]
fn lstm_backward<F: Real>(
    p: &LstmParams<F>,
    tr: &DirTrace<F>,
    x: &Array2<F>,
    dh_out: &Array2<F>,
    reverse: bool,
    gp_w_ih: &mut Array2<F>,
    gp_w_hh: &mut Array2<F>,
    gp_bias: &mut Array1<F>,
    dx: &mut Array2<F>,
) {
    let n = x.nrows();
    let hd = p.w_hh.ncols();
    let mut dz_all = Array2::<F>::zeros((n, 4 * hd));
    let mut carry_h = Array1::<F>::zeros(hd);
    let mut carry_c = Array1::<F>::zeros(hd);
    // Walk the reverse of the processing order; `prev` is the position the
    // recurrent state came from.
    let order: Vec<usize> = if reverse {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let one = F::one();
    for &t in &order {
        let prev = if reverse {
            (t + 1 < n).then_some(t + 1)
        } else {
            t.checked_sub(1)
        };
        for j in 0..hd {
            let gi = tr.i[[t, j]];
            let gf = tr.f[[t, j]];
            let gg = tr.g[[t, j]];
            let go = tr.o[[t, j]];
            let tc = tr.tanh_c[[t, j]];
            let c_prev = prev.map_or(F::zero(), |p_| tr.c[[p_, j]]);
            let dh = dh_out[[t, j]] + carry_h[j];
            let d_o = dh * tc;
            let dc = dh * go * (one - tc * tc) + carry_c[j];
            let di = dc * gg;
            let dg = dc * gi;
            let df = dc * c_prev;
            carry_c[j] = dc * gf;
            dz_all[[t, j]] = di * gi * (one - gi);
            dz_all[[t, hd + j]] = df * gf * (one - gf);
            dz_all[[t, 2 * hd + j]] = dg * (one - gg * gg);
            dz_all[[t, 3 * hd + j]] = d_o * go * (one - go);
        }
        carry_h = dz_all.row(t).dot(&p.w_hh);
    }
    // Batched parameter and input gradients.
    general_mat_mul(one, &dz_all.t(), x, one, gp_w_ih);
    let mut h_prev_all = Array2::<F>::zeros((n, hd));
    for t in 0..n {
        let prev = if reverse {
            (t + 1 < n).then_some(t + 1)
        } else {
            t.checked_sub(1)
        };
        if let Some(p_) = prev {
            h_prev_all.row_mut(t).assign(&tr.h.row(p_));
        }
    }
    general_mat_mul(one, &dz_all.t(), &h_prev_all, one, gp_w_hh);
    *gp_bias += &dz_all.sum_axis(Axis(0));
    general_mat_mul(one, &dz_all, &p.w_ih, one, dx);
}

fn encode_impl<F: Real, R: Rng>(
    word_ids: &[u32],
    pos_ids: &[u32],
    params: &ModelParams<F>,
    dropout: Option<(f64, &mut R)>,
) -> EncodeTrace<F> {
    let n = word_ids.len();
    assert!(n >= 1 && pos_ids.len() == n);
    let dims = params.dims;
    let mut x = Array2::<F>::zeros((n, dims.word_emb + dims.pos_emb));
    for t in 0..n {
        x.row_mut(t)
            .slice_mut(s![..dims.word_emb])
            .assign(&params.word_emb.row(word_ids[t] as usize));
        x.row_mut(t)
            .slice_mut(s![dims.word_emb..])
            .assign(&params.pos_emb.row(pos_ids[t] as usize));
    }
    let fw = lstm_forward(&params.fw, &x, false);
    let bw = lstm_forward(&params.bw, &x, true);
    let ctx_dim = dims.ctx();
    let mut ctx = Array2::<F>::zeros((n + 1, ctx_dim));
    ctx.row_mut(0).assign(&params.root_ctx);
    for t in 0..n {
        ctx.row_mut(t + 1)
            .slice_mut(s![..dims.lstm])
            .assign(&fw.h.row(t));
        ctx.row_mut(t + 1)
            .slice_mut(s![dims.lstm..])
            .assign(&bw.h.row(t));
    }
    let mask = dropout.map(|(rate, rng)| {
        let keep = 1.0 - rate;
        let mut mask = Array2::<F>::zeros((n, ctx_dim));
        for t in 0..n {
            for j in 0..ctx_dim {
                let m = if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                };
                mask[[t, j]] = c(m);
                ctx[[t + 1, j]] *= mask[[t, j]];
            }
        }
        mask
    });
    EncodeTrace {
        word_ids: word_ids.to_vec(),
        pos_ids: pos_ids.to_vec(),
        x,
        fw,
        bw,
        mask,
        enc: Encoding {
            ctx,
            missing: params.missing_ctx.clone(),
        },
    }
}

/// Context vectors for inference (no dropout, deterministic).
pub fn encode<F: Real>(word_ids: &[u32], pos_ids: &[u32], params: &ModelParams<F>) -> Encoding<F> {
    encode_impl::<F, rand::rngs::ThreadRng>(word_ids, pos_ids, params, None).enc
}

/// Context vectors in training mode: inverted dropout on the BiLSTM
/// outputs, mask drawn from `rng` (the ROOT and missing-slot vectors are
/// not recurrent outputs and are left untouched).
pub fn encode_train<F: Real, R: Rng>(
    word_ids: &[u32],
    pos_ids: &[u32],
    params: &ModelParams<F>,
    dropout: f64,
    rng: &mut R,
) -> Encoding<F> {
    encode_impl(word_ids, pos_ids, params, Some((dropout, rng))).enc
}

pub(crate) fn encode_traced_train<F: Real, R: Rng>(
    word_ids: &[u32],
    pos_ids: &[u32],
    params: &ModelParams<F>,
    dropout: f64,
    rng: &mut R,
) -> EncodeTrace<F> {
    encode_impl(word_ids, pos_ids, params, Some((dropout, rng)))
}

fn head_vec<F: Real>(
    weight_hidden: &super::LinearParams<F>,
    weight_out: &super::LinearParams<F>,
    feat: &Array1<F>,
) -> Array1<F> {
    let mut h = weight_hidden.weight.dot(feat) + &weight_hidden.bias;
    h.mapv_inplace(|v| v.max(F::zero()));
    let mut logits = weight_out.weight.dot(&h) + &weight_out.bias;
    softmax_in_place(logits.as_slice_mut().expect("standard layout"));
    logits
}

/// Probabilities over transition kinds (shift, larc, rarc) and over labels
/// for one configuration. Both heads read the same feature vector: the
/// encodings of s1, s0, and the buffer front.
pub fn score<F: Real>(
    config: &Configuration,
    enc: &Encoding<F>,
    params: &ModelParams<F>,
) -> (Array1<F>, Array1<F>) {
    let slots = feature_slots(config);
    let ctx = params.dims.ctx();
    let mut feat = Array1::<F>::zeros(params.dims.feature());
    for (k, slot) in slots.iter().enumerate() {
        feat.slice_mut(s![k * ctx..(k + 1) * ctx])
            .assign(&enc.slot_vector(*slot));
    }
    let kind = head_vec(&params.trans_hidden, &params.trans_out, &feat);
    let label = head_vec(&params.label_hidden, &params.label_out, &feat);
    (kind, label)
}

/// Supervision for one parser step of a sentence.
#[derive(Debug, Clone)]
pub struct StepSupervision<F> {
    pub slots: [Slot; 3],
    /// Distribution over the three transition kinds; uniform over the
    /// correct set.
    pub kind_target: TargetDistribution<F>,
    /// Gold label id when the applied transition creates an arc.
    pub label_target: Option<u32>,
}

/// Forward the heads over all steps, accumulate the summed loss, and push
/// gradients for the whole sentence into `grads`. Returns the loss.
pub(crate) fn forward_backward<F: Real>(
    trace: &EncodeTrace<F>,
    steps: &[StepSupervision<F>],
    params: &ModelParams<F>,
    grads: &mut ModelParams<F>,
) -> F {
    let dims = params.dims;
    let ctx = dims.ctx();
    let feat_dim = dims.feature();
    let n_steps = steps.len();
    let one = F::one();

    // Feature matrix over steps.
    let mut feats = Array2::<F>::zeros((n_steps, feat_dim));
    for (sidx, step) in steps.iter().enumerate() {
        for (k, slot) in step.slots.iter().enumerate() {
            feats
                .row_mut(sidx)
                .slice_mut(s![k * ctx..(k + 1) * ctx])
                .assign(&trace.enc.slot_vector(*slot));
        }
    }

    let mut loss = F::zero();
    // dF accumulates feature gradients from both heads.
    let mut d_feats = Array2::<F>::zeros((n_steps, feat_dim));

    // Kind head over every step.
    {
        let mut pre = feats.dot(&params.trans_hidden.weight.t());
        pre += &params.trans_hidden.bias;
        let post = pre.mapv(|v| v.max(F::zero()));
        let mut probs = post.dot(&params.trans_out.weight.t());
        probs += &params.trans_out.bias;
        softmax_rows(&mut probs);
        let mut d_logits = probs;
        for (sidx, step) in steps.iter().enumerate() {
            let row = d_logits.row(sidx);
            loss += soft_cross_entropy(row.as_slice().expect("standard layout"), &step.kind_target);
        }
        for (sidx, step) in steps.iter().enumerate() {
            let mut row = d_logits.row_mut(sidx);
            for (j, &y) in step.kind_target.probs().iter().enumerate() {
                row[j] -= y;
            }
        }
        general_mat_mul(one, &d_logits.t(), &post, one, &mut grads.trans_out.weight);
        grads.trans_out.bias += &d_logits.sum_axis(Axis(0));
        let mut d_pre = d_logits.dot(&params.trans_out.weight);
        Zip::from(&mut d_pre).and(&pre).for_each(|d, &p| {
            if p <= F::zero() {
                *d = F::zero();
            }
        });
        general_mat_mul(one, &d_pre.t(), &feats, one, &mut grads.trans_hidden.weight);
        grads.trans_hidden.bias += &d_pre.sum_axis(Axis(0));
        general_mat_mul(one, &d_pre, &params.trans_hidden.weight, one, &mut d_feats);
    }

    // Label head over arc steps only (both heads see identical features).
    let arc_rows: Vec<usize> = steps
        .iter()
        .enumerate()
        .filter_map(|(i, st)| st.label_target.map(|_| i))
        .collect();
    if !arc_rows.is_empty() {
        let labels = params.label_count();
        let mut lab_feats = Array2::<F>::zeros((arc_rows.len(), feat_dim));
        for (k, &row) in arc_rows.iter().enumerate() {
            lab_feats.row_mut(k).assign(&feats.row(row));
        }
        let mut pre = lab_feats.dot(&params.label_hidden.weight.t());
        pre += &params.label_hidden.bias;
        let post = pre.mapv(|v| v.max(F::zero()));
        let mut probs = post.dot(&params.label_out.weight.t());
        probs += &params.label_out.bias;
        softmax_rows(&mut probs);
        let floor = c::<F>(1e-12);
        let mut d_logits = probs;
        for (k, &row) in arc_rows.iter().enumerate() {
            let gold = steps[row].label_target.unwrap() as usize;
            debug_assert!(gold < labels);
            loss += -d_logits[[k, gold]].max(floor).ln();
            d_logits[[k, gold]] -= one;
        }
        general_mat_mul(one, &d_logits.t(), &post, one, &mut grads.label_out.weight);
        grads.label_out.bias += &d_logits.sum_axis(Axis(0));
        let mut d_pre = d_logits.dot(&params.label_out.weight);
        Zip::from(&mut d_pre).and(&pre).for_each(|d, &p| {
            if p <= F::zero() {
                *d = F::zero();
            }
        });
        general_mat_mul(
            one,
            &d_pre.t(),
            &lab_feats,
            one,
            &mut grads.label_hidden.weight,
        );
        grads.label_hidden.bias += &d_pre.sum_axis(Axis(0));
        let d_lab_feats = d_pre.dot(&params.label_hidden.weight);
        for (k, &row) in arc_rows.iter().enumerate() {
            let mut dst = d_feats.row_mut(row);
            dst += &d_lab_feats.row(k);
        }
    }

    // Scatter feature gradients into context rows / ROOT / missing.
    let n = trace.word_ids.len();
    let mut d_ctx = Array2::<F>::zeros((n + 1, ctx));
    for (sidx, step) in steps.iter().enumerate() {
        for (k, slot) in step.slots.iter().enumerate() {
            let chunk = d_feats.row(sidx);
            let chunk = chunk.slice(s![k * ctx..(k + 1) * ctx]);
            match slot {
                Slot::Missing => grads.missing_ctx += &chunk,
                Slot::Root => {
                    let mut r = d_ctx.row_mut(0);
                    r += &chunk;
                }
                Slot::Token(i) => {
                    let mut r = d_ctx.row_mut(*i);
                    r += &chunk;
                }
            }
        }
    }
    grads.root_ctx += &d_ctx.row(0);

    // Through dropout back to the raw BiLSTM outputs.
    let mut d_tokens = d_ctx.slice(s![1.., ..]).to_owned();
    if let Some(mask) = &trace.mask {
        d_tokens *= mask;
    }
    let d_fw = d_tokens.slice(s![.., ..dims.lstm]).to_owned();
    let d_bw = d_tokens.slice(s![.., dims.lstm..]).to_owned();

    let mut dx = Array2::<F>::zeros((n, dims.word_emb + dims.pos_emb));
    lstm_backward(
        &params.fw,
        &trace.fw,
        &trace.x,
        &d_fw,
        false,
        &mut grads.fw.w_ih,
        &mut grads.fw.w_hh,
        &mut grads.fw.bias,
        &mut dx,
    );
    lstm_backward(
        &params.bw,
        &trace.bw,
        &trace.x,
        &d_bw,
        true,
        &mut grads.bw.w_ih,
        &mut grads.bw.w_hh,
        &mut grads.bw.bias,
        &mut dx,
    );

    for t in 0..n {
        let row = dx.row(t);
        let mut w = grads.word_emb.row_mut(trace.word_ids[t] as usize);
        w += &row.slice(s![..dims.word_emb]);
        let mut p = grads.pos_emb.row_mut(trace.pos_ids[t] as usize);
        p += &row.slice(s![dims.word_emb..]);
    }

    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{ModelDims, ModelParams};
    use crate::transition::Configuration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn micro_params(seed: u64) -> ModelParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::init(5, 3, 4, ModelDims::micro(), &mut rng)
    }

    fn encode_traced(
        word_ids: &[u32],
        pos_ids: &[u32],
        params: &ModelParams<f64>,
    ) -> EncodeTrace<f64> {
        encode_impl::<f64, rand::rngs::ThreadRng>(word_ids, pos_ids, params, None)
    }

    fn fixed_steps() -> Vec<StepSupervision<f64>> {
        vec![
            StepSupervision {
                slots: [Slot::Missing, Slot::Root, Slot::Token(1)],
                kind_target: TargetDistribution::one_hot(0, 3),
                label_target: None,
            },
            StepSupervision {
                slots: [Slot::Root, Slot::Token(1), Slot::Token(2)],
                kind_target: TargetDistribution::uniform(&[0, 1], 3),
                label_target: None,
            },
            StepSupervision {
                slots: [Slot::Token(1), Slot::Token(2), Slot::Token(3)],
                kind_target: TargetDistribution::one_hot(1, 3),
                label_target: Some(2),
            },
            StepSupervision {
                slots: [Slot::Root, Slot::Token(2), Slot::Missing],
                kind_target: TargetDistribution::one_hot(2, 3),
                label_target: Some(0),
            },
        ]
    }

    fn loss_of(params: &ModelParams<f64>, dropout: bool) -> f64 {
        let word_ids = [1u32, 4, 2];
        let pos_ids = [0u32, 2, 1];
        let trace = if dropout {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            encode_traced_train(&word_ids, &pos_ids, params, 0.5, &mut rng)
        } else {
            encode_traced(&word_ids, &pos_ids, params)
        };
        let mut sink = params.zeros_like();
        forward_backward(&trace, &fixed_steps(), params, &mut sink)
    }

    fn gradients(params: &ModelParams<f64>, dropout: bool) -> ModelParams<f64> {
        let word_ids = [1u32, 4, 2];
        let pos_ids = [0u32, 2, 1];
        let trace = if dropout {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            encode_traced_train(&word_ids, &pos_ids, params, 0.5, &mut rng)
        } else {
            encode_traced(&word_ids, &pos_ids, params)
        };
        let mut grads = params.zeros_like();
        forward_backward(&trace, &fixed_steps(), params, &mut grads);
        grads
    }

    /// Analytic gradients against central differences, every block, every
    /// element; relative error must stay below 1e-4 (it is far below).
    fn check_gradients(dropout: bool) {
        let mut params = micro_params(3);
        let analytic = gradients(&params, dropout);
        let names: Vec<&'static str> = params.blocks().iter().map(|(n, _)| *n).collect();
        for (bi, name) in names.iter().enumerate() {
            let len = analytic.blocks()[bi].1.as_slice().len();
            for idx in 0..len {
                let orig = params.blocks_mut()[bi].1.as_slice_mut()[idx];
                let h = 1e-5 * orig.abs().max(1.0);
                params.blocks_mut()[bi].1.as_slice_mut()[idx] = orig + h;
                let up = loss_of(&params, dropout);
                params.blocks_mut()[bi].1.as_slice_mut()[idx] = orig - h;
                let down = loss_of(&params, dropout);
                params.blocks_mut()[bi].1.as_slice_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic.blocks()[bi].1.as_slice()[idx];
                // Relative error below 1e-4, with an absolute floor for
                // near-zero components where the relative form is
                // ill-conditioned against finite-difference noise.
                let tol = 1e-8f64.max(1e-4 * a.abs().max(fd.abs()));
                assert!(
                    (a - fd).abs() <= tol,
                    "block {name}[{idx}]: analytic {a:.6e} vs fd {fd:.6e}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(false);
    }

    #[test]
    fn gradients_match_finite_differences_with_dropout() {
        check_gradients(true);
    }

    #[test]
    fn encoding_shapes() {
        let params = micro_params(1);
        let enc = encode(&[1, 2, 3, 4], &[0, 1, 2, 0], &params);
        assert_eq!(enc.sentence_len(), 4);
        assert_eq!(enc.vectors().nrows(), 5);
        assert_eq!(enc.vectors().ncols(), params.dims.ctx());
    }

    #[test]
    fn inference_encoding_is_deterministic() {
        let params = micro_params(2);
        let a = encode(&[1, 2], &[0, 1], &params);
        let b = encode(&[1, 2], &[0, 1], &params);
        assert_eq!(a.vectors(), b.vectors());
    }

    #[test]
    fn seeded_dropout_replays_identically() {
        let params = micro_params(2);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = encode_train(&[1, 2], &[0, 1], &params, 0.5, &mut r1);
        let b = encode_train(&[1, 2], &[0, 1], &params, 0.5, &mut r2);
        assert_eq!(a.vectors(), b.vectors());
        let mut r3 = ChaCha8Rng::seed_from_u64(6);
        let c_ = encode_train(&[1, 2], &[0, 1], &params, 0.5, &mut r3);
        assert_ne!(a.vectors(), c_.vectors());
    }

    #[test]
    fn scores_are_distributions() {
        let params = micro_params(4);
        let enc = encode(&[1, 2, 3], &[0, 1, 2], &params);
        let config = Configuration::initial(3).unwrap();
        // Empty stack: sentinel slots only.
        let (kind, label) = score(&config, &enc, &params);
        assert!((kind.sum() - 1.0).abs() < 1e-6);
        assert!((label.sum() - 1.0).abs() < 1e-6);
        assert!(kind.iter().chain(label.iter()).all(|p| p.is_finite()));

        let config = config.apply(&crate::transition::Transition::Shift).unwrap();
        let (kind, _) = score(&config, &enc, &params);
        assert_eq!(kind.len(), 3);
    }
}
