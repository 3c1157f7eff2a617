//! Softmax and cross-entropy against a target distribution.

use ndarray::{Array1, Array2, ArrayView1};

use super::scalar::{c, Real};

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: ArrayView1<'_, F>) -> Array1<F> {
    let mut out = logits.to_owned();
    softmax_in_place(out.as_slice_mut().expect("standard layout"));
    out
}

pub(crate) fn softmax_in_place<F: Real>(row: &mut [F]) {
    let max = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
    let mut sum = F::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

pub(crate) fn softmax_rows<F: Real>(m: &mut Array2<F>) {
    for mut row in m.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("standard layout"));
    }
}

/// A probability vector over classes. When `k` classes are simultaneously
/// correct, each carries mass `1/k` and the rest are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution<F> {
    probs: Vec<F>,
}

impl<F: Real> TargetDistribution<F> {
    /// Uniform mass over `support`, zero elsewhere.
    pub fn uniform(support: &[usize], classes: usize) -> Self {
        assert!(!support.is_empty() && support.len() <= classes);
        let mut probs = vec![F::zero(); classes];
        let mass = c::<F>(1.0) / c::<F>(support.len() as f64);
        for &i in support {
            assert!(probs[i] == F::zero(), "duplicate class {i} in support");
            probs[i] = mass;
        }
        TargetDistribution { probs }
    }

    pub fn one_hot(class: usize, classes: usize) -> Self {
        Self::uniform(&[class], classes)
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > F::zero()).count()
    }
}

/// Cross-entropy `-sum_i target_i * log(probs_i)`, with probabilities
/// floored at 1e-12 inside the logarithm.
pub fn soft_cross_entropy<F: Real>(probs: &[F], target: &TargetDistribution<F>) -> F {
    assert_eq!(probs.len(), target.probs().len());
    let floor = c::<F>(1e-12);
    probs
        .iter()
        .zip(target.probs())
        .filter(|(_, &y)| y > F::zero())
        .map(|(&p, &y)| -y * p.max(floor).ln())
        .sum()
}
