use ndarray::Array2;

use crate::error::{Error, Result};
use crate::probes::{log_softmax_at, softmax_backward, weights_from_logits, Mode, ProbeParams, SentenceReprs};
use crate::scalar::Real;
use crate::spantree::{log_partition, log_partition_and_marginals, DepTree};

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

fn check_gold<T: Real>(reprs: &SentenceReprs<T>, gold: &DepTree) -> Result<()> {
    if gold.len() != reprs.n() {
        return Err(Error::Dimension(format!(
            "gold tree has {} tokens, representations have {}",
            gold.len(),
            reprs.n()
        )));
    }
    Ok(())
}

/// `log Z − Σ log w(gold edges)`, floored at zero against rounding.
fn nll<T: Real>(alpha: &Array2<T>, log_z: T, gold: &DepTree) -> T {
    let gold_log_w: T = gold.edges().map(|(h, d)| log_softmax_at(alpha, h, d)).sum();
    (log_z - gold_log_w).max(T::zero())
}

/// Negative log-likelihood of the gold tree in nats (evaluation mode).
pub fn sentence_loss<T: Real>(params: &ProbeParams<T>, reprs: &SentenceReprs<T>, gold: &DepTree) -> Result<T> {
    check_gold(reprs, gold)?;
    let alpha = params.logits(reprs)?;
    let w = weights_from_logits(&alpha)?;
    let log_z = log_partition(&w)?;
    Ok(nll(&alpha, log_z, gold))
}

/// [`sentence_loss`] in bits.
pub fn sentence_loss_bits(params: &ProbeParams<f64>, reprs: &SentenceReprs<f64>, gold: &DepTree) -> Result<f64> {
    sentence_loss(params, reprs, gold).map(nats_to_bits)
}

/// Loss in nats and its exact gradient with respect to every parameter
/// (evaluation mode, no dropout).
pub fn loss_gradient<T: Real>(
    params: &ProbeParams<T>,
    reprs: &SentenceReprs<T>,
    gold: &DepTree,
) -> Result<(T, ProbeParams<T>)> {
    let mut grad = params.zeros_like();
    let loss = accumulate_loss_gradient(params, reprs, gold, &mut Mode::Eval, &mut grad)?;
    Ok((loss, grad))
}

/// Adds the gradient of one sentence's loss to `grad` and returns the loss.
///
/// `∂L/∂log w = μ − 1[gold]` where `μ` are the edge marginals; that is pulled
/// back through the row softmax and then through the probe.
pub(crate) fn accumulate_loss_gradient<T: Real>(
    params: &ProbeParams<T>,
    reprs: &SentenceReprs<T>,
    gold: &DepTree,
    mode: &mut Mode,
    grad: &mut ProbeParams<T>,
) -> Result<T> {
    check_gold(reprs, gold)?;
    let fwd = params.forward(reprs, mode)?;
    let w = weights_from_logits(&fwd.alpha)?;
    let (log_z, mu) = log_partition_and_marginals(&w)?;
    let loss = nll(&fwd.alpha, log_z, gold);

    let mut g: Array2<T> = mu.into_matrix();
    for (h, d) in gold.edges() {
        g[[h, d]] -= T::one();
    }
    let d_alpha = softmax_backward(&w, &g);
    params.backward(&fwd, &d_alpha, grad);
    Ok(loss)
}
