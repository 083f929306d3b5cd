//! Per-pair objectives.
//!
//! With `s(w) = u_w · v_c` (output row `u`, center input row `v`):
//!
//! ```text
//! NEG: L = -log σ(s(o)) - Σᵢ log σ(-s(nᵢ))
//! NCE: L = -log σ(ℓ(o)) - Σᵢ log σ(-ℓ(nᵢ)),   ℓ(w) = s(w) - log(k·q(w))
//! ```

use crate::corpus::WordId;
use crate::error::{Error, Result};

use super::model::ModelState;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Loss and `dL/dlogit` of one logistic term.
#[inline]
pub(crate) fn logistic_term(logit: f64, positive: bool) -> (f64, f64) {
    if positive {
        (-log_sigmoid(logit), sigmoid(logit) - 1.0)
    } else {
        (-log_sigmoid(-logit), sigmoid(logit))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one (center, target, noise) instance with exact partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub loss: f64,
    /// `∂L/∂v_center`
    pub center: Vec<f64>,
    /// `∂L/∂u_w` per distinct output row, in order of first appearance.
    pub outputs: Vec<(WordId, Vec<f64>)>,
}

struct Candidate {
    id: WordId,
    positive: bool,
    offset: f64,
}

fn candidate_grads(state: &ModelState, center: WordId, candidates: &[Candidate]) -> PairGradients {
    let v = state.input_row(center);
    let mut grad_center = vec![0.0; state.dim()];
    let mut outputs: Vec<(WordId, Vec<f64>)> = Vec::with_capacity(candidates.len());
    let mut loss = 0.0;
    for c in candidates {
        let u = state.output_row(c.id);
        let (l, g) = logistic_term(dot(u, v) - c.offset, c.positive);
        loss += l;
        for (gc, &ui) in grad_center.iter_mut().zip(u) {
            *gc += g * ui;
        }
        let slot = match outputs.iter().position(|(id, _)| *id == c.id) {
            Some(i) => i,
            None => {
                outputs.push((c.id, vec![0.0; state.dim()]));
                outputs.len() - 1
            }
        };
        for (go, &vi) in outputs[slot].1.iter_mut().zip(v) {
            *go += g * vi;
        }
    }
    PairGradients {
        loss,
        center: grad_center,
        outputs,
    }
}

fn check_ids(state: &ModelState, ids: impl IntoIterator<Item = WordId>) -> Result<()> {
    for id in ids {
        if id as usize >= state.vocab_size() {
            return Err(Error::Domain(format!(
                "id {id} out of range for vocabulary of {}",
                state.vocab_size()
            )));
        }
    }
    Ok(())
}

pub fn neg_loss_and_grads(
    state: &ModelState,
    center: WordId,
    target: WordId,
    noise: &[WordId],
) -> Result<PairGradients> {
    if noise.is_empty() {
        return Err(Error::Domain("at least one noise sample is required".into()));
    }
    check_ids(state, [center, target].into_iter().chain(noise.iter().copied()))?;
    let mut cands = Vec::with_capacity(noise.len() + 1);
    cands.push(Candidate {
        id: target,
        positive: true,
        offset: 0.0,
    });
    cands.extend(noise.iter().map(|&id| Candidate {
        id,
        positive: false,
        offset: 0.0,
    }));
    Ok(candidate_grads(state, center, &cands))
}

/// NCE with `k = noise.len()` and `q` given as the sampler's probability table.
pub fn nce_loss_and_grads(
    state: &ModelState,
    center: WordId,
    target: WordId,
    noise: &[WordId],
    noise_probs: &[f64],
) -> Result<PairGradients> {
    if noise.is_empty() {
        return Err(Error::Domain("at least one noise sample is required".into()));
    }
    check_ids(state, [center, target].into_iter().chain(noise.iter().copied()))?;
    let k = noise.len() as f64;
    let offset = |id: WordId| -> Result<f64> {
        let q = noise_probs.get(id as usize).copied().unwrap_or(0.0);
        if !(q > 0.0) {
            return Err(Error::Domain(format!("noise probability of id {id} is {q}")));
        }
        Ok((k * q).ln())
    };
    let mut cands = Vec::with_capacity(noise.len() + 1);
    cands.push(Candidate {
        id: target,
        positive: true,
        offset: offset(target)?,
    });
    for &id in noise {
        cands.push(Candidate {
            id,
            positive: false,
            offset: offset(id)?,
        });
    }
    Ok(candidate_grads(state, center, &cands))
}

/// Full softmax over the vocabulary for input word `w_in`. Reference
/// implementation, O(|V|·D).
pub fn softmax_distribution(state: &ModelState, w_in: WordId) -> Vec<f64> {
    let v = state.input_row(w_in);
    let logits: Vec<f64> = (0..state.vocab_size() as WordId)
        .map(|w| dot(state.output_row(w), v))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn softmax_probability(state: &ModelState, w_in: WordId, w_out: WordId) -> f64 {
    softmax_distribution(state, w_in)[w_out as usize]
}
