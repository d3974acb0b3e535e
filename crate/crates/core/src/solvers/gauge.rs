use ndarray::{s, Array2};

use super::{require_convention, GroundState};
use crate::error::{Error, Result};
use crate::rbm::{Convention, RbmParams};

/// Append one visible and one hidden unit (the ghost spins) that carry the
/// biases as couplings, producing an unbiased `(n+1) × (m+1)` model whose
/// energy equals the original one whenever both ghosts sit at `+1`.
pub fn fold_biases_into_ghosts(rbm: &RbmParams) -> Result<RbmParams> {
    require_convention(rbm, Convention::PlusMinus)?;
    let (n, m) = (rbm.n_visible(), rbm.n_hidden());
    let mut w = Array2::zeros((n + 1, m + 1));
    w.slice_mut(s![..n, ..m]).assign(&rbm.weights);
    w.slice_mut(s![..n, m]).assign(&rbm.visible_bias);
    w.slice_mut(s![n, ..m]).assign(&rbm.hidden_bias);
    RbmParams::from_weights(w, Convention::PlusMinus)
}

/// `W'_ij = W_ij v*_i h*_j`: relabel spins so the given ground state becomes
/// all `+1`. The energy spectrum is unchanged.
pub fn gauge_transform(rbm: &RbmParams, ground_state: &GroundState) -> Result<RbmParams> {
    require_convention(rbm, Convention::PlusMinus)?;
    if !rbm.is_unbiased() {
        return Err(Error::BiasedModel);
    }
    crate::rbm::check_visible(rbm, ground_state.visible.view())?;
    crate::rbm::check_hidden(rbm, ground_state.hidden.view())?;
    let weights = Array2::from_shape_fn(rbm.weights.dim(), |(i, j)| {
        rbm.weights[[i, j]] * ground_state.visible[i] * ground_state.hidden[j]
    });
    RbmParams::from_weights(weights, Convention::PlusMinus)
}

/// Fraction of coupling weight left unsatisfied by the all-`+1` ground
/// state of a gauged model: `(Σ|W| - ΣW) / (2 Σ|W|)`.
pub fn frustration_index(gauged: &RbmParams) -> Result<f64> {
    require_convention(gauged, Convention::PlusMinus)?;
    let abs_sum: f64 = gauged.weights.iter().map(|w| w.abs()).sum();
    if abs_sum == 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok((abs_sum - gauged.weights.sum()) / (2.0 * abs_sum))
}
