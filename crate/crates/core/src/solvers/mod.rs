//! Ground-state (joint mode) search for RBM energies.

mod gauge;
mod maxsat;
mod memcomputing;

use std::cmp::Ordering;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use gauge::{fold_biases_into_ghosts, frustration_index, gauge_transform};
pub use maxsat::{
    clause_value, read_wcnf, rbm_to_max2sat, write_wcnf, BinaryClause, Literal, Max2SatInstance,
    UnaryClause,
};
pub use memcomputing::{
    memcomputing_solve, memcomputing_solve_observed, write_trajectory_csv, MemcomputingParams,
    SolveOutcome, SolverState, TrajectoryPoint, TrajectoryStats,
};

use crate::error::{Error, Result};
use crate::rbm::{
    check_enumerable, configuration, convert_convention, energy_unchecked, Convention, NodeState,
    RbmParams,
};

/// Minimum-energy configuration `(v*, h*)` with its energy `E0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub visible: Array1<f64>,
    pub hidden: Array1<f64>,
    pub energy: f64,
    /// `true` when produced by exhaustive enumeration.
    pub exact: bool,
}

impl GroundState {
    pub fn state(&self) -> NodeState {
        NodeState::new(self.visible.clone(), self.hidden.clone())
    }
}

/// Energies closer than this (relative to their magnitude) count as ties.
fn tie_tolerance(e: f64) -> f64 {
    1e-12 * e.abs().max(1.0)
}

/// Ordering used to break ties between degenerate states: lexicographic on
/// `(v, h)` with the convention's preferred symbol first.
fn tie_order(convention: Convention, a: &NodeState, b: &NodeState) -> Ordering {
    let key = |s: &NodeState| -> Vec<bool> {
        s.visible
            .iter()
            .chain(s.hidden.iter())
            .map(|&x| x != convention.preferred())
            .collect::<Vec<_>>()
    };
    key(a).cmp(&key(b))
}

/// Value of a unit minimising `-field · x`; exact zero fields take the
/// preferred symbol.
#[inline]
fn best_response(convention: Convention, field: f64) -> f64 {
    if field > 0.0 {
        convention.high()
    } else if field < 0.0 {
        convention.low()
    } else {
        convention.preferred()
    }
}

/// Exact ground state by enumerating the smaller layer and setting every
/// unit of the other layer to its closed-form optimum. Degenerate minima are
/// resolved towards the lexicographically first `(v, h)`, reading the
/// preferred symbol (`0`, or `+1` for `±1` models) as the smaller one.
pub fn exhaustive_ground_state(rbm: &RbmParams) -> Result<GroundState> {
    let conv = rbm.convention;
    let enumerate_visible = rbm.n_visible() <= rbm.n_hidden();
    let model = if enumerate_visible {
        rbm.clone()
    } else {
        rbm.transposed()
    };
    let len = model.n_visible();
    check_enumerable(len)?;

    let mut best: Option<(f64, NodeState)> = None;
    for index in 0..(1u64 << len) {
        let x = configuration(index, len, conv);
        let field = model.hidden_field(x.view());
        let y = field.mapv(|f| best_response(conv, f));
        let e = -model.visible_bias.dot(&x) - field.dot(&y);
        let candidate = if enumerate_visible {
            NodeState::new(x, y)
        } else {
            NodeState::new(y, x)
        };
        let replace = match &best {
            None => true,
            Some((best_e, best_state)) => {
                let tol = tie_tolerance(*best_e);
                e < best_e - tol
                    || ((e - best_e).abs() <= tol
                        && tie_order(conv, &candidate, best_state) == Ordering::Less)
            }
        };
        if replace {
            best = Some((e, candidate));
        }
    }
    let (_, state) = best.expect("at least one configuration is enumerated");
    let energy = energy_unchecked(rbm, state.visible.view(), state.hidden.view());
    Ok(GroundState {
        visible: state.visible,
        hidden: state.hidden,
        energy,
        exact: true,
    })
}

/// How the training loop locates the joint mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeMethod {
    Exhaustive,
    Memcomputing,
}

/// Locate the joint mode of `rbm` with the requested method.
///
/// The memcomputing path converts the model to `±1` form, encodes it as a
/// weighted MAX-2-SAT instance, integrates the solver and maps the best
/// assignment back into the model's own alphabet. If the global flip of the
/// returned state is an exact tie it is replaced by whichever of the pair
/// comes first in the exhaustive tie order.
pub fn sample_mode(
    rbm: &RbmParams,
    method: ModeMethod,
    params: &MemcomputingParams,
    seed: u64,
) -> Result<GroundState> {
    match method {
        ModeMethod::Exhaustive => exhaustive_ground_state(rbm),
        ModeMethod::Memcomputing => {
            let (pm, _) = convert_convention(rbm, Convention::PlusMinus);
            let instance = rbm_to_max2sat(&pm)?;
            let outcome = memcomputing_solve(&instance, params, seed)?;
            let n = rbm.n_visible();
            let conv = rbm.convention;
            let visible: Array1<f64> = outcome.assignment[..n]
                .iter()
                .map(|&b| conv.from_bit(b))
                .collect();
            let hidden: Array1<f64> = outcome.assignment[n..]
                .iter()
                .map(|&b| conv.from_bit(b))
                .collect();
            let mut state = NodeState::new(visible, hidden);
            let mut energy = energy_unchecked(rbm, state.visible.view(), state.hidden.view());
            let flipped = state.flipped(conv);
            let flipped_energy =
                energy_unchecked(rbm, flipped.visible.view(), flipped.hidden.view());
            if (flipped_energy - energy).abs() <= tie_tolerance(energy)
                && tie_order(conv, &flipped, &state) == Ordering::Less
            {
                state = flipped;
                energy = flipped_energy;
            }
            Ok(GroundState {
                visible: state.visible,
                hidden: state.hidden,
                energy,
                exact: false,
            })
        }
    }
}

pub(crate) fn require_convention(rbm: &RbmParams, expected: Convention) -> Result<()> {
    if rbm.convention != expected {
        return Err(Error::ConventionMismatch {
            expected,
            found: rbm.convention,
        });
    }
    Ok(())
}
