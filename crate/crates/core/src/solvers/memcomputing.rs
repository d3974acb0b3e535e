//! Memcomputing-style dynamical solver for weighted MAX-2-SAT.
//!
//! Continuous voltages `v_i ∈ [-1, 1]` stand for the Boolean variables and
//! every 2-clause carries a fast memory `x^f ∈ [0, 1]` and a slow memory
//! `x^s ∈ [1, 10·M2]`:
//!
//! ```text
//! dv_i/dt  = b_i + Σ_m [ W_m x^f_m x^s_m G^i_m + ρ (1 - x^f_m) R^i_m ]
//! dx^f_m/dt = β (x^f_m + ε)(C_m - 1/4)
//! dx^s_m/dt = α (1 + W_m) C_m
//! ```
//!
//! with `b_i = (W1_i - W1_ī)/2` collecting the unit clauses. The system is
//! integrated by forward Euler with an adaptive step in `[2⁻⁵, 2⁻¹]` and the
//! best thresholded assignment seen along the way is returned.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maxsat::{clause_value, Max2SatInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemcomputingParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Integration horizon.
    pub t_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Largest voltage change accepted in one step before halving `dt`.
    pub max_voltage_step: f64,
    /// Largest pre-clamp overshoot of any bound, as a fraction of the
    /// variable's range, accepted before halving `dt`.
    pub max_overshoot: f64,
    /// Consecutive accepted steps after which `dt` is doubled.
    pub grow_after: usize,
    /// Optional cap on the number of Euler steps (overrides `t_max` when
    /// reached first).
    pub max_steps: Option<usize>,
    pub record_trajectory: bool,
}

impl Default for MemcomputingParams {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 0.1,
            rho: 0.1,
            epsilon: 1e-3,
            t_max: 500.0,
            dt_min: 1.0 / 32.0,
            dt_max: 0.5,
            max_voltage_step: 0.125,
            max_overshoot: 0.25,
            grow_after: 10,
            max_steps: None,
            record_trajectory: false,
        }
    }
}

/// Snapshot of the integrator after an accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub voltages: Vec<f64>,
    pub x_fast: Vec<f64>,
    pub x_slow: Vec<f64>,
    pub time: f64,
    pub dt: f64,
    /// Upper bound of the slow memories (`10·M2`).
    pub x_slow_max: f64,
}

impl SolverState {
    /// Whether every variable sits inside its declared interval.
    pub fn within_bounds(&self) -> bool {
        self.voltages.iter().all(|v| (-1.0..=1.0).contains(v))
            && self.x_fast.iter().all(|x| (0.0..=1.0).contains(x))
            && self
                .x_slow
                .iter()
                .all(|x| (1.0..=self.x_slow_max.max(1.0)).contains(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub dt: f64,
    pub unsat_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub final_time: f64,
    /// Time at which the best assignment was first reached.
    pub best_time: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub assignment: Vec<bool>,
    pub best_unsat_weight: f64,
    pub stats: TrajectoryStats,
}

pub fn memcomputing_solve(
    instance: &Max2SatInstance,
    params: &MemcomputingParams,
    seed: u64,
) -> Result<SolveOutcome> {
    memcomputing_solve_observed(instance, params, seed, |_| {})
}

/// As [`memcomputing_solve`], calling `observer` after every accepted step.
pub fn memcomputing_solve_observed<F: FnMut(&SolverState)>(
    instance: &Max2SatInstance,
    params: &MemcomputingParams,
    seed: u64,
    mut observer: F,
) -> Result<SolveOutcome> {
    instance.validate()?;
    let n = instance.n_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voltages: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();

    if instance.is_empty() {
        let assignment = threshold(&voltages);
        return Ok(SolveOutcome {
            assignment,
            best_unsat_weight: 0.0,
            stats: TrajectoryStats::default(),
        });
    }

    let m2 = instance.binary.len();
    let x_slow_max = 10.0 * m2 as f64;
    let mut bias = vec![0.0; n];
    for c in &instance.unary {
        bias[c.literal.var] += 0.5 * c.literal.polarity() * c.weight;
    }
    let mut state = SolverState {
        voltages,
        x_fast: vec![0.0; m2],
        x_slow: instance
            .binary
            .iter()
            .map(|c| (1.0 + c.weight).clamp(1.0, x_slow_max.max(1.0)))
            .collect(),
        time: 0.0,
        dt: params.dt_max,
        x_slow_max,
    };

    let mut stats = TrajectoryStats::default();
    let mut assignment = threshold(&state.voltages);
    let mut best_unsat = instance.unsatisfied_weight(&assignment);
    let mut best = assignment.clone();
    if params.record_trajectory {
        stats.trajectory.push(TrajectoryPoint {
            time: 0.0,
            dt: state.dt,
            unsat_weight: best_unsat,
        });
    }

    let mut dv = vec![0.0; n];
    let mut dxf = vec![0.0; m2];
    let mut dxs = vec![0.0; m2];
    let mut streak = 0usize;
    let step_cap = params.max_steps.unwrap_or(usize::MAX);

    while state.time < params.t_max && stats.steps < step_cap {
        derivatives(instance, params, &bias, &state, &mut dv, &mut dxf, &mut dxs);

        let mut dt = state.dt;
        while dt > params.dt_min && !step_acceptable(params, &state, &dv, &dxf, &dxs, dt) {
            dt = (dt * 0.5).max(params.dt_min);
            stats.rejected_steps += 1;
            streak = 0;
        }

        for (v, d) in state.voltages.iter_mut().zip(&dv) {
            *v = (*v + dt * d).clamp(-1.0, 1.0);
        }
        for (x, d) in state.x_fast.iter_mut().zip(&dxf) {
            *x = (*x + dt * d).clamp(0.0, 1.0);
        }
        for (x, d) in state.x_slow.iter_mut().zip(&dxs) {
            *x = (*x + dt * d).clamp(1.0, x_slow_max);
        }
        state.time += dt;
        state.dt = dt;
        stats.steps += 1;
        streak += 1;

        if !(state.voltages.iter().all(|v| v.is_finite())
            && state.x_fast.iter().all(|x| x.is_finite())
            && state.x_slow.iter().all(|x| x.is_finite()))
        {
            return Err(Error::SolverDiverged {
                time: state.time,
                dt,
            });
        }

        for (a, &v) in assignment.iter_mut().zip(&state.voltages) {
            *a = v >= 0.0;
        }
        let unsat = instance.unsatisfied_weight(&assignment);
        if unsat < best_unsat {
            best_unsat = unsat;
            best.copy_from_slice(&assignment);
            stats.best_time = state.time;
        }
        if params.record_trajectory {
            stats.trajectory.push(TrajectoryPoint {
                time: state.time,
                dt,
                unsat_weight: unsat,
            });
        }
        observer(&state);

        if streak >= params.grow_after && state.dt < params.dt_max {
            state.dt = (state.dt * 2.0).min(params.dt_max);
            streak = 0;
        }
    }
    stats.final_time = state.time;
    Ok(SolveOutcome {
        assignment: best,
        best_unsat_weight: best_unsat,
        stats,
    })
}

fn threshold(voltages: &[f64]) -> Vec<bool> {
    voltages.iter().map(|&v| v >= 0.0).collect()
}

fn derivatives(
    instance: &Max2SatInstance,
    params: &MemcomputingParams,
    bias: &[f64],
    state: &SolverState,
    dv: &mut [f64],
    dxf: &mut [f64],
    dxs: &mut [f64],
) {
    dv.copy_from_slice(bias);
    let v = &state.voltages;
    for (k, clause) in instance.binary.iter().enumerate() {
        let [li, lj] = clause.literals;
        let (qi, qj) = (li.polarity(), lj.polarity());
        let ci = 1.0 - qi * v[li.var];
        let cj = 1.0 - qj * v[lj.var];
        let c = clause_value(v, clause);
        let xf = state.x_fast[k];
        let xs = state.x_slow[k];
        let drive = clause.weight * xf * xs;
        let rigidity = params.rho * (1.0 - xf);
        // Gradient-like term: each literal is pushed by the other's violation.
        dv[li.var] += drive * qi * 0.5 * cj;
        dv[lj.var] += drive * qj * 0.5 * ci;
        // Rigidity acts on whichever literal is closest to satisfaction.
        if ci <= cj {
            dv[li.var] += rigidity * qi * 0.5 * ci;
        }
        if cj <= ci {
            dv[lj.var] += rigidity * qj * 0.5 * cj;
        }
        dxf[k] = params.beta * (xf + params.epsilon) * (c - 0.25);
        dxs[k] = params.alpha * (1.0 + clause.weight) * c;
    }
}

fn step_acceptable(
    params: &MemcomputingParams,
    state: &SolverState,
    dv: &[f64],
    dxf: &[f64],
    dxs: &[f64],
    dt: f64,
) -> bool {
    let overshoot = |x: f64, lo: f64, hi: f64| -> bool {
        let limit = params.max_overshoot * (hi - lo);
        x < lo - limit || x > hi + limit
    };
    for (v, d) in state.voltages.iter().zip(dv) {
        let step = dt * d;
        if step.abs() > params.max_voltage_step || overshoot(v + step, -1.0, 1.0) {
            return false;
        }
    }
    for (x, d) in state.x_fast.iter().zip(dxf) {
        if overshoot(x + dt * d, 0.0, 1.0) {
            return false;
        }
    }
    for (x, d) in state.x_slow.iter().zip(dxs) {
        if overshoot(x + dt * d, 1.0, state.x_slow_max) {
            return false;
        }
    }
    true
}

/// CSV export of a recorded trajectory: `time,dt,unsat_weight`.
pub fn write_trajectory_csv<W: Write>(stats: &TrajectoryStats, mut out: W) -> Result<()> {
    writeln!(out, "time,dt,unsat_weight")?;
    for p in &stats.trajectory {
        writeln!(out, "{},{},{}", p.time, p.dt, p.unsat_weight)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::maxsat::{Literal, UnaryClause};

    #[test]
    fn unary_clause_drives_variable_true() {
        let inst = Max2SatInstance::new(
            1,
            vec![UnaryClause {
                literal: Literal::pos(0),
                weight: 2.0,
            }],
            vec![],
        )
        .unwrap();
        for seed in 0..5 {
            let out = memcomputing_solve(&inst, &MemcomputingParams::default(), seed).unwrap();
            assert_eq!(out.assignment, vec![true]);
            assert_eq!(out.best_unsat_weight, 0.0);
        }
    }

    #[test]
    fn empty_instance_returns_zero_weight() {
        let inst = Max2SatInstance::new(3, vec![], vec![]).unwrap();
        let out = memcomputing_solve(&inst, &MemcomputingParams::default(), 1).unwrap();
        assert_eq!(out.assignment.len(), 3);
        assert_eq!(out.best_unsat_weight, 0.0);
    }

    #[test]
    fn step_cap_limits_integration() {
        let inst = Max2SatInstance::new(
            2,
            vec![],
            vec![crate::solvers::BinaryClause {
                literals: [Literal::pos(0), Literal::neg(1)],
                weight: 1.0,
            }],
        )
        .unwrap();
        let params = MemcomputingParams {
            max_steps: Some(7),
            record_trajectory: true,
            ..Default::default()
        };
        let out = memcomputing_solve(&inst, &params, 0).unwrap();
        assert_eq!(out.stats.steps, 7);
        assert_eq!(out.stats.trajectory.len(), 8);
        let mut csv = Vec::new();
        write_trajectory_csv(&out.stats, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("time,dt,unsat_weight\n0,0.5,"));
    }
}
