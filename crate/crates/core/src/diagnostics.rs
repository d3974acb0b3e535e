//! Measurable quantities behind mode training: spin distance, energy laws
//! under the pure mode update, hidden certainty, joint/marginal mode
//! agreement, the hidden-certainty training curve and the solver-vs-CD
//! benchmark.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::shifting_bar;
use crate::error::{Error, Result};
use crate::rbm::{
    check_hidden, check_visible, configuration, energy_unchecked, for_each_state,
    gibbs_step_unchecked, log_marginal_unchecked, log_unit_partition, Convention, NodeState, RbmParams,
};
use crate::solvers::{
    exhaustive_ground_state, memcomputing_solve, rbm_to_max2sat, require_convention,
    GroundState, MemcomputingParams,
};
use crate::training::{LearningRate, TrainConfig, Trainer, TrainingData};

/// Largest `n + m` accepted by the full-spectrum checks.
pub const SPECTRUM_CAP: usize = 16;

/// Largest visible layer accepted by [`marginal_mode`].
pub const MARGINAL_MODE_CAP: usize = 24;

fn check_spectrum(rbm: &RbmParams) -> Result<()> {
    let size = rbm.n_visible() + rbm.n_hidden();
    if size > SPECTRUM_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: SPECTRUM_CAP,
        });
    }
    Ok(())
}

fn require_unbiased_pm(rbm: &RbmParams) -> Result<()> {
    require_convention(rbm, Convention::PlusMinus)?;
    if !rbm.is_unbiased() {
        return Err(Error::BiasedModel);
    }
    Ok(())
}

/// Numbers of differing visible and hidden units.
fn layer_differences(s1: &NodeState, s2: &NodeState) -> Result<(usize, usize)> {
    if s1.visible.len() != s2.visible.len() {
        return Err(Error::DimensionMismatch {
            what: "visible layer",
            expected: s1.visible.len(),
            found: s2.visible.len(),
        });
    }
    if s1.hidden.len() != s2.hidden.len() {
        return Err(Error::DimensionMismatch {
            what: "hidden layer",
            expected: s1.hidden.len(),
            found: s2.hidden.len(),
        });
    }
    for &x in s1.visible.iter().chain(&s1.hidden).chain(&s2.visible).chain(&s2.hidden) {
        if !Convention::PlusMinus.contains(x) {
            return Err(Error::Alphabet {
                value: x,
                convention: Convention::PlusMinus,
            });
        }
    }
    let nv = s1.visible.iter().zip(&s2.visible).filter(|(a, b)| a != b).count();
    let mh = s1.hidden.iter().zip(&s2.hidden).filter(|(a, b)| a != b).count();
    Ok((nv, mh))
}

#[inline]
fn distance_from_counts(nv: usize, mh: usize, n: usize, m: usize) -> f64 {
    let (nv, mh, n, m) = (nv as f64, mh as f64, n as f64, m as f64);
    nv / n + mh / m - 2.0 * nv * mh / (n * m)
}

/// `d = n_v/n + m_h/m - 2 n_v m_h/(nm)` between two `±1` states.
pub fn spin_distance(s1: &NodeState, s2: &NodeState) -> Result<f64> {
    let (nv, mh) = layer_differences(s1, s2)?;
    Ok(distance_from_counts(nv, mh, s1.visible.len(), s1.hidden.len()))
}

/// Energies of all states binned by distance from the all-`+1` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    /// Sorted attained distances.
    pub distances: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub state_counts: Vec<u64>,
    /// Energy of the all-`+1` state.
    pub e0: f64,
}

impl DistanceProfile {
    /// Largest deviation of a bin mean from `(1 - 2d) E0`.
    pub fn max_law_error(&self) -> f64 {
        self.distances
            .iter()
            .zip(&self.mean_energy)
            .map(|(d, e)| (e - (1.0 - 2.0 * d) * self.e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "d,mean_energy,state_count,predicted")?;
        for ((d, e), c) in self.distances.iter().zip(&self.mean_energy).zip(&self.state_counts) {
            writeln!(out, "{d},{e},{c},{}", (1.0 - 2.0 * d) * self.e0)?;
        }
        Ok(())
    }
}

/// Visit every state of a `±1` model with its distance from all `+1`,
/// keyed by the integer `d·nm`.
fn for_each_state_with_distance<F: FnMut(i64, f64)>(rbm: &RbmParams, mut f: F) -> Result<()> {
    let (n, m) = (rbm.n_visible() as i64, rbm.n_hidden() as i64);
    for_each_state(rbm, |v, h, e| {
        let nv = v.iter().filter(|&&x| x < 0.0).count() as i64;
        let mh = h.iter().filter(|&&x| x < 0.0).count() as i64;
        f(nv * m + mh * n - 2 * nv * mh, e);
    })
}

/// Bin all `2^(n+m)` states of an unbiased `±1` model by distance from the
/// all-`+1` state and average their energies.
pub fn distance_profile(gauged: &RbmParams) -> Result<DistanceProfile> {
    require_unbiased_pm(gauged)?;
    check_spectrum(gauged)?;
    let nm = (gauged.n_visible() * gauged.n_hidden()) as f64;
    let mut bins: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for_each_state_with_distance(gauged, |key, e| {
        let bin = bins.entry(key).or_insert((0.0, 0));
        bin.0 += e;
        bin.1 += 1;
    })?;
    let e0 = -gauged.weights.sum();
    let mut profile = DistanceProfile {
        distances: Vec::with_capacity(bins.len()),
        mean_energy: Vec::with_capacity(bins.len()),
        state_counts: Vec::with_capacity(bins.len()),
        e0,
    };
    for (key, (sum, count)) in bins {
        profile.distances.push(key as f64 / nm);
        profile.mean_energy.push(sum / count as f64);
        profile.state_counts.push(count);
    }
    Ok(profile)
}

/// Outcome of the energy-change law check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyChangeReport {
    pub gamma: f64,
    pub states: u64,
    /// Largest `|ΔE - γ nm (1 - 2d)|` over all states.
    pub max_abs_error: f64,
    /// `ΔE` of the all-`+1` state.
    pub ground_state_change: f64,
}

/// Applies `W_ij -= γ` (the pure mode update of a gauged model) and
/// compares every state's energy change with `γ nm (1 - 2d)`.
pub fn energy_change_check(gauged: &RbmParams, gamma: f64) -> Result<EnergyChangeReport> {
    require_unbiased_pm(gauged)?;
    check_spectrum(gauged)?;
    let (n, m) = (gauged.n_visible(), gauged.n_hidden());
    let nm = (n * m) as f64;
    let updated = RbmParams::from_weights(&gauged.weights - gamma, Convention::PlusMinus)?;
    let mut report = EnergyChangeReport {
        gamma,
        states: 0,
        max_abs_error: 0.0,
        ground_state_change: 0.0,
    };
    for_each_state(gauged, |v, h, e| {
        let e_new = energy_unchecked(&updated, v.view(), h.view());
        let nv = v.iter().filter(|&&x| x < 0.0).count();
        let mh = h.iter().filter(|&&x| x < 0.0).count();
        let d = distance_from_counts(nv, mh, n, m);
        let delta = e_new - e;
        report.max_abs_error = report.max_abs_error.max((delta - gamma * nm * (1.0 - 2.0 * d)).abs());
        if nv == 0 && mh == 0 {
            report.ground_state_change = delta;
        }
        report.states += 1;
    })?;
    Ok(report)
}

/// Unweighted variance of `E(v, h)` over every joint state.
pub fn energy_variance(rbm: &RbmParams) -> Result<f64> {
    check_spectrum(rbm)?;
    let mut count = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for_each_state(rbm, |_, _, e| {
        count += 1.0;
        let delta = e - mean;
        mean += delta / count;
        m2 += delta * (e - mean);
    })?;
    Ok(m2 / count)
}

/// `W -= γ v* h*ᵀ`: the model term of a mode update without the data term.
pub fn pure_mode_update(rbm: &RbmParams, mode: &GroundState, gamma: f64) -> Result<RbmParams> {
    check_visible(rbm, mode.visible.view())?;
    check_hidden(rbm, mode.hidden.view())?;
    let v = mode.visible.view().insert_axis(Axis(1));
    let h = mode.hidden.view().insert_axis(Axis(0));
    let mut out = rbm.clone();
    out.weights.scaled_add(-gamma, &v.dot(&h));
    Ok(out)
}

/// Energy variance after a pure mode update, scanned over `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub e0: f64,
    pub initial_variance: f64,
    pub gammas: Vec<f64>,
    pub variances: Vec<f64>,
    /// `-E0 / (nm)`.
    pub gamma_star: f64,
    /// `-2 E0 / (nm)`.
    pub gamma_bound: f64,
    /// Grid point with the smallest variance.
    pub grid_minimizer: f64,
    pub grid_step: f64,
    /// Least-squares coefficients `[c0, c1, c2]` of `c0 + c1 γ + c2 γ²`.
    pub quadratic: [f64; 3],
    /// Largest absolute residual of the quadratic fit.
    pub fit_residual: f64,
}

impl VarianceScan {
    /// Whether every grid point strictly inside `(0, γ_bound)` lowers the
    /// variance. Grid points within rounding of either end count as the end.
    pub fn decreases_inside_bound(&self) -> bool {
        let slack = 1e-9 * self.grid_step;
        self.gammas
            .iter()
            .zip(&self.variances)
            .filter(|(g, _)| **g > slack && **g < self.gamma_bound - slack)
            .all(|(_, v)| *v < self.initial_variance)
    }

    pub fn minimizer_within_one_cell(&self) -> bool {
        (self.grid_minimizer - self.gamma_star).abs() <= self.grid_step * (1.0 + 1e-9)
    }
}

/// Scan `γ` over `points` evenly spaced values in `[0, 1.5·γ_bound]` for an
/// unbiased `±1` model, applying the pure mode update of its exhaustive
/// ground state.
pub fn variance_scan(rbm: &RbmParams, points: usize) -> Result<VarianceScan> {
    require_unbiased_pm(rbm)?;
    check_spectrum(rbm)?;
    if points < 3 {
        return Err(Error::InvalidArgument("variance scan needs at least 3 points".into()));
    }
    let gs = exhaustive_ground_state(rbm)?;
    let nm = (rbm.n_visible() * rbm.n_hidden()) as f64;
    let gamma_star = -gs.energy / nm;
    let gamma_bound = 2.0 * gamma_star;
    let top = 1.5 * gamma_bound;
    let step = top / (points - 1) as f64;
    let gammas: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
    let variances = gammas
        .iter()
        .map(|&g| energy_variance(&pure_mode_update(rbm, &gs, g)?))
        .collect::<Result<Vec<_>>>()?;
    let grid_minimizer = gammas[variances
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)];
    let quadratic = fit_quadratic(&gammas, &variances)?;
    let fit_residual = gammas
        .iter()
        .zip(&variances)
        .map(|(g, v)| (quadratic[0] + quadratic[1] * g + quadratic[2] * g * g - v).abs())
        .fold(0.0, f64::max);
    Ok(VarianceScan {
        e0: gs.energy,
        initial_variance: variances[0],
        gammas,
        variances,
        gamma_star,
        gamma_bound,
        grid_minimizer,
        grid_step: step,
        quadratic,
        fit_residual,
    })
}

/// Least-squares quadratic through `(x, y)` via the normal equations.
fn fit_quadratic(x: &[f64], y: &[f64]) -> Result<[f64; 3]> {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let p = [1.0, xi, xi * xi];
        for r in 0..3 {
            b[r] += p[r] * yi;
            for c in 0..3 {
                a[r][c] += p[r] * p[c];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the 3×3 system.
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidArgument("degenerate quadratic fit".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut coef = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|c| a[row][c] * coef[c]).sum();
        coef[row] = (b[row] - tail) / a[row][row];
    }
    Ok(coef)
}

/// `ln r(v) = Σ_j ln max(p_j, 1 - p_j)`.
pub fn log_hidden_certainty(rbm: &RbmParams, v: &Array1<f64>) -> Result<f64> {
    check_visible(rbm, v.view())?;
    let scale = match rbm.convention {
        Convention::ZeroOne => 1.0,
        Convention::PlusMinus => 2.0,
    };
    // max(σ(x), σ(-x)) = σ(|x|) and ln σ(|x|) = -softplus(-|x|).
    Ok(rbm
        .hidden_field(v.view())
        .iter()
        .map(|&x| -crate::math::softplus(-scale * x.abs()))
        .sum())
}

/// `r(v) = max_h p(h | v)`, the probability of the most likely hidden
/// configuration given `v`.
pub fn hidden_certainty(rbm: &RbmParams, v: &Array1<f64>) -> Result<f64> {
    Ok(log_hidden_certainty(rbm, v)?.exp())
}

/// Mode of the visible marginal and its unnormalised log probability.
///
/// Depth-first branch and bound over the visible units. The bound replaces
/// each free unit's contribution by its best case separately in the bias
/// term and in every hidden unit's field, which is valid because the
/// per-unit log partition is convex in its field. Ties resolve to the first
/// state in enumeration order (preferred symbol first).
pub fn marginal_mode(rbm: &RbmParams) -> Result<(Array1<f64>, f64)> {
    let n = rbm.n_visible();
    if n > MARGINAL_MODE_CAP {
        return Err(Error::EnumerationCap {
            size: n,
            cap: MARGINAL_MODE_CAP,
        });
    }
    let conv = rbm.convention;
    let m = rbm.n_hidden();
    let first = conv.preferred();
    let second = conv.other();
    let w = &rbm.weights;
    // Suffix sums of the smallest/largest possible contribution of units
    // i.. to each hidden field and to the bias term.
    let mut field_lo = Array2::<f64>::zeros((n + 1, m));
    let mut field_hi = Array2::<f64>::zeros((n + 1, m));
    let mut bias_hi = vec![0.0; n + 1];
    for i in (0..n).rev() {
        for j in 0..m {
            let (a, b) = (w[[i, j]] * conv.low(), w[[i, j]] * conv.high());
            field_lo[[i, j]] = field_lo[[i + 1, j]] + a.min(b);
            field_hi[[i, j]] = field_hi[[i + 1, j]] + a.max(b);
        }
        let (a, b) = (rbm.visible_bias[i] * conv.low(), rbm.visible_bias[i] * conv.high());
        bias_hi[i] = bias_hi[i + 1] + a.max(b);
    }

    struct Search<'a> {
        rbm: &'a RbmParams,
        conv: Convention,
        symbols: [f64; 2],
        field_lo: Array2<f64>,
        field_hi: Array2<f64>,
        bias_hi: Vec<f64>,
        v: Vec<f64>,
        best: f64,
        best_v: Vec<f64>,
    }

    impl Search<'_> {
        fn bound(&self, depth: usize, bias: f64, field: &[f64]) -> f64 {
            let conv = self.conv;
            let mut total = bias + self.bias_hi[depth];
            for (j, &f) in field.iter().enumerate() {
                let lo = f + self.field_lo[[depth, j]];
                let hi = f + self.field_hi[[depth, j]];
                total += log_unit_partition(conv, lo).max(log_unit_partition(conv, hi));
            }
            total
        }

        fn visit(&mut self, depth: usize, bias: f64, field: &mut Vec<f64>) {
            let n = self.v.len();
            if depth == n {
                let value = bias
                    + field
                        .iter()
                        .map(|&f| log_unit_partition(self.conv, f))
                        .sum::<f64>();
                if value > self.best + 1e-12 * value.abs().max(1.0) || self.best_v.is_empty() {
                    self.best = value;
                    self.best_v.clone_from(&self.v);
                }
                return;
            }
            for x in self.symbols {
                self.v[depth] = x;
                let bias_next = bias + self.rbm.visible_bias[depth] * x;
                if x != 0.0 {
                    for (j, f) in field.iter_mut().enumerate() {
                        *f += self.rbm.weights[[depth, j]] * x;
                    }
                }
                let prune = !self.best_v.is_empty()
                    && self.bound(depth + 1, bias_next, field)
                        <= self.best + 1e-12 * self.best.abs().max(1.0);
                if !prune {
                    self.visit(depth + 1, bias_next, field);
                }
                if x != 0.0 {
                    for (j, f) in field.iter_mut().enumerate() {
                        *f -= self.rbm.weights[[depth, j]] * x;
                    }
                }
            }
        }
    }

    let mut search = Search {
        rbm,
        conv,
        symbols: [first, second],
        field_lo,
        field_hi,
        bias_hi,
        v: vec![0.0; n],
        best: f64::NEG_INFINITY,
        best_v: Vec::new(),
    };
    let mut field = rbm.hidden_bias.to_vec();
    search.visit(0, 0.0, &mut field);
    Ok((Array1::from(search.best_v), search.best))
}

/// Joint-mode vs marginal-mode comparison for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalCorrespondence {
    pub joint_mode_v: Array1<f64>,
    pub marginal_mode_v: Array1<f64>,
    pub equal: bool,
    /// `r(v⁺)` at the marginal mode.
    pub r_at_marginal_mode: f64,
}

pub fn modal_correspondence(rbm: &RbmParams) -> Result<ModalCorrespondence> {
    let joint = exhaustive_ground_state(rbm)?;
    let (marginal, best) = marginal_mode(rbm)?;
    let r = hidden_certainty(rbm, &marginal)?;
    // Ties count: the joint mode's visible part only has to attain the
    // marginal maximum.
    let at_joint = log_marginal_unchecked(rbm, joint.visible.view());
    let equal = joint.visible == marginal || at_joint >= best - 1e-12 * best.abs().max(1.0);
    Ok(ModalCorrespondence {
        equal,
        joint_mode_v: joint.visible,
        marginal_mode_v: marginal,
        r_at_marginal_mode: r,
    })
}

/// Wilson score lower bound for a binomial proportion.
pub fn wilson_lower_bound(successes: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (centre - spread) / (1.0 + z2 / n)
}

/// Moving average over full windows only: output `k` is the mean of
/// `values[k..k + window]`. Empty when there are fewer than `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    if values.len() < window {
        return Vec::new();
    }
    let mut sum: f64 = values[..window].iter().sum();
    let mut out = Vec::with_capacity(values.len() - window + 1);
    out.push(sum / window as f64);
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}

/// Ensemble of CD-1 runs on a shifting bar tracking `r(v⁺)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyCurveConfig {
    pub length: usize,
    pub bar: usize,
    pub n_hidden: usize,
    pub models: usize,
    pub n_updates: usize,
    pub eval_every: usize,
    pub learning_rate: f64,
    pub init_std: f64,
    pub seed_base: u64,
}

impl Default for CertaintyCurveConfig {
    fn default() -> Self {
        CertaintyCurveConfig {
            length: 15,
            bar: 7,
            n_hidden: 10,
            models: 200,
            n_updates: 5000,
            eval_every: 10,
            learning_rate: 0.1,
            init_std: 0.1,
            seed_base: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub mean_r: f64,
    /// Population standard deviation across the ensemble.
    pub sigma_r: f64,
    pub baseline_r: f64,
    pub baseline_sigma: f64,
}

/// Runs the ensemble in parallel. Each model uses its own seed
/// (`seed_base + index`) and keeps one random visible configuration, drawn
/// once, as the baseline.
pub fn certainty_curve(cfg: &CertaintyCurveConfig) -> Result<Vec<CurvePoint>> {
    if cfg.models == 0 || cfg.eval_every == 0 {
        return Err(Error::InvalidArgument(
            "models and eval_every must be positive".into(),
        ));
    }
    let data = shifting_bar(cfg.length, cfg.bar, false)?;
    let runs: Vec<Vec<(f64, f64)>> = (0..cfg.models)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.seed_base + k as u64;
            let mut tc = TrainConfig::new(
                cfg.n_hidden,
                cfg.n_updates,
                LearningRate::Constant {
                    rate: cfg.learning_rate,
                },
            );
            tc.seed = seed;
            tc.init_std = cfg.init_std;
            let mut trainer = Trainer::new(tc, TrainingData::Distribution(&data))?;
            let mut baseline_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e);
            let baseline: Array1<f64> = (0..cfg.length)
                .map(|_| f64::from(baseline_rng.gen::<bool>() as u8))
                .collect();
            let mut trace = Vec::new();
            loop {
                if trainer.iteration() % cfg.eval_every == 0 || trainer.is_finished() {
                    let (mode, _) = marginal_mode(trainer.rbm())?;
                    trace.push((
                        hidden_certainty(trainer.rbm(), &mode)?,
                        hidden_certainty(trainer.rbm(), &baseline)?,
                    ));
                }
                if trainer.is_finished() {
                    break;
                }
                trainer.step()?;
            }
            Ok(trace)
        })
        .collect::<Result<_>>()?;

    let mut iters: Vec<usize> = (0..=cfg.n_updates).step_by(cfg.eval_every).collect();
    if !cfg.n_updates.is_multiple_of(cfg.eval_every) {
        iters.push(cfg.n_updates);
    }
    let count = cfg.models as f64;
    Ok(iters
        .iter()
        .enumerate()
        .map(|(t, &iter)| {
            let (mut sr, mut sr2, mut sb, mut sb2) = (0.0, 0.0, 0.0, 0.0);
            for run in &runs {
                let (r, b) = run[t];
                sr += r;
                sr2 += r * r;
                sb += b;
                sb2 += b * b;
            }
            let mean_r = sr / count;
            let baseline_r = sb / count;
            CurvePoint {
                iter,
                mean_r,
                sigma_r: (sr2 / count - mean_r * mean_r).max(0.0).sqrt(),
                baseline_r,
                baseline_sigma: (sb2 / count - baseline_r * baseline_r).max(0.0).sqrt(),
            }
        })
        .collect())
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "iter,mean_r,sigma_r,baseline_r")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.iter, p.mean_r, p.sigma_r, p.baseline_r)?;
    }
    Ok(())
}

/// Settings of the memcomputing-vs-CD comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Models are `size × size`.
    pub size: usize,
    pub seeds: usize,
    pub seed_base: u64,
    /// Euler steps given to the solver; `None` means `2·size`.
    pub solver_steps: Option<usize>,
    /// Gibbs sweeps per Euler step. Measured locally when absent.
    pub exchange_rate: Option<f64>,
    pub weight_std: f64,
    pub solver: MemcomputingParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            size: 100,
            seeds: 10,
            seed_base: 0,
            solver_steps: None,
            exchange_rate: None,
            weight_std: 0.1,
            solver: MemcomputingParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub e_mem: f64,
    pub e_cd: f64,
    pub delta_pct: f64,
    pub solver_steps: usize,
    pub cd_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub size: usize,
    pub exchange_rate: f64,
    pub exchange_rate_measured: bool,
    pub rows: Vec<BenchRow>,
    pub median_delta_pct: f64,
    pub mem_seconds: f64,
    pub cd_seconds: f64,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed,e_mem,e_cd,delta_pct,solver_steps,cd_sweeps")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seed, r.e_mem, r.e_cd, r.delta_pct, r.solver_steps, r.cd_sweeps
            )?;
        }
        Ok(())
    }
}

/// `Δε% = 100 (E_mem - E_cd) / E_cd`; positive when the solver reached a
/// lower (negative) energy than CD.
pub fn relative_energy_difference(e_mem: f64, e_cd: f64) -> f64 {
    if e_mem == e_cd {
        return 0.0;
    }
    100.0 * (e_mem - e_cd) / e_cd
}

fn bench_model(size: usize, std: f64, seed: u64) -> Result<RbmParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let w = Array2::from_shape_simple_fn((size, size), || normal.sample(&mut rng));
    RbmParams::from_weights(w, Convention::PlusMinus)
}

/// Lowest joint energy visited by a single Gibbs chain of `sweeps` sweeps
/// from a random visible start.
fn cd_lowest_energy(rbm: &RbmParams, sweeps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = (0..rbm.n_visible())
        .map(|_| rbm.convention.from_bit(rng.gen()))
        .collect();
    let mut best = f64::INFINITY;
    for _ in 0..sweeps {
        let s = gibbs_step_unchecked(rbm, v.view(), &mut rng);
        best = best.min(energy_unchecked(rbm, v.view(), s.hidden.view()));
        v = s.visible;
    }
    best.min(energy_unchecked(
        rbm,
        v.view(),
        rbm.hidden_field(v.view())
            .mapv(|f| if f >= 0.0 { 1.0 } else { -1.0 })
            .view(),
    ))
}

/// Measures Gibbs sweeps per Euler step on a `size × size` model.
pub fn measure_exchange_rate(size: usize, params: &MemcomputingParams) -> Result<f64> {
    let rbm = bench_model(size, 0.1, u64::MAX)?;
    let instance = rbm_to_max2sat(&rbm)?;
    let steps = 50;
    let solver = MemcomputingParams {
        max_steps: Some(steps),
        ..params.clone()
    };
    let t = Instant::now();
    memcomputing_solve(&instance, &solver, 0)?;
    let per_step = t.elapsed().as_secs_f64() / steps as f64;
    let sweeps = 200;
    let t = Instant::now();
    cd_lowest_energy(&rbm, sweeps, 0);
    let per_sweep = t.elapsed().as_secs_f64() / sweeps as f64;
    Ok((per_step / per_sweep.max(1e-12)).max(1.0))
}

/// Random `N × N` unbiased `±1` models: memcomputing for a fixed number of
/// Euler steps against a Gibbs chain given the equivalent number of sweeps.
pub fn benchmark_solver_vs_cd(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.size == 0 || cfg.seeds == 0 {
        return Err(Error::InvalidArgument("size and seeds must be positive".into()));
    }
    let (rate, measured) = match cfg.exchange_rate {
        Some(r) if r > 0.0 => (r, false),
        Some(r) => return Err(Error::InvalidArgument(format!("invalid exchange rate {r}"))),
        None => (measure_exchange_rate(cfg.size, &cfg.solver)?, true),
    };
    let steps = cfg.solver_steps.unwrap_or(2 * cfg.size);
    let sweeps = ((steps as f64) * rate).round().max(1.0) as usize;
    let solver = MemcomputingParams {
        max_steps: Some(steps),
        t_max: f64::INFINITY,
        ..cfg.solver.clone()
    };
    let mut rows = Vec::with_capacity(cfg.seeds);
    let (mut mem_seconds, mut cd_seconds) = (0.0, 0.0);
    for k in 0..cfg.seeds {
        let seed = cfg.seed_base + k as u64;
        let rbm = bench_model(cfg.size, cfg.weight_std, seed)?;
        let instance = rbm_to_max2sat(&rbm)?;
        let t = Instant::now();
        let out = memcomputing_solve(&instance, &solver, seed)?;
        mem_seconds += t.elapsed().as_secs_f64();
        let n = rbm.n_visible();
        let v: Array1<f64> = out.assignment[..n].iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let h: Array1<f64> = out.assignment[n..].iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let e_mem = energy_unchecked(&rbm, v.view(), h.view());
        let t = Instant::now();
        let e_cd = cd_lowest_energy(&rbm, sweeps, seed);
        cd_seconds += t.elapsed().as_secs_f64();
        rows.push(BenchRow {
            seed,
            e_mem,
            e_cd,
            delta_pct: relative_energy_difference(e_mem, e_cd),
            solver_steps: out.stats.steps,
            cd_sweeps: sweeps,
        });
    }
    let mut deltas: Vec<f64> = rows.iter().map(|r| r.delta_pct).collect();
    deltas.sort_by(f64::total_cmp);
    let mid = deltas.len() / 2;
    let median = if deltas.len() % 2 == 1 {
        deltas[mid]
    } else {
        0.5 * (deltas[mid - 1] + deltas[mid])
    };
    Ok(BenchReport {
        size: cfg.size,
        exchange_rate: rate,
        exchange_rate_measured: measured,
        rows,
        median_delta_pct: median,
        mem_seconds,
        cd_seconds,
    })
}

/// Every visible configuration of a small model, for tests and oracles.
pub fn visible_configurations(n: usize, convention: Convention) -> Vec<Array1<f64>> {
    (0..(1u64 << n)).map(|i| configuration(i, n, convention)).collect()
}
