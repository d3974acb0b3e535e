//! Gradient estimators (CD-k, PCD-k, mode), the mode schedule and the
//! mode-assisted training loop.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distribution::DataDistribution;
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::rbm::{
    configuration, convert_convention, exact_partition, log_likelihood_of_rows_with,
    log_likelihood_with_partition, log_marginal_unchecked, unit_expectation, Convention,
    RbmParams, ENUMERATION_CAP,
};
use crate::solvers::{sample_mode, GroundState, MemcomputingParams, ModeMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    Cd,
    Pcd,
    Mode,
    /// Exact log-likelihood gradient (enumerated model term).
    Exact,
}

/// First and second moments of a set of joint samples: `⟨v hᵀ⟩`, `⟨v⟩`,
/// `⟨h⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistics {
    pub vh: Array2<f64>,
    pub v: Array1<f64>,
    pub h: Array1<f64>,
}

impl Statistics {
    /// Averages `v ⊗ E[h|v]` over the rows of `visible`.
    fn from_visible_rows(rbm: &RbmParams, visible: ArrayView2<f64>) -> Self {
        let rows = visible.nrows() as f64;
        let h = hidden_expectations(rbm, visible);
        Statistics {
            vh: visible.t().dot(&h) / rows,
            v: visible.mean_axis(Axis(0)).expect("nonempty batch"),
            h: h.mean_axis(Axis(0)).expect("nonempty batch"),
        }
    }

    /// Statistics of a single joint configuration.
    pub fn point(visible: &Array1<f64>, hidden: &Array1<f64>) -> Self {
        let vh = Array2::from_shape_fn((visible.len(), hidden.len()), |(i, j)| {
            visible[i] * hidden[j]
        });
        Statistics {
            vh,
            v: visible.clone(),
            h: hidden.clone(),
        }
    }
}

/// Unscaled parameter update `data term - model term`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub d_weights: Array2<f64>,
    pub d_visible_bias: Array1<f64>,
    pub d_hidden_bias: Array1<f64>,
    pub source: UpdateKind,
}

impl GradientEstimate {
    pub fn from_terms(data: &Statistics, model: &Statistics, source: UpdateKind) -> Self {
        GradientEstimate {
            d_weights: &data.vh - &model.vh,
            d_visible_bias: &data.v - &model.v,
            d_hidden_bias: &data.h - &model.h,
            source,
        }
    }

    fn components(&self) -> impl Iterator<Item = &f64> {
        self.d_weights
            .iter()
            .chain(self.d_visible_bias.iter())
            .chain(self.d_hidden_bias.iter())
    }

    /// Euclidean norm over all parameters.
    pub fn norm(&self) -> f64 {
        self.components().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &GradientEstimate) -> f64 {
        self.components()
            .zip(other.components())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Cosine similarity between two updates over all parameters.
    pub fn cosine_similarity(&self, other: &GradientEstimate) -> f64 {
        self.dot(other) / (self.norm() * other.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.components().all(|x| x.is_finite())
    }

    /// `θ += scale · Δθ`.
    pub fn apply(&self, rbm: &mut RbmParams, scale: f64) {
        rbm.weights.scaled_add(scale, &self.d_weights);
        rbm.visible_bias.scaled_add(scale, &self.d_visible_bias);
        rbm.hidden_bias.scaled_add(scale, &self.d_hidden_bias);
    }
}

fn check_batch(rbm: &RbmParams, batch: ArrayView2<f64>) -> Result<()> {
    if batch.nrows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if batch.ncols() != rbm.n_visible() {
        return Err(Error::DimensionMismatch {
            what: "batch row length",
            expected: rbm.n_visible(),
            found: batch.ncols(),
        });
    }
    if let Some(&value) = batch.iter().find(|&&x| !rbm.convention.contains(x)) {
        return Err(Error::Alphabet {
            value,
            convention: rbm.convention,
        });
    }
    Ok(())
}

/// `E[h|v]` for every row of `visible`.
fn hidden_expectations(rbm: &RbmParams, visible: ArrayView2<f64>) -> Array2<f64> {
    let conv = rbm.convention;
    let mut fields = visible.dot(&rbm.weights);
    fields += &rbm.hidden_bias;
    fields.mapv_inplace(|x| unit_expectation(conv, x));
    fields
}

fn sample_matrix<R: Rng + ?Sized>(conv: Convention, fields: &mut Array2<f64>, rng: &mut R) {
    let scale = match conv {
        Convention::ZeroOne => 1.0,
        Convention::PlusMinus => 2.0,
    };
    for x in fields.iter_mut() {
        let p = sigmoid(scale * *x);
        *x = conv.from_bit(rng.gen::<f64>() < p);
    }
}

/// Run `k` block-Gibbs sweeps in place on every row of `visible`.
fn gibbs_chains<R: Rng + ?Sized>(rbm: &RbmParams, visible: &mut Array2<f64>, k: usize, rng: &mut R) {
    let conv = rbm.convention;
    for _ in 0..k {
        let mut h = visible.dot(&rbm.weights);
        h += &rbm.hidden_bias;
        sample_matrix(conv, &mut h, rng);
        let mut v = h.dot(&rbm.weights.t());
        v += &rbm.visible_bias;
        sample_matrix(conv, &mut v, rng);
        *visible = v;
    }
}

/// Data term: batch average of `v ⊗ E[h|v]` with exact hidden conditionals.
pub fn data_statistics(rbm: &RbmParams, batch: ArrayView2<f64>) -> Result<Statistics> {
    check_batch(rbm, batch)?;
    Ok(Statistics::from_visible_rows(rbm, batch))
}

/// CD-k (or PCD-k when `chains` is given) update for a batch expressed in
/// the model's alphabet.
///
/// The model term averages `v^k ⊗ E[h|v^k]` after `k` Gibbs sweeps started
/// from the batch, or from the persistent chains, which are advanced in
/// place.
pub fn cd_update<R: Rng + ?Sized>(
    rbm: &RbmParams,
    batch: ArrayView2<f64>,
    k: usize,
    chains: Option<&mut Array2<f64>>,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let data = data_statistics(rbm, batch)?;
    let (model, source) = match chains {
        None => {
            let mut v = batch.to_owned();
            gibbs_chains(rbm, &mut v, k, rng);
            (Statistics::from_visible_rows(rbm, v.view()), UpdateKind::Cd)
        }
        Some(chains) => {
            if chains.dim() != batch.dim() {
                return Err(Error::InvalidArgument(format!(
                    "persistent chains have shape {:?}, batch has {:?}",
                    chains.dim(),
                    batch.dim()
                )));
            }
            gibbs_chains(rbm, chains, k, rng);
            (Statistics::from_visible_rows(rbm, chains.view()), UpdateKind::Pcd)
        }
    };
    Ok(GradientEstimate::from_terms(&data, &model, source))
}

/// Mode-driven update: same data term, model term replaced by the outer
/// product of the joint mode.
pub fn mode_update(
    rbm: &RbmParams,
    batch: ArrayView2<f64>,
    mode: &GroundState,
) -> Result<GradientEstimate> {
    let data = data_statistics(rbm, batch)?;
    let state = mode.state();
    state.check(rbm)?;
    let model = Statistics::point(&state.visible, &state.hidden);
    Ok(GradientEstimate::from_terms(&data, &model, UpdateKind::Mode))
}

/// Exact model expectations `⟨v hᵀ⟩`, `⟨v⟩`, `⟨h⟩` under the joint
/// distribution, enumerating the smaller layer.
pub fn exact_model_statistics(rbm: &RbmParams) -> Result<Statistics> {
    if rbm.n_hidden() < rbm.n_visible() {
        let s = exact_model_statistics(&rbm.transposed())?;
        return Ok(Statistics {
            vh: s.vh.reversed_axes(),
            v: s.h,
            h: s.v,
        });
    }
    let n = rbm.n_visible();
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size: n,
            cap: ENUMERATION_CAP,
        });
    }
    let log_z = exact_partition(rbm)?;
    let m = rbm.n_hidden();
    let mut stats = Statistics {
        vh: Array2::zeros((n, m)),
        v: Array1::zeros(n),
        h: Array1::zeros(m),
    };
    for index in 0..(1u64 << n) {
        let v = configuration(index, n, rbm.convention);
        let p = (log_marginal_unchecked(rbm, v.view()) - log_z).exp();
        let eh = rbm
            .hidden_field(v.view())
            .mapv(|x| unit_expectation(rbm.convention, x));
        Zip::from(&mut stats.vh)
            .and(&v.view().insert_axis(Axis(1)).broadcast((n, m)).unwrap())
            .and(&eh.view().insert_axis(Axis(0)).broadcast((n, m)).unwrap())
            .for_each(|acc, &vi, &hj| *acc += p * vi * hj);
        stats.v.scaled_add(p, &v);
        stats.h.scaled_add(p, &eh);
    }
    Ok(stats)
}

/// Exact log-likelihood gradient for a batch: data term minus the
/// enumerated model expectation.
pub fn exact_gradient(rbm: &RbmParams, batch: ArrayView2<f64>) -> Result<GradientEstimate> {
    let data = data_statistics(rbm, batch)?;
    let model = exact_model_statistics(rbm)?;
    Ok(GradientEstimate::from_terms(&data, &model, UpdateKind::Exact))
}

/// Sigmoid schedule of the mode-update probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSchedule {
    pub p_max: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_mode_method")]
    pub method: ModeMethod,
    #[serde(default)]
    pub solver: MemcomputingParams,
}

fn default_mode_method() -> ModeMethod {
    ModeMethod::Exhaustive
}

impl ModeSchedule {
    /// `α = 20/N`, `β = -6`: mode updates switch on around `0.3 N`.
    pub fn standard(p_max: f64, n_updates: usize, method: ModeMethod) -> Self {
        ModeSchedule {
            p_max,
            alpha: 20.0 / n_updates.max(1) as f64,
            beta: -6.0,
            method,
            solver: MemcomputingParams::default(),
        }
    }

    pub fn probability(&self, n: usize) -> f64 {
        mode_probability(n, self.p_max, self.alpha, self.beta)
    }
}

/// `P_mode(n) = p_max · σ(α n + β)`.
pub fn mode_probability(n: usize, p_max: f64, alpha: f64, beta: f64) -> f64 {
    p_max * sigmoid(alpha * n as f64 + beta)
}

/// `γ = -E0 / ((n+1)(m+1))` for the `±1` ground-state energy `E0`. Returns
/// `(0, true)` when `E0 ≥ 0`, which only happens for degenerate models.
pub fn mode_learning_rate(e0_pm: f64, n: usize, m: usize) -> (f64, bool) {
    if e0_pm >= 0.0 {
        return (0.0, true);
    }
    (-e0_pm / ((n + 1) * (m + 1)) as f64, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    Constant { rate: f64 },
    /// `rate · exp(-decay · n / N)`.
    ExpDecay { rate: f64, decay: f64 },
}

impl LearningRate {
    pub fn at(&self, n: usize, n_updates: usize) -> f64 {
        match *self {
            LearningRate::Constant { rate } => rate,
            LearningRate::ExpDecay { rate, decay } => {
                rate * (-decay * n as f64 / n_updates.max(1) as f64).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// May be omitted when an enclosing config supplies the model shape.
    #[serde(default)]
    pub n_hidden: usize,
    pub n_updates: usize,
    /// `None` trains on the whole dataset every update.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    pub learning_rate: LearningRate,
    /// Absent for plain CD/PCD training.
    #[serde(default)]
    pub mode: Option<ModeSchedule>,
    #[serde(default)]
    pub persistent: bool,
    #[serde(default)]
    pub seed: u64,
    /// Evaluation interval in updates; 0 evaluates only at the start and
    /// the end.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Standard deviation of the Gaussian initialisation.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    /// Alphabet of the trained model's units.
    #[serde(default = "default_convention")]
    pub convention: Convention,
}

fn default_k() -> usize {
    1
}
fn default_eval_every() -> usize {
    100
}
fn default_init_std() -> f64 {
    0.1
}
fn default_convention() -> Convention {
    Convention::ZeroOne
}

impl TrainConfig {
    pub fn new(n_hidden: usize, n_updates: usize, learning_rate: LearningRate) -> Self {
        TrainConfig {
            n_hidden,
            n_updates,
            batch_size: None,
            k: 1,
            learning_rate,
            mode: None,
            persistent: false,
            seed: 0,
            eval_every: default_eval_every(),
            init_std: default_init_std(),
            convention: default_convention(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_hidden == 0 {
            return bad("n_hidden must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive".into());
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return bad(format!("invalid init_std {}", self.init_std));
        }
        let rate = match self.learning_rate {
            LearningRate::Constant { rate } => rate,
            LearningRate::ExpDecay { rate, decay } => {
                if !decay.is_finite() {
                    return bad(format!("invalid decay {decay}"));
                }
                rate
            }
        };
        if !(rate.is_finite() && rate > 0.0) {
            return bad(format!("learning rate must be positive, got {rate}"));
        }
        if let Some(mode) = &self.mode {
            if !(mode.p_max > 0.0 && mode.p_max <= 1.0) {
                return bad(format!("p_max must lie in (0, 1], got {}", mode.p_max));
            }
            if !(mode.alpha.is_finite() && mode.beta.is_finite()) {
                return bad("mode schedule alpha/beta must be finite".into());
            }
        }
        Ok(())
    }
}

/// Training set: an explicit distribution (evaluated exactly) or a matrix
/// of `{0,1}` rows.
#[derive(Debug, Clone, Copy)]
pub enum TrainingData<'a> {
    Distribution(&'a DataDistribution),
    Rows(&'a Array2<f64>),
}

impl TrainingData<'_> {
    pub fn n_visible(&self) -> usize {
        match self {
            TrainingData::Distribution(d) => d.n_visible(),
            TrainingData::Rows(r) => r.ncols(),
        }
    }
}

/// Exact evaluation of a model against the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `None` for row data, where the empirical distribution's entropy is
    /// not tracked.
    pub kl: Option<f64>,
    pub log_likelihood: f64,
    pub mean_log_likelihood: f64,
    pub log_partition: f64,
}

pub fn evaluate(rbm: &RbmParams, data: TrainingData<'_>) -> Result<Evaluation> {
    if data.n_visible() != rbm.n_visible() {
        return Err(Error::DimensionMismatch {
            what: "pattern length",
            expected: rbm.n_visible(),
            found: data.n_visible(),
        });
    }
    let log_z = exact_partition(rbm)?;
    Ok(match data {
        TrainingData::Distribution(d) => {
            let ll = log_likelihood_with_partition(rbm, d, log_z);
            Evaluation {
                kl: Some(ll.kl),
                log_likelihood: ll.total,
                mean_log_likelihood: ll.mean,
                log_partition: log_z,
            }
        }
        TrainingData::Rows(rows) => {
            let (total, mean) = log_likelihood_of_rows_with(rbm, rows, log_z);
            Evaluation {
                kl: None,
                log_likelihood: total,
                mean_log_likelihood: mean,
                log_partition: log_z,
            }
        }
    })
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub iter: usize,
    pub kl: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub mean_log_likelihood: Option<f64>,
    pub p_mode: f64,
    /// Learning-rate multiplier of the latest mode update.
    pub gamma: Option<f64>,
    /// `±1` ground-state energy found by the latest mode update.
    pub e0: Option<f64>,
    /// Kind of the update that produced this iterate (`None` at iter 0).
    pub update_kind: Option<UpdateKind>,
    pub eps: f64,
    pub grad_norm: Option<f64>,
    pub mode_updates: usize,
}

/// What a single call to [`Trainer::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub iter: usize,
    pub kind: UpdateKind,
    pub p_mode: f64,
    pub eps: f64,
    pub gamma: Option<f64>,
    pub e0: Option<f64>,
    /// Set when a mode update met `E0 ≥ 0` and was skipped (`γ = 0`).
    pub gamma_degenerate: bool,
    pub grad_norm: f64,
}

/// Incremental driver of the training loop.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: TrainingData<'a>,
    rows: Array2<f64>,
    rbm: RbmParams,
    rng: ChaCha8Rng,
    iter: usize,
    chains: Option<Array2<f64>>,
    order: Vec<usize>,
    cursor: usize,
    mode_updates: usize,
    last: Option<StepInfo>,
}

impl<'a> Trainer<'a> {
    /// Draws `θ0 ~ N(0, init_std²)` for weights and both biases.
    pub fn new(cfg: TrainConfig, data: TrainingData<'a>) -> Result<Self> {
        cfg.validate()?;
        let mut rows = match data {
            TrainingData::Distribution(d) => d.expand(),
            TrainingData::Rows(r) => r.clone(),
        };
        if rows.nrows() == 0 {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        if let Some(&value) = rows.iter().find(|&&x| x != 0.0 && x != 1.0) {
            return Err(Error::Alphabet {
                value,
                convention: Convention::ZeroOne,
            });
        }
        let conv = cfg.convention;
        rows.mapv_inplace(|x| Convention::ZeroOne.map_value(x, conv));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let rbm = initial_params(rows.ncols(), cfg.n_hidden, cfg.init_std, conv, &mut rng)?;
        let order: Vec<usize> = (0..rows.nrows()).collect();
        Ok(Trainer {
            cfg,
            data,
            rows,
            rbm,
            rng,
            iter: 0,
            chains: None,
            order,
            cursor: 0,
            mode_updates: 0,
            last: None,
        })
    }

    pub fn rbm(&self) -> &RbmParams {
        &self.rbm
    }

    pub fn into_rbm(self) -> RbmParams {
        self.rbm
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn mode_updates(&self) -> usize {
        self.mode_updates
    }

    pub fn is_finished(&self) -> bool {
        self.iter >= self.cfg.n_updates
    }

    fn next_batch(&mut self) -> Array2<f64> {
        let total = self.rows.nrows();
        let size = match self.cfg.batch_size {
            Some(b) if b < total => b,
            _ => return self.rows.clone(),
        };
        if self.cursor + size > total || self.cursor == 0 {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = &self.order[self.cursor..self.cursor + size];
        self.cursor += size;
        self.rows.select(Axis(0), idx)
    }

    /// Perform update `n = iter + 1`.
    pub fn step(&mut self) -> Result<StepInfo> {
        let n = self.iter + 1;
        let eps = self.cfg.learning_rate.at(n, self.cfg.n_updates);
        let batch = self.next_batch();
        let p_mode = self.cfg.mode.as_ref().map_or(0.0, |m| m.probability(n));
        let use_mode = match &self.cfg.mode {
            Some(_) => self.rng.gen::<f64>() <= p_mode,
            None => false,
        };

        let mut info = StepInfo {
            iter: n,
            kind: UpdateKind::Cd,
            p_mode,
            eps,
            gamma: None,
            e0: None,
            gamma_degenerate: false,
            grad_norm: 0.0,
        };
        let update = if use_mode {
            let schedule = self.cfg.mode.as_ref().expect("mode schedule present");
            let solver_seed = self.rng.gen::<u64>();
            let gs = sample_mode(&self.rbm, schedule.method, &schedule.solver, solver_seed)?;
            let (_, offset) = convert_convention(&self.rbm, Convention::PlusMinus);
            let e0 = gs.energy + offset;
            let (gamma, degenerate) =
                mode_learning_rate(e0, self.rbm.n_visible(), self.rbm.n_hidden());
            self.mode_updates += 1;
            info.kind = UpdateKind::Mode;
            info.gamma = Some(gamma);
            info.e0 = Some(e0);
            info.gamma_degenerate = degenerate;
            let g = mode_update(&self.rbm, batch.view(), &gs)?;
            (g, gamma * eps)
        } else {
            let chains = if self.cfg.persistent {
                Some(self.chains.get_or_insert_with(|| batch.clone()))
            } else {
                None
            };
            let g = cd_update(&self.rbm, batch.view(), self.cfg.k, chains, &mut self.rng)?;
            info.kind = g.source;
            (g, eps)
        };
        let (grad, scale) = update;
        if !grad.is_finite() {
            return Err(Error::NonFinite("gradient estimate"));
        }
        info.grad_norm = grad.norm();
        grad.apply(&mut self.rbm, scale);
        self.rbm.validate()?;
        self.iter = n;
        self.last = Some(info.clone());
        Ok(info)
    }

    pub fn evaluate(&self) -> Result<Evaluation> {
        evaluate(&self.rbm, self.data)
    }

    /// Whether exact evaluation is possible for this model size.
    pub fn can_evaluate(&self) -> bool {
        self.rbm.n_visible().min(self.rbm.n_hidden()) <= ENUMERATION_CAP
    }

    /// Metrics at the current iterate.
    pub fn record(&self) -> Result<MetricsRecord> {
        let eval = if self.can_evaluate() {
            Some(self.evaluate()?)
        } else {
            None
        };
        let last = self.last.as_ref();
        Ok(MetricsRecord {
            seed: self.cfg.seed,
            iter: self.iter,
            kl: eval.and_then(|e| e.kl),
            log_likelihood: eval.map(|e| e.log_likelihood),
            mean_log_likelihood: eval.map(|e| e.mean_log_likelihood),
            p_mode: self
                .cfg
                .mode
                .as_ref()
                .map_or(0.0, |m| m.probability(self.iter)),
            gamma: last.and_then(|l| l.gamma),
            e0: last.and_then(|l| l.e0),
            update_kind: last.map(|l| l.kind),
            eps: self.cfg.learning_rate.at(self.iter, self.cfg.n_updates),
            grad_norm: last.map(|l| l.grad_norm),
            mode_updates: self.mode_updates,
        })
    }

    /// Whether the current iterate is an evaluation point: the start, the
    /// end, and every `eval_every` updates.
    pub fn should_record(&self) -> bool {
        self.iter == 0
            || self.iter == self.cfg.n_updates
            || (self.cfg.eval_every > 0 && self.iter.is_multiple_of(self.cfg.eval_every))
    }
}

fn initial_params<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    std: f64,
    convention: Convention,
    rng: &mut R,
) -> Result<RbmParams> {
    if std == 0.0 {
        return Ok(RbmParams::zeros(n, m, convention));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let weights = Array2::from_shape_simple_fn((n, m), || normal.sample(rng));
    let visible_bias = Array1::from_shape_simple_fn(n, || normal.sample(rng));
    let hidden_bias = Array1::from_shape_simple_fn(m, || normal.sample(rng));
    RbmParams::new(weights, visible_bias, hidden_bias, convention)
}

/// Result of a full training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rbm: RbmParams,
    /// Last evaluation (at `n_updates`), when exact evaluation is feasible.
    pub final_eval: Option<Evaluation>,
    /// Highest log-likelihood over all evaluation points and its iteration.
    pub best: Option<(usize, Evaluation)>,
    pub mode_updates: usize,
    pub degenerate_gamma: usize,
}

/// Runs the full loop, passing every evaluation record to `sink`.
pub fn train<F: FnMut(&MetricsRecord) -> Result<()>>(
    cfg: &TrainConfig,
    data: TrainingData<'_>,
    mut sink: F,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg.clone(), data)?;
    let mut best: Option<(usize, Evaluation)> = None;
    let mut last_eval = None;
    let mut degenerate = 0;
    loop {
        if trainer.should_record() {
            let record = trainer.record()?;
            if let (Some(ll), Some(mean)) = (record.log_likelihood, record.mean_log_likelihood) {
                let eval = Evaluation {
                    kl: record.kl,
                    log_likelihood: ll,
                    mean_log_likelihood: mean,
                    log_partition: f64::NAN,
                };
                if best.is_none_or(|(_, b)| ll > b.log_likelihood) {
                    best = Some((record.iter, eval));
                }
                last_eval = Some(eval);
            }
            sink(&record)?;
        }
        if trainer.is_finished() {
            break;
        }
        if trainer.step()?.gamma_degenerate {
            degenerate += 1;
        }
    }
    let final_eval = if trainer.can_evaluate() {
        Some(trainer.evaluate()?)
    } else {
        last_eval
    };
    Ok(TrainOutcome {
        mode_updates: trainer.mode_updates(),
        rbm: trainer.into_rbm(),
        final_eval,
        best,
        degenerate_gamma: degenerate,
    })
}
