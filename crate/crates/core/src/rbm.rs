//! RBM parameterisation and exact probabilistic quantities.
//!
//! Energies follow `E(v, h) = -aᵀv - bᵀh - vᵀWh` for both node alphabets.
//! Everything that touches probabilities works in the log domain so that
//! MNIST-sized models (784 visible units) never overflow.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distribution::DataDistribution;
use crate::error::{Error, Result};
use crate::math::{log_two_cosh, sigmoid, softplus, LogSumExp};

/// Largest layer size (in units) that exact enumeration will sweep.
pub const ENUMERATION_CAP: usize = 25;

/// Node-value alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `{0, 1}`
    ZeroOne,
    /// `{-1, +1}`
    PlusMinus,
}

impl Convention {
    #[inline]
    pub fn low(self) -> f64 {
        match self {
            Convention::ZeroOne => 0.0,
            Convention::PlusMinus => -1.0,
        }
    }

    #[inline]
    pub fn high(self) -> f64 {
        1.0
    }

    #[inline]
    pub fn contains(self, x: f64) -> bool {
        x == self.low() || x == self.high()
    }

    /// Symbol that sorts first when ties between degenerate states are broken:
    /// `0` for `{0,1}` and `+1` for `{-1,+1}`.
    #[inline]
    pub fn preferred(self) -> f64 {
        match self {
            Convention::ZeroOne => 0.0,
            Convention::PlusMinus => 1.0,
        }
    }

    #[inline]
    pub fn other(self) -> f64 {
        match self {
            Convention::ZeroOne => 1.0,
            Convention::PlusMinus => -1.0,
        }
    }

    /// Map a `{0,1}` bit to this alphabet.
    #[inline]
    pub fn from_bit(self, bit: bool) -> f64 {
        if bit {
            self.high()
        } else {
            self.low()
        }
    }

    /// Map a value of this alphabet to `{0,1}`.
    #[inline]
    pub fn to_bit(self, x: f64) -> bool {
        x == self.high()
    }

    /// Convert a value of this alphabet to the corresponding value of `target`.
    #[inline]
    pub fn map_value(self, x: f64, target: Convention) -> f64 {
        target.from_bit(self.to_bit(x))
    }
}

/// Weights, biases and node alphabet of an RBM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    /// `n_visible × n_hidden`
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub convention: Convention,
}

impl RbmParams {
    pub fn new(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        convention: Convention,
    ) -> Result<Self> {
        let rbm = Self {
            weights,
            visible_bias,
            hidden_bias,
            convention,
        };
        rbm.validate()?;
        Ok(rbm)
    }

    pub fn zeros(n_visible: usize, n_hidden: usize, convention: Convention) -> Self {
        Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            convention,
        }
    }

    /// Unbiased model with the given weights.
    pub fn from_weights(weights: Array2<f64>, convention: Convention) -> Result<Self> {
        let (n, m) = weights.dim();
        Self::new(weights, Array1::zeros(n), Array1::zeros(m), convention)
    }

    /// Every parameter drawn i.i.d. from `Normal(0, std)`; biases are left at
    /// zero unless `with_biases` is set.
    pub fn random<R: Rng + ?Sized>(
        n_visible: usize,
        n_hidden: usize,
        convention: Convention,
        std: f64,
        with_biases: bool,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("standard deviation must be finite and >= 0");
        let weights = Array2::from_shape_simple_fn((n_visible, n_hidden), || normal.sample(rng));
        let (visible_bias, hidden_bias) = if with_biases {
            (
                Array1::from_shape_simple_fn(n_visible, || normal.sample(rng)),
                Array1::from_shape_simple_fn(n_hidden, || normal.sample(rng)),
            )
        } else {
            (Array1::zeros(n_visible), Array1::zeros(n_hidden))
        };
        Self {
            weights,
            visible_bias,
            hidden_bias,
            convention,
        }
    }

    #[inline]
    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    #[inline]
    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_visible() == 0 || self.n_hidden() == 0 {
            return Err(Error::InvalidArgument(
                "an RBM needs at least one visible and one hidden unit".into(),
            ));
        }
        check_len("visible_bias", self.n_visible(), self.visible_bias.len())?;
        check_len("hidden_bias", self.n_hidden(), self.hidden_bias.len())?;
        if !self.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        if !self.visible_bias.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("visible_bias"));
        }
        if !self.hidden_bias.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("hidden_bias"));
        }
        Ok(())
    }

    pub fn is_unbiased(&self) -> bool {
        self.visible_bias.iter().all(|&x| x == 0.0) && self.hidden_bias.iter().all(|&x| x == 0.0)
    }

    /// The same model with the roles of the two layers swapped.
    pub fn transposed(&self) -> RbmParams {
        RbmParams {
            weights: self.weights.t().to_owned(),
            visible_bias: self.hidden_bias.clone(),
            hidden_bias: self.visible_bias.clone(),
            convention: self.convention,
        }
    }

    /// `b + Wᵀv`, the input field of every hidden unit.
    pub fn hidden_field(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.weights.t().dot(&v) + &self.hidden_bias
    }

    /// `a + Wh`, the input field of every visible unit.
    pub fn visible_field(&self, h: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&h) + &self.visible_bias
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_alphabet(values: ArrayView1<f64>, convention: Convention) -> Result<()> {
    match values.iter().find(|&&x| !convention.contains(x)) {
        Some(&value) => Err(Error::Alphabet { value, convention }),
        None => Ok(()),
    }
}

pub(crate) fn check_visible(rbm: &RbmParams, v: ArrayView1<f64>) -> Result<()> {
    check_len("visible state", rbm.n_visible(), v.len())?;
    check_alphabet(v, rbm.convention)
}

pub(crate) fn check_hidden(rbm: &RbmParams, h: ArrayView1<f64>) -> Result<()> {
    check_len("hidden state", rbm.n_hidden(), h.len())?;
    check_alphabet(h, rbm.convention)
}

/// A joint configuration `s = {v, h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub visible: Array1<f64>,
    pub hidden: Array1<f64>,
}

impl NodeState {
    pub fn new(visible: Array1<f64>, hidden: Array1<f64>) -> Self {
        Self { visible, hidden }
    }

    pub fn check(&self, rbm: &RbmParams) -> Result<()> {
        check_visible(rbm, self.visible.view())?;
        check_hidden(rbm, self.hidden.view())
    }

    /// Re-express the state in another alphabet.
    pub fn converted(&self, from: Convention, to: Convention) -> NodeState {
        NodeState {
            visible: self.visible.mapv(|x| from.map_value(x, to)),
            hidden: self.hidden.mapv(|x| from.map_value(x, to)),
        }
    }

    /// Global spin flip (complement for `{0,1}`).
    pub fn flipped(&self, convention: Convention) -> NodeState {
        let flip = |x: f64| convention.from_bit(!convention.to_bit(x));
        NodeState {
            visible: self.visible.mapv(flip),
            hidden: self.hidden.mapv(flip),
        }
    }
}

/// Layer selector for enumeration routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Visible,
    Hidden,
}

/// Configuration number `index` of a `len`-unit layer. Element 0 is the most
/// significant bit and bit value 0 maps to the convention's preferred symbol,
/// so increasing indices walk the configurations in tie-break order.
pub fn configuration(index: u64, len: usize, convention: Convention) -> Array1<f64> {
    Array1::from_shape_fn(len, |i| {
        if (index >> (len - 1 - i)) & 1 == 0 {
            convention.preferred()
        } else {
            convention.other()
        }
    })
}

pub(crate) fn check_enumerable(len: usize) -> Result<()> {
    if len > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size: len,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// `-aᵀv - bᵀh - vᵀWh`.
pub fn energy(rbm: &RbmParams, state: &NodeState) -> Result<f64> {
    state.check(rbm)?;
    Ok(energy_unchecked(rbm, state.visible.view(), state.hidden.view()))
}

#[inline]
pub(crate) fn energy_unchecked(rbm: &RbmParams, v: ArrayView1<f64>, h: ArrayView1<f64>) -> f64 {
    let coupling = v.dot(&rbm.weights.dot(&h));
    -rbm.visible_bias.dot(&v) - rbm.hidden_bias.dot(&h) - coupling
}

/// Rewrite the model in the `target` alphabet.
///
/// With the bijection `v01 = (v± + 1) / 2`, every pair of corresponding
/// states satisfies `E_target(s') = E_source(s) + offset`; the offset is
/// returned alongside the converted parameters.
pub fn convert_convention(rbm: &RbmParams, target: Convention) -> (RbmParams, f64) {
    use Convention::*;
    match (rbm.convention, target) {
        (ZeroOne, ZeroOne) | (PlusMinus, PlusMinus) => (rbm.clone(), 0.0),
        (ZeroOne, PlusMinus) => {
            let w = &rbm.weights;
            let row_sums = w.sum_axis(Axis(1));
            let col_sums = w.sum_axis(Axis(0));
            let converted = RbmParams {
                weights: w / 4.0,
                visible_bias: &rbm.visible_bias / 2.0 + &row_sums / 4.0,
                hidden_bias: &rbm.hidden_bias / 2.0 + &col_sums / 4.0,
                convention: PlusMinus,
            };
            (converted, -zero_one_constant(rbm))
        }
        (PlusMinus, ZeroOne) => {
            let w = &rbm.weights;
            let row_sums = w.sum_axis(Axis(1));
            let col_sums = w.sum_axis(Axis(0));
            let converted = RbmParams {
                weights: w * 4.0,
                visible_bias: (&rbm.visible_bias - &row_sums) * 2.0,
                hidden_bias: (&rbm.hidden_bias - &col_sums) * 2.0,
                convention: ZeroOne,
            };
            let constant = zero_one_constant(&converted);
            (converted, constant)
        }
    }
}

/// `E01(s) - E±(s)` for a `{0,1}` model and its `{-1,+1}` image.
fn zero_one_constant(rbm01: &RbmParams) -> f64 {
    -(rbm01.visible_bias.sum() / 2.0 + rbm01.hidden_bias.sum() / 2.0 + rbm01.weights.sum() / 4.0)
}

#[inline]
fn unit_probability(convention: Convention, field: f64) -> f64 {
    match convention {
        Convention::ZeroOne => sigmoid(field),
        Convention::PlusMinus => sigmoid(2.0 * field),
    }
}

/// Expected node value given its input field.
#[inline]
pub(crate) fn unit_expectation(convention: Convention, field: f64) -> f64 {
    match convention {
        Convention::ZeroOne => sigmoid(field),
        Convention::PlusMinus => field.tanh(),
    }
}

/// `ln Σ_x exp(field · x)` over the alphabet.
#[inline]
pub(crate) fn log_unit_partition(convention: Convention, field: f64) -> f64 {
    match convention {
        Convention::ZeroOne => softplus(field),
        Convention::PlusMinus => log_two_cosh(field),
    }
}

/// `p(h_j = high | v)` for every hidden unit.
pub fn conditional_hidden(rbm: &RbmParams, v: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_visible(rbm, v)?;
    Ok(rbm
        .hidden_field(v)
        .mapv(|x| unit_probability(rbm.convention, x)))
}

/// `p(v_i = high | h)` for every visible unit.
pub fn conditional_visible(rbm: &RbmParams, h: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_hidden(rbm, h)?;
    Ok(rbm
        .visible_field(h)
        .mapv(|x| unit_probability(rbm.convention, x)))
}

pub(crate) fn sample_units<R: Rng + ?Sized>(
    convention: Convention,
    fields: &Array1<f64>,
    rng: &mut R,
) -> Array1<f64> {
    fields.mapv(|x| {
        let p = unit_probability(convention, x);
        convention.from_bit(rng.gen::<f64>() < p)
    })
}

/// One block-Gibbs sweep: `h ~ p(h|v)` then `v' ~ p(v|h)`; returns `(v', h)`.
pub fn gibbs_step<R: Rng + ?Sized>(
    rbm: &RbmParams,
    v: ArrayView1<f64>,
    rng: &mut R,
) -> Result<NodeState> {
    check_visible(rbm, v)?;
    Ok(gibbs_step_unchecked(rbm, v, rng))
}

pub(crate) fn gibbs_step_unchecked<R: Rng + ?Sized>(
    rbm: &RbmParams,
    v: ArrayView1<f64>,
    rng: &mut R,
) -> NodeState {
    let hidden = sample_units(rbm.convention, &rbm.hidden_field(v), rng);
    let visible = sample_units(rbm.convention, &rbm.visible_field(hidden.view()), rng);
    NodeState { visible, hidden }
}

/// `ln Σ_h exp(-E(v, h))` — the log of the unnormalised visible marginal.
pub fn unnormalized_marginal(rbm: &RbmParams, v: ArrayView1<f64>) -> Result<f64> {
    check_visible(rbm, v)?;
    Ok(log_marginal_unchecked(rbm, v))
}

#[inline]
pub(crate) fn log_marginal_unchecked(rbm: &RbmParams, v: ArrayView1<f64>) -> f64 {
    let field = rbm.hidden_field(v);
    rbm.visible_bias.dot(&v)
        + field
            .iter()
            .map(|&x| log_unit_partition(rbm.convention, x))
            .sum::<f64>()
}

/// `ln Z` by summing the marginal of the opposite layer over every
/// configuration of `layer`.
pub fn log_partition_over(rbm: &RbmParams, layer: Layer) -> Result<f64> {
    let model = match layer {
        Layer::Visible => rbm.clone(),
        Layer::Hidden => rbm.transposed(),
    };
    let len = model.n_visible();
    check_enumerable(len)?;
    let mut acc = LogSumExp::new();
    for index in 0..(1u64 << len) {
        let v = configuration(index, len, model.convention);
        acc.push(log_marginal_unchecked(&model, v.view()));
    }
    Ok(acc.value())
}

/// `ln Z`, enumerating whichever layer is smaller.
pub fn exact_partition(rbm: &RbmParams) -> Result<f64> {
    let layer = if rbm.n_hidden() < rbm.n_visible() {
        Layer::Hidden
    } else {
        Layer::Visible
    };
    log_partition_over(rbm, layer)
}

/// Exact log-likelihood and KL divergence of a model against a data
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    /// Sum of `ln p(v)` over the dataset multiset.
    pub total: f64,
    /// `total` divided by the multiset size.
    pub mean: f64,
    /// `KL(q || p)`.
    pub kl: f64,
    pub log_partition: f64,
}

pub fn exact_log_likelihood(rbm: &RbmParams, data: &DataDistribution) -> Result<LogLikelihood> {
    check_len("pattern length", rbm.n_visible(), data.n_visible())?;
    let log_z = exact_partition(rbm)?;
    Ok(log_likelihood_with_partition(rbm, data, log_z))
}

pub(crate) fn log_likelihood_with_partition(
    rbm: &RbmParams,
    data: &DataDistribution,
    log_z: f64,
) -> LogLikelihood {
    let mut total = 0.0;
    let mut kl = 0.0;
    for (i, pattern) in data.patterns().iter().enumerate() {
        let v = data.pattern_vector(i, rbm.convention);
        let log_p = log_marginal_unchecked(rbm, v.view()) - log_z;
        total += data.counts()[i] as f64 * log_p;
        let q = data.masses()[i];
        if q > 0.0 {
            kl += q * (q.ln() - log_p);
        }
        debug_assert_eq!(pattern.len(), rbm.n_visible());
    }
    LogLikelihood {
        total,
        mean: total / data.total_count() as f64,
        kl,
        log_partition: log_z,
    }
}

/// Sum and mean of `ln p(v)` over the rows of a `{0,1}` data matrix.
pub fn log_likelihood_of_rows(rbm: &RbmParams, rows: &Array2<f64>) -> Result<(f64, f64)> {
    check_len("row length", rbm.n_visible(), rows.ncols())?;
    let log_z = exact_partition(rbm)?;
    Ok(log_likelihood_of_rows_with(rbm, rows, log_z))
}

pub(crate) fn log_likelihood_of_rows_with(
    rbm: &RbmParams,
    rows: &Array2<f64>,
    log_z: f64,
) -> (f64, f64) {
    let mut total = 0.0;
    for row in rows.rows() {
        let v = row.mapv(|x| Convention::ZeroOne.map_value(x, rbm.convention));
        total += log_marginal_unchecked(rbm, v.view()) - log_z;
    }
    (total, total / rows.nrows().max(1) as f64)
}

/// Visit every joint state of a small model as `(v, h, E(v,h))`.
pub fn for_each_state<F: FnMut(&Array1<f64>, &Array1<f64>, f64)>(
    rbm: &RbmParams,
    mut f: F,
) -> Result<()> {
    let (n, m) = (rbm.n_visible(), rbm.n_hidden());
    check_enumerable(n + m)?;
    for vi in 0..(1u64 << n) {
        let v = configuration(vi, n, rbm.convention);
        let field = rbm.hidden_field(v.view());
        let visible_part = rbm.visible_bias.dot(&v);
        for hi in 0..(1u64 << m) {
            let h = configuration(hi, m, rbm.convention);
            let e = -visible_part - field.dot(&h);
            f(&v, &h, e);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Term-by-term evaluation of the energy used as an oracle.
    fn energy_by_loops(rbm: &RbmParams, v: &Array1<f64>, h: &Array1<f64>) -> f64 {
        let mut e = 0.0;
        for i in 0..v.len() {
            e -= rbm.visible_bias[i] * v[i];
        }
        for j in 0..h.len() {
            e -= rbm.hidden_bias[j] * h[j];
        }
        for i in 0..v.len() {
            for j in 0..h.len() {
                e -= v[i] * rbm.weights[[i, j]] * h[j];
            }
        }
        e
    }

    #[test]
    fn energy_of_zero_model_is_zero() {
        let rbm = RbmParams::zeros(3, 2, Convention::ZeroOne);
        let s = NodeState::new(array![1.0, 0.0, 1.0], array![1.0, 1.0]);
        assert_eq!(energy(&rbm, &s).unwrap(), 0.0);
    }

    #[test]
    fn energy_single_coupling() {
        let rbm = RbmParams::from_weights(array![[2.0]], Convention::ZeroOne).unwrap();
        let s = NodeState::new(array![1.0], array![1.0]);
        assert_eq!(energy(&rbm, &s).unwrap(), -2.0);
    }

    #[test]
    fn energy_matches_triple_loop_on_all_states() {
        for conv in [Convention::ZeroOne, Convention::PlusMinus] {
            let rbm = RbmParams::random(3, 3, conv, 1.0, true, &mut rng(7));
            for_each_state(&rbm, |v, h, e| {
                let oracle = energy_by_loops(&rbm, v, h);
                assert!((e - oracle).abs() < 1e-12);
                let direct = energy(&rbm, &NodeState::new(v.clone(), h.clone())).unwrap();
                assert!((direct - oracle).abs() < 1e-12);
            })
            .unwrap();
        }
    }

    #[test]
    fn energy_rejects_bad_states() {
        let rbm = RbmParams::zeros(2, 2, Convention::ZeroOne);
        let wrong_len = NodeState::new(array![1.0], array![0.0, 1.0]);
        assert!(matches!(
            energy(&rbm, &wrong_len),
            Err(Error::DimensionMismatch { .. })
        ));
        let wrong_alphabet = NodeState::new(array![-1.0, 1.0], array![0.0, 1.0]);
        assert!(matches!(
            energy(&rbm, &wrong_alphabet),
            Err(Error::Alphabet { .. })
        ));
    }

    #[test]
    fn validation_catches_non_finite_and_shape_errors() {
        let bad = RbmParams::new(
            array![[f64::NAN]],
            array![0.0],
            array![0.0],
            Convention::ZeroOne,
        );
        assert!(matches!(bad, Err(Error::NonFinite("weights"))));
        let shape = RbmParams::new(
            array![[1.0, 2.0]],
            array![0.0],
            array![0.0],
            Convention::ZeroOne,
        );
        assert!(matches!(shape, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_model_converts_to_zero_model() {
        let rbm = RbmParams::zeros(3, 2, Convention::ZeroOne);
        let (pm, c) = convert_convention(&rbm, Convention::PlusMinus);
        assert_eq!(c, 0.0);
        assert!(pm.weights.iter().all(|&w| w == 0.0));
        assert!(pm.visible_bias.iter().all(|&w| w == 0.0));
        assert_eq!(pm.convention, Convention::PlusMinus);
    }

    #[test]
    fn convention_round_trip_restores_parameters() {
        let rbm = RbmParams::random(4, 3, Convention::ZeroOne, 1.0, true, &mut rng(3));
        let (pm, _) = convert_convention(&rbm, Convention::PlusMinus);
        let (back, _) = convert_convention(&pm, Convention::ZeroOne);
        for (a, b) in rbm.weights.iter().zip(back.weights.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in rbm.visible_bias.iter().zip(back.visible_bias.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in rbm.hidden_bias.iter().zip(back.hidden_bias.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conversion_offset_is_constant_on_single_coupling() {
        let rbm = RbmParams::from_weights(array![[4.0]], Convention::ZeroOne).unwrap();
        let (pm, offset) = convert_convention(&rbm, Convention::PlusMinus);
        let mut diffs = Vec::new();
        for v in [0.0, 1.0] {
            for h in [0.0, 1.0] {
                let s01 = NodeState::new(array![v], array![h]);
                let spm = s01.converted(Convention::ZeroOne, Convention::PlusMinus);
                diffs.push(energy(&pm, &spm).unwrap() - energy(&rbm, &s01).unwrap());
            }
        }
        for d in &diffs {
            assert!((d - diffs[0]).abs() < 1e-12);
            assert!((d - offset).abs() < 1e-12);
        }
        // E01 ∈ {0,0,0,-4} and E± ∈ {1,1,1,-3}: offset is +1.
        assert!((offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_hidden_examples() {
        let zero = RbmParams::zeros(3, 4, Convention::ZeroOne);
        let p = conditional_hidden(&zero, array![1.0, 0.0, 1.0].view()).unwrap();
        assert!(p.iter().all(|&x| x == 0.5));

        let mut saturated = RbmParams::zeros(2, 1, Convention::ZeroOne);
        saturated.hidden_bias[0] = 50.0;
        let p = conditional_hidden(&saturated, array![0.0, 1.0].view()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);

        let mut unit = RbmParams::zeros(1, 1, Convention::ZeroOne);
        unit.weights[[0, 0]] = 1.0;
        let p = conditional_hidden(&unit, array![1.0].view()).unwrap();
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn conditional_hidden_matches_enumerated_ratio() {
        for conv in [Convention::ZeroOne, Convention::PlusMinus] {
            let rbm = RbmParams::random(3, 3, conv, 1.0, true, &mut rng(11));
            for vi in 0..8u64 {
                let v = configuration(vi, 3, conv);
                let p = conditional_hidden(&rbm, v.view()).unwrap();
                let mut total = 0.0;
                let mut on = [0.0; 3];
                for hi in 0..8u64 {
                    let h = configuration(hi, 3, conv);
                    let w = (-energy_unchecked(&rbm, v.view(), h.view())).exp();
                    total += w;
                    for j in 0..3 {
                        if h[j] == 1.0 {
                            on[j] += w;
                        }
                    }
                }
                for j in 0..3 {
                    assert!((p[j] - on[j] / total).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn gibbs_step_is_deterministic_per_seed() {
        let rbm = RbmParams::random(5, 4, Convention::ZeroOne, 1.0, true, &mut rng(1));
        let v = array![1.0, 0.0, 1.0, 1.0, 0.0];
        let a = gibbs_step(&rbm, v.view(), &mut rng(99)).unwrap();
        let b = gibbs_step(&rbm, v.view(), &mut rng(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gibbs_step_saturated_hidden_bias() {
        let mut rbm = RbmParams::zeros(3, 4, Convention::ZeroOne);
        rbm.hidden_bias.fill(50.0);
        let mut r = rng(5);
        for _ in 0..100 {
            let s = gibbs_step(&rbm, array![0.0, 1.0, 0.0].view(), &mut r).unwrap();
            assert!(s.hidden.iter().all(|&h| h == 1.0));
        }
    }

    #[test]
    fn gibbs_zero_model_hidden_rate_is_half() {
        let rbm = RbmParams::zeros(3, 3, Convention::ZeroOne);
        let mut r = rng(17);
        let draws = 100_000;
        let mut ones = [0usize; 3];
        let v = array![1.0, 0.0, 1.0];
        for _ in 0..draws {
            let s = gibbs_step(&rbm, v.view(), &mut r).unwrap();
            for j in 0..3 {
                ones[j] += (s.hidden[j] == 1.0) as usize;
            }
        }
        for c in ones {
            let rate = c as f64 / draws as f64;
            assert!((rate - 0.5).abs() < 0.01, "rate {rate}");
        }
    }

    #[test]
    fn gibbs_hidden_frequencies_match_conditional() {
        let rbm = RbmParams::random(2, 2, Convention::ZeroOne, 1.0, true, &mut rng(23));
        let v = array![1.0, 0.0];
        let p = conditional_hidden(&rbm, v.view()).unwrap();
        let draws = 100_000;
        let mut r = rng(29);
        let mut ones = [0usize; 2];
        for _ in 0..draws {
            let s = gibbs_step(&rbm, v.view(), &mut r).unwrap();
            for j in 0..2 {
                ones[j] += (s.hidden[j] == 1.0) as usize;
            }
        }
        for j in 0..2 {
            let rate = ones[j] as f64 / draws as f64;
            let se = (p[j] * (1.0 - p[j]) / draws as f64).sqrt();
            assert!((rate - p[j]).abs() < 3.0 * se, "unit {j}: {rate} vs {}", p[j]);
        }
    }

    #[test]
    fn marginal_examples() {
        let zero = RbmParams::zeros(3, 5, Convention::ZeroOne);
        let lp = unnormalized_marginal(&zero, array![1.0, 1.0, 0.0].view()).unwrap();
        assert!((lp - 5.0 * 2f64.ln()).abs() < 1e-12);

        let one = RbmParams::from_weights(array![[3.0]], Convention::ZeroOne).unwrap();
        let lp = unnormalized_marginal(&one, array![1.0].view()).unwrap();
        assert!((lp - (1.0 + 3f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_hidden_sum() {
        for conv in [Convention::ZeroOne, Convention::PlusMinus] {
            for seed in 0..5 {
                let rbm = RbmParams::random(3, 4, conv, 1.5, true, &mut rng(seed));
                for vi in 0..8u64 {
                    let v = configuration(vi, 3, conv);
                    let mut sum = 0.0;
                    for hi in 0..16u64 {
                        let h = configuration(hi, 4, conv);
                        sum += (-energy_unchecked(&rbm, v.view(), h.view())).exp();
                    }
                    let lp = unnormalized_marginal(&rbm, v.view()).unwrap();
                    assert!((lp.exp() - sum).abs() / sum < 1e-10);
                }
            }
        }
    }

    #[test]
    fn marginal_survives_mnist_scale_weights() {
        let mut rbm = RbmParams::zeros(784, 16, Convention::ZeroOne);
        rbm.weights.fill(50.0);
        let v = Array1::ones(784);
        let lp = unnormalized_marginal(&rbm, v.view()).unwrap();
        assert!(lp.is_finite());
        rbm.weights.fill(-50.0);
        assert!(unnormalized_marginal(&rbm, v.view()).unwrap().is_finite());
    }

    #[test]
    fn partition_examples() {
        let zero = RbmParams::zeros(3, 2, Convention::ZeroOne);
        assert!((exact_partition(&zero).unwrap() - 5.0 * 2f64.ln()).abs() < 1e-12);
        let one = RbmParams::from_weights(array![[2.0]], Convention::ZeroOne).unwrap();
        let z = exact_partition(&one).unwrap();
        assert!((z - (3.0 + 2f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_by_either_layer_agrees() {
        for conv in [Convention::ZeroOne, Convention::PlusMinus] {
            for seed in 0..5 {
                let rbm = RbmParams::random(4, 6, conv, 1.0, true, &mut rng(seed));
                let a = log_partition_over(&rbm, Layer::Visible).unwrap();
                let b = log_partition_over(&rbm, Layer::Hidden).unwrap();
                assert!(((a - b).exp() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boltzmann_distribution_normalises() {
        for conv in [Convention::ZeroOne, Convention::PlusMinus] {
            let rbm = RbmParams::random(4, 4, conv, 1.0, true, &mut rng(31));
            let log_z = exact_partition(&rbm).unwrap();
            let mut total = 0.0;
            for_each_state(&rbm, |_, _, e| total += (-e - log_z).exp()).unwrap();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn conversion_preserves_boltzmann_distribution() {
        let rbm = RbmParams::random(3, 3, Convention::ZeroOne, 1.0, true, &mut rng(8));
        let (pm, _) = convert_convention(&rbm, Convention::PlusMinus);
        let z01 = exact_partition(&rbm).unwrap();
        let zpm = exact_partition(&pm).unwrap();
        for_each_state(&rbm, |v, h, e| {
            let s = NodeState::new(v.clone(), h.clone())
                .converted(Convention::ZeroOne, Convention::PlusMinus);
            let epm = energy(&pm, &s).unwrap();
            let p01 = (-e - z01).exp();
            let ppm = (-epm - zpm).exp();
            assert!((p01 - ppm).abs() < 1e-10);
        })
        .unwrap();
    }

    #[test]
    fn partition_cap_is_enforced() {
        let rbm = RbmParams::zeros(26, 26, Convention::ZeroOne);
        assert!(matches!(
            exact_partition(&rbm),
            Err(Error::EnumerationCap { size: 26, .. })
        ));
    }
}
