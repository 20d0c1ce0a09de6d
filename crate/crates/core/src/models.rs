//! Scoring models: the interface the matcher consumes plus two small trainable
//! classifiers used for both the global model and the per-pair local models.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{LabelPair, LabeledDataset};
use crate::error::{LccError, Result};

/// A model mapping a feature vector to a probability vector over its classes.
pub trait ScoringModel: Send + Sync {
    fn class_count(&self) -> usize;

    fn dimension(&self) -> usize;

    /// Probability vector of length [`class_count`](Self::class_count).
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>>;
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_dimension(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(LccError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Scores every row of `xs`. An empty batch yields a `0 x class_count` matrix.
pub fn score_batch<M: ScoringModel + ?Sized>(model: &M, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let k = model.class_count();
    if xs.nrows() == 0 {
        return Ok(Array2::zeros((0, k)));
    }
    check_dimension(model.dimension(), xs.ncols())?;
    let mut out = Array2::zeros((xs.nrows(), k));
    for (x, mut row) in xs.rows().into_iter().zip(out.rows_mut()) {
        let scores = model.score(x)?;
        row.assign(&ArrayView1::from(&scores[..]));
    }
    Ok(out)
}

fn require_all_classes(ds: &LabeledDataset) -> Result<()> {
    match ds.missing_class() {
        Some(c) => Err(LccError::MissingClass(c)),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Nearest centroid

/// Softmax over negative squared distances to per-class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CentroidDoc", try_from = "CentroidDoc")]
pub struct NearestCentroidModel {
    centroids: Array2<f64>,
    temperature: f64,
}

impl NearestCentroidModel {
    pub fn new(centroids: Array2<f64>, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(LccError::InvalidConfig(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if centroids.nrows() == 0 {
            return Err(LccError::TooFewClasses(0));
        }
        Ok(Self {
            centroids,
            temperature,
        })
    }

    pub fn centroids(&self) -> ArrayView2<'_, f64> {
        self.centroids.view()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

pub fn train_nearest_centroid(ds: &LabeledDataset, temperature: f64) -> Result<NearestCentroidModel> {
    require_all_classes(ds)?;
    let mut sums = Array2::<f64>::zeros((ds.class_count(), ds.dimension()));
    for (x, &y) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut row = sums.row_mut(y);
        row += &x;
    }
    for (mut row, n) in sums.rows_mut().into_iter().zip(ds.class_counts()) {
        row /= n as f64;
    }
    NearestCentroidModel::new(sums, temperature)
}

impl ScoringModel for NearestCentroidModel {
    fn class_count(&self) -> usize {
        self.centroids.nrows()
    }

    fn dimension(&self) -> usize {
        self.centroids.ncols()
    }

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dimension(self.dimension(), x.len())?;
        let logits: Vec<f64> = self
            .centroids
            .rows()
            .into_iter()
            .map(|c| {
                let d2: f64 = c.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                -self.temperature * d2
            })
            .collect();
        Ok(softmax(&logits))
    }
}

#[derive(Serialize, Deserialize)]
struct CentroidDoc {
    class_count: usize,
    dimension: usize,
    temperature: f64,
    centroids: Vec<f64>,
}

impl From<NearestCentroidModel> for CentroidDoc {
    fn from(m: NearestCentroidModel) -> Self {
        Self {
            class_count: m.centroids.nrows(),
            dimension: m.centroids.ncols(),
            temperature: m.temperature,
            centroids: m.centroids.iter().copied().collect(),
        }
    }
}

impl TryFrom<CentroidDoc> for NearestCentroidModel {
    type Error = LccError;

    fn try_from(doc: CentroidDoc) -> Result<Self> {
        let centroids = reshape(doc.centroids, doc.class_count, doc.dimension, "centroids")?;
        NearestCentroidModel::new(centroids, doc.temperature)
    }
}

fn reshape(values: Vec<f64>, rows: usize, cols: usize, what: &str) -> Result<Array2<f64>> {
    let n = values.len();
    Array2::from_shape_vec((rows, cols), values).map_err(|_| {
        LccError::MalformedDocument(format!("{what}: {n} values do not form a {rows} x {cols} matrix"))
    })
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iterations: 500,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(LccError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_iterations == 0 {
            return Err(LccError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(LccError::InvalidConfig(format!("l2 must be nonnegative, got {}", self.l2)));
        }
        Ok(())
    }
}

/// `softmax(W x + b)` with `W` of shape `class_count x dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LogisticDoc", try_from = "LogisticDoc")]
pub struct LogisticModel {
    weights: Array2<f64>,
    biases: Array1<f64>,
    config: LogisticConfig,
}

impl LogisticModel {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, config: LogisticConfig) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(LccError::DimensionMismatch {
                expected: weights.nrows(),
                found: biases.len(),
            });
        }
        Ok(Self {
            weights,
            biases,
            config,
        })
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn biases(&self) -> ArrayView1<'_, f64> {
        self.biases.view()
    }

    pub fn config(&self) -> &LogisticConfig {
        &self.config
    }

    /// Training objective evaluated at this model's parameters.
    pub fn loss(&self, ds: &LabeledDataset) -> f64 {
        logistic_loss_and_gradient(ds, self.weights.view(), self.biases.view(), self.config.l2).loss
    }
}

impl ScoringModel for LogisticModel {
    fn class_count(&self) -> usize {
        self.weights.nrows()
    }

    fn dimension(&self) -> usize {
        self.weights.ncols()
    }

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dimension(self.dimension(), x.len())?;
        let logits: Vec<f64> = self
            .weights
            .rows()
            .into_iter()
            .zip(self.biases.iter())
            .map(|(w, b)| w.dot(&x) + b)
            .collect();
        Ok(softmax(&logits))
    }
}

#[derive(Serialize, Deserialize)]
struct LogisticDoc {
    class_count: usize,
    dimension: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    config: LogisticConfig,
}

impl From<LogisticModel> for LogisticDoc {
    fn from(m: LogisticModel) -> Self {
        Self {
            class_count: m.weights.nrows(),
            dimension: m.weights.ncols(),
            weights: m.weights.iter().copied().collect(),
            biases: m.biases.to_vec(),
            config: m.config,
        }
    }
}

impl TryFrom<LogisticDoc> for LogisticModel {
    type Error = LccError;

    fn try_from(doc: LogisticDoc) -> Result<Self> {
        let weights = reshape(doc.weights, doc.class_count, doc.dimension, "weights")?;
        LogisticModel::new(weights, Array1::from(doc.biases), doc.config)
    }
}

/// Loss and gradient of the logistic objective at one parameter point.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub loss: f64,
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Mean cross-entropy plus `l2 * ||W||^2` (biases are not penalized), with its
/// analytic gradient.
pub fn logistic_loss_and_gradient(
    ds: &LabeledDataset,
    weights: ArrayView2<'_, f64>,
    biases: ArrayView1<'_, f64>,
    l2: f64,
) -> LossGradient {
    let n = ds.len() as f64;
    let mut residual = ds.features().dot(&weights.t());
    residual += &biases;
    let mut loss = 0.0;
    for (mut row, &y) in residual.rows_mut().into_iter().zip(ds.labels()) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += log_norm - row[y];
        row.mapv_inplace(|z| (z - log_norm).exp());
        row[y] -= 1.0;
    }
    loss = loss / n + l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad_w = residual.t().dot(&ds.features()) / n;
    grad_w.scaled_add(2.0 * l2, &weights);
    let grad_b = residual.sum_axis(Axis(0)) / n;
    LossGradient {
        loss,
        weights: grad_w,
        biases: grad_b,
    }
}

/// Small random weights and zero biases, determined by the seed alone.
pub fn initial_parameters(class_count: usize, dimension: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.01).expect("valid normal parameters");
    let weights = Array2::from_shape_simple_fn((class_count, dimension), || normal.sample(&mut rng));
    (weights, Array1::zeros(class_count))
}

pub fn train_logistic(ds: &LabeledDataset, config: &LogisticConfig) -> Result<LogisticModel> {
    train_logistic_with_history(ds, config, None).map(|(m, _)| m)
}

/// Full-batch gradient descent. Returns the lowest-loss iterate together with
/// the loss before each update and after the last one (`max_iterations + 1`
/// values). `init` overrides the seeded initialization.
pub fn train_logistic_with_history(
    ds: &LabeledDataset,
    config: &LogisticConfig,
    init: Option<(Array2<f64>, Array1<f64>)>,
) -> Result<(LogisticModel, Vec<f64>)> {
    config.validate()?;
    require_all_classes(ds)?;
    let (k, d) = (ds.class_count(), ds.dimension());
    let (mut weights, mut biases) = match init {
        Some((w, b)) => {
            if w.dim() != (k, d) {
                return Err(LccError::DimensionMismatch {
                    expected: k * d,
                    found: w.len(),
                });
            }
            check_dimension(k, b.len())?;
            (w, b)
        }
        None => initial_parameters(k, d, config.seed),
    };

    let mut history = Vec::with_capacity(config.max_iterations + 1);
    let mut best: Option<(f64, Array2<f64>, Array1<f64>)> = None;
    for iteration in 0..=config.max_iterations {
        let step = logistic_loss_and_gradient(ds, weights.view(), biases.view(), config.l2);
        if !step.loss.is_finite() {
            return Err(LccError::NonFiniteLoss { iteration });
        }
        history.push(step.loss);
        if best.as_ref().is_none_or(|(l, _, _)| step.loss < *l) {
            best = Some((step.loss, weights.clone(), biases.clone()));
        }
        if iteration == config.max_iterations {
            break;
        }
        weights.scaled_add(-config.learning_rate, &step.weights);
        biases.scaled_add(-config.learning_rate, &step.biases);
    }
    let (_, weights, biases) = best.expect("at least one iterate is evaluated");
    Ok((LogisticModel::new(weights, biases, *config)?, history))
}

// ---------------------------------------------------------------------------
// Model selection

/// Hyperparameters naming which built-in model to train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    NearestCentroid { temperature: f64 },
    Logistic(LogisticConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Logistic(LogisticConfig::default())
    }
}

/// A trained built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    NearestCentroid(NearestCentroidModel),
    Logistic(LogisticModel),
}

impl ScoringModel for Model {
    fn class_count(&self) -> usize {
        match self {
            Model::NearestCentroid(m) => m.class_count(),
            Model::Logistic(m) => m.class_count(),
        }
    }

    fn dimension(&self) -> usize {
        match self {
            Model::NearestCentroid(m) => m.dimension(),
            Model::Logistic(m) => m.dimension(),
        }
    }

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        match self {
            Model::NearestCentroid(m) => m.score(x),
            Model::Logistic(m) => m.score(x),
        }
    }
}

pub fn train_model(ds: &LabeledDataset, config: &ModelConfig) -> Result<Model> {
    match config {
        ModelConfig::NearestCentroid { temperature } => {
            train_nearest_centroid(ds, *temperature).map(Model::NearestCentroid)
        }
        ModelConfig::Logistic(c) => train_logistic(ds, c).map(Model::Logistic),
    }
}

/// Training samples of the two labels, relabeled so `pair.lo -> 0`, `pair.hi -> 1`.
pub fn pair_subset(ds: &LabeledDataset, pair: LabelPair) -> Result<LabeledDataset> {
    let class_count = ds.class_count();
    if pair.hi() >= class_count {
        return Err(LccError::LabelOutOfRange {
            label: pair.hi(),
            class_count,
        });
    }
    let indices: Vec<usize> = (0..ds.len()).filter(|&i| pair.contains(ds.labels()[i])).collect();
    let counts = ds.class_counts();
    for label in [pair.lo(), pair.hi()] {
        if counts[label] == 0 {
            return Err(LccError::MissingClass(label));
        }
    }
    let features = ds.features().select(Axis(0), &indices);
    let labels = indices
        .iter()
        .map(|&i| usize::from(ds.labels()[i] == pair.hi()))
        .collect();
    let names = vec![
        ds.label_names()[pair.lo()].clone(),
        ds.label_names()[pair.hi()].clone(),
    ];
    LabeledDataset::from_array(features, labels, names)
}

/// Binary model over `{pair.lo, pair.hi}`; output 0 scores `pair.lo`, output 1 `pair.hi`.
pub fn train_local_model(ds: &LabeledDataset, pair: LabelPair, config: &ModelConfig) -> Result<Model> {
    let subset = pair_subset(ds, pair)?;
    train_model(&subset, config)
}

/// Like [`train_local_model`] for logistic models, but starting from the two
/// rows of `global` that belong to the pair.
pub fn train_local_model_warm(
    ds: &LabeledDataset,
    pair: LabelPair,
    config: &LogisticConfig,
    global: &LogisticModel,
) -> Result<Model> {
    let subset = pair_subset(ds, pair)?;
    check_dimension(global.dimension(), ds.dimension())?;
    let rows = [pair.lo(), pair.hi()];
    let weights = global.weights.select(Axis(0), &rows);
    let biases = Array1::from(vec![global.biases[pair.lo()], global.biases[pair.hi()]]);
    train_logistic_with_history(&subset, config, Some((weights, biases))).map(|(m, _)| Model::Logistic(m))
}
