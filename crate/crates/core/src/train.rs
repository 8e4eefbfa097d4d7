//! Head finetuning, subject-wise cross-validation and metrics.
//!
//! The backbone is frozen: features are extracted once and only the final
//! linear layer is trained, with class-weighted cross-entropy and AdamW.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align_all, AlignError, AlignOptions};
use crate::ingest::Trial;
use crate::nn::{build_network, Network, NetworkMeta, NnError, StemMode, TensorF32, WeightArchive, FEATURE_DIM};
use crate::wavelet::{scalograms, Magnitude, ScaleSet, Scalogram, WaveletError, WaveletSpec};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("MissingClass: class {0} has no training samples")]
    MissingClass(usize),
    #[error("NonFiniteLogits in row {0}")]
    NonFiniteLogits(usize),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("TooFewSubjects: {subjects} subjects for {k} folds")]
    TooFewSubjects { subjects: usize, k: usize },
    #[error("DegenerateClass: no class has both positive and negative samples")]
    DegenerateClass,
    #[error("BadConfig: {0}")]
    BadConfig(String),
    #[error("EmptyInput")]
    EmptyInput,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 128,
            epochs: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && self.weight_decay >= 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::BadConfig(format!("{self:?}")))
        }
    }
}

/// Inverse-frequency weights `N / (L * count_l)`.
pub fn class_weights(labels: &[usize], n_labels: usize) -> Result<Vec<f64>, TrainError> {
    let mut counts = vec![0usize; n_labels];
    for &y in labels {
        if y >= n_labels {
            return Err(TrainError::ShapeMismatch(format!("label {y} >= {n_labels} classes")));
        }
        counts[y] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(TrainError::MissingClass(missing));
    }
    let n = labels.len() as f64;
    Ok(counts.iter().map(|&c| n / (n_labels as f64 * c as f64)).collect())
}

/// Row-wise softmax of an `N x L` row-major matrix.
pub fn softmax_rows(logits: &[f64], n_labels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(n_labels) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / z));
    }
    out
}

/// Weighted mean cross-entropy `sum_i w_{y_i} (-log p_i[y_i]) / sum_i w_{y_i}`
/// and its gradient with respect to the logits.
pub fn weighted_cross_entropy(
    logits: &[f64],
    n_labels: usize,
    labels: &[usize],
    weights: &[f64],
) -> Result<(f64, Vec<f64>), TrainError> {
    if n_labels == 0 || logits.len() != labels.len() * n_labels || weights.len() != n_labels {
        return Err(TrainError::ShapeMismatch(format!(
            "{} logits, {} labels, {} weights for {n_labels} classes",
            logits.len(),
            labels.len(),
            weights.len()
        )));
    }
    if labels.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    let mut total_w = 0.0;
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (i, (row, &y)) in logits.chunks_exact(n_labels).zip(labels).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteLogits(i));
        }
        if y >= n_labels {
            return Err(TrainError::ShapeMismatch(format!("label {y} >= {n_labels} classes")));
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let w = weights[y];
        total_w += w;
        loss += w * (lse - row[y]);
        let g = &mut grad[i * n_labels..(i + 1) * n_labels];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = w * (row[k] - lse).exp();
        }
        g[y] -= w;
    }
    if total_w <= 0.0 {
        return Err(TrainError::BadConfig("class weights sum to zero".into()));
    }
    grad.iter_mut().for_each(|g| *g /= total_w);
    Ok((loss / total_w, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamWState {
    pub fn new(n_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// `p <- p (1 - lr*wd)`, then `p <- p - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamWState, cfg: &TrainConfig) -> Result<(), TrainError> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} params, {} grads, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] *= decay;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Stacks scalograms into an `[N, C, S, T]` tensor.
pub fn scalogram_batch(items: &[Scalogram]) -> Result<TensorF32, TrainError> {
    let first = items.first().ok_or(TrainError::EmptyInput)?;
    let [c, s, t] = first.dims();
    let mut data = Vec::with_capacity(items.len() * c * s * t);
    for it in items {
        if it.dims() != [c, s, t] {
            return Err(TrainError::ShapeMismatch(format!(
                "scalogram dims {:?} differ from {:?}",
                it.dims(),
                [c, s, t]
            )));
        }
        data.extend_from_slice(&it.data);
    }
    Ok(TensorF32::new(vec![items.len(), c, s, t], data)?)
}

/// Row-major `N x 768` features from the frozen backbone, computed in
/// batches of `batch_size`.
pub fn extract_features(net: &Network, items: &[Scalogram], batch_size: usize) -> Result<Vec<f64>, TrainError> {
    let mut out = Vec::with_capacity(items.len() * FEATURE_DIM);
    for chunk in items.chunks(batch_size.max(1)) {
        let f = net.features(&scalogram_batch(chunk)?)?;
        out.extend(f.data().iter().map(|&v| f64::from(v)));
    }
    Ok(out)
}

/// Linear classifier `logits = x W^T + b` in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub n_labels: usize,
    pub dim: usize,
    /// `n_labels x dim`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Head {
    pub fn zeros(n_labels: usize, dim: usize) -> Self {
        Self {
            n_labels,
            dim,
            w: vec![0.0; n_labels * dim],
            b: vec![0.0; n_labels],
        }
    }

    pub fn from_network(net: &Network) -> Result<Self, TrainError> {
        let w = net.param("head.w")?;
        let b = net.param("head.b")?;
        Ok(Self {
            n_labels: w.dims()[0],
            dim: w.dims()[1],
            w: w.data().iter().map(|&v| f64::from(v)).collect(),
            b: b.data().iter().map(|&v| f64::from(v)).collect(),
        })
    }

    pub fn to_archive(&self) -> WeightArchive {
        let mut a = WeightArchive::default();
        let w = self.w.iter().map(|&v| v as f32).collect();
        let b = self.b.iter().map(|&v| v as f32).collect();
        a.insert("head.w", TensorF32::new(vec![self.n_labels, self.dim], w).expect("head dims"));
        a.insert("head.b", TensorF32::new(vec![self.n_labels], b).expect("head dims"));
        a
    }

    pub fn from_archive(a: &WeightArchive) -> Result<Self, TrainError> {
        let w = a.get("head.w").ok_or_else(|| NnError::MissingTensor("head.w".into()))?;
        let b = a.get("head.b").ok_or_else(|| NnError::MissingTensor("head.b".into()))?;
        if w.ndim() != 2 || b.dims() != [w.dims()[0]] {
            return Err(TrainError::ShapeMismatch(format!(
                "head.w {:?} / head.b {:?}",
                w.dims(),
                b.dims()
            )));
        }
        Ok(Self {
            n_labels: w.dims()[0],
            dim: w.dims()[1],
            w: w.data().iter().map(|&v| f64::from(v)).collect(),
            b: b.data().iter().map(|&v| f64::from(v)).collect(),
        })
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(features.len() / self.dim * self.n_labels);
        for x in features.chunks_exact(self.dim) {
            for k in 0..self.n_labels {
                let wr = &self.w[k * self.dim..(k + 1) * self.dim];
                out.push(wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b[k]);
            }
        }
        out
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.extend_from_slice(&self.b);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let nw = self.w.len();
        self.w.copy_from_slice(&p[..nw]);
        self.b.copy_from_slice(&p[nw..]);
    }

    /// Weighted loss and the gradient with respect to `[W, b]`.
    fn loss_grad(&self, x: &[f64], labels: &[usize], weights: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
        let logits = self.logits(x);
        let (loss, dlogits) = weighted_cross_entropy(&logits, self.n_labels, labels, weights)?;
        let mut g = vec![0.0; self.w.len() + self.b.len()];
        let (gw, gb) = g.split_at_mut(self.w.len());
        for (xi, di) in x.chunks_exact(self.dim).zip(dlogits.chunks_exact(self.n_labels)) {
            for k in 0..self.n_labels {
                let d = di[k];
                gb[k] += d;
                for (gwk, &xv) in gw[k * self.dim..(k + 1) * self.dim].iter_mut().zip(xi) {
                    *gwk += d * xv;
                }
            }
        }
        Ok((loss, g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: Head,
    /// Full-set weighted loss before the first update.
    pub initial_loss: f64,
    /// Full-set weighted loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains `init` on row-major `features` for `cfg.epochs` passes of seeded,
/// shuffled minibatches.
pub fn train_head(features: &[f64], labels: &[usize], init: &Head, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(TrainError::EmptyInput);
    }
    if features.len() != n * init.dim {
        return Err(TrainError::ShapeMismatch(format!(
            "{} feature values for {n} samples of dim {}",
            features.len(),
            init.dim
        )));
    }
    let weights = class_weights(labels, init.n_labels)?;
    let mut head = init.clone();
    let mut params = head.params();
    let mut state = AdamWState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let initial_loss = head.loss_grad(features, labels, &weights)?.0;
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut xb = Vec::with_capacity(cfg.batch_size * init.dim);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            for &i in batch {
                xb.extend_from_slice(&features[i * init.dim..(i + 1) * init.dim]);
                yb.push(labels[i]);
            }
            let (_, g) = head.loss_grad(&xb, &yb, &weights)?;
            adamw_step(&mut params, &g, &mut state, cfg)?;
            head.set_params(&params);
        }
        loss_history.push(head.loss_grad(features, labels, &weights)?.0);
    }
    Ok(TrainOutcome {
        head,
        initial_loss,
        loss_history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Subject ids held out in each fold.
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.iter().any(|s| s == subject))
    }
}

/// Seeded shuffle of the distinct subject ids, then round-robin assignment.
pub fn kfold_subject_split(subject_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan, TrainError> {
    let mut subjects: Vec<String> = subject_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || subjects.len() < k {
        return Err(TrainError::TooFewSubjects {
            subjects: subjects.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, s) in subjects.into_iter().enumerate() {
        folds[i % k].push(s);
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Index of the largest entry, ties going to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Percentage of rows whose argmax equals the label.
pub fn accuracy(scores: &[f64], n_labels: usize, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = scores
        .chunks_exact(n_labels)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    100.0 * correct as f64 / labels.len() as f64
}

/// `confusion[true][predicted]`.
pub fn confusion_matrix(scores: &[f64], n_labels: usize, labels: &[usize]) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; n_labels]; n_labels];
    for (row, &y) in scores.chunks_exact(n_labels).zip(labels) {
        m[y][argmax(row)] += 1;
    }
    m
}

/// Binary AUC via midranks; `None` unless both classes are present.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucResult {
    pub macro_auc: f64,
    pub per_class: Vec<Option<f64>>,
    /// Classes without both positives and negatives, left out of the mean.
    pub skipped: Vec<usize>,
}

/// Unweighted mean of one-vs-rest AUCs over the classes present.
pub fn roc_auc_macro(scores: &[f64], n_labels: usize, labels: &[usize]) -> Result<AucResult, TrainError> {
    if scores.len() != labels.len() * n_labels || labels.is_empty() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} scores for {} labels x {n_labels} classes",
            scores.len(),
            labels.len()
        )));
    }
    let per_class: Vec<Option<f64>> = (0..n_labels)
        .map(|k| {
            let col: Vec<f64> = scores.chunks_exact(n_labels).map(|r| r[k]).collect();
            let pos: Vec<bool> = labels.iter().map(|&y| y == k).collect();
            binary_auc(&col, &pos)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(TrainError::DegenerateClass);
    }
    let skipped = per_class.iter().enumerate().filter(|(_, a)| a.is_none()).map(|(i, _)| i).collect();
    Ok(AucResult {
        macro_auc: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_subjects: Vec<String>,
    pub train_subjects: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    pub skipped_classes: Vec<usize>,
    pub confusion: Vec<Vec<u64>>,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub auc_averaging: String,
    pub config: serde_json::Value,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Cross-validates a head over precomputed features: for every fold the
/// head is trained from `init` on the other folds' subjects and scored on
/// the held-out subjects.
pub fn cross_validate(
    features: &[f64],
    labels: &[usize],
    subjects: &[String],
    init: &Head,
    cfg: &TrainConfig,
    k: usize,
) -> Result<(FoldPlan, Vec<FoldReport>), TrainError> {
    let plan = kfold_subject_split(subjects, k, cfg.seed)?;
    let dim = init.dim;
    let mut reports = Vec::with_capacity(k);
    for (fi, test) in plan.folds.iter().enumerate() {
        let test: BTreeSet<&str> = test.iter().map(String::as_str).collect();
        let (mut xtr, mut ytr, mut xte, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, s) in subjects.iter().enumerate() {
            let row = &features[i * dim..(i + 1) * dim];
            if test.contains(s.as_str()) {
                xte.extend_from_slice(row);
                yte.push(labels[i]);
            } else {
                xtr.extend_from_slice(row);
                ytr.push(labels[i]);
            }
        }
        let outcome = train_head(&xtr, &ytr, init, cfg)?;
        let scores = softmax_rows(&outcome.head.logits(&xte), init.n_labels);
        let (roc_auc, skipped) = match roc_auc_macro(&scores, init.n_labels, &yte) {
            Ok(a) => (Some(a.macro_auc), a.skipped),
            Err(TrainError::DegenerateClass) => (None, (0..init.n_labels).collect()),
            Err(e) => return Err(e),
        };
        let train_subjects: BTreeSet<&str> =
            subjects.iter().map(String::as_str).filter(|s| !test.contains(s)).collect();
        reports.push(FoldReport {
            fold: fi,
            test_subjects: test.iter().map(|s| s.to_string()).collect(),
            train_subjects: train_subjects.iter().map(|s| s.to_string()).collect(),
            n_train: ytr.len(),
            n_test: yte.len(),
            accuracy: accuracy(&scores, init.n_labels, &yte),
            roc_auc,
            skipped_classes: skipped,
            confusion: confusion_matrix(&scores, init.n_labels, &yte),
            loss_history: outcome.loss_history,
        });
    }
    Ok((plan, reports))
}

pub fn summarize(folds: Vec<FoldReport>, config: serde_json::Value) -> EvalReport {
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.roc_auc).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let (mean_auc, std_auc) = mean_std(&aucs);
    EvalReport {
        folds,
        mean_accuracy,
        std_accuracy,
        mean_auc,
        std_auc,
        auc_averaging: "macro one-vs-rest".into(),
        config,
    }
}

/// Settings for the full evaluation chain.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub wavelet: WaveletSpec,
    pub scales: ScaleSet,
    pub magnitude: Magnitude,
    pub align: AlignOptions,
    pub train: TrainConfig,
    pub folds: usize,
    pub stem: StemMode,
}

impl PipelineConfig {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "wavelet": {
                "family": self.wavelet.family.to_string(),
                "bandwidth": self.wavelet.bandwidth,
                "center": self.wavelet.center,
                "order": self.wavelet.order,
            },
            "scales": {
                "mode": self.scales.mode.to_string(),
                "max_scale": self.scales.max_a,
                "voices": self.scales.voices,
                "count": self.scales.len(),
            },
            "magnitude": format!("{:?}", self.magnitude).to_lowercase(),
            "align": { "shrinkage": self.align.shrinkage, "center": self.align.center },
            "train": self.train,
            "train_scope": "head",
            "folds": self.folds,
        })
    }
}

/// Builds the network for the scalogram dims, loads `weights` (non-strict)
/// and returns it with the per-sample features.
pub fn backbone_features(
    items: &[Scalogram],
    n_labels: usize,
    cfg: &PipelineConfig,
    weights: Option<&WeightArchive>,
) -> Result<(Network, Vec<f64>), TrainError> {
    let first = items.first().ok_or(TrainError::EmptyInput)?;
    let [c, s, t] = first.dims();
    let mut net = build_network(
        NetworkMeta {
            n_channels: c,
            n_scales: s,
            n_samples: t,
            n_labels,
            stem: cfg.stem,
        },
        cfg.train.seed,
    )?;
    if let Some(w) = weights {
        net.load_weights(w, false)?;
    }
    let features = extract_features(&net, items, cfg.train.batch_size)?;
    Ok((net, features))
}

/// Cross-validated evaluation of precomputed scalograms.
pub fn evaluate_scalograms(
    items: &[Scalogram],
    n_labels: usize,
    cfg: &PipelineConfig,
    weights: Option<&WeightArchive>,
) -> Result<EvalReport, TrainError> {
    let (net, features) = backbone_features(items, n_labels, cfg, weights)?;
    let labels: Vec<usize> = items.iter().map(|s| s.label).collect();
    let subjects: Vec<String> = items.iter().map(|s| s.subject_id.clone()).collect();
    let init = Head::from_network(&net)?;
    let (_, folds) = cross_validate(&features, &labels, &subjects, &init, &cfg.train, cfg.folds)?;
    Ok(summarize(folds, cfg.to_json()))
}

/// Align, transform and cross-validate raw trials.
///
/// Alignment only uses each subject's own trials, so it is computed once
/// and shared by every fold.
pub fn evaluate_pipeline(
    trials: &[Trial],
    n_labels: usize,
    cfg: &PipelineConfig,
    weights: Option<&WeightArchive>,
) -> Result<EvalReport, TrainError> {
    if trials.is_empty() {
        return Err(TrainError::EmptyInput);
    }
    let (aligned, _) = align_all(trials, cfg.align)?;
    let items = scalograms(&aligned, &cfg.scales, &cfg.wavelet, cfg.magnitude)?;
    evaluate_scalograms(&items, n_labels, cfg, weights)
}

/// Trials per subject.
pub fn subject_counts(subjects: &[String]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for s in subjects {
        *m.entry(s.clone()).or_insert(0) += 1;
    }
    m
}
