//! Euclidean-space alignment.
//!
//! Each subject's trials are whitened by the inverse square root of that
//! subject's mean trial covariance `(1/n) sum X X^T`, so that the mean
//! covariance of the aligned trials is the identity. All matrix work is done
//! in `f64`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::Trial;
use crate::nn::{TensorF32, WeightArchive};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("EmptyTrialList")]
    EmptyTrialList,
    #[error("MixedSubjects: {0:?} and {1:?}")]
    MixedSubjects(String, String),
    #[error("MixedChannelCounts: {0} and {1}")]
    MixedChannelCounts(usize, usize),
    #[error("SingularCovariance: eigenvalue {min:e} <= floor {floor:e}")]
    SingularCovariance { min: f64, floor: f64 },
    #[error("NonSymmetric: max asymmetry {0:e}")]
    NonSymmetric(f64),
    #[error("BadShrinkage: {0} not in [0, 1)")]
    BadShrinkage(f64),
}

/// Relative eigenvalue floor below which the covariance counts as singular.
pub const EIG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlignOptions {
    /// Linear shrinkage toward `(tr/C) I`, in `[0, 1)`.
    pub shrinkage: f64,
    /// Subtract each channel's mean before forming `X X^T`.
    pub center: bool,
}

#[derive(Debug, Clone)]
pub struct SubjectCovariance {
    pub subject_id: String,
    pub sigma: DMatrix<f64>,
    pub n_trials: usize,
}

#[derive(Debug, Clone)]
pub struct Whitener {
    pub subject_id: String,
    pub w: DMatrix<f64>,
    pub shrinkage: f64,
}

fn trial_matrix(t: &Trial, center: bool) -> DMatrix<f64> {
    let (c, n) = (t.n_channels(), t.n_samples);
    let mut m = DMatrix::from_fn(c, n, |i, j| f64::from(t.data[i * n + j]));
    if center {
        for mut row in m.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
    }
    m
}

/// Arithmetic mean of `X X^T` over one subject's trials.
pub fn mean_covariance(trials: &[Trial]) -> Result<SubjectCovariance, AlignError> {
    mean_covariance_with(trials, false)
}

pub fn mean_covariance_with(trials: &[Trial], center: bool) -> Result<SubjectCovariance, AlignError> {
    let first = trials.first().ok_or(AlignError::EmptyTrialList)?;
    let c = first.n_channels();
    for t in trials {
        if t.subject_id != first.subject_id {
            return Err(AlignError::MixedSubjects(first.subject_id.clone(), t.subject_id.clone()));
        }
        if t.n_channels() != c {
            return Err(AlignError::MixedChannelCounts(c, t.n_channels()));
        }
    }
    let mut sum = DMatrix::<f64>::zeros(c, c);
    for t in trials {
        let x = trial_matrix(t, center);
        sum.gemm(1.0, &x, &x.transpose(), 1.0);
    }
    sum /= trials.len() as f64;
    let sigma = (&sum + sum.transpose()) * 0.5;
    Ok(SubjectCovariance {
        subject_id: first.subject_id.clone(),
        sigma,
        n_trials: trials.len(),
    })
}

/// `(1 - s) sigma + s (tr(sigma)/C) I`.
pub fn regularize(sigma: &DMatrix<f64>, shrinkage: f64) -> DMatrix<f64> {
    let c = sigma.nrows();
    let target = sigma.trace() / c as f64;
    sigma * (1.0 - shrinkage) + DMatrix::identity(c, c) * (shrinkage * target)
}

/// Inverse matrix square root of the shrinkage-regularized SPD matrix, via a
/// symmetric eigendecomposition: `V diag(lambda^-1/2) V^T`.
pub fn inv_sqrt_spd(sigma: &DMatrix<f64>, shrinkage: f64) -> Result<DMatrix<f64>, AlignError> {
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(AlignError::BadShrinkage(shrinkage));
    }
    assert!(sigma.is_square(), "covariance must be square");
    let scale = sigma.amax().max(f64::MIN_POSITIVE);
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(AlignError::NonSymmetric(asym));
    }
    let reg = regularize(&((sigma + sigma.transpose()) * 0.5), shrinkage);
    let eig = SymmetricEigen::new(reg);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let floor = EIG_FLOOR * max.max(0.0);
    if max <= 0.0 || min <= floor {
        return Err(AlignError::SingularCovariance { min, floor });
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let v = &eig.eigenvectors;
    let w = v * d * v.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

impl Whitener {
    pub fn fit(cov: &SubjectCovariance, shrinkage: f64) -> Result<Self, AlignError> {
        Ok(Self {
            subject_id: cov.subject_id.clone(),
            w: inv_sqrt_spd(&cov.sigma, shrinkage)?,
            shrinkage,
        })
    }

    /// Returns `W X` with all metadata copied.
    pub fn apply(&self, t: &Trial) -> Trial {
        let x = trial_matrix(t, false);
        let y = &self.w * x;
        let n = t.n_samples;
        let mut data = vec![0f32; t.data.len()];
        for i in 0..y.nrows() {
            for j in 0..n {
                data[i * n + j] = y[(i, j)] as f32;
            }
        }
        Trial { data, ..t.clone() }
    }

    pub fn to_tensor(&self) -> TensorF32 {
        let c = self.w.nrows();
        let data = (0..c * c).map(|k| self.w[(k / c, k % c)] as f32).collect();
        TensorF32::new(vec![c, c], data).expect("square matrix")
    }
}

/// Whitens one subject's trials. Returns the aligned trials and the
/// whitener that produced them.
pub fn align_subject(trials: &[Trial], opts: AlignOptions) -> Result<(Vec<Trial>, Whitener), AlignError> {
    let cov = mean_covariance_with(trials, opts.center)?;
    let whitener = Whitener::fit(&cov, opts.shrinkage)?;
    let aligned = trials.iter().map(|t| whitener.apply(t)).collect();
    Ok((aligned, whitener))
}

/// Groups trials by subject, aligns each subject independently (in
/// parallel) and returns the trials in their original order.
pub fn align_all(trials: &[Trial], opts: AlignOptions) -> Result<(Vec<Trial>, Vec<Whitener>), AlignError> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        groups.entry(t.subject_id.as_str()).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let results = groups
        .par_iter()
        .map(|idx| {
            let subset: Vec<Trial> = idx.iter().map(|&i| trials[i].clone()).collect();
            align_subject(&subset, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out: Vec<Option<Trial>> = vec![None; trials.len()];
    let mut whiteners = Vec::with_capacity(results.len());
    for (idx, (aligned, w)) in groups.iter().zip(results) {
        for (&i, t) in idx.iter().zip(aligned) {
            out[i] = Some(t);
        }
        whiteners.push(w);
    }
    Ok((out.into_iter().map(|t| t.expect("every index assigned")).collect(), whiteners))
}

/// Stores whiteners under `whitener/<subject_id>`.
pub fn whiteners_to_archive(whiteners: &[Whitener]) -> WeightArchive {
    let mut a = WeightArchive::default();
    for w in whiteners {
        a.insert(format!("whitener/{}", w.subject_id), w.to_tensor());
    }
    a
}

/// `|| (1/n) sum X X^T - I ||_F` for trials that should already be aligned.
pub fn identity_residual(trials: &[Trial]) -> Result<f64, AlignError> {
    let cov = mean_covariance(trials)?;
    let c = cov.sigma.nrows();
    Ok((cov.sigma - DMatrix::<f64>::identity(c, c)).norm())
}
