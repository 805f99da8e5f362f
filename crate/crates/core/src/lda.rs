//! Linear Discriminant Analysis: scatter matrices, the feature transform
//! used to seed hidden layers, and the closed-form discriminant classifier
//! used to seed the classification layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, generalized_eig, invert_spd, Matrix, DEFAULT_RIDGE};

/// Flattened observations with one class label each.
#[derive(Debug, Clone)]
pub struct LabeledPatchSet {
    dim: usize,
    class_count: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledPatchSet {
    /// `features` holds `labels.len()` rows of length `dim`, row-major.
    pub fn new(dim: usize, class_count: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("observation dimension must be positive".into()));
        }
        if class_count == 0 {
            return Err(Error::InvalidInput("class count must be positive".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} observations of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelRange { label, class_count });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations contain non-finite values".into()));
        }
        let mut counts = vec![0usize; class_count];
        for &l in &labels {
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!("class {empty} has no observations")));
        }
        Ok(Self {
            dim,
            class_count,
            features,
            labels,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(class_count: usize, rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} observations but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape("observations differ in length".into()));
            }
            features.extend_from_slice(r);
        }
        Self::new(dim, class_count, features, labels.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }
}

/// Per-class and overall sample statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_means: Vec<Vec<f64>>,
    pub overall_mean: Vec<f64>,
    pub counts: Vec<usize>,
    /// Mean number of observations per class.
    pub mean_class_size: f64,
    pub priors: Vec<f64>,
}

impl ClassStats {
    pub fn compute(data: &LabeledPatchSet) -> Self {
        let d = data.dim;
        let k = data.class_count;
        let mut sums = vec![vec![0.0; d]; k];
        let mut total = vec![0.0; d];
        let mut counts = vec![0usize; k];
        for (x, label) in data.iter() {
            counts[label] += 1;
            for ((s, t), &v) in sums[label].iter_mut().zip(total.iter_mut()).zip(x) {
                *s += v;
                *t += v;
            }
        }
        let n = data.len() as f64;
        let class_means = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect();
        let overall_mean = total.into_iter().map(|v| v / n).collect();
        let priors = counts.iter().map(|&c| c as f64 / n).collect();
        Self {
            class_means,
            overall_mean,
            counts,
            mean_class_size: n / k as f64,
            priors,
        }
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn check_stats(data: &LabeledPatchSet, stats: &ClassStats) -> Result<()> {
    if stats.class_count() != data.class_count || stats.overall_mean.len() != data.dim {
        return Err(Error::Shape("class statistics do not match the data set".into()));
    }
    if stats.counts.contains(&0) {
        return Err(Error::InvalidInput("every class needs at least one observation".into()));
    }
    Ok(())
}

/// Unnormalized per-class scatter `Σ_{x∈c} (x − μ_c)(x − μ_c)ᵀ`.
fn class_scatters(data: &LabeledPatchSet, stats: &ClassStats) -> Vec<Matrix> {
    let d = data.dim;
    let mut out: Vec<Matrix> = (0..data.class_count).map(|_| Matrix::zeros(d, d)).collect();
    let mut diff = vec![0.0; d];
    for (x, label) in data.iter() {
        for ((o, &v), &m) in diff.iter_mut().zip(x).zip(&stats.class_means[label]) {
            *o = v - m;
        }
        let acc = out[label].as_mut_slice();
        // Upper triangle only; mirrored below.
        for i in 0..d {
            let di = diff[i];
            if di == 0.0 {
                continue;
            }
            linalg::axpy(di, &diff[i..], &mut acc[i * d + i..(i + 1) * d]);
        }
    }
    for m in out.iter_mut() {
        m.mirror_upper();
    }
    out
}

fn weighted_within(scatters: &[Matrix], stats: &ClassStats) -> Matrix {
    let d = stats.overall_mean.len();
    let mut s_w = Matrix::zeros(d, d);
    for (scatter, &count) in scatters.iter().zip(&stats.counts) {
        let w = stats.mean_class_size / count as f64;
        linalg::axpy(w, scatter.as_slice(), s_w.as_mut_slice());
    }
    s_w
}

/// Within-class scatter `S_W = N̄ Σ_c (1/N_c) Σ_{x∈c} (x − μ_c)(x − μ_c)ᵀ`.
pub fn scatter_within(data: &LabeledPatchSet, stats: &ClassStats) -> Result<Matrix> {
    check_stats(data, stats)?;
    Ok(weighted_within(&class_scatters(data, stats), stats))
}

/// Between-class scatter `S_B = N̄ Σ_c (1/N_c) (μ_c − μ)(μ_c − μ)ᵀ`.
pub fn scatter_between(data: &LabeledPatchSet, stats: &ClassStats) -> Result<Matrix> {
    check_stats(data, stats)?;
    let d = data.dim;
    let mut s_b = Matrix::zeros(d, d);
    let mut delta = vec![0.0; d];
    for (mean, &count) in stats.class_means.iter().zip(&stats.counts) {
        for ((o, &m), &g) in delta.iter_mut().zip(mean).zip(&stats.overall_mean) {
            *o = m - g;
        }
        let w = stats.mean_class_size / count as f64;
        let acc = s_b.as_mut_slice();
        for i in 0..d {
            linalg::axpy(w * delta[i], &delta[i..], &mut acc[i * d + i..(i + 1) * d]);
        }
    }
    s_b.mirror_upper();
    Ok(s_b)
}

/// How the class covariance entering the discriminant functions is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// `Σ_c = (N_c − 1)/(n − |C|) · Σ_{x∈c} (x − μ_c)(x − μ_c)ᵀ`, one per class.
    #[default]
    PerClass,
    /// Textbook pooled estimate `1/(n − |C|) · Σ_c Σ_{x∈c} (x − μ_c)(x − μ_c)ᵀ`
    /// shared by every class.
    Shared,
}

impl std::str::FromStr for CovarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_class" => Ok(Self::PerClass),
            "shared" => Ok(Self::Shared),
            other => Err(Error::InvalidInput(format!(
                "unknown covariance mode `{other}` (expected per_class or shared)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub ridge: f64,
    pub covariance: CovarianceMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            covariance: CovarianceMode::PerClass,
        }
    }
}

/// A fitted LDA: feature transform plus discriminant classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// Rows are generalized eigenvectors of `(S_B, S_W)`, by descending eigenvalue.
    pub transform: Matrix,
    pub eigenvalues: Vec<f64>,
    /// Row `c` is `Σ_c⁻¹ μ_c`.
    pub classifier_weights: Matrix,
    /// `b_c = −½ μ_cᵀ Σ_c⁻¹ μ_c + ln π_c`.
    pub classifier_bias: Vec<f64>,
    pub stats: ClassStats,
}

/// Fits with the default per-class covariance.
pub fn fit(data: &LabeledPatchSet, ridge: f64) -> Result<LdaModel> {
    fit_with(
        data,
        &FitOptions {
            ridge,
            ..FitOptions::default()
        },
    )
}

pub fn fit_with(data: &LabeledPatchSet, options: &FitOptions) -> Result<LdaModel> {
    let n = data.len();
    let k = data.class_count;
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "{n} observations are not enough for {k} classes (need more than {k})"
        )));
    }
    let stats = ClassStats::compute(data);
    for (c, &count) in stats.counts.iter().enumerate() {
        if count == 1 {
            log::warn!("class {c} has a single observation; its covariance is zero");
        }
    }

    let scatters = class_scatters(data, &stats);
    let s_w = weighted_within(&scatters, &stats);
    let s_b = scatter_between(data, &stats)?;
    let eig = generalized_eig(&s_b, &s_w, options.ridge)?;

    let denom = (n - k) as f64;
    let inverses: Vec<Matrix> = match options.covariance {
        CovarianceMode::PerClass => scatters
            .iter()
            .zip(&stats.counts)
            .map(|(scatter, &count)| {
                let mut sigma = scatter.clone();
                let w = (count as f64 - 1.0) / denom;
                sigma.as_mut_slice().iter_mut().for_each(|v| *v *= w);
                invert_spd(&sigma, options.ridge)
            })
            .collect::<Result<_>>()?,
        CovarianceMode::Shared => {
            let d = data.dim;
            let mut pooled = Matrix::zeros(d, d);
            for scatter in &scatters {
                linalg::axpy(1.0 / denom, scatter.as_slice(), pooled.as_mut_slice());
            }
            vec![invert_spd(&pooled, options.ridge)?; k]
        }
    };

    let d = data.dim;
    let mut classifier_weights = Matrix::zeros(k, d);
    let mut classifier_bias = Vec::with_capacity(k);
    for c in 0..k {
        let mean = &stats.class_means[c];
        let w = inverses[c].mul_vec(mean)?;
        classifier_bias.push(-0.5 * dot(mean, &w) + stats.priors[c].ln());
        classifier_weights.row_mut(c).copy_from_slice(&w);
    }

    Ok(LdaModel {
        transform: eig.eigenvectors,
        eigenvalues: eig.eigenvalues,
        classifier_weights,
        classifier_bias,
        stats,
    })
}

impl LdaModel {
    pub fn dim(&self) -> usize {
        self.transform.cols()
    }

    pub fn class_count(&self) -> usize {
        self.classifier_bias.len()
    }

    /// Projects `x` onto the LDA axes (no activation).
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.transform.mul_vec(x)
    }

    /// All discriminant scores `δ = W x + b`.
    pub fn discriminants(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scores = self.classifier_weights.mul_vec(x)?;
        for (s, b) in scores.iter_mut().zip(&self.classifier_bias) {
            *s += b;
        }
        Ok(scores)
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.discriminants(x)?))
    }

    /// Number of eigenvalues above `rel_tol` times the largest one.
    pub fn significant_components(&self, rel_tol: f64) -> usize {
        significant_count(&self.eigenvalues, rel_tol)
    }
}

pub fn significant_count(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let max = eigenvalues.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
