//! Independent reference computations, written for clarity rather than
//! speed, and using nalgebra where a factorization is needed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn class_mean(rows: &[Vec<f64>], labels: &[usize], c: usize) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    let mut n = 0.0;
    for (x, &l) in rows.iter().zip(labels) {
        if l == c {
            for i in 0..d {
                m[i] += x[i];
            }
            n += 1.0;
        }
    }
    m.iter().map(|v| v / n).collect()
}

pub fn overall_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d).map(|i| rows.iter().map(|x| x[i]).sum::<f64>() / rows.len() as f64).collect()
}

fn count(labels: &[usize], c: usize) -> f64 {
    labels.iter().filter(|&&l| l == c).count() as f64
}

/// `Σ_{x∈c} (x − μ_c)(x − μ_c)ᵀ` by explicit loops.
pub fn class_scatter(rows: &[Vec<f64>], labels: &[usize], c: usize) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let mu = class_mean(rows, labels, c);
    let mut s = vec![vec![0.0; d]; d];
    for (x, &l) in rows.iter().zip(labels) {
        if l != c {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                s[i][j] += (x[i] - mu[i]) * (x[j] - mu[j]);
            }
        }
    }
    s
}

/// Within-class scatter with the mean-class-size and inverse-count weights.
pub fn naive_within(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let n_bar = rows.len() as f64 / classes as f64;
    let mut s = vec![vec![0.0; d]; d];
    for c in 0..classes {
        let sc = class_scatter(rows, labels, c);
        let w = n_bar / count(labels, c);
        for i in 0..d {
            for j in 0..d {
                s[i][j] += w * sc[i][j];
            }
        }
    }
    s
}

pub fn naive_between(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let n_bar = rows.len() as f64 / classes as f64;
    let mu = overall_mean(rows);
    let mut s = vec![vec![0.0; d]; d];
    for c in 0..classes {
        let mc = class_mean(rows, labels, c);
        let w = n_bar / count(labels, c);
        for i in 0..d {
            for j in 0..d {
                s[i][j] += w * (mc[i] - mu[i]) * (mc[j] - mu[j]);
            }
        }
    }
    s
}

pub fn to_na(m: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

pub fn quad(m: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * m[i][j] * v[j];
        }
    }
    s
}

pub fn fisher_quotient(s_b: &[Vec<f64>], s_w: &[Vec<f64>], v: &[f64]) -> f64 {
    quad(s_b, v) / quad(s_w, v)
}

/// Best Fisher quotient over `steps` unit directions spread over a half
/// circle (a direction and its negation give the same quotient).
pub fn best_grid_quotient(s_b: &[Vec<f64>], s_w: &[Vec<f64>], steps: usize) -> f64 {
    (0..steps)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / steps as f64;
            fisher_quotient(s_b, s_w, &[t.cos(), t.sin()])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The per-class discriminant `xᵀΣ_c⁻¹μ_c − ½μ_cᵀΣ_c⁻¹μ_c + ln π_c`,
/// evaluated one class at a time with `Σ_c` scaled by `(N_c − 1)/(n − |C|)`
/// and regularized like the library: `+ ridge·tr(Σ_c)/d · I`.
pub fn scalar_discriminant(
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    ridge: f64,
    c: usize,
    x: &[f64],
) -> f64 {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let n_c = count(labels, c);
    let mut sigma = to_na(&class_scatter(rows, labels, c)) * ((n_c - 1.0) / (n - classes as f64));
    let shift = ridge * sigma.trace() / d as f64;
    for i in 0..d {
        sigma[(i, i)] += shift;
    }
    let inv = sigma.cholesky().expect("positive definite").inverse();
    let mu = nalgebra::DVector::from_vec(class_mean(rows, labels, c));
    let x = nalgebra::DVector::from_row_slice(x);
    let inv_mu = &inv * &mu;
    x.dot(&inv_mu) - 0.5 * mu.dot(&inv_mu) + (n_c / n).ln()
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random labelled data: `per_class[c]` samples of class `c` around a
/// random mean with a random per-class scale.
pub fn random_dataset(rng: &mut ChaCha8Rng, d: usize, per_class: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in per_class.iter().enumerate() {
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..2.0)).collect();
        for _ in 0..n {
            rows.push((0..d).map(|i| mean[i] + scale[i] * gaussian(rng)).collect());
            labels.push(c);
        }
    }
    (rows, labels)
}
