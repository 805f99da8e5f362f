//! Weight initialization: layer-wise LDA and the uniform random baseline.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::{fit_with, FitOptions, LabeledPatchSet};
use crate::network::{gather_window, Network, SampleSource};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Lda,
    Random,
}

impl std::str::FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lda" => Ok(Self::Lda),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidInput(format!("unknown init method `{other}`"))),
        }
    }
}

impl std::fmt::Display for InitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitMethod::Lda => "lda",
            InitMethod::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub method: InitMethod,
    pub sample_count: usize,
    /// Leading eigenvalues used by each hidden layer, one per neuron.
    pub spectra: Vec<Vec<f64>>,
    pub duration_secs: f64,
}

/// Initializes every hidden layer with the LDA transform of its own inputs
/// and the head with the LDA discriminant classifier.
///
/// `k` patches are drawn from `source` with `seed`. Layer 1 is fitted on the
/// raw windows of those patches; each later layer on the windows of the
/// activation grid produced by the already-initialized layers. Every grid
/// position is a separate observation labelled with the patch's label. Hidden
/// biases are zero; the head is fitted on the flattened last hidden output.
pub fn init_lda(
    net: &Network,
    source: &dyn SampleSource,
    seed: u64,
    k: usize,
    options: &FitOptions,
) -> Result<(Network, InitReport)> {
    let started = Instant::now();
    let class_count = net.class_count();
    if source.class_count() != class_count {
        return Err(Error::InvalidInput(format!(
            "sampler has {} classes, network has {class_count}",
            source.class_count()
        )));
    }
    for (i, g) in net.grids().iter().enumerate() {
        let observations = k * g.positions();
        if observations <= class_count {
            return Err(Error::InvalidInput(format!(
                "k = {k} yields {observations} observations for layer {}, \
                 more than {class_count} are required",
                i + 1
            )));
        }
        let fan_in = net.layers()[i].fan_in();
        if observations < fan_in + class_count {
            log::warn!(
                "layer {}: {observations} observations for {fan_in} dimensions; \
                 the within-class scatter is rank deficient and relies on the ridge",
                i + 1
            );
        }
    }

    let samples = source.draw(seed, k)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut current: Vec<Vec<f64>> = samples.into_iter().map(|s| s.patch).collect();

    let mut out = net.clone();
    let hidden_count = net.hidden().len();
    let mut spectra = Vec::with_capacity(hidden_count);
    for i in 0..hidden_count {
        let data = layer_observations(&out, i, &current, &labels)?;
        let model = fit_with(&data, options)?;
        drop(data);
        let neurons = out.layers()[i].neurons();
        let layer = &mut out.hidden_mut()[i];
        layer.weights = model.transform.top_rows(neurons)?;
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
        spectra.push(model.eigenvalues[..neurons].to_vec());
        log::debug!(
            "layer {}: leading eigenvalues {:?}",
            i + 1,
            &model.eigenvalues[..neurons.min(5)]
        );

        let g = out.grids()[i];
        let fan_in = out.layers()[i].fan_in();
        let layer_net = &out;
        current = current
            .par_iter()
            .map(|input| {
                let mut output = vec![0.0; g.out_len()];
                let mut window = vec![0.0; fan_in];
                layer_net.apply_layer(i, input, &mut output, &mut window);
                output
            })
            .collect();
    }

    let head_dim = out.head().fan_in();
    let mut features = Vec::with_capacity(current.len() * head_dim);
    for c in &current {
        features.extend_from_slice(c);
    }
    let data = LabeledPatchSet::new(head_dim, class_count, features, labels)?;
    let model = fit_with(&data, options)?;
    let head = out.head_mut();
    head.weights = model.classifier_weights;
    head.bias = model.classifier_bias;

    Ok((
        out,
        InitReport {
            method: InitMethod::Lda,
            sample_count: k,
            spectra,
            duration_secs: started.elapsed().as_secs_f64(),
        },
    ))
}

/// Every input window of layer `index`, one observation per grid position.
fn layer_observations(
    net: &Network,
    index: usize,
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> Result<LabeledPatchSet> {
    let g = net.grids()[index];
    let spec = net.layers()[index].spec;
    let fan_in = net.layers()[index].fan_in();
    let per_sample = g.positions();
    let mut features = vec![0.0; inputs.len() * per_sample * fan_in];
    features
        .par_chunks_mut(per_sample * fan_in)
        .zip(inputs.par_iter())
        .for_each(|(dst, input)| {
            for gy in 0..g.out_h {
                for gx in 0..g.out_w {
                    let pos = gy * g.out_w + gx;
                    gather_window(
                        input,
                        g.in_w,
                        g.in_ch,
                        spec.patch_h,
                        spec.patch_w,
                        gy * spec.offset_h,
                        gx * spec.offset_w,
                        &mut dst[pos * fan_in..(pos + 1) * fan_in],
                    );
                }
            }
        });
    let obs_labels = labels
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, per_sample))
        .collect();
    LabeledPatchSet::new(fan_in, net.class_count(), features, obs_labels)
}

/// Draws every weight uniformly from `[−1/√n, 1/√n]`, `n` being the fan-in
/// of the layer, and zeroes the biases.
pub fn init_random(net: &Network, seed: u64) -> Network {
    let mut rng = rng_from_seed(seed);
    let mut out = net.clone();
    for layer in out.layers_mut() {
        let bound = 1.0 / (layer.fan_in() as f64).sqrt();
        for w in layer.weights.as_mut_slice() {
            *w = rng.random_range(-bound..=bound);
        }
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
    }
    out
}

pub fn random_report() -> InitReport {
    InitReport {
        method: InitMethod::Random,
        sample_count: 0,
        spectra: Vec::new(),
        duration_secs: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LayerSpec, Sample};

    struct Fixed(Vec<Sample>, usize);

    impl SampleSource for Fixed {
        fn class_count(&self) -> usize {
            self.1
        }

        fn draw(&self, _seed: u64, count: usize) -> Result<Vec<Sample>> {
            Ok(self.0.iter().cycle().take(count).cloned().collect())
        }
    }

    fn one_d_source() -> Fixed {
        let values = [-1.2, -0.8, -1.0, 0.8, 1.2, 1.0];
        Fixed(
            values
                .iter()
                .map(|&v| Sample {
                    patch: vec![v],
                    label: usize::from(v > 0.0),
                })
                .collect(),
            2,
        )
    }

    #[test]
    fn degenerate_architecture() {
        let net = Network::new(1, 2, &[LayerSpec::square(1, 1, 1)]).unwrap();
        let (net, report) = init_lda(&net, &one_d_source(), 0, 6, &FitOptions::default()).unwrap();
        assert_eq!(net.hidden()[0].weights.as_slice(), &[1.0]);
        assert_eq!(net.hidden()[0].bias, vec![0.0]);
        assert_eq!(report.spectra.len(), 1);
        assert_eq!(report.spectra[0].len(), 1);
        // The head separates the classes at the origin of its (softsign) input.
        let s = net.forward(&[0.0]).unwrap().scores;
        assert!((s[0] - s[1]).abs() < 1e-9);
        assert_eq!(net.predict(&[1.0]).unwrap(), 1);
        assert_eq!(net.predict(&[-1.0]).unwrap(), 0);
    }

    #[test]
    fn too_few_samples() {
        let net = Network::new(1, 2, &[LayerSpec::square(1, 1, 1)]).unwrap();
        let err = init_lda(&net, &one_d_source(), 0, 2, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn random_bounds_and_determinism() {
        let net = Network::new(1, 3, &[LayerSpec::square(2, 1, 4)]).unwrap();
        let a = init_random(&net, 11);
        assert_eq!(a, init_random(&net, 11));
        assert_ne!(a, init_random(&net, 12));
        // fan_in = 4 for the hidden layer
        assert!(a.hidden()[0].weights.as_slice().iter().all(|w| w.abs() <= 0.5));
        assert!(a.hidden()[0].weights.as_slice().iter().any(|&w| w != 0.0));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }
}
