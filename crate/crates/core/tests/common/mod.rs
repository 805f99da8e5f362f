#![allow(dead_code)]

pub mod oracle;

use ldainit::data::{page_from_fn, Page};
use ldainit::linalg::Matrix;
use ldainit::init::init_random;
use ldainit::network::{document_architecture, LayerSpec, Network, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pure color for each class: black background, then one saturated channel
/// per foreground class.
pub fn class_color(label: u8) -> [u8; 3] {
    match label {
        0 => [0, 0, 0],
        c => {
            let mut rgb = [0, 0, 0];
            rgb[c as usize - 1] = 255;
            rgb
        }
    }
}

/// A page whose pixels are colored by class, labels from `f`.
pub fn coded_page(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Page {
    page_from_fn(width, height, 4, |x, y| {
        let l = f(x, y);
        (class_color(l), l)
    })
    .unwrap()
}

/// Document-architecture network that copies the RGB value of the centre
/// pixel through every hidden layer and classifies it by color. It is
/// exact on pages built by [`coded_page`].
pub fn centre_pixel_oracle() -> Network {
    let mut net = Network::new(3, 4, &document_architecture()).unwrap();
    for layer in net.hidden_mut() {
        let (ph, pw) = (layer.spec.patch_h, layer.spec.patch_w);
        let ch = layer.input_channels;
        let centre = ((ph / 2) * pw + pw / 2) * ch;
        let mut w = Matrix::zeros(layer.neurons(), layer.fan_in());
        for c in 0..3 {
            w.row_mut(c)[centre + c] = 1.0;
        }
        layer.weights = w;
    }
    let head = net.head_mut();
    let mut w = Matrix::zeros(4, 72);
    for c in 0..3 {
        w.row_mut(0)[c] = -1.0 / 3.0;
        w.row_mut(c + 1)[c] = 1.0;
    }
    head.weights = w;
    net
}

/// Scaled patch with top-left corner `(x0, y0)`.
pub fn patch_at(page: &Page, x0: usize, y0: usize, h: usize, w: usize) -> Vec<f64> {
    let scaled = page.scaled();
    let width = page.width() as usize;
    let mut out = Vec::with_capacity(h * w * 3);
    for dy in 0..h {
        let start = ((y0 + dy) * width + x0) * 3;
        out.extend_from_slice(&scaled[start..start + w * 3]);
    }
    out
}

/// Two hidden layers (4 and 3 neurons) with non-trivial weights and biases.
pub fn tiny_network(seed: u64) -> Network {
    let specs = [
        LayerSpec {
            patch_h: 2,
            patch_w: 3,
            offset_h: 1,
            offset_w: 2,
            neurons: 4,
        },
        LayerSpec::square(2, 1, 3),
    ];
    let net = Network::new(2, 3, &specs).unwrap();
    let mut net = init_random(&net, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in net.layers_mut() {
        for w in layer.weights.as_mut_slice() {
            *w *= 3.0;
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    net
}

pub fn random_batch(net: &Network, rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            patch: (0..net.patch_len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: rng.random_range(0..net.class_count()),
        })
        .collect()
}

/// Largest relative deviation between analytic gradients and central
/// differences (h = 1e-4) over every parameter, and the number checked.
pub fn gradient_check(net: &Network, batch_seed: u64) -> (f64, usize) {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
    let batch = random_batch(net, &mut rng, 6);
    let loss = |n: &Network| n.loss_and_gradients(&batch).unwrap().0;
    let (_, grads) = net.loss_and_gradients(&batch).unwrap();
    let (mut worst, mut checked) = (0.0f64, 0);
    for l in 0..net.layers().len() {
        let n_weights = net.layers()[l].weights.as_slice().len();
        let n_bias = net.layers()[l].bias.len();
        for i in 0..n_weights + n_bias {
            let perturbed = |delta: f64| {
                let mut p = net.clone();
                let layer = &mut p.layers_mut()[l];
                if i < n_weights {
                    layer.weights.as_mut_slice()[i] += delta;
                } else {
                    layer.bias[i - n_weights] += delta;
                }
                loss(&p)
            };
            let numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
            let analytic = if i < n_weights {
                grads.layers[l].weights.as_slice()[i]
            } else {
                grads.layers[l].bias[i - n_weights]
            };
            // Floor for coordinates whose gradient is essentially zero.
            let scale = analytic.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((analytic - numeric).abs() / scale);
            checked += 1;
        }
    }
    (worst, checked)
}
