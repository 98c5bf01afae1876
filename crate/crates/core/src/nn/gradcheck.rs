//! Central finite-difference checks of analytic gradients (f64 only).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{cross_entropy, Layer, LayerKind, Model, NnError, Tensor};

/// Gradients smaller than this are compared absolutely rather than
/// relatively, so round-off on near-zero entries is not amplified.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub kind: Option<LayerKind>,
    /// Number of gradient entries compared (inputs and parameters).
    pub checked: usize,
    pub max_rel_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR)
}

fn projection(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks a single layer against the scalar loss `Σ r ⊙ layer(x)` for a
/// fixed random `r`, covering the input gradient and every parameter
/// gradient. Forward passes run in training mode.
pub fn check_layer(layer: &mut Layer<f64>, input: &Tensor<f64>, step: f64, seed: u64) -> Result<GradCheck, NnError> {
    let out = layer.forward(input, true)?;
    let r = Tensor::new(out.shape().to_vec(), projection(out.len(), seed))?;
    let dx = layer.backward(&r)?;
    let param_grads: Vec<Vec<f64>> = layer.grads().iter().map(|g| g.data().to_vec()).collect();

    let loss = |layer: &mut Layer<f64>, x: &Tensor<f64>| -> Result<f64, NnError> {
        Ok(dot(layer.forward(x, true)?.data(), r.data()))
    };
    let mut worst = 0.0f64;
    let mut checked = 0;

    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + step;
        let plus = loss(layer, &x)?;
        x.data_mut()[i] = orig - step;
        let minus = loss(layer, &x)?;
        x.data_mut()[i] = orig;
        worst = worst.max(relative_error(dx.data()[i], (plus - minus) / (2.0 * step)));
        checked += 1;
    }

    for (p, grads) in param_grads.iter().enumerate() {
        for (i, &analytic) in grads.iter().enumerate() {
            let orig = layer.params()[p].data()[i];
            layer.params_mut()[p].data_mut()[i] = orig + step;
            let plus = loss(layer, input)?;
            layer.params_mut()[p].data_mut()[i] = orig - step;
            let minus = loss(layer, input)?;
            layer.params_mut()[p].data_mut()[i] = orig;
            worst = worst.max(relative_error(analytic, (plus - minus) / (2.0 * step)));
            checked += 1;
        }
    }
    Ok(GradCheck {
        kind: Some(layer.kind()),
        checked,
        max_rel_error: worst,
    })
}

/// Checks every trainable parameter of a model against the mean
/// cross-entropy on one batch.
pub fn check_model(model: &mut Model<f64>, x: &Tensor<f64>, labels: &[usize], step: f64) -> Result<GradCheck, NnError> {
    model.loss_and_grad(x, labels)?;
    let analytic: Vec<Vec<Vec<f64>>> = model
        .layers()
        .iter()
        .map(|l| l.grads().iter().map(|g| g.data().to_vec()).collect())
        .collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (li, layer_grads) in analytic.iter().enumerate() {
        for (p, grads) in layer_grads.iter().enumerate() {
            for (i, &g) in grads.iter().enumerate() {
                let at = |model: &mut Model<f64>, v: f64| -> Result<f64, NnError> {
                    model.layers_mut()[li].params_mut()[p].data_mut()[i] = v;
                    let logits = model.forward(x, true)?;
                    Ok(cross_entropy(&logits, labels)?.0)
                };
                let orig = model.layers()[li].params()[p].data()[i];
                let plus = at(model, orig + step)?;
                let minus = at(model, orig - step)?;
                model.layers_mut()[li].params_mut()[p].data_mut()[i] = orig;
                worst = worst.max(relative_error(g, (plus - minus) / (2.0 * step)));
                checked += 1;
            }
        }
    }
    Ok(GradCheck {
        kind: None,
        checked,
        max_rel_error: worst,
    })
}
