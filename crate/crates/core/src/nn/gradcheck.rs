use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor4;
use super::Layer;
use crate::error::Result;

/// Worst relative errors found by [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub input_max_rel: f64,
    pub param_max_rel: f64,
    pub input_checked: usize,
    pub param_checked: usize,
}

impl GradReport {
    pub fn max_rel(&self) -> f64 {
        self.input_max_rel.max(self.param_max_rel)
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares backprop against central differences (step `h`) of the scalar
/// loss `<r, layer(x)>` for a random projection `r`. At most `max_coords`
/// input and `max_coords` parameter coordinates are probed.
///
/// The layer runs in training mode throughout, so batch norm uses batch
/// statistics on every evaluation.
pub fn grad_check<R: Rng>(
    layer: &mut dyn Layer,
    x: &Tensor4,
    h: f64,
    max_coords: usize,
    rng: &mut R,
) -> Result<GradReport> {
    let y = layer.forward(x, true)?;
    let r = Tensor4::from_fn(y.dims(), |_| rng.sample(StandardNormal));
    layer.zero_grad();
    let dx = layer.backward(&r)?;
    let mut analytic = Vec::new();
    layer.visit_params(&mut |p| analytic.extend_from_slice(&p.grad));
    layer.zero_grad();

    let loss = |layer: &mut dyn Layer, x: &Tensor4| -> Result<f64> { Ok(layer.forward(x, true)?.dot(&r)) };

    let mut input_max_rel = 0.0f64;
    let picks = sample(rng, x.len(), max_coords.min(x.len()));
    for i in picks.iter() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let lp = loss(layer, &xp)?;
        xp.data_mut()[i] -= 2.0 * h;
        let lm = loss(layer, &xp)?;
        input_max_rel = input_max_rel.max(rel_err(dx.data()[i], (lp - lm) / (2.0 * h)));
    }

    let mut param_max_rel = 0.0f64;
    let picks = sample(rng, analytic.len(), max_coords.min(analytic.len()));
    for i in picks.iter() {
        let nudge = |layer: &mut dyn Layer, delta: f64| {
            let mut offset = 0;
            layer.visit_params(&mut |p| {
                if i >= offset && i < offset + p.len() {
                    p.value[i - offset] += delta;
                }
                offset += p.len();
            });
        };
        nudge(layer, h);
        let lp = loss(layer, x)?;
        nudge(layer, -2.0 * h);
        let lm = loss(layer, x)?;
        nudge(layer, h);
        param_max_rel = param_max_rel.max(rel_err(analytic[i], (lp - lm) / (2.0 * h)));
    }

    Ok(GradReport {
        input_max_rel,
        param_max_rel,
        input_checked: x.len().min(max_coords),
        param_checked: analytic.len().min(max_coords),
    })
}
