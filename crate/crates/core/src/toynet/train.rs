//! Gradient descent on the short-term loss through the whole hand-chained
//! backward pass.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::losses::{self, LossConfig};
use crate::numerics::DenseArray;
use crate::par;

use super::short::ShortTermModel;
use super::synth::ToySample;

/// Training stops with [`Error::Divergence`] once the loss exceeds this
/// multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<DenseArray>,
    v: Vec<DenseArray>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn update(&mut self, params: Vec<&mut DenseArray>, grads: Vec<&DenseArray>) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract(format!(
                "{} params, {} grads",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| g.zeros_like()).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            g.expect_shape(p.shape())?;
            let pd = p.data_mut();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                pd[i] -= self.lr * (md[i] / bc1) / ((vd[i] / bc2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Mean short-term loss over `samples`. `Some(freeze_motion)` also returns the
/// averaged parameter gradient.
pub fn batch_loss(
    model: &ShortTermModel,
    samples: &[ToySample],
    cfg: &LossConfig,
    backward: Option<bool>,
) -> Result<(f64, Option<ShortTermModel>)> {
    if samples.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let per = par::map_slice(samples, |s| -> Result<(f64, Option<ShortTermModel>)> {
        let [a, b, c] = &s.frames;
        let fwd = model.forward(a, b, Some(c))?;
        let loss = losses::short_loss(&fwd.prediction, &s.gt, cfg)?.total;
        let g = match backward {
            Some(freeze) => {
                let d = losses::short_loss_grad_array(&fwd.prediction, &s.gt, cfg)?;
                Some(model.backward(&fwd, &d, freeze)?.params)
            }
            None => None,
        };
        Ok((loss, g))
    });
    let scale = 1.0 / samples.len() as f64;
    let mut total = 0.0;
    let mut acc: Option<ShortTermModel> = None;
    // fold in sample order so the result does not depend on scheduling
    for item in per {
        let (l, g) = item?;
        total += l * scale;
        if let Some(g) = g {
            match &mut acc {
                None => {
                    let mut z = g.zeros_like();
                    for ((_, a), (_, b)) in z.params_mut().into_iter().zip(g.params()) {
                        a.axpy(scale, b)?;
                    }
                    acc = Some(z);
                }
                Some(a) => {
                    for ((_, x), (_, y)) in a.params_mut().into_iter().zip(g.params()) {
                        x.axpy(scale, y)?;
                    }
                }
            }
        }
    }
    Ok((total, acc))
}

/// Half-cosine decay from `peak` at step 0 towards 0 at `steps`.
pub fn cosine_lr(peak: f64, step: usize, steps: usize) -> f64 {
    if steps == 0 {
        return peak;
    }
    peak * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos())
}

/// Trains `model` in place for `steps` Adam steps with peak rate `lr`
/// ([`cosine_lr`]); returns the loss before every step plus the final loss
/// (`steps + 1` entries). With `freeze_motion` no gradient passes the
/// correlation blocks, so φ and everything upstream stay at their
/// initial values.
pub fn overfit_demo(
    model: &mut ShortTermModel,
    samples: &[ToySample],
    steps: usize,
    lr: f64,
    freeze_motion: bool,
) -> Result<Vec<f64>> {
    let cfg = LossConfig::default();
    let mut opt = Adam::new(lr);
    let mut trace = Vec::with_capacity(steps + 1);
    let mut limit = f64::INFINITY;
    for step in 0..=steps {
        let want_grad = (step < steps).then_some(freeze_motion);
        let (loss, grad) = batch_loss(model, samples, &cfg, want_grad)?;
        if step == 0 {
            limit = DIVERGENCE_FACTOR * loss;
        }
        if !loss.is_finite() || loss > limit {
            return Err(Error::Divergence { step, loss, limit });
        }
        trace.push(loss);
        if let Some(g) = grad {
            opt.lr = cosine_lr(lr, step, steps);
            let grads: Vec<&DenseArray> = g.params().into_iter().map(|(_, a)| a).collect();
            let params: Vec<&mut DenseArray> = model.params_mut().into_iter().map(|(_, a)| a).collect();
            opt.update(params, grads)?;
        }
    }
    Ok(trace)
}

/// `step,loss` CSV with round-trippable floats.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in trace.iter().enumerate() {
        writeln!(out, "{i},{l:?}").expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toynet::{short::ShortConfig, synth};

    #[test]
    fn zero_steps_is_initial_loss() {
        let samples = synth::toy_samples(&Default::default(), 1, 0).unwrap();
        let mut model = ShortTermModel::new(ShortConfig::toy(), 0);
        let before = model.clone();
        let trace = overfit_demo(&mut model, &samples, 0, 1e-2, false).unwrap();
        let (l, _) = batch_loss(&model, &samples, &LossConfig::default(), None).unwrap();
        assert_eq!(trace, vec![l]);
        assert_eq!(model, before);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = DenseArray::new(vec![2], vec![1.0, -1.0]).unwrap();
        let g = DenseArray::new(vec![2], vec![0.5, -2.0]).unwrap();
        let mut opt = Adam::new(0.1);
        opt.update(vec![&mut p], vec![&g]).unwrap();
        assert!((p.data()[0] - 0.9).abs() < 1e-6);
        assert!((p.data()[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.01, 0, 200), 0.01);
        assert!((cosine_lr(0.01, 100, 200) - 0.005).abs() < 1e-15);
        assert!(cosine_lr(0.01, 200, 200).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        assert_eq!(trace_csv(&[1.5, 0.25]), "step,loss\n0,1.5\n1,0.25\n");
    }
}
