use rand::Rng;

use crate::error::Result;
use crate::numerics::{self, DenseArray};

/// Convolution with its own stride and padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    /// `O×C×k×k`
    pub weight: DenseArray,
    /// `O`
    pub bias: DenseArray,
    pub stride: usize,
    pub padding: usize,
}

impl Conv {
    /// He-uniform initialisation.
    pub fn new(rng: &mut impl Rng, out: usize, inp: usize, k: usize, stride: usize, padding: usize) -> Self {
        let bound = (6.0 / (inp * k * k) as f64).sqrt();
        Self {
            weight: DenseArray::from_fn(&[out, inp, k, k], |_| rng.gen_range(-bound..bound)),
            bias: DenseArray::zeros(&[out]),
            stride,
            padding,
        }
    }

    pub fn forward(&self, x: &DenseArray) -> Result<DenseArray> {
        numerics::conv2d(x, &self.weight, Some(&self.bias), self.stride, self.padding)
    }

    /// Returns `d input` and accumulates parameter gradients into `grad`.
    pub fn backward(&self, x: &DenseArray, dy: &DenseArray, grad: &mut Conv) -> Result<DenseArray> {
        let (dx, dw, db) = numerics::conv2d_backward(x, &self.weight, dy, self.stride, self.padding)?;
        grad.weight.axpy(1.0, &dw)?;
        grad.bias.axpy(1.0, &db)?;
        Ok(dx)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
            stride: self.stride,
            padding: self.padding,
        }
    }
}

pub fn relu(x: &DenseArray) -> DenseArray {
    x.map(|v| v.max(0.0))
}

/// `dy` masked by where the pre-activation was positive.
pub fn relu_backward(pre: &DenseArray, dy: &DenseArray) -> Result<DenseArray> {
    pre.zip_with(dy, |p, g| if p > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Texture-enhancement stand-in: `x + expand(relu(reduce(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub reduce: Conv,
    pub expand: Conv,
}

pub struct ResidualCache {
    x: DenseArray,
    pre: DenseArray,
    hidden: DenseArray,
}

impl Residual {
    pub fn new(rng: &mut impl Rng, c: usize) -> Self {
        let mut expand = Conv::new(rng, c, c, 3, 1, 1);
        // start close to the identity map
        expand.weight = expand.weight.scale(0.1);
        Self {
            reduce: Conv::new(rng, c, c, 1, 1, 0),
            expand,
        }
    }

    pub fn forward(&self, x: &DenseArray) -> Result<(DenseArray, ResidualCache)> {
        let pre = self.reduce.forward(x)?;
        let hidden = relu(&pre);
        let out = x.add(&self.expand.forward(&hidden)?)?;
        Ok((
            out,
            ResidualCache {
                x: x.clone(),
                pre,
                hidden,
            },
        ))
    }

    pub fn backward(&self, cache: &ResidualCache, dy: &DenseArray, grad: &mut Residual) -> Result<DenseArray> {
        let d_hidden = self.expand.backward(&cache.hidden, dy, &mut grad.expand)?;
        let d_pre = relu_backward(&cache.pre, &d_hidden)?;
        let dx = self.reduce.backward(&cache.x, &d_pre, &mut grad.reduce)?;
        dy.add(&dx)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            reduce: self.reduce.zeros_like(),
            expand: self.expand.zeros_like(),
        }
    }
}
