use crate::error::{dim_err, Error, Result};
use crate::numerics::DenseArray;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// Values in `[0, 1]`.
    Probability,
    /// Values in `{0, 1}`.
    Binary,
}

/// Single-channel `H×W` mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
    kind: MaskKind,
}

impl MaskImage {
    pub fn new(height: usize, width: usize, values: Vec<f64>, kind: MaskKind) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(dim_err!("{} values for a {height}×{width} mask", values.len()));
        }
        let ok = match kind {
            MaskKind::Probability => values.iter().all(|v| (0.0..=1.0).contains(v)),
            MaskKind::Binary => values.iter().all(|&v| v == 0.0 || v == 1.0),
        };
        if !ok {
            return Err(Error::Input(format!("mask values violate {kind:?} range")));
        }
        Ok(Self {
            height,
            width,
            values,
            kind,
        })
    }

    pub fn probability(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(height, width, values, MaskKind::Probability)
    }

    pub fn binary(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(height, width, values, MaskKind::Binary)
    }

    pub fn zeros(height: usize, width: usize, kind: MaskKind) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
            kind,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// `v >= threshold` becomes foreground.
    pub fn binarize(&self, threshold: f64) -> MaskImage {
        Self {
            height: self.height,
            width: self.width,
            values: self
                .values
                .iter()
                .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
                .collect(),
            kind: MaskKind::Binary,
        }
    }

    /// Treats a binary mask as a probability map.
    pub fn into_probability(mut self) -> Self {
        self.kind = MaskKind::Probability;
        self
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            let row = &mut out.values[y * self.width..(y + 1) * self.width];
            row.reverse();
        }
        out
    }

    /// As a `1×H×W` array.
    pub fn to_array(&self) -> DenseArray {
        DenseArray::new(vec![1, self.height, self.width], self.values.clone()).expect("mask extents are positive")
    }

    pub fn expect_extent(&self, other: &MaskImage) -> Result<()> {
        if self.extent() != other.extent() {
            return Err(dim_err!(
                "mask extents {:?} and {:?} differ",
                self.extent(),
                other.extent()
            ));
        }
        Ok(())
    }
}
