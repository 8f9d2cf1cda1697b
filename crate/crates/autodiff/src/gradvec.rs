//! Parameter-aligned gradients.

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// A gradient split into segments that mirror a model's parameter list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    segments: Vec<Tensor>,
}

impl GradientVector {
    pub fn new(segments: Vec<Tensor>) -> Self {
        Self { segments }
    }

    /// Zeros shaped like `layout`.
    pub fn zeros_like(layout: &[[usize; 2]]) -> Self {
        Self::new(layout.iter().map(|&[r, c]| Tensor::zeros(r, c)).collect())
    }

    pub fn segments(&self) -> &[Tensor] {
        &self.segments
    }

    pub fn layout(&self) -> Vec<[usize; 2]> {
        self.segments.iter().map(Tensor::shape).collect()
    }

    /// Total entry count `M`.
    pub fn len(&self) -> usize {
        self.segments.iter().map(Tensor::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| s.data().iter().copied())
            .collect()
    }

    /// Rebuilds a gradient with `layout` from a flat vector.
    pub fn from_flat(layout: &[[usize; 2]], flat: &[f64]) -> Result<Self> {
        let total: usize = layout.iter().map(|[r, c]| r * c).sum();
        if total != flat.len() {
            return Err(AutodiffError::Invalid(format!(
                "flat length {} does not match layout total {total}",
                flat.len()
            )));
        }
        let mut off = 0;
        let mut segments = Vec::with_capacity(layout.len());
        for &[r, c] in layout {
            segments.push(Tensor::new(r, c, flat[off..off + r * c].to_vec())?);
            off += r * c;
        }
        Ok(Self { segments })
    }

    /// Applies `f` to the flat view and reshapes back.
    pub fn map_flat(&self, f: impl FnOnce(Vec<f64>) -> Vec<f64>) -> Result<Self> {
        Self::from_flat(&self.layout(), &f(self.flat()))
    }

    pub fn sub(&self, other: &GradientVector) -> Result<GradientVector> {
        if self.layout() != other.layout() {
            return Err(AutodiffError::Invalid("gradient layouts differ".into()));
        }
        let a = self.flat();
        let b = other.flat();
        Self::from_flat(
            &self.layout(),
            &a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_length_is_sum_of_segments() {
        let g = GradientVector::zeros_like(&[[2, 3], [1, 4]]);
        assert_eq!(g.len(), 10);
        assert_eq!(g.flat().len(), 10);
        assert!(GradientVector::from_flat(&[[2, 3]], &[0.0; 5]).is_err());
    }

    #[test]
    fn self_difference_is_zero() {
        let g = GradientVector::from_flat(&[[1, 2], [2, 1]], &[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!(g.sub(&g).unwrap().flat().iter().all(|&v| v == 0.0));
    }
}
