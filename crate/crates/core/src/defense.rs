//! Perturbations a releasing party can apply to a gradient before
//! publishing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unlearnprobe_autodiff::GradientVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DefenseConfig {
    #[default]
    None,
    Prune { p: f64 },
    Laplace { sigma: f64, seed: u64 },
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DefenseConfig::None => Ok(()),
            DefenseConfig::Prune { p } if (0.0..1.0).contains(&p) => Ok(()),
            DefenseConfig::Prune { p } => Err(Error::Config(format!("prune fraction must lie in [0, 1), got {p}"))),
            DefenseConfig::Laplace { sigma, .. } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            DefenseConfig::Laplace { sigma, .. } => Err(Error::Config(format!("laplace scale must be positive, got {sigma}"))),
        }
    }

    /// Applies the defense to one released gradient. `stream` separates the
    /// noise of different gradients drawn under the same seed.
    pub fn apply(&self, gv: &GradientVector, stream: u64) -> Result<GradientVector> {
        self.validate()?;
        match *self {
            DefenseConfig::None => Ok(gv.clone()),
            DefenseConfig::Prune { p } => prune_gradient(gv, p),
            DefenseConfig::Laplace { sigma, seed } => laplace_gradient(gv, sigma, seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }
}

/// Zeroes the `⌊p·M⌋` entries of smallest magnitude; among equal
/// magnitudes the lower index goes first.
pub fn prune_gradient(gv: &GradientVector, p: f64) -> Result<GradientVector> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("prune fraction must lie in [0, 1), got {p}")));
    }
    Ok(gv.map_flat(|mut flat| {
        let count = (p * flat.len() as f64).floor() as usize;
        let mut order: Vec<usize> = (0..flat.len()).collect();
        order.sort_by(|&a, &b| flat[a].abs().total_cmp(&flat[b].abs()).then(a.cmp(&b)));
        for &i in &order[..count] {
            flat[i] = 0.0;
        }
        flat
    })?)
}

/// Adds i.i.d. Laplace(0, σ) noise to every entry.
pub fn laplace_gradient(gv: &GradientVector, sigma: f64, seed: u64) -> Result<GradientVector> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("laplace scale must be positive, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(gv.map_flat(|flat| flat.into_iter().map(|v| v + sample_laplace(&mut rng, sigma)).collect())?)
}

/// Inverse-CDF draw from Laplace(0, b).
pub fn sample_laplace(rng: &mut impl Rng, b: f64) -> f64 {
    // u in (-1/2, 1/2), excluding the endpoint where ln(0) would occur.
    let u: f64 = rng.random::<f64>() - 0.5;
    let u = if u == -0.5 { -0.5 + f64::EPSILON } else { u };
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}
