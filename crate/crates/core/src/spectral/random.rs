//! Seeded random fields.
//!
//! The generator is `ChaCha8Rng::seed_from_u64(seed)`. Coefficients are drawn
//! component by component in spectral storage order (`[z][y][kx]`, `kx`
//! fastest); each eligible coefficient takes two `StandardNormal` draws (real,
//! then imaginary) scaled by `(1 + |k|²)^(-slope/2)`. Ineligible coefficients
//! consume no draws. The `kx = 0` and `kx = N/2` planes are then made
//! conjugate-symmetric by averaging each pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Complex64, Grid, SpectralField};

/// Which coefficients a random draw populates and how they decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSpec {
    /// Radial cutoff `|k| <= max_k`.
    pub max_k: f64,
    /// Restrict to the 2/3-rule band.
    pub dealiased: bool,
    /// Amplitude decay exponent.
    pub slope: f64,
    /// Leave the `k = 0` coefficient at zero.
    pub zero_mean: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { max_k: f64::INFINITY, dealiased: true, slope: 2.0, zero_mean: true }
    }
}

impl RandomSpec {
    /// Every coefficient on the grid, flat spectrum.
    pub fn full() -> Self {
        Self { max_k: f64::INFINITY, dealiased: false, slope: 0.0, zero_mean: false }
    }

    /// Dealiased, decaying spectrum limited to `|k| <= max_k`.
    pub fn band(max_k: f64) -> Self {
        Self { max_k, ..Self::default() }
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }
}

/// Random real field with `m` components.
pub fn random_field(grid: &Grid, m: usize, seed: u64, spec: &RandomSpec) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, m);
    for comp in f.comps_mut().iter_mut() {
        for (idx, v) in comp.iter_mut().enumerate() {
            let k = grid.wavenumber(idx);
            if k > spec.max_k
                || (spec.dealiased && !grid.in_dealias_band(idx))
                || (spec.zero_mean && k == 0.0)
            {
                continue;
            }
            let amp = (1.0 + k * k).powf(-0.5 * spec.slope);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v = Complex64::new(re, im) * amp;
        }
    }
    f.enforce_hermitian();
    f
}

/// Divergence-free random vector field.
pub fn random_solenoidal(grid: &Grid, seed: u64, spec: &RandomSpec) -> SpectralField {
    random_field(grid, 3, seed, spec).leray_project().expect("three components")
}
