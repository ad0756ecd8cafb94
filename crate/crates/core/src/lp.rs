//! Littlewood-Paley machinery: radial cutoffs, dyadic shell projections and
//! the shell-weighted Sobolev/Besov norms.
//!
//! `χ` equals 1 on `|ξ| ≤ 3/4` and 0 on `|ξ| ≥ 1`, bridged by
//! `g(1-|ξ|) / (g(1-|ξ|) + g(|ξ|-3/4))` with `g(t) = exp(-1/t)` for `t > 0`.
//! `φ(ξ) = χ(ξ/2) - χ(ξ)`, and shell `q ≥ 0` applies `φ(ξ/2^q)`; shell `-1`
//! applies `χ`. All projections are exact Fourier multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, Lp, SpectralField};

/// Smallest shell index.
pub const QMIN: i32 = -1;

/// `λ_q = 2^q`.
pub fn lambda(q: i32) -> f64 {
    2f64.powi(q)
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Radial low-pass cutoff `χ(|ξ|)`.
pub fn chi(xi: f64) -> f64 {
    let xi = xi.abs();
    if xi <= 0.75 {
        1.0
    } else if xi >= 1.0 {
        0.0
    } else {
        let a = bump(1.0 - xi);
        a / (a + bump(xi - 0.75))
    }
}

/// `φ(ξ) = χ(ξ/2) - χ(ξ)`.
pub fn phi(xi: f64) -> f64 {
    chi(0.5 * xi) - chi(xi)
}

/// Shell multiplier `φ_q(ξ)`: `χ` for `q = -1`, `φ(ξ/λ_q)` otherwise.
pub fn phi_q(xi: f64, q: i32) -> f64 {
    if q < 0 {
        chi(xi)
    } else {
        phi(xi / lambda(q))
    }
}

/// Top shell index of `grid`: the smallest `Q` with `(3/4)λ_{Q+1}` at least the
/// largest grid wavenumber, so the shells `-1..=Q` sum to the identity.
pub fn qmax(grid: &Grid) -> i32 {
    let kmax = grid.max_wavenumber();
    let mut q = 0;
    while 0.75 * lambda(q + 1) < kmax {
        q += 1;
    }
    q
}

/// Cached shell multipliers for one grid.
pub(crate) struct ShellTable {
    qmax: i32,
    mult: Vec<Vec<f64>>,
}

fn table(grid: &Grid) -> &ShellTable {
    grid.shell_cache().get_or_init(|| {
        let qmax = qmax(grid);
        let mult = (QMIN..=qmax)
            .map(|q| (0..grid.spectral_len()).map(|i| phi_q(grid.wavenumber(i), q)).collect())
            .collect();
        ShellTable { qmax, mult }
    })
}

fn check_q(grid: &Grid, q: i32) -> Result<()> {
    let qmax = qmax(grid);
    if !(QMIN..=qmax).contains(&q) {
        return Err(Error::ShellOutOfRange { q, qmax });
    }
    Ok(())
}

/// `φ_q(|k|)` for every stored coefficient.
pub fn shell_multiplier(grid: &Grid, q: i32) -> Result<&[f64]> {
    check_q(grid, q)?;
    Ok(&table(grid).mult[(q - QMIN) as usize])
}

/// `Δ_q f`.
pub fn project_shell(f: &SpectralField, q: i32) -> Result<SpectralField> {
    let m = shell_multiplier(f.grid(), q)?;
    Ok(f.apply_multiplier(|i| m[i]))
}

/// `f_{≤Q'} = Σ_{q ≤ Q'} Δ_q f`. Indices below `-1` give zero; indices above
/// the top shell are clamped.
pub fn low_pass(f: &SpectralField, upto: i32) -> SpectralField {
    let t = table(f.grid());
    if upto < QMIN {
        return SpectralField::zeros(f.grid(), f.m());
    }
    let top = upto.min(t.qmax);
    f.apply_multiplier(|i| (QMIN..=top).map(|q| t.mult[(q - QMIN) as usize][i]).sum())
}

/// The pieces `{f_q}` for `q = -1..=Q`.
#[derive(Clone, Debug)]
pub struct ShellSet {
    qmax: i32,
    shells: Vec<SpectralField>,
}

impl ShellSet {
    pub fn qmin(&self) -> i32 {
        QMIN
    }

    pub fn qmax(&self) -> i32 {
        self.qmax
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        QMIN..=self.qmax
    }

    /// `f_q`; zero field outside the stored range.
    pub fn shell(&self, q: i32) -> SpectralField {
        if (QMIN..=self.qmax).contains(&q) {
            self.shells[(q - QMIN) as usize].clone()
        } else {
            let s = &self.shells[0];
            SpectralField::zeros(s.grid(), s.m())
        }
    }

    pub fn shells(&self) -> &[SpectralField] {
        &self.shells
    }

    /// Sum of `f_p` for `p` in `lo..=hi` (clamped to the stored range).
    pub fn sum_range(&self, lo: i32, hi: i32) -> SpectralField {
        let s = &self.shells[0];
        let mut acc = SpectralField::zeros(s.grid(), s.m());
        for p in lo.max(QMIN)..=hi.min(self.qmax) {
            acc = &acc + &self.shells[(p - QMIN) as usize];
        }
        acc
    }

    /// `f_{≤q}`.
    pub fn low(&self, q: i32) -> SpectralField {
        self.sum_range(QMIN, q)
    }

    /// `f̃_q = Σ_{|p-q| ≤ 1} f_p`.
    pub fn near(&self, q: i32) -> SpectralField {
        self.sum_range(q - 1, q + 1)
    }

    pub fn reconstruct(&self) -> SpectralField {
        self.sum_range(QMIN, self.qmax)
    }
}

pub fn decompose(f: &SpectralField) -> ShellSet {
    let qmax = qmax(f.grid());
    let shells = (QMIN..=qmax).map(|q| project_shell(f, q).expect("q in range")).collect();
    ShellSet { qmax, shells }
}

/// `f̃_q` of a decomposition.
pub fn near_shell(set: &ShellSet, q: i32) -> SpectralField {
    set.near(q)
}

/// `‖f_q‖₂²` for `q = -1..=Q`, computed directly from the coefficients.
pub fn shell_norms_sq(f: &SpectralField) -> Vec<f64> {
    let g = f.grid();
    let t = table(g);
    let vol = g.volume();
    t.mult
        .iter()
        .map(|m| {
            let s: f64 = f
                .components()
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .filter(|(i, _)| m[*i] != 0.0)
                        .map(|(i, v)| g.weight(i) * m[i] * m[i] * v.norm_sqr())
                        .sum::<f64>()
                })
                .sum();
            s * vol
        })
        .collect()
}

/// Radial weight `Σ_q λ_q^{2s} φ_q(|k|)²`, so that
/// `Σ_q λ_q^{2s} ⟨Δ_q f, Δ_q g⟩ = ⟨f, W_s g⟩`.
pub fn dyadic_weight(grid: &Grid, s: f64) -> Vec<f64> {
    let t = table(grid);
    let mut w = vec![0.0; grid.spectral_len()];
    for (j, m) in t.mult.iter().enumerate() {
        let l2s = lambda(j as i32 + QMIN).powf(2.0 * s);
        for (wi, mi) in w.iter_mut().zip(m) {
            *wi += l2s * mi * mi;
        }
    }
    w
}

/// `(Σ_q λ_q^{2s} ‖f_q‖₂²)^{1/2}`.
pub fn dyadic_sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    shell_norms_sq(f)
        .iter()
        .enumerate()
        .map(|(j, n2)| lambda(j as i32 + QMIN).powf(2.0 * s) * n2)
        .sum::<f64>()
        .sqrt()
}

/// Classical multiplier norm `(Σ_k (1+|k|²)^s |f̂_k|²)^{1/2}` with the box measure.
pub fn multiplier_sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let g = f.grid();
    let s2: f64 = f
        .components()
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, v)| {
                    let k = g.wavenumber(i);
                    g.weight(i) * (1.0 + k * k).powf(s) * v.norm_sqr()
                })
                .sum::<f64>()
        })
        .sum();
    (s2 * g.volume()).sqrt()
}

/// `sup_q λ_q^s ‖f_q‖_p`.
pub fn besov_norm(f: &SpectralField, s: f64, p: Lp) -> f64 {
    let set = decompose(f);
    set.indices()
        .map(|q| lambda(q).powf(s) * set.shell(q).to_physical().norm(p))
        .fold(0.0, f64::max)
}

/// `‖f_q‖_to / (λ_q^{n(1/from - 1/to)} ‖f_q‖_from)` for a field on shell `q`.
pub fn bernstein_ratio(f_q: &SpectralField, q: i32, from: Lp, to: Lp) -> Result<f64> {
    if from.inverse() < to.inverse() {
        return Err(Error::InvalidParameter("Bernstein ratio needs p_from <= p_to".into()));
    }
    check_q(f_q.grid(), q)?;
    let phys = f_q.to_physical();
    let denom = phys.norm(from);
    if denom == 0.0 {
        return Err(Error::UndefinedRatio("zero field".into()));
    }
    let n = f_q.grid().n() as f64;
    Ok(phys.norm(to) / (lambda(q).powf(n * (from.inverse() - to.inverse())) * denom))
}

/// Regularity exponents: velocity in `H^s`, magnetic field in `H^r`,
/// `r = s + 1 - ε` unless set explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub s: f64,
    pub r: f64,
    pub eps: f64,
}

impl SobolevParams {
    /// Enforces `s > n/2 - 1`, `r > n/2` and `n/4 + s/2 < r ≤ s + 1 - ε`.
    pub fn new(n: usize, s: f64, eps: f64, r: Option<f64>) -> Result<Self> {
        let p = Self { s, r: r.unwrap_or(s + 1.0 - eps), eps };
        p.validate(n)?;
        Ok(p)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let h = n as f64 / 2.0;
        let Self { s, r, eps } = *self;
        if !(eps > 0.0) {
            return Err(Error::Constraint(format!("eps > 0 violated: eps = {eps}")));
        }
        if !(s > h - 1.0) {
            return Err(Error::Constraint(format!(
                "s > n/2 - 1 violated: s = {s}, n/2 - 1 = {}",
                h - 1.0
            )));
        }
        if !(r > h) {
            return Err(Error::Constraint(format!("r > n/2 violated: r = {r}, n/2 = {h}")));
        }
        if !(h / 2.0 + s / 2.0 < r) {
            return Err(Error::Constraint(format!(
                "n/4 + s/2 < r violated: r = {r}, n/4 + s/2 = {}",
                h / 2.0 + s / 2.0
            )));
        }
        if r > s + 1.0 - eps + 1e-12 {
            return Err(Error::Constraint(format!(
                "r <= s + 1 - eps violated: r = {r}, s + 1 - eps = {}",
                s + 1.0 - eps
            )));
        }
        Ok(())
    }
}
