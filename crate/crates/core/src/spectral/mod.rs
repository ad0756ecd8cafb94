//! Field arithmetic on the periodic box `[0, 2π)^n`.
//!
//! Every quantity lives as a [`SpectralField`]: per component, the Fourier
//! amplitudes of `exp(i k·x)` on the integer lattice, half-spectrum in `kx`.
//! Two-dimensional grids carry three-component fields that do not depend on
//! `z`, so curls and the Hall term stay well defined.

mod fft;
mod random;

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
pub use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use fft::FftPlan;
pub use random::{random_field, random_solenoidal, RandomSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Periodic grid with equal resolution on every axis.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridData>,
}

struct GridData {
    n: usize,
    dims: usize,
    nz: usize,
    half: usize,
    plan: FftPlan,
    kint: Vec<[i32; 3]>,
    kd: Vec<[f64; 3]>,
    kmag: Vec<f64>,
    weight: Vec<f64>,
    keep: Vec<bool>,
    pub(crate) shells: OnceLock<crate::lp::ShellTable>,
}

impl Grid {
    /// `n` is 2 or 3; `dims` must be a power of two no smaller than 16.
    pub fn new(n: usize, dims: usize) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {n}")));
        }
        if dims < 16 || !dims.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {dims}"
            )));
        }
        let nz = if n == 3 { dims } else { 1 };
        let half = dims / 2 + 1;
        let len = nz * dims * half;
        let nyq = (dims / 2) as i32;
        let cut = dims as f64 / 3.0;
        let signed = |i: usize| -> i32 {
            let i = i as i32;
            if i < nyq {
                i
            } else {
                i - dims as i32
            }
        };
        let mut kint = Vec::with_capacity(len);
        for iz in 0..nz {
            for iy in 0..dims {
                for ix in 0..half {
                    let kz = if n == 3 { signed(iz) } else { 0 };
                    kint.push([ix as i32, signed(iy), kz]);
                }
            }
        }
        let deriv = |k: i32| if k.abs() == nyq { 0.0 } else { k as f64 };
        let kd = kint.iter().map(|k| [deriv(k[0]), deriv(k[1]), deriv(k[2])]).collect();
        let kmag = kint
            .iter()
            .map(|k| ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt())
            .collect();
        let weight = kint
            .iter()
            .map(|k| if k[0] == 0 || k[0] == nyq { 1.0 } else { 2.0 })
            .collect();
        let keep = kint
            .iter()
            .map(|k| k.iter().all(|&c| (c.abs() as f64) <= cut))
            .collect();
        Ok(Self {
            inner: Arc::new(GridData {
                n,
                dims,
                nz,
                half,
                plan: FftPlan::new(dims, nz),
                kint,
                kd,
                kmag,
                weight,
                keep,
                shells: OnceLock::new(),
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn dims(&self) -> usize {
        self.inner.dims
    }

    /// Largest resolved wavenumber per axis, `dims/2 - 1`.
    pub fn kmax(&self) -> usize {
        self.inner.dims / 2 - 1
    }

    /// Modes with some `|k_i|` above this are zeroed by the 2/3 rule.
    pub fn dealias_cut(&self) -> f64 {
        self.inner.dims as f64 / 3.0
    }

    /// Shape of physical arrays, `[nz, ny, nx]`.
    pub fn physical_shape(&self) -> [usize; 3] {
        [self.inner.nz, self.inner.dims, self.inner.dims]
    }

    pub fn physical_len(&self) -> usize {
        self.inner.plan.physical_len()
    }

    pub fn spectral_len(&self) -> usize {
        self.inner.plan.spectral_len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.inner.dims as f64
    }

    /// Measure of the box, `(2π)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.inner.n as i32)
    }

    /// Measure of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.physical_len() as f64
    }

    /// Coordinates of physical point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let d = self.inner.dims;
        let ix = idx % d;
        let iy = (idx / d) % d;
        let iz = idx / (d * d);
        let h = self.dx();
        [ix as f64 * h, iy as f64 * h, iz as f64 * h]
    }

    /// Integer wavevector of spectral index `idx` (Nyquist reported as `-N/2`
    /// on the y and z axes, `+N/2` on x).
    pub fn wavevector(&self, idx: usize) -> [i32; 3] {
        self.inner.kint[idx]
    }

    /// Wavevector used by derivatives; Nyquist components are zeroed.
    pub fn deriv_wavevector(&self, idx: usize) -> [f64; 3] {
        self.inner.kd[idx]
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.inner.kmag[idx]
    }

    /// Largest `|k|` present on the grid.
    pub fn max_wavenumber(&self) -> f64 {
        (self.inner.dims as f64 / 2.0) * (self.inner.n as f64).sqrt()
    }

    /// Parseval multiplicity of a stored coefficient (conjugate partner implicit).
    pub fn weight(&self, idx: usize) -> f64 {
        self.inner.weight[idx]
    }

    pub fn in_dealias_band(&self, idx: usize) -> bool {
        self.inner.keep[idx]
    }

    /// Spectral index holding wavevector `k`, with a flag telling whether the
    /// stored coefficient is the conjugate of the requested one.
    pub fn index_of(&self, k: [i32; 3]) -> Option<(usize, bool)> {
        let d = self.inner.dims as i32;
        let nyq = d / 2;
        if self.inner.n == 2 && k[2] != 0 {
            return None;
        }
        if k.iter().any(|c| c.abs() > nyq) {
            return None;
        }
        let (k, conj) = if k[0] < 0 { ([-k[0], -k[1], -k[2]], true) } else { (k, false) };
        let wrap = |c: i32| c.rem_euclid(d) as usize;
        let iz = if self.inner.n == 3 { wrap(k[2]) } else { 0 };
        let idx = (iz * self.inner.dims + wrap(k[1])) * self.inner.half + k[0] as usize;
        Some((idx, conj))
    }

    pub(crate) fn shell_cache(&self) -> &OnceLock<crate::lp::ShellTable> {
        &self.inner.shells
    }

    fn plan(&self) -> &FftPlan {
        &self.inner.plan
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.dims == other.inner.dims
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({}^{})", self.inner.dims, self.inner.n)
    }
}

/// Viscosity, resistivity and Hall coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub nu: f64,
    pub mu: f64,
    pub eta: f64,
}

impl PhysicalParams {
    pub fn new(nu: f64, mu: f64, eta: f64) -> Result<Self> {
        let p = Self { nu, mu, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("mu", self.mu), ("eta", self.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Constraint(format!("{name} >= 0 violated: {name} = {v}")));
            }
        }
        Ok(())
    }

    /// Strictly dissipative, as required for well-posedness runs.
    pub fn is_dissipative(&self) -> bool {
        self.nu > 0.0 && self.mu > 0.0
    }
}

/// Fourier coefficients of an `m`-component field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    comps: Vec<Vec<Complex64>>,
}

/// Grid values of an `m`-component real field.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

/// Lebesgue exponents supported by the norm routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lp {
    One,
    Two,
    Inf,
}

impl Lp {
    /// `1/p`.
    pub fn inverse(self) -> f64 {
        match self {
            Lp::One => 1.0,
            Lp::Two => 0.5,
            Lp::Inf => 0.0,
        }
    }
}

impl RealField {
    pub fn zeros(grid: &Grid, m: usize) -> Self {
        Self { grid: grid.clone(), comps: vec![vec![0.0; grid.physical_len()]; m] }
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() || comps.iter().any(|c| c.len() != grid.physical_len()) {
            return Err(Error::Shape(format!(
                "expected components of length {}",
                grid.physical_len()
            )));
        }
        Ok(Self { grid: grid.clone(), comps })
    }

    /// Sample `f(x)` at every grid point; `f` writes `m` components.
    pub fn from_fn(grid: &Grid, m: usize, f: impl Fn([f64; 3], &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, m);
        let mut buf = vec![0.0; m];
        for idx in 0..grid.physical_len() {
            f(grid.point(idx), &mut buf);
            for (c, v) in out.comps.iter_mut().zip(&buf) {
                c[idx] = *v;
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn to_spectral(&self) -> SpectralField {
        let plan = self.grid.plan();
        let comps = self
            .comps
            .par_iter()
            .map(|c| {
                let mut out = vec![Complex64::default(); plan.spectral_len()];
                plan.forward(c, &mut out);
                out
            })
            .collect();
        let mut f = SpectralField { grid: self.grid.clone(), comps };
        f.enforce_hermitian();
        f
    }

    /// Euclidean length of the component vector at grid point `idx`.
    pub fn magnitude_at(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    /// `L^p` norm over the box of the pointwise Euclidean magnitude.
    pub fn norm(&self, p: Lp) -> f64 {
        let len = self.grid.physical_len();
        let dv = self.grid.cell_volume();
        match p {
            Lp::One => (0..len).map(|i| self.magnitude_at(i)).sum::<f64>() * dv,
            Lp::Two => {
                let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
                (s * dv).sqrt()
            }
            Lp::Inf => (0..len).map(|i| self.magnitude_at(i)).fold(0.0, f64::max),
        }
    }

    /// Grid quadrature of `∫ f dx` per component.
    pub fn integrate(&self) -> Vec<f64> {
        let dv = self.grid.cell_volume();
        self.comps.iter().map(|c| c.iter().sum::<f64>() * dv).collect()
    }

    /// Pointwise dot product of two fields with equal component count.
    pub fn dot(&self, other: &RealField) -> Result<RealField> {
        check_same(&self.grid, &other.grid)?;
        check_m(other.m(), self.m())?;
        let mut out = vec![0.0; self.grid.physical_len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        Ok(Self { grid: self.grid.clone(), comps: vec![out] })
    }

    /// Pointwise cross product of two three-component fields.
    pub fn cross(&self, other: &RealField) -> Result<RealField> {
        check_same(&self.grid, &other.grid)?;
        check_m(self.m(), 3)?;
        check_m(other.m(), 3)?;
        let len = self.grid.physical_len();
        let (a, b) = (&self.comps, &other.comps);
        let mut out = vec![vec![0.0; len]; 3];
        for i in 0..len {
            out[0][i] = a[1][i] * b[2][i] - a[2][i] * b[1][i];
            out[1][i] = a[2][i] * b[0][i] - a[0][i] * b[2][i];
            out[2][i] = a[0][i] * b[1][i] - a[1][i] * b[0][i];
        }
        Ok(Self { grid: self.grid.clone(), comps: out })
    }

    /// `(u·∇)v` from `u` (3 comps) and the gradient tensor of `v` laid out as
    /// produced by [`SpectralField::gradient`].
    pub fn transport(u: &RealField, grad_v: &RealField) -> Result<RealField> {
        check_same(&u.grid, &grad_v.grid)?;
        check_m(u.m(), 3)?;
        if !grad_v.m().is_multiple_of(3) {
            return Err(Error::ComponentMismatch { expected: 3, found: grad_v.m() });
        }
        let m = grad_v.m() / 3;
        let len = u.grid.physical_len();
        let mut out = vec![vec![0.0; len]; m];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..3 {
                let g = &grad_v.comps[3 * i + j];
                for ((o, uj), gv) in o.iter_mut().zip(&u.comps[j]).zip(g) {
                    *o += uj * gv;
                }
            }
        }
        Ok(Self { grid: u.grid.clone(), comps: out })
    }

    /// Pointwise `self * other`, where either side may be a scalar.
    pub fn product(&self, other: &RealField) -> Result<RealField> {
        check_same(&self.grid, &other.grid)?;
        let (s, v) = match (self.m(), other.m()) {
            (1, _) => (self, other),
            (_, 1) => (other, self),
            (a, b) if a == b => {
                let comps = self
                    .comps
                    .iter()
                    .zip(&other.comps)
                    .map(|(x, y)| x.iter().zip(y).map(|(a, b)| a * b).collect())
                    .collect();
                return Ok(Self { grid: self.grid.clone(), comps });
            }
            (a, b) => return Err(Error::ComponentMismatch { expected: a, found: b }),
        };
        let comps = v
            .comps
            .iter()
            .map(|c| c.iter().zip(&s.comps[0]).map(|(a, b)| a * b).collect())
            .collect();
        Ok(Self { grid: self.grid.clone(), comps })
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        check_same(&self.grid, &other.grid)?;
        check_m(other.m(), self.m())?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(a, b)| a + b).collect())
            .collect();
        Ok(Self { grid: self.grid.clone(), comps })
    }
}

impl SpectralField {
    pub fn zeros(grid: &Grid, m: usize) -> Self {
        Self { grid: grid.clone(), comps: vec![vec![Complex64::default(); grid.spectral_len()]; m] }
    }

    pub fn from_components(grid: &Grid, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.is_empty() || comps.iter().any(|c| c.len() != grid.spectral_len()) {
            return Err(Error::Shape(format!(
                "expected components of length {}",
                grid.spectral_len()
            )));
        }
        Ok(Self { grid: grid.clone(), comps })
    }

    /// Sample `f` on the grid and transform.
    pub fn from_fn(grid: &Grid, m: usize, f: impl Fn([f64; 3], &mut [f64])) -> Self {
        RealField::from_fn(grid, m, f).to_spectral()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    /// Single-component view of component `i`.
    pub fn take_component(&self, i: usize) -> SpectralField {
        Self { grid: self.grid.clone(), comps: vec![self.comps[i].clone()] }
    }

    /// Coefficient of `exp(i k·x)` in component `c`, resolving the implicit
    /// conjugate half. Returns zero for wavevectors off the grid.
    pub fn coefficient(&self, c: usize, k: [i32; 3]) -> Complex64 {
        match self.grid.index_of(k) {
            Some((idx, false)) => self.comps[c][idx],
            Some((idx, true)) => self.comps[c][idx].conj(),
            None => Complex64::default(),
        }
    }

    pub fn to_physical(&self) -> RealField {
        let plan = self.grid.plan();
        let comps = self
            .comps
            .par_iter()
            .map(|c| {
                let mut work = c.clone();
                let mut out = vec![0.0; plan.physical_len()];
                plan.inverse(&mut work, &mut out);
                out
            })
            .collect();
        RealField { grid: self.grid.clone(), comps }
    }

    /// Make the `kx = 0` and `kx = N/2` planes conjugate-symmetric.
    pub fn enforce_hermitian(&mut self) {
        let d = self.grid.dims();
        let half = d / 2 + 1;
        let nz = self.grid.physical_shape()[0];
        for comp in &mut self.comps {
            for ix in [0, d / 2] {
                for iz in 0..nz {
                    for iy in 0..d {
                        let jz = (nz - iz) % nz;
                        let jy = (d - iy) % d;
                        let a = (iz * d + iy) * half + ix;
                        let b = (jz * d + jy) * half + ix;
                        if b < a {
                            continue;
                        }
                        let avg = 0.5 * (comp[a] + comp[b].conj());
                        comp[a] = avg;
                        comp[b] = avg.conj();
                    }
                }
            }
        }
    }

    /// Apply a real Fourier multiplier `m(idx)` to every component.
    pub fn apply_multiplier(&self, m: impl Fn(usize) -> f64 + Sync) -> SpectralField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().enumerate().map(|(i, v)| v * m(i)).collect())
            .collect();
        Self { grid: self.grid.clone(), comps }
    }

    /// Zero all modes outside the 2/3-rule band.
    pub fn dealias(mut self) -> SpectralField {
        let keep = &self.grid.inner.keep;
        for c in &mut self.comps {
            for (v, &k) in c.iter_mut().zip(keep) {
                if !k {
                    *v = Complex64::default();
                }
            }
        }
        self
    }

    /// Gradient: scalar → 3 components; `m`-vector → `3m` components with
    /// `∂_j f_i` stored at `3i + j`.
    pub fn gradient(&self) -> SpectralField {
        let kd = &self.grid.inner.kd;
        let mut comps = Vec::with_capacity(3 * self.m());
        for c in &self.comps {
            for j in 0..3 {
                comps.push(c.iter().zip(kd).map(|(v, k)| I * k[j] * v).collect());
            }
        }
        Self { grid: self.grid.clone(), comps }
    }

    pub fn divergence(&self) -> Result<SpectralField> {
        check_m(self.m(), 3)?;
        let kd = &self.grid.inner.kd;
        let out = (0..self.grid.spectral_len())
            .map(|i| {
                let k = kd[i];
                I * (k[0] * self.comps[0][i] + k[1] * self.comps[1][i] + k[2] * self.comps[2][i])
            })
            .collect();
        Ok(Self { grid: self.grid.clone(), comps: vec![out] })
    }

    pub fn curl(&self) -> Result<SpectralField> {
        check_m(self.m(), 3)?;
        let kd = &self.grid.inner.kd;
        let len = self.grid.spectral_len();
        let v = &self.comps;
        let mut out = vec![vec![Complex64::default(); len]; 3];
        for i in 0..len {
            let k = kd[i];
            out[0][i] = I * (k[1] * v[2][i] - k[2] * v[1][i]);
            out[1][i] = I * (k[2] * v[0][i] - k[0] * v[2][i]);
            out[2][i] = I * (k[0] * v[1][i] - k[1] * v[0][i]);
        }
        Ok(Self { grid: self.grid.clone(), comps: out })
    }

    pub fn laplacian(&self) -> SpectralField {
        let kd = &self.grid.inner.kd;
        self.apply_multiplier(|i| {
            let k = kd[i];
            -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
        })
    }

    /// Divergence-free part `v - ∇Δ⁻¹(∇·v)`; the mean passes through.
    pub fn leray_project(&self) -> Result<SpectralField> {
        check_m(self.m(), 3)?;
        let kd = &self.grid.inner.kd;
        let len = self.grid.spectral_len();
        let mut out = self.comps.clone();
        for i in 0..len {
            let k = kd[i];
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let kv = (k[0] * self.comps[0][i] + k[1] * self.comps[1][i] + k[2] * self.comps[2][i])
                / k2;
            for (j, o) in out.iter_mut().enumerate() {
                o[i] -= k[j] * kv;
            }
        }
        Ok(Self { grid: self.grid.clone(), comps: out })
    }

    /// `∫ f·g dx` over the box, by Parseval.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert!(self.grid == other.grid && self.m() == other.m());
        let w = &self.grid.inner.weight;
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| {
                a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x * y.conj()).re).sum::<f64>()
            })
            .sum();
        s * self.grid.volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// `Σ |f̂_k|` over the full spectrum: an upper bound for `sup |f|` per component,
    /// maximized over components.
    pub fn sup_bound(&self) -> f64 {
        let w = &self.grid.inner.weight;
        self.comps
            .iter()
            .map(|c| c.iter().zip(w).map(|(v, w)| w * v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude over all components.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        self.apply_multiplier(|_| a)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> SpectralField {
        debug_assert!(self.grid == other.grid && self.m() == other.m());
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + a * q).collect())
            .collect();
        Self { grid: self.grid.clone(), comps }
    }

    /// Concatenate components of several fields on one grid.
    pub fn stack(fields: &[&SpectralField]) -> Result<SpectralField> {
        let grid = fields.first().ok_or_else(|| Error::Shape("empty stack".into()))?.grid.clone();
        let mut comps = Vec::new();
        for f in fields {
            check_same(&grid, &f.grid)?;
            comps.extend(f.comps.iter().cloned());
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn comps_mut(&mut self) -> &mut Vec<Vec<Complex64>> {
        &mut self.comps
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

pub(crate) fn check_m(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::ComponentMismatch { expected, found });
    }
    Ok(())
}

/// Dealiased pointwise product; either factor may be scalar.
pub fn multiply(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    check_same(&f.grid, &g.grid)?;
    Ok(f.to_physical().product(&g.to_physical())?.to_spectral().dealias())
}

/// Dealiased `u × v`.
pub fn cross(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    check_same(&u.grid, &v.grid)?;
    Ok(u.to_physical().cross(&v.to_physical())?.to_spectral().dealias())
}

/// Dealiased `(u·∇)v` for a vector `u` and any `v`.
pub fn advect(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    check_same(&u.grid, &v.grid)?;
    check_m(u.m(), 3)?;
    let up = u.to_physical();
    let gv = v.gradient().to_physical();
    Ok(RealField::transport(&up, &gv)?.to_spectral().dealias())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(3, 16).unwrap()
    }

    fn beltrami(g: &Grid) -> SpectralField {
        SpectralField::from_fn(g, 3, |x, o| {
            o[0] = 0.0;
            o[1] = x[0].sin();
            o[2] = x[0].cos();
        })
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        (a - b).max_abs_coefficient()
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Grid::new(3, 24).is_err());
        assert!(Grid::new(3, 8).is_err());
        assert!(Grid::new(4, 16).is_err());
        assert!(Grid::new(2, 64).is_ok());
    }

    #[test]
    fn constant_field_has_only_mean() {
        let g = grid();
        let f = SpectralField::from_fn(&g, 1, |_, o| o[0] = 2.5);
        let (i0, _) = g.index_of([0, 0, 0]).unwrap();
        for (i, v) in f.component(0).iter().enumerate() {
            if i == i0 {
                assert_relative_eq!(v.re, 2.5, epsilon = 1e-14);
                assert!(v.im.abs() < 1e-14);
            } else {
                assert!(v.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_coefficients() {
        let g = grid();
        let f = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[0].cos());
        assert_relative_eq!(f.coefficient(0, [1, 0, 0]).re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(f.coefficient(0, [-1, 0, 0]).re, 0.5, epsilon = 1e-14);
        let total: f64 = f.component(0).iter().map(|v| v.norm()).sum();
        assert_relative_eq!(total, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn round_trip_random() {
        for g in [grid(), Grid::new(2, 32).unwrap()] {
            let f = random_field(&g, 3, 11, &RandomSpec::full());
            let p = f.to_physical();
            let back = p.to_spectral().to_physical();
            let err: f64 = p
                .components()
                .iter()
                .zip(back.components())
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
                .sum::<f64>()
                .sqrt();
            let nrm: f64 =
                p.components().iter().flat_map(|a| a.iter().map(|x| x * x)).sum::<f64>().sqrt();
            assert!(err / nrm < 1e-12, "{}", err / nrm);
        }
    }

    #[test]
    fn parseval() {
        let g = grid();
        let f = random_field(&g, 3, 5, &RandomSpec::full());
        let phys = f.to_physical().norm(Lp::Two);
        assert_relative_eq!(phys, f.norm_l2(), max_relative = 1e-12);
    }

    #[test]
    fn vector_identities() {
        let g = grid();
        let s = random_field(&g, 1, 1, &RandomSpec::full());
        let v = random_field(&g, 3, 2, &RandomSpec::full());
        assert!(s.gradient().curl().unwrap().max_abs_coefficient() < 1e-12);
        assert!(v.curl().unwrap().divergence().unwrap().max_abs_coefficient() < 1e-12);
        assert!(s.laplacian().max_abs_coefficient() > 0.0);
        let lap = &s.gradient().divergence().unwrap() - &s.laplacian();
        assert!(lap.max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn beltrami_is_its_own_curl() {
        let g = grid();
        let b = beltrami(&g);
        assert!(max_diff(&b.curl().unwrap(), &b) < 1e-14);
    }

    #[test]
    fn curl_needs_three_components() {
        let g = grid();
        let s = SpectralField::zeros(&g, 1);
        assert!(matches!(s.curl(), Err(Error::ComponentMismatch { .. })));
        assert!(s.leray_project().is_err());
    }

    #[test]
    fn leray_examples() {
        let g = grid();
        let grad = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[0].cos()).gradient();
        assert!(grad.leray_project().unwrap().max_abs_coefficient() < 1e-15);

        let b = beltrami(&g);
        assert!(max_diff(&b.leray_project().unwrap(), &b) < 1e-15);

        // (cos y, cos x, 0) + ∇sin(x+y) splits back into its solenoidal part.
        let target = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = x[1].cos();
            o[1] = x[0].cos();
            o[2] = 0.0;
        });
        let mixed = SpectralField::from_fn(&g, 3, |x, o| {
            let c = (x[0] + x[1]).cos();
            o[0] = x[1].cos() + c;
            o[1] = x[0].cos() + c;
            o[2] = 0.0;
        });
        assert!(max_diff(&mixed.leray_project().unwrap(), &target) < 1e-14);
    }

    #[test]
    fn leray_idempotent_and_solenoidal() {
        let g = grid();
        let v = random_field(&g, 3, 3, &RandomSpec::full());
        let p = v.leray_project().unwrap();
        assert!(p.divergence().unwrap().max_abs_coefficient() < 1e-12);
        assert!(max_diff(&p.leray_project().unwrap(), &p) < 1e-14);
        let (i0, _) = g.index_of([0, 0, 0]).unwrap();
        assert_eq!(p.component(1)[i0], v.component(1)[i0]);
    }

    #[test]
    fn products() {
        let g = grid();
        let c = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[0].cos());
        let sq = multiply(&c, &c).unwrap();
        let want = SpectralField::from_fn(&g, 1, |x, o| o[0] = 0.5 + 0.5 * (2.0 * x[0]).cos());
        assert!(max_diff(&sq, &want) < 1e-14);

        let v = random_field(&g, 3, 4, &RandomSpec::full());
        assert!(multiply(&c, &SpectralField::zeros(&g, 3)).unwrap().max_abs_coefficient() == 0.0);
        assert!(cross(&v, &v).unwrap().max_abs_coefficient() < 1e-14);
        let other = SpectralField::zeros(&Grid::new(3, 32).unwrap(), 3);
        assert!(matches!(cross(&v, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn dealiased_products_are_band_limited() {
        let g = grid();
        let a = random_field(&g, 3, 7, &RandomSpec::full());
        let b = random_field(&g, 3, 8, &RandomSpec::full());
        let p = advect(&a, &b).unwrap();
        for c in p.components() {
            for (i, v) in c.iter().enumerate() {
                if !g.in_dealias_band(i) {
                    assert_eq!(*v, Complex64::default());
                }
            }
        }
    }

    #[test]
    fn cross_product_is_orthogonal() {
        let g = grid();
        let a = random_field(&g, 3, 9, &RandomSpec::default());
        let b = random_field(&g, 3, 10, &RandomSpec::default());
        let axb = cross(&a, &b).unwrap();
        let scale = axb.norm_l2() * a.norm_l2();
        assert!(axb.inner(&a).abs() / scale < 1e-13);
    }

    #[test]
    fn two_and_a_half_dimensions() {
        let g = Grid::new(2, 16).unwrap();
        let b = SpectralField::from_fn(&g, 3, |x, o| {
            o[0] = 0.0;
            o[1] = x[0].sin();
            o[2] = x[0].cos();
        });
        assert!(max_diff(&b.curl().unwrap(), &b) < 1e-14);
        assert_relative_eq!(b.norm_l2(), 2.0 * PI, max_relative = 1e-13);
        assert!(g.index_of([0, 0, 1]).is_none());
    }
}
