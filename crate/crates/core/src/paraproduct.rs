//! Bony paraproduct of `u·∇v` and the three shell commutators
//!
//! ```text
//! [Δ_q, u·∇]v      = Δ_q(u·∇v)     - u·∇Δ_q v
//! [Δ_q, F×∇×]G     = Δ_q(F×(∇×G))  - F×(∇×G_q)
//! [Δ_q, ∇×F×]G     = Δ_q((∇×F)×G)  - (∇×F)×G_q
//! ```
//!
//! All products are dealiased, so the paraproduct pieces sum to the direct
//! product exactly on band-limited data.

use crate::error::{Error, Result};
use crate::lp::{decompose, low_pass, project_shell, qmax, ShellSet, QMIN};
use crate::spectral::{
    advect, check_m, check_same, cross, random_field, random_solenoidal, Grid, Lp, RandomSpec,
    SpectralField,
};

/// The three parts of `Δ_q(u·∇v)`.
#[derive(Clone, Debug)]
pub struct BonySplit {
    pub q: i32,
    /// `Σ_{|q-p|≤2} Δ_q(u_{≤p-2}·∇v_p)`
    pub low_high: SpectralField,
    /// `Σ_{|q-p|≤2} Δ_q(u_p·∇v_{≤p-2})`
    pub high_low: SpectralField,
    /// `Σ_{p≥q-2} Δ_q(ũ_p·∇v_p)`
    pub resonant: SpectralField,
}

impl BonySplit {
    pub fn sum(&self) -> SpectralField {
        &(&self.low_high + &self.high_low) + &self.resonant
    }
}

/// Per-`p` products of a pair `(u, v)`, shared by every `q`.
pub struct BonyTable {
    qmax: i32,
    low_high: Vec<Option<SpectralField>>,
    high_low: Vec<Option<SpectralField>>,
    resonant: Vec<Option<SpectralField>>,
    zero: SpectralField,
}

impl BonyTable {
    pub fn new(u: &SpectralField, v: &SpectralField) -> Result<Self> {
        check_same(u.grid(), v.grid())?;
        check_m(u.m(), 3)?;
        let (us, vs) = (decompose(u), decompose(v));
        let qmax = us.qmax();
        let nonzero = |f: &SpectralField| f.max_abs_coefficient() > 0.0;
        let product = |a: SpectralField, b: SpectralField| -> Result<Option<SpectralField>> {
            if nonzero(&a) && nonzero(&b) {
                Ok(Some(advect(&a, &b)?))
            } else {
                Ok(None)
            }
        };
        let (mut lh, mut hl, mut res) = (Vec::new(), Vec::new(), Vec::new());
        for p in QMIN..=qmax {
            lh.push(product(us.low(p - 2), vs.shell(p))?);
            hl.push(product(us.shell(p), vs.low(p - 2))?);
            res.push(product(us.near(p), vs.shell(p))?);
        }
        Ok(Self {
            qmax,
            low_high: lh,
            high_low: hl,
            resonant: res,
            zero: SpectralField::zeros(v.grid(), v.m()),
        })
    }

    fn gather(&self, parts: &[Option<SpectralField>], lo: i32, hi: i32, q: i32) -> Result<SpectralField> {
        let mut acc = self.zero.clone();
        for p in lo.max(QMIN)..=hi.min(self.qmax) {
            if let Some(f) = &parts[(p - QMIN) as usize] {
                acc = &acc + f;
            }
        }
        project_shell(&acc, q)
    }

    pub fn split(&self, q: i32) -> Result<BonySplit> {
        Ok(BonySplit {
            q,
            low_high: self.gather(&self.low_high, q - 2, q + 2, q)?,
            high_low: self.gather(&self.high_low, q - 2, q + 2, q)?,
            resonant: self.gather(&self.resonant, q - 2, self.qmax, q)?,
        })
    }
}

pub fn bony_split(u: &SpectralField, v: &SpectralField, q: i32) -> Result<BonySplit> {
    BonyTable::new(u, v)?.split(q)
}

/// `Δ_q(u·∇v)` evaluated directly.
pub fn shell_transport(u: &SpectralField, v: &SpectralField, q: i32) -> Result<SpectralField> {
    project_shell(&advect(u, v)?, q)
}

/// `[Δ_q, u_low·∇] v_p`
pub fn commutator_transport(u_low: &SpectralField, v_p: &SpectralField, q: i32) -> Result<SpectralField> {
    let a = project_shell(&advect(u_low, v_p)?, q)?;
    let b = advect(u_low, &project_shell(v_p, q)?)?;
    Ok(&a - &b)
}

/// `[Δ_q, F×∇×] G`
pub fn commutator_cross_curl(f: &SpectralField, g: &SpectralField, q: i32) -> Result<SpectralField> {
    let a = project_shell(&cross(f, &g.curl()?)?, q)?;
    let b = cross(f, &project_shell(g, q)?.curl()?)?;
    Ok(&a - &b)
}

/// `[Δ_q, ∇×F×] G`
pub fn commutator_curl_cross(f: &SpectralField, g: &SpectralField, q: i32) -> Result<SpectralField> {
    let cf = f.curl()?;
    let a = project_shell(&cross(&cf, g)?, q)?;
    let b = cross(&cf, &project_shell(g, q)?)?;
    Ok(&a - &b)
}

/// Which commutator estimate a sweep measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimate {
    /// `‖[Δ_q, u_{≤q-2}·∇]v_q‖₂ / (‖∇u_{≤q-2}‖_∞ ‖v_q‖₂)`
    Transport,
    /// `‖[Δ_q, F_{≤q-2}×∇×]G_q‖₂ / (‖∇F_{≤q-2}‖_∞ ‖G_q‖₂)`, `∇·F = 0`
    CrossCurl,
    /// `|∫[Δ_q, ∇×F_{≤q-2}×]G_q·∇×H_q| / (‖∇²F_{≤q-2}‖_∞ ‖G_q‖₂ ‖H_q‖₂)`
    CurlCrossTrilinear,
}

/// Measured ratio of one estimate for one draw at shell `q`.
pub fn estimate_ratio(
    kind: Estimate,
    f: &SpectralField,
    g: &SpectralField,
    h: &SpectralField,
    q: i32,
) -> Result<f64> {
    let low = low_pass(f, q - 2);
    let g_q = project_shell(g, q)?;
    let sup_grad = low.gradient().to_physical().norm(Lp::Inf);
    let (num, den) = match kind {
        Estimate::Transport => {
            (commutator_transport(&low, &g_q, q)?.norm_l2(), sup_grad * g_q.norm_l2())
        }
        Estimate::CrossCurl => {
            (commutator_cross_curl(&low, &g_q, q)?.norm_l2(), sup_grad * g_q.norm_l2())
        }
        Estimate::CurlCrossTrilinear => {
            let h_q = project_shell(h, q)?;
            let c = commutator_curl_cross(&low, &g_q, q)?;
            let sup_hess = low.gradient().gradient().to_physical().norm(Lp::Inf);
            (c.inner(&h_q.curl()?).abs(), sup_hess * g_q.norm_l2() * h_q.norm_l2())
        }
    };
    if den == 0.0 {
        return Err(Error::UndefinedRatio(format!("{kind:?} at q = {q}")));
    }
    Ok(num / den)
}

/// Per-shell constants measured over a family of seeds.
#[derive(Clone, Debug)]
pub struct RatioSweep {
    pub kind: Estimate,
    pub qs: Vec<i32>,
    /// Largest ratio over seeds, per shell.
    pub max_per_q: Vec<f64>,
    /// Median ratio over seeds, per shell.
    pub median_per_q: Vec<f64>,
    pub samples: usize,
}

impl RatioSweep {
    /// `max_q C_q / median_q C_q` with `C_q` the per-shell maximum.
    pub fn uniformity(&self) -> f64 {
        let m = self.max_per_q.iter().cloned().fold(0.0, f64::max);
        m / median(&self.max_per_q)
    }

    pub fn constant(&self) -> f64 {
        self.max_per_q.iter().cloned().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.max_per_q.iter().chain(&self.median_per_q).all(|v| v.is_finite())
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Shells on which every sweep ratio has a nonzero denominator: `q - 2 ≥ 0`
/// and shell `q` meets the dealiased band.
pub fn sweep_shells(grid: &Grid) -> Vec<i32> {
    let reach = grid.dealias_cut().floor() * (grid.n() as f64).sqrt();
    (2..=qmax(grid)).filter(|&q| 0.75 * crate::lp::lambda(q) < reach).collect()
}

/// Seeds the three sweep fields draw from for sweep sample `seed`.
pub fn sweep_seeds(seed: u64) -> [u64; 3] {
    let base = seed.wrapping_mul(3);
    [base, base.wrapping_add(1), base.wrapping_add(2)]
}

/// Measure `kind` over `count` seeds starting at `first_seed`, on dealiased
/// random data; `F` is solenoidal.
pub fn ratio_sweep(kind: Estimate, grid: &Grid, first_seed: u64, count: usize) -> Result<RatioSweep> {
    let qs = sweep_shells(grid);
    let spec = RandomSpec::default();
    let mut per_q = vec![Vec::with_capacity(count); qs.len()];
    for s in 0..count as u64 {
        let [a, b, c] = sweep_seeds(first_seed + s);
        let f = random_solenoidal(grid, a, &spec);
        let g = random_field(grid, 3, b, &spec);
        let h = random_field(grid, 3, c, &spec);
        for (j, &q) in qs.iter().enumerate() {
            per_q[j].push(estimate_ratio(kind, &f, &g, &h, q)?);
        }
    }
    Ok(RatioSweep {
        kind,
        max_per_q: per_q.iter().map(|v| v.iter().cloned().fold(0.0, f64::max)).collect(),
        median_per_q: per_q.iter().map(|v| median(v)).collect(),
        qs,
        samples: count,
    })
}

/// Relative Bony residuals `‖sum - Δ_q(u·∇v)‖₂ / ‖Δ_q(u·∇v)‖₂` for every shell.
/// Shells where the direct term vanishes are measured against `‖u·∇v‖₂`.
pub fn bony_residuals(u: &SpectralField, v: &SpectralField) -> Result<Vec<f64>> {
    let table = BonyTable::new(u, v)?;
    let full = advect(u, v)?;
    let scale = full.norm_l2();
    let set: ShellSet = decompose(&full);
    set.indices()
        .map(|q| {
            let direct = set.shell(q);
            let diff = (&table.split(q)?.sum() - &direct).norm_l2();
            let d = direct.norm_l2();
            Ok(if d > 1e-12 * scale {
                diff / d
            } else if scale > 0.0 {
                diff / scale
            } else {
                diff
            })
        })
        .collect()
}
