//! The identity and estimate suite run by `hmhd verify`.

use std::fmt;
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::diagnostics::{hall_work, relative};
use crate::error::Result;
use crate::io::RunConfig;
use crate::lp::{bernstein_ratio, chi, lambda, phi, project_shell, qmax, shell_multiplier, QMIN};
use crate::paraproduct::{
    bony_residuals, commutator_cross_curl, commutator_curl_cross, commutator_transport, median, ratio_sweep,
    sweep_shells, Estimate,
};
use crate::spectral::{
    random_field, random_solenoidal, Grid, Lp, RandomSpec, SpectralField,
};
use crate::uniqueness::{cancellation_check, gradient_contaminated};

pub const UNITY_TOLERANCE: f64 = 1e-12;
pub const BONY_TOLERANCE: f64 = 1e-10;
pub const COMMUTATOR_TOLERANCE: f64 = 1e-12;
pub const UNIFORMITY_LIMIT: f64 = 10.0;
pub const CANCELLATION_TOLERANCE: f64 = 1e-10;
pub const NEGATIVE_CONTROL_FLOOR: f64 = 1e-2;
pub const HALL_NEUTRALITY_TOLERANCE: f64 = 1e-10;

/// Outcome of one check: `value` compared against `limit`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// The check passes when `value > limit` instead of `value < limit`.
    pub lower_bound: bool,
    pub seconds: f64,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, lower_bound: false, seconds: 0.0 }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, lower_bound: true, seconds: 0.0 }
    }

    pub fn pass(&self) -> bool {
        if self.lower_bound {
            self.value > self.limit
        } else {
            self.value < self.limit
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} {:.3e} {} {:.0e}  ({:.2}s)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            if self.lower_bound { ">" } else { "<" },
            self.limit,
            self.seconds
        )
    }
}

fn timed(f: impl FnOnce() -> Result<Check>) -> Result<Check> {
    let start = Instant::now();
    let mut c = f()?;
    c.seconds = start.elapsed().as_secs_f64();
    info!("{c}");
    Ok(c)
}

/// `max |χ(ξ) + Σ_{q=0}^{Q} φ(ξ/λ_q) - 1|` over `|ξ| ≤ (3/4)λ_{Q+1}`: every
/// lattice wavenumber of `grid` plus a uniform radial sampling.
pub fn partition_of_unity_defect(grid: &Grid) -> f64 {
    let top = qmax(grid);
    let reach = 0.75 * lambda(top + 1);
    let defect = |xi: f64| (chi(xi) + (0..=top).map(|q| phi(xi / lambda(q))).sum::<f64>() - 1.0).abs();
    let lattice = (0..grid.spectral_len())
        .map(|i| grid.wavenumber(i))
        .filter(|&k| k <= reach)
        .map(defect)
        .fold(0.0, f64::max);
    let samples = 100_000;
    let radial = (0..=samples).map(|j| defect(reach * j as f64 / samples as f64)).fold(0.0, f64::max);
    lattice.max(radial)
}

/// Largest relative Bony residual over `pairs` seeded pairs and all shells.
pub fn bony_max_residual(grid: &Grid, first_seed: u64, pairs: usize) -> Result<f64> {
    let spec = RandomSpec::default();
    let mut worst: f64 = 0.0;
    for p in 0..pairs as u64 {
        let s = 2 * (first_seed + p);
        let u = random_solenoidal(grid, s, &spec);
        let v = random_field(grid, 3, s + 1, &spec);
        worst = bony_residuals(&u, &v)?.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// The three commutators with a constant first argument, relative to
/// `‖F‖_∞ ‖∇G‖₂`, maximized over every shell.
pub fn commutator_vanishing(grid: &Grid, seed: u64) -> Result<[f64; 3]> {
    let c = [0.7, -1.3, 0.4];
    let f = SpectralField::from_fn(grid, 3, |_, o| o.copy_from_slice(&c));
    let g = random_field(grid, 3, seed, &RandomSpec::default());
    let scale = f.to_physical().norm(Lp::Inf) * g.gradient().norm_l2();
    let mut out = [0.0f64; 3];
    for q in QMIN..=qmax(grid) {
        let comms = [
            commutator_transport(&f, &g, q)?.norm_l2(),
            commutator_cross_curl(&f, &g, q)?.norm_l2(),
            commutator_curl_cross(&f, &g, q)?.norm_l2(),
        ];
        for (o, c) in out.iter_mut().zip(comms) {
            *o = o.max(relative(c, scale));
        }
    }
    Ok(out)
}

/// Bernstein ratios `‖f_q‖_∞ / (λ_q^{n/2} ‖f_q‖₂)` on random shell pieces.
#[derive(Clone, Debug)]
pub struct BernsteinSweep {
    pub qs: Vec<i32>,
    pub max_per_q: Vec<f64>,
    /// Lattice bound `√N_q / ((2π)^{n/2} λ_q^{n/2})`, `N_q` modes on shell `q`.
    pub bound_per_q: Vec<f64>,
    /// Largest `‖∇f_q‖₂ / (2λ_q ‖f_q‖₂)`; at most 1 on shells `q ≥ 0`.
    pub max_gradient_ratio: f64,
}

impl BernsteinSweep {
    pub fn within_bound(&self) -> bool {
        self.max_per_q.iter().zip(&self.bound_per_q).all(|(r, b)| r <= b)
    }

    pub fn uniformity(&self) -> f64 {
        self.max_per_q.iter().cloned().fold(0.0, f64::max) / median(&self.max_per_q)
    }
}

pub fn bernstein_sweep(grid: &Grid, first_seed: u64, count: usize) -> Result<BernsteinSweep> {
    let qs = sweep_shells(grid);
    let n = grid.n() as i32;
    let bound_per_q = qs
        .iter()
        .map(|&q| {
            let m = shell_multiplier(grid, q)?;
            let modes: f64 = (0..grid.spectral_len())
                .filter(|&i| m[i] != 0.0 && grid.in_dealias_band(i))
                .map(|i| grid.weight(i))
                .sum();
            Ok(modes.sqrt() / ((2.0 * std::f64::consts::PI).powi(n) * lambda(q).powi(n)).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut max_per_q = vec![0.0f64; qs.len()];
    let mut grad: f64 = 0.0;
    for s in 0..count as u64 {
        let f = random_field(grid, 1, first_seed + s, &RandomSpec::default());
        for (j, &q) in qs.iter().enumerate() {
            let fq = project_shell(&f, q)?;
            max_per_q[j] = max_per_q[j].max(bernstein_ratio(&fq, q, Lp::Two, Lp::Inf)?);
            grad = grad.max(fq.gradient().norm_l2() / (2.0 * lambda(q) * fq.norm_l2()));
        }
    }
    Ok(BernsteinSweep { qs, max_per_q, bound_per_q, max_gradient_ratio: grad })
}

/// Worst cancellation residual over seeded divergence-free fields, and the
/// smallest transport residual once `u₂` carries a gradient part.
pub fn cancellation_sweep(grid: &Grid, first_seed: u64, count: usize) -> Result<(f64, f64)> {
    let spec = RandomSpec::default();
    let (mut worst, mut control) = (0.0f64, f64::INFINITY);
    for s in 0..count as u64 {
        let base = 5 * (first_seed + s);
        let [du, db, u2, b1, b2] = [0, 1, 2, 3, 4].map(|j| random_solenoidal(grid, base + j, &spec));
        worst = worst.max(cancellation_check(&du, &db, &u2, &b1, &b2)?.max());
        let bad = gradient_contaminated(&u2, &du, &db)?;
        let c = cancellation_check(&du, &db, &bad, &b1, &b2)?;
        control = control.min(c.transport_u.min(c.transport_b));
    }
    Ok((worst, control))
}

/// Largest `|∫∇×((∇×b)×b)·b| / ∫|·|` over seeded fields.
pub fn hall_neutrality(grid: &Grid, first_seed: u64, count: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in 0..count as u64 {
        let b = random_solenoidal(grid, first_seed + s, &RandomSpec::default());
        let (v, scale) = hall_work(&b)?;
        worst = worst.max(relative(v, scale));
    }
    Ok(worst)
}

/// Runs every check of the suite on the grid of `config`.
pub fn run_suite(config: &RunConfig) -> Result<Vec<Check>> {
    let grid = config.grid()?;
    let v = config.verify;
    let mut checks = Vec::new();
    checks.push(timed(|| Ok(Check::below("partition of unity", partition_of_unity_defect(&grid), UNITY_TOLERANCE)))?);
    checks.push(timed(|| {
        Ok(Check::below(
            format!("bony sum ({} pairs)", v.bony_pairs),
            bony_max_residual(&grid, v.first_seed, v.bony_pairs)?,
            BONY_TOLERANCE,
        ))
    })?);
    let vanish = commutator_vanishing(&grid, v.first_seed)?;
    for (name, x) in ["transport", "cross-curl", "curl-cross"].iter().zip(vanish) {
        checks.push(Check::below(format!("commutator {name}, constant field"), x, COMMUTATOR_TOLERANCE));
    }
    for kind in [Estimate::Transport, Estimate::CrossCurl, Estimate::CurlCrossTrilinear] {
        checks.push(timed(|| {
            let sweep = ratio_sweep(kind, &grid, v.first_seed, v.sweep_seeds)?;
            let u = if sweep.all_finite() { sweep.uniformity() } else { f64::INFINITY };
            Ok(Check::below(format!("{kind:?} ratio max/median ({} seeds)", v.sweep_seeds), u, UNIFORMITY_LIMIT))
        })?);
    }
    let b = bernstein_sweep(&grid, v.first_seed, v.bernstein_seeds)?;
    let excess = b.max_per_q.iter().zip(&b.bound_per_q).map(|(r, c)| r / c).fold(0.0, f64::max);
    checks.push(Check::below("bernstein sup/L2 over lattice bound", excess, 1.0 + 1e-12));
    checks.push(Check::below("bernstein max/median", b.uniformity(), UNIFORMITY_LIMIT));
    checks.push(Check::below("bernstein gradient over 2 lambda_q", b.max_gradient_ratio, 1.0 + 1e-12));
    let (worst, control) = cancellation_sweep(&grid, v.first_seed, v.cancellation_seeds)?;
    checks.push(Check::below("difference cancellations", worst, CANCELLATION_TOLERANCE));
    checks.push(Check::above("gradient-contaminated transport", control, NEGATIVE_CONTROL_FLOOR));
    checks.push(Check::below(
        "hall neutrality",
        hall_neutrality(&grid, v.first_seed, v.cancellation_seeds)?,
        HALL_NEUTRALITY_TOLERANCE,
    ));
    Ok(checks)
}
