//! Dyadic energy bookkeeping.
//!
//! With `W_s(k) = Σ_q λ_q^{2s} φ_q(|k|)²` every shell-weighted sum collapses to
//! one Parseval inner product, e.g. `I₁ = Σ_q λ_q^{2s} ∫ Δ_q(u·∇u)·u_q = ⟨u·∇u, W_s u⟩`.
//! Along a solution
//!
//! ```text
//! ½ d/dt Σ e_u + ν Σ d_u + I₁ + I₂ = 0
//! ½ d/dt Σ e_b + μ Σ d_b + I₃ + I₄ + I₅ = 0
//! ```
//!
//! with `I₅ = η Σ_q λ_q^{2r} ∫ Δ_q((∇×b)×b)·∇×b_q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{dyadic_weight, lambda, project_shell, qmax, shell_multiplier, SobolevParams, QMIN};
use crate::solver::{run, Mode, NullSink, SolverConfig, State, TraceSink};
use crate::spectral::{advect, cross, Complex64, PhysicalParams, SpectralField};

/// Shell energies and dissipations at one time, indexed by `q + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellEnergyRecord {
    pub t: f64,
    /// `λ_q^{2s} ‖u_q‖₂²`
    pub e_u: Vec<f64>,
    /// `λ_q^{2r} ‖b_q‖₂²`
    pub e_b: Vec<f64>,
    /// `λ_q^{2s} ‖∇u_q‖₂²`
    pub d_u: Vec<f64>,
    /// `λ_q^{2r} ‖∇b_q‖₂²`
    pub d_b: Vec<f64>,
}

impl ShellEnergyRecord {
    pub fn qs(&self) -> impl Iterator<Item = i32> {
        (0..self.e_u.len() as i32).map(|j| j + QMIN)
    }

    pub fn totals(&self) -> [f64; 4] {
        let s = |v: &[f64]| v.iter().sum::<f64>();
        [s(&self.e_u), s(&self.e_b), s(&self.d_u), s(&self.d_b)]
    }
}

/// `(‖f_q‖₂², ‖∇f_q‖₂²)` for every shell.
fn shell_sums(f: &SpectralField) -> Vec<(f64, f64)> {
    let g = f.grid();
    let vol = g.volume();
    (QMIN..=qmax(g))
        .map(|q| {
            let m = shell_multiplier(g, q).expect("q in range");
            let (mut e, mut d) = (0.0, 0.0);
            for c in f.components() {
                for (i, v) in c.iter().enumerate() {
                    if m[i] == 0.0 {
                        continue;
                    }
                    let a = g.weight(i) * m[i] * m[i] * v.norm_sqr();
                    let k = g.deriv_wavevector(i);
                    e += a;
                    d += a * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                }
            }
            (e * vol, d * vol)
        })
        .collect()
}

pub fn shell_energies(state: &State, sob: &SobolevParams) -> ShellEnergyRecord {
    let weigh = |f: &SpectralField, s: f64| -> (Vec<f64>, Vec<f64>) {
        shell_sums(f)
            .into_iter()
            .enumerate()
            .map(|(j, (e, d))| {
                let w = lambda(j as i32 + QMIN).powf(2.0 * s);
                (w * e, w * d)
            })
            .unzip()
    };
    let (e_u, d_u) = weigh(&state.u, sob.s);
    let (e_b, d_b) = weigh(&state.b, sob.r);
    ShellEnergyRecord { t: state.t, e_u, e_b, d_u, d_b }
}

/// The five flux terms at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxRecord {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
}

impl FluxRecord {
    pub fn values(&self) -> [f64; 5] {
        [self.i1, self.i2, self.i3, self.i4, self.i5]
    }
}

/// Terms of the full system.
pub fn flux_terms(state: &State, params: &PhysicalParams, sob: &SobolevParams) -> Result<FluxRecord> {
    flux_terms_mode(state, params, sob, Mode::Full)
}

/// Terms present in `mode`: `I₅` vanishes for MHD, only `I₅` survives in the
/// Hall-only equation.
pub fn flux_terms_mode(
    state: &State,
    params: &PhysicalParams,
    sob: &SobolevParams,
    mode: Mode,
) -> Result<FluxRecord> {
    let g = state.grid();
    let (u, b) = (&state.u, &state.b);
    let mut rec = FluxRecord { t: state.t, ..Default::default() };
    let wb = b.apply_multiplier({
        let w = dyadic_weight(g, sob.r);
        move |i| w[i]
    });
    if mode != Mode::HallOnly {
        let w = dyadic_weight(g, sob.s);
        let wu = u.apply_multiplier(|i| w[i]);
        rec.i1 = advect(u, u)?.inner(&wu);
        rec.i2 = -advect(b, b)?.inner(&wu);
        rec.i3 = advect(u, b)?.inner(&wb);
        rec.i4 = -advect(b, u)?.inner(&wb);
    }
    let eta = if mode == Mode::Mhd { 0.0 } else { params.eta };
    if eta != 0.0 {
        rec.i5 = eta * cross(&b.curl()?, b)?.inner(&wb.curl()?);
    }
    Ok(rec)
}

/// The same terms shell by shell, each integral a physical-space grid sum.
pub fn flux_terms_quadrature(
    state: &State,
    params: &PhysicalParams,
    sob: &SobolevParams,
) -> Result<FluxRecord> {
    let g = state.grid();
    let (u, b) = (&state.u, &state.b);
    let dv = g.cell_volume();
    let integral = |f: &SpectralField, h: &SpectralField| -> f64 {
        let (fp, hp) = (f.to_physical(), h.to_physical());
        fp.components()
            .iter()
            .zip(hp.components())
            .map(|(a, c)| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            * dv
    };
    let (uu, bb, ub, bu) = (advect(u, u)?, advect(b, b)?, advect(u, b)?, advect(b, u)?);
    let hall = cross(&b.curl()?, b)?;
    let mut rec = FluxRecord { t: state.t, ..Default::default() };
    for q in QMIN..=qmax(g) {
        let (ws, wr) = (lambda(q).powf(2.0 * sob.s), lambda(q).powf(2.0 * sob.r));
        let (uq, bq) = (project_shell(u, q)?, project_shell(b, q)?);
        let sh = |f: &SpectralField| project_shell(f, q);
        rec.i1 += ws * integral(&sh(&uu)?, &uq);
        rec.i2 -= ws * integral(&sh(&bb)?, &uq);
        rec.i3 += wr * integral(&sh(&ub)?, &bq);
        rec.i4 -= wr * integral(&sh(&bu)?, &bq);
        rec.i5 += params.eta * wr * integral(&sh(&hall)?, &bq.curl()?);
    }
    Ok(rec)
}

/// `(Σλ_q^{2r}∫Δ_q(∇×((∇×b)×b))·b_q, Σλ_q^{2r}∫Δ_q((∇×b)×b)·∇×b_q)`.
pub fn hall_flux_forms(b: &SpectralField, r: f64) -> Result<(f64, f64)> {
    let w = dyadic_weight(b.grid(), r);
    let wb = b.apply_multiplier(|i| w[i]);
    let jxb = cross(&b.curl()?, b)?;
    Ok((jxb.curl()?.inner(&wb), jxb.inner(&wb.curl()?)))
}

/// `(∫ f·g dx, ∫ |f·g| dx)` by grid quadrature.
pub fn integral_with_scale(f: &SpectralField, g: &SpectralField) -> Result<(f64, f64)> {
    let p = f.to_physical().dot(&g.to_physical())?;
    let dv = f.grid().cell_volume();
    let v = p.component(0);
    Ok((v.iter().sum::<f64>() * dv, v.iter().map(|x| x.abs()).sum::<f64>() * dv))
}

/// Work of the Hall term, `∫∇×((∇×b)×b)·b dx`, with `∫|·| dx` as its scale.
pub fn hall_work(b: &SpectralField) -> Result<(f64, f64)> {
    integral_with_scale(&cross(&b.curl()?, b)?.curl()?, b)
}

/// `|x| / scale`, zero when both vanish.
pub fn relative(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x.abs() / scale
    } else if x == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Derivative of samples `y(t)`: three-point centered in the interior,
/// three-point one-sided at the ends. Spacing may vary.
pub fn time_derivative(t: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if t.len() != y.len() {
        return Err(Error::MismatchedTraces(format!("{} times, {} values", t.len(), y.len())));
    }
    let n = t.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    // Derivative at x of the quadratic through three points.
    let d3 = |x: f64, p: [usize; 3]| -> f64 {
        let [a, b, c] = p.map(|i| t[i]);
        let [fa, fb, fc] = p.map(|i| y[i]);
        fa * (2.0 * x - b - c) / ((a - b) * (a - c))
            + fb * (2.0 * x - a - c) / ((b - a) * (b - c))
            + fc * (2.0 * x - a - b) / ((c - a) * (c - b))
    };
    Ok((0..n)
        .map(|i| match i {
            0 => d3(t[0], [0, 1, 2]),
            i if i == n - 1 => d3(t[i], [n - 3, n - 2, n - 1]),
            i => d3(t[i], [i - 1, i, i + 1]),
        })
        .collect())
}

/// Shell record and fluxes at one time.
#[derive(Clone, Debug)]
pub struct DiagnosticSample {
    pub shells: ShellEnergyRecord,
    pub flux: FluxRecord,
}

pub fn diagnostic_sample(
    state: &State,
    params: &PhysicalParams,
    sob: &SobolevParams,
    mode: Mode,
) -> Result<DiagnosticSample> {
    Ok(DiagnosticSample {
        shells: shell_energies(state, sob),
        flux: flux_terms_mode(state, params, sob, mode)?,
    })
}

/// Residuals of the two shell balances along a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceResidual {
    pub t: Vec<f64>,
    pub residual_u: Vec<f64>,
    pub residual_b: Vec<f64>,
}

impl BalanceResidual {
    pub fn max(&self) -> f64 {
        self.residual_u.iter().chain(&self.residual_b).cloned().fold(0.0, f64::max)
    }
}

/// Each residual is normalized by the magnitude of the dissipation and flux
/// terms of its balance.
pub fn energy_balance_residual(
    samples: &[DiagnosticSample],
    params: &PhysicalParams,
    mode: Mode,
) -> Result<BalanceResidual> {
    let t: Vec<f64> = samples.iter().map(|s| s.shells.t).collect();
    let tot: Vec<[f64; 4]> = samples.iter().map(|s| s.shells.totals()).collect();
    let deu = time_derivative(&t, &tot.iter().map(|x| x[0]).collect::<Vec<_>>())?;
    let deb = time_derivative(&t, &tot.iter().map(|x| x[1]).collect::<Vec<_>>())?;
    let nu = if mode == Mode::HallOnly { 0.0 } else { params.nu };
    let (mut ru, mut rb) = (Vec::new(), Vec::new());
    for (i, s) in samples.iter().enumerate() {
        let f = &s.flux;
        let du = nu * tot[i][2];
        let db = params.mu * tot[i][3];
        ru.push(relative(0.5 * deu[i] + du + f.i1 + f.i2, du + f.i1.abs() + f.i2.abs()));
        rb.push(relative(
            0.5 * deb[i] + db + f.i3 + f.i4 + f.i5,
            db + f.i3.abs() + f.i4.abs() + f.i5.abs(),
        ));
    }
    Ok(BalanceResidual { t, residual_u: ru, residual_b: rb })
}

/// Total energy and its dissipation rate at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    /// `½‖u‖₂² + ½‖b‖₂²`
    pub energy: f64,
    /// `ν‖∇u‖₂² + μ‖∇b‖₂²`
    pub dissipation: f64,
}

pub fn energy_sample(state: &State, params: &PhysicalParams, mode: Mode) -> EnergySample {
    let grad_sq = |f: &SpectralField| {
        let g = f.gradient();
        g.inner(&g)
    };
    let nu = if mode == Mode::HallOnly { 0.0 } else { params.nu };
    EnergySample {
        t: state.t,
        energy: state.energy(),
        dissipation: nu * grad_sq(&state.u) + params.mu * grad_sq(&state.b),
    }
}

/// `|dE/dt + D| / D` at every sample.
pub fn energy_law_residual(samples: &[EnergySample]) -> Result<Vec<f64>> {
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let e: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let de = time_derivative(&t, &e)?;
    Ok(samples.iter().zip(de).map(|(s, d)| relative(d + s.dissipation, s.dissipation)).collect())
}

/// Horizon and constants of the two-term `ψ` bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceEstimate {
    pub c: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub psi0: f64,
    /// `½ min(1/(Cγ̲ψ₀^γ̲), 1/(Cγ̄ψ₀^γ̄))`
    pub t: f64,
}

pub fn existence_time(psi0: f64, c: f64, gamma_low: f64, gamma_high: f64) -> Result<ExistenceEstimate> {
    let ok = |x: f64| x > 0.0 && x.is_finite();
    if !ok(psi0) {
        return Err(Error::InvalidParameter(format!("psi0 = {psi0} must be positive")));
    }
    if !ok(c) {
        return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
    }
    if !(ok(gamma_low) && ok(gamma_high) && gamma_low <= gamma_high) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < gamma_low <= gamma_high, got {gamma_low}, {gamma_high}"
        )));
    }
    let blow = |g: f64| 1.0 / (c * g * psi0.powf(g));
    let t = 0.5 * blow(gamma_low).min(blow(gamma_high));
    Ok(ExistenceEstimate { c, gamma_low, gamma_high, psi0, t })
}

/// `Σ_{γ∈{γ̲,γ̄}} ψ₀ / (1 - γCψ₀^γ t)^{1/γ}`.
pub fn psi_bound(t: f64, est: &ExistenceEstimate) -> Result<f64> {
    let mut total = 0.0;
    for g in [est.gamma_low, est.gamma_high] {
        let rate = g * est.c * est.psi0.powf(g);
        let limit = 1.0 / rate;
        if t >= limit {
            return Err(Error::PastBlowUp { t, limit });
        }
        total += est.psi0 / (1.0 - rate * t).powf(1.0 / g);
    }
    Ok(total)
}

/// `(ψ, dψ/dt)` along a trace of states.
pub fn psi_samples(trace: &[State], sob: &SobolevParams) -> Result<Vec<(f64, f64)>> {
    let t: Vec<f64> = trace.iter().map(|s| s.t).collect();
    let psi: Vec<f64> = trace.iter().map(|s| s.psi(sob)).collect();
    let d = time_derivative(&t, &psi)?;
    Ok(psi.into_iter().zip(d).collect())
}

/// Least-squares slope of `log dψ/dt` against `log ψ` over growing samples,
/// minus one.
pub fn fit_gamma(samples: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(p, d)| *p > 0.0 && *d > 0.0)
        .map(|(p, d)| (p.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedRatio("all samples share one psi".into()));
    }
    Ok(sxy / sxx - 1.0)
}

/// Smallest `C` with `dψ/dt ≤ C(ψ^{1+γ̲} + ψ^{1+γ̄})` on every sample.
pub fn calibrate_constant(samples: &[(f64, f64)], gamma_low: f64, gamma_high: f64) -> Result<f64> {
    let c = samples
        .iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, d)| d / (p.powf(1.0 + gamma_low) + p.powf(1.0 + gamma_high)))
        .fold(0.0, f64::max);
    if c > 0.0 {
        Ok(c)
    } else {
        Err(Error::UndefinedRatio("psi never grows on the calibration family".into()))
    }
}

/// Calibrated constants of the `ψ` bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub samples: usize,
}

/// Fit `γ` (clamped below by `gamma_floor`), then the minimal `C`. Both
/// exponents are set to the fitted value.
pub fn calibrate(samples: &[(f64, f64)], gamma_floor: f64) -> Result<Calibration> {
    let g = fit_gamma(samples).map(|g| g.max(gamma_floor)).unwrap_or(gamma_floor);
    if !(g > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma floor {gamma_floor} must be positive")));
    }
    let c = calibrate_constant(samples, g, g)?;
    Ok(Calibration { c, gamma_low: g, gamma_high: g, samples: samples.len() })
}

/// Which exact symmetry a scaling check exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// `η = 0`: `u_λ = λu(λx, λ²t)`, `b_λ = λb(λx, λ²t)`.
    Mhd,
    /// Hall equation: `b_λ = b(λx, λ²t)`.
    Hall,
}

/// Dilation of the representable part of `f`, and the part of `f` whose
/// modes would leave the grid.
fn dilate_parts(f: &SpectralField, factor: usize, amp: f64) -> (SpectralField, SpectralField) {
    let g = f.grid();
    let kmax = g.kmax() as i32;
    let l = factor as i32;
    let mut out = SpectralField::zeros(g, f.m());
    let mut lost = SpectralField::zeros(g, f.m());
    for c in 0..f.m() {
        for (i, v) in f.component(c).iter().enumerate() {
            if *v == Complex64::default() {
                continue;
            }
            let k = g.wavevector(i);
            let target = [k[0] * l, k[1] * l, k[2] * l];
            if target.iter().any(|x| x.abs() > kmax) {
                lost.component_mut(c)[i] = *v;
                continue;
            }
            let (j, conj) = g.index_of(target).expect("resolved mode");
            out.component_mut(c)[j] = amp * if conj { v.conj() } else { *v };
        }
    }
    (out, lost)
}

/// `amp · f(λx)`, whose coefficient at `λk` is `amp · f̂(k)`. Content that
/// would leave the grid is an error unless it is at roundoff level.
pub fn dilate(f: &SpectralField, factor: usize, amp: f64) -> Result<SpectralField> {
    let (out, lost) = dilate_parts(f, factor, amp);
    let lost_norm = lost.norm_l2();
    if lost_norm > 1e-13 * f.norm_l2() {
        return Err(Error::InsufficientBandLimit(format!(
            "content of norm {lost_norm:.3e} above |k| = {} leaves the grid under dilation by {factor}",
            f.grid().kmax() / factor
        )));
    }
    Ok(out)
}

/// Outcome of a scaling comparison.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub residual: f64,
    pub base_steps: usize,
    pub scaled_steps: usize,
}

/// Runs the base problem to `config.tmax` and the dilated problem to
/// `tmax/λ²` with step `dt/λ²`, then compares the dilated base solution
/// with the scaled run.
pub fn scaling_check(
    mode: ScalingMode,
    factor: usize,
    initial: &State,
    config: &SolverConfig,
) -> Result<ScalingReport> {
    if !(factor == 2 || factor == 4) {
        return Err(Error::InvalidParameter(format!("lambda must be 2 or 4, got {factor}")));
    }
    let l = factor as f64;
    let (solver_mode, amp) = match mode {
        ScalingMode::Mhd => (Mode::Mhd, l),
        ScalingMode::Hall => (Mode::HallOnly, 1.0),
    };
    let mut base = initial.clone();
    base.t = 0.0;
    if mode == ScalingMode::Hall {
        base.u = SpectralField::zeros(initial.grid(), 3);
    }
    let scaled0 = State::new(dilate(&base.u, factor, amp)?, dilate(&base.b, factor, amp)?, 0.0)?;
    let mut cfg = config.clone();
    cfg.mode = solver_mode;
    let a = run(&base, &cfg, &mut NullSink)?;
    let mut scfg = cfg.clone();
    scfg.dt = cfg.dt / (l * l);
    scfg.tmax = cfg.tmax / (l * l);
    let b = run(&scaled0, &scfg, &mut NullSink)?;
    if a.halted_at.is_some() || b.halted_at.is_some() {
        return Err(Error::BlowUp(a.halted_at.or(b.halted_at).unwrap_or(0.0)));
    }
    // Base content that cannot be dilated counts in full: the scaled run never had it.
    let (mu, lu) = dilate_parts(&a.state.u, factor, amp);
    let (mb, lb) = dilate_parts(&a.state.b, factor, amp);
    let (du, db) = (&mu - &b.state.u, &mb - &b.state.b);
    let lost = amp * amp * (lu.inner(&lu) + lb.inner(&lb));
    let num = (du.inner(&du) + db.inner(&db) + lost).sqrt();
    let den = (b.state.u.inner(&b.state.u) + b.state.b.inner(&b.state.b)).sqrt();
    Ok(ScalingReport { residual: relative(num, den), base_steps: a.steps, scaled_steps: b.steps })
}

/// Run and collect every state (including the initial one).
pub fn run_trace(initial: &State, config: &SolverConfig) -> Result<Vec<State>> {
    let mut sink = TraceSink::default();
    run(initial, config, &mut sink)?;
    Ok(sink.states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::dyadic_sobolev_norm;
    use crate::solver::{make_initial, InitialKind, InitialSpec};
    use crate::spectral::Grid;

    fn sob() -> SobolevParams {
        SobolevParams::new(3, 1.0, 0.25, None).unwrap()
    }

    fn params() -> PhysicalParams {
        PhysicalParams::new(0.05, 0.04, 0.7).unwrap()
    }

    fn random(g: &Grid, seed: u64) -> State {
        make_initial(&InitialSpec::new(InitialKind::RandomBand, seed, 2.0, 2.0), g, &sob()).unwrap()
    }

    fn beltrami(g: &Grid) -> State {
        let b = SpectralField::from_fn(g, 3, |x, o| {
            o[0] = 0.0;
            o[1] = x[0].sin();
            o[2] = x[0].cos();
        });
        State::new(SpectralField::zeros(g, 3), b, 0.0).unwrap()
    }

    #[test]
    fn zero_state_is_all_zero() {
        let g = Grid::new(3, 16).unwrap();
        let z = State::zeros(&g);
        let e = shell_energies(&z, &sob());
        assert!(e.totals().iter().all(|v| *v == 0.0));
        assert_eq!(flux_terms(&z, &params(), &sob()).unwrap().values(), [0.0; 5]);
    }

    #[test]
    fn single_mode_energy_sits_in_shell_zero() {
        let g = Grid::new(3, 16).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u = SpectralField::from_fn(&g, 3, |x, o| {
            let c = (x[0] + x[1]).cos() * r;
            o[0] = c;
            o[1] = -c;
            o[2] = 0.0;
        });
        let norm2 = u.inner(&u);
        let s = State::new(u, SpectralField::zeros(&g, 3), 0.0).unwrap();
        for sv in [0.0, 0.7, 2.5] {
            let sob = SobolevParams { s: sv, r: 2.0, eps: 0.1 };
            let e = shell_energies(&s, &sob);
            for (q, v) in e.qs().zip(&e.e_u) {
                if q == 0 {
                    assert!((v / norm2 - 1.0).abs() < 1e-14);
                } else {
                    assert!(*v < 1e-14 * norm2);
                }
            }
            assert!((e.d_u[1] / norm2 - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn shell_sum_brackets_l2_norm() {
        let g = Grid::new(3, 16).unwrap();
        let s = random(&g, 4);
        let e = shell_energies(&s, &SobolevParams { s: 0.0, r: 0.0, eps: 0.1 });
        let ratio = e.totals()[0] / s.u.inner(&s.u);
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn dissipation_dominates_shell_scaled_energy() {
        let g = Grid::new(3, 16).unwrap();
        for seed in 0..5 {
            let s = random(&g, seed);
            let e = shell_energies(&s, &sob());
            for (j, q) in e.qs().enumerate().filter(|(_, q)| *q >= 0) {
                let l2 = lambda(q).powi(2);
                assert!(e.d_u[j] >= 0.5625 * l2 * e.e_u[j] * (1.0 - 1e-12), "q = {q}");
                assert!(e.d_b[j] >= 0.5625 * l2 * e.e_b[j] * (1.0 - 1e-12), "q = {q}");
            }
        }
    }

    #[test]
    fn beltrami_fluxes_vanish() {
        let g = Grid::new(3, 16).unwrap();
        let f = flux_terms(&beltrami(&g), &params(), &sob()).unwrap();
        assert!(f.values().iter().all(|v| v.abs() < 1e-12), "{f:?}");
    }

    #[test]
    fn fluxes_match_quadrature() {
        let g = Grid::new(3, 16).unwrap();
        let s = random(&g, 6);
        let a = flux_terms(&s, &params(), &sob()).unwrap();
        let b = flux_terms_quadrature(&s, &params(), &sob()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-9 * y.abs(), "{x} {y}");
        }
    }

    #[test]
    fn hall_term_does_no_work() {
        let g = Grid::new(3, 16).unwrap();
        let s = random(&g, 7);
        let (w, scale) = hall_work(&s.b).unwrap();
        assert!(relative(w, scale) < 1e-10, "{w} {scale}");
        let (x, y) = hall_flux_forms(&s.b, sob().r).unwrap();
        assert!((x - y).abs() < 1e-10 * y.abs());
    }

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let t = [0.0, 0.1, 0.3, 0.35, 0.5];
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t * t - t + 1.0).collect();
        let d = time_derivative(&t, &y).unwrap();
        for (t, d) in t.iter().zip(d) {
            assert!((d - (4.0 * t - 1.0)).abs() < 1e-12);
        }
        assert!(matches!(time_derivative(&t[..2], &y[..2]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn beltrami_run_balances() {
        let g = Grid::new(3, 16).unwrap();
        let p = params();
        let cfg = SolverConfig::new(p, 1e-3, 0.02, Mode::Full, sob());
        let trace = run_trace(&beltrami(&g), &cfg).unwrap();
        let samples: Vec<_> =
            trace.iter().map(|s| diagnostic_sample(s, &p, &sob(), Mode::Full).unwrap()).collect();
        let r = energy_balance_residual(&samples, &p, Mode::Full).unwrap();
        assert!(r.residual_b.iter().all(|v| *v < 1e-6), "{r:?}");
        assert!(r.residual_u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_run_balances() {
        let g = Grid::new(3, 16).unwrap();
        let p = params();
        let cfg = SolverConfig::new(p, 1e-3, 0.01, Mode::Full, sob());
        let trace = run_trace(&random(&g, 1), &cfg).unwrap();
        let samples: Vec<_> =
            trace.iter().map(|s| diagnostic_sample(s, &p, &sob(), Mode::Full).unwrap()).collect();
        let r = energy_balance_residual(&samples, &p, Mode::Full).unwrap();
        assert!(r.max() < 1e-3, "{r:?}");
        let e: Vec<_> = trace.iter().map(|s| energy_sample(s, &p, Mode::Full)).collect();
        let law = energy_law_residual(&e).unwrap();
        assert!(law.iter().all(|v| *v < 1e-4), "{law:?}");
    }

    #[test]
    fn existence_time_examples() {
        assert_eq!(existence_time(1.0, 1.0, 1.0, 1.0).unwrap().t, 0.5);
        assert_eq!(existence_time(2.0, 1.0, 1.0, 1.0).unwrap().t, 0.25);
        let est = existence_time(3.0, 0.2, 0.5, 1.5).unwrap();
        assert_eq!(psi_bound(0.0, &est).unwrap(), 6.0);
        assert!(psi_bound(est.t, &est).unwrap() > 6.0);
        assert!(matches!(psi_bound(10.0 * est.t, &est), Err(Error::PastBlowUp { .. })));
        assert!(existence_time(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(existence_time(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn existence_time_decreases_in_every_argument() {
        let base = |p: f64, c: f64, gl: f64, gh: f64| existence_time(p, c, gl, gh).unwrap().t;
        for i in 0..9 {
            let x = 0.5 + 0.5 * i as f64;
            let y = x + 0.5;
            assert!(base(y, 1.0, 0.5, 1.0) < base(x, 1.0, 0.5, 1.0));
            assert!(base(2.0, y, 0.5, 1.0) < base(2.0, x, 0.5, 1.0));
            assert!(base(2.0, 1.0, 0.2, 1.0 + y) < base(2.0, 1.0, 0.2, 1.0 + x));
        }
    }

    #[test]
    fn calibration_recovers_power_law() {
        let samples: Vec<(f64, f64)> =
            (1..20).map(|i| (i as f64, 0.3 * (i as f64).powf(1.4))).collect();
        let cal = calibrate(&samples, 0.05).unwrap();
        assert!((cal.gamma_low - 0.4).abs() < 1e-12);
        assert!((cal.c - 0.15).abs() < 1e-12);
        let decaying = [(1.0, -1.0), (2.0, -0.5)];
        assert!(calibrate(&decaying, 0.1).is_err());
    }

    #[test]
    fn dilation_maps_modes() {
        let g = Grid::new(3, 16).unwrap();
        let f = SpectralField::from_fn(&g, 1, |x, o| o[0] = (x[0] - 2.0 * x[2]).sin());
        let d = dilate(&f, 2, 3.0).unwrap();
        let want = SpectralField::from_fn(&g, 1, |x, o| o[0] = 3.0 * (2.0 * x[0] - 4.0 * x[2]).sin());
        assert!((&d - &want).max_abs_coefficient() < 1e-15);
        let high = SpectralField::from_fn(&g, 1, |x, o| o[0] = (5.0 * x[1]).cos());
        assert!(matches!(dilate(&high, 2, 1.0), Err(Error::InsufficientBandLimit(_))));
    }

    #[test]
    fn zero_data_scales_trivially() {
        let g = Grid::new(2, 16).unwrap();
        let cfg = SolverConfig::new(params(), 1e-2, 0.04, Mode::Mhd, sob());
        let r = scaling_check(ScalingMode::Mhd, 2, &State::zeros(&g), &cfg).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!((r.base_steps, r.scaled_steps), (4, 4));
    }

    #[test]
    fn hall_scaling_small_grid() {
        let g = Grid::new(2, 32).unwrap();
        let mut spec = InitialSpec::new(InitialKind::RandomBand, 3, 0.5, 0.5);
        spec.band = Some(3.0);
        let s = make_initial(&spec, &g, &sob()).unwrap();
        assert!(dyadic_sobolev_norm(&s.b, sob().r) > 0.0);
        let cfg = SolverConfig::new(PhysicalParams::new(0.1, 0.1, 1.0).unwrap(), 1e-2, 0.05, Mode::HallOnly, sob());
        let r = scaling_check(ScalingMode::Hall, 2, &s, &cfg).unwrap();
        assert!(r.residual < 1e-5, "{}", r.residual);
    }
}
