//! Time integration of the viscous resistive Hall-MHD system
//!
//! ```text
//! u_t + u·∇u - b·∇b + ∇p = νΔu
//! b_t + u·∇b - b·∇u + η∇×((∇×b)×b) = μΔb,   ∇·u = ∇·b = 0
//! ```
//!
//! The pressure is removed by Leray projection. Nonlinear terms are evaluated
//! in conservative form, `∇·(u⊗u - b⊗b)` and `∇×(u×b - η(∇×b)×b)`, which agree
//! with the transport forms for solenoidal fields and keep `∇·b = 0` exactly.
//! Diffusion is propagated exactly by an integrating factor inside classical RK4.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{dyadic_sobolev_norm, dyadic_weight, SobolevParams};
use crate::spectral::{
    advect, check_m, check_same, random_solenoidal, Complex64, Grid, PhysicalParams, RandomSpec,
    RealField, SpectralField,
};

/// Largest tolerated `sup |∇·u|`, `sup |∇·b|`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;
/// Steps between the safety projections of `b`.
pub const SAFETY_PROJECTION_EVERY: usize = 100;
/// Advisory CFL constant for the Hall term.
pub const HALL_CFL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full Hall-MHD.
    Full,
    /// Classical MHD, `η = 0` regardless of the configured value.
    Mhd,
    /// Hall equation for `b` alone: `u ≡ 0`, transport terms dropped.
    HallOnly,
}

impl Mode {
    fn hall_coefficient(self, params: &PhysicalParams) -> f64 {
        match self {
            Mode::Mhd => 0.0,
            _ => params.eta,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Integrating-factor RK4.
    #[default]
    Ifrk4,
}

/// Velocity and magnetic field at time `t`.
#[derive(Clone, Debug)]
pub struct State {
    pub u: SpectralField,
    pub b: SpectralField,
    pub t: f64,
}

impl State {
    pub fn new(u: SpectralField, b: SpectralField, t: f64) -> Result<Self> {
        check_m(u.m(), 3)?;
        check_m(b.m(), 3)?;
        check_same(u.grid(), b.grid())?;
        Ok(Self { u, b, t })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { u: SpectralField::zeros(grid, 3), b: SpectralField::zeros(grid, 3), t: 0.0 }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// Upper bounds on `sup |∇·u|` and `sup |∇·b|`.
    pub fn divergence(&self) -> (f64, f64) {
        let d = |f: &SpectralField| f.divergence().map(|d| d.sup_bound()).unwrap_or(f64::INFINITY);
        (d(&self.u), d(&self.b))
    }

    fn check_divergence(&self) -> Result<()> {
        let (du, db) = self.divergence();
        let worst = du.max(db);
        if worst > DIVERGENCE_TOLERANCE {
            return Err(Error::StateDrift(worst));
        }
        Ok(())
    }

    /// `ψ = ‖u‖²_{H^s} + ‖b‖²_{H^r}` with the dyadic norms.
    pub fn psi(&self, sob: &SobolevParams) -> f64 {
        dyadic_sobolev_norm(&self.u, sob.s).powi(2) + dyadic_sobolev_norm(&self.b, sob.r).powi(2)
    }

    /// `½‖u‖₂² + ½‖b‖₂²`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.u.inner(&self.u) + self.b.inner(&self.b))
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.b.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: PhysicalParams,
    pub dt: f64,
    pub tmax: f64,
    #[serde(default)]
    pub scheme: Scheme,
    pub mode: Mode,
    /// Steps between snapshots handed to the sink.
    pub snapshot_every: usize,
    /// Exponents of the blow-up guard norm `ψ`.
    pub sobolev: SobolevParams,
    /// Halt once `ψ(t) > guard_factor · ψ(0)`.
    #[serde(default = "default_guard")]
    pub guard_factor: f64,
}

fn default_guard() -> f64 {
    1e6
}

impl SolverConfig {
    pub fn new(params: PhysicalParams, dt: f64, tmax: f64, mode: Mode, sobolev: SobolevParams) -> Self {
        Self {
            params,
            dt,
            tmax,
            scheme: Scheme::Ifrk4,
            mode,
            snapshot_every: 1,
            sobolev,
            guard_factor: default_guard(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Constraint(format!("dt > 0 violated: dt = {}", self.dt)));
        }
        if !(self.tmax >= 0.0 && self.tmax.is_finite()) {
            return Err(Error::Constraint(format!("tmax >= 0 violated: tmax = {}", self.tmax)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Constraint("snapshot_every >= 1 violated".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `tmax`.
    pub fn steps(&self) -> usize {
        (self.tmax / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// `(du/dt, db/dt)` including diffusion.
pub fn compute_rhs(
    state: &State,
    params: &PhysicalParams,
    mode: Mode,
) -> Result<(SpectralField, SpectralField)> {
    state.check_divergence()?;
    let (nu, nb) = nonlinear(&state.u, &state.b, params, mode);
    let (du, db) = match mode {
        Mode::HallOnly => (nu, nb.axpy(params.mu, &state.b.laplacian())),
        _ => (
            nu.axpy(params.nu, &state.u.laplacian()),
            nb.axpy(params.mu, &state.b.laplacian()),
        ),
    };
    Ok((du, db))
}

/// Dealiased nonlinear terms, projected for `u`.
fn nonlinear(
    u: &SpectralField,
    b: &SpectralField,
    params: &PhysicalParams,
    mode: Mode,
) -> (SpectralField, SpectralField) {
    let grid = u.grid();
    let eta = mode.hall_coefficient(params);
    let bp = b.to_physical();
    let len = grid.physical_len();
    let up = match mode {
        Mode::HallOnly => None,
        _ => Some(u.to_physical()),
    };

    let du = match &up {
        None => SpectralField::zeros(grid, 3),
        Some(up) => {
            // Symmetric tensor u⊗u - b⊗b, stored (xx, xy, xz, yy, yz, zz).
            const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
            let comps = PAIRS
                .iter()
                .map(|&(i, j)| {
                    let (ui, uj) = (up.component(i), up.component(j));
                    let (bi, bj) = (bp.component(i), bp.component(j));
                    (0..len).map(|p| ui[p] * uj[p] - bi[p] * bj[p]).collect()
                })
                .collect();
            let t = RealField::from_components(grid, comps)
                .expect("grid lengths")
                .to_spectral()
                .dealias();
            let slot = |i: usize, j: usize| {
                PAIRS.iter().position(|&p| p == (i.min(j), i.max(j))).expect("pair")
            };
            let mut out = SpectralField::zeros(grid, 3);
            for i in 0..3 {
                let target = out.component_mut(i);
                for j in 0..3 {
                    let tij = t.component(slot(i, j));
                    for (idx, o) in target.iter_mut().enumerate() {
                        let k = grid.deriv_wavevector(idx)[j];
                        *o -= Complex64::new(0.0, k) * tij[idx];
                    }
                }
            }
            out.leray_project().expect("three components")
        }
    };

    // Electric-field-like term E = u×b - η(∇×b)×b, so that db/dt ⊃ ∇×E.
    let mut e = RealField::zeros(grid, 3);
    if let Some(up) = &up {
        e = up.cross(&bp).expect("three components");
    }
    if eta != 0.0 {
        let jp = b.curl().expect("three components").to_physical();
        let jxb = jp.cross(&bp).expect("three components");
        for c in 0..3 {
            for (o, v) in e.component_mut(c).iter_mut().zip(jxb.component(c)) {
                *o -= eta * v;
            }
        }
    }
    let db = e.to_spectral().dealias().curl().expect("three components");
    (du, db)
}

/// Precomputed integrating factors for one step size.
pub struct Stepper {
    params: PhysicalParams,
    mode: Mode,
    dt: f64,
    eu_half: Vec<f64>,
    eu_full: Vec<f64>,
    eb_half: Vec<f64>,
    eb_full: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid, params: PhysicalParams, mode: Mode, dt: f64) -> Self {
        let k2: Vec<f64> = (0..grid.spectral_len())
            .map(|i| {
                let k = grid.deriv_wavevector(i);
                k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
            })
            .collect();
        let factors = |rate: f64, h: f64| -> Vec<f64> { k2.iter().map(|k| (-rate * k * h).exp()).collect() };
        Self {
            params,
            mode,
            dt,
            eu_half: factors(params.nu, 0.5 * dt),
            eu_full: factors(params.nu, dt),
            eb_half: factors(params.mu, 0.5 * dt),
            eb_full: factors(params.mu, dt),
        }
    }

    fn decay(f: &SpectralField, e: &[f64]) -> SpectralField {
        f.apply_multiplier(|i| e[i])
    }

    /// One integrating-factor RK4 step.
    pub fn step(&self, s: &State) -> State {
        let h = self.dt;
        let n = |u: &SpectralField, b: &SpectralField| nonlinear(u, b, &self.params, self.mode);
        let (eu2, eu1, eb2, eb1) = (&self.eu_half, &self.eu_full, &self.eb_half, &self.eb_full);

        let (k1u, k1b) = n(&s.u, &s.b);
        let au = Self::decay(&s.u.axpy(0.5 * h, &k1u), eu2);
        let ab = Self::decay(&s.b.axpy(0.5 * h, &k1b), eb2);
        let (k2u, k2b) = n(&au, &ab);
        let hu = Self::decay(&s.u, eu2);
        let hb = Self::decay(&s.b, eb2);
        let bu = hu.axpy(0.5 * h, &k2u);
        let bb = hb.axpy(0.5 * h, &k2b);
        let (k3u, k3b) = n(&bu, &bb);
        let fu = Self::decay(&s.u, eu1);
        let fb = Self::decay(&s.b, eb1);
        let cu = fu.axpy(h, &Self::decay(&k3u, eu2));
        let cb = fb.axpy(h, &Self::decay(&k3b, eb2));
        let (k4u, k4b) = n(&cu, &cb);

        let combine = |f: &SpectralField,
                       k1: &SpectralField,
                       k2: &SpectralField,
                       k3: &SpectralField,
                       k4: &SpectralField,
                       e2: &[f64],
                       e1: &[f64]| {
            let mid = Self::decay(&(k2 + k3), e2);
            let acc = Self::decay(k1, e1).axpy(2.0, &mid);
            f.axpy(h / 6.0, &(&acc + k4))
        };
        let u = match self.mode {
            Mode::HallOnly => s.u.clone(),
            _ => combine(&fu, &k1u, &k2u, &k3u, &k4u, eu2, eu1),
        };
        let b = combine(&fb, &k1b, &k2b, &k3b, &k4b, eb2, eb1);
        State { u, b, t: s.t + h }
    }
}

/// Advance one step of size `config.dt`.
pub fn step(state: &State, config: &SolverConfig) -> Result<State> {
    config.validate()?;
    let next = Stepper::new(state.grid(), config.params, config.mode, config.dt).step(state);
    if !next.is_finite() {
        return Err(Error::BlowUp(next.t));
    }
    Ok(next)
}

/// Advisory step bound `min(Δx/‖u‖_∞, c/(η‖b‖_∞ k_max²))`.
pub fn cfl_limit(state: &State, params: &PhysicalParams, mode: Mode) -> f64 {
    let grid = state.grid();
    let umax = state.u.to_physical().norm(crate::spectral::Lp::Inf);
    let bmax = state.b.to_physical().norm(crate::spectral::Lp::Inf);
    let eta = mode.hall_coefficient(params);
    let kmax = grid.kmax() as f64;
    let adv = if umax > 0.0 && mode != Mode::HallOnly { grid.dx() / umax } else { f64::INFINITY };
    let hall = if eta * bmax > 0.0 { HALL_CFL / (eta * bmax * kmax * kmax) } else { f64::INFINITY };
    adv.min(hall)
}

/// Receives snapshots from [`run`], on the stepping thread.
pub trait Sink {
    fn snapshot(&mut self, step: usize, state: &State) -> Result<()>;
}

impl<F: FnMut(usize, &State) -> Result<()>> Sink for F {
    fn snapshot(&mut self, step: usize, state: &State) -> Result<()> {
        self(step, state)
    }
}

/// Discards everything.
pub struct NullSink;

impl Sink for NullSink {
    fn snapshot(&mut self, _: usize, _: &State) -> Result<()> {
        Ok(())
    }
}

/// Collects every snapshot in memory.
#[derive(Default)]
pub struct TraceSink {
    pub states: Vec<State>,
}

impl Sink for TraceSink {
    fn snapshot(&mut self, _: usize, state: &State) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: State,
    pub steps: usize,
    /// Time at which the blow-up guard stopped the run.
    pub halted_at: Option<f64>,
    pub psi0: f64,
    /// Largest `‖b - Pb‖₂` removed by the safety projections.
    pub max_projection_correction: f64,
}

/// Integrate from `initial` to `config.tmax`, emitting every
/// `snapshot_every`-th state (including the first and the last).
pub fn run(initial: &State, config: &SolverConfig, sink: &mut dyn Sink) -> Result<RunOutcome> {
    config.validate()?;
    initial.check_divergence()?;
    let grid = initial.grid().clone();
    let stepper = Stepper::new(&grid, config.params, config.mode, config.dt);
    let ws = dyadic_weight(&grid, config.sobolev.s);
    let wr = dyadic_weight(&grid, config.sobolev.r);
    let psi = |s: &State| weighted_sq(&s.u, &ws) + weighted_sq(&s.b, &wr);

    let cfl = cfl_limit(initial, &config.params, config.mode);
    if config.dt > cfl {
        warn!("dt = {} exceeds the advisory CFL bound {cfl:.3e}", config.dt);
    }
    let psi0 = psi(initial);
    let t0 = initial.t;
    let nsteps = config.steps();
    let mut state = initial.clone();
    let mut max_corr: f64 = 0.0;
    sink.snapshot(0, &state)?;
    let mut halted_at = None;
    let mut last_emitted = 0;
    let mut done = 0;
    for n in 1..=nsteps {
        state = stepper.step(&state);
        state.t = t0 + n as f64 * config.dt;
        done = n;
        if !state.is_finite() {
            return Err(Error::BlowUp(state.t));
        }
        if n % SAFETY_PROJECTION_EVERY == 0 {
            let projected = state.b.leray_project()?;
            let corr = (&state.b - &projected).norm_l2();
            debug!("safety projection at step {n}: removed {corr:.3e}");
            max_corr = max_corr.max(corr);
            state.b = projected;
        }
        state.check_divergence().map_err(|e| match e {
            Error::StateDrift(d) => {
                warn!("divergence drift {d:.3e} at t = {}", state.t);
                e
            }
            e => e,
        })?;
        if psi(&state) > config.guard_factor * psi0 {
            info!("blow-up guard tripped at t = {}", state.t);
            halted_at = Some(state.t);
            sink.snapshot(n, &state)?;
            last_emitted = n;
            break;
        }
        if n % config.snapshot_every == 0 || n == nsteps {
            sink.snapshot(n, &state)?;
            last_emitted = n;
            if n % config.snapshot_every == 0 && n != nsteps {
                let cfl = cfl_limit(&state, &config.params, config.mode);
                if config.dt > cfl {
                    warn!("dt = {} exceeds the advisory CFL bound {cfl:.3e} at t = {}", config.dt, state.t);
                }
            }
        }
    }
    debug_assert!(last_emitted == done || done == 0);
    Ok(RunOutcome { state, steps: done, halted_at, psi0, max_projection_correction: max_corr })
}

/// `Σ_k W(k) |f̂_k|²` with the box measure.
pub(crate) fn weighted_sq(f: &SpectralField, w: &[f64]) -> f64 {
    let g = f.grid();
    let s: f64 = f
        .components()
        .iter()
        .map(|c| c.iter().zip(w).enumerate().map(|(i, (v, w))| g.weight(i) * w * v.norm_sqr()).sum::<f64>())
        .sum();
    s * g.volume()
}

/// Pressure with zero mean, from `-Δp = ∇·(u·∇u - b·∇b)`.
pub fn recover_pressure(state: &State, _params: &PhysicalParams) -> Result<SpectralField> {
    let f = &advect(&state.u, &state.u)? - &advect(&state.b, &state.b)?;
    let div = f.divergence()?;
    let g = state.grid();
    Ok(div.apply_multiplier(|i| {
        let k = g.deriv_wavevector(i);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / k2
        }
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `(0, sin x, cos x)` in both fields: every nonlinearity vanishes.
    Beltrami,
    TaylorGreenLike,
    /// Seeded random solenoidal fields.
    RandomBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: InitialKind,
    #[serde(default)]
    pub seed: u64,
    /// Target `‖u₀‖_{H^s}`.
    pub target_u: f64,
    /// Target `‖b₀‖_{H^r}`.
    pub target_b: f64,
    /// Radial band limit for random data; defaults to the dealiased band.
    #[serde(default)]
    pub band: Option<f64>,
    /// Spectral decay exponent for random data.
    #[serde(default = "default_slope")]
    pub slope: f64,
}

fn default_slope() -> f64 {
    2.0
}

impl InitialSpec {
    pub fn new(kind: InitialKind, seed: u64, target_u: f64, target_b: f64) -> Self {
        Self { kind, seed, target_u, target_b, band: None, slope: default_slope() }
    }
}

/// Seed offset used for the magnetic field of random data.
pub const MAGNETIC_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Divergence-free initial data with `‖u₀‖_{H^s}`, `‖b₀‖_{H^r}` at the targets.
pub fn make_initial(spec: &InitialSpec, grid: &Grid, sob: &SobolevParams) -> Result<State> {
    let three_d = grid.n() == 3;
    let (u, b) = match spec.kind {
        InitialKind::Beltrami => {
            let s = SpectralField::from_fn(grid, 3, |x, o| {
                o[0] = 0.0;
                o[1] = x[0].sin();
                o[2] = x[0].cos();
            });
            (s.clone(), s)
        }
        InitialKind::TaylorGreenLike => {
            let u = SpectralField::from_fn(grid, 3, |x, o| {
                let cz = if three_d { x[2].cos() } else { 1.0 };
                o[0] = x[0].sin() * x[1].cos() * cz;
                o[1] = -x[0].cos() * x[1].sin() * cz;
                o[2] = 0.0;
            });
            let b = SpectralField::from_fn(grid, 3, |x, o| {
                if three_d {
                    o[0] = x[1].sin() * x[2].cos();
                    o[1] = x[2].sin() * x[0].cos();
                    o[2] = x[0].sin() * x[1].cos();
                } else {
                    o[0] = x[1].sin();
                    o[1] = x[0].cos();
                    o[2] = x[0].sin() * x[1].cos();
                }
            });
            (u, b)
        }
        InitialKind::RandomBand => {
            let rs = RandomSpec { max_k: spec.band.unwrap_or(f64::INFINITY), ..RandomSpec::default() }
                .with_slope(spec.slope);
            (
                random_solenoidal(grid, spec.seed, &rs),
                random_solenoidal(grid, spec.seed.wrapping_add(MAGNETIC_SEED_OFFSET), &rs),
            )
        }
    };
    let rescale = |f: SpectralField, target: f64, s: f64| -> Result<SpectralField> {
        if !(target >= 0.0 && target.is_finite()) {
            return Err(Error::InvalidParameter(format!("target norm {target}")));
        }
        if target == 0.0 {
            return Ok(SpectralField::zeros(grid, 3));
        }
        let f = f.dealias();
        let norm = dyadic_sobolev_norm(&f, s);
        if norm == 0.0 {
            return Err(Error::ZeroDraw(spec.seed));
        }
        Ok(f.scale(target / norm))
    };
    State::new(rescale(u, spec.target_u, sob.s)?, rescale(b, spec.target_b, sob.r)?, 0.0)
}
