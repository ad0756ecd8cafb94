//! Difference of two solutions, `U = u₁ - u₂`, `B = b₁ - b₂`:
//!
//! ```text
//! U_t + u₂·∇U - b₂·∇B + U·∇u₁ - B·∇b₁ + ∇π = νΔU
//! B_t + u₂·∇B - b₂·∇U + U·∇b₁ - B·∇u₁
//!     + η∇×((∇×b₂)×B) + η∇×((∇×B)×b₁) = μΔB
//! ```

use serde::Serialize;

use crate::diagnostics::{integral_with_scale, relative};
use crate::error::{Error, Result};
use crate::lp::{dyadic_sobolev_norm, SobolevParams};
use crate::solver::State;
use crate::spectral::{
    advect, check_same, cross, Lp, PhysicalParams, SpectralField,
};

fn check_solenoidal(fields: &[&SpectralField]) -> Result<()> {
    for f in fields {
        let d = f.divergence()?.sup_bound();
        if d > crate::solver::DIVERGENCE_TOLERANCE {
            return Err(Error::StateDrift(d));
        }
    }
    Ok(())
}

/// `(dU/dt, dB/dt)` from the literal difference system, projected for `U`.
pub fn difference_rhs(
    du: &SpectralField,
    db: &SpectralField,
    u1: &SpectralField,
    b1: &SpectralField,
    u2: &SpectralField,
    b2: &SpectralField,
    params: &PhysicalParams,
) -> Result<(SpectralField, SpectralField)> {
    for f in [db, u1, b1, u2, b2] {
        check_same(du.grid(), f.grid())?;
    }
    check_solenoidal(&[du, db, u1, b1, u2, b2])?;
    let nl_u = &(&(&advect(b2, db)? - &advect(u2, du)?) - &advect(du, u1)?) + &advect(db, b1)?;
    let rhs_u = nl_u.leray_project()?.axpy(params.nu, &du.laplacian());
    let hall = &cross(&b2.curl()?, db)? + &cross(&db.curl()?, b1)?;
    let nl_b = &(&(&advect(b2, du)? - &advect(u2, db)?) - &advect(du, b1)?) + &advect(db, u1)?;
    let rhs_b = nl_b.axpy(-params.eta, &hall.curl()?).axpy(params.mu, &db.laplacian());
    Ok((rhs_u, rhs_b))
}

/// The four vanishing integrals, each as `|∫ f| / ∫ |f|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cancellations {
    /// `∫(u₂·∇U)·U`
    pub transport_u: f64,
    /// `∫(u₂·∇B)·B`
    pub transport_b: f64,
    /// `∫∇×((∇×B)×b₁)·B`
    pub hall: f64,
    /// `∫(b₂·∇B)·U + ∫(b₂·∇U)·B`
    pub stretching: f64,
}

impl Cancellations {
    pub fn values(&self) -> [f64; 4] {
        [self.transport_u, self.transport_b, self.hall, self.stretching]
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

pub fn cancellation_check(
    du: &SpectralField,
    db: &SpectralField,
    u2: &SpectralField,
    b1: &SpectralField,
    b2: &SpectralField,
) -> Result<Cancellations> {
    for f in [db, u2, b1, b2] {
        check_same(du.grid(), f.grid())?;
    }
    let r = |(v, s): (f64, f64)| relative(v, s);
    let (s1, m1) = integral_with_scale(&advect(b2, db)?, du)?;
    let (s2, m2) = integral_with_scale(&advect(b2, du)?, db)?;
    Ok(Cancellations {
        transport_u: r(integral_with_scale(&advect(u2, du)?, du)?),
        transport_b: r(integral_with_scale(&advect(u2, db)?, db)?),
        hall: r(integral_with_scale(&cross(&db.curl()?, b1)?.curl()?, db)?),
        stretching: relative(s1 + s2, m1 + m2),
    })
}

/// One of the surviving difference fluxes with the product of norms bounding it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxBound {
    pub value: f64,
    pub bound: f64,
}

impl FluxBound {
    pub fn holds(&self) -> bool {
        self.value.abs() <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

/// The five surviving fluxes, in the order
/// `∫(B·∇)b₁·U`, `∫(U·∇)u₁·U`, `∫(B·∇)u₁·B`, `∫(U·∇)b₁·B`, `∫∇×((∇×b₂)×B)·B`,
/// bounded by `‖B‖‖∇U‖‖b₁‖_∞`, `‖U‖‖∇U‖‖u₁‖_∞`, `‖B‖‖∇B‖‖u₁‖_∞`,
/// `‖U‖‖∇B‖‖b₁‖_∞`, `‖∇×B‖‖∇×b₂‖_∞‖B‖` with grid-sampled sup norms.
pub fn flux_bounds(
    du: &SpectralField,
    db: &SpectralField,
    u1: &SpectralField,
    b1: &SpectralField,
    b2: &SpectralField,
) -> Result<[FluxBound; 5]> {
    let sup = |f: &SpectralField| f.to_physical().norm(Lp::Inf);
    let grad = |f: &SpectralField| f.gradient().norm_l2();
    let (nu, nb) = (du.norm_l2(), db.norm_l2());
    let (gu, gb) = (grad(du), grad(db));
    let (su1, sb1) = (sup(u1), sup(b1));
    let cb = db.curl()?;
    let fb = |value: f64, bound: f64| FluxBound { value, bound };
    Ok([
        fb(advect(db, b1)?.inner(du), nb * gu * sb1),
        fb(advect(du, u1)?.inner(du), nu * gu * su1),
        fb(advect(db, u1)?.inner(db), nb * gb * su1),
        fb(advect(du, b1)?.inner(db), nu * gb * sb1),
        fb(cross(&b2.curl()?, db)?.curl()?.inner(db), cb.norm_l2() * sup(&b2.curl()?) * nb),
    ])
}

/// `(∫∇×((∇×b₂)×B)·B, ∫((∇×b₂)×B)·(∇×B))`.
pub fn hall_difference_forms(db: &SpectralField, b2: &SpectralField) -> Result<(f64, f64)> {
    let t = cross(&b2.curl()?, db)?;
    Ok((t.curl()?.inner(db), t.inner(&db.curl()?)))
}

/// Energy of the difference and its Grönwall envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifferenceTrace {
    pub t: Vec<f64>,
    /// `‖U‖₂² + ‖B‖₂²`
    pub energy: Vec<f64>,
    /// `∫₀ᵗ ‖u₁‖²_{H^{s+1}} + ‖∇b₂‖²_{H^{s+1-ε}} dτ`, trapezoid rule
    pub integral: Vec<f64>,
    /// `exp{C_{ν,μ}·integral + C·C_{ν,μ}·t}`
    pub gronwall_factor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallReport {
    pub trace: DifferenceTrace,
    pub pass: bool,
    /// Smallest `C_{ν,μ}` for which the envelope holds at every sample.
    pub minimal_cnu: f64,
}

/// Compare two runs sampled at common times.
pub fn gronwall_check(
    run1: &[State],
    run2: &[State],
    sob: &SobolevParams,
    c: f64,
    cnu: f64,
) -> Result<GronwallReport> {
    if run1.len() != run2.len() || run1.is_empty() {
        return Err(Error::MismatchedTraces(format!("{} vs {} samples", run1.len(), run2.len())));
    }
    for (a, b) in run1.iter().zip(run2) {
        check_same(a.grid(), b.grid())?;
        if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
            return Err(Error::MismatchedTraces(format!("times {} and {}", a.t, b.t)));
        }
    }
    let t: Vec<f64> = run1.iter().map(|s| s.t).collect();
    let energy: Vec<f64> = run1
        .iter()
        .zip(run2)
        .map(|(a, b)| {
            let (du, db) = (&a.u - &b.u, &a.b - &b.b);
            du.inner(&du) + db.inner(&db)
        })
        .collect();
    let rate: Vec<f64> = run1
        .iter()
        .zip(run2)
        .map(|(a, b)| {
            dyadic_sobolev_norm(&a.u, sob.s + 1.0).powi(2)
                + dyadic_sobolev_norm(&b.b.gradient(), sob.s + 1.0 - sob.eps).powi(2)
        })
        .collect();
    let mut integral = vec![0.0; t.len()];
    for i in 1..t.len() {
        integral[i] = integral[i - 1] + 0.5 * (t[i] - t[i - 1]) * (rate[i] + rate[i - 1]);
    }
    let elapsed: Vec<f64> = t.iter().map(|x| x - t[0]).collect();
    let gronwall_factor: Vec<f64> =
        integral.iter().zip(&elapsed).map(|(a, t)| (cnu * (a + c * t)).exp()).collect();
    let e0 = energy[0];
    let pass = energy.iter().zip(integral.iter().zip(&elapsed)).all(|(e, (a, t))| {
        *e == 0.0 || (e0 > 0.0 && (e / e0).ln() <= cnu * (a + c * t) + 1e-12)
    });
    let minimal_cnu = if e0 > 0.0 {
        energy
            .iter()
            .zip(integral.iter().zip(&elapsed))
            .skip(1)
            .map(|(e, (a, t))| {
                let grow = (e / e0).ln();
                if grow <= 0.0 {
                    0.0
                } else {
                    grow / (a + c * t)
                }
            })
            .fold(0.0, f64::max)
    } else if energy.iter().all(|e| *e == 0.0) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GronwallReport { trace: DifferenceTrace { t, energy, integral, gronwall_factor }, pass, minimal_cnu })
}

/// `max(a, b) / min(a, b)`, with two vanishing constants counted as equal.
pub fn constant_drift(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `u + (‖u‖₂/‖∇φ‖₂)·∇φ` with `Δφ = -(g - ḡ)`, `g = |U|² + |B|²`: a velocity
/// whose divergence is aligned with the difference energy density, so the
/// transport cancellations fail by an amount of order one.
pub fn gradient_contaminated(u: &SpectralField, du: &SpectralField, db: &SpectralField) -> Result<SpectralField> {
    check_same(u.grid(), du.grid())?;
    check_same(u.grid(), db.grid())?;
    let (up, bp) = (du.to_physical(), db.to_physical());
    let density = up.dot(&up)?.add(&bp.dot(&bp)?)?.to_spectral().dealias();
    let grid = u.grid();
    let phi = density.apply_multiplier(|i| {
        let k = grid.deriv_wavevector(i);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / k2
        }
    });
    perturb(u, &phi.gradient(), 1.0)
}

/// `f + eps·(‖f‖₂/‖w‖₂)·w`: a perturbation of relative size `eps`.
pub fn perturb(f: &SpectralField, w: &SpectralField, eps: f64) -> Result<SpectralField> {
    check_same(f.grid(), w.grid())?;
    let nw = w.norm_l2();
    if nw == 0.0 {
        return Err(Error::UndefinedRatio("zero perturbation direction".into()));
    }
    Ok(f.axpy(eps * f.norm_l2() / nw, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{compute_rhs, Mode};
    use crate::spectral::{random_solenoidal, Grid, RandomSpec};
    use proptest::prelude::*;

    fn sol(g: &Grid, seed: u64) -> SpectralField {
        random_solenoidal(g, seed, &RandomSpec::default())
    }

    fn params() -> PhysicalParams {
        PhysicalParams::new(0.03, 0.02, 0.9).unwrap()
    }

    #[test]
    fn zero_difference_has_zero_rhs() {
        let g = Grid::new(3, 16).unwrap();
        let (u, b, z) = (sol(&g, 1), sol(&g, 2), SpectralField::zeros(&g, 3));
        let (a, c) = difference_rhs(&z, &z, &u, &b, &u, &b, &params()).unwrap();
        assert_eq!(a.max_abs_coefficient(), 0.0);
        assert_eq!(c.max_abs_coefficient(), 0.0);
    }

    #[test]
    fn difference_rhs_is_rhs_difference() {
        let g = Grid::new(3, 16).unwrap();
        let (u1, b1, u2, b2) = (sol(&g, 1), sol(&g, 2), sol(&g, 3), sol(&g, 4));
        let p = params();
        for (b1, b2) in [(b1.clone(), b2.clone()), (b1.scale(0.0), b2.scale(0.0))] {
            let (du, db) = (&u1 - &u2, &b1 - &b2);
            let (ru, rb) = difference_rhs(&du, &db, &u1, &b1, &u2, &b2, &p).unwrap();
            let s1 = State::new(u1.clone(), b1.clone(), 0.0).unwrap();
            let s2 = State::new(u2.clone(), b2.clone(), 0.0).unwrap();
            let (f1u, f1b) = compute_rhs(&s1, &p, Mode::Full).unwrap();
            let (f2u, f2b) = compute_rhs(&s2, &p, Mode::Full).unwrap();
            let (eu, eb) = (&f1u - &f2u, &f1b - &f2b);
            assert!((&ru - &eu).norm_l2() < 1e-10 * eu.norm_l2());
            assert!((&rb - &eb).norm_l2() <= 1e-10 * eb.norm_l2());
        }
    }

    #[test]
    fn rejects_divergent_difference() {
        let g = Grid::new(3, 16).unwrap();
        let grad = SpectralField::from_fn(&g, 1, |x, o| o[0] = x[1].cos()).gradient();
        let u = sol(&g, 1);
        assert!(matches!(
            difference_rhs(&grad, &u, &u, &u, &u, &u, &params()),
            Err(Error::StateDrift(_))
        ));
    }

    #[test]
    fn zero_fields_cancel_trivially() {
        let g = Grid::new(3, 16).unwrap();
        let z = SpectralField::zeros(&g, 3);
        assert_eq!(cancellation_check(&z, &z, &z, &z, &z).unwrap().values(), [0.0; 4]);
    }

    #[test]
    fn gradient_contamination_breaks_transport_cancellation() {
        let g = Grid::new(3, 16).unwrap();
        for seed in 0..6 {
            let (du, db) = (sol(&g, 100 + seed), sol(&g, 200 + seed));
            let u2 = gradient_contaminated(&sol(&g, seed), &du, &db).unwrap();
            let c = cancellation_check(&du, &db, &u2, &sol(&g, 4), &sol(&g, 5)).unwrap();
            assert!(c.transport_u > 0.1 && c.transport_b > 0.1, "{c:?}");
        }
    }

    #[test]
    fn surviving_fluxes_obey_their_bounds() {
        let g = Grid::new(3, 16).unwrap();
        let (u1, b1, b2) = (sol(&g, 1), sol(&g, 2), sol(&g, 4));
        let (du, db) = (sol(&g, 5).scale(1e-3), sol(&g, 6).scale(1e-3));
        for f in flux_bounds(&du, &db, &u1, &b1, &b2).unwrap() {
            assert!(f.holds() && f.value != 0.0, "{f:?}");
        }
        let (x, y) = hall_difference_forms(&db, &b2).unwrap();
        assert!((x - y).abs() < 1e-10 * y.abs());
    }

    #[test]
    fn identical_runs_have_zero_difference() {
        let g = Grid::new(3, 16).unwrap();
        let s = State::new(sol(&g, 1), sol(&g, 2), 0.0).unwrap();
        let runs = vec![s.clone(), State { t: 0.1, ..s }];
        let sob = SobolevParams::new(3, 1.0, 0.25, None).unwrap();
        let r = gronwall_check(&runs, &runs, &sob, 1.0, 1.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.minimal_cnu, 0.0);
        assert!(r.trace.gronwall_factor.windows(2).all(|w| w[1] >= w[0]) && r.trace.gronwall_factor[0] == 1.0);
    }

    #[test]
    fn gronwall_rejects_mismatched_times() {
        let g = Grid::new(3, 16).unwrap();
        let s = State::zeros(&g);
        let a = vec![s.clone()];
        let b = vec![State { t: 1.0, ..s.clone() }];
        let sob = SobolevParams::new(3, 1.0, 0.25, None).unwrap();
        assert!(matches!(gronwall_check(&a, &b, &sob, 1.0, 1.0), Err(Error::MismatchedTraces(_))));
        assert!(gronwall_check(&a, &[s.clone(), s], &sob, 1.0, 1.0).is_err());
    }

    #[test]
    fn minimal_constant_is_tight() {
        let g = Grid::new(3, 16).unwrap();
        let base = State::new(sol(&g, 1), sol(&g, 2), 0.0).unwrap();
        let grow = |t: f64, k: f64| State::new(base.u.scale(k), base.b.scale(k), t).unwrap();
        let zero = |t: f64| State { t, ..State::zeros(&g) };
        let run1 = vec![grow(0.0, 1.0), grow(0.1, 1.5), grow(0.2, 1.2)];
        let run2 = vec![zero(0.0), zero(0.1), zero(0.2)];
        let sob = SobolevParams::new(3, 1.0, 0.25, None).unwrap();
        let m = gronwall_check(&run1, &run2, &sob, 1.0, 1.0).unwrap().minimal_cnu;
        assert!(m > 0.0);
        assert!(gronwall_check(&run1, &run2, &sob, 1.0, m * 1.001).unwrap().pass);
        assert!(!gronwall_check(&run1, &run2, &sob, 1.0, m * 0.99).unwrap().pass);
    }

    #[test]
    fn drift_ratio() {
        assert_eq!(constant_drift(0.0, 0.0), 1.0);
        assert_eq!(constant_drift(2.0, 1.0), 2.0);
        assert_eq!(constant_drift(0.0, 1.0), f64::INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn cancellations_hold_for_any_seed(seed in 0u64..1_000_000, amp in 0.1f64..10.0) {
            let g = Grid::new(3, 16).unwrap();
            let f = |k: u64| sol(&g, seed * 5 + k).scale(amp);
            let c = cancellation_check(&f(0), &f(1), &f(2), &f(3), &f(4)).unwrap();
            prop_assert!(c.max() < 1e-10, "{:?}", c);
        }

        #[test]
        fn perturbation_has_requested_size(seed in 0u64..1_000_000, eps in 1e-8f64..1e-2) {
            let g = Grid::new(2, 16).unwrap();
            let (f, w) = (sol(&g, seed), sol(&g, seed + 1));
            let p = perturb(&f, &w, eps).unwrap();
            let rel = (&p - &f).norm_l2() / f.norm_l2();
            prop_assert!((rel / eps - 1.0).abs() < 1e-9);
        }
    }
}
