//! CSV tables of shell energies and fluxes.
//!
//! `shells.csv`: `t,q,e_u,e_b,d_u,d_b`, one row per time and shell.
//! `fluxes.csv`: `t,I1,I2,I3,I4,I5,residual_u,residual_b`, one row per time.
//! Floats use 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::snapshot::{write_atomic, Snapshot};
use crate::diagnostics::{diagnostic_sample, energy_balance_residual, BalanceResidual, DiagnosticSample};
use crate::error::{Error, Result};
use crate::lp::SobolevParams;
use crate::solver::Mode;
use crate::spectral::PhysicalParams;

pub const SHELLS_HEADER: &str = "t,q,e_u,e_b,d_u,d_b";
pub const FLUXES_HEADER: &str = "t,I1,I2,I3,I4,I5,residual_u,residual_b";

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn shells_csv(samples: &[DiagnosticSample]) -> String {
    let mut out = String::from(SHELLS_HEADER);
    out.push('\n');
    for s in samples {
        let r = &s.shells;
        for (j, q) in r.qs().enumerate() {
            num(&mut out, r.t);
            write!(out, ",{q}").unwrap();
            for v in [r.e_u[j], r.e_b[j], r.d_u[j], r.d_b[j]] {
                out.push(',');
                num(&mut out, v);
            }
            out.push('\n');
        }
    }
    out
}

/// Residual columns are `NaN` when there are too few samples to
/// differentiate in time.
pub fn fluxes_csv(samples: &[DiagnosticSample], residual: Option<&BalanceResidual>) -> String {
    let mut out = String::from(FLUXES_HEADER);
    out.push('\n');
    for (i, s) in samples.iter().enumerate() {
        num(&mut out, s.flux.t);
        let (ru, rb) = residual.map_or((f64::NAN, f64::NAN), |r| (r.residual_u[i], r.residual_b[i]));
        for v in s.flux.values().into_iter().chain([ru, rb]) {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Diagnostics of a run, computed from its snapshots.
pub struct RunTables {
    pub samples: Vec<DiagnosticSample>,
    pub residual: Option<BalanceResidual>,
}

impl RunTables {
    pub fn compute(
        snapshots: &[Snapshot],
        params: &PhysicalParams,
        sob: &SobolevParams,
        mode: Mode,
    ) -> Result<Self> {
        let samples = snapshots
            .iter()
            .map(|s| diagnostic_sample(&s.to_state()?, params, sob, mode))
            .collect::<Result<Vec<_>>>()?;
        let residual = match energy_balance_residual(&samples, params, mode) {
            Ok(r) => Some(r),
            Err(Error::TooFewSamples { got, .. }) => {
                warn!("{got} snapshots, balance residuals need 3");
                None
            }
            Err(e) => return Err(e),
        };
        Ok(Self { samples, residual })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("shells.csv"), shells_csv(&self.samples).as_bytes())?;
        write_atomic(&dir.join("fluxes.csv"), fluxes_csv(&self.samples, self.residual.as_ref()).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::State;
    use crate::spectral::Grid;

    #[test]
    fn zero_state_gives_zero_rows() {
        let g = Grid::new(2, 16).unwrap();
        let sob = SobolevParams::new(2, 1.0, 0.5, None).unwrap();
        let params = PhysicalParams::new(0.1, 0.1, 1.0).unwrap();
        let snaps: Vec<Snapshot> = (0..3)
            .map(|i| {
                let mut s = State::zeros(&g);
                s.t = 0.1 * i as f64;
                Snapshot::from_state(&s)
            })
            .collect();
        let t = RunTables::compute(&snaps, &params, &sob, Mode::Full).unwrap();
        let shells = shells_csv(&t.samples);
        let fluxes = fluxes_csv(&t.samples, t.residual.as_ref());
        assert_eq!(shells.lines().next(), Some(SHELLS_HEADER));
        assert_eq!(fluxes.lines().count(), 4);
        for line in shells.lines().skip(1) {
            assert!(line.split(',').skip(2).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
        }
        for line in fluxes.lines().skip(1) {
            assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
        }
    }

    #[test]
    fn floats_round_trip_through_text() {
        let mut s = String::new();
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -7.25e17] {
            s.clear();
            num(&mut s, v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
