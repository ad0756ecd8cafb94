use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::SobolevParams;
use crate::solver::{InitialSpec, Mode, Scheme, SolverConfig};
use crate::spectral::{Grid, PhysicalParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub dims: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevSection {
    pub s: f64,
    pub eps: f64,
    /// Defaults to `s + 1 - eps`.
    #[serde(default)]
    pub r: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub tmax: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "one")]
    pub snapshot_every: usize,
    #[serde(default = "default_guard")]
    pub guard_factor: f64,
}

fn default_mode() -> Mode {
    Mode::Full
}

fn one() -> usize {
    1
}

fn default_guard() -> f64 {
    1e6
}

/// Constants of the `ψ` bound and the Grönwall rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub c: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    #[serde(default = "one_f")]
    pub c_nu_mu: f64,
}

fn one_f() -> f64 {
    1.0
}

/// Sizes and seeds of the verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub first_seed: u64,
    pub bony_pairs: usize,
    pub sweep_seeds: usize,
    pub bernstein_seeds: usize,
    pub cancellation_seeds: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { first_seed: 0, bony_pairs: 20, sweep_seeds: 100, bernstein_seeds: 10, cancellation_seeds: 10 }
    }
}

/// Everything a CLI pipeline needs, loaded from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub params: PhysicalParams,
    pub sobolev: SobolevSection,
    pub solver: SolverSection,
    pub init: InitialSpec,
    #[serde(default)]
    pub calibration: Option<CalibrationSection>,
    #[serde(default)]
    pub verify: VerifySection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section; errors name the field or the violated inequality.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.sobolev()?;
        self.params.validate()?;
        if !self.params.is_dissipative() {
            return Err(Error::Constraint(format!(
                "nu > 0 and mu > 0 violated: nu = {}, mu = {}",
                self.params.nu, self.params.mu
            )));
        }
        self.solver_config()?.validate()?;
        if !(self.solver.guard_factor > 1.0) {
            return Err(Error::Constraint(format!(
                "solver.guard_factor > 1 violated: {}",
                self.solver.guard_factor
            )));
        }
        for (name, v) in [("init.target_u", self.init.target_u), ("init.target_b", self.init.target_b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Constraint(format!("{name} >= 0 violated: {v}")));
            }
        }
        if let Some(c) = &self.calibration {
            if !(c.c > 0.0 && c.gamma_low > 0.0 && c.gamma_low <= c.gamma_high) {
                return Err(Error::Constraint(format!(
                    "calibration needs C > 0 and 0 < gamma_low <= gamma_high, got {}, {}, {}",
                    c.c, c.gamma_low, c.gamma_high
                )));
            }
            if !(c.c_nu_mu >= 0.0) {
                return Err(Error::Constraint(format!("calibration.c_nu_mu >= 0 violated: {}", c.c_nu_mu)));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.dims)
    }

    pub fn sobolev(&self) -> Result<SobolevParams> {
        SobolevParams::new(self.grid.n, self.sobolev.s, self.sobolev.eps, self.sobolev.r)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(self.params, self.solver.dt, self.solver.tmax, self.solver.mode, self.sobolev()?);
        c.scheme = self.solver.scheme;
        c.snapshot_every = self.solver.snapshot_every;
        c.guard_factor = self.solver.guard_factor;
        Ok(c)
    }
}

/// The default verification configuration: 32³, random band-limited data.
pub const DEFAULT_CONFIG: &str = r#"[grid]
n = 3
dims = 32

[params]
nu = 0.05
mu = 0.05
eta = 0.5

[sobolev]
s = 1.0
eps = 0.25

[solver]
dt = 1e-3
tmax = 0.02
mode = "full"
snapshot_every = 1

[init]
kind = "random_band"
seed = 7
target_u = 1.0
target_b = 1.0
band = 6.0

[verify]
first_seed = 0
bony_pairs = 20
sweep_seeds = 100
bernstein_seeds = 10
cancellation_seeds = 10
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_loads() {
        let c = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
        assert_eq!(c.grid().unwrap().dims(), 32);
        assert_eq!(c.sobolev().unwrap().r, 1.75);
        assert_eq!(c.solver_config().unwrap().steps(), 20);
        assert_eq!(c.verify.sweep_seeds, 100);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn dotted_keys_are_accepted() {
        let dotted = "grid.n = 2\ngrid.dims = 16\nparams.nu = 0.1\nparams.mu = 0.1\nparams.eta = 1.0\n\
            sobolev.s = 1.0\nsobolev.eps = 0.5\nsolver.dt = 0.01\nsolver.tmax = 0.1\n\
            init.kind = \"beltrami\"\ninit.target_u = 0.0\ninit.target_b = 1.0\n";
        let c = RunConfig::from_toml(dotted).unwrap();
        assert_eq!(c.grid.n, 2);
        assert_eq!(c.solver.mode, Mode::Full);
    }

    #[test]
    fn unknown_and_malformed_fields_are_named() {
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("nu = 0.05", "nu = 0.05\nnuu = 1.0")).unwrap_err();
        assert!(e.to_string().contains("nuu"), "{e}");
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("dims = 32", "dims = \"x\"")).unwrap_err();
        assert!(e.to_string().contains("dims"), "{e}");
    }

    #[test]
    fn violations_cite_the_inequality() {
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("s = 1.0", "s = 0.4")).unwrap_err();
        assert!(e.to_string().contains("s > n/2 - 1"), "{e}");
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("eps = 0.25", "eps = 0.6")).unwrap_err();
        assert!(e.to_string().contains("r > n/2"), "{e}");
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("eps = 0.25", "eps = 0.25\nr = 1.2")).unwrap_err();
        assert!(e.to_string().contains("r > n/2"), "{e}");
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("nu = 0.05", "nu = 0.0")).unwrap_err();
        assert!(e.to_string().contains("nu > 0"), "{e}");
        let e = RunConfig::from_toml(&DEFAULT_CONFIG.replace("dims = 32", "dims = 24")).unwrap_err();
        assert!(matches!(e, Error::InvalidGrid(_)), "{e}");
    }
}
