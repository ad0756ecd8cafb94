use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use hmhd::diagnostics::{existence_time, psi_bound, scaling_check, ScalingMode};
use hmhd::io::{list_snapshots, snapshot_dir, snapshot_path, RunConfig, RunSummary, RunTables, Snapshot};
use hmhd::solver::{make_initial, run, State, TraceSink};
use hmhd::spectral::{random_solenoidal, RandomSpec};
use hmhd::uniqueness::{gronwall_check, perturb};
use hmhd::verify::run_suite;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Pseudo-spectral Hall-MHD solver and Littlewood-Paley verification suite.
#[derive(Parser)]
#[command(name = "hmhd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver, writing snapshots and shell-energy/flux CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the identity and estimate suite; exit 0 iff every check passes.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare a run with its dilated counterpart.
    Scaling {
        #[arg(long, value_enum)]
        mode: ScalingArg,
        #[arg(long, value_parser = ["2", "4"])]
        lambda: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Paired runs from perturbed data, checked against the Grönwall envelope.
    Uniqueness {
        #[arg(long)]
        config: PathBuf,
        /// Relative size of the perturbation of both fields.
        #[arg(long)]
        perturb: f64,
    },
    /// Recompute diagnostics from the snapshots of a simulate run.
    Analyze {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Mhd,
    Hall,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Verify { config } => verify(&config),
        Command::Scaling { mode, lambda, config } => scaling(mode, lambda.parse().expect("validated"), &config),
        Command::Uniqueness { config, perturb } => uniqueness(&config, perturb),
        Command::Analyze { run } => analyze(&run),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `HMHD_THREADS` caps the rayon pool.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("HMHD_THREADS") else { return Ok(()) };
    let n: usize = v.parse().with_context(|| format!("HMHD_THREADS = {v:?} is not a thread count"))?;
    if n == 0 {
        bail!("HMHD_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn simulate(config_path: &Path, out: &Path) -> Result<bool> {
    let cfg = load(config_path)?;
    let grid = cfg.grid()?;
    let sob = cfg.sobolev()?;
    let solver = cfg.solver_config()?;
    let initial = make_initial(&cfg.init, &grid, &sob)?;
    std::fs::create_dir_all(snapshot_dir(out)).with_context(|| format!("creating {}", out.display()))?;
    for stale in list_snapshots(out)? {
        std::fs::remove_file(stale)?;
    }
    hmhd::io::write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())?;

    let mut snapshots = Vec::new();
    let mut sink = |step: usize, state: &State| -> hmhd::Result<()> {
        let snap = Snapshot::from_state(state);
        snap.write(&snapshot_path(out, step))?;
        snapshots.push(snap);
        Ok(())
    };
    info!("simulating {} steps of {} on {:?}", solver.steps(), solver.dt, grid);
    let outcome = run(&initial, &solver, &mut sink)?;
    // Diagnostics come from the stored samples, so analyze reproduces them exactly.
    let tables = RunTables::compute(&snapshots, &cfg.params, &sob, solver.mode)?;
    tables.write(out)?;
    let summary = RunSummary {
        steps: outcome.steps,
        t_end: outcome.state.t,
        halted_at: outcome.halted_at,
        psi0: outcome.psi0,
        max_projection_correction: outcome.max_projection_correction,
        snapshots: snapshots.len(),
    };
    summary.write(&out.join("run.toml"))?;
    println!("steps {} t_end {:.16e} snapshots {}", summary.steps, summary.t_end, summary.snapshots);
    if let Some(t) = summary.halted_at {
        println!("blow-up guard tripped at t = {t:.16e}");
    }
    if let Some(r) = &tables.residual {
        println!("max balance residual {:.16e}", r.max());
    }
    Ok(true)
}

fn analyze(dir: &Path) -> Result<bool> {
    let cfg = load(&dir.join("config.toml"))?;
    let sob = cfg.sobolev()?;
    let paths = list_snapshots(dir).with_context(|| format!("reading snapshots of {}", dir.display()))?;
    if paths.is_empty() {
        bail!("no snapshots in {}", snapshot_dir(dir).display());
    }
    let snapshots = paths
        .iter()
        .map(|p| Snapshot::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let tables = RunTables::compute(&snapshots, &cfg.params, &sob, cfg.solver.mode)?;
    let out = dir.join("analysis");
    tables.write(&out)?;
    println!("wrote {}", out.display());
    match &tables.residual {
        Some(r) => println!("max balance residual {:.16e}", r.max()),
        None => println!("max balance residual unavailable (fewer than 3 snapshots)"),
    }

    let summary = RunSummary::read(&dir.join("run.toml")).ok();
    let first = snapshots[0].to_state()?;
    let last_t = snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let horizon = summary.as_ref().and_then(|s| s.halted_at).unwrap_or(last_t);
    let guard_free = summary.as_ref().is_none_or(|s| s.halted_at.is_none());
    println!("observed horizon {horizon:.16e} ({})", if guard_free { "guard never tripped" } else { "guard tripped" });
    let Some(c) = cfg.calibration else {
        println!("no [calibration] section; existence time not evaluated");
        return Ok(true);
    };
    let psi0 = first.psi(&sob);
    if psi0 == 0.0 {
        println!("psi0 = 0: existence time unbounded");
        return Ok(true);
    }
    let est = existence_time(psi0, c.c, c.gamma_low, c.gamma_high)?;
    println!("predicted existence time {:.16e} (psi0 {psi0:.16e})", est.t);
    let mut within = true;
    for s in &snapshots {
        let t = s.t - first.t;
        if t >= est.t {
            break;
        }
        let psi = s.to_state()?.psi(&sob);
        let bound = psi_bound(t, &est)?;
        if psi > bound {
            warn!("psi {psi:.6e} exceeds the bound {bound:.6e} at t = {}", s.t);
            within = false;
        }
    }
    println!("psi within bound on [0, T): {within}");
    let covered = guard_free && horizon - first.t >= est.t;
    println!("guard-free horizon reaches predicted T: {covered}");
    Ok(true)
}

fn verify(config_path: &Path) -> Result<bool> {
    let cfg = load(config_path)?;
    let checks = run_suite(&cfg)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.pass()).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

fn scaling(mode: ScalingArg, lambda: usize, config_path: &Path) -> Result<bool> {
    let cfg = load(config_path)?;
    let grid = cfg.grid()?;
    let initial = make_initial(&cfg.init, &grid, &cfg.sobolev()?)?;
    let mode = match mode {
        ScalingArg::Mhd => ScalingMode::Mhd,
        ScalingArg::Hall => ScalingMode::Hall,
    };
    let report = scaling_check(mode, lambda, &initial, &cfg.solver_config()?)?;
    println!(
        "scaling {mode:?} lambda {lambda}: residual {:.16e} ({} base steps, {} scaled steps)",
        report.residual, report.base_steps, report.scaled_steps
    );
    Ok(true)
}

fn uniqueness(config_path: &Path, eps: f64) -> Result<bool> {
    if !(eps >= 0.0 && eps.is_finite()) {
        bail!("--perturb must be a finite non-negative number, got {eps}");
    }
    let cfg = load(config_path)?;
    let grid = cfg.grid()?;
    let sob = cfg.sobolev()?;
    let solver = cfg.solver_config()?;
    let base = make_initial(&cfg.init, &grid, &sob)?;
    let spec = RandomSpec { max_k: cfg.init.band.unwrap_or(f64::INFINITY), ..RandomSpec::default() };
    let w = random_solenoidal(&grid, cfg.init.seed.wrapping_add(1), &spec);
    let (pu, pb) = if eps == 0.0 {
        (base.u.clone(), base.b.clone())
    } else {
        (perturb(&base.u, &w, eps)?, perturb(&base.b, &w, eps)?)
    };
    let other = State::new(pu, pb, base.t)?;
    let trace = |s: &State| -> Result<Vec<State>> {
        let mut sink = TraceSink::default();
        let out = run(s, &solver, &mut sink)?;
        if let Some(t) = out.halted_at {
            warn!("blow-up guard tripped at t = {t}");
        }
        Ok(sink.states)
    };
    let (r1, r2) = (trace(&base)?, trace(&other)?);
    let (c, cnu) = cfg.calibration.map_or((1.0, 1.0), |c| (c.c, c.c_nu_mu));
    let report = gronwall_check(&r1, &r2, &sob, c, cnu)?;
    println!("t,energy,envelope");
    let tr = &report.trace;
    for i in 0..tr.t.len() {
        println!("{:.16e},{:.16e},{:.16e}", tr.t[i], tr.energy[i], tr.energy[0] * tr.gronwall_factor[i]);
    }
    println!("minimal C_nu_mu {:.16e}", report.minimal_cnu);
    println!("envelope with C_nu_mu = {cnu} holds: {}", report.pass);
    Ok(report.pass)
}
