//! `cpesim`: batch driver for the solvers in `cpesim-core`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 file I/O or format error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpesim_core::io::csv::{self, fmt_f64};
use cpesim_core::io::snapshot::read_snapshot_for;
use cpesim_core::io::{presets, write_snapshot, Initial, IoError, Mode, RunConfig, Snapshot};
use cpesim_core::verification::mms;
use cpesim_core::{diagnostics, free_boundary, hydrostatics, stepper};
use cpesim_core::{check_compatibility, Context, Error, FbState, PrimState, Regime};

#[derive(Parser)]
#[command(name = "cpesim", version, about = "Compressible primitive equation solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-step a viscous regime and write diagnostics.csv and snapshots.
    Run(Common),
    /// Run the manufactured-solution studies and write convergence.csv.
    Mms(Common),
    /// Evolve a state and a perturbed copy and write stability.csv.
    Stability(Common),
    /// Time-step the free-boundary regime and write fb.csv and snapshots.
    Fb(Common),
    /// Print compatibility residuals of the initial state.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value lines).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Number of steps, overriding the configuration.
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Start from this snapshot instead of the configured initial state.
    #[arg(long, value_name = "SNAPSHOT")]
    resume: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(Error),
    Io(IoError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e)
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(e) => e.into(),
            IoError::Config(_) | IoError::ConfigLine { .. } => Failure::Usage(e.to_string()),
            IoError::File { .. } | IoError::Format { .. } => Failure::Io(e),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, msg) = match &f {
                Failure::Usage(m) => ("configuration error", m.clone()),
                Failure::Numerical(e) => ("numerical failure", e.to_string()),
                Failure::Io(e) => ("I/O error", e.to_string()),
            };
            eprintln!("{kind}: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("CPESIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("CPESIM_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

fn dispatch(cmd: Command) -> CliResult<()> {
    let (mode, common) = match cmd {
        Command::Run(c) => (Mode::Run, c),
        Command::Mms(c) => (Mode::Mms, c),
        Command::Stability(c) => (Mode::Stability, c),
        Command::Fb(c) => (Mode::Fb, c),
        Command::Check(c) => (Mode::Check, c),
    };
    let cfg = load(&common, mode)?;
    match mode {
        Mode::Run => run(&cfg),
        Mode::Mms => mms_studies(&cfg),
        Mode::Stability => stability(&cfg),
        Mode::Fb => fb(&cfg),
        Mode::Check => check(&cfg),
    }
}

/// Reads the configuration and applies the command line on top of it.
fn load(common: &Common, mode: Mode) -> CliResult<RunConfig> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        Failure::Io(IoError::File {
            path: common.config.clone(),
            source: e,
        })
    })?;
    let mut cfg = cpesim_core::io::parse_config(&text)?;
    let regime = cfg.params.regime;
    match (mode, regime) {
        (Mode::Fb, Regime::FreeBoundary) | (Mode::Check, _) => {}
        (Mode::Fb, _) => return Err(Failure::Usage(format!("fb needs regime free_boundary, config has {regime}"))),
        (_, Regime::FreeBoundary) => {
            return Err(Failure::Usage(format!("{mode} needs a viscous regime, config has {regime}")))
        }
        _ => {}
    }
    cfg.mode = mode;
    if let Some(n) = common.steps {
        cfg.steps = Some(n);
    }
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(path) = &common.resume {
        cfg.initial = Initial::Snapshot(path.clone());
    }
    Ok(cfg)
}

fn context(cfg: &RunConfig) -> CliResult<Context> {
    Ok(Context::new(cfg.grid()?, cfg.params.clone())?)
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| {
        Failure::Io(IoError::File {
            path: dir.to_path_buf(),
            source: e,
        })
    })?;
    Ok(dir)
}

/// Steps to take: explicit count, or what remains up to t_end.
fn steps_from(cfg: &RunConfig, start_time: f64) -> usize {
    match cfg.steps {
        Some(n) => n,
        None => ((cfg.params.t_end - start_time) / cfg.params.dt).round().max(0.0) as usize,
    }
}

fn prim_state(ctx: &Context, cfg: &RunConfig) -> CliResult<PrimState> {
    match &cfg.initial {
        Initial::Preset(p) => Ok(presets::prim_initial(ctx, *p, cfg.amplitude, cfg.seed, cfg.perturbation)?),
        Initial::Snapshot(path) => match read_snapshot_for(path, ctx.regime(), &ctx.grid)? {
            Snapshot::Prim { state, .. } => Ok(state),
            Snapshot::Fb(_) => unreachable!("regime checked on read"),
        },
    }
}

fn fb_state(ctx: &Context, cfg: &RunConfig) -> CliResult<FbState> {
    match &cfg.initial {
        Initial::Preset(p) => Ok(presets::fb_initial(ctx, *p, cfg.amplitude, cfg.seed, cfg.perturbation)?),
        Initial::Snapshot(path) => match read_snapshot_for(path, Regime::FreeBoundary, &ctx.grid)? {
            Snapshot::Fb(s) => Ok(s),
            Snapshot::Prim { .. } => unreachable!("regime checked on read"),
        },
    }
}

fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:06}.bin")
}

fn run(cfg: &RunConfig) -> CliResult<()> {
    let ctx = context(cfg)?;
    let state = prim_state(&ctx, cfg)?;
    let n = steps_from(cfg, state.time);
    let dir = out_dir(cfg)?;
    let regime = ctx.regime();
    let mut records = Vec::with_capacity(n + 1);
    let mut step = 0usize;
    let mut io_error = None;
    let result = stepper::run_with(
        &ctx,
        state,
        n,
        None,
        &mut |r| records.push(*r),
        &mut |s, _| {
            step += 1;
            if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && io_error.is_none() {
                let snap = Snapshot::Prim { regime, state: s.clone() };
                if let Err(e) = write_snapshot(&dir.join(snapshot_name(step)), &snap) {
                    io_error = Some(e);
                }
            }
        },
    );
    // Diagnostics up to the failure point are still worth keeping.
    csv::export_diagnostics(&records, &dir.join("diagnostics.csv"))?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let last = result?;
    write_snapshot(&dir.join("final.bin"), &Snapshot::Prim { regime, state: last.clone() })?;
    let first = &records[0];
    let end = records.last().unwrap();
    let residual = diagnostics::energy_balance_residual(&records).last().copied().unwrap_or(0.0);
    println!("regime {regime}, {n} steps to t = {}", end.time);
    println!("relative mass drift {:.3e}", (end.mass - first.mass).abs() / first.mass.abs());
    println!("energy {:.9e} -> {:.9e}, balance residual {residual:.3e}", first.energy, end.energy);
    println!("min density {:.6e}", records.iter().map(|r| r.min_density).fold(f64::INFINITY, f64::min));
    println!("wrote {}", dir.display());
    Ok(())
}

fn mms_studies(cfg: &RunConfig) -> CliResult<()> {
    let dir = out_dir(cfg)?;
    let vertical = mms::vertical_diffusion_study()?;
    let temporal = mms::temporal_study()?;
    let mut text = String::from("study,h,error\n");
    for (name, study) in [("vertical", &vertical), ("temporal", &temporal)] {
        for (h, e) in study.hs.iter().zip(&study.errors) {
            text.push_str(&format!("{name},{},{}\n", fmt_f64(*h), fmt_f64(*e)));
        }
        println!(
            "{name}: errors {:?}, observed order {:.4}",
            study.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            study.report.observed
        );
    }
    for n in [8, 16, 32] {
        let e = mms::horizontal_spectral_error(n)?;
        text.push_str(&format!("spectral,{},{}\n", fmt_f64(1.0 / n as f64), fmt_f64(e)));
        println!("spectral: n = {n}, error {e:.3e}");
    }
    let path = dir.join("convergence.csv");
    fs::write(&path, text).map_err(|e| Failure::Io(IoError::File { path: path.clone(), source: e }))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn stability(cfg: &RunConfig) -> CliResult<()> {
    let ctx = context(cfg)?;
    let a = prim_state(&ctx, cfg)?;
    let b = presets::perturb(&ctx, &a, cfg.stability_scale, cfg.seed.wrapping_add(1))?;
    let n = steps_from(cfg, a.time);
    let dir = out_dir(cfg)?;
    let report = diagnostics::stability_experiment(&ctx, &a, &b, n)?;
    csv::export_stability(&report.rows, &dir.join("stability.csv"))?;
    let d0 = report.rows[0].distance;
    let dmax = report.rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    println!("initial distance {d0:.6e}, final {:.6e}", report.rows.last().unwrap().distance);
    println!("max distance / initial {:.4}, growth rate {:.4}", dmax / d0, report.growth_rate);
    println!("wrote {}", dir.join("stability.csv").display());
    Ok(())
}

fn fb(cfg: &RunConfig) -> CliResult<()> {
    let ctx = context(cfg)?;
    let mut state = fb_state(&ctx, cfg)?;
    let n = steps_from(cfg, state.time);
    let dir = out_dir(cfg)?;
    let p = &ctx.params;
    let row = |s: &FbState| -> CliResult<Vec<f64>> {
        let w = free_boundary::fb_recover_w(&ctx, &s.height, &s.v)?;
        Ok(vec![
            s.time,
            free_boundary::column_mass(&s.height, p),
            s.height.min(),
            s.height.max_abs(),
            s.v.max_abs(),
            free_boundary::fb_endpoint_residual(&ctx.grid, &w),
        ])
    };
    let header = ["time", "column_mass", "min_height", "max_height", "max_speed", "w_endpoint"];
    let mut rows = vec![row(&state)?];
    let mut failure = None;
    for step in 1..=n {
        match free_boundary::fb_advance(&ctx, &state, p.dt) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        rows.push(row(&state)?);
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            write_snapshot(&dir.join(snapshot_name(step)), &Snapshot::Fb(state.clone()))?;
        }
    }
    csv::export_table(&header, &rows, &dir.join("fb.csv"))?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    write_snapshot(&dir.join("final.bin"), &Snapshot::Fb(state.clone()))?;
    let (m0, m1) = (rows[0][1], rows.last().unwrap()[1]);
    println!("free boundary, {n} steps to t = {}", state.time);
    println!("column mass drift {:.3e}", (m1 - m0).abs() / m0);
    println!("height in [{:.6}, {:.6}]", state.height.min(), state.height.max_abs());
    println!("wrote {}", dir.display());
    Ok(())
}

fn check(cfg: &RunConfig) -> CliResult<()> {
    let ctx = context(cfg)?;
    if ctx.regime() == Regime::FreeBoundary {
        let s = fb_state(&ctx, cfg)?;
        let w = free_boundary::fb_recover_w(&ctx, &s.height, &s.v)?;
        println!("regime free_boundary");
        println!("column mass {:.16e}", free_boundary::column_mass(&s.height, &ctx.params));
        println!("min height {:.6e}", s.height.min());
        println!("W endpoint residual {:.3e}", free_boundary::fb_endpoint_residual(&ctx.grid, &w));
        return Ok(());
    }
    let s = prim_state(&ctx, cfg)?;
    let rep = check_compatibility(&ctx, &s)?;
    let flux = hydrostatics::density_flux(&ctx, &s.surface_var, &s.v);
    let ends = flux
        .plane(0)
        .iter()
        .chain(flux.plane(ctx.grid.nz - 1))
        .fold(0.0f64, |m, x| m.max(x.abs()));
    println!("regime {}", ctx.regime());
    println!("compatibility residual L2 {:.6e}", rep.residual_l2);
    println!("boundary dz v: bottom {:.3e}, top {:.3e}", rep.boundary_bottom, rep.boundary_top);
    println!("excluded vacuum points {}", rep.excluded_points);
    println!("mass flux at z = 0, 1: {ends:.3e}");
    println!("min density {:.6e}", diagnostics::min_density(&ctx, &s));
    Ok(())
}
