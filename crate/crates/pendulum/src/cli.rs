//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error (including "no
//! cycle" and "degenerate"), 3 numerical failure, 4 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pendulum_core::connection::critical_beta;
use pendulum_core::cycle::{describe_orbit_sampled, find_limit_cycle};
use pendulum_core::model::equilibria;
use pendulum_core::sweep::{self, grid_seeds, hysteresis_curve, phase_portrait, HysteresisOptions, Overlays, PortraitOptions, SweepRow, VelocityPlan};
use pendulum_core::{Error, IntegrationControls, ModelParams, PeriodicOrbit};
use serde_json::{json, Value};

use crate::format::{json_float, write_json, Cell, Meta, Table};
use crate::grid::parse_grid;
use crate::parallel::ordered_map;
use crate::portrait::{kind_name, portrait_json, portrait_svg, portrait_table};
use crate::verify;

const UNITS: &str = "\
Units: the model is φ'' + γφ' + sin φ = β in dimensionless form.
  φ     phase angle, radians
  z     angular velocity dφ/dt, radians per unit time
  t     time in units of the inverse small-oscillation frequency
  β     drive, dimensionless (torque over the maximum restoring torque), β ≥ 0
  γ     damping, dimensionless, γ ≥ 0
Tolerances are dimensionless (relative) or in the unit of the quantity they bound.";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(Error::Domain(_) | Error::NoCycle { .. } | Error::Degenerate { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pendulum",
    version,
    about = "Phase-plane analysis of the driven, damped pendulum φ'' + γφ' + sin φ = β",
    after_help = UNITS
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Relative tolerance of the adaptive integrator (dimensionless)
    #[arg(long, global = true, allow_negative_numbers = true, env = "PENDULUM_REL_TOL", default_value_t = 1e-10)]
    rel_tol: f64,
    /// Absolute tolerance of the adaptive integrator (units of φ and z)
    #[arg(long, global = true, allow_negative_numbers = true, env = "PENDULUM_ABS_TOL", default_value_t = 1e-12)]
    abs_tol: f64,
    /// Event localization tolerance (units of the independent variable)
    #[arg(long, global = true, allow_negative_numbers = true, env = "PENDULUM_EVENT_TOL", default_value_t = 1e-10)]
    event_tol: f64,
    /// Worker threads for sweeps [default: available cores]
    #[arg(long, global = true, allow_negative_numbers = true, env = "PENDULUM_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the equilibria φ_n = nπ + (−1)ⁿ arcsin β (none when β > 1)
    #[command(after_help = UNITS)]
    Equilibria {
        #[command(flatten)]
        params: Params,
        /// Inclusive index range a..b of n
        #[arg(long, default_value = "0..1", allow_hyphen_values = true)]
        n: String,
        #[command(flatten)]
        output: TableOutput,
    },
    /// Critical drive β₀(γ) of the saddle connection
    #[command(after_help = UNITS)]
    Critical {
        /// Damping γ > 0 (dimensionless)
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        /// Bisection tolerance on β (dimensionless)
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        output: TableOutput,
    },
    /// Running limit cycle: period, mean velocity, contraction
    #[command(after_help = UNITS)]
    Cycle {
        #[command(flatten)]
        params: Params,
        /// Tolerance on β₀ and on the fixed point z (dimensionless, radians per unit time)
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Number of (φ, z) samples stored along the orbit
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[command(flatten)]
        output: TableOutput,
    },
    /// Grid sweeps
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Phase portrait over the main interval [−π − φ₀, π − φ₀]
    #[command(after_help = UNITS)]
    Portrait {
        #[command(flatten)]
        params: Params,
        /// Overlays: comma list of g, equilibria, shot; or all / none
        #[arg(long, default_value = "all")]
        overlay: String,
        /// Seed grid COLUMNSxROWS over the plotting window
        #[arg(long, default_value = "9x5")]
        seeds: String,
        /// Integration time per seed (units of t)
        #[arg(long, default_value_t = 40.0)]
        span: f64,
        #[arg(long, value_enum, default_value_t = PortraitFormat::Svg)]
        format: PortraitFormat,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical invariant battery; exit 4 if any check fails
    #[command(after_help = UNITS)]
    Verify {
        /// Comma list of check names to run
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Print the check names and exit
        #[arg(long)]
        list: bool,
    },
}

#[derive(Debug, Subcommand)]
enum SweepCommand {
    /// β₀(γ) over a damping grid
    #[command(after_help = UNITS)]
    Critical {
        /// Damping grid: start:stop:step, comma list, or one value
        #[arg(long)]
        gamma: String,
        /// Bisection tolerance on β
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        output: TableOutput,
    },
    /// Mean velocity 2π/T over a drive grid (0 when pinned)
    #[command(after_help = UNITS)]
    Velocity {
        /// Damping γ > 0
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        /// Drive grid: start:stop:step, comma list, or one value
        #[arg(long)]
        beta: String,
        /// Tolerance on β₀ and on the fixed point z
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also ramp β up and down from rest and report time-averaged
        /// velocities (exploratory: small γ is bistable below β = 1)
        #[arg(long)]
        hysteresis: bool,
        /// Settling time per drive step of the hysteresis ramp (units of t)
        #[arg(long, default_value_t = 200.0)]
        transient: f64,
        /// Averaging window per drive step of the hysteresis ramp (units of t)
        #[arg(long, default_value_t = 200.0)]
        window: f64,
        #[command(flatten)]
        output: TableOutput,
    },
}

#[derive(Debug, Args)]
struct Params {
    /// Drive β ≥ 0 (dimensionless)
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
    /// Damping γ ≥ 0 (dimensionless)
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct TableOutput {
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PortraitFormat {
    Svg,
    Csv,
    Json,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    controls: IntegrationControls,
    workers: usize,
    tolerances: Vec<(&'static str, f64)>,
}

impl Ctx {
    fn meta(&self, command: &'static str, params: Vec<(&'static str, Value)>, tol: Option<f64>) -> Meta {
        let mut tolerances = self.tolerances.clone();
        if let Some(t) = tol {
            tolerances.push(("tol", t));
        }
        Meta { command, params, tolerances }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be a positive finite number, got {v}")))
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    let controls = IntegrationControls {
        rel_tol: positive("rel-tol", g.rel_tol)?,
        abs_tol: positive("abs-tol", g.abs_tol)?,
        event_tol: positive("event-tol", g.event_tol)?,
        ..IntegrationControls::default()
    };
    let workers = match g.workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let ctx = Ctx {
        controls,
        workers,
        tolerances: vec![("rel_tol", g.rel_tol), ("abs_tol", g.abs_tol), ("event_tol", g.event_tol)],
    };
    match cli.command {
        Command::Equilibria { params, n, output } => cmd_equilibria(&ctx, params, &n, output, stdout),
        Command::Critical { gamma, tol, output } => cmd_critical(&ctx, gamma, tol, output, stdout),
        Command::Cycle { params, tol, samples, output } => cmd_cycle(&ctx, params, tol, samples, output, stdout),
        Command::Sweep(SweepCommand::Critical { gamma, tol, output }) => cmd_sweep_critical(&ctx, &gamma, tol, output, stdout),
        Command::Sweep(SweepCommand::Velocity { gamma, beta, tol, hysteresis, transient, window, output }) => {
            let hysteresis = hysteresis.then_some(HysteresisOptions { transient, window });
            cmd_sweep_velocity(&ctx, gamma, &beta, tol, hysteresis, output, stdout)
        }
        Command::Portrait { params, overlay, seeds, span, format, out } => {
            cmd_portrait(&ctx, params, &overlay, &seeds, span, format, out, stdout)
        }
        Command::Verify { only, list } => cmd_verify(&ctx, only, list, stdout),
    }
}

fn model_params(p: &Params) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(p.beta, p.gamma)?)
}

fn with_sink<F>(out: &Option<PathBuf>, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn emit_table(output: &TableOutput, meta: &Meta, table: &Table, stdout: &mut dyn Write) -> Result<(), CliError> {
    with_sink(&output.out, stdout, |w| match output.format {
        TableFormat::Csv => table.write_csv(w),
        TableFormat::Json => write_json(w, meta, "rows", table.json_rows()),
    })
}

fn parse_index_range(s: &str) -> Result<std::ops::RangeInclusive<i64>, CliError> {
    let bad = || CliError::Usage(format!("--n expects a..b with integers a <= b, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    if a > b || b - a > 100_000 {
        return Err(bad());
    }
    Ok(a..=b)
}

fn cmd_equilibria(ctx: &Ctx, p: Params, n: &str, output: TableOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = model_params(&p)?;
    let range = parse_index_range(n)?;
    let mut table = Table::new(vec!["n", "phi", "kind", "slope_unstable", "slope_stable", "discriminant"]);
    for pt in equilibria(params, range) {
        let (su, ss) = match pt.slopes {
            Some((a, b)) => (Cell::Num(a), Cell::Num(b)),
            None => (Cell::Null, Cell::Null),
        };
        table.push(vec![Cell::Int(pt.index), Cell::Num(pt.phi), Cell::Text(kind_name(pt.kind).into()), su, ss, Cell::Num(pt.discriminant)]);
    }
    let meta = ctx.meta("equilibria", vec![("beta", json_float(p.beta)), ("gamma", json_float(p.gamma)), ("n", json!(n))], None);
    emit_table(&output, &meta, &table, stdout)
}

fn critical_columns() -> Vec<&'static str> {
    vec!["gamma", "beta0", "bracket_width", "evaluations", "on_plateau", "error"]
}

fn critical_cells(row: &SweepRow) -> Vec<Cell> {
    vec![
        Cell::Num(row.gamma),
        Cell::opt(row.beta0),
        Cell::opt(row.bracket_width),
        Cell::Int(row.evaluations as i64),
        row.beta0.map_or(Cell::Null, |b| Cell::Bool(b == 1.0)),
        row.error.clone().map_or(Cell::Null, Cell::Text),
    ]
}

fn cmd_critical(ctx: &Ctx, gamma: f64, tol: f64, output: TableOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let tol = positive("tol", tol)?;
    let c = critical_beta(gamma, tol, &ctx.controls)?;
    let row = SweepRow {
        gamma,
        beta: None,
        beta0: Some(c.beta0),
        mean_velocity: 0.0,
        cycle_found: false,
        period: None,
        bracket_width: Some(c.bracket_width),
        evaluations: c.evaluations,
        error: None,
    };
    let mut table = Table::new(critical_columns());
    table.push(critical_cells(&row));
    let meta = ctx.meta("critical", vec![("gamma", json_float(gamma))], Some(tol));
    emit_table(&output, &meta, &table, stdout)
}

fn orbit_json(o: &PeriodicOrbit) -> Value {
    json!({
        "beta": json_float(o.params.beta),
        "gamma": json_float(o.params.gamma),
        "beta0": o.beta0.map_or(Value::Null, json_float),
        "section_phi": json_float(o.section_phi),
        "z_start": json_float(o.z_start),
        "period": json_float(o.period),
        "mean_velocity": json_float(o.mean_velocity),
        "phase_integral": json_float(o.phase_integral),
        "phase_integral_expected": json_float(std::f64::consts::TAU * o.params.beta / o.params.gamma),
        "contraction": json_float(o.contraction),
        "contraction_expected": json_float(o.contraction_expected),
        "min_z": json_float(o.min_z),
        "residual": json_float(o.residual),
        "evaluations": o.evaluations,
        "samples": o.samples.iter().map(|s| json!([json_float(s.phi), json_float(s.z)])).collect::<Vec<_>>(),
    })
}

fn cmd_cycle(ctx: &Ctx, p: Params, tol: f64, samples: usize, output: TableOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = model_params(&p)?;
    let tol = positive("tol", tol)?;
    if samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let found = find_limit_cycle(params, tol, &ctx.controls)?;
    let orbit = if samples == found.samples.len() {
        found
    } else {
        let resampled = describe_orbit_sampled(found.z_start, params, samples, &ctx.controls)?;
        PeriodicOrbit { evaluations: found.evaluations, beta0: found.beta0, ..resampled }
    };
    let meta = ctx.meta("cycle", vec![("beta", json_float(p.beta)), ("gamma", json_float(p.gamma))], Some(tol));
    match output.format {
        TableFormat::Json => with_sink(&output.out, stdout, |w| write_json(w, &meta, "orbit", orbit_json(&orbit))),
        TableFormat::Csv => {
            let mut t = Table::new(vec![
                "beta", "gamma", "beta0", "z_start", "period", "mean_velocity", "phase_integral", "phase_integral_expected",
                "contraction", "contraction_expected", "min_z", "residual", "evaluations",
            ]);
            t.push(vec![
                Cell::Num(p.beta),
                Cell::Num(p.gamma),
                Cell::opt(orbit.beta0),
                Cell::Num(orbit.z_start),
                Cell::Num(orbit.period),
                Cell::Num(orbit.mean_velocity),
                Cell::Num(orbit.phase_integral),
                Cell::Num(std::f64::consts::TAU * p.beta / p.gamma),
                Cell::Num(orbit.contraction),
                Cell::Num(orbit.contraction_expected),
                Cell::Num(orbit.min_z),
                Cell::Num(orbit.residual),
                Cell::Int(orbit.evaluations as i64),
            ]);
            emit_table(&output, &meta, &t, stdout)
        }
    }
}

fn grid(flag: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(spec).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn cmd_sweep_critical(ctx: &Ctx, gamma: &str, tol: f64, output: TableOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let gammas = grid("gamma", gamma)?;
    let tol = positive("tol", tol)?;
    let controls = ctx.controls;
    let rows = ordered_map(&gammas, ctx.workers, |&g| sweep::critical_row(g, tol, &controls));
    let mut table = Table::new(critical_columns());
    for r in &rows {
        table.push(critical_cells(r));
    }
    let meta = ctx.meta("sweep critical", vec![("gamma", json!(gamma))], Some(tol));
    emit_table(&output, &meta, &table, stdout)
}

fn cmd_sweep_velocity(
    ctx: &Ctx,
    gamma: f64,
    beta: &str,
    tol: f64,
    hysteresis: Option<HysteresisOptions>,
    output: TableOutput,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain("velocity sweep needs gamma > 0").into());
    }
    let betas = grid("beta", beta)?;
    let tol = positive("tol", tol)?;
    let controls = ctx.controls;
    let plan = VelocityPlan::new(gamma, &betas, tol, &controls);
    let rows = ordered_map(&betas, ctx.workers, |&b| plan.row(b, &controls));
    let ramp = match hysteresis {
        Some(opts) => Some(hysteresis_curve(gamma, &betas, opts, &controls)?),
        None => None,
    };
    let mut columns = vec!["gamma", "beta", "beta0", "mean_velocity", "cycle_found", "period", "bracket_width", "evaluations", "error"];
    if ramp.is_some() {
        columns.extend(["up_velocity", "down_velocity"]);
    }
    let mut table = Table::new(columns);
    for (i, r) in rows.iter().enumerate() {
        let mut cells = vec![
            Cell::Num(r.gamma),
            Cell::opt(r.beta),
            Cell::opt(r.beta0),
            Cell::Num(r.mean_velocity),
            Cell::Bool(r.cycle_found),
            Cell::opt(r.period),
            Cell::opt(r.bracket_width),
            Cell::Int(r.evaluations as i64),
            r.error.clone().map_or(Cell::Null, Cell::Text),
        ];
        if let Some(ramp) = &ramp {
            cells.push(Cell::Num(ramp[i].up_velocity));
            cells.push(Cell::Num(ramp[i].down_velocity));
        }
        table.push(cells);
    }
    let meta = ctx.meta("sweep velocity", vec![("gamma", json_float(gamma)), ("beta", json!(beta))], Some(tol));
    emit_table(&output, &meta, &table, stdout)
}

fn parse_overlays(s: &str) -> Result<Overlays, CliError> {
    let mut o = Overlays::NONE;
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "all" => o = Overlays::ALL,
            "none" => o = Overlays::NONE,
            "g" => o.g = true,
            "equilibria" => o.equilibria = true,
            "shot" => o.shot = true,
            other => return Err(CliError::Usage(format!("unknown overlay {other:?}; expected g, equilibria, shot, all or none"))),
        }
    }
    Ok(o)
}

fn parse_seeds(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--seeds expects COLUMNSxROWS, got {s:?}"));
    let (c, r) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    if c * r > 10_000 {
        return Err(bad());
    }
    Ok((c, r))
}

#[allow(clippy::too_many_arguments)]
fn cmd_portrait(
    ctx: &Ctx,
    p: Params,
    overlay: &str,
    seeds: &str,
    span: f64,
    format: PortraitFormat,
    out: Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let params = model_params(&p)?;
    let overlays = parse_overlays(overlay)?;
    let (cols, rows) = parse_seeds(seeds)?;
    let span = positive("span", span)?;
    let options = PortraitOptions { span, overlays, ..PortraitOptions::default() };
    let portrait = phase_portrait(params, &grid_seeds(params, cols, rows), options, &ctx.controls)?;
    let meta = ctx.meta(
        "portrait",
        vec![("beta", json_float(p.beta)), ("gamma", json_float(p.gamma)), ("overlay", json!(overlay)), ("seeds", json!(seeds))],
        None,
    );
    with_sink(&out, stdout, |w| match format {
        PortraitFormat::Svg => w.write_all(portrait_svg(&portrait).as_bytes()),
        PortraitFormat::Csv => portrait_table(&portrait).write_csv(w),
        PortraitFormat::Json => write_json(w, &meta, "portrait", portrait_json(&portrait)),
    })
}

fn cmd_verify(ctx: &Ctx, only: Option<Vec<String>>, list: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    if list {
        for c in verify::CHECKS {
            writeln!(stdout, "{:<12} {}", c.name, c.summary)?;
        }
        return Ok(());
    }
    if let Some(names) = &only {
        let known = verify::check_names();
        if let Some(bad) = names.iter().find(|n| !known.contains(&n.as_str())) {
            return Err(CliError::Usage(format!("unknown check {bad:?}; known: {}", known.join(", "))));
        }
    }
    let results = verify::run_checks(only.as_deref(), &ctx.controls);
    let mut failed = Vec::new();
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        writeln!(stdout, "{tag} {}: {}", r.name, r.detail)?;
        if !r.passed {
            failed.push(r.name);
        }
    }
    writeln!(stdout, "{} of {} checks passed", results.len() - failed.len(), results.len())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}
