//! `xbar`: experiments and validation for crossbar channel models.
//!
//! Exit status: 0 on success, 1 for bad arguments or configuration, 2 for
//! runtime failures (solver, sampling, I/O) and failed validations.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crossbar_channel::config::format_f64;
use crossbar_channel::monte_carlo::{simulate_read, simulate_write, BinomialEstimate, ReadMode};
use crossbar_channel::sweep::{self, SweepSpec};
use crossbar_channel::threshold::{
    baseline_threshold, solve_log_balance_bracketed, stmc_approx, stmc_exact, LineOffsets, SchemeKind, Scope,
    ThresholdScheme, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS,
};
use crossbar_channel::write_channel::write_channel_params;
use crossbar_channel::{
    load_config, read_channel_params_general, read_channel_params_ideal, render_config, Bit, Cell, CellGrid,
    Confidence, Coupling, Error, ModelBundleF64, Resistance, SamplingPlan,
};

#[derive(Parser, Debug)]
#[command(name = "xbar", version, about = "Crossbar resistive-memory channel models")]
struct Cli {
    /// Key-value parameter file; unset keys take reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Master seed for sampling.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Selector model. Defaults to what the configuration describes;
    /// `ideal` overrides configured selectors with ideal ones.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ideal,
    General,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    /// Channel fixed at the configured prior.
    Fixed,
    /// Write channel recomputed for every prior.
    Coupled,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Fixed => Coupling::FixedChannel,
            CouplingArg::Coupled => Coupling::QCoupled,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Naive,
    Dtec,
    StmcApprox,
    StmcExact,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Naive => SchemeKind::Naive,
            SchemeArg::Dtec => SchemeKind::Dtec,
            SchemeArg::StmcApprox => SchemeKind::StmcApprox,
            SchemeArg::StmcExact => SchemeKind::StmcExact,
        }
    }
}

/// Overrides for the single array a command works on.
#[derive(Args, Debug, Clone, Default)]
struct ArrayArgs {
    /// Rows (and columns, unless --cols is given).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Wordline and bitline segment resistance in ohms.
    #[arg(long)]
    r_line: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SamplingArgs {
    /// Sample count (budget of adaptive estimates in general mode).
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Target 99% half-width of adaptive estimates.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-cell probabilities, error rates and capacity (heatmap.csv).
    Heatmap {
        #[command(flatten)]
        array: ArrayArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long, value_enum, default_value = "coupled")]
        coupling: CouplingArg,
    },
    /// Averaged capacity over square sizes and line resistances.
    CapacitySweep {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        r_lines: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "coupled")]
        coupling: CouplingArg,
    },
    /// Averaged capacity of equal-size arrays with different shapes.
    AspectRatio {
        #[arg(long)]
        total_cells: Option<usize>,
        /// Shapes as MxN, comma separated; defaults to powers of two
        /// holding --total-cells.
        #[arg(long, value_delimiter = ',')]
        shapes: Option<Vec<String>>,
        #[arg(long)]
        r_line: Option<f64>,
        #[arg(long, value_enum, default_value = "coupled")]
        coupling: CouplingArg,
    },
    /// Averaged read error of threshold schemes over size and line sweeps.
    Thresholds {
        #[arg(long, value_enum, value_delimiter = ',')]
        scheme: Option<Vec<SchemeArg>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Line resistance of the size sweep.
        #[arg(long)]
        size_r: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        r_lines: Option<Vec<f64>>,
        /// Array size of the line-resistance sweep.
        #[arg(long)]
        r_size: Option<usize>,
    },
    /// Baseline and shared thresholds with the fixed-point trace.
    SolveThreshold {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iter: usize,
        /// One shared threshold per column instead of per array.
        #[arg(long)]
        per_column: bool,
    },
    /// Analytic channel parameters of the corner cells against simulation.
    Validate {
        #[command(flatten)]
        array: ArrayArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        /// Use 99% instead of 99.7% intervals.
        #[arg(long)]
        ci99: bool,
    },
    /// Print the resolved parameter set in configuration format.
    ShowConfig {
        #[command(flatten)]
        array: ArrayArgs,
    },
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn resolve(cli: &Cli, array: &ArrayArgs) -> Result<ModelBundleF64, Failure> {
    let mut b = match &cli.config {
        Some(p) => load_config(p)?,
        None => ModelBundleF64::reference(),
    };
    if let Some(m) = array.size {
        b.geometry.rows = m;
        b.geometry.cols = array.cols.unwrap_or(m);
    } else if let Some(n) = array.cols {
        b.geometry.cols = n;
    }
    if let Some(r) = array.r_line {
        b.geometry.wordline_r = r;
        b.geometry.bitline_r = r;
    }
    match cli.mode {
        Some(Mode::Ideal) => {
            b.geometry.selector_full = 0.0;
            b.geometry.selector_half = Resistance::Infinite;
            b.geometry.selector_unselected = Resistance::Infinite;
        }
        Some(Mode::General)
            if b.geometry.selector_half.is_infinite() || b.geometry.selector_unselected.is_infinite() =>
        {
            return Err(Failure::Input(
                "--mode general needs finite half- and unselected-selector resistances (r_sh, r_su)".into(),
            ));
        }
        _ => {}
    }
    Ok(b.validated()?)
}

fn read_mode(b: &ModelBundleF64) -> ReadMode {
    if b.geometry.is_ideal_selector() {
        ReadMode::Ideal
    } else {
        ReadMode::General
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let spec_base = SweepSpec { out_dir: cli.out.clone(), ..SweepSpec::default() };
    match &cli.command {
        Command::Heatmap { array, sampling, coupling } => {
            let b = resolve(&cli, array)?;
            let plan = SamplingPlan { tolerance: sampling.tolerance, ..SamplingPlan::new(sampling.samples, cli.seed) };
            plan.check()?;
            let spec = SweepSpec { coupling: (*coupling).into(), ..spec_base };
            let grid = sweep::run_heatmap(&b, &spec, &plan)?;
            let worst = grid.values().iter().map(|r| r.ber_cascade).fold(0.0, f64::max);
            let best = grid.values().iter().map(|r| r.ber_cascade).fold(1.0, f64::min);
            println!(
                "wrote {} ({} cells); cascaded BER {:.4e} .. {:.4e}",
                spec.out_dir.join("heatmap.csv").display(),
                grid.len(),
                best,
                worst
            );
        }
        Command::CapacitySweep { sizes, r_lines, coupling } => {
            let b = resolve(&cli, &ArrayArgs::default())?;
            require_ideal(&b, "capacity-sweep")?;
            let mut spec = SweepSpec { coupling: (*coupling).into(), ..spec_base };
            if let Some(s) = sizes {
                spec.sizes = s.clone();
            }
            if let Some(r) = r_lines {
                spec.line_resistances = r.clone();
            }
            let points = sweep::run_capacity_sweep(&b, &spec, &SamplingPlan::new(1, cli.seed))?;
            for p in points {
                println!("{:>5} x {:<5} r = {:>6.4} ohm  C = {:.4}", p.m, p.n, p.r_w, p.avg_capacity);
            }
        }
        Command::AspectRatio { total_cells, shapes, r_line, coupling } => {
            let b = resolve(&cli, &ArrayArgs { r_line: *r_line, ..ArrayArgs::default() })?;
            require_ideal(&b, "aspect-ratio")?;
            let mut spec = SweepSpec { coupling: (*coupling).into(), ..spec_base };
            if let Some(t) = total_cells {
                spec.total_cells = *t;
                spec.shapes = default_shapes(*t);
            }
            if let Some(s) = shapes {
                spec.shapes = s.iter().map(|x| parse_shape(x)).collect::<Result<_, _>>()?;
                if total_cells.is_none() {
                    spec.total_cells = spec.shapes.first().map_or(0, |&(m, n)| m * n);
                }
            }
            let rows = sweep::run_aspect_ratio_study(&b, &spec, &SamplingPlan::new(1, cli.seed))?;
            for r in rows {
                println!("{:>5} x {:<5} ratio {:>6.4}  C = {:.4}", r.m, r.n, r.ratio, r.avg_capacity);
            }
        }
        Command::Thresholds { scheme, sizes, size_r, r_lines, r_size } => {
            let b = resolve(&cli, &ArrayArgs::default())?;
            require_ideal(&b, "thresholds")?;
            let mut spec = spec_base;
            if let Some(s) = scheme {
                spec.schemes = s.iter().map(|&k| k.into()).collect();
            }
            if let Some(s) = sizes {
                spec.threshold_sizes = s.clone();
            }
            if let Some(r) = size_r {
                spec.threshold_size_r = *r;
            }
            if let Some(r) = r_lines {
                spec.threshold_rs = r.clone();
            }
            if let Some(s) = r_size {
                spec.threshold_r_size = *s;
            }
            let rows = sweep::run_threshold_comparison(&b, &spec)?;
            for r in rows {
                println!(
                    "{:<4} {:>8.4}  {:<11} BER {:.4e}  {}",
                    r.sweep_var,
                    r.value,
                    r.scheme.name(),
                    r.avg_read_ber,
                    r.status.name()
                );
            }
        }
        Command::SolveThreshold { array, epsilon, max_iter, per_column } => {
            let b = resolve(&cli, array)?;
            solve_threshold(&b, *epsilon, *max_iter, *per_column)?;
        }
        Command::Validate { array, samples, tolerance, ci99 } => {
            let b = resolve(&cli, array)?;
            let confidence = if *ci99 { Confidence::P99 } else { Confidence::P997 };
            let plan = SamplingPlan { samples: *samples, seed: cli.seed, confidence, tolerance: *tolerance };
            plan.check()?;
            validate(&b, &plan)?;
        }
        Command::ShowConfig { array } => {
            let b = resolve(&cli, array)?;
            print!("{}", render_config(&b));
        }
    }
    Ok(())
}

fn require_ideal(b: &ModelBundleF64, cmd: &str) -> Result<(), Failure> {
    if b.geometry.is_ideal_selector() {
        Ok(())
    } else {
        Err(Failure::Input(format!("{cmd} runs on ideal selectors only; pass --mode ideal")))
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Input(format!("shape `{s}` is not of the form MxN"));
    let (m, n) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
}

/// Power-of-two shapes `m x n = total` with `m <= n`, square first.
fn default_shapes(total: usize) -> Vec<(usize, usize)> {
    let mut m = (total as f64).sqrt() as usize;
    while m > 0 && !total.is_multiple_of(m) {
        m -= 1;
    }
    let mut out = Vec::new();
    while m >= 1 && total.is_multiple_of(m) {
        out.push((m, total / m));
        if !m.is_multiple_of(2) {
            break;
        }
        m /= 2;
    }
    out
}

fn solve_threshold(b: &ModelBundleF64, epsilon: f64, max_iter: usize, per_column: bool) -> Result<(), Failure> {
    let g = &b.geometry;
    let r0 = baseline_threshold(&b.device)?;
    let mut out = std::io::stdout().lock();
    let w = |out: &mut std::io::StdoutLock, s: String| writeln!(out, "{s}").map_err(|e| Failure::Runtime(e.to_string()));
    w(&mut out, format!("array = {}x{}", g.rows, g.cols))?;
    w(&mut out, format!("r_th0 = {}", format_f64(r0)))?;
    if per_column {
        let approx = ThresholdScheme::stmc_approx(r0, g, Scope::PerColumn);
        let exact = match ThresholdScheme::stmc_exact(r0, g, Scope::PerColumn, epsilon, max_iter) {
            Ok(s) => s,
            Err(Error::StmcPrecondition { .. }) => {
                w(&mut out, "status = precondition-fallback".into())?;
                ThresholdScheme::stmc_bracketed(r0, g, Scope::PerColumn)
            }
            Err(e) => return Err(e.into()),
        };
        w(&mut out, "col,stmc_approx,stmc_exact".into())?;
        for j in 1..=g.cols {
            let c = Cell::new(1, j);
            w(&mut out, format!("{j},{},{}", format_f64(approx.threshold(c)), format_f64(exact.threshold(c))))?;
        }
        return Ok(());
    }
    w(&mut out, format!("stmc_approx = {}", format_f64(stmc_approx(r0, g))))?;
    let offsets = LineOffsets::array(g);
    match stmc_exact(r0, &offsets, epsilon, max_iter) {
        Ok(t) => {
            w(&mut out, format!("stmc_exact = {}", format_f64(t.value)))?;
            w(&mut out, format!("iterations = {}", t.iterations()))?;
            w(&mut out, format!("converged = {}", t.converged))?;
            w(&mut out, format!("residual = {}", format_f64(t.residual)))?;
            for (l, r) in t.iterates.iter().enumerate() {
                w(&mut out, format!("trace[{l}] = {}", format_f64(*r)))?;
            }
            if !t.converged {
                eprintln!("warning: no convergence within {max_iter} iterations");
            }
        }
        Err(e @ Error::StmcPrecondition { .. }) => {
            eprintln!("warning: {e}");
            w(&mut out, "status = precondition-fallback".into())?;
            w(&mut out, format!("stmc_exact = {}", format_f64(solve_log_balance_bracketed(r0, &offsets))))?;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn validate(b: &ModelBundleF64, plan: &SamplingPlan) -> Result<(), Failure> {
    let g = &b.geometry;
    let mode = read_mode(b);
    let r_th = b.operating.threshold_resistance();
    println!(
        "{}x{} array, {} samples, {:.1}% Wilson intervals, {:?} read",
        g.rows,
        g.cols,
        plan.samples,
        plan.confidence.level() * 100.0,
        mode
    );
    println!("{:<14} {:<4} {:>11} {:>11} {:>11} {:>11}  result", "cell", "par", "analytic", "empirical", "lower", "upper");
    let mut misses = Vec::new();
    for cell in CellGrid::<()>::corners(g.rows, g.cols) {
        let w = write_channel_params(cell, b)?;
        // Sampled references (general mode) pass when the two intervals overlap.
        let (p3, p4, reference) = match mode {
            ReadMode::Ideal => {
                let r = read_channel_params_ideal(cell, r_th, g, &b.device)?;
                (r.p3, r.p4, None)
            }
            ReadMode::General => {
                let alt = SamplingPlan { seed: plan.seed.wrapping_add(1), ..*plan };
                let r = read_channel_params_general(cell, b, &alt)?;
                (r.params.p3, r.params.p4, Some((r.p3, r.p4)))
            }
        };
        let checks: [(&str, f64, BinomialEstimate, Option<BinomialEstimate>); 4] = [
            ("p1", w.p1, simulate_write(cell, Bit::Zero, plan, b)?, None),
            ("p2", w.p2, simulate_write(cell, Bit::One, plan, b)?, None),
            ("p3", p3, simulate_read(cell, Bit::Zero, plan, b, mode)?, reference.map(|r| r.0)),
            ("p4", p4, simulate_read(cell, Bit::One, plan, b, mode)?, reference.map(|r| r.1)),
        ];
        for (name, analytic, est, reference) in checks {
            let ok = match reference {
                None => est.covers(analytic),
                Some(r) => r.lower <= est.upper && est.lower <= r.upper,
            };
            println!(
                "{:<14} {:<4} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}  {}",
                cell.to_string(),
                name,
                analytic,
                est.rate,
                est.lower,
                est.upper,
                if ok { "pass" } else { "FAIL" }
            );
            if !ok {
                misses.push(format!("{name} at {cell}"));
            }
        }
    }
    if misses.is_empty() {
        println!("all corner parameters inside their intervals");
        Ok(())
    } else {
        Err(Failure::Runtime(format!("outside the confidence interval: {}", misses.join(", "))))
    }
}
