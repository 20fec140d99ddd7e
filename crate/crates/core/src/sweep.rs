//! Experiment sweeps written as CSV files with a JSON metadata sidecar.
//!
//! Numbers are printed with 17 significant digits and the sidecar carries
//! no timestamps, so reruns with the same inputs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::capacity::{averaged_capacity, capacity_grid, report_grid, CellReport, Coupling};
use crate::config::{format_f64, ModelBundle};
use crate::error::{Error, Result};
use crate::grid::CellGrid;
use crate::monte_carlo::SamplingPlan;
use crate::scalar::Scalar;
use crate::threshold::{
    baseline_threshold, scheme_average_ber, stmc_exact, LineOffsets, SchemeKind, Scope, ThresholdScheme,
    DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS,
};

pub const HEATMAP_HEADER: &str = "i,j,p1,p2,p3,p4,p5,p6,ber_write,ber_read,ber_cascade,capacity";
pub const CAPACITY_HEADER: &str = "m,n,r_w,r_b,avg_capacity";
pub const ASPECT_HEADER: &str = "m,n,ratio,avg_capacity";
pub const THRESHOLD_HEADER: &str = "sweep_var,value,scheme,avg_read_ber,status";

/// Parameter lists of all experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    /// Square array sizes of the capacity sweep.
    pub sizes: Vec<usize>,
    /// Line resistances (`r_w = r_b`) of the capacity sweep.
    pub line_resistances: Vec<f64>,
    /// Shapes of the aspect-ratio study; all must hold `total_cells`.
    pub shapes: Vec<(usize, usize)>,
    pub total_cells: usize,
    pub schemes: Vec<SchemeKind>,
    /// Square sizes of the threshold comparison at `threshold_size_r`.
    pub threshold_sizes: Vec<usize>,
    pub threshold_size_r: f64,
    /// Line resistances of the threshold comparison at `threshold_r_size`.
    pub threshold_rs: Vec<f64>,
    pub threshold_r_size: usize,
    pub coupling: Coupling,
    pub out_dir: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let tens: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
        SweepSpec {
            sizes: vec![64, 128, 256, 384],
            line_resistances: tens.clone(),
            shapes: vec![(128, 128), (64, 256), (32, 512), (16, 1024), (8, 2048), (4, 4096)],
            total_cells: 16384,
            schemes: SchemeKind::ALL.to_vec(),
            threshold_sizes: vec![128, 256, 512, 1024, 2048],
            threshold_size_r: 30.0,
            threshold_rs: tens,
            threshold_r_size: 1024,
            coupling: Coupling::QCoupled,
            out_dir: PathBuf::from("."),
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a, S: Serialize> {
    experiment: &'a str,
    tool: &'a str,
    version: &'a str,
    csv: &'a str,
    bundle: ModelBundle<f64>,
    parameters: S,
}

fn write_outputs<T: Scalar, S: Serialize>(
    dir: &Path,
    name: &str,
    csv: &str,
    bundle: &ModelBundle<T>,
    parameters: S,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{name}.csv"));
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    let meta = Metadata {
        experiment: name,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        csv: &format!("{name}.csv"),
        bundle: bundle.cast(),
        parameters,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Sweep(e.to_string()))? + "\n";
    let side = dir.join(format!("{name}.json"));
    fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok(path)
}

fn num<T: Scalar>(x: T) -> String {
    format_f64(x.as_f64())
}

/// Per-cell probabilities, error rates and capacity of one array.
pub fn heatmap<T: Scalar>(bundle: &ModelBundle<T>, coupling: Coupling, plan: &SamplingPlan) -> Result<CellGrid<CellReport<T>>> {
    report_grid(bundle, coupling, plan)
}

pub fn heatmap_csv<T: Scalar>(grid: &CellGrid<CellReport<T>>) -> String {
    let mut s = String::with_capacity(grid.len() * 260 + 80);
    s.push_str(HEATMAP_HEADER);
    s.push('\n');
    for (c, r) in grid.iter() {
        let _ = write!(s, "{},{}", c.row, c.col);
        for v in [r.p1, r.p2, r.p3, r.p4, r.p5, r.p6, r.ber_write, r.ber_read, r.ber_cascade, r.capacity] {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push('\n');
    }
    s
}

pub fn run_heatmap<T: Scalar>(
    bundle: &ModelBundle<T>,
    spec: &SweepSpec,
    plan: &SamplingPlan,
) -> Result<CellGrid<CellReport<T>>> {
    let grid = heatmap(bundle, spec.coupling, plan)?;
    #[derive(Serialize)]
    struct P<'a> {
        coupling: Coupling,
        plan: &'a SamplingPlan,
    }
    write_outputs(&spec.out_dir, "heatmap", &heatmap_csv(&grid), bundle, P { coupling: spec.coupling, plan })?;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub m: usize,
    pub n: usize,
    pub r_w: f64,
    pub r_b: f64,
    pub avg_capacity: f64,
}

fn average_for<T: Scalar>(bundle: &ModelBundle<T>, coupling: Coupling, plan: &SamplingPlan) -> Result<f64> {
    Ok(averaged_capacity(&capacity_grid(bundle, coupling, plan)?).as_f64())
}

/// Averaged capacity over every (size, line resistance) pair.
pub fn capacity_sweep<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec, plan: &SamplingPlan) -> Result<Vec<CapacityPoint>> {
    if spec.sizes.is_empty() || spec.line_resistances.is_empty() {
        return Err(Error::Sweep("capacity sweep needs at least one size and one line resistance".into()));
    }
    let mut out = Vec::new();
    for &size in &spec.sizes {
        for &r in &spec.line_resistances {
            let mut b = *bundle;
            b.geometry = b.geometry.with_size(size, size).with_line_resistance(T::lit(r));
            b.validated()?;
            out.push(CapacityPoint { m: size, n: size, r_w: r, r_b: r, avg_capacity: average_for(&b, spec.coupling, plan)? });
        }
    }
    Ok(out)
}

pub fn run_capacity_sweep<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec, plan: &SamplingPlan) -> Result<Vec<CapacityPoint>> {
    let points = capacity_sweep(bundle, spec, plan)?;
    let mut s = format!("{CAPACITY_HEADER}\n");
    for p in &points {
        let _ = writeln!(s, "{},{},{},{},{}", p.m, p.n, format_f64(p.r_w), format_f64(p.r_b), format_f64(p.avg_capacity));
    }
    #[derive(Serialize)]
    struct P<'a> {
        sizes: &'a [usize],
        line_resistances: &'a [f64],
        coupling: Coupling,
    }
    write_outputs(
        &spec.out_dir,
        "capacity_sweep",
        &s,
        bundle,
        P { sizes: &spec.sizes, line_resistances: &spec.line_resistances, coupling: spec.coupling },
    )?;
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AspectRow {
    pub m: usize,
    pub n: usize,
    pub ratio: f64,
    pub avg_capacity: f64,
}

/// Averaged capacity per shape at the bundle's line resistances, sorted by
/// aspect ratio `max(m,n)/min(m,n)`.
pub fn aspect_ratio_study<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec, plan: &SamplingPlan) -> Result<Vec<AspectRow>> {
    if spec.shapes.is_empty() {
        return Err(Error::Sweep("aspect-ratio study needs at least one shape".into()));
    }
    let mut rows = Vec::new();
    for &(m, n) in &spec.shapes {
        if m * n != spec.total_cells {
            return Err(Error::Sweep(format!("{m}x{n} holds {} cells, expected {}", m * n, spec.total_cells)));
        }
        let mut b = *bundle;
        b.geometry = b.geometry.with_size(m, n);
        b.validated()?;
        let ratio = m.max(n) as f64 / m.min(n) as f64;
        rows.push(AspectRow { m, n, ratio, avg_capacity: average_for(&b, spec.coupling, plan)? });
    }
    rows.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.m.cmp(&b.m)));
    Ok(rows)
}

pub fn run_aspect_ratio_study<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec, plan: &SamplingPlan) -> Result<Vec<AspectRow>> {
    let rows = aspect_ratio_study(bundle, spec, plan)?;
    let mut s = format!("{ASPECT_HEADER}\n");
    for r in &rows {
        let _ = writeln!(s, "{},{},{},{}", r.m, r.n, format_f64(r.ratio), format_f64(r.avg_capacity));
    }
    #[derive(Serialize)]
    struct P<'a> {
        total_cells: usize,
        shapes: &'a [(usize, usize)],
        coupling: Coupling,
    }
    write_outputs(
        &spec.out_dir,
        "aspect_ratio",
        &s,
        bundle,
        P { total_cells: spec.total_cells, shapes: &spec.shapes, coupling: spec.coupling },
    )?;
    Ok(rows)
}

/// Outcome of building a scheme at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeStatus {
    Ok,
    /// The fixed-point precondition failed; the bracketed solve was used.
    PreconditionFallback,
    /// The iteration hit its step limit; the bracketed solve was used.
    NotConvergedFallback,
}

impl SchemeStatus {
    pub fn name(self) -> &'static str {
        match self {
            SchemeStatus::Ok => "ok",
            SchemeStatus::PreconditionFallback => "precondition-fallback",
            SchemeStatus::NotConvergedFallback => "not-converged-fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub sweep_var: &'static str,
    pub value: f64,
    pub scheme: SchemeKind,
    pub avg_read_ber: f64,
    pub status: SchemeStatus,
}

/// Builds `kind` for `bundle`'s array over the whole array.
pub fn build_scheme<T: Scalar>(kind: SchemeKind, r_th0: T, bundle: &ModelBundle<T>) -> (ThresholdScheme<T>, SchemeStatus) {
    let g = &bundle.geometry;
    match kind {
        SchemeKind::Naive => (ThresholdScheme::naive(r_th0), SchemeStatus::Ok),
        SchemeKind::Dtec => (ThresholdScheme::dtec(r_th0, g), SchemeStatus::Ok),
        SchemeKind::StmcApprox => (ThresholdScheme::stmc_approx(r_th0, g, Scope::Array), SchemeStatus::Ok),
        SchemeKind::StmcExact => {
            let offsets = LineOffsets::array(g);
            let status = match stmc_exact(r_th0, &offsets, T::lit(DEFAULT_EPSILON), DEFAULT_MAX_ITERATIONS) {
                Ok(t) if t.converged => {
                    let values = crate::threshold::ThresholdValues::Uniform(t.value);
                    return (ThresholdScheme { kind, scope: Scope::Array, values }, SchemeStatus::Ok);
                }
                Ok(_) => SchemeStatus::NotConvergedFallback,
                Err(_) => SchemeStatus::PreconditionFallback,
            };
            (ThresholdScheme::stmc_bracketed(r_th0, g, Scope::Array), status)
        }
    }
}

fn threshold_points<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec) -> Vec<(&'static str, f64, ModelBundle<T>)> {
    let mut points = Vec::new();
    for &size in &spec.threshold_sizes {
        let mut b = *bundle;
        b.geometry = b.geometry.with_size(size, size).with_line_resistance(T::lit(spec.threshold_size_r));
        points.push(("size", size as f64, b));
    }
    for &r in &spec.threshold_rs {
        let mut b = *bundle;
        b.geometry = b.geometry.with_size(spec.threshold_r_size, spec.threshold_r_size).with_line_resistance(T::lit(r));
        points.push(("r", r, b));
    }
    points
}

/// Averaged read error of every scheme over the size and line-resistance
/// sweeps.
pub fn threshold_comparison<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec) -> Result<Vec<ThresholdRow>> {
    if spec.schemes.is_empty() {
        return Err(Error::Sweep("threshold comparison needs at least one scheme".into()));
    }
    if !bundle.geometry.is_ideal_selector() {
        return Err(Error::NonIdealSelectors);
    }
    let r_th0 = baseline_threshold(&bundle.device)?;
    let mut rows = Vec::new();
    for (var, value, b) in threshold_points(bundle, spec) {
        b.validated()?;
        for &kind in &spec.schemes {
            let (scheme, status) = build_scheme(kind, r_th0, &b);
            let ber = scheme_average_ber(&scheme, &b.geometry, &b.device).as_f64();
            rows.push(ThresholdRow { sweep_var: var, value, scheme: kind, avg_read_ber: ber, status });
        }
    }
    Ok(rows)
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut s = format!("{THRESHOLD_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.sweep_var,
            format_f64(r.value),
            r.scheme.name(),
            format_f64(r.avg_read_ber),
            r.status.name()
        );
    }
    s
}

pub fn run_threshold_comparison<T: Scalar>(bundle: &ModelBundle<T>, spec: &SweepSpec) -> Result<Vec<ThresholdRow>> {
    let rows = threshold_comparison(bundle, spec)?;
    #[derive(Serialize)]
    struct P<'a> {
        schemes: &'a [SchemeKind],
        sizes: &'a [usize],
        size_sweep_r: f64,
        line_resistances: &'a [f64],
        r_sweep_size: usize,
        epsilon: f64,
        max_iterations: usize,
    }
    let p = P {
        schemes: &spec.schemes,
        sizes: &spec.threshold_sizes,
        size_sweep_r: spec.threshold_size_r,
        line_resistances: &spec.threshold_rs,
        r_sweep_size: spec.threshold_r_size,
        epsilon: DEFAULT_EPSILON,
        max_iterations: DEFAULT_MAX_ITERATIONS,
    };
    write_outputs(&spec.out_dir, "threshold_cmp", &threshold_csv(&rows), bundle, p)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    fn small(rows: usize, cols: usize, r: f64) -> ModelBundle<f64> {
        let mut b = ModelBundle::reference();
        b.geometry = b.geometry.with_size(rows, cols).with_line_resistance(r);
        b
    }

    #[test]
    fn heatmap_rows_are_ordered() {
        let grid = heatmap(&small(2, 2, 10.0), Coupling::QCoupled, &SamplingPlan::new(1, 0)).unwrap();
        let csv = heatmap_csv(&grid);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], HEATMAP_HEADER);
        assert_eq!(lines.len(), 5);
        let keys: Vec<&str> = lines[1..].iter().map(|l| &l[..3]).collect();
        assert_eq!(keys, ["1,1", "1,2", "2,1", "2,2"]);
    }

    #[test]
    fn heatmap_without_lines_is_uniform() {
        let grid = heatmap(&small(3, 5, 0.0), Coupling::QCoupled, &SamplingPlan::new(1, 0)).unwrap();
        let first = *grid.get(Cell::new(1, 1));
        for (c, r) in grid.iter() {
            assert_eq!(*r, CellReport { cell: c, ..first });
        }
    }

    #[test]
    fn aspect_totals_checked() {
        let spec = SweepSpec { shapes: vec![(4, 4), (2, 9)], total_cells: 16, ..SweepSpec::default() };
        assert!(matches!(
            aspect_ratio_study(&small(1, 1, 10.0), &spec, &SamplingPlan::new(1, 0)),
            Err(Error::Sweep(_))
        ));
        let spec = SweepSpec { shapes: vec![(2, 8)], total_cells: 16, ..SweepSpec::default() };
        let rows = aspect_ratio_study(&small(1, 1, 10.0), &spec, &SamplingPlan::new(1, 0)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].ratio, 4.0);
    }

    #[test]
    fn empty_lists_rejected() {
        let spec = SweepSpec { schemes: vec![], ..SweepSpec::default() };
        assert!(threshold_comparison(&small(4, 4, 10.0), &spec).is_err());
        let spec = SweepSpec { sizes: vec![], ..SweepSpec::default() };
        assert!(capacity_sweep(&small(4, 4, 10.0), &spec, &SamplingPlan::new(1, 0)).is_err());
    }

    #[test]
    fn fallback_is_flagged() {
        let b = small(2048, 2048, 30.0);
        let (_, status) = build_scheme(SchemeKind::StmcExact, 1e5, &b);
        assert_eq!(status, SchemeStatus::PreconditionFallback);
        let (_, status) = build_scheme(SchemeKind::StmcExact, 1e5, &small(64, 64, 30.0));
        assert_eq!(status, SchemeStatus::Ok);
    }
}
