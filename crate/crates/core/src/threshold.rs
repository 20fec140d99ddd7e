//! Read threshold design: the line-free optimum, per-cell shifted
//! thresholds, and shared thresholds for a whole array or column.

use serde::Serialize;

use crate::circuit::line_load;
use crate::config::{ArrayGeometry, DeviceModel};
use crate::error::{Error, Result};
use crate::grid::{Cell, CellGrid};
use crate::read_channel::read_errors_for_load;
use crate::scalar::{q_function, Scalar};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

/// Threshold minimizing the read error of a cell without line resistance.
pub fn baseline_threshold<T: Scalar>(device: &DeviceModel<T>) -> Result<T> {
    let d = device;
    let half = T::lit(0.5);
    if d.lrs_ln_std == d.hrs_ln_std && d.prior_hrs == half {
        return Ok((half * (d.lrs_ln_mean + d.hrs_ln_mean)).exp());
    }
    let q = d.prior_hrs;
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::NoThresholdCrossing);
    }
    // log of the weighted HRS density minus the weighted LRS density at ln R = x
    let balance = |x: T| {
        let zh = (d.hrs_ln_mean - x) / d.hrs_ln_std;
        let zl = (x - d.lrs_ln_mean) / d.lrs_ln_std;
        (q / d.hrs_ln_std).ln() - half * zh * zh - ((T::one() - q) / d.lrs_ln_std).ln() + half * zl * zl
    };
    let (mut lo, mut hi) = (d.lrs_ln_mean, d.hrs_ln_mean);
    if !(balance(lo) < T::zero() && balance(hi) > T::zero()) {
        return Err(Error::NoThresholdCrossing);
    }
    let tol = T::lit(1e-12).max(T::lit(4.0) * T::epsilon());
    while hi - lo > tol * hi.abs().max(T::one()) {
        let mid = half * (lo + hi);
        if balance(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((half * (lo + hi)).exp())
}

/// Per-cell threshold shifted by the path line load.
pub fn dtec_threshold<T: Scalar>(cell: Cell, r_th0: T, geometry: &ArrayGeometry<T>) -> Result<T> {
    geometry.check_cell(cell)?;
    Ok(r_th0 + line_load(cell, geometry))
}

/// Array-wide threshold averaging the per-cell shifted thresholds.
pub fn stmc_approx<T: Scalar>(r_th0: T, geometry: &ArrayGeometry<T>) -> T {
    let half = T::lit(0.5);
    r_th0
        + half * T::from_count(geometry.rows + 1) * geometry.bitline_r
        + half * T::from_count(geometry.cols + 1) * geometry.wordline_r
}

/// Line loads of the cells sharing one threshold, with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct LineOffsets<T> {
    loads: Vec<(T, usize)>,
    count: usize,
}

impl<T: Scalar> LineOffsets<T> {
    pub fn array(g: &ArrayGeometry<T>) -> Self {
        Self::from_cells(g, (1..=g.rows).flat_map(|i| (1..=g.cols).map(move |j| Cell::new(i, j))))
    }

    /// Cells of column `col`; each keeps its own wordline offset.
    pub fn column(g: &ArrayGeometry<T>, col: usize) -> Self {
        Self::from_cells(g, (1..=g.rows).map(|i| Cell::new(i, col)))
    }

    fn from_cells(g: &ArrayGeometry<T>, cells: impl Iterator<Item = Cell>) -> Self {
        let mut bits: Vec<u64> = cells.map(|c| line_load(c, g).as_f64().to_bits()).collect();
        let count = bits.len();
        bits.sort_unstable();
        let mut loads: Vec<(T, usize)> = Vec::new();
        let mut prev = None;
        for b in bits {
            if prev == Some(b) {
                loads.last_mut().expect("previous load").1 += 1;
            } else {
                loads.push((T::lit(f64::from_bits(b)), 1));
                prev = Some(b);
            }
        }
        LineOffsets { loads, count }
    }

    pub fn max(&self) -> T {
        self.loads.last().map_or(T::zero(), |l| l.0)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn mean(&self, f: impl Fn(T) -> T) -> T {
        let s = self.loads.iter().fold(T::zero(), |s, &(l, k)| s + T::from_count(k) * f(l));
        s / T::from_count(self.count)
    }

    /// `mean ln(R - L)`.
    pub fn mean_log_margin(&self, r: T) -> T {
        self.mean(|l| (r - l).ln())
    }

    pub fn mean_load(&self) -> T {
        self.mean(|l| l)
    }
}

/// Relative residual of the log-balance equation `mean ln(R - L) = ln R_th0`.
pub fn log_balance_residual<T: Scalar>(r: T, r_th0: T, offsets: &LineOffsets<T>) -> T {
    ((offsets.mean_log_margin(r) - r_th0.ln()) / r_th0.ln()).abs()
}

/// Fixed-point iteration for the shared threshold with its full trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StmcTrace<T: Scalar> {
    pub value: T,
    /// `R^(0) = R_th0, R^(1), ...`
    pub iterates: Vec<T>,
    pub converged: bool,
    pub residual: T,
}

impl<T: Scalar> StmcTrace<T> {
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// `ln R^(l) = ln R_th0 - mean ln(1 - L / R^(l-1))`, from `R_th0`, until two
/// iterates differ by at most `epsilon` ohms or `k_max` steps are taken.
pub fn stmc_exact<T: Scalar>(r_th0: T, offsets: &LineOffsets<T>, epsilon: T, k_max: usize) -> Result<StmcTrace<T>> {
    let max_load = offsets.max();
    if !(r_th0 > max_load) {
        return Err(Error::StmcPrecondition { r_th0: r_th0.as_f64(), max_load: max_load.as_f64() });
    }
    let ln_r0 = r_th0.ln();
    let mut iterates = vec![r_th0];
    let mut converged = false;
    for _ in 0..k_max {
        let prev = *iterates.last().expect("seeded");
        let next = (ln_r0 - offsets.mean(|l| (-l / prev).ln_1p())).exp();
        iterates.push(next);
        if (next - prev).abs() <= epsilon {
            converged = true;
            break;
        }
    }
    let value = *iterates.last().expect("seeded");
    Ok(StmcTrace { value, residual: log_balance_residual(value, r_th0, offsets), iterates, converged })
}

/// Bisection on `mean ln(R - L) = ln R_th0` over `(L_max, L_max + R_th0]`,
/// valid whatever the size of the loads.
pub fn solve_log_balance_bracketed<T: Scalar>(r_th0: T, offsets: &LineOffsets<T>) -> T {
    let target = r_th0.ln();
    let (mut lo, mut hi) = (offsets.max(), offsets.max() + r_th0);
    let half = T::lit(0.5);
    for _ in 0..400 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if offsets.mean_log_margin(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Naive,
    Dtec,
    StmcApprox,
    StmcExact,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Naive, SchemeKind::Dtec, SchemeKind::StmcApprox, SchemeKind::StmcExact];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Naive => "naive",
            SchemeKind::Dtec => "dtec",
            SchemeKind::StmcApprox => "stmc-approx",
            SchemeKind::StmcExact => "stmc-exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Array,
    PerColumn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdValues<T> {
    Uniform(T),
    PerColumn(Vec<T>),
    PerCell(CellGrid<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScheme<T: Scalar> {
    pub kind: SchemeKind,
    pub scope: Scope,
    pub values: ThresholdValues<T>,
}

impl<T: Scalar> ThresholdScheme<T> {
    pub fn naive(r_th0: T) -> Self {
        ThresholdScheme { kind: SchemeKind::Naive, scope: Scope::Array, values: ThresholdValues::Uniform(r_th0) }
    }

    pub fn dtec(r_th0: T, g: &ArrayGeometry<T>) -> Self {
        ThresholdScheme {
            kind: SchemeKind::Dtec,
            scope: Scope::Array,
            values: ThresholdValues::PerCell(CellGrid::from_fn(g.rows, g.cols, |c| r_th0 + line_load(c, g))),
        }
    }

    pub fn stmc_approx(r_th0: T, g: &ArrayGeometry<T>, scope: Scope) -> Self {
        let values = match scope {
            Scope::Array => ThresholdValues::Uniform(stmc_approx(r_th0, g)),
            Scope::PerColumn => ThresholdValues::PerColumn(
                (1..=g.cols)
                    .map(|j| r_th0 + T::lit(0.5) * T::from_count(g.rows + 1) * g.bitline_r + T::from_count(j) * g.wordline_r)
                    .collect(),
            ),
        };
        ThresholdScheme { kind: SchemeKind::StmcApprox, scope, values }
    }

    /// Shared thresholds from the fixed-point iteration.
    pub fn stmc_exact(r_th0: T, g: &ArrayGeometry<T>, scope: Scope, epsilon: T, k_max: usize) -> Result<Self> {
        let solve = |o: &LineOffsets<T>| stmc_exact(r_th0, o, epsilon, k_max).map(|t| t.value);
        Self::stmc_with(g, scope, solve)
    }

    /// Shared thresholds from the bracketed solve; defined for any loads.
    pub fn stmc_bracketed(r_th0: T, g: &ArrayGeometry<T>, scope: Scope) -> Self {
        Self::stmc_with(g, scope, |o| Ok(solve_log_balance_bracketed(r_th0, o))).expect("infallible solve")
    }

    fn stmc_with(g: &ArrayGeometry<T>, scope: Scope, solve: impl Fn(&LineOffsets<T>) -> Result<T>) -> Result<Self> {
        let values = match scope {
            Scope::Array => ThresholdValues::Uniform(solve(&LineOffsets::array(g))?),
            Scope::PerColumn => ThresholdValues::PerColumn(
                (1..=g.cols).map(|j| solve(&LineOffsets::column(g, j))).collect::<Result<_>>()?,
            ),
        };
        Ok(ThresholdScheme { kind: SchemeKind::StmcExact, scope, values })
    }

    pub fn threshold(&self, cell: Cell) -> T {
        match &self.values {
            ThresholdValues::Uniform(r) => *r,
            ThresholdValues::PerColumn(v) => v[cell.col - 1],
            ThresholdValues::PerCell(g) => *g.get(cell),
        }
    }
}

/// Mean over the array of the prior-weighted read error under `scheme`.
pub fn scheme_average_ber<T: Scalar>(scheme: &ThresholdScheme<T>, g: &ArrayGeometry<T>, device: &DeviceModel<T>) -> T {
    use rayon::prelude::*;
    let q = device.prior_hrs;
    // per-row partial sums in row order keep the result independent of the thread count
    let rows: Vec<T> = (1..=g.rows)
        .into_par_iter()
        .map(|i| {
            (1..=g.cols).fold(T::zero(), |s, j| {
                let c = Cell::new(i, j);
                let (p3, p4) = read_errors_for_load(line_load(c, g), scheme.threshold(c), device);
                s + q * p3 + (T::one() - q) * p4
            })
        })
        .collect();
    let total = rows.into_iter().fold(T::zero(), |a, b| a + b);
    total / T::from_count(g.rows * g.cols)
}

/// Read error of a single cell whose log margin equals the array mean
/// `A = mean ln(R_th - L)`.
pub fn jensen_bound<T: Scalar>(r_th: T, offsets: &LineOffsets<T>, device: &DeviceModel<T>) -> T {
    let a = offsets.mean_log_margin(r_th);
    let q = device.prior_hrs;
    q * q_function((device.hrs_ln_mean - a) / device.hrs_ln_std)
        + (T::one() - q) * q_function((a - device.lrs_ln_mean) / device.lrs_ln_std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelBundle;

    fn reference() -> ModelBundle<f64> {
        ModelBundle::reference()
    }

    fn objective(r: f64, d: &DeviceModel<f64>) -> f64 {
        let (p3, p4) = read_errors_for_load(0.0, r, d);
        d.prior_hrs * p3 + (1.0 - d.prior_hrs) * p4
    }

    #[test]
    fn baseline_symmetric() {
        let r = baseline_threshold(&reference().device).unwrap();
        assert!((r / 1e5 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_matches_grid_search() {
        let mut d = reference().device;
        d.hrs_ln_std = 0.4 * std::f64::consts::LN_10;
        d.prior_hrs = 0.4;
        let r = baseline_threshold(&d).unwrap();
        let best = (-20_000..=20_000)
            .map(|k| r + 0.1 * k as f64)
            .map(|x| (x, objective(x, &d)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!((best.0 - r).abs() <= 0.1, "{} vs {r}", best.0);
        assert!(best.0 > r - 2000.0 + 1.0 && best.0 < r + 2000.0 - 1.0);
    }

    #[test]
    fn baseline_decreases_with_prior() {
        let mut d = reference().device;
        let mut prev = f64::INFINITY;
        for q in [0.2, 0.35, 0.5, 0.65, 0.8] {
            d.prior_hrs = q;
            let r = baseline_threshold(&d).unwrap();
            assert!(r < prev);
            prev = r;
        }
        d.prior_hrs = 1.0;
        assert!(matches!(baseline_threshold(&d), Err(Error::NoThresholdCrossing)));
    }

    #[test]
    fn closed_form_thresholds() {
        let g = reference().geometry;
        assert_eq!(dtec_threshold(Cell::new(1024, 1024), 1e5, &g).unwrap(), 120480.0);
        assert_eq!(stmc_approx(1e5, &g), 110250.0);
        let bare = ArrayGeometry::ideal(1, 1, 0.0);
        assert_eq!(stmc_approx(1e5, &bare), 1e5);
        assert_eq!(dtec_threshold(Cell::new(1, 1), 1e5, &bare).unwrap(), 1e5);
        let small = ArrayGeometry::ideal(7, 5, 13.0);
        let dtec = ThresholdScheme::dtec(1e5, &small);
        let mean = dtec.values_mean(&small);
        assert!((mean - stmc_approx(1e5, &small)).abs() < 1e-9);
    }

    impl ThresholdScheme<f64> {
        fn values_mean(&self, g: &ArrayGeometry<f64>) -> f64 {
            CellGrid::from_fn(g.rows, g.cols, |c| self.threshold(c)).values().iter().sum::<f64>() / (g.rows * g.cols) as f64
        }
    }

    #[test]
    fn fixed_point_reference_array() {
        let b = reference();
        let r0 = baseline_threshold(&b.device).unwrap();
        let offsets = LineOffsets::array(&b.geometry);
        assert_eq!(offsets.len(), 1024 * 1024);
        let t = stmc_exact(r0, &offsets, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterations(), 12);
        assert!((t.value - 110337.4501334628).abs() < 1e-5);
        assert!((t.iterates[1] - 111541.86388308254).abs() < 1e-6);
        assert!(t.residual <= 1e-9);
        let bracketed = solve_log_balance_bracketed(r0, &offsets);
        assert!((bracketed - t.value).abs() < 1e-5);
    }

    #[test]
    fn fixed_point_brackets_alternate() {
        for (m, n, r) in [(1024, 1024, 10.0), (128, 128, 30.0), (64, 512, 20.0), (300, 17, 50.0)] {
            let g = ArrayGeometry::ideal(m, n, r);
            let t = stmc_exact(1e5, &LineOffsets::array(&g), 1e-6, 50).unwrap();
            let (even, odd): (Vec<_>, Vec<_>) = t.iterates.iter().enumerate().partition(|(k, _)| k % 2 == 0);
            let even: Vec<f64> = even.into_iter().map(|x| *x.1).collect();
            let odd: Vec<f64> = odd.into_iter().map(|x| *x.1).collect();
            // even iterates rise from below, odd iterates fall from above
            assert!(even.windows(2).all(|w| w[1] >= w[0]));
            assert!(odd.windows(2).all(|w| w[1] <= w[0]));
            assert!(even.iter().all(|&e| odd.iter().all(|&o| e <= o + 1e-9)));
        }
    }

    #[test]
    fn fixed_point_without_lines() {
        let g = ArrayGeometry::ideal(16, 16, 0.0);
        let t = stmc_exact(1e5, &LineOffsets::array(&g), 1e-6, 50).unwrap();
        assert_eq!(t.iterations(), 1);
        assert!((t.value / 1e5 - 1.0_f64).abs() < 1e-15);
    }

    #[test]
    fn precondition_reported() {
        let g = ArrayGeometry::ideal(2048, 2048, 30.0);
        let e = stmc_exact(1e5, &LineOffsets::array(&g), 1e-6, 50).unwrap_err();
        assert!(matches!(e, Error::StmcPrecondition { .. }));
        let r = solve_log_balance_bracketed(1e5, &LineOffsets::array(&g));
        assert!(log_balance_residual(r, 1e5, &LineOffsets::array(&g)) < 1e-9);
    }

    #[test]
    fn per_column_keeps_wordline_offset() {
        let g = reference().geometry;
        let s = ThresholdScheme::stmc_bracketed(1e5, &g, Scope::PerColumn);
        assert!((s.threshold(Cell::new(1, 1024)) - 115408.69635415162).abs() < 1e-5);
        assert!(s.threshold(Cell::new(1, 1)) < s.threshold(Cell::new(1, 2)));
    }

    #[test]
    fn scheme_bers_reference() {
        let b = reference();
        let (g, d) = (&b.geometry, &b.device);
        let naive = scheme_average_ber(&ThresholdScheme::naive(1e5), g, d);
        let dtec = scheme_average_ber(&ThresholdScheme::dtec(1e5, g), g, d);
        let approx = scheme_average_ber(&ThresholdScheme::stmc_approx(1e5, g, Scope::Array), g, d);
        let exact = scheme_average_ber(&ThresholdScheme::stmc_exact(1e5, g, Scope::Array, 1e-6, 50).unwrap(), g, d);
        assert!((naive - 0.0005074821642219217).abs() < 1e-14);
        assert!((dtec - 0.00042906033319683816).abs() < 1e-14);
        assert!((approx - 0.0004385678643439905).abs() < 1e-14);
        assert!((exact - 0.0004385467427798263).abs() < 1e-13);
        assert!(dtec <= exact && exact <= approx && approx <= naive);
    }

    #[test]
    fn convex_tail_puts_objective_above_bound() {
        let b = reference();
        let offsets = LineOffsets::array(&b.geometry);
        let r = solve_log_balance_bracketed(1e5, &offsets);
        let bound = jensen_bound(r, &offsets, &b.device);
        assert!((bound - 0.00042906033319683675).abs() < 1e-14);
        let objective = scheme_average_ber(&ThresholdScheme::stmc_bracketed(1e5, &b.geometry, Scope::Array), &b.geometry, &b.device);
        assert!(objective > bound);
    }
}
