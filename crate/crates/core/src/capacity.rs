//! Cascade of the write and read channels and its capacity.

use std::collections::HashMap;

use serde::Serialize;

use crate::circuit::line_load;
use crate::config::ModelBundle;
use crate::error::Result;
use crate::grid::{Cell, CellGrid};
use crate::monte_carlo::SamplingPlan;
use crate::read_channel::{read_channel_params, read_errors_for_load, ReadChannelParams};
use crate::scalar::{binary_entropy, Scalar};
use crate::write_channel::{
    conditional_failure_grid, conditional_failures, conditional_failures_in, parallel_try, ConditionalFailure,
    WriteChannelParams, WriteEnvironment,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeParams<T: Scalar> {
    pub cell: Cell,
    /// `P(Z=1 | X=0)`.
    pub p5: T,
    /// `P(Z=0 | X=1)`.
    pub p6: T,
}

impl<T: Scalar> CascadeParams<T> {
    pub fn ber(&self, q: T) -> T {
        q * self.p5 + (T::one() - q) * self.p6
    }
}

/// `(p5, p6)` of a write channel followed by a read channel.
pub fn cascade_probabilities<T: Scalar>(p1: T, p2: T, p3: T, p4: T) -> (T, T) {
    let one = T::one();
    (p1 * (one - p4) + (one - p1) * p3, p2 * (one - p3) + (one - p2) * p4)
}

pub fn cascade<T: Scalar>(write: &WriteChannelParams<T>, read: &ReadChannelParams<T>) -> CascadeParams<T> {
    let (p5, p6) = cascade_probabilities(write.p1, write.p2, read.p3, read.p4);
    CascadeParams { cell: write.cell, p5, p6 }
}

/// `I(X;Z)` in bits for input distribution `P(X=0) = q`.
pub fn mutual_information<T: Scalar>(q: T, p5: T, p6: T) -> T {
    let one = T::one();
    binary_entropy(q * (one - p5) + (one - q) * p6) - q * binary_entropy(p5) - (one - q) * binary_entropy(p6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coupling {
    /// The channel is fixed at the configured prior; only the input
    /// distribution varies.
    FixedChannel,
    /// The write channel is recomputed for every candidate prior.
    QCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityResult<T: Scalar> {
    pub cell: Cell,
    pub capacity: T,
    pub q_star: T,
}

/// Everything the capacity of one cell depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellChannel<T: Scalar> {
    pub write: ConditionalFailure<T>,
    pub p3: T,
    pub p4: T,
    /// Configured prior `P(state 0)`.
    pub prior: T,
}

const SEARCH_TOL: f64 = 1e-9;
const SCAN_POINTS: usize = 201;

impl<T: Scalar> CellChannel<T> {
    pub fn cascade_at(&self, q: T) -> (T, T) {
        let (p1, p2) = self.write.with_prior(q);
        cascade_probabilities(p1, p2, self.p3, self.p4)
    }

    /// Maximum of the mutual information and its argmax.
    pub fn capacity(&self, coupling: Coupling) -> (T, T) {
        match coupling {
            Coupling::FixedChannel => {
                let (p5, p6) = self.cascade_at(self.prior);
                golden_max(|q| mutual_information(q, p5, p6), T::zero(), T::one())
            }
            Coupling::QCoupled => {
                let f = |q: T| {
                    let (p5, p6) = self.cascade_at(q);
                    mutual_information(q, p5, p6)
                };
                let step = T::one() / T::from_count(SCAN_POINTS - 1);
                let best = (0..SCAN_POINTS)
                    .map(|k| (k, f(T::from_count(k) * step)))
                    .fold((0, T::neg_infinity()), |a, b| if b.1 > a.1 { b } else { a });
                let lo = T::from_count(best.0.saturating_sub(1)) * step;
                let hi = (T::from_count(best.0 + 1) * step).min(T::one());
                let refined = golden_max(f, lo, hi);
                if refined.0 >= best.1 {
                    refined
                } else {
                    (best.1, T::from_count(best.0) * step)
                }
            }
        }
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_max<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let tol = T::lit(SEARCH_TOL);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = T::lit(0.5) * (lo + hi);
    let mut best = (f(mid), mid);
    for x in [lo, hi] {
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

/// Channel description of one cell. Non-ideal arrays sample the read side
/// according to `plan`.
pub fn cell_channel<T: Scalar>(cell: Cell, bundle: &ModelBundle<T>, plan: &SamplingPlan) -> Result<CellChannel<T>> {
    let write = conditional_failures(cell, bundle)?;
    let read = read_channel_params(cell, bundle, plan)?;
    Ok(CellChannel { write, p3: read.p3, p4: read.p4, prior: bundle.device.prior_hrs })
}

pub fn cell_capacity<T: Scalar>(
    cell: Cell,
    bundle: &ModelBundle<T>,
    coupling: Coupling,
    plan: &SamplingPlan,
) -> Result<CapacityResult<T>> {
    let (capacity, q_star) = cell_channel(cell, bundle, plan)?.capacity(coupling);
    Ok(CapacityResult { cell, capacity, q_star })
}

/// Channel description of every cell. Ideal arrays are solved once per
/// distinct line load.
pub fn channel_grid<T: Scalar>(bundle: &ModelBundle<T>, plan: &SamplingPlan) -> Result<CellGrid<CellChannel<T>>> {
    let g = &bundle.geometry;
    let prior = bundle.device.prior_hrs;
    if g.is_ideal_selector() {
        let table = per_load(bundle, |load| {
            let env = WriteEnvironment::Ideal { load };
            let write = conditional_failures_in(&env, &bundle.device, &bundle.operating, crate::quadrature::default_tolerance())?;
            let (p3, p4) = read_errors_for_load(load, bundle.operating.threshold_resistance(), &bundle.device);
            Ok(CellChannel { write, p3, p4, prior })
        })?;
        return Ok(CellGrid::from_fn(g.rows, g.cols, |c| table[&load_key(c, bundle)]));
    }
    let write = conditional_failure_grid(bundle)?;
    let cells: Vec<Cell> = CellGrid::from_fn(g.rows, g.cols, |c| c).values().to_vec();
    let reads = cells
        .iter()
        .map(|&c| read_channel_params(c, bundle, plan))
        .collect::<Result<Vec<_>>>()?;
    let mut it = reads.into_iter();
    Ok(CellGrid::from_fn(g.rows, g.cols, |c| {
        let r = it.next().expect("one read result per cell");
        CellChannel { write: *write.get(c), p3: r.p3, p4: r.p4, prior }
    }))
}

fn load_key<T: Scalar>(cell: Cell, bundle: &ModelBundle<T>) -> u64 {
    line_load(cell, &bundle.geometry).as_f64().to_bits()
}

/// Evaluates `f` once per distinct line load of the array.
pub(crate) fn per_load<T: Scalar, O: Send>(
    bundle: &ModelBundle<T>,
    f: impl Fn(T) -> Result<O> + Sync + Send,
) -> Result<HashMap<u64, O>> {
    let g = &bundle.geometry;
    let mut keys: Vec<u64> = CellGrid::from_fn(g.rows, g.cols, |c| load_key(c, bundle)).values().to_vec();
    keys.sort_unstable();
    keys.dedup();
    let values = parallel_try(&keys, |&k| f(T::lit(f64::from_bits(k))))?;
    Ok(keys.into_iter().zip(values).collect())
}

/// Every per-cell quantity of the cascaded channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellReport<T: Scalar> {
    pub cell: Cell,
    pub p1: T,
    pub p2: T,
    pub p3: T,
    pub p4: T,
    pub p5: T,
    pub p6: T,
    pub ber_write: T,
    pub ber_read: T,
    pub ber_cascade: T,
    pub capacity: T,
    pub q_star: T,
}

impl<T: Scalar> CellChannel<T> {
    pub fn report(&self, cell: Cell, coupling: Coupling) -> CellReport<T> {
        let q = self.prior;
        let (p1, p2) = self.write.with_prior(q);
        let (p5, p6) = cascade_probabilities(p1, p2, self.p3, self.p4);
        let (capacity, q_star) = self.capacity(coupling);
        let one = T::one();
        CellReport {
            cell,
            p1,
            p2,
            p3: self.p3,
            p4: self.p4,
            p5,
            p6,
            ber_write: p1 + p2,
            ber_read: q * self.p3 + (one - q) * self.p4,
            ber_cascade: q * p5 + (one - q) * p6,
            capacity,
            q_star,
        }
    }
}

/// Reports for every cell. Ideal arrays are evaluated once per distinct
/// line load.
pub fn report_grid<T: Scalar>(
    bundle: &ModelBundle<T>,
    coupling: Coupling,
    plan: &SamplingPlan,
) -> Result<CellGrid<CellReport<T>>> {
    let g = &bundle.geometry;
    if g.is_ideal_selector() {
        let prior = bundle.device.prior_hrs;
        let table = per_load(bundle, |load| {
            let env = WriteEnvironment::Ideal { load };
            let write = conditional_failures_in(&env, &bundle.device, &bundle.operating, crate::quadrature::default_tolerance())?;
            let (p3, p4) = read_errors_for_load(load, bundle.operating.threshold_resistance(), &bundle.device);
            Ok(CellChannel { write, p3, p4, prior }.report(Cell::new(1, 1), coupling))
        })?;
        return Ok(CellGrid::from_fn(g.rows, g.cols, |c| CellReport { cell: c, ..table[&load_key(c, bundle)] }));
    }
    let channels = channel_grid(bundle, plan)?;
    Ok(CellGrid::par_from_fn(g.rows, g.cols, |c| channels.get(c).report(c, coupling)))
}

pub fn capacity_grid<T: Scalar>(
    bundle: &ModelBundle<T>,
    coupling: Coupling,
    plan: &SamplingPlan,
) -> Result<CellGrid<CapacityResult<T>>> {
    Ok(report_grid(bundle, coupling, plan)?.map(|r| CapacityResult { cell: r.cell, capacity: r.capacity, q_star: r.q_star }))
}

/// Arithmetic mean of per-cell capacities.
pub fn averaged_capacity<T: Scalar>(grid: &CellGrid<CapacityResult<T>>) -> T {
    let sum = grid.values().iter().fold(T::zero(), |s, c| s + c.capacity);
    sum / T::from_count(grid.len())
}

/// Averaged capacity of an ideal-selector array.
pub fn averaged_capacity_ideal<T: Scalar>(bundle: &ModelBundle<T>, coupling: Coupling) -> Result<T> {
    if !bundle.geometry.is_ideal_selector() {
        return Err(crate::error::Error::NonIdealSelectors);
    }
    Ok(averaged_capacity(&capacity_grid(bundle, coupling, &SamplingPlan::new(1, 0))?))
}
