//! Direct simulation of write and read operations, used as ground truth for
//! the analytic channel parameters.
//!
//! Every (seed, cell, operation) triple owns a ChaCha stream; samples are
//! drawn in fixed-size chunks, each on its own stream index, so results do
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{line_load, solve_kcl_grid, BiasScheme, ResistanceGrid};
use crate::config::ModelBundle;
use crate::error::{Error, Result};
use crate::grid::{Bit, Cell};
use crate::read_channel::detect;
use crate::scalar::Scalar;
use crate::write_channel::{median_switch_time, SwitchOp, WriteEnvironment};

const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Confidence {
    P99,
    P997,
}

impl Confidence {
    /// Two-sided standard normal quantile.
    pub fn z(self) -> f64 {
        match self {
            Confidence::P99 => 2.5758293035489004,
            Confidence::P997 => 2.9677379253417944,
        }
    }

    pub fn level(self) -> f64 {
        match self {
            Confidence::P99 => 0.99,
            Confidence::P997 => 0.997,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingPlan {
    /// Samples per estimate (the budget for adaptive estimates).
    pub samples: u64,
    pub seed: u64,
    pub confidence: Confidence,
    /// Target CI half-width for adaptive estimates.
    pub tolerance: f64,
}

impl SamplingPlan {
    pub fn new(samples: u64, seed: u64) -> Self {
        SamplingPlan { samples, seed, confidence: Confidence::P997, tolerance: 1e-3 }
    }

    pub fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Invalid { key: "samples", message: "need at least one sample".into() });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid { key: "tolerance", message: format!("{} must be > 0", self.tolerance) });
        }
        Ok(())
    }
}

/// Empirical failure rate with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialEstimate {
    pub failures: u64,
    pub samples: u64,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BinomialEstimate {
    pub fn wilson(failures: u64, samples: u64, confidence: Confidence) -> Self {
        let n = samples as f64;
        let p = failures as f64 / n;
        let z = confidence.z();
        let z2n = z * z / n;
        let center = (p + 0.5 * z2n) / (1.0 + z2n);
        let half = z * (p * (1.0 - p) / n + 0.25 * z2n / n).sqrt() / (1.0 + z2n);
        BinomialEstimate {
            failures,
            samples,
            rate: p,
            lower: (center - half).max(0.0),
            upper: (center + half).min(1.0),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Operation tags that key the substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTag {
    Write(Bit),
    Read(Bit),
}

impl OpTag {
    fn code(self) -> u64 {
        match self {
            OpTag::Write(Bit::Zero) => 1,
            OpTag::Write(Bit::One) => 2,
            OpTag::Read(Bit::Zero) => 3,
            OpTag::Read(Bit::One) => 4,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream key of one (seed, cell, operation).
pub fn substream_key(seed: u64, cell: Cell, tag: OpTag) -> u64 {
    let mut h = splitmix64(seed);
    for v in [cell.row as u64, cell.col as u64, tag.code()] {
        h = splitmix64(h ^ v);
    }
    h
}

fn chunk_rng(key: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(chunk);
    rng
}

fn count_chunk(key: u64, chunk: u64, size: u64, trial: &(impl Fn(&mut ChaCha8Rng) -> bool + Sync)) -> u64 {
    let mut rng = chunk_rng(key, chunk);
    (0..size).filter(|_| trial(&mut rng)).count() as u64
}

fn chunk_sizes(from: u64, samples: u64, chunk: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let chunks = samples.div_ceil(chunk);
    (0..chunks).into_par_iter().map(move |k| (from + k, chunk.min(samples - k * chunk)))
}

/// Runs `samples` Bernoulli trials on the stream `key`.
pub fn run_trials(
    key: u64,
    samples: u64,
    confidence: Confidence,
    trial: impl Fn(&mut ChaCha8Rng) -> bool + Sync,
) -> BinomialEstimate {
    let failures = chunk_sizes(0, samples, CHUNK).map(|(k, n)| count_chunk(key, k, n, &trial)).sum();
    BinomialEstimate::wilson(failures, samples, confidence)
}

/// Samples in rounds of `round` trials until the 99% half-width drops below
/// `tolerance` or `budget` trials are spent.
pub fn run_until(
    key: u64,
    round: u64,
    budget: u64,
    tolerance: f64,
    trial: impl Fn(&mut ChaCha8Rng) -> bool + Sync,
) -> Result<BinomialEstimate> {
    let chunk = round.clamp(1, CHUNK);
    let round = round.max(1).div_ceil(chunk) * chunk;
    let (mut failures, mut samples) = (0, 0);
    loop {
        let n = round.min(budget - samples);
        failures += chunk_sizes(samples / chunk, n, chunk)
            .map(|(k, size)| count_chunk(key, k, size, &trial))
            .sum::<u64>();
        samples += n;
        let est = BinomialEstimate::wilson(failures, samples, Confidence::P99);
        if est.half_width() <= tolerance {
            return Ok(est);
        }
        if samples >= budget {
            return Err(Error::SampleBudgetExhausted { budget, half_width: est.half_width(), tolerance });
        }
    }
}

pub(crate) fn lognormal<T: Scalar>(rng: &mut impl Rng, mu: T, sigma: T) -> T {
    (mu + sigma * T::standard_normal(rng)).exp()
}

/// `P(Y != X)` for writing `x` into `cell`, by sampling the stored state,
/// its resistance and the switching time.
pub fn simulate_write<T: Scalar>(cell: Cell, x: Bit, plan: &SamplingPlan, bundle: &ModelBundle<T>) -> Result<BinomialEstimate> {
    plan.check()?;
    let env = WriteEnvironment::for_cell(bundle, cell)?;
    let (d, o) = (&bundle.device, &bundle.operating);
    let op = SwitchOp::writing(x);
    let law = match op {
        SwitchOp::Set => d.set,
        SwitchOp::Reset => d.reset,
    };
    let (mu, sigma) = d.ln_resistance(op.from_state());
    let (v, pulse) = (op.voltage(o), op.pulse(o));
    let q = d.prior_hrs.as_f64();
    let key = substream_key(plan.seed, cell, OpTag::Write(x));
    Ok(run_trials(key, plan.samples, plan.confidence, |rng| {
        let s_star = if rng.random::<f64>() < q { Bit::Zero } else { Bit::One };
        if s_star == x {
            return false;
        }
        let r = lognormal(rng, mu, sigma);
        let tau = median_switch_time(env.effective_voltage(r, v), op, d);
        let t_sw = lognormal(rng, tau.ln(), law.ln_std);
        t_sw > pulse
    }))
}

/// Sensed-current model used when simulating reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReadMode {
    /// Series path only, ideal selectors.
    Ideal,
    /// Full nodal solve with every background cell drawn from the prior.
    General,
}

fn read_trial<T: Scalar>(
    cell: Cell,
    y: Bit,
    mode: ReadMode,
    bundle: &ModelBundle<T>,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let (g, d, o) = (&bundle.geometry, &bundle.device, &bundle.operating);
    let (mu, sigma) = d.ln_resistance(y);
    let r = lognormal(rng, mu, sigma);
    let current = match mode {
        ReadMode::Ideal => o.read_voltage / (line_load(cell, g) + r),
        ReadMode::General => {
            let q = d.prior_hrs.as_f64();
            let mut grid = ResistanceGrid::uniform(g.rows, g.cols, T::one());
            for i in 1..=g.rows {
                for j in 1..=g.cols {
                    let c = Cell::new(i, j);
                    let v = if c == cell {
                        r
                    } else {
                        let s = if rng.random::<f64>() < q { Bit::Zero } else { Bit::One };
                        let (m, s) = d.ln_resistance(s);
                        lognormal(rng, m, s)
                    };
                    *grid.cells.get_mut(c) = v;
                }
            }
            solve_kcl_grid(g, &grid, &BiasScheme::read(cell), o.read_voltage)?.sensed_current
        }
    };
    Ok(detect(current, o.threshold_current) != y)
}

fn check_read_mode<T: Scalar>(cell: Cell, mode: ReadMode, bundle: &ModelBundle<T>) -> Result<()> {
    bundle.geometry.check_cell(cell)?;
    if mode == ReadMode::Ideal && !bundle.geometry.is_ideal_selector() {
        return Err(Error::NonIdealSelectors);
    }
    Ok(())
}

/// `P(Z != Y)` for reading a cell that holds `y`.
pub fn simulate_read<T: Scalar>(
    cell: Cell,
    y: Bit,
    plan: &SamplingPlan,
    bundle: &ModelBundle<T>,
    mode: ReadMode,
) -> Result<BinomialEstimate> {
    plan.check()?;
    check_read_mode(cell, mode, bundle)?;
    if mode == ReadMode::General {
        // surface circuit errors before sampling
        solve_kcl_grid(
            &bundle.geometry,
            &ResistanceGrid::uniform(bundle.geometry.rows, bundle.geometry.cols, bundle.device.median_resistance(y)),
            &BiasScheme::read(cell),
            bundle.operating.read_voltage,
        )?;
    }
    let key = substream_key(plan.seed, cell, OpTag::Read(y));
    Ok(run_trials(key, plan.samples, plan.confidence, |rng| {
        read_trial(cell, y, mode, bundle, rng).expect("validated read circuit")
    }))
}

/// Adaptive read error estimate at 99% confidence: stops once the
/// half-width reaches `plan.tolerance`, fails after `plan.samples` draws.
pub fn simulate_read_to_tolerance<T: Scalar>(
    cell: Cell,
    y: Bit,
    plan: &SamplingPlan,
    bundle: &ModelBundle<T>,
    mode: ReadMode,
) -> Result<BinomialEstimate> {
    plan.check()?;
    check_read_mode(cell, mode, bundle)?;
    let key = substream_key(plan.seed, cell, OpTag::Read(y));
    let round = 4096.min(plan.samples);
    let failed = std::sync::OnceLock::new();
    let est = run_until(key, round, plan.samples, plan.tolerance, |rng| {
        read_trial(cell, y, mode, bundle, rng).unwrap_or_else(|e| {
            let _ = failed.set(e);
            false
        })
    });
    if let Some(e) = failed.into_inner() {
        return Err(e);
    }
    est
}

/// Empirical counterparts of the four channel parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalBac {
    pub cell: Cell,
    pub p1: BinomialEstimate,
    pub p2: BinomialEstimate,
    pub p3: BinomialEstimate,
    pub p4: BinomialEstimate,
}

pub fn estimate_channel_grid<T: Scalar>(
    cells: &[Cell],
    plan: &SamplingPlan,
    bundle: &ModelBundle<T>,
    mode: ReadMode,
) -> Result<Vec<EmpiricalBac>> {
    for &c in cells {
        bundle.geometry.check_cell(c)?;
    }
    cells
        .iter()
        .map(|&cell| {
            Ok(EmpiricalBac {
                cell,
                p1: simulate_write(cell, Bit::Zero, plan, bundle)?,
                p2: simulate_write(cell, Bit::One, plan, bundle)?,
                p3: simulate_read(cell, Bit::Zero, plan, bundle, mode)?,
                p4: simulate_read(cell, Bit::One, plan, bundle, mode)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_known_values() {
        // 10 of 100 at z = 2.5758: statsmodels proportion_confint(method="wilson")
        let e = BinomialEstimate::wilson(10, 100, Confidence::P99);
        assert!((e.lower - 0.04602581170103505).abs() < 1e-12, "{}", e.lower);
        assert!((e.upper - 0.2037507384716234).abs() < 1e-12, "{}", e.upper);
        let zero = BinomialEstimate::wilson(0, 1, Confidence::P997);
        assert_eq!(zero.lower, 0.0);
        assert!(zero.upper > 0.8);
    }

    #[test]
    fn substreams_differ_per_key() {
        let a = substream_key(7, Cell::new(1, 2), OpTag::Write(Bit::Zero));
        let b = substream_key(7, Cell::new(2, 1), OpTag::Write(Bit::Zero));
        let c = substream_key(7, Cell::new(1, 2), OpTag::Read(Bit::Zero));
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn single_sample_is_zero_or_one() {
        let b = ModelBundle::<f64>::reference();
        let e = simulate_write(Cell::new(1024, 1024), Bit::Zero, &SamplingPlan::new(1, 3), &b).unwrap();
        assert!(e.rate == 0.0 || e.rate == 1.0);
    }

    #[test]
    fn prior_matching_input_never_fails() {
        let mut b = ModelBundle::<f64>::reference();
        b.device.prior_hrs = 1.0;
        let e = simulate_write(Cell::new(1024, 1024), Bit::Zero, &SamplingPlan::new(10_000, 3), &b).unwrap();
        assert_eq!(e.failures, 0);
    }

    #[test]
    fn zero_read_voltage_reads_zero() {
        let mut b = ModelBundle::<f64>::reference();
        b.operating.read_voltage = 0.0;
        let plan = SamplingPlan::new(1000, 1);
        let one = simulate_read(Cell::new(3, 3), Bit::One, &plan, &b, ReadMode::Ideal).unwrap();
        let zero = simulate_read(Cell::new(3, 3), Bit::Zero, &plan, &b, ReadMode::Ideal).unwrap();
        assert_eq!(one.rate, 1.0);
        assert_eq!(zero.rate, 0.0);
    }

    #[test]
    fn adaptive_estimate_reports_budget() {
        let b = ModelBundle::<f64>::reference();
        let mut plan = SamplingPlan::new(5000, 1);
        plan.tolerance = 1e-6;
        let e = simulate_read_to_tolerance(Cell::new(1024, 1024), Bit::One, &plan, &b, ReadMode::Ideal);
        assert!(matches!(e, Err(Error::SampleBudgetExhausted { budget: 5000, .. })));
        plan.tolerance = 0.05;
        let e = simulate_read_to_tolerance(Cell::new(1024, 1024), Bit::One, &plan, &b, ReadMode::Ideal).unwrap();
        assert!(e.half_width() <= 0.05);
    }
}
