//! Write channel: probability that a write pulse fails to switch the cell,
//! marginalized over the resistance of the state being overwritten.

use std::collections::HashMap;

use serde::Serialize;

use crate::circuit::{divider, line_load, selected_port, BiasScheme, ResistanceGrid, SelectedPort};
use crate::config::{DeviceModel, ModelBundle, OperatingPoint};
use crate::error::{Error, Result};
use crate::grid::{Bit, Cell, CellGrid};
use crate::quadrature::{default_tolerance, expect_standard_normal};
use crate::scalar::{q_function, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchOp {
    /// HRS -> LRS, negative pulse.
    Set,
    /// LRS -> HRS, positive pulse.
    Reset,
}

impl SwitchOp {
    /// Stored state the operation has to leave.
    pub fn from_state(self) -> Bit {
        match self {
            SwitchOp::Set => Bit::Zero,
            SwitchOp::Reset => Bit::One,
        }
    }

    /// Operation needed to write `target`.
    pub fn writing(target: Bit) -> Self {
        match target {
            Bit::One => SwitchOp::Set,
            Bit::Zero => SwitchOp::Reset,
        }
    }

    pub fn voltage<T: Scalar>(self, op: &OperatingPoint<T>) -> T {
        match self {
            SwitchOp::Set => op.set_voltage,
            SwitchOp::Reset => op.reset_voltage,
        }
    }

    pub fn pulse<T: Scalar>(self, op: &OperatingPoint<T>) -> T {
        match self {
            SwitchOp::Set => op.set_pulse,
            SwitchOp::Reset => op.reset_pulse,
        }
    }
}

/// Median switching time in microseconds, `exp(alpha V + beta)` with `V`
/// signed.
pub fn median_switch_time<T: Scalar>(v_eff: T, op: SwitchOp, device: &DeviceModel<T>) -> T {
    let law = match op {
        SwitchOp::Set => &device.set,
        SwitchOp::Reset => &device.reset,
    };
    (law.slope * v_eff + law.intercept).exp()
}

/// How the selected cell sees the write driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WriteEnvironment<T> {
    /// Ideal selectors: a plain divider with the path line load.
    Ideal { load: T },
    /// Non-ideal selectors: Thevenin port of the array at unit drive, with
    /// the selected cell's own selector resistance.
    Port { unit: SelectedPort<T>, selector: T },
}

impl<T: Scalar> WriteEnvironment<T> {
    /// Environment of `cell`. Non-ideal arrays are solved with every other
    /// cell pinned at the prior mixture median resistance.
    pub fn for_cell(bundle: &ModelBundle<T>, cell: Cell) -> Result<Self> {
        let g = &bundle.geometry;
        g.check_cell(cell)?;
        if g.is_ideal_selector() {
            return Ok(WriteEnvironment::Ideal { load: line_load(cell, g) });
        }
        let background = ResistanceGrid::uniform(g.rows, g.cols, bundle.device.mixture_median_resistance());
        // set and reset share the same topology; the network is linear in the drive
        let unit = selected_port(g, &background, &BiasScheme::write_reset(cell), T::one())?;
        Ok(WriteEnvironment::Port { unit, selector: g.selector_full })
    }

    /// Voltage across a cell of resistance `r` under drive `v`.
    pub fn effective_voltage(&self, r: T, v: T) -> T {
        match *self {
            WriteEnvironment::Ideal { load } => divider(r, load, v),
            WriteEnvironment::Port { unit, selector } => unit.cell_voltage(r, selector) * v,
        }
    }
}

/// `P(t_sw > t_pulse)` for a cell whose previous resistance is `r_star`.
pub fn switch_fail_prob_given_resistance<T: Scalar>(
    r_star: T,
    cell: Cell,
    op: SwitchOp,
    bundle: &ModelBundle<T>,
) -> Result<T> {
    if !(r_star > T::zero()) {
        return Err(Error::Invalid { key: "r_star", message: format!("resistance {r_star} must be > 0") });
    }
    let env = WriteEnvironment::for_cell(bundle, cell)?;
    Ok(fail_given_resistance(&env, r_star, op, &bundle.device, &bundle.operating))
}

fn fail_given_resistance<T: Scalar>(
    env: &WriteEnvironment<T>,
    r: T,
    op: SwitchOp,
    device: &DeviceModel<T>,
    operating: &OperatingPoint<T>,
) -> T {
    let v = env.effective_voltage(r, op.voltage(operating));
    let law = match op {
        SwitchOp::Set => &device.set,
        SwitchOp::Reset => &device.reset,
    };
    let ln_tau = law.slope * v + law.intercept;
    q_function((op.pulse(operating).ln() - ln_tau) / law.ln_std)
}

/// Failure probabilities conditioned on the state mismatch, before the
/// prior is folded in: `reset = P(Y=1 | X=0, S*=1)`, `set = P(Y=0 | X=1, S*=0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalFailure<T: Scalar> {
    pub reset: T,
    pub set: T,
}

impl<T: Scalar> ConditionalFailure<T> {
    /// `(p1, p2)` for prior `q = P(state 0)`.
    pub fn with_prior(&self, q: T) -> (T, T) {
        ((T::one() - q) * self.reset, q * self.set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WriteChannelParams<T: Scalar> {
    pub cell: Cell,
    /// `P(Y=1, S*=1 | X=0)`: a reset was needed and failed.
    pub p1: T,
    /// `P(Y=0, S*=0 | X=1)`: a set was needed and failed.
    pub p2: T,
}

impl<T: Scalar> WriteChannelParams<T> {
    pub fn ber(&self) -> T {
        self.p1 + self.p2
    }
}

/// Conditional failures in a given environment, to quadrature tolerance `tol`.
pub fn conditional_failures_in<T: Scalar>(
    env: &WriteEnvironment<T>,
    device: &DeviceModel<T>,
    operating: &OperatingPoint<T>,
    tol: T,
) -> Result<ConditionalFailure<T>> {
    let marginal = |op: SwitchOp| {
        let (mu, sigma) = device.ln_resistance(op.from_state());
        expect_standard_normal(
            |u| fail_given_resistance(env, (mu + sigma * u).exp(), op, device, operating),
            tol,
        )
        .map(|e| e.value)
    };
    Ok(ConditionalFailure { reset: marginal(SwitchOp::Reset)?, set: marginal(SwitchOp::Set)? })
}

pub fn conditional_failures<T: Scalar>(cell: Cell, bundle: &ModelBundle<T>) -> Result<ConditionalFailure<T>> {
    let env = WriteEnvironment::for_cell(bundle, cell)?;
    conditional_failures_in(&env, &bundle.device, &bundle.operating, default_tolerance())
}

pub fn write_channel_params<T: Scalar>(cell: Cell, bundle: &ModelBundle<T>) -> Result<WriteChannelParams<T>> {
    let (p1, p2) = conditional_failures(cell, bundle)?.with_prior(bundle.device.prior_hrs);
    Ok(WriteChannelParams { cell, p1, p2 })
}

/// Conditional failures for every cell. Ideal arrays depend on the cell only
/// through its line load, so each distinct load is integrated once.
pub fn conditional_failure_grid<T: Scalar>(bundle: &ModelBundle<T>) -> Result<CellGrid<ConditionalFailure<T>>> {
    let g = &bundle.geometry;
    if g.is_ideal_selector() {
        let mut loads: Vec<u64> = CellGrid::from_fn(g.rows, g.cols, |c| line_load(c, g).as_f64().to_bits())
            .values()
            .to_vec();
        loads.sort_unstable();
        loads.dedup();
        let solved = parallel_try(&loads, |&bits| {
            let env = WriteEnvironment::Ideal { load: T::lit(f64::from_bits(bits)) };
            conditional_failures_in(&env, &bundle.device, &bundle.operating, default_tolerance())
        })?;
        let table: HashMap<u64, ConditionalFailure<T>> = loads.into_iter().zip(solved).collect();
        return Ok(CellGrid::from_fn(g.rows, g.cols, |c| table[&line_load(c, g).as_f64().to_bits()]));
    }
    let cells: Vec<Cell> = CellGrid::from_fn(g.rows, g.cols, |c| c).values().to_vec();
    let solved = parallel_try(&cells, |&c| conditional_failures(c, bundle))?;
    let mut it = solved.into_iter();
    Ok(CellGrid::from_fn(g.rows, g.cols, |_| it.next().expect("one result per cell")))
}

pub fn write_channel_grid<T: Scalar>(bundle: &ModelBundle<T>) -> Result<CellGrid<WriteChannelParams<T>>> {
    let q = bundle.device.prior_hrs;
    let cond = conditional_failure_grid(bundle)?;
    Ok(CellGrid::from_fn(cond.rows(), cond.cols(), |c| {
        let (p1, p2) = cond.get(c).with_prior(q);
        WriteChannelParams { cell: c, p1, p2 }
    }))
}

pub(crate) fn parallel_try<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> Result<O> + Sync + Send) -> Result<Vec<O>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Writing the value already stored always succeeds.
pub fn same_state_write(x: Bit, s_star: Bit) -> Result<Bit> {
    if x == s_star {
        Ok(x)
    } else {
        Err(Error::Invalid { key: "s_star", message: format!("stored {s_star:?} differs from input {x:?}") })
    }
}
