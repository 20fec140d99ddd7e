//! Read channel of a threshold detector on the sensed bitline current.

use serde::Serialize;

use crate::circuit::line_load;
use crate::config::{ArrayGeometry, DeviceModel, ModelBundle};
use crate::error::{Error, Result};
use crate::grid::{Bit, Cell, CellGrid};
use crate::monte_carlo::{simulate_read_to_tolerance, BinomialEstimate, ReadMode, SamplingPlan};
use crate::scalar::{q_function, Scalar};

/// Threshold detector; a current exactly at threshold reads as 0.
pub fn detect<T: Scalar>(current: T, threshold: T) -> Bit {
    if current <= threshold {
        Bit::Zero
    } else {
        Bit::One
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadChannelParams<T: Scalar> {
    pub cell: Cell,
    /// `P(Z=1 | Y=0)`: an HRS cell read as LRS.
    pub p3: T,
    /// `P(Z=0 | Y=1)`: an LRS cell read as HRS.
    pub p4: T,
    /// Resistance-domain threshold `V_r / I_th`.
    pub r_th: T,
}

impl<T: Scalar> ReadChannelParams<T> {
    /// Prior-weighted read error `q p3 + (1-q) p4`.
    pub fn ber(&self, q: T) -> T {
        q * self.p3 + (T::one() - q) * self.p4
    }
}

/// Error probabilities for a series path with `load` ohms of line resistance.
pub fn read_errors_for_load<T: Scalar>(load: T, r_th: T, device: &DeviceModel<T>) -> (T, T) {
    let d = r_th - load;
    if !(d > T::zero()) {
        return (T::zero(), T::one());
    }
    let ln_d = d.ln();
    (
        q_function((device.hrs_ln_mean - ln_d) / device.hrs_ln_std),
        q_function((ln_d - device.lrs_ln_mean) / device.lrs_ln_std),
    )
}

/// Closed-form read channel under ideal selectors.
pub fn read_channel_params_ideal<T: Scalar>(
    cell: Cell,
    r_th: T,
    geometry: &ArrayGeometry<T>,
    device: &DeviceModel<T>,
) -> Result<ReadChannelParams<T>> {
    geometry.check_cell(cell)?;
    if !geometry.is_ideal_selector() {
        return Err(Error::NonIdealSelectors);
    }
    let (p3, p4) = read_errors_for_load(line_load(cell, geometry), r_th, device);
    Ok(ReadChannelParams { cell, p3, p4, r_th })
}

pub fn read_channel_grid_ideal<T: Scalar>(
    r_th: T,
    geometry: &ArrayGeometry<T>,
    device: &DeviceModel<T>,
) -> Result<CellGrid<ReadChannelParams<T>>> {
    if !geometry.is_ideal_selector() {
        return Err(Error::NonIdealSelectors);
    }
    Ok(CellGrid::par_from_fn(geometry.rows, geometry.cols, |c| {
        let (p3, p4) = read_errors_for_load(line_load(c, geometry), r_th, device);
        ReadChannelParams { cell: c, p3, p4, r_th }
    }))
}

/// Sampled read channel with sneak paths, plus the estimates behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralRead<T: Scalar> {
    pub params: ReadChannelParams<T>,
    pub p3: BinomialEstimate,
    pub p4: BinomialEstimate,
}

/// Read channel from full nodal solves with randomly drawn background
/// cells, sampled until both 99% half-widths reach `plan.tolerance`.
pub fn read_channel_params_general<T: Scalar>(
    cell: Cell,
    bundle: &ModelBundle<T>,
    plan: &SamplingPlan,
) -> Result<GeneralRead<T>> {
    let p3 = simulate_read_to_tolerance(cell, Bit::Zero, plan, bundle, ReadMode::General)?;
    let p4 = simulate_read_to_tolerance(cell, Bit::One, plan, bundle, ReadMode::General)?;
    Ok(GeneralRead {
        params: ReadChannelParams {
            cell,
            p3: T::lit(p3.rate),
            p4: T::lit(p4.rate),
            r_th: bundle.operating.threshold_resistance(),
        },
        p3,
        p4,
    })
}

/// Ideal closed form when the selectors allow it, sampling otherwise.
pub fn read_channel_params<T: Scalar>(
    cell: Cell,
    bundle: &ModelBundle<T>,
    plan: &SamplingPlan,
) -> Result<ReadChannelParams<T>> {
    if bundle.geometry.is_ideal_selector() {
        read_channel_params_ideal(cell, bundle.operating.threshold_resistance(), &bundle.geometry, &bundle.device)
    } else {
        Ok(read_channel_params_general(cell, bundle, plan)?.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_boundary() {
        assert_eq!(detect(30e-6, 30e-6), Bit::Zero);
        assert_eq!(detect(299.4e-6, 30e-6), Bit::One);
        assert_eq!(detect(3e-6, 30e-6), Bit::Zero);
    }

    #[test]
    fn closed_form_examples() {
        let b = ModelBundle::<f64>::reference();
        let r_th = b.operating.threshold_resistance();
        assert!((r_th - 1e5).abs() < 1e-9);
        for (cell, p3, p4) in [
            (Cell::new(1024, 1024), 0.00012363123806937015, 0.0013428774173428327),
            (Cell::new(1, 1), 0.00042861396848769987, 0.000429507128943106),
            (Cell::new(1, 1024), 0.00024161409364945152, 0.0007445958735594906),
        ] {
            let r = read_channel_params_ideal(cell, r_th, &b.geometry, &b.device).unwrap();
            assert!((r.p3 / p3 - 1.0).abs() < 1e-10, "{cell} p3 {}", r.p3);
            assert!((r.p4 / p4 - 1.0).abs() < 1e-10, "{cell} p4 {}", r.p4);
        }
    }

    #[test]
    fn symmetric_midpoint() {
        let b = ModelBundle::<f64>::reference();
        let (p3, p4) = read_errors_for_load(0.0, 1e5, &b.device);
        assert!((p3 - p4).abs() < 1e-15);
        assert!((p3 - 0.00042906033319683426).abs() < 1e-15);
    }

    #[test]
    fn load_at_or_above_threshold() {
        let b = ModelBundle::<f64>::reference();
        assert_eq!(read_errors_for_load(1e5, 1e5, &b.device), (0.0, 1.0));
        assert_eq!(read_errors_for_load(2e5, 1e5, &b.device), (0.0, 1.0));
        let g = ArrayGeometry::ideal(4000, 4000, 30.0);
        let r = read_channel_params_ideal(Cell::new(4000, 4000), 1e5, &g, &b.device).unwrap();
        assert_eq!(r.p4, 1.0);
    }

    #[test]
    fn ideal_rejects_non_ideal_geometry() {
        let b = ModelBundle::<f64>::reference();
        let mut g = ArrayGeometry::ideal(4, 4, 10.0);
        g.selector_unselected = crate::config::Resistance::Finite(1e6);
        assert!(matches!(
            read_channel_params_ideal(Cell::new(1, 1), 1e5, &g, &b.device),
            Err(Error::NonIdealSelectors)
        ));
    }
}
