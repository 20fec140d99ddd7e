//! Model parameters: array geometry, device statistics and operating point,
//! plus the flat `key = value` configuration format.
//!
//! Units are fixed throughout the crate: ohms, volts, amperes and
//! microseconds. Configuration keys use the conventional symbol names
//! (`m`, `n`, `r_w`, `mu_L`, ...); the Rust fields are named by role.

use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{Bit, Cell};
use crate::scalar::{normal_cdf, Scalar};

/// Selector resistance; infinite is an explicit variant so the ideal-selector
/// branch is decided exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resistance<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Resistance<T> {
    pub fn from_value(x: T) -> Self {
        if x.is_infinite() && x > T::zero() {
            Resistance::Infinite
        } else {
            Resistance::Finite(x)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Resistance::Infinite)
    }

    /// Value as a float, `+inf` for the sentinel.
    pub fn value(&self) -> T {
        match *self {
            Resistance::Finite(x) => x,
            Resistance::Infinite => T::infinity(),
        }
    }

    /// Conductance; exactly zero for the sentinel.
    pub fn conductance(&self) -> T {
        match *self {
            Resistance::Finite(x) => x.recip(),
            Resistance::Infinite => T::zero(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Resistance<U> {
        match *self {
            Resistance::Finite(x) => Resistance::Finite(U::lit(x.as_f64())),
            Resistance::Infinite => Resistance::Infinite,
        }
    }
}

impl<T: Scalar> Serialize for Resistance<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Resistance::Finite(x) => s.serialize_f64(x.as_f64()),
            Resistance::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrayGeometry<T: Scalar> {
    /// Wordlines (m).
    pub rows: usize,
    /// Bitlines (n).
    pub cols: usize,
    /// Wordline resistance per junction.
    pub wordline_r: T,
    /// Bitline resistance per junction.
    pub bitline_r: T,
    pub selector_full: T,
    pub selector_half: Resistance<T>,
    pub selector_unselected: Resistance<T>,
}

impl<T: Scalar> ArrayGeometry<T> {
    /// Ideal-selector array with uniform line resistance.
    pub fn ideal(rows: usize, cols: usize, line_r: T) -> Self {
        ArrayGeometry {
            rows,
            cols,
            wordline_r: line_r,
            bitline_r: line_r,
            selector_full: T::zero(),
            selector_half: Resistance::Infinite,
            selector_unselected: Resistance::Infinite,
        }
    }

    pub fn is_ideal_selector(&self) -> bool {
        self.selector_full == T::zero()
            && self.selector_half.is_infinite()
            && self.selector_unselected.is_infinite()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (1..=self.rows).contains(&cell.row) && (1..=self.cols).contains(&cell.col)
    }

    pub fn check_cell(&self, cell: Cell) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(Error::CellOutOfRange { cell, rows: self.rows, cols: self.cols })
        }
    }

    /// Accumulated line resistance of the worst-case (far corner) cell.
    pub fn max_line_load(&self) -> T {
        T::from_count(self.rows) * self.bitline_r + T::from_count(self.cols) * self.wordline_r
    }

    pub fn with_size(mut self, rows: usize, cols: usize) -> Self {
        self.rows = rows;
        self.cols = cols;
        self
    }

    pub fn with_line_resistance(mut self, r: T) -> Self {
        self.wordline_r = r;
        self.bitline_r = r;
        self
    }

    pub fn cast<U: Scalar>(&self) -> ArrayGeometry<U> {
        ArrayGeometry {
            rows: self.rows,
            cols: self.cols,
            wordline_r: U::lit(self.wordline_r.as_f64()),
            bitline_r: U::lit(self.bitline_r.as_f64()),
            selector_full: U::lit(self.selector_full.as_f64()),
            selector_half: self.selector_half.cast(),
            selector_unselected: self.selector_unselected.cast(),
        }
    }
}

/// Median parameterization of a log-normal switching time:
/// `ln(median) = slope * V + intercept`, median in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingLaw<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    /// Standard deviation of ln(switching time).
    pub ln_std: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceModel<T: Scalar> {
    pub lrs_ln_mean: T,
    pub hrs_ln_mean: T,
    pub lrs_ln_std: T,
    pub hrs_ln_std: T,
    pub set: SwitchingLaw<T>,
    pub reset: SwitchingLaw<T>,
    /// Prior probability of state 0 (HRS).
    pub prior_hrs: T,
}

impl<T: Scalar> DeviceModel<T> {
    /// (mean, std) of ln R for a stored state.
    pub fn ln_resistance(&self, state: Bit) -> (T, T) {
        match state {
            Bit::Zero => (self.hrs_ln_mean, self.hrs_ln_std),
            Bit::One => (self.lrs_ln_mean, self.lrs_ln_std),
        }
    }

    pub fn median_resistance(&self, state: Bit) -> T {
        self.ln_resistance(state).0.exp()
    }

    /// Median of the prior mixture of cell resistances, used to pin
    /// background cells in deterministic non-ideal solves.
    pub fn mixture_median_resistance(&self) -> T {
        let q = self.prior_hrs;
        let cdf = |x: T| {
            q * normal_cdf((x - self.hrs_ln_mean) / self.hrs_ln_std)
                + (T::one() - q) * normal_cdf((x - self.lrs_ln_mean) / self.lrs_ln_std)
        };
        let ten = T::lit(10.0);
        let mut lo = self.lrs_ln_mean.min(self.hrs_ln_mean) - ten * self.lrs_ln_std.max(self.hrs_ln_std);
        let mut hi = self.lrs_ln_mean.max(self.hrs_ln_mean) + ten * self.lrs_ln_std.max(self.hrs_ln_std);
        let half = T::lit(0.5);
        for _ in 0..200 {
            let mid = half * (lo + hi);
            if cdf(mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * mid.abs().max(T::one()) {
                break;
            }
        }
        (half * (lo + hi)).exp()
    }

    pub fn cast<U: Scalar>(&self) -> DeviceModel<U> {
        let c = |x: T| U::lit(x.as_f64());
        let law = |l: &SwitchingLaw<T>| SwitchingLaw { slope: c(l.slope), intercept: c(l.intercept), ln_std: c(l.ln_std) };
        DeviceModel {
            lrs_ln_mean: c(self.lrs_ln_mean),
            hrs_ln_mean: c(self.hrs_ln_mean),
            lrs_ln_std: c(self.lrs_ln_std),
            hrs_ln_std: c(self.hrs_ln_std),
            set: law(&self.set),
            reset: law(&self.reset),
            prior_hrs: c(self.prior_hrs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint<T: Scalar> {
    /// Negative (set switches HRS -> LRS).
    pub set_voltage: T,
    pub reset_voltage: T,
    pub read_voltage: T,
    pub set_pulse: T,
    pub reset_pulse: T,
    pub threshold_current: T,
}

impl<T: Scalar> OperatingPoint<T> {
    /// Read threshold in the resistance domain, `V_r / I_th`.
    pub fn threshold_resistance(&self) -> T {
        self.read_voltage / self.threshold_current
    }

    pub fn cast<U: Scalar>(&self) -> OperatingPoint<U> {
        let c = |x: T| U::lit(x.as_f64());
        OperatingPoint {
            set_voltage: c(self.set_voltage),
            reset_voltage: c(self.reset_voltage),
            read_voltage: c(self.read_voltage),
            set_pulse: c(self.set_pulse),
            reset_pulse: c(self.reset_pulse),
            threshold_current: c(self.threshold_current),
        }
    }
}

/// Complete parameter set for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelBundle<T: Scalar> {
    pub geometry: ArrayGeometry<T>,
    pub device: DeviceModel<T>,
    pub operating: OperatingPoint<T>,
}

impl<T: Scalar> ModelBundle<T> {
    /// Reference parameter set: 1024 x 1024 array, 10 ohm lines, ideal
    /// selectors, log-normal states one decade either side of 100 kohm.
    pub fn reference() -> Self {
        let ln10 = T::LN_10();
        let law = |slope: f64| SwitchingLaw { slope: T::lit(slope), intercept: T::lit(4.25), ln_std: T::lit(0.5) };
        ModelBundle {
            geometry: ArrayGeometry::ideal(1024, 1024, T::lit(10.0)),
            device: DeviceModel {
                lrs_ln_mean: T::lit(4.0) * ln10,
                hrs_ln_mean: T::lit(6.0) * ln10,
                lrs_ln_std: T::lit(0.3) * ln10,
                hrs_ln_std: T::lit(0.3) * ln10,
                set: law(0.25),
                reset: law(-0.25),
                prior_hrs: T::lit(0.5),
            },
            operating: OperatingPoint {
                set_voltage: T::lit(-5.0),
                reset_voltage: T::lit(5.0),
                read_voltage: T::lit(3.0),
                set_pulse: T::lit(100.0),
                reset_pulse: T::lit(100.0),
                threshold_current: T::lit(30e-6),
            },
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.geometry, &self.device, &self.operating)
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Violations(v))
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelBundle<U> {
        ModelBundle {
            geometry: self.geometry.cast(),
            device: self.device.cast(),
            operating: self.operating.cast(),
        }
    }
}

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Returns every violated invariant; empty when the bundle is consistent.
pub fn validate<T: Scalar>(
    geometry: &ArrayGeometry<T>,
    device: &DeviceModel<T>,
    operating: &OperatingPoint<T>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, key: &'static str, message: &str| {
        if !ok {
            out.push(Violation { key, message: message.to_owned() });
        }
    };
    let zero = T::zero();
    let finite = |x: T| x.is_finite();

    check(geometry.rows >= 1, "m", "m ≥ 1");
    check(geometry.cols >= 1, "n", "n ≥ 1");
    check(finite(geometry.wordline_r) && geometry.wordline_r >= zero, "r_w", "finite and ≥ 0");
    check(finite(geometry.bitline_r) && geometry.bitline_r >= zero, "r_b", "finite and ≥ 0");
    check(finite(geometry.selector_full) && geometry.selector_full >= zero, "r_sf", "finite and ≥ 0");
    let half = geometry.selector_half.value();
    let unsel = geometry.selector_unselected.value();
    check(!half.is_nan() && half > zero, "r_sh", "> 0 or inf");
    check(!unsel.is_nan() && unsel > zero, "r_su", "> 0 or inf");
    check(geometry.selector_full <= half, "r_sh", "selector ordering r_sf ≤ r_sh violated");
    check(half <= unsel, "r_su", "selector ordering r_sh ≤ r_su violated");

    check(finite(device.lrs_ln_mean), "mu_L", "finite");
    check(finite(device.hrs_ln_mean), "mu_H", "finite");
    check(device.hrs_ln_mean > device.lrs_ln_mean, "mu_H", "mu_H > mu_L");
    for (key, s) in [
        ("sigma_L", device.lrs_ln_std),
        ("sigma_H", device.hrs_ln_std),
        ("sigma_set", device.set.ln_std),
        ("sigma_reset", device.reset.ln_std),
    ] {
        check(finite(s) && s > zero, key, "finite and > 0");
    }
    for (key, x) in [
        ("alpha_set", device.set.slope),
        ("beta_set", device.set.intercept),
        ("alpha_reset", device.reset.slope),
        ("beta_reset", device.reset.intercept),
    ] {
        check(finite(x), key, "finite");
    }
    check(device.prior_hrs >= zero && device.prior_hrs <= T::one(), "q", "0 ≤ q ≤ 1");

    check(finite(operating.set_voltage) && operating.set_voltage < zero, "V_w_set", "finite and < 0");
    check(finite(operating.reset_voltage) && operating.reset_voltage > zero, "V_w_reset", "finite and > 0");
    check(finite(operating.read_voltage) && operating.read_voltage > zero, "V_r", "finite and > 0");
    check(finite(operating.set_pulse) && operating.set_pulse > zero, "t_set", "finite and > 0");
    check(finite(operating.reset_pulse) && operating.reset_pulse > zero, "t_reset", "finite and > 0");
    check(finite(operating.threshold_current) && operating.threshold_current > zero, "I_th", "finite and > 0");
    out
}

/// Configuration keys in file order.
pub const KEYS: [&str; 24] = [
    "m", "n", "r_w", "r_b", "r_sf", "r_sh", "r_su", "V_w_set", "V_w_reset", "V_r", "q", "mu_L", "mu_H",
    "sigma_L", "sigma_H", "alpha_set", "beta_set", "alpha_reset", "beta_reset", "sigma_set",
    "sigma_reset", "t_set", "t_reset", "I_th",
];

/// Reads a configuration file; missing keys keep their reference values.
pub fn load_config(path: impl AsRef<Path>) -> Result<ModelBundle<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ModelBundle<f64>> {
    let mut bundle = ModelBundle::<f64>::reference();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(parse_err(format!("unknown key `{key}`")));
        };
        if !seen.insert(key) {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
        set_key(&mut bundle, key, value).map_err(parse_err)?;
    }
    bundle.validated()
}

fn set_key(b: &mut ModelBundle<f64>, key: &str, value: &str) -> std::result::Result<(), String> {
    let count = || value.parse::<usize>().map_err(|e| format!("`{key}`: {e}"));
    let number = || value.parse::<f64>().map_err(|e| format!("`{key}`: {e}"));
    let (g, d, o) = (&mut b.geometry, &mut b.device, &mut b.operating);
    match key {
        "m" => g.rows = count()?,
        "n" => g.cols = count()?,
        "r_w" => g.wordline_r = number()?,
        "r_b" => g.bitline_r = number()?,
        "r_sf" => g.selector_full = number()?,
        "r_sh" => g.selector_half = Resistance::from_value(number()?),
        "r_su" => g.selector_unselected = Resistance::from_value(number()?),
        "V_w_set" => o.set_voltage = number()?,
        "V_w_reset" => o.reset_voltage = number()?,
        "V_r" => o.read_voltage = number()?,
        "q" => d.prior_hrs = number()?,
        "mu_L" => d.lrs_ln_mean = number()?,
        "mu_H" => d.hrs_ln_mean = number()?,
        "sigma_L" => d.lrs_ln_std = number()?,
        "sigma_H" => d.hrs_ln_std = number()?,
        "alpha_set" => d.set.slope = number()?,
        "beta_set" => d.set.intercept = number()?,
        "alpha_reset" => d.reset.slope = number()?,
        "beta_reset" => d.reset.intercept = number()?,
        "sigma_set" => d.set.ln_std = number()?,
        "sigma_reset" => d.reset.ln_std = number()?,
        "t_set" => o.set_pulse = number()?,
        "t_reset" => o.reset_pulse = number()?,
        "I_th" => o.threshold_current = number()?,
        _ => unreachable!("key list and setter out of sync: {key}"),
    }
    Ok(())
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Serializes every key, defaults included.
pub fn render_config(b: &ModelBundle<f64>) -> String {
    let (g, d, o) = (&b.geometry, &b.device, &b.operating);
    let mut s = String::from("# crossbar channel model parameters\n");
    let mut put = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    put("m", g.rows.to_string());
    put("n", g.cols.to_string());
    for (k, v) in [
        ("r_w", g.wordline_r),
        ("r_b", g.bitline_r),
        ("r_sf", g.selector_full),
        ("r_sh", g.selector_half.value()),
        ("r_su", g.selector_unselected.value()),
        ("V_w_set", o.set_voltage),
        ("V_w_reset", o.reset_voltage),
        ("V_r", o.read_voltage),
        ("q", d.prior_hrs),
        ("mu_L", d.lrs_ln_mean),
        ("mu_H", d.hrs_ln_mean),
        ("sigma_L", d.lrs_ln_std),
        ("sigma_H", d.hrs_ln_std),
        ("alpha_set", d.set.slope),
        ("beta_set", d.set.intercept),
        ("alpha_reset", d.reset.slope),
        ("beta_reset", d.reset.intercept),
        ("sigma_set", d.set.ln_std),
        ("sigma_reset", d.reset.ln_std),
        ("t_set", o.set_pulse),
        ("t_reset", o.reset_pulse),
        ("I_th", o.threshold_current),
    ] {
        put(k, format_f64(v));
    }
    s
}

pub fn save_config(path: impl AsRef<Path>, b: &ModelBundle<f64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_config(b)).map_err(|e| Error::io(path, e))
}
