//! Write and read biasing of the crossbar.
//!
//! Wordline drivers sit at the `col = 0` end and bitline sense/ground
//! terminals at the `row = 0` end, so the selected path of cell `(i, j)`
//! crosses `i` bitline and `j` wordline segments.

mod banded;
mod nodal;

pub use nodal::{selected_port, solve_kcl_grid, KclSolution, SelectedPort};

use crate::config::{ArrayGeometry, Resistance};
use crate::error::{Error, Result};
use crate::grid::{Cell, CellGrid};
use crate::scalar::Scalar;

/// Total line resistance on the selected path, `i r_b + j r_w`.
pub fn cumulative_line_resistance<T: Scalar>(cell: Cell, geometry: &ArrayGeometry<T>) -> Result<T> {
    geometry.check_cell(cell)?;
    Ok(line_load(cell, geometry))
}

#[inline]
pub(crate) fn line_load<T: Scalar>(cell: Cell, g: &ArrayGeometry<T>) -> T {
    T::from_count(cell.row) * g.bitline_r + T::from_count(cell.col) * g.wordline_r
}

fn require_ideal<T: Scalar>(g: &ArrayGeometry<T>) -> Result<()> {
    if g.is_ideal_selector() {
        Ok(())
    } else {
        Err(Error::NonIdealSelectors)
    }
}

/// Voltage delivered across a cell of resistance `previous` by a write
/// pulse of `write_voltage`, ideal selectors only.
pub fn effective_write_voltage_ideal<T: Scalar>(
    previous: T,
    cell: Cell,
    write_voltage: T,
    geometry: &ArrayGeometry<T>,
) -> Result<T> {
    require_ideal(geometry)?;
    geometry.check_cell(cell)?;
    Ok(divider(previous, line_load(cell, geometry), write_voltage))
}

#[inline]
pub(crate) fn divider<T: Scalar>(cell_r: T, series_r: T, v: T) -> T {
    if cell_r.is_infinite() {
        v
    } else {
        v * cell_r / (cell_r + series_r)
    }
}

/// Sensed bitline current for a selected cell of resistance `resistance`.
pub fn read_current_ideal<T: Scalar>(
    resistance: T,
    cell: Cell,
    read_voltage: T,
    geometry: &ArrayGeometry<T>,
) -> Result<T> {
    geometry.check_cell(cell)?;
    Ok(read_voltage / (line_load(cell, geometry) + resistance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasKind {
    WriteSet,
    WriteReset,
    Read,
}

/// Line biasing for one operation on a selected cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasScheme {
    pub kind: BiasKind,
    pub selected: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorRole {
    Full,
    Half,
    Unselected,
}

impl BiasScheme {
    pub fn read(selected: Cell) -> Self {
        BiasScheme { kind: BiasKind::Read, selected }
    }

    pub fn write_set(selected: Cell) -> Self {
        BiasScheme { kind: BiasKind::WriteSet, selected }
    }

    pub fn write_reset(selected: Cell) -> Self {
        BiasScheme { kind: BiasKind::WriteReset, selected }
    }

    pub fn is_write(&self) -> bool {
        !matches!(self.kind, BiasKind::Read)
    }

    /// Static role assignment from bias proximity. During reads every
    /// non-selected selector is treated as unselected.
    pub fn role(&self, cell: Cell) -> SelectorRole {
        if cell == self.selected {
            SelectorRole::Full
        } else if self.is_write() && (cell.row == self.selected.row || cell.col == self.selected.col) {
            SelectorRole::Half
        } else {
            SelectorRole::Unselected
        }
    }

    /// Driver voltage of wordline `row` (V/2 scheme for writes).
    pub fn wordline_voltage<T: Scalar>(&self, row: usize, v: T) -> T {
        match (row == self.selected.row, self.is_write()) {
            (true, _) => v,
            (false, true) => v * T::lit(0.5),
            (false, false) => T::zero(),
        }
    }

    /// Terminal voltage of bitline `col`.
    pub fn bitline_voltage<T: Scalar>(&self, col: usize, v: T) -> T {
        if col != self.selected.col && self.is_write() {
            v * T::lit(0.5)
        } else {
            T::zero()
        }
    }
}

/// Selector resistance for a role.
pub fn selector_resistance<T: Scalar>(role: SelectorRole, g: &ArrayGeometry<T>) -> Resistance<T> {
    match role {
        SelectorRole::Full => Resistance::Finite(g.selector_full),
        SelectorRole::Half => g.selector_half,
        SelectorRole::Unselected => g.selector_unselected,
    }
}

/// Memristor resistances of every cell (realization of the array state).
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceGrid<T> {
    pub cells: CellGrid<T>,
}

impl<T: Scalar> ResistanceGrid<T> {
    pub fn uniform(rows: usize, cols: usize, r: T) -> Self {
        ResistanceGrid { cells: CellGrid::from_fn(rows, cols, |_| r) }
    }

    pub fn with_cell(mut self, cell: Cell, r: T) -> Self {
        *self.cells.get_mut(cell) = r;
        self
    }

    pub fn roles(&self, bias: &BiasScheme) -> CellGrid<SelectorRole> {
        CellGrid::from_fn(self.cells.rows(), self.cells.cols(), |c| bias.role(c))
    }

    /// Memristor plus selector, infinite when the selector is open.
    pub fn branch_resistance(&self, cell: Cell, bias: &BiasScheme, g: &ArrayGeometry<T>) -> Resistance<T> {
        match selector_resistance(bias.role(cell), g) {
            Resistance::Infinite => Resistance::Infinite,
            Resistance::Finite(s) => Resistance::from_value(*self.cells.get(cell) + s),
        }
    }
}
