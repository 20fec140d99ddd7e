//! Cell addressing and per-cell value grids.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

/// A crosspoint, 1-based. `row` counts bitline junctions to the sense end,
/// `col` counts wordline junctions to the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Binary stored/intended state. `Zero` is HRS, `One` is LRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

/// Row-major m x n grid of per-cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid<V> {
    rows: usize,
    cols: usize,
    data: Vec<V>,
}

impl<V> CellGrid<V> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(Cell) -> V) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 1..=rows {
            for j in 1..=cols {
                data.push(f(Cell::new(i, j)));
            }
        }
        CellGrid { rows, cols, data }
    }

    /// Parallel construction; the result is independent of scheduling.
    pub fn par_from_fn(rows: usize, cols: usize, f: impl Fn(Cell) -> V + Sync + Send) -> Self
    where
        V: Send,
    {
        let data = (0..rows * cols)
            .into_par_iter()
            .map(|k| f(Cell::new(k / cols + 1, k % cols + 1)))
            .collect();
        CellGrid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, cell: Cell) -> usize {
        assert!(
            (1..=self.rows).contains(&cell.row) && (1..=self.cols).contains(&cell.col),
            "cell {cell} outside {}x{} grid",
            self.rows,
            self.cols
        );
        (cell.row - 1) * self.cols + (cell.col - 1)
    }

    pub fn get(&self, cell: Cell) -> &V {
        &self.data[self.offset(cell)]
    }

    pub fn get_mut(&mut self, cell: Cell) -> &mut V {
        let k = self.offset(cell);
        &mut self.data[k]
    }

    /// Cells and values in lexicographic (row, col) order.
    pub fn iter(&self) -> impl Iterator<Item = (Cell, &V)> + '_ {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| (Cell::new(k / cols + 1, k % cols + 1), v))
    }

    pub fn values(&self) -> &[V] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&V) -> U) -> CellGrid<U> {
        CellGrid { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    /// The four corners in (1,1), (1,n), (m,1), (m,n) order.
    pub fn corners(rows: usize, cols: usize) -> [Cell; 4] {
        [Cell::new(1, 1), Cell::new(1, cols), Cell::new(rows, 1), Cell::new(rows, cols)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_construction_agree() {
        let a = CellGrid::from_fn(7, 5, |c| c.row * 100 + c.col);
        let b = CellGrid::par_from_fn(7, 5, |c| c.row * 100 + c.col);
        assert_eq!(a, b);
        assert_eq!(*a.get(Cell::new(7, 5)), 705);
        let order: Vec<_> = a.iter().take(6).map(|(c, _)| (c.row, c.col)).collect();
        assert_eq!(order, vec![(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (2, 1)]);
    }

    #[test]
    #[should_panic]
    fn zero_index_rejected() {
        let g = CellGrid::from_fn(2, 2, |_| 0);
        g.get(Cell::new(0, 1));
    }
}
