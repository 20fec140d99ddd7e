//! Nodal analysis of the full crossbar: one wordline node and one bitline
//! node per crosspoint, `2 m n` unknowns.

use super::banded::{BandedSpd, Cholesky};
use super::{selector_resistance, BiasScheme, ResistanceGrid};
use crate::config::{ArrayGeometry, Resistance};
use crate::error::{Error, Result};
use crate::grid::{Cell, CellGrid};
use crate::scalar::Scalar;

/// Node voltages and derived quantities of one bias solve.
#[derive(Debug, Clone)]
pub struct KclSolution<T> {
    pub wordline: CellGrid<T>,
    pub bitline: CellGrid<T>,
    /// Voltage across the selected branch (memristor plus selector).
    pub branch_voltage: T,
    /// Voltage across the selected memristor alone.
    pub cell_voltage: T,
    /// Current into the selected bitline's sense/ground terminal.
    pub sensed_current: T,
    /// Largest nodal current imbalance relative to the total terminal current.
    pub residual: T,
}

/// Thevenin equivalent seen by the selected branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedPort<T> {
    pub open_circuit_voltage: T,
    pub source_resistance: T,
}

impl<T: Scalar> SelectedPort<T> {
    /// Memristor voltage when a cell of `cell_r` sits behind a selector of
    /// `selector_r`.
    pub fn cell_voltage(&self, cell_r: T, selector_r: T) -> T {
        if cell_r.is_infinite() {
            return self.open_circuit_voltage;
        }
        self.open_circuit_voltage * cell_r / (cell_r + selector_r + self.source_resistance)
    }

    pub fn scaled(&self, factor: T) -> Self {
        SelectedPort { open_circuit_voltage: self.open_circuit_voltage * factor, ..*self }
    }
}

struct Layout {
    rows: usize,
    cols: usize,
    row_major: bool,
}

impl Layout {
    fn new(rows: usize, cols: usize) -> Self {
        Layout { rows, cols, row_major: cols <= rows }
    }

    fn nodes(&self) -> usize {
        2 * self.rows * self.cols
    }

    fn bandwidth(&self) -> usize {
        2 * if self.row_major { self.cols } else { self.rows }
    }

    fn cell_index(&self, c: Cell) -> usize {
        if self.row_major {
            (c.row - 1) * self.cols + (c.col - 1)
        } else {
            (c.col - 1) * self.rows + (c.row - 1)
        }
    }

    fn wl(&self, c: Cell) -> usize {
        2 * self.cell_index(c)
    }

    fn bl(&self, c: Cell) -> usize {
        2 * self.cell_index(c) + 1
    }
}

struct Terminal<T> {
    node: usize,
    conductance: T,
    voltage: T,
}

struct Network<T> {
    layout: Layout,
    edges: Vec<(usize, usize, T)>,
    terminals: Vec<Terminal<T>>,
}

impl<T: Scalar> Network<T> {
    fn build(
        g: &ArrayGeometry<T>,
        grid: &ResistanceGrid<T>,
        bias: &BiasScheme,
        v: T,
        open_selected: bool,
    ) -> Result<Self> {
        let (rows, cols) = (g.rows, g.cols);
        if grid.cells.rows() != rows || grid.cells.cols() != cols {
            return Err(Error::Invalid {
                key: "grid",
                message: format!("{}x{} grid for {rows}x{cols} array", grid.cells.rows(), grid.cells.cols()),
            });
        }
        g.check_cell(bias.selected)?;
        for (key, r) in [("r_w", g.wordline_r), ("r_b", g.bitline_r)] {
            if !(r > T::zero() && r.is_finite()) {
                return Err(Error::Invalid { key, message: "nodal solve needs finite line resistance > 0".into() });
            }
        }
        let layout = Layout::new(rows, cols);
        let (gw, gb) = (g.wordline_r.recip(), g.bitline_r.recip());
        let mut edges = Vec::with_capacity(3 * rows * cols);
        let mut terminals = Vec::with_capacity(rows + cols);
        for i in 1..=rows {
            let first = Cell::new(i, 1);
            terminals.push(Terminal { node: layout.wl(first), conductance: gw, voltage: bias.wordline_voltage(i, v) });
            for j in 1..cols {
                edges.push((layout.wl(Cell::new(i, j)), layout.wl(Cell::new(i, j + 1)), gw));
            }
        }
        for j in 1..=cols {
            let first = Cell::new(1, j);
            terminals.push(Terminal { node: layout.bl(first), conductance: gb, voltage: bias.bitline_voltage(j, v) });
            for i in 1..rows {
                edges.push((layout.bl(Cell::new(i, j)), layout.bl(Cell::new(i + 1, j)), gb));
            }
        }
        for (cell, &r) in grid.cells.iter() {
            if !(r > T::zero()) {
                return Err(Error::Invalid { key: "grid", message: format!("cell {cell} resistance {r} ≤ 0") });
            }
            if open_selected && cell == bias.selected {
                continue;
            }
            if let Resistance::Finite(br) = grid.branch_resistance(cell, bias, g) {
                edges.push((layout.wl(cell), layout.bl(cell), br.recip()));
            }
        }
        Ok(Network { layout, edges, terminals })
    }

    fn isolated_nodes(&self) -> Vec<usize> {
        let n = self.layout.nodes();
        let mut adj = vec![Vec::new(); n];
        for &(a, b, gc) in &self.edges {
            if gc > T::zero() {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.terminals.iter().map(|t| t.node).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        (0..n).filter(|&k| !seen[k]).collect()
    }

    fn factor(&self) -> Result<Cholesky<T>> {
        let isolated = self.isolated_nodes();
        if !isolated.is_empty() {
            return Err(Error::SingularSystem { nodes: isolated });
        }
        let mut m = BandedSpd::zeros(self.layout.nodes(), self.layout.bandwidth());
        for &(a, b, gc) in &self.edges {
            m.add(a, a, gc);
            m.add(b, b, gc);
            m.add(a, b, -gc);
        }
        for t in &self.terminals {
            m.add(t.node, t.node, t.conductance);
        }
        m.factor().map_err(|pivot| Error::SingularSystem { nodes: vec![pivot] })
    }

    fn source_rhs(&self) -> Vec<T> {
        let mut b = vec![T::zero(); self.layout.nodes()];
        for t in &self.terminals {
            b[t.node] += t.conductance * t.voltage;
        }
        b
    }

    /// `b - A x` using the sparse description.
    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let mut r = b.to_vec();
        for &(a, c, gc) in &self.edges {
            let i = gc * (x[a] - x[c]);
            r[a] -= i;
            r[c] += i;
        }
        for t in &self.terminals {
            r[t.node] -= t.conductance * x[t.node];
        }
        r
    }

    fn solve(&self, chol: &Cholesky<T>, b: &[T]) -> (Vec<T>, T) {
        let mut x = chol.solve(b);
        let mut r = self.residual(&x, b);
        // one step of iterative refinement
        let dx = chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        r = self.residual(&x, b);
        let worst = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        (x, worst)
    }

    fn terminal_current_total(&self, x: &[T]) -> T {
        self.terminals
            .iter()
            .fold(T::zero(), |s, t| s + (t.conductance * (x[t.node] - t.voltage)).abs())
    }
}

/// Solves the crossbar under `bias` with driving voltage `voltage`.
pub fn solve_kcl_grid<T: Scalar>(
    geometry: &ArrayGeometry<T>,
    grid: &ResistanceGrid<T>,
    bias: &BiasScheme,
    voltage: T,
) -> Result<KclSolution<T>> {
    let net = Network::build(geometry, grid, bias, voltage, false)?;
    let chol = net.factor()?;
    let b = net.source_rhs();
    let (x, worst) = net.solve(&chol, &b);
    let total = net.terminal_current_total(&x);
    let residual = if total > T::zero() { worst / total } else { worst };

    let l = &net.layout;
    let sel = bias.selected;
    let branch_voltage = x[l.wl(sel)] - x[l.bl(sel)];
    let cell_r = *grid.cells.get(sel);
    let selector_r = selector_resistance(bias.role(sel), geometry).value();
    let cell_voltage = branch_voltage * cell_r / (cell_r + selector_r);
    let sense = Cell::new(1, sel.col);
    let sensed_current = (x[l.bl(sense)] - bias.bitline_voltage(sel.col, voltage)) * geometry.bitline_r.recip();
    let (rows, cols) = (geometry.rows, geometry.cols);
    Ok(KclSolution {
        wordline: CellGrid::from_fn(rows, cols, |c| x[l.wl(c)]),
        bitline: CellGrid::from_fn(rows, cols, |c| x[l.bl(c)]),
        branch_voltage,
        cell_voltage,
        sensed_current,
        residual,
    })
}

/// Thevenin port of the selected branch: the network is solved once with
/// the branch open (open-circuit voltage) and once with sources zeroed and a
/// unit test current (source resistance). Both share one factorization.
pub fn selected_port<T: Scalar>(
    geometry: &ArrayGeometry<T>,
    grid: &ResistanceGrid<T>,
    bias: &BiasScheme,
    voltage: T,
) -> Result<SelectedPort<T>> {
    let net = Network::build(geometry, grid, bias, voltage, true)?;
    let chol = net.factor()?;
    let l = &net.layout;
    let (a, b) = (l.wl(bias.selected), l.bl(bias.selected));

    let (x, _) = net.solve(&chol, &net.source_rhs());
    let open_circuit_voltage = x[a] - x[b];

    let mut inj = vec![T::zero(); l.nodes()];
    inj[a] = T::one();
    inj[b] = -T::one();
    let (y, _) = net.solve(&chol, &inj);
    Ok(SelectedPort { open_circuit_voltage, source_resistance: y[a] - y[b] })
}
