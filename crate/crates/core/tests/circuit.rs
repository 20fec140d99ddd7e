use crossbar_channel::{
    effective_write_voltage_ideal, read_current_ideal, solve_kcl_grid, ArrayGeometryF64, BiasScheme, Cell,
    ResistanceGrid, Resistance,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn two_by_two() -> (ArrayGeometryF64, ResistanceGrid<f64>) {
    let mut g = ArrayGeometryF64::ideal(2, 2, 0.0);
    g.wordline_r = 12.0;
    g.bitline_r = 7.0;
    g.selector_full = 50.0;
    g.selector_half = Resistance::Finite(1e4);
    g.selector_unselected = Resistance::Finite(2e4);
    let grid = ResistanceGrid::uniform(2, 2, 0.0)
        .with_cell(Cell::new(1, 1), 1e4)
        .with_cell(Cell::new(1, 2), 2e5)
        .with_cell(Cell::new(2, 1), 3e4)
        .with_cell(Cell::new(2, 2), 5e5);
    (g, grid)
}

/// Reference values from an independently assembled 8-node dense system.
#[test]
fn dense_two_by_two_read() {
    let (g, grid) = two_by_two();
    for (cell, branch, memristor, sensed) in [
        (Cell::new(2, 1), 2.997337594424441, 2.992350343851356, 9.972175242929877e-05),
        (Cell::new(1, 2), 2.998336206830787, 2.9975868101282543, 1.498773262739417e-05),
        (Cell::new(1, 1), 2.9941762417873123, 2.97927984257444, 0.00029788629606127324),
    ] {
        let s = solve_kcl_grid(&g, &grid, &BiasScheme::read(cell), 3.0).unwrap();
        assert!(rel(s.branch_voltage, branch) < 1e-9, "{cell}: {}", s.branch_voltage);
        assert!(rel(s.cell_voltage, memristor) < 1e-9, "{cell}: {}", s.cell_voltage);
        assert!(rel(s.sensed_current, sensed) < 1e-9, "{cell}: {}", s.sensed_current);
        assert!(s.residual <= 1e-9);
    }
}

#[test]
fn read_margins_at_the_corners() {
    let g = ArrayGeometryF64::ideal(1024, 1024, 10.0);
    let best = read_current_ideal(1e4, Cell::new(1, 1), 3.0, &g).unwrap();
    let worst = read_current_ideal(1e4, Cell::new(1024, 1024), 3.0, &g).unwrap();
    assert!((best * 1e6 - 299.4).abs() < 0.05);
    assert!((worst * 1e6 - 98.4).abs() < 0.05);
    let flat = ArrayGeometryF64::ideal(8, 8, 0.0);
    assert_eq!(read_current_ideal(1e4, Cell::new(8, 8), 3.0, &flat).unwrap(), 3.0 / 1e4);
}

fn non_ideal(m: usize, n: usize, r: f64, r_su: f64) -> ArrayGeometryF64 {
    let mut g = ArrayGeometryF64::ideal(m, n, r);
    g.selector_full = 0.0;
    g.selector_half = Resistance::Finite(r_su / 2.0);
    g.selector_unselected = Resistance::Finite(r_su);
    g
}

fn grid_from(m: usize, n: usize, values: &[f64]) -> ResistanceGrid<f64> {
    let mut grid = ResistanceGrid::uniform(m, n, 1.0);
    for i in 1..=m {
        for j in 1..=n {
            *grid.cells.get_mut(Cell::new(i, j)) = values[((i - 1) * n + j - 1) % values.len()];
        }
    }
    grid
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn read_current_decreases_in_r_i_j(
        r in 1e3f64..1e6, dr in 1.0f64..1e4,
        i in 1usize..500, j in 1usize..500, line in 0.5f64..50.0,
    ) {
        let g = ArrayGeometryF64::ideal(512, 512, line);
        let base = read_current_ideal(r, Cell::new(i, j), 3.0, &g).unwrap();
        prop_assert!(read_current_ideal(r + dr, Cell::new(i, j), 3.0, &g).unwrap() < base);
        prop_assert!(read_current_ideal(r, Cell::new(i + 1, j), 3.0, &g).unwrap() < base);
        prop_assert!(read_current_ideal(r, Cell::new(i, j + 1), 3.0, &g).unwrap() < base);
    }

    #[test]
    fn write_voltage_monotone(
        r in 1e3f64..1e6, dr in 1.0f64..1e4,
        i in 1usize..500, j in 1usize..500, v in prop_oneof![Just(5.0f64), Just(-5.0f64)],
    ) {
        let g = ArrayGeometryF64::ideal(512, 512, 10.0);
        let base = effective_write_voltage_ideal(r, Cell::new(i, j), v, &g).unwrap().abs();
        prop_assert!(effective_write_voltage_ideal(r + dr, Cell::new(i, j), v, &g).unwrap().abs() > base);
        prop_assert!(effective_write_voltage_ideal(r, Cell::new(i + 1, j), v, &g).unwrap().abs() < base);
        prop_assert!(effective_write_voltage_ideal(r, Cell::new(i, j + 1), v, &g).unwrap().abs() < base);
    }

    #[test]
    fn scaling_resistances_and_voltage_keeps_currents(
        m in 1usize..6, n in 1usize..6,
        values in prop::collection::vec(1e3f64..1e6, 1..8),
        line in 1.0f64..100.0, r_su in 1e3f64..1e6,
        si in 0usize..6, sj in 0usize..6,
    ) {
        let cell = Cell::new(si % m + 1, sj % n + 1);
        let g = non_ideal(m, n, line, r_su);
        let grid = grid_from(m, n, &values);
        let a = solve_kcl_grid(&g, &grid, &BiasScheme::read(cell), 3.0).unwrap();
        let g2 = non_ideal(m, n, 2.0 * line, 2.0 * r_su);
        let scaled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
        let b = solve_kcl_grid(&g2, &grid_from(m, n, &scaled), &BiasScheme::read(cell), 6.0).unwrap();
        prop_assert!(rel(b.sensed_current, a.sensed_current) < 1e-9);
        prop_assert!(a.residual <= 1e-9 && b.residual <= 1e-9);
    }

    /// With every other line grounded, sneak branches drain current away
    /// from the sense terminal: the sensed current never exceeds the
    /// isolated series path.
    #[test]
    fn sneak_paths_never_add_sensed_current(
        m in 1usize..6, n in 1usize..6,
        values in prop::collection::vec(1e3f64..1e6, 1..8),
        line in 1.0f64..100.0, r_su in 1e2f64..1e6,
        si in 0usize..6, sj in 0usize..6,
    ) {
        let cell = Cell::new(si % m + 1, sj % n + 1);
        let grid = grid_from(m, n, &values);
        let s = solve_kcl_grid(&non_ideal(m, n, line, r_su), &grid, &BiasScheme::read(cell), 3.0).unwrap();
        let ideal = read_current_ideal(*grid.cells.get(cell), cell, 3.0, &ArrayGeometryF64::ideal(m, n, line)).unwrap();
        prop_assert!(s.sensed_current <= ideal * (1.0 + 1e-12));
        prop_assert!(s.residual <= 1e-9);
    }

    #[test]
    fn ideal_roles_match_closed_forms(
        m in 1usize..8, n in 1usize..8,
        values in prop::collection::vec(1e3f64..1e6, 1..8),
        line in 0.5f64..100.0, si in 0usize..8, sj in 0usize..8,
    ) {
        let cell = Cell::new(si % m + 1, sj % n + 1);
        let g = ArrayGeometryF64::ideal(m, n, line);
        let grid = grid_from(m, n, &values);
        let r = *grid.cells.get(cell);
        let read = solve_kcl_grid(&g, &grid, &BiasScheme::read(cell), 3.0).unwrap();
        prop_assert!(rel(read.sensed_current, read_current_ideal(r, cell, 3.0, &g).unwrap()) < 1e-9);
        let write = solve_kcl_grid(&g, &grid, &BiasScheme::write_reset(cell), 5.0).unwrap();
        prop_assert!(rel(write.cell_voltage, effective_write_voltage_ideal(r, cell, 5.0, &g).unwrap()) < 1e-9);
    }
}
