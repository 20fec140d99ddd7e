use crossbar_channel::capacity::{averaged_capacity_ideal, cascade_probabilities};
use crossbar_channel::read_channel::{read_channel_grid_ideal, read_errors_for_load};
use crossbar_channel::write_channel::{switch_fail_prob_given_resistance, write_channel_grid};
use crossbar_channel::{
    mutual_information, read_channel_params_ideal, write_channel_params, Bit, Cell, Coupling, ModelBundleF64,
    SwitchOp,
};
use proptest::prelude::*;

fn bundle(m: usize, n: usize, r: f64) -> ModelBundleF64 {
    let mut b = ModelBundleF64::reference();
    b.geometry = b.geometry.with_size(m, n).with_line_resistance(r);
    b
}

#[test]
fn write_failures_grow_along_rows_and_columns() {
    let b = bundle(48, 40, 60.0);
    let g = write_channel_grid(&b).unwrap();
    for i in 1..=48 {
        for j in 1..=40 {
            let p = g.get(Cell::new(i, j));
            if i < 48 {
                let d = g.get(Cell::new(i + 1, j));
                assert!(d.p1 >= p.p1 && d.p2 >= p.p2, "({i},{j}) down");
            }
            if j < 40 {
                let r = g.get(Cell::new(i, j + 1));
                assert!(r.p1 >= p.p1 && r.p2 >= p.p2, "({i},{j}) right");
            }
            let q = b.device.prior_hrs;
            assert!(p.p1 <= 1.0 - q && p.p2 <= q);
        }
    }
}

#[test]
fn read_errors_move_with_position() {
    let b = bundle(40, 48, 60.0);
    let r_th = b.operating.threshold_resistance();
    let g = read_channel_grid_ideal(r_th, &b.geometry, &b.device).unwrap();
    for i in 1..40 {
        for j in 1..48 {
            let p = g.get(Cell::new(i, j));
            for next in [Cell::new(i + 1, j), Cell::new(i, j + 1)] {
                let d = g.get(next);
                assert!(d.p4 >= p.p4 && d.p3 <= p.p3, "({i},{j}) -> {next}");
            }
        }
    }
}

#[test]
fn narrow_resistance_collapses_to_point_value() {
    for (cell, op) in [(Cell::new(1024, 1024), SwitchOp::Reset), (Cell::new(700, 3), SwitchOp::Set)] {
        let mut b = ModelBundleF64::reference();
        b.device.lrs_ln_std = 1e-6;
        b.device.hrs_ln_std = 1e-6;
        let point = switch_fail_prob_given_resistance(b.device.median_resistance(op.from_state()), cell, op, &b).unwrap();
        let w = write_channel_params(cell, &b).unwrap();
        let q = b.device.prior_hrs;
        let integrated = match op {
            SwitchOp::Reset => w.p1 / (1.0 - q),
            SwitchOp::Set => w.p2 / q,
        };
        assert!((integrated - point).abs() < 1e-6, "{cell}: {integrated} vs {point}");
    }
}

#[test]
fn capacity_falls_with_line_resistance() {
    let mut last = f64::INFINITY;
    for r in [0.0, 10.0, 30.0, 60.0, 100.0] {
        let c = averaged_capacity_ideal(&bundle(64, 64, r), Coupling::FixedChannel).unwrap();
        assert!(c <= last, "r = {r}: {c} > {last}");
        last = c;
    }
}

#[test]
fn square_shape_is_best() {
    let shapes = [(64, 64), (32, 128), (16, 256), (8, 512)];
    let caps: Vec<f64> = shapes
        .iter()
        .map(|&(m, n)| averaged_capacity_ideal(&bundle(m, n, 30.0), Coupling::QCoupled).unwrap())
        .collect();
    for w in caps.windows(2) {
        assert!(w[0] > w[1], "{caps:?}");
    }
}

fn fixed_capacity(p5: f64, p6: f64) -> f64 {
    (0..=2000).map(|k| mutual_information(k as f64 / 2000.0, p5, p6)).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn longer_pulses_never_hurt(
        i in 1usize..=256, j in 1usize..=256, r in 0.0f64..60.0, factor in 1.0f64..4.0,
    ) {
        let b = bundle(256, 256, r);
        let mut longer = b;
        longer.operating.set_pulse *= factor;
        longer.operating.reset_pulse *= factor;
        let cell = Cell::new(i, j);
        let (a, c) = (write_channel_params(cell, &b).unwrap(), write_channel_params(cell, &longer).unwrap());
        prop_assert!(c.p1 <= a.p1 + 1e-15 && c.p2 <= a.p2 + 1e-15);
    }

    #[test]
    fn prior_bounds_the_write_errors(q in 0.0f64..=1.0, i in 1usize..=64, j in 1usize..=64) {
        let mut b = bundle(64, 64, 40.0);
        b.device.prior_hrs = q;
        let w = write_channel_params(Cell::new(i, j), &b).unwrap();
        prop_assert!(w.p1 >= 0.0 && w.p1 <= 1.0 - q + 1e-15);
        prop_assert!(w.p2 >= 0.0 && w.p2 <= q + 1e-15);
    }

    #[test]
    fn line_load_shifts_the_threshold(
        i in 1usize..=512, j in 1usize..=512, r in 0.0f64..50.0, r_th in 3e4f64..3e5,
    ) {
        let b = bundle(512, 512, r);
        let at = read_channel_params_ideal(Cell::new(i, j), r_th, &b.geometry, &b.device).unwrap();
        let flat = bundle(512, 512, 0.0);
        let shifted = r_th - (i as f64) * r - (j as f64) * r;
        let z = read_channel_params_ideal(Cell::new(1, 1), shifted, &flat.geometry, &flat.device).unwrap();
        prop_assert!((at.p3 - z.p3).abs() <= 1e-12 * z.p3.max(1e-300));
        prop_assert!((at.p4 - z.p4).abs() <= 1e-12 * z.p4.max(1e-300));
    }

    #[test]
    fn read_errors_monotone_in_threshold(load in 0.0f64..4e4, a in 4.1e4f64..5e5, d in 1.0f64..1e5) {
        let dev = ModelBundleF64::reference().device;
        let (p3a, p4a) = read_errors_for_load(load, a, &dev);
        let (p3b, p4b) = read_errors_for_load(load, a + d, &dev);
        prop_assert!(p3b >= p3a);
        prop_assert!(1.0 - p4b >= 1.0 - p4a);
    }

    #[test]
    fn capacity_drops_as_crossovers_grow(p5 in 0.0f64..0.45, p6 in 0.0f64..0.45, d in 0.001f64..0.05) {
        let c = fixed_capacity(p5, p6);
        prop_assert!(fixed_capacity((p5 + d).min(0.5), p6) <= c + 1e-12);
        prop_assert!(fixed_capacity(p5, (p6 + d).min(0.5)) <= c + 1e-12);
    }

    #[test]
    fn cascade_stays_a_channel(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, p3 in 0.0f64..=1.0, p4 in 0.0f64..=1.0) {
        let (p5, p6) = cascade_probabilities(p1, p2, p3, p4);
        prop_assert!((0.0..=1.0).contains(&p5) && (0.0..=1.0).contains(&p6));
        let (z, zp) = cascade_probabilities(0.0, 0.0, p3, p4);
        prop_assert_eq!((z, zp), (p3, p4));
    }
}

#[test]
fn bit_helpers() {
    assert_eq!(SwitchOp::writing(Bit::Zero), SwitchOp::Reset);
    assert_eq!(SwitchOp::Reset.from_state(), Bit::One);
}
