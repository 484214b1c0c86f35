use fracobs::quadrature::{composite, GaussLegendre};
use fracobs::sensing::{adjoint_inject, observe, Axis, Distribution, Sensor, SensorSuite};
use fracobs::spectral::{
    build_basis, grad_adjoint, project, Basis, Dim, Mode, Point, QuadGrid, Rect, Region,
    SpectralField, VectorFieldSamples,
};
use proptest::prelude::*;
use std::sync::Arc;

fn basis(dim: Dim, m: u32) -> Arc<Basis> {
    Arc::new(build_basis(dim, m).unwrap())
}

fn field(basis: &Arc<Basis>, coeffs: &[f64]) -> SpectralField {
    let mut c = vec![0.0; basis.len()];
    for (slot, v) in c.iter_mut().zip(coeffs) {
        *slot = *v;
    }
    SpectralField::from_coeffs(basis.clone(), c).unwrap()
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn dim() -> impl Strategy<Value = Dim> {
    prop_oneof![Just(Dim::One), Just(Dim::Two)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_adjointness(d in dim(), m in 2u32..7, y in coeffs(12), b in coeffs(12)) {
        let basis = basis(d, m);
        let y = field(&basis, &y);
        let modes = basis.modes().to_vec();
        let g = move |x: Point| {
            let mut v = [0.0; 2];
            for (mode, c) in modes.iter().zip(&b) {
                let dm = mode.grad(x);
                v[0] += c * dm[0];
                v[1] += c * dm[1];
            }
            v
        };
        let grid = Arc::new(QuadGrid::new(&Region::whole(d), 2 * m));
        let g = VectorFieldSamples::from_fn(grid.clone(), g);
        let lhs = y.gradient_on(grid).dot(&g);
        let rhs = y.dot(&grad_adjoint(&g, basis));
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn synthesis_then_projection_is_identity(d in dim(), m in 1u32..=20, c in coeffs(400)) {
        prop_assume!(d == Dim::One || m <= 8);
        let basis = basis(d, m);
        let f = field(&basis, &c);
        let back = project(|x| f.eval(x), m, basis);
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
        // Parseval on the same grid
        let grid = Arc::new(QuadGrid::new(&Region::whole(d), 2 * m));
        let l2 = f.sample(grid).norm_sq().sqrt();
        prop_assert!((l2 - f.norm()).abs() <= 1e-10 * (1.0 + l2), "{l2} vs {}", f.norm());
    }
}

proptest! {
    // each case integrates over a full-resolution grid; fewer cases suffice
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eigen_identity(j in 1u32..7, k in 1u32..7) {
        let m = 6;
        let basis = basis(Dim::Two, m);
        let mode = Mode::Square(j, k);
        let grid = Arc::new(QuadGrid::new(&Region::whole(Dim::Two), 2 * m));
        let g = VectorFieldSamples::from_fn(grid, |x| mode.grad(x));
        let out = grad_adjoint(&g, basis.clone());
        for (q, c) in basis.modes().iter().zip(out.coeffs()) {
            let want = if *q == mode { -mode.eigenvalue() } else { 0.0 };
            prop_assert!((c - want).abs() <= 1e-9 * (1.0 + want.abs()), "{q}: {c} vs {want}");
        }
    }

    #[test]
    fn tensor_quadrature_is_exact_on_mode_products(d in dim(), m in 1u32..8) {
        let basis = basis(d, m);
        let grid = QuadGrid::new(&Region::whole(d), m);
        for (a, ma) in basis.modes().iter().enumerate() {
            for (b, mb) in basis.modes().iter().enumerate().skip(a) {
                let v = grid.integrate(|x| ma.eval(x) * mb.eval(x));
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-12, "{ma}, {mb}: {v}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sensing_adjointness(sensor in sensor(), y in coeffs(40), z in -3.0f64..3.0) {
        let d = sensor_dim(&sensor);
        let basis = basis(d, 5);
        let y = field(&basis, &y);
        let suite = SensorSuite::new(d, vec![sensor.clone()]).unwrap();
        let cy = direct_observation(&sensor, &y);
        let lhs = cy * z;
        let rhs = y.dot(&adjoint_inject(&[z], &suite, basis).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn observation_is_linear(sensors in prop::collection::vec(sensor_2d(), 1..4), y1 in coeffs(40), y2 in coeffs(40), a in -3.0f64..3.0) {
        let basis = basis(Dim::Two, 5);
        let suite = SensorSuite::new(Dim::Two, sensors).unwrap();
        let (f1, f2) = (field(&basis, &y1), field(&basis, &y2));
        let mut comb = f2.clone();
        comb.scaled_add(a, &f1);
        let z = observe(&comb, &suite).unwrap();
        let z1 = observe(&f1, &suite).unwrap();
        let z2 = observe(&f2, &suite).unwrap();
        for i in 0..z.len() {
            let want = a * z1[i] + z2[i];
            prop_assert!((z[i] - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} vs {want}", z[i]);
        }
    }

    #[test]
    fn couplings_ignore_truncation(sensor in sensor(), m in 2u32..6, extra in 1u32..5) {
        let d = sensor_dim(&sensor);
        let small = basis(d, m);
        let large = basis(d, m + extra);
        let suite = SensorSuite::new(d, vec![sensor]).unwrap();
        let cs = suite.couplings(&small).unwrap();
        let cl = suite.couplings(&large).unwrap();
        for (q, mode) in small.modes().iter().enumerate() {
            let ql = large.index_of(*mode).unwrap();
            prop_assert!((cs.get(0, q) - cl.get(0, ql)).abs() <= 1e-12, "{mode}");
        }
    }
}

fn sensor_dim(s: &Sensor) -> Dim {
    match s {
        Sensor::Pointwise { location } if location[1] < 0.0 => Dim::One,
        Sensor::Zone { support, .. } if support.hi[1] < 0.0 => Dim::One,
        _ => Dim::Two,
    }
}

fn distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(|value| Distribution::Constant { value }),
        (-2.0f64..2.0, 0.2f64..3.0, 0.2f64..3.0).prop_map(|(amp, a, b)| {
            Distribution::SineProduct {
                amp,
                k: [Some(a), Some(b)],
            }
        }),
        (1u32..4, 1u32..4).prop_map(|(m, n)| Distribution::Eigen {
            mode: Mode::Square(m, n)
        }),
    ]
}

fn unit_interval() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..0.9, 0.05f64..1.0).prop_map(|(a, w)| (a, (a + w).min(1.0)))
}

fn sensor_2d() -> impl Strategy<Value = Sensor> {
    prop_oneof![
        (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(a, b)| Sensor::Pointwise { location: [a, b] }),
        (unit_interval(), unit_interval(), distribution()).prop_map(
            |((a0, a1), (b0, b1), distribution)| {
                Sensor::Zone {
                    support: Rect::new([a0, b0], [a1, b1]),
                    distribution,
                }
            }
        ),
        (any::<bool>(), 0.0f64..=1.0, unit_interval(), distribution()).prop_map(
            |(x1, at, (from, to), distribution)| {
                Sensor::Filament {
                    along: if x1 { Axis::X1 } else { Axis::X2 },
                    at,
                    from,
                    to,
                    distribution,
                }
            }
        ),
    ]
}

// One-dimensional sensors are tagged by a negative second coordinate so the
// test can recover the dimension; the sensor itself ignores it.
fn sensor_1d() -> impl Strategy<Value = Sensor> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|a| Sensor::Pointwise {
            location: [a, -1.0]
        }),
        (unit_interval(), -2.0f64..2.0, 0.2f64..3.0).prop_map(|((a0, a1), amp, k)| Sensor::Zone {
            support: Rect::new([a0, -2.0], [a1, -1.0]),
            distribution: Distribution::SineProduct {
                amp,
                k: [Some(k), None]
            },
        }),
    ]
}

fn sensor() -> impl Strategy<Value = Sensor> {
    prop_oneof![sensor_1d(), sensor_2d()]
}

/// `C y` from the synthesised field: point evaluation, or a fine
/// Gauss–Legendre rule over the support.
fn direct_observation(sensor: &Sensor, y: &SpectralField) -> f64 {
    let rule = GaussLegendre::new(12);
    let line = |a: f64, b: f64| composite(a, b, 24, &rule);
    match sensor {
        Sensor::Pointwise { location } => y.eval(*location),
        Sensor::Zone {
            support,
            distribution,
        } => {
            let (x1, w1) = line(support.lo[0], support.hi[0]);
            if y.basis().dim() == Dim::One {
                return x1
                    .iter()
                    .zip(&w1)
                    .map(|(x, w)| w * distribution.eval([*x, 0.0]) * y.eval([*x, 0.0]))
                    .sum();
            }
            let (x2, w2) = line(support.lo[1], support.hi[1]);
            let mut acc = 0.0;
            for (a, wa) in x1.iter().zip(&w1) {
                for (b, wb) in x2.iter().zip(&w2) {
                    let p = [*a, *b];
                    acc += wa * wb * distribution.eval(p) * y.eval(p);
                }
            }
            acc
        }
        Sensor::Filament {
            along,
            at,
            from,
            to,
            distribution,
        } => {
            let (ts, ws) = line(*from, *to);
            ts.iter()
                .zip(&ws)
                .map(|(t, w)| {
                    let p = match along {
                        Axis::X1 => [*t, *at],
                        Axis::X2 => [*at, *t],
                    };
                    w * distribution.eval(p) * y.eval(p)
                })
                .sum()
        }
    }
}
