//! Sensors (zone, pointwise, filament), their couplings to eigenmodes, the
//! output operator `C` and its adjoint.

use crate::error::{Error, Result};
use crate::quadrature::{composite, GaussLegendre};
use crate::spectral::{Basis, Dim, Mode, Point, QuadGrid, Rect, Region, SpectralField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

const NODES_PER_PANEL: usize = 8;

/// Spatial distribution `f` of a zone or filament sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant {
        value: f64,
    },
    /// `amp · Π_s sin(k_s π x_s)`; a missing wavenumber drops that factor.
    SineProduct {
        amp: f64,
        k: [Option<f64>; 2],
    },
    /// One eigenfunction of the Laplacian.
    Eigen {
        mode: Mode,
    },
    /// Bilinear (linear in one dimension) interpolation of a table,
    /// clamped outside its range. `values[i][j]` sits at `(x1[i], x2[j])`.
    Tabulated {
        x1: Vec<f64>,
        #[serde(default)]
        x2: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    if xs.len() == 1 {
        return (0, 0.0);
    }
    let x = x.clamp(xs[0], xs[xs.len() - 1]);
    let i = match xs.partition_point(|v| *v <= x) {
        0 => 0,
        k => (k - 1).min(xs.len() - 2),
    };
    (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
}

impl Distribution {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            Distribution::Constant { value } => *value,
            Distribution::SineProduct { amp, k } => {
                let mut v = *amp;
                for (s, ks) in k.iter().enumerate() {
                    if let Some(ks) = ks {
                        v *= (ks * PI * x[s]).sin();
                    }
                }
                v
            }
            Distribution::Eigen { mode } => mode.eval(x),
            Distribution::Tabulated { x1, x2, values } => {
                let (i, u) = bracket(x1, x[0]);
                let i1 = (i + 1).min(x1.len() - 1);
                if x2.is_empty() {
                    return (1.0 - u) * values[i][0] + u * values[i1][0];
                }
                let (j, v) = bracket(x2, x[1]);
                let j1 = (j + 1).min(x2.len() - 1);
                (1.0 - u) * ((1.0 - v) * values[i][j] + v * values[i][j1])
                    + u * ((1.0 - v) * values[i1][j] + v * values[i1][j1])
            }
        }
    }

    /// Oscillation scale used to size quadrature panels.
    fn freq_hint(&self) -> u32 {
        match self {
            Distribution::Constant { .. } => 0,
            Distribution::SineProduct { k, .. } => k
                .iter()
                .flatten()
                .map(|v| v.abs().ceil() as u32)
                .max()
                .unwrap_or(0),
            Distribution::Eigen { mode } => mode.max_index(),
            Distribution::Tabulated { x1, x2, .. } => x1.len().max(x2.len()) as u32,
        }
    }

    fn validate(&self, dim: Dim) -> Result<()> {
        match self {
            Distribution::Constant { value } if !value.is_finite() => {
                Err(Error::Config("constant distribution must be finite".into()))
            }
            Distribution::SineProduct { amp, k } => {
                if !amp.is_finite() || k.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Config("sine distribution must be finite".into()));
                }
                Ok(())
            }
            Distribution::Eigen { mode } => {
                mode.validate()?;
                if mode.dim() != dim {
                    return Err(Error::Config(format!(
                        "eigen distribution {mode} has the wrong dimension"
                    )));
                }
                Ok(())
            }
            Distribution::Tabulated { x1, x2, values } => {
                let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
                if x1.is_empty() || !increasing(x1) || !increasing(x2) {
                    return Err(Error::Config(
                        "table axes must be nonempty and increasing".into(),
                    ));
                }
                if dim == Dim::Two && x2.is_empty() {
                    return Err(Error::Config("a 2-D table needs an x2 axis".into()));
                }
                let cols = x2.len().max(1);
                if values.len() != x1.len() || values.iter().any(|r| r.len() != cols) {
                    return Err(Error::Config("table values do not match its axes".into()));
                }
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Config("table values must be finite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }
}

/// Where a sensor sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sensor {
    Zone {
        support: Rect,
        distribution: Distribution,
    },
    Pointwise {
        location: Point,
    },
    /// The segment running along `along` from `from` to `to`, with the other
    /// coordinate fixed at `at`. Integration uses the coordinate parameter.
    Filament {
        along: Axis,
        at: f64,
        from: f64,
        to: f64,
        distribution: Distribution,
    },
}

impl Sensor {
    pub fn kind(&self) -> &'static str {
        match self {
            Sensor::Zone { .. } => "zone",
            Sensor::Pointwise { .. } => "pointwise",
            Sensor::Filament { .. } => "filament",
        }
    }

    pub fn validate(&self, dim: Dim) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            Sensor::Zone {
                support,
                distribution,
            } => {
                Region::new(dim, vec![*support])?;
                distribution.validate(dim)?;
                let norm = self
                    .zone_grid(dim, 0)
                    .map(|g| g.integrate(|x| distribution.eval(x).powi(2)));
                if !norm.is_some_and(f64::is_finite) {
                    return Err(Error::Config(
                        "zone distribution is not square integrable".into(),
                    ));
                }
                Ok(())
            }
            Sensor::Pointwise { location } => {
                if (0..dim.n()).all(|s| unit(location[s])) {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "sensor location {location:?} is outside the domain"
                    )))
                }
            }
            Sensor::Filament {
                at,
                from,
                to,
                distribution,
                ..
            } => {
                if dim != Dim::Two {
                    return Err(Error::Config("filament sensors need a 2-D domain".into()));
                }
                if !(unit(*at) && unit(*from) && unit(*to) && from < to) {
                    return Err(Error::Config(
                        "filament segment must lie in the closed domain".into(),
                    ));
                }
                distribution.validate(dim)
            }
        }
    }

    fn zone_grid(&self, dim: Dim, freq: u32) -> Option<QuadGrid> {
        match self {
            Sensor::Zone {
                support,
                distribution,
            } => {
                let region = Region::new(dim, vec![*support]).ok()?;
                Some(QuadGrid::new(&region, freq + distribution.freq_hint()))
            }
            _ => None,
        }
    }

    /// `∫ f·h` over the sensor, or `h(σ)` for a point sensor.
    fn apply<H: Fn(Point) -> f64>(&self, dim: Dim, freq: u32, h: H) -> f64 {
        match self {
            Sensor::Zone { distribution, .. } => self
                .zone_grid(dim, freq)
                .expect("validated zone")
                .integrate(|x| distribution.eval(x) * h(x)),
            Sensor::Pointwise { location } => h(*location),
            Sensor::Filament {
                along,
                at,
                from,
                to,
                distribution,
            } => {
                let panels = (2 * (freq + distribution.freq_hint()) as usize).max(4);
                let rule = GaussLegendre::new(NODES_PER_PANEL);
                let (ts, ws) = composite(*from, *to, panels, &rule);
                let s = along.index();
                ts.iter()
                    .zip(&ws)
                    .map(|(t, w)| {
                        let mut x = [*at, *at];
                        x[s] = *t;
                        w * distribution.eval(x) * h(x)
                    })
                    .sum()
            }
        }
    }

    /// `(f, ξ_mode)` over the sensor support; `ξ_mode(σ)` for a point.
    pub fn coupling(&self, mode: Mode) -> f64 {
        self.apply(mode.dim(), mode.max_index(), |x| mode.eval(x))
    }

    /// `(f, ∂ξ_mode/∂x_s)` over the support; the derivative at `σ` for a point.
    pub fn grad_coupling(&self, mode: Mode, axis: Axis) -> f64 {
        let s = axis.index();
        self.apply(mode.dim(), mode.max_index(), |x| mode.grad(x)[s])
    }
}

/// An ordered list of sensors; channel `i` is the output of sensor `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorSuite {
    dim: Dim,
    sensors: Vec<Sensor>,
}

impl SensorSuite {
    pub fn new(dim: Dim, sensors: Vec<Sensor>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::Config(
                "a sensor suite needs at least one sensor".into(),
            ));
        }
        for s in &sensors {
            s.validate(dim)?;
        }
        Ok(SensorSuite { dim, sensors })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// `κ_{i,q} = coupling(sensor_i, mode_q)` for every basis mode.
    pub fn couplings(&self, basis: &Basis) -> Result<Couplings> {
        if basis.dim() != self.dim {
            return Err(Error::Size(
                "sensor suite and basis differ in dimension".into(),
            ));
        }
        let n = basis.len();
        let data: Vec<f64> = (0..self.len() * n)
            .into_par_iter()
            .map(|k| self.sensors[k / n].coupling(basis.modes()[k % n]))
            .collect();
        Ok(Couplings {
            sensors: self.len(),
            modes: n,
            data,
        })
    }
}

/// Dense `p × N` table of sensor/mode couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    sensors: usize,
    modes: usize,
    data: Vec<f64>,
}

impl Couplings {
    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn get(&self, sensor: usize, mode: usize) -> f64 {
        self.data[sensor * self.modes + mode]
    }

    pub fn row(&self, sensor: usize) -> &[f64] {
        &self.data[sensor * self.modes..(sensor + 1) * self.modes]
    }

    /// `C y` for coefficients `y`.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.sensors)
            .map(|i| self.row(i).iter().zip(coeffs).map(|(k, c)| k * c).sum())
            .collect()
    }

    /// `C* z` as coefficients.
    pub fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        (0..self.modes)
            .map(|q| (0..self.sensors).map(|i| z[i] * self.get(i, q)).sum())
            .collect()
    }
}

/// `z = C y`.
pub fn observe(state: &SpectralField, suite: &SensorSuite) -> Result<Vec<f64>> {
    Ok(suite.couplings(state.basis())?.apply(state.coeffs()))
}

/// `C* z`, with `(C*z)_mode = Σ_i z_i κ_{i,mode}`.
pub fn adjoint_inject(z: &[f64], suite: &SensorSuite, basis: Arc<Basis>) -> Result<SpectralField> {
    if z.len() != suite.len() {
        return Err(Error::Size(format!(
            "{} channel values for {} sensors",
            z.len(),
            suite.len()
        )));
    }
    let coeffs = suite.couplings(&basis)?.adjoint(z);
    SpectralField::from_coeffs(basis, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_basis;

    fn half_filament() -> Sensor {
        Sensor::Filament {
            along: Axis::X2,
            at: 0.5,
            from: 0.0,
            to: 1.0,
            distribution: Distribution::SineProduct {
                amp: 1.0,
                k: [None, Some(1.0)],
            },
        }
    }

    #[test]
    fn coupling_examples() {
        let zone = Sensor::Zone {
            support: Rect::new([0.0, 0.0], [1.0, 1.0]),
            distribution: Distribution::Eigen {
                mode: Mode::Square(1, 1),
            },
        };
        assert!((zone.coupling(Mode::Square(1, 1)) - 1.0).abs() < 1e-12);
        let point = Sensor::Pointwise {
            location: [0.5, 0.5],
        };
        assert!(point.coupling(Mode::Square(1, 2)).abs() < 1e-15);
        let fil = half_filament();
        for i in 1..=4u32 {
            for j in 1..=4u32 {
                let expect = if j == 1 {
                    (i as f64 * PI / 2.0).sin()
                } else {
                    0.0
                };
                assert!((fil.coupling(Mode::Square(i, j)) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pointwise_gradient_coupling() {
        let s = Sensor::Pointwise {
            location: [0.3, 0.0],
        };
        for j in 1..5u32 {
            let expect = 2f64.sqrt() * j as f64 * PI * (j as f64 * PI * 0.3).cos();
            assert!((s.grad_coupling(Mode::Line(j), Axis::X1) - expect).abs() < 1e-13);
        }
        let mid = Sensor::Pointwise {
            location: [0.5, 0.0],
        };
        assert!(mid.grad_coupling(Mode::Line(1), Axis::X1).abs() < 1e-14);
    }

    #[test]
    fn suite_validation() {
        assert!(SensorSuite::new(Dim::Two, vec![]).is_err());
        assert!(SensorSuite::new(
            Dim::Two,
            vec![Sensor::Pointwise {
                location: [1.5, 0.5]
            }]
        )
        .is_err());
        assert!(SensorSuite::new(Dim::One, vec![half_filament()]).is_err());
        let bad_table = Sensor::Zone {
            support: Rect::new([0.0, 0.0], [1.0, 1.0]),
            distribution: Distribution::Tabulated {
                x1: vec![0.0, 1.0],
                x2: vec![0.0, 1.0],
                values: vec![vec![1.0]],
            },
        };
        assert!(SensorSuite::new(Dim::Two, vec![bad_table]).is_err());
    }

    #[test]
    fn tabulated_distribution_reproduces_bilinear_data() {
        let d = Distribution::Tabulated {
            x1: vec![0.0, 0.5, 1.0],
            x2: vec![0.0, 1.0],
            values: vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0]],
        };
        // the table samples x1·2 + x2 exactly
        for x in [[0.1, 0.2], [0.75, 0.9], [0.5, 0.5]] {
            assert!((d.eval(x) - (2.0 * x[0] + x[1])).abs() < 1e-14);
        }
        assert!((d.eval([2.0, -1.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn observe_counterexample_state_is_blind() {
        let basis = Arc::new(build_basis(Dim::Two, 4).unwrap());
        let suite = SensorSuite::new(Dim::Two, vec![half_filament()]).unwrap();
        let y = SpectralField::from_modes(basis.clone(), &[(Mode::Square(1, 3), 5.0)]).unwrap();
        assert!(observe(&y, &suite).unwrap()[0].abs() < 1e-13);
        let z = observe(&SpectralField::zeros(basis.clone()), &suite).unwrap();
        assert_eq!(z, vec![0.0]);
        let c = adjoint_inject(&[0.0], &suite, basis).unwrap();
        assert_eq!(c.norm(), 0.0);
    }

    #[test]
    fn adjoint_inject_of_eigen_zone() {
        let basis = Arc::new(build_basis(Dim::Two, 3).unwrap());
        let suite = SensorSuite::new(
            Dim::Two,
            vec![Sensor::Zone {
                support: Rect::new([0.0, 0.0], [1.0, 1.0]),
                distribution: Distribution::Eigen {
                    mode: Mode::Square(1, 1),
                },
            }],
        )
        .unwrap();
        let f = adjoint_inject(&[1.0], &suite, basis.clone()).unwrap();
        for (m, c) in basis.modes().iter().zip(f.coeffs()) {
            let expect = if *m == Mode::Square(1, 1) { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "{m}");
        }
        let y = SpectralField::from_modes(basis, &[(Mode::Square(1, 1), 1.0)]).unwrap();
        assert!((observe(&y, &suite).unwrap()[0] - 1.0).abs() < 1e-12);
    }
}
