//! Mild solution of the Riemann–Liouville time-fractional diffusion in the
//! eigenbasis, synthetic sensor records, and the time integrals of products
//! of mode kernels `S_λ(t) = t^{α-1} E_{α,α}(λ t^α)`.

use crate::error::{Error, Result};
use crate::mlf::{mittag_leffler, FracOrder, MlfParams};
use crate::quadrature::{graded_mesh, Grading, Mesh};
use crate::rng::NoiseKey;
use crate::sensing::{Couplings, SensorSuite};
use crate::spectral::SpectralField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How observations are weighted in time integrals.
///
/// `Compensated` multiplies every output by `t^{1-α}`, which removes the
/// `t^{α-1}` blow-up and keeps the integrals finite for every order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    None,
    Compensated,
}

impl Weighting {
    /// Fails for unweighted products when `α ≤ 1/2`.
    pub fn check(self, alpha: FracOrder) -> Result<()> {
        if self == Weighting::None && alpha.value() <= 0.5 {
            return Err(Error::domain(format!(
                "outputs are not square integrable for alpha = {} <= 1/2; use compensated weighting",
                alpha.value()
            )));
        }
        Ok(())
    }

    /// Factor applied to one observation at time `t`.
    pub fn observation_factor(self, alpha: FracOrder, t: f64) -> f64 {
        match self {
            Weighting::None => 1.0,
            Weighting::Compensated => t.powf(1.0 - alpha.value()),
        }
    }
}

/// `S_λ(t) = t^{α-1} E_{α,α}(λ t^α)`, the response of a unit mode.
pub fn mode_kernel(alpha: FracOrder, lambda: f64, t: f64) -> Result<f64> {
    let a = alpha.value();
    if alpha.is_classical() {
        if t < 0.0 {
            return Err(Error::domain(format!("time must be nonnegative, got {t}")));
        }
        return Ok((lambda * t).exp());
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "the fractional kernel is singular at t = 0 (got t = {t})"
        )));
    }
    let e = mittag_leffler(MlfParams::new(a, a)?, lambda * t.powf(a))?;
    Ok(t.powf(a - 1.0) * e)
}

/// `t^{α-1} E_{α,α}(λ t^α) c0`.
pub fn propagate_coeff(alpha: FracOrder, lambda: f64, c0: f64, t: f64) -> Result<f64> {
    Ok(mode_kernel(alpha, lambda, t)? * c0)
}

/// Quadrature nodes on `(0, b]` with positive weights summing to `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// Graded Gauss–Legendre grid suited to integrands behaving like
    /// `s^{2α-2}` (products of two outputs) near the origin.
    pub fn graded(horizon: f64, alpha: FracOrder, grading: &Grading) -> Result<Self> {
        check_horizon(horizon)?;
        grading.validate()?;
        let e = (2.0 * alpha.value() - 2.0).max(-0.9);
        let mesh = graded_mesh(horizon, Some(e), None, grading);
        Ok(TimeGrid {
            horizon,
            nodes: mesh.nodes,
            weights: mesh.weights,
        })
    }

    /// `n` equispaced samples `b/n, 2b/n, …, b` with cell weights.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        check_horizon(horizon)?;
        if n == 0 {
            return Err(Error::Config("a time grid needs at least one node".into()));
        }
        // the last node is the horizon itself, free of rounding
        let nodes = (1..=n)
            .map(|k| {
                if k == n {
                    horizon
                } else {
                    horizon * k as f64 / n as f64
                }
            })
            .collect();
        TimeGrid::from_nodes(horizon, nodes)
    }

    /// Arbitrary increasing nodes in `(0, b]`; node `k` is weighted by the
    /// cell between its midpoints with its neighbours (the first cell
    /// starts at 0, the last ends at `b`).
    pub fn from_nodes(horizon: f64, nodes: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if nodes.is_empty() {
            return Err(Error::Config("a time grid needs at least one node".into()));
        }
        if !(nodes[0] > 0.0)
            || nodes.windows(2).any(|w| !(w[0] < w[1]))
            || nodes[nodes.len() - 1] > horizon
        {
            return Err(Error::Config(
                "time nodes must increase strictly inside (0, b]".into(),
            ));
        }
        let n = nodes.len();
        let weights = (0..n)
            .map(|k| {
                let lo = if k == 0 {
                    0.0
                } else {
                    0.5 * (nodes[k - 1] + nodes[k])
                };
                let hi = if k + 1 == n {
                    horizon
                } else {
                    0.5 * (nodes[k] + nodes[k + 1])
                };
                hi - lo
            })
            .collect();
        Ok(TimeGrid {
            horizon,
            nodes,
            weights,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_horizon(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "time horizon must be positive, got {b}"
        )))
    }
}

/// Additive Gaussian noise with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Sensor outputs `z_i(t_k)`; `channels[i][k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationRecord {
    pub grid: TimeGrid,
    pub channels: Vec<Vec<f64>>,
    pub noise: Option<NoiseSpec>,
}

impl ObservationRecord {
    pub fn new(grid: TimeGrid, channels: Vec<Vec<f64>>, noise: Option<NoiseSpec>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Size(
                "an observation record needs at least one channel".into(),
            ));
        }
        if channels.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Size(
                "channel length differs from the time grid".into(),
            ));
        }
        Ok(ObservationRecord {
            grid,
            channels,
            noise,
        })
    }

    pub fn zeros(grid: TimeGrid, p: usize) -> Self {
        let n = grid.len();
        ObservationRecord {
            grid,
            channels: vec![vec![0.0; n]; p],
            noise: None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Mode kernels of a set of eigenvalues tabulated on time nodes:
/// `values[g][k] = S_{λ_g}(t_k)`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub values: Vec<Vec<f64>>,
}

impl KernelTable {
    pub fn new(alpha: FracOrder, eigenvalues: &[f64], times: &[f64]) -> Result<Self> {
        let values = eigenvalues
            .par_iter()
            .map(|&lam| {
                times
                    .iter()
                    .map(|&t| mode_kernel(alpha, lam, t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KernelTable { values })
    }
}

/// Kernel values for every basis mode, sharing evaluations within a group.
pub(crate) fn basis_kernels(
    alpha: FracOrder,
    basis: &crate::spectral::Basis,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let lams: Vec<f64> = basis.groups().iter().map(|g| g.eigenvalue).collect();
    let table = KernelTable::new(alpha, &lams, times)?;
    Ok((0..basis.len())
        .map(|q| table.values[basis.group_of(q)].clone())
        .collect())
}

/// Noise-free outputs on the given times from mode coefficients.
pub(crate) fn outputs(
    couplings: &Couplings,
    coeffs: &[f64],
    kernels: &[Vec<f64>],
    n_times: usize,
) -> Vec<Vec<f64>> {
    (0..couplings.sensors())
        .map(|i| {
            let row = couplings.row(i);
            (0..n_times)
                .map(|k| {
                    row.iter()
                        .zip(coeffs)
                        .zip(kernels)
                        .map(|((kap, c), s)| kap * c * s[k])
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `z_i(t_k) = Σ_q κ_{iq} c_q S_q(t_k)`, optionally with additive noise
/// drawn from the `(seed, channel, index)` stream.
pub fn simulate(
    y0: &SpectralField,
    suite: &SensorSuite,
    alpha: FracOrder,
    grid: &TimeGrid,
    noise: Option<NoiseSpec>,
) -> Result<ObservationRecord> {
    let basis = y0.basis();
    let couplings = suite.couplings(basis)?;
    let kernels = basis_kernels(alpha, basis, grid.nodes())?;
    let mut channels = outputs(&couplings, y0.coeffs(), &kernels, grid.len());
    if let Some(n) = noise {
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise level must be nonnegative, got {}",
                n.sigma
            )));
        }
        let key = NoiseKey::new(n.seed);
        for (i, ch) in channels.iter_mut().enumerate() {
            for (k, v) in ch.iter_mut().enumerate() {
                *v += n.sigma * key.normal(i, k);
            }
        }
    }
    ObservationRecord::new(grid.clone(), channels, noise)
}

/// Endpoint exponent of `w(s) s^{α-1}` at a refined end.
fn end_exponent(alpha: FracOrder, weighting: Weighting) -> f64 {
    match weighting {
        Weighting::None => alpha.value() - 1.0,
        Weighting::Compensated => 0.0,
    }
}

/// `∫_0^b w(s) S_{λj}(s) S_{λk}(b-s) ds` with `w ≡ 1` or
/// `w(s) = s^{1-α}(b-s)^{1-α}`, on a mesh refined toward both ends.
pub fn duhamel_weight(
    alpha: FracOrder,
    lambda_j: f64,
    lambda_k: f64,
    b: f64,
    weighting: Weighting,
    grading: &Grading,
) -> Result<f64> {
    check_horizon(b)?;
    weighting.check(alpha)?;
    grading.validate()?;
    let e = end_exponent(alpha, weighting);
    let mesh = graded_mesh(b, Some(e), Some(Some(e)), grading);
    let comp = weighting == Weighting::Compensated;
    let a = alpha.value();
    mesh_sum(&mesh, |s, r| {
        let mut v = mode_kernel(alpha, lambda_j, s)? * mode_kernel(alpha, lambda_k, r)?;
        if comp {
            v *= (s * r).powf(1.0 - a);
        }
        Ok(v)
    })
}

fn mesh_sum<F: Fn(f64, f64) -> Result<f64> + Sync>(mesh: &Mesh, f: F) -> Result<f64> {
    let vals = (0..mesh.len())
        .into_par_iter()
        .map(|m| f(mesh.nodes[m], mesh.complements[m]).map(|v| mesh.weights[m] * v))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum())
}

/// Weight applied to a same-time product of two outputs.
pub fn product_factor(alpha: FracOrder, weighting: Weighting, t: f64) -> f64 {
    match weighting {
        Weighting::None => 1.0,
        Weighting::Compensated => t.powf(2.0 - 2.0 * alpha.value()),
    }
}

/// Same-time product integrals `T_{gh} = ∫_0^b w(s) S_g(s) S_h(s) ds` for
/// a list of eigenvalues, with `w ≡ 1` or `w(s) = s^{2-2α}`.
#[derive(Debug, Clone)]
pub struct ProductKernel {
    pub eigenvalues: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
}

impl ProductKernel {
    pub fn new(
        alpha: FracOrder,
        eigenvalues: &[f64],
        grid: &TimeGrid,
        weighting: Weighting,
    ) -> Result<Self> {
        weighting.check(alpha)?;
        let table = KernelTable::new(alpha, eigenvalues, grid.nodes())?;
        let w: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(t, w)| w * product_factor(alpha, weighting, *t))
            .collect();
        let g = eigenvalues.len();
        let matrix = (0..g)
            .into_par_iter()
            .map(|i| {
                (0..g)
                    .map(|j| {
                        w.iter()
                            .zip(&table.values[i])
                            .zip(&table.values[j])
                            .map(|((w, a), b)| w * a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(ProductKernel {
            eigenvalues: eigenvalues.to_vec(),
            matrix,
        })
    }
}

/// `∫_0^b w(s) S_{λj}(s) S_{λk}(s) ds` for a single pair.
pub fn product_weight(
    alpha: FracOrder,
    lambda_j: f64,
    lambda_k: f64,
    b: f64,
    weighting: Weighting,
    grading: &Grading,
) -> Result<f64> {
    let grid = TimeGrid::graded(b, alpha, grading)?;
    Ok(ProductKernel::new(alpha, &[lambda_j, lambda_k], &grid, weighting)?.matrix[0][1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn order(a: f64) -> FracOrder {
        FracOrder::new(a).unwrap()
    }

    #[test]
    fn classical_kernel_is_exponential() {
        let v = propagate_coeff(order(1.0), -PI * PI, 1.0, 0.1).unwrap();
        assert!((v - (-0.1 * PI * PI).exp()).abs() < 1e-15);
        assert_eq!(propagate_coeff(order(0.6), -3.0, 0.0, 0.4).unwrap(), 0.0);
        assert!(matches!(
            propagate_coeff(order(0.6), -3.0, 1.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn time_grid_weights() {
        let g = TimeGrid::graded(2.0, order(0.7), &Grading::default()).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(g.nodes()[0] > 0.0);
        let u = TimeGrid::uniform(1.0, 10).unwrap();
        assert!((u.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(TimeGrid::from_nodes(1.0, vec![0.5, 0.2]).is_err());
        assert!(TimeGrid::from_nodes(1.0, vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn duhamel_weight_classical_closed_forms() {
        let g = Grading::default();
        let v = duhamel_weight(order(1.0), 0.0, 0.0, 1.5, Weighting::None, &g).unwrap();
        assert!((v - 1.5).abs() < 1e-13);
        let (lj, lk, b) = (-PI * PI, -4.0 * PI * PI, 0.7);
        let expect = ((lk * b).exp() - (lj * b).exp()) / (lk - lj);
        let v = duhamel_weight(order(1.0), lj, lk, b, Weighting::None, &g).unwrap();
        assert!((v - expect).abs() < 1e-13 * expect.abs());
        assert!(matches!(
            duhamel_weight(order(0.5), lj, lk, b, Weighting::None, &g),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn product_weight_classical_closed_form() {
        let (l, b) = (-2.0 * PI * PI, 1.0);
        let v = product_weight(order(1.0), l, l, b, Weighting::None, &Grading::default()).unwrap();
        let expect = ((2.0 * l * b).exp() - 1.0) / (2.0 * l);
        assert!((v - expect).abs() < 1e-13 * expect);
    }
}
