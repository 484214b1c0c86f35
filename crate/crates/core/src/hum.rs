//! Reconstruction of the regional initial gradient by the Hilbert
//! Uniqueness Method: the operator `Λ` on the potentials `p_ω∇ξ_q`, the
//! right-hand side from measurements, and a conjugate-gradient solve.

use crate::dynamics::{basis_kernels, outputs, ObservationRecord, TimeGrid, Weighting};
use crate::error::{Error, Result};
use crate::mlf::FracOrder;
use crate::observability::{RegionalSetup, SetupParams};
use crate::quadrature::Grading;
use crate::sensing::SensorSuite;
use crate::spectral::{Basis, QuadGrid, Region, SpectralField, VectorFieldSamples};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Coefficients `a_q` of `g = p_ω Σ a_q ∇ξ_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PotentialVector(pub Vec<f64>);

impl PotentialVector {
    pub fn zeros(n: usize) -> Self {
        PotentialVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &PotentialVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumConfig {
    /// Relative residual at which CG stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Tikhonov shift added to the diagonal of `Λ`.
    pub epsilon: f64,
    pub weighting: Weighting,
    pub state_truncation: u32,
    pub potential_truncation: u32,
    pub horizon: f64,
    pub alpha: FracOrder,
    pub grading: Grading,
}

impl Default for HumConfig {
    fn default() -> Self {
        HumConfig {
            tolerance: 1e-10,
            max_iterations: 500,
            epsilon: 0.0,
            weighting: Weighting::None,
            state_truncation: 6,
            potential_truncation: 6,
            horizon: 1.0,
            alpha: FracOrder::new(0.8).expect("valid order"),
            grading: Grading::default(),
        }
    }
}

impl HumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("CG tolerance must be positive".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("regularization must be nonnegative".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("at least one CG iteration is needed".into()));
        }
        if self.state_truncation == 0 || self.potential_truncation == 0 {
            return Err(Error::Config("truncations must be at least 1".into()));
        }
        self.grading.validate()
    }
}

/// Everything needed to apply `Λ` and build right-hand sides.
pub struct HumContext {
    setup: RegionalSetup,
    gram: OnceLock<DMatrix<f64>>,
}

/// Outcome of [`HumContext::solve`].
#[derive(Debug, Clone)]
pub struct HumResult {
    pub coefficients: PotentialVector,
    pub gradient: VectorFieldSamples,
    pub iterations: usize,
    /// `‖b - (Λ+εI)a‖ / ‖b‖` at exit.
    pub residual: f64,
    pub converged: bool,
    /// Smallest Rayleigh quotient `pᵀΛp / pᵀp` over the search directions.
    pub smallest_ritz: Option<f64>,
    pub relative_error: Option<f64>,
}

/// Serializable summary of a [`HumResult`].
#[derive(Debug, Clone, Serialize)]
pub struct HumSummary {
    pub coefficients: PotentialVector,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub smallest_ritz: Option<f64>,
    pub relative_error: Option<f64>,
}

impl From<&HumResult> for HumSummary {
    fn from(r: &HumResult) -> Self {
        HumSummary {
            coefficients: r.coefficients.clone(),
            iterations: r.iterations,
            residual: r.residual,
            converged: r.converged,
            smallest_ritz: r.smallest_ritz,
            relative_error: r.relative_error,
        }
    }
}

/// Nonpositive-curvature threshold relative to the largest curvature seen.
const CURVATURE_FLOOR: f64 = 1e-14;

impl HumContext {
    pub fn new(
        basis: Arc<Basis>,
        suite: &SensorSuite,
        omega: &Region,
        config: &HumConfig,
    ) -> Result<Self> {
        config.validate()?;
        if basis.truncation() != config.state_truncation {
            return Err(Error::Config(format!(
                "basis truncation {} differs from the configured {}",
                basis.truncation(),
                config.state_truncation
            )));
        }
        let params = SetupParams {
            alpha: config.alpha,
            horizon: config.horizon,
            weighting: config.weighting,
            potential_truncation: config.potential_truncation,
        };
        Ok(HumContext {
            setup: RegionalSetup::new(basis, suite, omega, params, &config.grading)?,
            gram: OnceLock::new(),
        })
    }

    pub fn setup(&self) -> &RegionalSetup {
        &self.setup
    }

    pub fn len(&self) -> usize {
        self.setup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.setup.is_empty()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| self.setup.gram())
    }

    /// `Gram · a` through the assembled matrix.
    pub fn apply_gram(&self, a: &PotentialVector) -> PotentialVector {
        let v = self.gram() * DVector::from_column_slice(&a.0);
        PotentialVector(v.iter().copied().collect())
    }

    /// `(p_ω∇ψ(b), e_q)` where `ψ(b) = ∫_0^b w S(s) C*z(s) ds` is the
    /// adjoint response to channel data `z` given on the setup's time grid.
    fn adjoint_response(&self, z: &[Vec<f64>]) -> PotentialVector {
        let s = &self.setup;
        let w = s.product_weights();
        let kernels = s.mode_kernels();
        let psi: Vec<f64> = (0..s.basis.len())
            .map(|j| {
                (0..s.couplings.sensors())
                    .map(|i| {
                        let kap = s.couplings.get(i, j);
                        if kap == 0.0 {
                            return 0.0;
                        }
                        let integral: f64 = w
                            .iter()
                            .zip(kernels[j])
                            .zip(&z[i])
                            .map(|((w, k), z)| w * k * z)
                            .sum();
                        kap * integral
                    })
                    .sum()
            })
            .collect();
        PotentialVector(
            (0..s.len())
                .map(|q| (0..s.basis.len()).map(|j| s.d[(q, j)] * psi[j]).sum())
                .collect(),
        )
    }

    /// `Λa`, computed matrix-free: outputs of `∇*p*_ω Σ a_q e_q` on the time
    /// grid, then the adjoint response to them.
    pub fn apply_lambda(&self, a: &PotentialVector) -> PotentialVector {
        let z = self.setup.outputs_of(&a.0);
        self.adjoint_response(&z)
    }

    /// Right-hand side from measurements. Records on a different time grid
    /// are carried over by linear interpolation of `t^{1-α} z(t)`.
    pub fn rhs_from_data(&self, record: &ObservationRecord) -> Result<PotentialVector> {
        let s = &self.setup;
        if record.channels.len() != s.couplings.sensors() {
            return Err(Error::Size(format!(
                "record has {} channels, the suite has {} sensors",
                record.channels.len(),
                s.couplings.sensors()
            )));
        }
        let mesh = s.grid.nodes();
        if record.grid.nodes() == mesh {
            return Ok(self.adjoint_response(&record.channels));
        }
        if record.grid.len() < mesh.len() {
            log::warn!(
                "observation grid ({} samples) is coarser than the quadrature mesh ({} nodes); interpolating",
                record.grid.len(),
                mesh.len()
            );
        }
        if (record.grid.horizon() - s.grid.horizon()).abs() > 1e-12 * s.grid.horizon() {
            return Err(Error::Size(
                "record horizon differs from the configured horizon".into(),
            ));
        }
        let z: Vec<Vec<f64>> = record
            .channels
            .iter()
            .map(|ch| resample(s.alpha, record.grid.nodes(), ch, mesh))
            .collect();
        Ok(self.adjoint_response(&z))
    }

    /// Conjugate gradients on `(Λ + εI) a = rhs` from `a = 0`.
    pub fn solve_rhs(&self, rhs: &PotentialVector, config: &HumConfig) -> Result<CgOutcome> {
        cg(|v| self.apply_lambda(v), rhs, config)
    }

    /// Full reconstruction from measurements, with the relative `(L²(ω))ⁿ`
    /// error when the true gradient on [`HumContext::omega_grid`] is given.
    pub fn solve(
        &self,
        record: &ObservationRecord,
        config: &HumConfig,
        truth: Option<&VectorFieldSamples>,
    ) -> Result<HumResult> {
        let rhs = self.rhs_from_data(record)?;
        let out = self.solve_rhs(&rhs, config)?;
        let gradient = self.gradient_samples(&out.solution);
        let relative_error = truth.map(|t| reconstruction_error(&gradient, t));
        Ok(HumResult {
            coefficients: out.solution,
            gradient,
            iterations: out.iterations,
            residual: out.residual,
            converged: out.converged,
            smallest_ritz: out.smallest_ritz,
            relative_error,
        })
    }

    /// Quadrature grid on `ω` used for reconstructed gradients.
    pub fn omega_grid(&self) -> Arc<QuadGrid> {
        let s = &self.setup;
        let top = s
            .potentials
            .iter()
            .map(|m| m.max_index())
            .max()
            .unwrap_or(1);
        Arc::new(QuadGrid::new(&s.omega, 2 * top.max(s.basis.truncation())))
    }

    /// `p_ω Σ a_q ∇ξ_q` on [`HumContext::omega_grid`].
    pub fn gradient_samples(&self, a: &PotentialVector) -> VectorFieldSamples {
        let pots = &self.setup.potentials;
        VectorFieldSamples::from_fn(self.omega_grid(), |x| {
            let mut g = [0.0; 2];
            for (m, c) in pots.iter().zip(&a.0) {
                if *c != 0.0 {
                    let d = m.grad(x);
                    g[0] += c * d[0];
                    g[1] += c * d[1];
                }
            }
            g
        })
    }

    /// `∇y` of a state on [`HumContext::omega_grid`].
    pub fn true_gradient(&self, y: &SpectralField) -> VectorFieldSamples {
        y.gradient_on(self.omega_grid())
    }

    /// The state `∇*p*_ω Σ a_q e_q` whose measurements the operator models.
    pub fn model_state(&self, a: &PotentialVector) -> Result<SpectralField> {
        SpectralField::from_coeffs(self.setup.basis.clone(), self.setup.state_coeffs(&a.0))
    }

    /// Potentials `a` with `p_ω Σ a_q ∇ξ_q = p_ω ∇y` when `y` lies in
    /// their span.
    pub fn potentials_of(&self, y: &SpectralField) -> PotentialVector {
        PotentialVector(
            self.setup
                .potentials
                .iter()
                .map(|m| y.coeff(*m).unwrap_or(0.0))
                .collect(),
        )
    }

    /// Model outputs of `a` on an arbitrary time grid.
    pub fn predicted(&self, a: &PotentialVector, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
        let s = &self.setup;
        let kernels = basis_kernels(s.alpha, &s.basis, grid.nodes())?;
        Ok(outputs(
            &s.couplings,
            &s.state_coeffs(&a.0),
            &kernels,
            grid.len(),
        ))
    }

    /// Discrepancy principle: the largest `ε` in `candidates` whose data
    /// misfit `‖z_model − z‖_{L²(0,b;Rᵖ)}` stays within `tau·σ·√(p b)`.
    /// Falls back to the smallest candidate.
    pub fn discrepancy_epsilon(
        &self,
        record: &ObservationRecord,
        sigma: f64,
        tau: f64,
        candidates: &[f64],
        config: &HumConfig,
    ) -> Result<(f64, HumResult)> {
        if candidates.is_empty() {
            return Err(Error::Config("no regularization candidates given".into()));
        }
        let mut eps: Vec<f64> = candidates.to_vec();
        eps.sort_by(|a, b| b.total_cmp(a));
        let p = record.channels.len() as f64;
        let target = tau * sigma * (p * record.grid.horizon()).sqrt();
        let rhs = self.rhs_from_data(record)?;
        let mut last = None;
        for e in eps {
            let cfg = HumConfig {
                epsilon: e,
                ..*config
            };
            let out = self.solve_rhs(&rhs, &cfg)?;
            let model = self.predicted(&out.solution, &record.grid)?;
            let misfit: f64 = model
                .iter()
                .zip(&record.channels)
                .map(|(m, z)| {
                    m.iter()
                        .zip(z)
                        .zip(record.grid.weights())
                        .map(|((a, b), w)| w * (a - b).powi(2))
                        .sum::<f64>()
                })
                .sum::<f64>()
                .sqrt();
            let gradient = self.gradient_samples(&out.solution);
            let result = HumResult {
                coefficients: out.solution,
                gradient,
                iterations: out.iterations,
                residual: out.residual,
                converged: out.converged,
                smallest_ritz: out.smallest_ritz,
                relative_error: None,
            };
            if misfit <= target {
                return Ok((e, result));
            }
            last = Some((e, result));
        }
        Ok(last.expect("nonempty candidates"))
    }
}

/// Linear interpolation of `t^{1-α} z(t)` from `(ts, zs)` onto `mesh`,
/// returned as values of `z`. Constant continuation beyond the last sample,
/// linear extrapolation before the first.
fn resample(alpha: FracOrder, ts: &[f64], zs: &[f64], mesh: &[f64]) -> Vec<f64> {
    let a = alpha.value();
    let u: Vec<f64> = ts
        .iter()
        .zip(zs)
        .map(|(t, z)| t.powf(1.0 - a) * z)
        .collect();
    mesh.iter()
        .map(|&t| {
            let v = if ts.len() == 1 {
                u[0]
            } else if t >= ts[ts.len() - 1] {
                u[u.len() - 1]
            } else {
                let k = ts.partition_point(|s| *s <= t).clamp(1, ts.len() - 1);
                let (t0, t1) = (ts[k - 1], ts[k]);
                u[k - 1] + (u[k] - u[k - 1]) * (t - t0) / (t1 - t0)
            };
            v * t.powf(a - 1.0)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: PotentialVector,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub smallest_ritz: Option<f64>,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Removes from `r` its components along the orthonormal `dirs`; two
/// Gram–Schmidt sweeps keep the result orthogonal to working precision.
fn reorthogonalize(r: &mut [f64], dirs: &[Vec<f64>]) {
    for _ in 0..2 {
        for u in dirs {
            let c: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
            axpy(r, -c, u);
        }
    }
}

/// Conjugate gradients for `(A + εI) x = rhs`, `x₀ = 0`.
///
/// Every residual is reorthogonalized against the earlier ones, which
/// keeps the finite-termination property (at most `n` steps) on the
/// ill-conditioned systems regional observability produces.
pub fn cg<F: Fn(&PotentialVector) -> PotentialVector>(
    apply: F,
    rhs: &PotentialVector,
    config: &HumConfig,
) -> Result<CgOutcome> {
    let n = rhs.len();
    let b_norm = rhs.norm();
    let mut x = PotentialVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual: 0.0,
            converged: true,
            smallest_ritz: None,
        });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut dirs: Vec<Vec<f64>> = vec![r.0.iter().map(|v| v / b_norm).collect()];
    let mut smallest: Option<f64> = None;
    let mut largest: f64 = 0.0;
    for it in 1..=config.max_iterations {
        let mut ap = apply(&p);
        axpy(&mut ap.0, config.epsilon, &p.0);
        let pap = p.dot(&ap);
        let pp = p.dot(&p);
        let ritz = pap / pp;
        largest = largest.max(ritz);
        smallest = Some(smallest.map_or(ritz, |s: f64| s.min(ritz)));
        if !(ritz > CURVATURE_FLOOR * largest) {
            let scale = pp.sqrt();
            return Err(Error::NotPositiveDefinite {
                curvature: ritz,
                direction: p.0.iter().map(|v| v / scale).collect(),
            });
        }
        let step = rr / pap;
        axpy(&mut x.0, step, &p.0);
        axpy(&mut r.0, -step, &ap.0);
        if dirs.len() < n {
            reorthogonalize(&mut r.0, &dirs);
        }
        let rr_new = r.dot(&r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= config.tolerance {
            return Ok(CgOutcome {
                solution: x,
                iterations: it,
                residual: rel,
                converged: true,
                smallest_ritz: smallest,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        let r_norm = rr.sqrt();
        dirs.push(r.0.iter().map(|v| v / r_norm).collect());
        for (pi, ri) in p.0.iter_mut().zip(&r.0) {
            *pi = ri + beta * *pi;
        }
    }
    // report the true residual of the last iterate
    let mut ax = apply(&x);
    axpy(&mut ax.0, config.epsilon, &x.0);
    let res = rhs
        .0
        .iter()
        .zip(&ax.0)
        .map(|(b, a)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    Ok(CgOutcome {
        solution: x,
        iterations: config.max_iterations,
        residual: res,
        converged: res <= config.tolerance,
        smallest_ritz: smallest,
    })
}

/// `‖rec − truth‖ / ‖truth‖` in `(L²(ω))ⁿ`, or the absolute norm when the
/// truth vanishes. Both fields must live on the same grid.
pub fn reconstruction_error(rec: &VectorFieldSamples, truth: &VectorFieldSamples) -> f64 {
    let diff = VectorFieldSamples {
        grid: rec.grid.clone(),
        components: rec
            .components
            .iter()
            .zip(&truth.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    };
    let dn = diff.norm_sq().sqrt();
    let tn = truth.norm_sq().sqrt();
    if tn == 0.0 {
        dn
    } else {
        dn / tn
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Dim, Rect};

    #[test]
    fn cg_solves_small_spd_system() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let apply = |v: &PotentialVector| {
            PotentialVector(
                (&m * DVector::from_column_slice(&v.0))
                    .iter()
                    .copied()
                    .collect(),
            )
        };
        let x_true = PotentialVector(vec![1.0, -2.0, 0.5]);
        let b = apply(&x_true);
        let out = cg(apply, &b, &HumConfig::default()).unwrap();
        assert!(out.converged);
        for (a, b) in out.solution.0.iter().zip(&x_true.0) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(out.smallest_ritz.unwrap() > 0.0);
    }

    #[test]
    fn cg_flags_singular_direction() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let apply = |v: &PotentialVector| {
            PotentialVector(
                (&m * DVector::from_column_slice(&v.0))
                    .iter()
                    .copied()
                    .collect(),
            )
        };
        // a right-hand side with a component along the null direction
        let b = PotentialVector(vec![0.0, 1.0]);
        assert!(matches!(
            cg(apply, &b, &HumConfig::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cg_zero_rhs() {
        let out = cg(
            |v| v.clone(),
            &PotentialVector::zeros(4),
            &HumConfig::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution.norm(), 0.0);
    }

    #[test]
    fn reconstruction_error_examples() {
        let omega = Region::new(Dim::Two, vec![Rect::new([0.0, 0.0], [1.0, 0.5])]).unwrap();
        let grid = Arc::new(QuadGrid::new(&omega, 2));
        let t = VectorFieldSamples::from_fn(grid.clone(), |x| [x[0], x[1] * x[0]]);
        assert_eq!(reconstruction_error(&t, &t), 0.0);
        let zero = VectorFieldSamples::zeros(grid.clone());
        assert!((reconstruction_error(&zero, &t) - 1.0).abs() < 1e-15);
        let twice = VectorFieldSamples::from_fn(grid, |x| [2.0 * x[0], 2.0 * x[1] * x[0]]);
        assert!((reconstruction_error(&twice, &t) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resample_is_exact_for_compensated_linear_data() {
        let alpha = FracOrder::new(0.7).unwrap();
        // z(t) = t^{α-1}(1 + 2t) so that t^{1-α} z is linear
        let ts = [0.1, 0.4, 0.8, 1.0];
        let zs: Vec<f64> = ts
            .iter()
            .map(|t: &f64| t.powf(-0.3) * (1.0 + 2.0 * t))
            .collect();
        let mesh = [0.05, 0.2, 0.55, 0.9];
        let got = resample(alpha, &ts, &zs, &mesh);
        for (t, v) in mesh.iter().zip(got) {
            assert!((v - t.powf(-0.3) * (1.0 + 2.0 * t)).abs() < 1e-12);
        }
    }
}
