//! Strategic-sensor tests, kernel membership, and the regional gradient
//! observability Gramian.

use crate::dynamics::{
    basis_kernels, outputs, product_factor, simulate, KernelTable, ObservationRecord, TimeGrid,
    Weighting,
};
use crate::error::{Error, Result};
use crate::mlf::FracOrder;
use crate::quadrature::Grading;
use crate::sensing::{Axis, Couplings, SensorSuite};
use crate::spectral::{
    grad_adjoint, Basis, Dim, Mode, QuadGrid, Region, Restrict, VectorFieldSamples,
};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-10;
/// Relative threshold below which a Gram eigenvalue counts as zero.
pub const PD_TOL: f64 = 1e-10;
/// Relative output level below which a state is taken to be unseen.
pub const KERNEL_TOL: f64 = 1e-9;
const CONDITION_WARN: f64 = 1e12;

/// `G_j^s` for one eigenvalue group: entry `(i, k)` couples sensor `i` to
/// `∂ξ_{jk}/∂x_s`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupMatrices {
    pub eigenvalue: f64,
    pub members: Vec<Mode>,
    /// One `p × r_j` matrix per axis, stored row-major as nested rows.
    pub per_axis: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GMatrixSet {
    pub dim: Dim,
    pub sensors: usize,
    pub groups: Vec<GroupMatrices>,
}

pub fn build_g_matrices(basis: &Basis, suite: &SensorSuite) -> Result<GMatrixSet> {
    if basis.dim() != suite.dim() {
        return Err(Error::Size(
            "sensor suite and basis differ in dimension".into(),
        ));
    }
    let axes: &[Axis] = match basis.dim() {
        Dim::One => &[Axis::X1],
        Dim::Two => &[Axis::X1, Axis::X2],
    };
    let groups = basis
        .groups()
        .par_iter()
        .map(|g| GroupMatrices {
            eigenvalue: g.eigenvalue,
            members: g.members.clone(),
            per_axis: axes
                .iter()
                .map(|&ax| {
                    suite
                        .sensors()
                        .iter()
                        .map(|s| g.members.iter().map(|m| s.grad_coupling(*m, ax)).collect())
                        .collect()
                })
                .collect(),
        })
        .collect();
    Ok(GMatrixSet {
        dim: basis.dim(),
        sensors: suite.len(),
        groups,
    })
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRank {
    pub eigenvalue: f64,
    pub members: Vec<Mode>,
    pub multiplicity: usize,
    pub rank: usize,
    pub smallest_singular_value: f64,
}

/// Outcome of the rank test. The verdict only covers the tested groups,
/// i.e. it reads "strategic at truncation M".
#[derive(Debug, Clone, Serialize)]
pub struct StrategicReport {
    pub strategic: bool,
    pub sensors: usize,
    pub max_multiplicity: usize,
    pub enough_sensors: bool,
    pub tolerance: f64,
    pub groups: Vec<GroupRank>,
    pub offending_group: Option<GroupRank>,
}

/// Rank condition for one space dimension: `p ≥ r_max` and every `G_j¹`
/// of full column rank `r_j`. `r_max` defaults to the largest multiplicity
/// in the set.
pub fn strategic_test_1d(gset: &GMatrixSet, r_max: Option<usize>) -> Result<StrategicReport> {
    if gset.dim != Dim::One {
        return Err(Error::Size(
            "the rank test applies to one space dimension".into(),
        ));
    }
    let mats: Vec<DMatrix<f64>> = gset
        .groups
        .iter()
        .map(|g| to_matrix(&g.per_axis[0]))
        .collect();
    let scale = mats.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let tol = RANK_TOL * scale;
    let groups: Vec<GroupRank> = gset
        .groups
        .iter()
        .zip(&mats)
        .map(|(g, m)| {
            let sv = m.clone().svd(false, false).singular_values;
            let rank = sv.iter().filter(|s| **s > tol).count();
            GroupRank {
                eigenvalue: g.eigenvalue,
                members: g.members.clone(),
                multiplicity: g.members.len(),
                rank,
                smallest_singular_value: sv.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let max_multiplicity =
        r_max.unwrap_or_else(|| groups.iter().map(|g| g.multiplicity).max().unwrap_or(0));
    let enough_sensors = gset.sensors >= max_multiplicity;
    let offending_group = groups.iter().find(|g| g.rank < g.multiplicity).cloned();
    Ok(StrategicReport {
        strategic: enough_sensors && offending_group.is_none(),
        sensors: gset.sensors,
        max_multiplicity,
        enough_sensors,
        tolerance: tol,
        groups,
        offending_group,
    })
}

#[derive(Debug, Clone)]
pub struct KernelTestResult {
    pub in_kernel: bool,
    pub sup_norm: f64,
    /// Cancellation-free bound on the outputs used to judge `sup_norm`.
    pub scale: f64,
    pub record: ObservationRecord,
}

/// Whether `g` (masked to `omega`) lies in the kernel of `K∇*p*_ω`.
///
/// Masking is exact only if the boxes of `g`'s grid are aligned with
/// `omega`; build the grid over a partition of the domain that contains
/// `omega`'s boxes.
pub fn kernel_test(
    g: &VectorFieldSamples,
    suite: &SensorSuite,
    alpha: FracOrder,
    omega: &Region,
    grid: &TimeGrid,
    basis: Arc<Basis>,
) -> Result<KernelTestResult> {
    let masked = g.restrict(omega);
    let y0 = grad_adjoint(&masked, basis.clone());
    let record = simulate(&y0, suite, alpha, grid, None)?;
    let couplings = suite.couplings(&basis)?;
    let kernels = basis_kernels(alpha, &basis, grid.nodes())?;
    // the largest coupling over all modes, so that a coupling that itself
    // cancels to zero does not shrink the reference
    let kap = (0..basis.len())
        .flat_map(|q| (0..suite.len()).map(move |i| (i, q)))
        .map(|(i, q)| couplings.get(i, q).abs())
        .fold(0.0, f64::max);
    let scale: f64 = (0..basis.len())
        .map(|q| {
            let s = kernels[q].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            y0.coeffs()[q].abs() * kap * s
        })
        .sum();
    let sup_norm = record.sup_norm();
    Ok(KernelTestResult {
        in_kernel: sup_norm <= KERNEL_TOL * scale || scale == 0.0,
        sup_norm,
        scale,
        record,
    })
}

/// All modes with every index at most `truncation`, in basis order.
pub fn potential_modes(dim: Dim, truncation: u32) -> Result<Vec<Mode>> {
    Ok(crate::spectral::build_basis(dim, truncation)?
        .modes()
        .to_vec())
}

/// Shared discretization of `p_ω∇K*K∇*p*_ω` on the potentials
/// `e_q = p_ω∇ξ_q`.
#[derive(Debug, Clone)]
pub struct RegionalSetup {
    pub alpha: FracOrder,
    pub weighting: Weighting,
    pub basis: Arc<Basis>,
    pub omega: Region,
    pub potentials: Vec<Mode>,
    /// `d[q][j] = ∫_ω ∇ξ_q · ∇ξ_j`.
    pub d: DMatrix<f64>,
    pub couplings: Couplings,
    pub grid: TimeGrid,
    /// Kernel values per eigenvalue group on `grid`.
    pub kernels: KernelTable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupParams {
    pub alpha: FracOrder,
    pub horizon: f64,
    pub weighting: Weighting,
    pub potential_truncation: u32,
}

impl RegionalSetup {
    pub fn new(
        basis: Arc<Basis>,
        suite: &SensorSuite,
        omega: &Region,
        params: SetupParams,
        grading: &Grading,
    ) -> Result<Self> {
        let SetupParams {
            alpha,
            horizon,
            weighting,
            potential_truncation,
        } = params;
        weighting.check(alpha)?;
        if omega.dim() != basis.dim() {
            return Err(Error::Size("region and basis differ in dimension".into()));
        }
        let potentials = potential_modes(basis.dim(), potential_truncation)?;
        let qgrid = QuadGrid::new(omega, potential_truncation + basis.truncation());
        let grads: Vec<Vec<[f64; 2]>> = basis
            .modes()
            .par_iter()
            .map(|m| qgrid.nodes().iter().map(|x| m.grad(*x)).collect())
            .collect();
        let pot_grads: Vec<Vec<[f64; 2]>> = potentials
            .par_iter()
            .map(|m| qgrid.nodes().iter().map(|x| m.grad(*x)).collect())
            .collect();
        let n = basis.len();
        let d_rows: Vec<Vec<f64>> = pot_grads
            .par_iter()
            .map(|gq| {
                (0..n)
                    .map(|j| {
                        qgrid
                            .weights()
                            .iter()
                            .zip(gq)
                            .zip(&grads[j])
                            .map(|((w, a), b)| w * (a[0] * b[0] + a[1] * b[1]))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let d = DMatrix::from_fn(potentials.len(), n, |q, j| d_rows[q][j]);
        let couplings = suite.couplings(&basis)?;
        let grid = TimeGrid::graded(horizon, alpha, grading)?;
        let lams: Vec<f64> = basis.groups().iter().map(|g| g.eigenvalue).collect();
        let kernels = KernelTable::new(alpha, &lams, grid.nodes())?;
        Ok(RegionalSetup {
            alpha,
            weighting,
            basis,
            omega: omega.clone(),
            potentials,
            d,
            couplings,
            grid,
            kernels,
        })
    }

    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    /// Mode coefficients of `∇*p*_ω Σ a_q e_q`, i.e. `c_j = Σ_q a_q d_{qj}`.
    pub fn state_coeffs(&self, a: &[f64]) -> Vec<f64> {
        (0..self.basis.len())
            .map(|j| (0..self.len()).map(|q| a[q] * self.d[(q, j)]).sum())
            .collect()
    }

    /// Kernel values for each basis mode on the setup's time grid.
    pub fn mode_kernels(&self) -> Vec<&[f64]> {
        (0..self.basis.len())
            .map(|q| self.kernels.values[self.basis.group_of(q)].as_slice())
            .collect()
    }

    /// Time weights including the observation weighting of both factors.
    pub fn product_weights(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .map(|(t, w)| w * product_factor(self.alpha, self.weighting, *t))
            .collect()
    }

    /// Outputs `K∇*p*_ω Σ a_q e_q` on the setup's time grid.
    pub fn outputs_of(&self, a: &[f64]) -> Vec<Vec<f64>> {
        let c = self.state_coeffs(a);
        let kernels: Vec<Vec<f64>> = self
            .mode_kernels()
            .into_iter()
            .map(|s| s.to_vec())
            .collect();
        outputs(&self.couplings, &c, &kernels, self.grid.len())
    }

    /// `Gram = Σ_i H_i T H_iᵀ` with `H_i[q][g] = Σ_{j∈g} d_{qj} κ_{ij}` and
    /// `T` the weighted same-time product integrals between groups.
    pub fn gram(&self) -> DMatrix<f64> {
        let w = self.product_weights();
        let ng = self.basis.groups().len();
        let kv = &self.kernels.values;
        let t = DMatrix::<f64>::from_fn(ng, ng, |g, h| {
            w.iter()
                .zip(&kv[g])
                .zip(&kv[h])
                .map(|((w, a), b)| w * a * b)
                .sum::<f64>()
        });
        let q = self.len();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for i in 0..self.couplings.sensors() {
            let mut h = DMatrix::<f64>::zeros(q, ng);
            for j in 0..self.basis.len() {
                let kap = self.couplings.get(i, j);
                if kap == 0.0 {
                    continue;
                }
                let g = self.basis.group_of(j);
                for r in 0..q {
                    h[(r, g)] += self.d[(r, j)] * kap;
                }
            }
            gram += &h * &t * h.transpose();
        }
        // symmetrize away rounding
        let gt = gram.transpose();
        (gram + gt) * 0.5
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GramReport {
    pub potentials: Vec<Mode>,
    pub matrix: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub smallest: f64,
    pub largest: f64,
    pub positive_definite: bool,
    /// Unit eigenvector of the smallest eigenvalue.
    pub weakest_direction: Vec<f64>,
}

impl GramReport {
    pub fn from_matrix(potentials: Vec<Mode>, gram: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(gram.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let smallest = eigenvalues.first().copied().unwrap_or(0.0);
        let largest = eigenvalues.last().copied().unwrap_or(0.0);
        let weakest_direction = order
            .first()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .unwrap_or_default();
        let positive_definite = largest > 0.0 && smallest > PD_TOL * largest;
        if positive_definite && largest / smallest > CONDITION_WARN {
            log::warn!(
                "Gram matrix is ill conditioned: eigenvalue ratio {:.2e}",
                largest / smallest
            );
        }
        let matrix = (0..gram.nrows())
            .map(|r| gram.row(r).iter().copied().collect())
            .collect();
        GramReport {
            potentials,
            matrix,
            eigenvalues,
            smallest,
            largest,
            positive_definite,
            weakest_direction,
        }
    }
}

/// Assembles the regional Gramian on the potentials with indices up to
/// `params.potential_truncation` and reports its spectrum.
pub fn gram_regional(
    basis: Arc<Basis>,
    suite: &SensorSuite,
    omega: &Region,
    params: SetupParams,
    grading: &Grading,
) -> Result<GramReport> {
    let setup = RegionalSetup::new(basis, suite, omega, params, grading)?;
    Ok(GramReport::from_matrix(
        setup.potentials.clone(),
        &setup.gram(),
    ))
}
