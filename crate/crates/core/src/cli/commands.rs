//! One function per subcommand. Each computes its payload, writes its
//! data files and report into the output directory, and returns the
//! payload.

use super::config::{ExperimentConfig, InitialCondition};
use super::io::{
    coefficients_csv, observations_csv, read_observations, scalar_grid_csv, vector_grid_csv,
    write_atomic,
};
use super::presets;
use super::report::ReportEnvelope;
use crate::dynamics::{mode_kernel, simulate, NoiseSpec, ObservationRecord, TimeGrid};
use crate::error::{Error, Result};
use crate::hum::{HumContext, HumSummary};
use crate::mlf::{mittag_leffler, MlfParams};
use crate::observability::{
    build_g_matrices, gram_regional, kernel_test, strategic_test_1d, GMatrixSet, GramReport,
    KernelTestResult, SetupParams, StrategicReport,
};
use crate::spectral::{build_basis, Dim, Mode, QuadGrid, Rect, Region, VectorFieldSamples};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Where and how a command writes its results.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    /// Record wall time in reports.
    pub timing: bool,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Output {
            dir: dir.into(),
            timing: false,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)
    }

    fn report<P: Serialize>(
        &self,
        command: &str,
        cfg: &ExperimentConfig,
        payload: &P,
        start: Instant,
    ) -> Result<()> {
        let mut env = ReportEnvelope::new(command, cfg, payload);
        if self.timing {
            env.wall_time_s = Some(start.elapsed().as_secs_f64());
        }
        self.write(&format!("{command}.json"), &env.to_bytes()?)
    }
}

/// `E_{α,β}(z)` over a list of arguments.
pub fn cmd_mlf(alpha: f64, beta: f64, zs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let params = MlfParams::new(alpha, beta)?;
    zs.iter()
        .map(|&z| Ok((z, mittag_leffler(params, z)?)))
        .collect()
}

/// CSV text `z,value` for [`cmd_mlf`] results.
pub fn mlf_table(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("z,value\n");
    for (z, v) in rows {
        s.push_str(&format!(
            "{},{}\n",
            super::io::fmt_f64(*z),
            super::io::fmt_f64(*v)
        ));
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub channels: usize,
    pub samples: usize,
    pub horizon: f64,
    pub channel_sup_norms: Vec<f64>,
    /// `∫_0^b z_i(t)² dt` by the grid's quadrature.
    pub channel_energies: Vec<f64>,
    pub energy: f64,
    pub noise: Option<NoiseSpec>,
}

impl SimulateSummary {
    pub fn of(record: &ObservationRecord) -> Self {
        let w = record.grid.weights();
        let channel_energies: Vec<f64> = record
            .channels
            .iter()
            .map(|c| c.iter().zip(w).map(|(z, w)| w * z * z).sum())
            .collect();
        SimulateSummary {
            channels: record.channels.len(),
            samples: record.grid.len(),
            horizon: record.grid.horizon(),
            channel_sup_norms: record
                .channels
                .iter()
                .map(|c| c.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
                .collect(),
            energy: channel_energies.iter().sum(),
            channel_energies,
            noise: record.noise,
        }
    }
}

fn require_initial(cfg: &ExperimentConfig) -> Result<&InitialCondition> {
    cfg.initial.as_ref().ok_or_else(|| {
        Error::Config("field `initial`: this command needs an initial condition".into())
    })
}

/// Simulated observations of the configured initial state.
pub fn simulate_record(cfg: &ExperimentConfig) -> Result<ObservationRecord> {
    require_initial(cfg)?;
    let basis = cfg.basis()?;
    let y0 = cfg
        .initial_state(&basis)?
        .expect("initial condition present");
    simulate(&y0, &cfg.suite()?, cfg.alpha, &cfg.time_grid()?, cfg.noise)
}

/// Writes `observations.csv`, the initial state as `initial_coefficients.csv`
/// and `initial_field.csv`, and `simulate.json`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Output) -> Result<SimulateSummary> {
    let start = Instant::now();
    require_initial(cfg)?;
    let basis = cfg.basis()?;
    let y0 = cfg
        .initial_state(&basis)?
        .expect("initial condition present");
    let record = simulate(&y0, &cfg.suite()?, cfg.alpha, &cfg.time_grid()?, cfg.noise)?;
    out.write("observations.csv", &observations_csv(&record)?)?;
    out.write("initial_coefficients.csv", &coefficients_csv(&y0)?)?;
    out.write(
        "initial_field.csv",
        &scalar_grid_csv(basis.dim(), |x| y0.eval(x))?,
    )?;
    let summary = SimulateSummary::of(&record);
    out.report("simulate", cfg, &summary, start)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategicPayload {
    pub g_matrices: GMatrixSet,
    /// Rank test; one space dimension only.
    pub rank_test: Option<StrategicReport>,
    /// Regional Gramian on ω; two space dimensions only.
    pub regional_gram: Option<GramReport>,
}

fn setup_params(cfg: &ExperimentConfig) -> SetupParams {
    SetupParams {
        alpha: cfg.alpha,
        horizon: cfg.horizon,
        weighting: cfg.weighting,
        potential_truncation: cfg.potential_truncation(),
    }
}

fn regional_gram(cfg: &ExperimentConfig) -> Result<GramReport> {
    let basis = Arc::new(build_basis(cfg.dim()?, cfg.gram_truncation())?);
    gram_regional(
        basis,
        &cfg.suite()?,
        &cfg.omega_region()?,
        setup_params(cfg),
        &cfg.grading(),
    )
}

pub fn cmd_strategic(cfg: &ExperimentConfig, out: &Output) -> Result<StrategicPayload> {
    let start = Instant::now();
    let basis = cfg.basis()?;
    let g_matrices = build_g_matrices(&basis, &cfg.suite()?)?;
    let payload = match basis.dim() {
        Dim::One => StrategicPayload {
            rank_test: Some(strategic_test_1d(&g_matrices, None)?),
            g_matrices,
            regional_gram: None,
        },
        Dim::Two => StrategicPayload {
            g_matrices,
            rank_test: None,
            regional_gram: Some(regional_gram(cfg)?),
        },
    };
    out.report("strategic", cfg, &payload, start)?;
    Ok(payload)
}

pub fn cmd_gram(cfg: &ExperimentConfig, out: &Output) -> Result<GramReport> {
    let start = Instant::now();
    let report = regional_gram(cfg)?;
    out.report("gram", cfg, &report, start)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructPayload {
    pub source: String,
    pub potentials: Vec<Mode>,
    pub result: HumSummary,
}

/// HUM reconstruction from an observation file, or from observations
/// simulated from the configured initial state. Writes `gradient.csv`
/// (and `gradient_true.csv` when the truth is known) and
/// `reconstruct.json`; fails with a non-convergence error after writing
/// if CG stopped early.
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    observations: Option<&Path>,
    out: &Output,
) -> Result<ReconstructPayload> {
    let start = Instant::now();
    let basis = cfg.basis()?;
    let omega = cfg.omega_region()?;
    let hum = cfg.hum_config();
    let ctx = HumContext::new(basis.clone(), &cfg.suite()?, &omega, &hum)?;
    let (record, source) = match observations {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            (
                read_observations(&text, cfg.horizon)?,
                path.display().to_string(),
            )
        }
        None => (simulate_record(cfg)?, "simulated".to_string()),
    };
    // the field whose gradient on ω is the reconstruction target
    let target = match &cfg.initial {
        Some(InitialCondition::RegionalGradient { terms, region }) => {
            let same_region = match region {
                None => true,
                Some(r) => Region::new(basis.dim(), r.clone())? == omega,
            };
            if same_region {
                Some(cfg.potential_field(terms)?)
            } else {
                None
            }
        }
        Some(InitialCondition::Coefficients { .. }) => cfg.initial_state(&basis)?,
        None => None,
    };
    let truth = target.as_ref().map(|f| ctx.true_gradient(f));
    let result = ctx.solve(&record, &hum, truth.as_ref())?;
    let potentials = ctx.setup().potentials.clone();
    let a = result.coefficients.0.clone();
    let dim = basis.dim();
    let reconstructed = |x| {
        let mut g = [0.0; 2];
        if omega.contains(x) {
            for (m, c) in potentials.iter().zip(&a) {
                let d = m.grad(x);
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
        }
        g
    };
    out.write("gradient.csv", &vector_grid_csv(dim, reconstructed)?)?;
    if let Some(field) = &target {
        let masked = |x| {
            if omega.contains(x) {
                field.grad(x)
            } else {
                [0.0; 2]
            }
        };
        out.write("gradient_true.csv", &vector_grid_csv(dim, masked)?)?;
    }
    let payload = ReconstructPayload {
        source,
        potentials: ctx.setup().potentials.clone(),
        result: HumSummary::from(&result),
    };
    out.report("reconstruct", cfg, &payload, start)?;
    if !result.converged {
        return Err(Error::NonConvergence {
            iterations: result.iterations,
            residual: result.residual,
        });
    }
    Ok(payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub in_kernel: bool,
    pub sup_norm: f64,
    pub scale: f64,
}

impl From<&KernelTestResult> for KernelSummary {
    fn from(k: &KernelTestResult) -> Self {
        KernelSummary {
            in_kernel: k.in_kernel,
            sup_norm: k.sup_norm,
            scale: k.scale,
        }
    }
}

/// Regional outputs against `c · t^{α-1} E_{α,α}(-2π² t^α)`.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormCheck {
    pub coefficient: f64,
    pub times: Vec<f64>,
    pub outputs: Vec<f64>,
    pub reference: Vec<f64>,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexamplePayload {
    /// `K∇*g` over the whole domain.
    pub global: KernelSummary,
    /// `K∇*p*_ω p_ω g`.
    pub regional: KernelSummary,
    /// The same test for `g = 0`.
    pub zero: KernelSummary,
    /// `g` is not seen globally but is seen from ω.
    pub observable_only_regionally: bool,
    /// Present for the built-in geometry, whose regional output is known
    /// in closed form.
    pub closed_form: Option<ClosedFormCheck>,
}

/// Boxes covering the domain, aligned with every edge of `omega`.
pub fn aligned_partition(omega: &Region) -> Result<Region> {
    let dim = omega.dim();
    let cuts = |s: usize| {
        let mut c: Vec<f64> = vec![0.0, 1.0];
        if s < dim.n() {
            for r in omega.rects() {
                c.push(r.lo[s]);
                c.push(r.hi[s]);
            }
        }
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    };
    let (c1, c2) = (cuts(0), cuts(1));
    let mut cells = Vec::new();
    for w1 in c1.windows(2) {
        match dim {
            Dim::One => cells.push(Rect::interval(w1[0], w1[1])),
            Dim::Two => {
                for w2 in c2.windows(2) {
                    cells.push(Rect::new([w1[0], w2[0]], [w1[1], w2[1]]));
                }
            }
        }
    }
    Region::new(dim, cells)
}

fn is_builtin_counterexample(cfg: &ExperimentConfig) -> bool {
    let reference = presets::find("counterexample")
        .expect("built-in preset")
        .config();
    cfg.sensors == reference.sensors
        && cfg.initial == reference.initial
        && cfg.omega == reference.omega
}

/// The zero-output example end to end: `g = ∇u` for the configured
/// potential `u` is tested against the whole domain, against ω, and
/// `g = 0` is tested as a control.
pub fn cmd_counterexample(cfg: &ExperimentConfig, out: &Output) -> Result<CounterexamplePayload> {
    let start = Instant::now();
    let basis = cfg.basis()?;
    let suite = cfg.suite()?;
    let omega = cfg.omega_region()?;
    let whole = Region::whole(basis.dim());
    let u = cfg.potential_field(require_initial(cfg)?.terms())?;
    let freq = 2 * basis.truncation().max(u.basis().truncation());
    let grid = Arc::new(QuadGrid::new(&aligned_partition(&omega)?, freq));
    let g = u.gradient_on(grid.clone());
    let times = match cfg.time_grid {
        super::config::TimeGridSpec::Uniform { .. } => cfg.time_grid()?,
        super::config::TimeGridSpec::Graded { .. } => TimeGrid::uniform(cfg.horizon, 20)?,
    };
    let global = kernel_test(&g, &suite, cfg.alpha, &whole, &times, basis.clone())?;
    let regional = kernel_test(&g, &suite, cfg.alpha, &omega, &times, basis.clone())?;
    let zero = kernel_test(
        &VectorFieldSamples::zeros(grid),
        &suite,
        cfg.alpha,
        &omega,
        &times,
        basis,
    )?;
    let closed_form = if is_builtin_counterexample(cfg) {
        let coefficient = 5.0 * 3f64.sqrt() / (8.0 * std::f64::consts::PI);
        let lambda = -2.0 * std::f64::consts::PI.powi(2);
        let reference: Vec<f64> = times
            .nodes()
            .iter()
            .map(|&t| Ok(coefficient * mode_kernel(cfg.alpha, lambda, t)?))
            .collect::<Result<_>>()?;
        let outputs = regional.record.channels[0].clone();
        let max_relative_deviation = outputs
            .iter()
            .zip(&reference)
            .map(|(z, r)| ((z - r) / r).abs())
            .fold(0.0, f64::max);
        Some(ClosedFormCheck {
            coefficient,
            times: times.nodes().to_vec(),
            outputs,
            reference,
            max_relative_deviation,
        })
    } else {
        None
    };
    let payload = CounterexamplePayload {
        observable_only_regionally: global.in_kernel && !regional.in_kernel,
        global: KernelSummary::from(&global),
        regional: KernelSummary::from(&regional),
        zero: KernelSummary::from(&zero),
        closed_form,
    };
    out.report("counterexample", cfg, &payload, start)?;
    Ok(payload)
}
