//! Quadrature rules: Gauss–Legendre (single and composite), tanh-sinh for
//! endpoint singularities, and geometrically graded time meshes for the
//! weakly singular `t^(α-1)` kernels of the fractional solution operator.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Maps the rule onto `[a, b]`, appending to `nodes`/`weights`.
    pub fn push_mapped(&self, a: f64, b: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn composite(a: f64, b: f64, panels: usize, rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(panels * rule.len());
    let mut weights = Vec::with_capacity(panels * rule.len());
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        rule.push_mapped(lo, hi, &mut nodes, &mut weights);
    }
    (nodes, weights)
}

const TS_T_MAX: f64 = 6.1;
const TS_MAX_LEVEL: u32 = 11;

/// Tanh-sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// `f(x, b - x)` receives the distance to the right end alongside `x`, so
/// integrable singularities at either end can be resolved: nodes approach
/// each end to within about `1e-300·(b-a)`.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let eval_pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let delta = (-u).exp() / cu;
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        if w == 0.0 || delta == 0.0 {
            return 0.0;
        }
        let d = half * delta;
        let near_left = f(a + d, (b - a) - d);
        let near_right = f(b - d, d);
        w * (near_left + near_right)
    };

    let mut h = 1.0;
    let mut sum = FRAC_PI_2 * f(0.5 * (a + b), half);
    let mut k = 1;
    while k as f64 * h <= TS_T_MAX {
        sum += eval_pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= TS_T_MAX {
            sum += eval_pair(k as f64 * h);
            k += 2;
        }
        let next = sum * h * half;
        if !next.is_finite() {
            return Err(Error::Accuracy(
                "tanh-sinh produced a non-finite sum".into(),
            ));
        }
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && diff <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        if level >= 3 && next == 0.0 && diff == 0.0 {
            return Ok(0.0);
        }
    }
    Err(Error::Accuracy(format!(
        "tanh-sinh did not reach relative tolerance {rel_tol:e} on [{a}, {b}]"
    )))
}

/// Shape of a time mesh on `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    /// Panels shrink by `ratio` toward each refined end until the tail
    /// beyond the innermost break carries less than `tail_tol` of the mass.
    Geometric {
        ratio: f64,
        nodes_per_panel: usize,
        tail_tol: f64,
    },
    /// Breaks at `(k/N)^q` toward each refined end.
    Algebraic {
        exponent: f64,
        panels: usize,
        nodes_per_panel: usize,
    },
}

impl Default for Grading {
    fn default() -> Self {
        Grading::Geometric {
            ratio: 0.25,
            nodes_per_panel: 16,
            tail_tol: 1e-15,
        }
    }
}

impl Grading {
    /// Same family, roughly twice the resolution.
    pub fn refined(&self) -> Self {
        match *self {
            Grading::Geometric {
                ratio,
                nodes_per_panel,
                tail_tol,
            } => Grading::Geometric {
                ratio: ratio.sqrt(),
                nodes_per_panel: nodes_per_panel + nodes_per_panel / 2,
                tail_tol: tail_tol * 1e-2,
            },
            Grading::Algebraic {
                exponent,
                panels,
                nodes_per_panel,
            } => Grading::Algebraic {
                exponent,
                panels: 2 * panels,
                nodes_per_panel,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Grading::Geometric {
                ratio,
                nodes_per_panel,
                tail_tol,
            } => {
                if !(ratio > 0.0 && ratio < 1.0) || nodes_per_panel == 0 || !(tail_tol > 0.0) {
                    return Err(Error::Config(format!("invalid geometric grading {self:?}")));
                }
            }
            Grading::Algebraic {
                exponent,
                panels,
                nodes_per_panel,
            } => {
                if !(exponent >= 1.0) || panels == 0 || nodes_per_panel == 0 {
                    return Err(Error::Config(format!("invalid algebraic grading {self:?}")));
                }
            }
        }
        Ok(())
    }
}

/// Behaviour of an integrand at one end of `[0, b]`: `None` for smooth,
/// `Some(e)` for `~ s^e` with `e > -1`.
pub type EndBehaviour = Option<f64>;

/// Breakpoints of a one-sided mesh on `[0, len]` refined toward 0.
fn one_sided_breaks(len: f64, end: EndBehaviour, grading: &Grading) -> Vec<f64> {
    match *grading {
        Grading::Geometric {
            ratio, tail_tol, ..
        } => {
            let e = end.unwrap_or(0.0).max(-0.999);
            // mass of s^e on [0,h] relative to [0,len] is (h/len)^(e+1)
            let floor = (tail_tol * (e + 1.0)).powf(1.0 / (e + 1.0)).max(1e-290);
            let mut breaks = vec![len];
            let mut x = len;
            while x > floor * len {
                x *= ratio;
                breaks.push(x);
            }
            breaks.push(0.0);
            breaks.reverse();
            breaks
        }
        Grading::Algebraic {
            exponent, panels, ..
        } => (0..=panels)
            .map(|k| len * (k as f64 / panels as f64).powf(exponent))
            .collect(),
    }
}

fn nodes_per_panel(grading: &Grading) -> usize {
    match *grading {
        Grading::Geometric {
            nodes_per_panel, ..
        }
        | Grading::Algebraic {
            nodes_per_panel, ..
        } => nodes_per_panel,
    }
}

/// Nodes on `[0, b]` together with their distance to `b`, which stays
/// accurate where `b - node` would round to zero.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub complements: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Composite Gauss–Legendre mesh on `[0, b]` graded toward 0 (behaviour
/// `left`) and, when `right` is given, also toward `b`. Weights sum to `b`
/// up to rounding.
pub fn graded_mesh(
    b: f64,
    left: EndBehaviour,
    right: Option<EndBehaviour>,
    grading: &Grading,
) -> Mesh {
    let rule = GaussLegendre::new(nodes_per_panel(grading));
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut complements = Vec::new();
    match right {
        None => {
            let br = one_sided_breaks(b, left, grading);
            for w in br.windows(2) {
                rule.push_mapped(w[0], w[1], &mut nodes, &mut weights);
            }
            complements.extend(nodes.iter().map(|s| b - s));
        }
        Some(right) => {
            let mid = 0.5 * b;
            let left_br = one_sided_breaks(mid, left, grading);
            for w in left_br.windows(2) {
                rule.push_mapped(w[0], w[1], &mut nodes, &mut weights);
            }
            complements.extend(nodes.iter().map(|s| b - s));
            // right half built in the distance-from-b variable
            let right_br = one_sided_breaks(mid, right, grading);
            let mut dist = Vec::new();
            let mut dw = Vec::new();
            for w in right_br.windows(2) {
                rule.push_mapped(w[0], w[1], &mut dist, &mut dw);
            }
            for (r, w) in dist.into_iter().zip(dw).rev() {
                nodes.push(b - r);
                complements.push(r);
                weights.push(w);
            }
        }
    }
    Mesh {
        nodes,
        complements,
        weights,
    }
}
