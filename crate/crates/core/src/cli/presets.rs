//! Built-in experiments, each a complete [`ExperimentConfig`].

// Sensor coordinates are generic-looking four-digit decimals such as
// 0.3183 and 0.7071, not stand-ins for 1/π or 1/√2.
#![allow(clippy::approx_constant)]

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use serde_json::{json, Value};
use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Value,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        let cfg: ExperimentConfig = serde_json::from_value((self.build)())
            .unwrap_or_else(|e| panic!("preset {}: {e}", self.name));
        cfg.validate()
            .unwrap_or_else(|e| panic!("preset {}: {e}", self.name));
        cfg
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "counterexample",
        summary: "filament at x1 = 1/2 with sin(pi x2); g = grad(sin(pi x1) sin(3 pi x2)) / pi^2 on [0,1]x[0,1/6]",
        build: counterexample,
    },
    Preset {
        name: "case1-zone",
        summary: "zone sensor on [0.2,0.8]x[0.1,0.6] with f = sin(sqrt2 pi x1) sin(sqrt2 pi x2)",
        build: case1_zone,
    },
    Preset {
        name: "case2-pointwise",
        summary: "one pointwise sensor at (0.3183, 0.2718)",
        build: case2_pointwise,
    },
    Preset {
        name: "case3-filament",
        summary: "filament [0.1,0.9]x{0.3} with f = sin(sqrt2 pi x1) sin(pi x2)",
        build: case3_filament,
    },
    Preset {
        name: "strategic-1d-midpoint",
        summary: "1-D pointwise sensor at 1/2, M = 6",
        build: strategic_midpoint,
    },
    Preset {
        name: "strategic-1d-irrational",
        summary: "1-D pointwise sensor at 1/pi, M = 12",
        build: strategic_irrational,
    },
    Preset {
        name: "pipeline",
        summary: "three pointwise sensors, alpha = 0.8, omega = [0,1]x[0,1/2], M = Q = 3",
        build: pipeline,
    },
    Preset {
        name: "heat",
        summary: "alpha = 1, three pointwise sensors, M = 8",
        build: heat,
    },
    Preset {
        name: "zero-distribution",
        summary: "zone sensor with a vanishing distribution",
        build: zero_distribution,
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!(
            "unknown preset `{name}`; known presets: {}",
            known.join(", ")
        ))
    })
}

fn counterexample() -> Value {
    json!({
        "alpha": 0.5,
        "dimension": 2,
        "truncation": 4,
        "omega": [{"lo": [0.0, 0.0], "hi": [1.0, 1.0 / 6.0]}],
        "sensors": [{
            "kind": "filament", "along": "x2", "at": 0.5, "from": 0.0, "to": 1.0,
            "distribution": {"kind": "sine_product", "amp": 1.0, "k": [null, 1.0]}
        }],
        "initial": {"kind": "regional_gradient", "terms": [{"mode": [1, 3], "value": 1.0 / (2.0 * PI * PI)}]},
        "time_grid": {"kind": "uniform", "samples": 20},
        "weighting": "compensated"
    })
}

fn case1_zone() -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 2,
        "truncation": 4,
        "omega": [{"lo": [0.0, 0.0], "hi": [1.0, 0.5]}],
        "sensors": [{
            "kind": "zone", "support": {"lo": [0.2, 0.1], "hi": [0.8, 0.6]},
            "distribution": {"kind": "sine_product", "amp": 1.0, "k": [SQRT_2, SQRT_2]}
        }],
        "initial": {"kind": "coefficients", "terms": [{"mode": [1, 1], "value": 1.0}, {"mode": [2, 1], "value": 0.5}]}
    })
}

fn case2_pointwise() -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 2,
        "truncation": 4,
        "omega": [{"lo": [0.0, 0.0], "hi": [1.0, 0.5]}],
        "sensors": [{"kind": "pointwise", "location": [0.3183, 0.2718]}],
        "initial": {"kind": "coefficients", "terms": [{"mode": [1, 1], "value": 1.0}, {"mode": [1, 2], "value": -0.5}]}
    })
}

fn case3_filament() -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 2,
        "truncation": 4,
        "omega": [{"lo": [0.0, 0.0], "hi": [1.0, 0.5]}],
        "sensors": [{
            "kind": "filament", "along": "x1", "at": 0.3, "from": 0.1, "to": 0.9,
            "distribution": {"kind": "sine_product", "amp": 1.0, "k": [SQRT_2, 1.0]}
        }],
        "initial": {"kind": "coefficients", "terms": [{"mode": [1, 1], "value": 1.0}, {"mode": [2, 2], "value": 0.25}]}
    })
}

fn strategic_1d(sigma: f64, truncation: u32) -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 1,
        "truncation": truncation,
        "sensors": [{"kind": "pointwise", "location": [sigma, 0.0]}],
        "initial": {"kind": "coefficients", "terms": [{"mode": [1], "value": 1.0}, {"mode": [2], "value": 0.5}]}
    })
}

fn strategic_midpoint() -> Value {
    strategic_1d(0.5, 6)
}

fn strategic_irrational() -> Value {
    strategic_1d(FRAC_1_PI, 12)
}

fn pipeline() -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 2,
        "truncation": 3,
        "potential_truncation": 3,
        "omega": [{"lo": [0.0, 0.0], "hi": [1.0, 0.5]}],
        "sensors": [
            {"kind": "pointwise", "location": [0.3183, 0.2718]},
            {"kind": "pointwise", "location": [0.7071, 0.5772]},
            {"kind": "pointwise", "location": [0.4142, 0.8660]}
        ],
        "initial": {"kind": "regional_gradient", "terms": [
            {"mode": [1, 1], "value": 1.0},
            {"mode": [2, 1], "value": 0.5},
            {"mode": [1, 2], "value": -0.25}
        ]},
        "hum": {"tolerance": 1e-13, "max_iterations": 200}
    })
}

fn heat() -> Value {
    json!({
        "alpha": 1.0,
        "dimension": 2,
        "truncation": 8,
        "sensors": [
            {"kind": "pointwise", "location": [0.3183, 0.2718]},
            {"kind": "pointwise", "location": [0.7071, 0.5772]},
            {"kind": "pointwise", "location": [0.4142, 0.8660]}
        ],
        "initial": {"kind": "coefficients", "terms": [
            {"mode": [1, 1], "value": 1.0},
            {"mode": [3, 2], "value": -0.5},
            {"mode": [5, 8], "value": 0.25},
            {"mode": [8, 8], "value": 2.0}
        ]},
        "time_grid": {"kind": "uniform", "samples": 50},
        "horizon": 0.1
    })
}

fn zero_distribution() -> Value {
    json!({
        "alpha": 0.8,
        "dimension": 2,
        "truncation": 3,
        "sensors": [{
            "kind": "zone", "support": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]},
            "distribution": {"kind": "constant", "value": 0.0}
        }],
        "initial": {"kind": "coefficients", "terms": [{"mode": [1, 1], "value": 1.0}]}
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for p in PRESETS {
            let cfg = p.config();
            assert!(!cfg.sensors.is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        assert_eq!(find("nope").err().unwrap().exit_code(), 2);
    }
}
