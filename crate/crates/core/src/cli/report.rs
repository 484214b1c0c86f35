//! JSON report envelope shared by all commands.

use super::config::ExperimentConfig;
use serde::Serialize;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What every command writes next to its data files. `wall_time_s` is
/// only filled when timing is requested, so that reruns with the same
/// configuration and seed produce identical bytes.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub payload: &'a P,
}

impl<'a, P: Serialize> ReportEnvelope<'a, P> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig, payload: &'a P) -> Self {
        ReportEnvelope {
            tool: TOOL,
            version: VERSION,
            command,
            config,
            wall_time_s: None,
            payload,
        }
    }

    pub fn to_bytes(&self) -> serde_json::Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }
}
