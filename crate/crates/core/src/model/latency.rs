use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Human response-time thresholds that feedback loops are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyBudget {
    pub instantaneous: Duration,
    pub flow: Duration,
    pub attention: Duration,
}

pub const LATENCY_BUDGET: LatencyBudget = LatencyBudget {
    instantaneous: Duration::from_millis(100),
    flow: Duration::from_secs(1),
    attention: Duration::from_secs(10),
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyBand {
    Instantaneous,
    Flow,
    Attention,
    Lost,
}

impl LatencyBand {
    pub fn as_str(self) -> &'static str {
        match self {
            LatencyBand::Instantaneous => "instantaneous",
            LatencyBand::Flow => "flow",
            LatencyBand::Attention => "attention",
            LatencyBand::Lost => "lost",
        }
    }
}

impl LatencyBudget {
    pub fn band(&self, elapsed: Duration) -> LatencyBand {
        if elapsed <= self.instantaneous {
            LatencyBand::Instantaneous
        } else if elapsed <= self.flow {
            LatencyBand::Flow
        } else if elapsed <= self.attention {
            LatencyBand::Attention
        } else {
            LatencyBand::Lost
        }
    }

    pub fn band_secs(&self, seconds: f64) -> LatencyBand {
        self.band(Duration::from_secs_f64(seconds.max(0.0)))
    }
}
