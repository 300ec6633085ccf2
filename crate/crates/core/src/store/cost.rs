//! Simulated transport costs. Every store call advances a session-local
//! clock by an analytic cost; nothing sleeps. Concurrent dispatch charges
//! the longest lane after greedy longest-first assignment.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    /// One-time cost of creating an operation queue, in seconds.
    pub queue_create_cost: f64,
    /// Fixed latency per store call, in seconds.
    pub per_call_latency: f64,
    /// Cost per key/value item inside a call, in seconds.
    pub per_element_overhead: f64,
    /// Payload bandwidth in bytes per second.
    pub bandwidth: f64,
    /// Number of lanes available to concurrent dispatch.
    pub parallel_lanes: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            queue_create_cost: 10e-3,
            per_call_latency: 100e-6,
            per_element_overhead: 10e-6,
            bandwidth: 12.5e9,
            parallel_lanes: 8,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("queue_create_cost", self.queue_create_cost),
            ("per_call_latency", self.per_call_latency),
            ("per_element_overhead", self.per_element_overhead),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Config(format!("cost model: {name} must be >= 0")));
            }
        }
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 {
            return Err(Error::Config("cost model: bandwidth must be > 0".into()));
        }
        if self.parallel_lanes == 0 {
            return Err(Error::Config("cost model: parallel_lanes must be >= 1".into()));
        }
        Ok(())
    }

    /// Cost of one batched call carrying `items` values and `bytes` payload.
    pub fn call_cost(&self, items: u64, bytes: u64) -> f64 {
        self.per_call_latency + items as f64 * self.per_element_overhead + bytes as f64 / self.bandwidth
    }

    /// Applies `key=value` overrides from a comma-separated list.
    pub fn apply_overrides(&mut self, spec: &str) -> Result<()> {
        for pair in spec.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("cost model: expected key=value, got `{pair}`")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("cost model: bad number `{value}` for {key}")))
            };
            match key {
                "queue_create_cost" => self.queue_create_cost = parse_f64()?,
                "per_call_latency" => self.per_call_latency = parse_f64()?,
                "per_element_overhead" => self.per_element_overhead = parse_f64()?,
                "bandwidth" => self.bandwidth = parse_f64()?,
                "parallel_lanes" => {
                    self.parallel_lanes = value
                        .parse::<u32>()
                        .map_err(|_| Error::Config(format!("cost model: bad lane count `{value}`")))?;
                }
                other => return Err(Error::Config(format!("cost model: unknown key `{other}`"))),
            }
        }
        self.validate()
    }
}

/// Monotone simulated clock, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    elapsed: f64,
}

impl SimClock {
    pub fn advance(&mut self, dt: f64) {
        debug_assert!(dt >= 0.0);
        self.elapsed += dt;
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }
}

/// Elapsed time of a set of batch costs spread over `lanes` lanes: batches
/// are taken in descending cost order (stable for ties) and each goes to the
/// currently least-loaded lane; the result is the heaviest lane total.
pub fn concurrent_elapsed(costs: &[f64], lanes: u32) -> f64 {
    if costs.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].partial_cmp(&costs[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut loads = vec![0.0f64; lanes.max(1) as usize];
    for i in order {
        let mut lane = 0;
        for (l, &load) in loads.iter().enumerate() {
            if load < loads[lane] {
                lane = l;
            }
        }
        loads[lane] += costs[i];
    }
    loads.into_iter().fold(0.0, f64::max)
}
