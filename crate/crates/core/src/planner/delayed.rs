// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Planner, PlannerError, PlannerRequest, PlannerResponse};
use crate::env::legal_plans;

/// Response delay in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatencyDist {
    Const(u32),
    /// Uniform over the closed range.
    Uniform(u32, u32),
}

impl LatencyDist {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        match *self {
            LatencyDist::Const(k) => k,
            LatencyDist::Uniform(a, b) => rng.gen_range(a..=b),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LatencyDist::Const(k) => k as f64,
            LatencyDist::Uniform(a, b) => (a as f64 + b as f64) / 2.0,
        }
    }
}

impl fmt::Display for LatencyDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyDist::Const(k) => write!(f, "{k}"),
            LatencyDist::Uniform(a, b) => write!(f, "{a}..{b}"),
        }
    }
}

/// Parses `N` or `A..B`.
impl FromStr for LatencyDist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("invalid latency `{s}`"));
        match s.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("latency range `{s}` is empty"));
                }
                Ok(LatencyDist::Uniform(a, b))
            }
            None => Ok(LatencyDist::Const(num(s)?)),
        }
    }
}

/// Adds latency and answer noise to an inner planner. With probability
/// `error_rate` the answer is swapped for a uniformly drawn legal plan that
/// differs from it.
pub struct Delayed<P> {
    inner: P,
    latency: LatencyDist,
    error_rate: f64,
    rng: ChaCha8Rng,
}

impl<P: Planner> Delayed<P> {
    pub fn new(inner: P, latency: LatencyDist, error_rate: f64, rng: ChaCha8Rng) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&error_rate) {
            return Err(format!("error rate {error_rate} outside [0, 1]"));
        }
        Ok(Delayed { inner, latency, error_rate, rng })
    }

    pub fn latency(&self) -> LatencyDist {
        self.latency
    }
}

impl<P: Planner> Planner for Delayed<P> {
    fn plan(&mut self, req: &PlannerRequest) -> Result<PlannerResponse, PlannerError> {
        let mut r = self.inner.plan(req)?;
        r.latency_ticks += self.latency.sample(&mut self.rng);
        if self.error_rate > 0.0 && self.rng.gen_bool(self.error_rate) {
            let others: Vec<_> = legal_plans(&req.observation).into_iter().filter(|p| *p != r.plan).collect();
            if !others.is_empty() {
                r.plan = others[self.rng.gen_range(0..others.len())];
                r.corrupted = true;
            }
        }
        Ok(r)
    }
}
