// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! Execution strategies: synchronous, parallel planning and acting,
//! speculative drafting, and the cache with background validation.

mod agentic;
mod parallel;
mod speculative;
mod sync;

pub use agentic::AgenticCache;
pub use parallel::{preempts, Parallel};
pub use speculative::{expected_rollback_depth, Speculative};
pub use sync::Synchronous;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::PlanCache;
use crate::env::{Scenario, ScenarioError};
use crate::planner::{CostModel, Delayed, LatencyDist, Planner, RemotePlanner, ScriptedOracle};
use crate::sim::{Kernel, Strategy};
use crate::trace::Trace;
use crate::updater::UpdaterConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Sync,
    Parallel,
    Speculative,
    AgenticCache,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] =
        [StrategyKind::Sync, StrategyKind::Parallel, StrategyKind::Speculative, StrategyKind::AgenticCache];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sync => "sync",
            StrategyKind::Parallel => "parallel",
            StrategyKind::Speculative => "speculative",
            StrategyKind::AgenticCache => "agenticcache",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (sync, parallel, speculative, agenticcache)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerBackend {
    Scripted,
    Remote { endpoint: String, timeout_ms: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub backend: PlannerBackend,
    pub latency: LatencyDist,
    /// Answer noise of the main planner.
    pub error_rate: f64,
    pub cost: CostModel,
    /// Warm-start cache, copied to every agent.
    pub cache: Option<PlanCache>,
    pub updater: UpdaterConfig,
    pub depth: u32,
    pub drafter_error_rate: f64,
    pub drafter_latency: u32,
    /// Judge every tick against the reference policy.
    pub judge: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::AgenticCache,
            backend: PlannerBackend::Scripted,
            latency: LatencyDist::Const(10),
            error_rate: 0.0,
            cost: CostModel::default(),
            cache: None,
            updater: UpdaterConfig::default(),
            depth: 3,
            drafter_error_rate: 0.3,
            drafter_latency: 1,
            judge: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Invalid(String),
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth == 0 {
            return Err(ConfigError::Invalid("speculative depth must be at least 1".into()));
        }
        if self.cache.is_some() && self.kind != StrategyKind::AgenticCache {
            return Err(ConfigError::Invalid("a cache file only applies to agenticcache".into()));
        }
        for (name, r) in [("error rate", self.error_rate), ("drafter error rate", self.drafter_error_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(ConfigError::Invalid(format!("{name} {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn oracle(cfg: &StrategyConfig, seed: u64) -> Result<Box<dyn Planner>, ConfigError> {
    let rng = stream_rng(seed, 1);
    let p: Box<dyn Planner> = match &cfg.backend {
        PlannerBackend::Scripted => {
            Box::new(Delayed::new(ScriptedOracle, cfg.latency, cfg.error_rate, rng).map_err(ConfigError::Invalid)?)
        }
        PlannerBackend::Remote { endpoint, timeout_ms } => Box::new(
            Delayed::new(RemotePlanner::new(endpoint, Duration::from_millis(*timeout_ms)), cfg.latency, cfg.error_rate, rng)
                .map_err(ConfigError::Invalid)?,
        ),
    };
    Ok(p)
}

fn drafter(cfg: &StrategyConfig, seed: u64) -> Result<Box<dyn Planner>, ConfigError> {
    let lat = LatencyDist::Const(cfg.drafter_latency);
    Ok(Box::new(
        Delayed::new(ScriptedOracle, lat, cfg.drafter_error_rate, stream_rng(seed, 2)).map_err(ConfigError::Invalid)?,
    ))
}

/// Runs one episode and returns its trace.
pub fn run_episode(scenario: &Scenario, seed: u64, cfg: &StrategyConfig) -> Result<Trace, ConfigError> {
    cfg.validate()?;
    let draft = match cfg.kind {
        StrategyKind::Speculative => Some(drafter(cfg, seed)?),
        _ => None,
    };
    let k = Kernel::new(scenario, seed, cfg.kind.name(), oracle(cfg, seed)?, draft, cfg.cost, cfg.judge)?;
    let n = k.n_agents();
    let mut s: Box<dyn Strategy> = match cfg.kind {
        StrategyKind::Sync => Box::new(Synchronous),
        StrategyKind::Parallel => Box::new(Parallel::new(n)),
        StrategyKind::Speculative => Box::new(Speculative::new(n, cfg.depth)),
        StrategyKind::AgenticCache => {
            let cache = match &cfg.cache {
                Some(c) => {
                    if c.schema() != k.extractor.schema() {
                        return Err(ConfigError::Invalid(format!(
                            "cache schema `{}` does not match scenario fields `{}`",
                            c.schema(),
                            k.extractor.schema()
                        )));
                    }
                    c.clone()
                }
                None => PlanCache::new(k.extractor.schema().clone()),
            };
            Box::new(AgenticCache::new(n, cache, cfg.updater))
        }
    };
    Ok(k.run(s.as_mut()))
}

/// Runs one episode per seed on the rayon pool. Results keep seed order.
pub fn run_episodes(scenario: &Scenario, seeds: &[u64], cfg: &StrategyConfig) -> Result<Vec<Trace>, ConfigError> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| run_episode(scenario, s, cfg)).collect()
}

/// The four updater variants: full, updates only, replacement only, static.
pub fn ablation_variants(base: UpdaterConfig) -> [(&'static str, UpdaterConfig); 4] {
    let v = |updates, replacement| UpdaterConfig { updates, replacement, ..base };
    [
        ("full", v(true, true)),
        ("updates-only", v(true, false)),
        ("replacement-only", v(false, true)),
        ("static", v(false, false)),
    ]
}
