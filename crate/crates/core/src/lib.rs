// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

pub mod analysis;
pub mod cache;
pub mod env;
pub mod planner;
pub mod plan;
pub mod report;
pub mod sim;
pub mod state;
pub mod strategies;
pub mod trace;
pub mod updater;
