//! Online TSP with time windows and unit service time.
//!
//! The crate is `no_std` (it needs `alloc`) and purely algorithmic: exact
//! integer metrics and their graph primitives, the metric-to-star embedding
//! and its Embed-Prim verification, the request/schedule model with a
//! feasibility checker, a discrete-time simulation engine, the phase-based
//! online policies (TSP-EDF and ORIENT-WINDOW) plus baselines, exact offline
//! throughput oracles, the adaptive lower-bound adversaries and the window
//! perturbation transforms used by the upper-bound analysis.
//!
//! File formats, the command line and batch experiments live in the `ttw`
//! companion crate.
#![cfg_attr(not(test), no_std)]
// DP tables are indexed by several loop variables at once
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod adversary;
pub mod embedding;
pub mod error;
pub mod gen;
pub mod instance;
pub mod metric;
pub mod offline;
pub mod orienteering;
pub mod perturbation;
pub mod policies;
pub mod sim;

mod num;

pub use error::{Error, Result};
pub use instance::{Action, Instance, Request, RequestId, Schedule, Time};
pub use metric::{MetricSpace, Node};

use serde::{Deserialize, Serialize};

/// Size limits of the exact oracles. Exceeding one is an error, never a
/// silent fallback to an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest node count for the Held-Karp TSP.
    pub tsp: usize,
    /// Largest terminal count for the Dreyfus-Wagner Steiner oracle.
    pub steiner: usize,
    /// Largest request count for the plain subset DP.
    pub opt: usize,
    /// Largest state count (count vectors times classes) for the bundled DP.
    pub bundle_states: usize,
    /// Largest node count for exact orienteering.
    pub orienteering: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            tsp: 14,
            steiner: 10,
            opt: 18,
            bundle_states: 1 << 22,
            orienteering: 14,
        }
    }
}
