//! Tolerances, budgets and the explicit constants behind asymptotic bounds.

use serde::{Deserialize, Serialize};

/// Tolerance for comparing Hellinger and Rényi quantities in `f64`.
pub const HELLINGER_TOL: f64 = 1e-10;

/// Mass-sum tolerance for distributions held in floating point.
pub const REAL_MASS_TOL: f64 = 1e-12;

/// Default enumeration budget for exact product computations.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Largest domain for which all `2^N` indicator functions are enumerated.
pub const MAX_BOOLEAN_DOMAIN: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    /// Multiplier `C` in `best_advantage(F, X_b, X̃_b) <= C·ε`.
    pub indistinguishability: f64,
    /// Exponent constant `c` in `1 - exp(-c·k·min(δ, 1))`.
    pub renyi_exponent: f64,
    /// Prefactor of `√(kδ)` in the pseudo-Rényi indistinguishability bound.
    pub renyi_prefactor: f64,
    /// `k*` must lie in `[kstar_low / d_H², kstar_high / d_H²]`.
    pub kstar_low: f64,
    pub kstar_high: f64,
    /// Slack multiplier for the product bound: `1 - (1-d)^k + geier·k·ε`.
    pub geier: f64,
    /// Multiplier in the labeled (not asserted) floor `tv - eps_floor·k·ε`.
    pub eps_floor: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            indistinguishability: 8.0,
            renyi_exponent: 0.25,
            renyi_prefactor: 2.0,
            kstar_low: 0.1,
            kstar_high: 10.0,
            geier: 8.0,
            eps_floor: 2.0,
        }
    }
}
