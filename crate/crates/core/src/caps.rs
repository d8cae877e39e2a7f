//! Size limits for truncations and backward orbits.

use std::env;

/// Environment variable overriding [`Caps::max_level`].
pub const MAX_LEVEL_ENV: &str = "PQ_SPECTRA_MAX_LEVEL";
/// Environment variable overriding [`Caps::max_orbit_depth`].
pub const MAX_ORBIT_DEPTH_ENV: &str = "PQ_SPECTRA_MAX_ORBIT_DEPTH";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest truncation level m; the truncation has 3^m + 1 sites.
    pub max_level: u32,
    /// Largest depth for backward orbits and Julia covers.
    pub max_orbit_depth: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_level: 10,
            max_orbit_depth: 12,
        }
    }
}

impl Caps {
    /// Defaults, overridden by the environment where set and parseable.
    pub fn from_env() -> Self {
        let mut caps = Self::default();
        if let Some(v) = env::var(MAX_LEVEL_ENV).ok().and_then(|s| s.parse().ok()) {
            caps.max_level = v;
        }
        if let Some(v) = env::var(MAX_ORBIT_DEPTH_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
        {
            caps.max_orbit_depth = v;
        }
        caps
    }
}
