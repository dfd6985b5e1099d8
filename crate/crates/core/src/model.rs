//! Domain types shared by the chain builder, the closed forms, the simulator
//! and the region sweeps.
//!
//! Rates are stored as rates (events per second), never as means.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest link count accepted. Closed-form polynomials in `k` stay well
/// inside double precision below this.
pub const MAX_LINKS: u32 = 1_000_000;

/// Physical parameters of a star switch with `k` identical links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    /// Number of links (users).
    pub k: u32,
    /// Link-entanglement generation rate per link.
    pub mu: f64,
    /// Per-qubit decoherence rate.
    pub alpha: f64,
    /// Per-link qubit capacity, 1 or 2.
    pub buffer_size: u8,
}

impl SwitchConfig {
    pub fn new(k: u32, mu: f64, alpha: f64, buffer_size: u8) -> Self {
        Self {
            k,
            mu,
            alpha,
            buffer_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::TooFewLinks(self.k));
        }
        if self.k > MAX_LINKS {
            return Err(Error::TooManyLinks {
                k: self.k,
                max: MAX_LINKS,
            });
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::NonPositiveRate(self.mu));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidDecoherence(self.alpha));
        }
        if !matches!(self.buffer_size, 1 | 2) {
            return Err(Error::UnsupportedBuffer(self.buffer_size));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_buffer(self, buffer_size: u8) -> Self {
        Self {
            buffer_size,
            ..self
        }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub(crate) fn kf(&self) -> f64 {
        f64::from(self.k)
    }
}

/// Knobs of the randomized switching policy.
///
/// * `r1`: probability of a BSM when a second link fills while one qubit is stored.
/// * `r2`: probability of a GHZ measurement (vs. a BSM) when a third distinct link fills.
/// * `r3`: probability of a BSM (vs. a drop) when an already-occupied link fills.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl PolicyParams {
    pub const fn new(r1: f64, r2: f64, r3: f64) -> Self {
        Self { r1, r2, r3 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("r1", self.r1), ("r2", self.r2), ("r3", self.r3)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { name, value });
            }
        }
        Ok(())
    }
}

impl fmt::Display for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.r1, self.r2, self.r3)
    }
}

impl FromStr for PolicyParams {
    type Err = Error;

    /// Parses a comma-separated triple such as `0,1,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("policy '{s}': {e}")))?;
        match parts.as_slice() {
            [r1, r2, r3] => Ok(Self::new(*r1, *r2, *r3)),
            _ => Err(Error::InvalidArgument(format!(
                "policy '{s}' must have three comma-separated values"
            ))),
        }
    }
}

/// A (tripartite, bipartite) capacity pair and the policy that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    /// GHZ measurements per second.
    pub c3: f64,
    /// BSMs per second.
    pub c2: f64,
    pub policy: PolicyParams,
}

/// Checks every invariant of a configuration and policy and hands the pair
/// back unchanged.
pub fn validate_config(
    cfg: SwitchConfig,
    pol: PolicyParams,
) -> Result<(SwitchConfig, PolicyParams)> {
    cfg.validate()?;
    pol.validate()?;
    if cfg.buffer_size == 2 && pol.r1 != 0.0 {
        return Err(Error::R1WithBufferTwo(pol.r1));
    }
    Ok((cfg, pol))
}

/// Converts a time-slotted link (slot length `tau`, per-slot success
/// probability `p`) into the exponential generation rate `p / tau`.
pub fn rate_from_slot(tau: f64, p: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "slot length must be positive (got {tau})"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "success probability must lie in (0, 1] (got {p})"
        )));
    }
    Ok(p / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_minimal_valid_pair() {
        let cfg = SwitchConfig::new(3, 1.0, 0.0, 1);
        let pol = PolicyParams::new(0.0, 1.0, 1.0);
        assert_eq!(validate_config(cfg, pol), Ok((cfg, pol)));
    }

    #[test]
    fn rejects_two_links() {
        let err = validate_config(
            SwitchConfig::new(2, 1.0, 0.0, 1),
            PolicyParams::new(0.0, 0.0, 0.0),
        )
        .unwrap_err();
        assert_eq!(err, Error::TooFewLinks(2));
        assert!(err.to_string().contains("k >= 3 required"));
    }

    #[test]
    fn rejects_r1_with_buffer_two() {
        let err = validate_config(
            SwitchConfig::new(3, 1.0, 0.0, 2),
            PolicyParams::new(0.5, 1.0, 1.0),
        )
        .unwrap_err();
        assert_eq!(err, Error::R1WithBufferTwo(0.5));
        assert!(err.to_string().contains("r1 must be 0 for B=2"));
    }

    #[test]
    fn rejects_bad_fields() {
        let pol = PolicyParams::new(0.0, 0.0, 0.0);
        let bad = [
            SwitchConfig::new(3, 0.0, 0.0, 1),
            SwitchConfig::new(3, -1.0, 0.0, 1),
            SwitchConfig::new(3, f64::NAN, 0.0, 1),
            SwitchConfig::new(3, 1.0, -0.1, 1),
            SwitchConfig::new(3, 1.0, 0.0, 3),
            SwitchConfig::new(3, 1.0, 0.0, 0),
            SwitchConfig::new(MAX_LINKS + 1, 1.0, 0.0, 1),
        ];
        for cfg in bad {
            assert!(validate_config(cfg, pol).is_err(), "{cfg:?}");
        }
        let cfg = SwitchConfig::new(3, 1.0, 0.0, 1);
        for pol in [
            PolicyParams::new(-0.1, 0.0, 0.0),
            PolicyParams::new(0.0, 1.1, 0.0),
            PolicyParams::new(0.0, 0.0, f64::NAN),
        ] {
            assert!(matches!(
                validate_config(cfg, pol),
                Err(Error::ProbabilityOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn slot_conversion() {
        assert_eq!(rate_from_slot(1.0, 1.0).unwrap(), 1.0);
        assert!((rate_from_slot(0.001, 0.01).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(rate_from_slot(2.0, 0.5).unwrap(), 0.25);
        assert!(rate_from_slot(0.0, 0.5).is_err());
        assert!(rate_from_slot(1.0, 0.0).is_err());
        assert!(rate_from_slot(1.0, 1.5).is_err());
    }

    #[test]
    fn parses_policy_triples() {
        assert_eq!(
            "0, 1,0.25".parse::<PolicyParams>().unwrap(),
            PolicyParams::new(0.0, 1.0, 0.25)
        );
        assert!("0,1".parse::<PolicyParams>().is_err());
        assert!("a,b,c".parse::<PolicyParams>().is_err());
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(
            k in 0u32..20, mu in -1.0f64..5.0, alpha in -1.0f64..2.0, b in 0u8..4,
            r1 in -0.2f64..1.2, r2 in -0.2f64..1.2, r3 in -0.2f64..1.2,
        ) {
            let first = validate_config(SwitchConfig::new(k, mu, alpha, b), PolicyParams::new(r1, r2, r3));
            if let Ok((cfg, pol)) = first {
                prop_assert_eq!(validate_config(cfg, pol), Ok((cfg, pol)));
            }
        }

        #[test]
        fn slot_rate_inverts(tau in 1e-9f64..1e3, p in 1e-6f64..=1.0) {
            let mu = rate_from_slot(tau, p).unwrap();
            prop_assert!((mu * tau / p - 1.0).abs() <= 1e-15);
        }
    }
}
