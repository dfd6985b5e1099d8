//! Closed forms for the one-qubit-per-link switch.
//!
//! Everything here is evaluated directly from the factored expressions; the
//! chain solver in [`crate::ctmc`] is the independent check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_config, CapacityPoint, PolicyParams, SwitchConfig};

/// Policy maximizing the bipartite rate.
pub const MAX_C2_POLICY: PolicyParams = PolicyParams::new(1.0, 0.0, 0.0);
/// Policy maximizing the tripartite rate.
pub const MAX_C3_POLICY: PolicyParams = PolicyParams::new(0.0, 1.0, 0.0);
/// Policy whose capacity point lies farthest above the TDM segment.
pub const FARTHEST_POLICY: PolicyParams = PolicyParams::new(0.0, 1.0, 1.0);

fn require_b1(cfg: &SwitchConfig, decoherence_ok: bool) -> Result<()> {
    cfg.validate()?;
    if cfg.buffer_size != 1 {
        return Err(Error::Unsupported(
            "no closed form for B=2; use the chain solver".into(),
        ));
    }
    if !decoherence_ok && cfg.alpha != 0.0 {
        return Err(Error::Unsupported(
            "decoherence-free closed form requires alpha = 0".into(),
        ));
    }
    Ok(())
}

/// Stationary probabilities `[pi(0,0), pi(1,0), pi(1,1)]` without decoherence.
pub fn stationary_b1(cfg: SwitchConfig, pol: PolicyParams) -> Result<[f64; 3]> {
    let (cfg, pol) = validate_config(cfg, pol)?;
    require_b1(&cfg, false)?;
    let k = cfg.kf();
    let PolicyParams { r1, r2, r3 } = pol;
    let d = denominator_b1(k, r1, r2, r3);
    let pi11 = k * (k - 1.0) * (1.0 - r1) / d;
    let pi10 = k * (k - 2.0 + 2.0 * r3) / d;
    Ok([1.0 - pi10 - pi11, pi10, pi11])
}

fn denominator_b1(k: f64, r1: f64, r2: f64, r3: f64) -> f64 {
    (k - 2.0 + 2.0 * r3) * ((k - 1.0) * r1 + k) + (k - 1.0) * (1.0 - r1) * ((k - 2.0) * r2 + k)
}

/// Bipartite and tripartite capacities without decoherence.
pub fn capacities_b1(cfg: SwitchConfig, pol: PolicyParams) -> Result<CapacityPoint> {
    let (cfg, pol) = validate_config(cfg, pol)?;
    require_b1(&cfg, false)?;
    let (k, mu) = (cfg.kf(), cfg.mu);
    let PolicyParams { r1, r2, r3 } = pol;
    let r1_bar = 1.0 - r1;
    let d = denominator_b1(k, r1, r2, r3);
    let c2 = k * (k - 1.0) * mu * (k - 2.0 + 2.0 * r3 - (k - 2.0) * r2 * r1_bar) / d;
    let c3 = k * (k - 1.0) * (k - 2.0) * mu * r2 * r1_bar / d;
    Ok(CapacityPoint { c3, c2, policy: pol })
}

/// Capacities with per-qubit decoherence rate `alpha` (any `alpha >= 0`).
pub fn capacities_b1_decoherence(cfg: SwitchConfig, pol: PolicyParams) -> Result<CapacityPoint> {
    let (cfg, pol) = validate_config(cfg, pol)?;
    require_b1(&cfg, true)?;
    let (k, mu, alpha) = (cfg.kf(), cfg.mu, cfg.alpha);
    let PolicyParams { r1, r2, r3 } = pol;
    let r1_bar = 1.0 - r1;
    let d = (k - 1.0) * mu * r1_bar * ((k - 2.0) * mu * r2 + k * mu)
        + (k * mu + (k - 1.0) * mu * r1 + alpha) * ((k - 2.0 + 2.0 * r3) * mu + 2.0 * alpha);
    let c2 = k * (k - 1.0) * mu * mu
        * (2.0 * (alpha * r1 + mu * r3) + (k - 2.0) * mu * (1.0 - r2 * r1_bar))
        / d;
    let c3 = k * mu.powi(3) * (k - 1.0) * (k - 2.0) * r1_bar * r2 / d;
    Ok(CapacityPoint { c3, c2, policy: pol })
}

/// Maximum capacities and the point farthest above TDM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    /// Largest achievable bipartite rate, `C2*`.
    pub c2_max: f64,
    /// Largest achievable tripartite rate, `C3*`.
    pub c3_max: f64,
    /// Bipartite coordinate of the farthest point.
    pub c2_hat: f64,
    /// Tripartite coordinate of the farthest point.
    pub c3_hat: f64,
}

pub fn extremes_b1(cfg: SwitchConfig) -> Result<Extremes> {
    require_b1(&cfg, false)?;
    let (k, mu) = (cfg.kf(), cfg.mu);
    let hat = capacities_b1(cfg, FARTHEST_POLICY)?;
    Ok(Extremes {
        c2_max: k * mu * (k - 1.0) / (2.0 * k - 1.0),
        c3_max: k * (k - 1.0) * (k - 2.0) * mu / (k * (2.0 * k - 3.0) + (k - 1.0) * (k - 2.0)),
        c2_hat: hat.c2,
        c3_hat: hat.c3,
    })
}

/// Extremes under decoherence, taken at the same three policies as the
/// decoherence-free case.
pub fn extremes_b1_decoherence(cfg: SwitchConfig) -> Result<Extremes> {
    require_b1(&cfg, true)?;
    let hat = capacities_b1_decoherence(cfg, FARTHEST_POLICY)?;
    Ok(Extremes {
        c2_max: capacities_b1_decoherence(cfg, MAX_C2_POLICY)?.c2,
        c3_max: capacities_b1_decoherence(cfg, MAX_C3_POLICY)?.c3,
        c2_hat: hat.c2,
        c3_hat: hat.c3,
    })
}

/// `C2'max / C2* = (2k-1)mu / ((2k-1)mu + alpha)`.
pub fn decoherence_c2_ratio(cfg: SwitchConfig) -> Result<f64> {
    require_b1(&cfg, true)?;
    let m = (2.0 * cfg.kf() - 1.0) * cfg.mu;
    Ok(m / (m + cfg.alpha))
}

/// `c2 = slope * c3 + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn eval(&self, c3: f64) -> f64 {
        self.slope * c3 + self.intercept
    }

    /// Intersection point `(c3, c2)`; `None` for parallel lines.
    pub fn intersect(&self, other: &Line) -> Option<(f64, f64)> {
        let ds = self.slope - other.slope;
        if ds == 0.0 {
            return None;
        }
        let x = (other.intercept - self.intercept) / ds;
        Some((x, self.eval(x)))
    }
}

/// The two lines bounding the achievable region from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingLines {
    /// Through `(0, C2*)` and the farthest point.
    pub line1: Line,
    /// Through the farthest point and `(C3*, 0)`.
    pub line2: Line,
    /// `(c3, c2)` anchors: `(0, C2*)`, `(C3hat, C2hat)`, `(C3*, 0)`.
    pub anchor_points: [(f64, f64); 3],
}

impl BoundingLines {
    /// Largest violation `c2 - line(c3)` over both lines; nonpositive means
    /// the point is on or under the bound.
    pub fn excess(&self, c3: f64, c2: f64) -> f64 {
        (c2 - self.line1.eval(c3)).max(c2 - self.line2.eval(c3))
    }
}

pub fn bounding_lines_b1(cfg: SwitchConfig) -> Result<BoundingLines> {
    require_b1(&cfg, true)?;
    let (k, mu, alpha) = (cfg.kf(), cfg.mu, cfg.alpha);
    let (line1, line2, ext) = if alpha == 0.0 {
        let line1 = Line {
            slope: -(3.0 * k - 2.0) / (2.0 * k - 1.0),
            intercept: mu * k * (k - 1.0) / (2.0 * k - 1.0),
        };
        let line2 = Line {
            slope: -(k * (k - 2.0) + 2.0 * (k - 1.0).powi(2)) / (k * (k - 2.0)),
            intercept: mu * (k - 1.0),
        };
        (line1, line2, extremes_b1(cfg)?)
    } else {
        let line1 = Line {
            slope: -(mu * (3.0 * k - 2.0) * (alpha + (k - 2.0) * mu) + 2.0 * alpha * alpha)
                / (mu * (k - 2.0) * ((2.0 * k - 1.0) * mu + alpha)),
            intercept: k * (k - 1.0) * mu * mu / ((2.0 * k - 1.0) * mu + alpha),
        };
        let line2 = Line {
            slope: -(2.0 * (k - 1.0).powi(2) * mu * mu
                + (k * mu + alpha) * ((k - 2.0) * mu + 2.0 * alpha))
                / (mu * (k - 2.0) * (k * mu + alpha)),
            intercept: k * (k - 1.0) * mu * mu / (k * mu + alpha),
        };
        (line1, line2, extremes_b1_decoherence(cfg)?)
    };
    Ok(BoundingLines {
        line1,
        line2,
        anchor_points: [
            (0.0, ext.c2_max),
            (ext.c3_hat, ext.c2_hat),
            (ext.c3_max, 0.0),
        ],
    })
}

/// Areas of the region split by the TDM segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaBreakdown {
    /// Achievable area strictly above the TDM segment.
    pub a_triangle: f64,
    /// TDM area term `((C2*)^2 + (C3*)^2) / 4`.
    pub a_tdm: f64,
    pub a_total: f64,
    /// `a_triangle / a_total`.
    pub ratio: f64,
}

impl AreaBreakdown {
    pub fn new(a_triangle: f64, a_tdm: f64) -> Self {
        let a_total = a_triangle + a_tdm;
        let ratio = if a_total > 0.0 { a_triangle / a_total } else { 0.0 };
        Self {
            a_triangle,
            a_tdm,
            a_total,
            ratio,
        }
    }

    pub fn tdm_term(c2_max: f64, c3_max: f64) -> f64 {
        (c2_max * c2_max + c3_max * c3_max) / 4.0
    }
}

/// Signed vertical offset of `(c3, c2)` above the TDM segment:
/// `f(x, y) = y - C2* (1 - x / C3*)`.
pub fn tdm_offset(c2_max: f64, c3_max: f64, c3: f64, c2: f64) -> f64 {
    c2 - c2_max * (1.0 - c3 / c3_max)
}

/// Geometric area split without decoherence.
pub fn area_ratio_b1(cfg: SwitchConfig) -> Result<AreaBreakdown> {
    let ext = extremes_b1(cfg)?;
    let f = tdm_offset(ext.c2_max, ext.c3_max, ext.c3_hat, ext.c2_hat).abs();
    Ok(AreaBreakdown::new(
        f * ext.c3_max / 2.0,
        AreaBreakdown::tdm_term(ext.c2_max, ext.c3_max),
    ))
}

/// Rational function of `k` equal to `((C2*)^2 + (C3*)^2) / (2 |f| C3*)`,
/// so that the area ratio is `1 / (1 + value)`.
pub fn area_polynomial(k: u32) -> f64 {
    let k = f64::from(k);
    let num = (((((39.0 * k - 220.0) * k + 493.0) * k - 568.0) * k + 362.0) * k - 120.0) * k + 16.0;
    let den = 4.0 * (((((6.0 * k - 33.0) * k + 67.0) * k - 62.0) * k + 26.0) * k - 4.0);
    num / den
}
