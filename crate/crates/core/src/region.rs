//! Policy-grid sweeps of the (C3, C2) capacity region.
//!
//! The sweep evaluates every policy on an `r`-grid, extracts the Pareto
//! frontier, draws the TDM segment between the largest sampled rates and
//! measures how much of the region lies above it.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, tdm_offset, AreaBreakdown, FARTHEST_POLICY};
use crate::ctmc::solve_capacities;
use crate::error::{Error, Result};
use crate::model::{CapacityPoint, PolicyParams, SwitchConfig};

pub const DEFAULT_STEP: f64 = 0.05;

/// How capacities are evaluated for each grid policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Closed forms (B=1 only).
    Analytic,
    /// Stationary solve of the chain.
    Ctmc,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "ctmc" => Ok(Engine::Ctmc),
            _ => Err(Error::InvalidArgument(format!(
                "unknown engine '{s}' (expected analytic or ctmc)"
            ))),
        }
    }
}

/// Capacities of one policy with the chosen engine.
pub fn evaluate(cfg: SwitchConfig, pol: PolicyParams, engine: Engine) -> Result<CapacityPoint> {
    match engine {
        Engine::Ctmc => solve_capacities(cfg, pol).map(|(_, p)| p),
        Engine::Analytic if cfg.alpha == 0.0 => analytic::capacities_b1(cfg, pol),
        Engine::Analytic => analytic::capacities_b1_decoherence(cfg, pol),
    }
}

/// TDM segment from `(0, C2*)` to `(C3*, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdmSegment {
    pub c2_max: f64,
    pub c3_max: f64,
}

impl TdmSegment {
    /// Time-sharing point spending fraction `share` on tripartite service.
    pub fn at(&self, share: f64) -> (f64, f64) {
        (share * self.c3_max, (1.0 - share) * self.c2_max)
    }

    /// Signed distance of `(c3, c2)` above the segment's line.
    pub fn distance(&self, c3: f64, c2: f64) -> f64 {
        let norm = (1.0 + (self.c2_max / self.c3_max).powi(2)).sqrt();
        tdm_offset(self.c2_max, self.c3_max, c3, c2) / norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub config: SwitchConfig,
    pub engine: Engine,
    pub grid_step: f64,
    pub points: Vec<CapacityPoint>,
    /// Parallel to `points`.
    pub on_frontier: Vec<bool>,
    pub tdm_segment: TdmSegment,
    /// Pareto-optimal points in increasing `c3`, joined piecewise linearly.
    pub upper_boundary: Vec<CapacityPoint>,
    pub areas: AreaBreakdown,
    pub farthest_point: CapacityPoint,
}

impl RegionResult {
    /// Height of the upper boundary at `c3`; `None` beyond the largest
    /// sampled tripartite rate.
    pub fn frontier_at(&self, c3: f64) -> Option<f64> {
        let b = &self.upper_boundary;
        let first = b.first()?;
        if c3 <= first.c3 {
            return Some(first.c2);
        }
        for w in b.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            if c3 <= q.c3 {
                let t = (c3 - p.c3) / (q.c3 - p.c3);
                return Some(p.c2 + t * (q.c2 - p.c2));
            }
        }
        None
    }

    /// Area between the axes and the upper boundary.
    pub fn frontier_area(&self) -> f64 {
        let b = &self.upper_boundary;
        let Some(first) = b.first() else { return 0.0 };
        let mut area = first.c3 * first.c2;
        for w in b.windows(2) {
            area += (w[1].c3 - w[0].c3) * (w[0].c2 + w[1].c2) / 2.0;
        }
        area
    }

    /// True when this region's boundary is on or above every boundary point
    /// of `other`, up to `tol`.
    pub fn dominates(&self, other: &RegionResult, tol: f64) -> bool {
        other.upper_boundary.iter().all(|p| {
            self.frontier_at(p.c3 - tol)
                .is_some_and(|h| h >= p.c2 - tol)
        })
    }

    pub fn max_c2(&self) -> f64 {
        self.tdm_segment.c2_max
    }

    pub fn max_c3(&self) -> f64 {
        self.tdm_segment.c3_max
    }
}

/// Grid of probabilities in `[0, 1]` with both endpoints included.
pub fn probability_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "grid step must lie in (0, 0.5] (got {step})"
        )));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() < 1e-9 {
        let n = n as u32;
        return Ok((0..=n).map(|i| f64::from(i) / f64::from(n)).collect());
    }
    let mut grid: Vec<f64> = (0..)
        .map(|i| f64::from(i) * step)
        .take_while(|v| *v < 1.0 - 1e-12)
        .collect();
    grid.push(1.0);
    Ok(grid)
}

/// Pareto frontier in increasing `c3`, returned as indices into `points`.
/// Equal-`c3` ties resolve toward the larger `c2`; exact duplicates keep the
/// first occurrence.
pub fn pareto_frontier(points: &[CapacityPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[j]
            .c3
            .total_cmp(&points[i].c3)
            .then(points[j].c2.total_cmp(&points[i].c2))
            .then(i.cmp(&j))
    });
    let mut best = f64::NEG_INFINITY;
    let mut frontier = Vec::new();
    for i in order {
        if points[i].c2 > best {
            best = points[i].c2;
            frontier.push(i);
        }
    }
    frontier.reverse();
    frontier
}

/// Area between a piecewise-linear boundary and the TDM segment, counting
/// only the parts where the boundary is above the segment.
fn area_above_tdm(boundary: &[CapacityPoint], tdm: &TdmSegment) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(boundary.len() + 2);
    if let Some(first) = boundary.first() {
        pts.push((0.0, first.c2));
    }
    pts.extend(boundary.iter().map(|p| (p.c3, p.c2)));
    pts.push((tdm.c3_max, 0.0));

    let offset = |(x, y): (f64, f64)| tdm_offset(tdm.c2_max, tdm.c3_max, x, y);
    let mut area = 0.0;
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let width = q.0 - p.0;
        if width <= 0.0 {
            continue;
        }
        let (dp, dq) = (offset(p), offset(q));
        if dp >= 0.0 && dq >= 0.0 {
            area += width * (dp + dq) / 2.0;
        } else if dp > 0.0 || dq > 0.0 {
            // Segment crosses the TDM line: keep the positive triangle.
            let pos = dp.max(dq);
            area += width * pos / (dp.abs() + dq.abs()) * pos / 2.0;
        }
    }
    area
}

/// Evaluates the policy grid and summarizes the region.
pub fn sweep(cfg: SwitchConfig, grid_step: f64, engine: Engine) -> Result<RegionResult> {
    cfg.validate()?;
    if engine == Engine::Analytic && cfg.buffer_size != 1 {
        return Err(Error::Unsupported(
            "analytic engine is only available for B=1".into(),
        ));
    }
    let grid = probability_grid(grid_step)?;
    let r1_values: &[f64] = if cfg.buffer_size == 2 { &[0.0] } else { &grid };
    let mut policies = Vec::with_capacity(r1_values.len() * grid.len() * grid.len());
    for &r1 in r1_values {
        for &r2 in &grid {
            for &r3 in &grid {
                policies.push(PolicyParams::new(r1, r2, r3));
            }
        }
    }
    let points = policies
        .par_iter()
        .map(|&pol| evaluate(cfg, pol, engine))
        .collect::<Result<Vec<_>>>()?;

    let tdm = TdmSegment {
        c2_max: points.iter().map(|p| p.c2).fold(0.0, f64::max),
        c3_max: points.iter().map(|p| p.c3).fold(0.0, f64::max),
    };
    let frontier_idx = pareto_frontier(&points);
    let mut on_frontier = vec![false; points.len()];
    frontier_idx.iter().for_each(|&i| on_frontier[i] = true);
    let upper_boundary: Vec<CapacityPoint> = frontier_idx.iter().map(|&i| points[i]).collect();

    let farthest_point = *points
        .iter()
        .reduce(|best, p| {
            if tdm.distance(p.c3, p.c2) > tdm.distance(best.c3, best.c2) {
                p
            } else {
                best
            }
        })
        .expect("grid is nonempty");

    let a_tdm = AreaBreakdown::tdm_term(tdm.c2_max, tdm.c3_max);
    let a_triangle = if cfg.buffer_size == 1 {
        // Exact triangle under the two bounding lines.
        let vertex = evaluate(cfg, FARTHEST_POLICY, engine)?;
        tdm_offset(tdm.c2_max, tdm.c3_max, vertex.c3, vertex.c2).max(0.0) * tdm.c3_max / 2.0
    } else {
        area_above_tdm(&upper_boundary, &tdm)
    };

    Ok(RegionResult {
        config: cfg,
        engine,
        grid_step,
        points,
        on_frontier,
        tdm_segment: tdm,
        upper_boundary,
        areas: AreaBreakdown::new(a_triangle, a_tdm),
        farthest_point,
    })
}

/// Extreme rates `(C2*, C3*)` for a configuration: closed forms for B=1,
/// a default-step chain sweep for B=2.
pub fn extreme_rates(cfg: SwitchConfig) -> Result<TdmSegment> {
    cfg.validate()?;
    if cfg.buffer_size == 1 {
        let e = if cfg.alpha == 0.0 {
            analytic::extremes_b1(cfg)?
        } else {
            analytic::extremes_b1_decoherence(cfg)?
        };
        Ok(TdmSegment {
            c2_max: e.c2_max,
            c3_max: e.c3_max,
        })
    } else {
        Ok(sweep(cfg, DEFAULT_STEP, Engine::Ctmc)?.tdm_segment)
    }
}

/// TDM operating point spending fraction `share` of the time on tripartite
/// service.
pub fn tdm_point(cfg: SwitchConfig, share: f64) -> Result<CapacityPoint> {
    if !(0.0..=1.0).contains(&share) {
        return Err(Error::ProbabilityOutOfRange {
            name: "share",
            value: share,
        });
    }
    let seg = extreme_rates(cfg)?;
    let (c3, c2) = seg.at(share);
    let policy = if cfg.buffer_size == 1 {
        // Time-sharing between the two extreme policies; reported as the
        // dominant one.
        if share < 0.5 {
            analytic::MAX_C2_POLICY
        } else {
            analytic::MAX_C3_POLICY
        }
    } else if share < 0.5 {
        PolicyParams::new(0.0, 0.0, 1.0)
    } else {
        PolicyParams::new(0.0, 1.0, 0.0)
    };
    Ok(CapacityPoint { c3, c2, policy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferComparison {
    pub b1: RegionResult,
    pub b2: RegionResult,
    /// `C2*(B=2) - C2*(B=1)`.
    pub delta_c2_max: f64,
    /// `C3*(B=2) - C3*(B=1)`.
    pub delta_c3_max: f64,
}

impl BufferComparison {
    /// Relative growth of the area under the boundary going from the first
    /// to the second configuration.
    pub fn area_gain(&self) -> f64 {
        self.b2.frontier_area() / self.b1.frontier_area() - 1.0
    }
}

/// Sweeps two configurations that differ at most in buffer size.
pub fn compare_buffers(
    cfg_b1: SwitchConfig,
    cfg_b2: SwitchConfig,
    grid_step: f64,
) -> Result<BufferComparison> {
    if cfg_b1.k != cfg_b2.k || cfg_b1.mu != cfg_b2.mu || cfg_b1.alpha != cfg_b2.alpha {
        return Err(Error::InvalidArgument(
            "configurations must share k, mu and alpha".into(),
        ));
    }
    let b1 = sweep(cfg_b1, grid_step, Engine::Ctmc)?;
    let b2 = sweep(cfg_b2, grid_step, Engine::Ctmc)?;
    Ok(BufferComparison {
        delta_c2_max: b2.max_c2() - b1.max_c2(),
        delta_c3_max: b2.max_c3() - b1.max_c3(),
        b1,
        b2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: u32, alpha: f64, b: u8) -> SwitchConfig {
        SwitchConfig::new(k, 1.0, alpha, b)
    }

    fn pt(c3: f64, c2: f64) -> CapacityPoint {
        CapacityPoint {
            c3,
            c2,
            policy: PolicyParams::new(0.0, 0.0, 0.0),
        }
    }

    #[test]
    fn grid_contains_endpoints() {
        let g = probability_grid(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        let g = probability_grid(0.3).unwrap();
        assert_eq!(g, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(probability_grid(0.0).is_err());
        assert!(probability_grid(0.6).is_err());
    }

    #[test]
    fn pareto_scan() {
        let pts = [pt(0.0, 2.0), pt(1.0, 1.0), pt(0.5, 0.5), pt(2.0, 0.0), pt(1.0, 1.0), pt(0.0, 1.0)];
        assert_eq!(pareto_frontier(&pts), vec![0, 1, 3]);
    }

    #[test]
    fn tdm_endpoints_and_midpoint() {
        let c = cfg(3, 0.0, 1);
        let p = tdm_point(c, 0.0).unwrap();
        assert_eq!((p.c3, p.c2), (0.0, 1.2));
        let p = tdm_point(c, 1.0).unwrap();
        assert!((p.c3 - 6.0 / 11.0).abs() < 1e-15 && p.c2 == 0.0);
        let p = tdm_point(c, 0.5).unwrap();
        assert!((p.c3 - 3.0 / 11.0).abs() < 1e-15 && (p.c2 - 0.6).abs() < 1e-15);
        assert!(tdm_point(c, 1.5).is_err());
    }

    #[test]
    fn farthest_point_k3() {
        let r = sweep(cfg(3, 0.0, 1), 0.05, Engine::Analytic).unwrap();
        assert_eq!(r.farthest_point.policy, FARTHEST_POLICY);
        assert!((r.farthest_point.c3 - 6.0 / 17.0).abs() < 1e-12);
        assert!((r.farthest_point.c2 - 12.0 / 17.0).abs() < 1e-12);
        assert!((r.areas.ratio - 0.15058).abs() / 0.15058 < 0.02);
        assert_eq!(r.points.len(), 21 * 21 * 21);
    }

    #[test]
    fn engines_agree() {
        let a = sweep(cfg(4, 0.3, 1), 0.25, Engine::Analytic).unwrap();
        let c = sweep(cfg(4, 0.3, 1), 0.25, Engine::Ctmc).unwrap();
        for (p, q) in a.points.iter().zip(&c.points) {
            assert!((p.c2 - q.c2).abs() <= 1e-10 * p.c2.max(1e-3));
            assert!((p.c3 - q.c3).abs() <= 1e-10 * p.c3.max(1e-3));
        }
    }

    #[test]
    fn boundary_is_monotone_and_dominant() {
        for b in [1u8, 2] {
            let r = sweep(cfg(5, 0.2, b), 0.1, Engine::Ctmc).unwrap();
            for w in r.upper_boundary.windows(2) {
                assert!(w[0].c3 < w[1].c3 && w[0].c2 >= w[1].c2);
            }
            for p in &r.points {
                assert!(p.c2 >= 0.0 && p.c3 >= 0.0);
                assert!(r.frontier_at(p.c3).unwrap() >= p.c2 - 1e-12);
                assert!(
                    r.tdm_segment.distance(p.c3, p.c2)
                        <= r.tdm_segment.distance(r.farthest_point.c3, r.farthest_point.c2)
                );
            }
        }
    }

    #[test]
    fn buffer_two_grid_fixes_r1() {
        let r = sweep(cfg(3, 0.0, 2), 0.25, Engine::Ctmc).unwrap();
        assert_eq!(r.points.len(), 25);
        assert!(r.points.iter().all(|p| p.policy.r1 == 0.0));
    }

    #[test]
    fn engine_mismatch_rejected() {
        assert!(matches!(
            sweep(cfg(3, 0.0, 2), 0.1, Engine::Analytic),
            Err(Error::Unsupported(_))
        ));
        assert!("simplex".parse::<Engine>().is_err());
    }

    #[test]
    fn area_above_tdm_clips_negative_parts() {
        let tdm = TdmSegment {
            c2_max: 1.0,
            c3_max: 1.0,
        };
        // Exactly on the chord.
        assert!(area_above_tdm(&[pt(0.0, 1.0), pt(1.0, 0.0)], &tdm).abs() < 1e-15);
        // Apex at (0.5, 1.0): triangle of area 0.25.
        let a = area_above_tdm(&[pt(0.0, 1.0), pt(0.5, 1.0), pt(1.0, 0.0)], &tdm);
        assert!((a - 0.25).abs() < 1e-15);
        // Dips below then rises above: only the positive lobe counts.
        let a = area_above_tdm(&[pt(0.0, 1.0), pt(0.25, 0.5), pt(0.75, 0.5), pt(1.0, 0.0)], &tdm);
        assert!((a - 0.0625).abs() < 1e-12, "{a}");
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let c = cfg(3, 0.0, 1);
        let cmp = compare_buffers(c, c, 0.25).unwrap();
        assert_eq!((cmp.delta_c2_max, cmp.delta_c3_max), (0.0, 0.0));
        assert!(compare_buffers(c, cfg(4, 0.0, 2), 0.25).is_err());
    }
}
