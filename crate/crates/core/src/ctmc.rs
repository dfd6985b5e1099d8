//! Continuous-time Markov chains of the switch.
//!
//! A state `(a, b)` records the stored qubits on the most loaded link (`a`)
//! and on the second most loaded link (`b`). Under the oldest-first matching
//! rule at most two links ever hold qubits, so this pair is a sufficient
//! statistic for homogeneous links.
//!
//! Each policy branch is emitted as its own arc and arcs sharing endpoints
//! are then merged, carrying rate-weighted expected BSM/GHZ counts. Capacities
//! are the stationary reward rates `sum pi(from) * rate * reward`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_config, CapacityPoint, PolicyParams, SwitchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub a: u8,
    pub b: u8,
}

impl ChainState {
    pub const fn new(a: u8, b: u8) -> Self {
        Self { a, b }
    }

    pub fn stored_qubits(&self) -> u32 {
        u32::from(self.a) + u32::from(self.b)
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

const S00: ChainState = ChainState::new(0, 0);
const S10: ChainState = ChainState::new(1, 0);
const S11: ChainState = ChainState::new(1, 1);
const S20: ChainState = ChainState::new(2, 0);
const S21: ChainState = ChainState::new(2, 1);
const S22: ChainState = ChainState::new(2, 2);

/// State space for a given per-link buffer size.
pub fn states_for(buffer_size: u8) -> &'static [ChainState] {
    const B1: [ChainState; 3] = [S00, S10, S11];
    const B2: [ChainState; 6] = [S00, S10, S11, S20, S21, S22];
    if buffer_size == 1 {
        &B1
    } else {
        &B2
    }
}

/// One arc of the chain. Self-loops are kept: they carry the rate of
/// physical events that leave the abstract state unchanged (drops).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: ChainState,
    pub to: ChainState,
    pub rate: f64,
    /// Expected BSMs per traversal.
    pub bsm: f64,
    /// Expected GHZ measurements per traversal.
    pub ghz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub config: SwitchConfig,
    pub policy: PolicyParams,
    pub states: Vec<ChainState>,
    pub transitions: Vec<Transition>,
    generator: DMatrix<f64>,
}

impl MarkovChain {
    /// Generator matrix `Q`: off-diagonal entries are summed rates between
    /// distinct states, diagonal entries the negative row sums.
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn index_of(&self, state: ChainState) -> Option<usize> {
        self.states.iter().position(|s| *s == state)
    }

    /// Total rate of physical events out of `state`, self-loops included.
    pub fn event_rate(&self, state: ChainState) -> f64 {
        self.transitions
            .iter()
            .filter(|t| t.from == state)
            .map(|t| t.rate)
            .sum()
    }

    pub fn transition(&self, from: ChainState, to: ChainState) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.from == from && t.to == to)
    }
}

/// Text dump, one arc per line: `from -> to  rate=<value>  bsm=<value>  ghz=<value>`.
impl fmt::Display for MarkovChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.transitions {
            writeln!(
                f,
                "{} -> {}  rate={}  bsm={}  ghz={}",
                t.from, t.to, t.rate, t.bsm, t.ghz
            )?;
        }
        Ok(())
    }
}

struct ArcList(Vec<Transition>);

impl ArcList {
    fn push(&mut self, from: ChainState, to: ChainState, rate: f64, bsm: f64, ghz: f64) {
        self.0.push(Transition {
            from,
            to,
            rate,
            bsm,
            ghz,
        });
    }

    fn plain(&mut self, from: ChainState, to: ChainState, rate: f64) {
        self.push(from, to, rate, 0.0, 0.0);
    }

    fn bsm(&mut self, from: ChainState, to: ChainState, rate: f64) {
        self.push(from, to, rate, 1.0, 0.0);
    }

    fn ghz(&mut self, from: ChainState, to: ChainState, rate: f64) {
        self.push(from, to, rate, 0.0, 1.0);
    }

    /// Drops zero-rate arcs and merges arcs with equal endpoints, keeping
    /// first-occurrence order.
    fn merged(self) -> Vec<Transition> {
        let mut out: Vec<Transition> = Vec::new();
        for arc in self.0.into_iter().filter(|t| t.rate > 0.0) {
            match out
                .iter_mut()
                .find(|t| t.from == arc.from && t.to == arc.to)
            {
                Some(t) => {
                    let rate = t.rate + arc.rate;
                    t.bsm = (t.bsm * t.rate + arc.bsm * arc.rate) / rate;
                    t.ghz = (t.ghz * t.rate + arc.ghz * arc.rate) / rate;
                    t.rate = rate;
                }
                None => out.push(arc),
            }
        }
        out
    }
}

fn buffer_one_arcs(cfg: &SwitchConfig, pol: &PolicyParams, arcs: &mut ArcList) {
    let (k, mu) = (cfg.kf(), cfg.mu);
    let PolicyParams { r1, r2, r3 } = *pol;

    arcs.plain(S00, S10, k * mu);

    // One stored qubit: its own link refills (drop) or another link fills.
    arcs.plain(S10, S10, mu);
    arcs.bsm(S10, S00, (k - 1.0) * mu * r1);
    arcs.plain(S10, S11, (k - 1.0) * mu * (1.0 - r1));

    // Two stored qubits: an occupied link refills, or a third link fills.
    arcs.bsm(S11, S10, 2.0 * mu * r3);
    arcs.plain(S11, S11, 2.0 * mu * (1.0 - r3));
    arcs.ghz(S11, S00, (k - 2.0) * mu * r2);
    arcs.bsm(S11, S10, (k - 2.0) * mu * (1.0 - r2));
}

fn buffer_two_arcs(cfg: &SwitchConfig, pol: &PolicyParams, arcs: &mut ArcList) {
    let (k, mu) = (cfg.kf(), cfg.mu);
    let PolicyParams { r2, r3, .. } = *pol;

    arcs.plain(S00, S10, k * mu);

    arcs.plain(S10, S20, mu);
    arcs.plain(S10, S11, (k - 1.0) * mu);

    arcs.plain(S20, S20, mu);
    arcs.plain(S20, S21, (k - 1.0) * mu);

    // Room to store on either occupied link, so no BSM there.
    arcs.plain(S11, S21, 2.0 * mu);
    arcs.ghz(S11, S00, (k - 2.0) * mu * r2);
    arcs.bsm(S11, S10, (k - 2.0) * mu * (1.0 - r2));

    arcs.plain(S21, S22, mu);
    // Full link refills: pair the newcomer with the single-qubit link, or drop it.
    arcs.bsm(S21, S20, mu * r3);
    arcs.plain(S21, S21, mu * (1.0 - r3));
    // Third link fills: GHZ across three users, or BSM against the full link.
    arcs.ghz(S21, S10, (k - 2.0) * mu * r2);
    arcs.bsm(S21, S11, (k - 2.0) * mu * (1.0 - r2));

    arcs.bsm(S22, S21, 2.0 * mu * r3);
    arcs.plain(S22, S22, 2.0 * mu * (1.0 - r3));
    arcs.ghz(S22, S11, (k - 2.0) * mu * r2);
    arcs.bsm(S22, S21, (k - 2.0) * mu * (1.0 - r2));
}

fn decoherence_arcs(cfg: &SwitchConfig, arcs: &mut ArcList) {
    let alpha = cfg.alpha;
    arcs.plain(S10, S00, alpha);
    arcs.plain(S11, S10, 2.0 * alpha);
    if cfg.buffer_size == 2 {
        arcs.plain(S20, S10, 2.0 * alpha);
        arcs.plain(S21, S11, 2.0 * alpha);
        arcs.plain(S21, S20, alpha);
        arcs.plain(S22, S21, 4.0 * alpha);
    }
}

/// Builds the chain for a validated configuration and policy.
pub fn build_chain(cfg: SwitchConfig, pol: PolicyParams) -> Result<MarkovChain> {
    assemble(cfg, pol, true)
}

fn assemble(cfg: SwitchConfig, pol: PolicyParams, with_decoherence: bool) -> Result<MarkovChain> {
    let (cfg, pol) = validate_config(cfg, pol)?;
    let mut arcs = ArcList(Vec::new());
    match cfg.buffer_size {
        1 => buffer_one_arcs(&cfg, &pol, &mut arcs),
        _ => buffer_two_arcs(&cfg, &pol, &mut arcs),
    }
    if with_decoherence {
        decoherence_arcs(&cfg, &mut arcs);
    }

    let states = states_for(cfg.buffer_size).to_vec();
    let transitions = arcs.merged();
    let n = states.len();
    let idx = |s: ChainState| states.iter().position(|x| *x == s).expect("state in space");
    let mut generator = DMatrix::zeros(n, n);
    for t in transitions.iter().filter(|t| t.from != t.to) {
        let (i, j) = (idx(t.from), idx(t.to));
        generator[(i, j)] += t.rate;
        generator[(i, i)] -= t.rate;
    }
    Ok(MarkovChain {
        config: cfg,
        policy: pol,
        states,
        transitions,
        generator,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub states: Vec<ChainState>,
    pub pi: Vec<f64>,
    /// `max_j |(pi Q)_j|` of the returned vector.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn prob(&self, state: ChainState) -> f64 {
        self.states
            .iter()
            .position(|s| *s == state)
            .map_or(0.0, |i| self.pi[i])
    }
}

/// `max_j |(pi Q)_j|`.
pub fn balance_residual(q: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let row = DVector::from_column_slice(pi).transpose() * q;
    row.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `pi Q = 0`, `sum pi = 1` by a dense LU solve of `Q^T` with the last
/// balance equation replaced by normalization, followed by one round of
/// iterative refinement.
pub fn solve_stationary(chain: &MarkovChain) -> Result<StationaryDistribution> {
    let q = chain.generator();
    let n = q.nrows();
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;

    let condition = || {
        let sv = a.clone().singular_values();
        sv.max() / sv.min()
    };
    let lu = a.clone().lu();
    let mut x = lu.solve(&rhs).ok_or_else(|| Error::Singular {
        condition: condition(),
    })?;
    let r = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            condition: condition(),
        });
    }

    // Round-off can leave unreachable states at -1e-17 or so.
    let mut pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let residual = balance_residual(q, &pi);
    Ok(StationaryDistribution {
        states: chain.states.clone(),
        pi,
        residual,
    })
}

/// Stationary BSM and GHZ reward rates.
pub fn capacities(chain: &MarkovChain, pi: &StationaryDistribution) -> CapacityPoint {
    let (mut c2, mut c3) = (0.0, 0.0);
    for t in &chain.transitions {
        let flow = pi.prob(t.from) * t.rate;
        c2 += flow * t.bsm;
        c3 += flow * t.ghz;
    }
    CapacityPoint {
        c3,
        c2,
        policy: chain.policy,
    }
}

/// Builds, solves and reads off capacities in one step.
pub fn solve_capacities(
    cfg: SwitchConfig,
    pol: PolicyParams,
) -> Result<(StationaryDistribution, CapacityPoint)> {
    let chain = build_chain(cfg, pol)?;
    let pi = solve_stationary(&chain)?;
    let point = capacities(&chain, &pi);
    Ok((pi, point))
}
