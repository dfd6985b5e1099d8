//! Discrete-event Monte Carlo model of the physical switch.
//!
//! Unlike the chains in [`crate::ctmc`], the simulator tracks every link and
//! every stored qubit individually: each link runs its own exponential
//! generation clock and each stored qubit carries its own exponential
//! lifetime. Matching follows the oldest-first rule on actual timestamps.
//!
//! Random draws come from one ChaCha8 stream per run in a fixed order:
//! all initial link clocks (link 0 first), then at every generation event
//! the link's next inter-arrival time, then one uniform for the policy coin
//! if the event reaches a decision point, then the new qubit's lifetime if
//! it is stored and `alpha > 0`. Exponentials are drawn by inversion.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{states_for, ChainState};
use crate::error::{Error, Result};
use crate::model::{validate_config, PolicyParams, SwitchConfig};
use crate::stats::mean_ci95;

/// Number of batches used for batch-means intervals.
pub const BATCHES: usize = 20;
/// Fraction of simulated time discarded before estimation.
pub const WARMUP_FRACTION: f64 = 0.01;

/// Whole-run event counters, warm-up included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounters {
    pub generated: u64,
    pub bsm: u64,
    pub ghz: u64,
    pub dropped: u64,
    pub decohered: u64,
    pub stored_at_end: u64,
}

impl SimCounters {
    /// Every generated qubit is consumed by a BSM (two each), a GHZ
    /// measurement (three each), a drop or decoherence, or is still stored.
    pub fn conserved(&self) -> bool {
        self.generated
            == 2 * self.bsm + 3 * self.ghz + self.dropped + self.decohered + self.stored_at_end
    }

    fn add(&mut self, o: &SimCounters) {
        self.generated += o.generated;
        self.bsm += o.bsm;
        self.ghz += o.ghz;
        self.dropped += o.dropped;
        self.decohered += o.decohered;
        self.stored_at_end += o.stored_at_end;
    }
}

/// Fraction of time spent in one abstract `(a, b)` state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub state: ChainState,
    pub fraction: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationEstimate {
    /// BSMs per second.
    pub c2_hat: f64,
    /// GHZ measurements per second.
    pub c3_hat: f64,
    /// 95% half-width of `c2_hat`.
    pub ci2: f64,
    /// 95% half-width of `c3_hat`.
    pub ci3: f64,
    pub total_events: u64,
    pub seed: u64,
    /// Simulated seconds per run.
    pub duration: f64,
    pub replications: u32,
    pub occupancy: Vec<Occupancy>,
    pub counters: SimCounters,
}

impl SimulationEstimate {
    pub fn occupancy_of(&self, state: ChainState) -> Option<&Occupancy> {
        self.occupancy.iter().find(|o| o.state == state)
    }
}

#[derive(Debug, Clone, Copy)]
struct Qubit {
    id: u64,
    born: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Generation { link: usize },
    Decay { link: usize, qubit: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Store,
    Drop,
    Bsm,
    Ghz,
}

impl Action {
    fn label(self) -> &'static str {
        match self {
            Action::Store => "store",
            Action::Drop => "drop",
            Action::Bsm => "bsm",
            Action::Ghz => "ghz",
        }
    }
}

/// Per-batch accumulators for the measurement window.
struct Window {
    start: f64,
    batch_len: f64,
    bsm: Vec<f64>,
    ghz: Vec<f64>,
    /// `time[state][batch]`
    time: Vec<Vec<f64>>,
}

impl Window {
    fn new(duration: f64, n_states: usize) -> Self {
        let start = duration * WARMUP_FRACTION;
        Self {
            start,
            batch_len: (duration - start) / BATCHES as f64,
            bsm: vec![0.0; BATCHES],
            ghz: vec![0.0; BATCHES],
            time: vec![vec![0.0; BATCHES]; n_states],
        }
    }

    fn batch_of(&self, t: f64) -> Option<usize> {
        (t >= self.start).then(|| (((t - self.start) / self.batch_len) as usize).min(BATCHES - 1))
    }

    fn dwell(&mut self, state: usize, from: f64, to: f64) {
        let mut t = from.max(self.start);
        while t < to {
            let b = self.batch_of(t).expect("inside window");
            let edge = if b == BATCHES - 1 {
                to
            } else {
                (self.start + (b + 1) as f64 * self.batch_len).min(to)
            };
            self.time[state][b] += edge - t;
            if edge <= t {
                break;
            }
            t = edge;
        }
    }
}

/// Link and qubit bookkeeping of a running simulation.
pub struct SimState {
    cfg: SwitchConfig,
    pol: PolicyParams,
    links: Vec<Vec<Qubit>>,
    /// Links currently holding qubits.
    occupied: Vec<usize>,
    clock: f64,
    next_qubit: u64,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    rng: ChaCha8Rng,
    counters: SimCounters,
    events: u64,
}

impl SimState {
    fn new(cfg: SwitchConfig, pol: PolicyParams, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut state = Self {
            cfg,
            pol,
            links: vec![Vec::with_capacity(2); cfg.k as usize],
            occupied: Vec::with_capacity(3),
            clock: 0.0,
            next_qubit: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            rng,
            counters: SimCounters::default(),
            events: 0,
        };
        for link in 0..cfg.k as usize {
            let dt = state.exp(cfg.mu);
            state.schedule(dt, EventKind::Generation { link });
        }
        state
    }

    fn exp(&mut self, rate: f64) -> f64 {
        let u: f64 = self.rng.random();
        -(1.0 - u).ln() / rate
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Reverse(Event {
            time,
            seq: self.next_seq,
            kind,
        }));
        self.next_seq += 1;
    }

    /// Abstract `(a, b)` state: the two largest per-link counts.
    pub fn abstract_state(&self) -> ChainState {
        let mut counts = [0u8; 2];
        for (slot, &link) in counts.iter_mut().zip(&self.occupied) {
            *slot = self.links[link].len() as u8;
        }
        if counts[1] > counts[0] {
            counts.swap(0, 1);
        }
        ChainState::new(counts[0], counts[1])
    }

    fn store(&mut self, link: usize) {
        let qubit = Qubit {
            id: self.next_qubit,
            born: self.clock,
        };
        self.next_qubit += 1;
        if self.links[link].is_empty() {
            self.occupied.push(link);
        }
        self.links[link].push(qubit);
        if self.cfg.alpha > 0.0 {
            let life = self.exp(self.cfg.alpha);
            self.schedule(
                self.clock + life,
                EventKind::Decay {
                    link,
                    qubit: qubit.id,
                },
            );
        }
    }

    fn remove_at(&mut self, link: usize, pos: usize) {
        self.links[link].remove(pos);
        if self.links[link].is_empty() {
            self.occupied.retain(|&l| l != link);
        }
    }

    fn take_oldest(&mut self, link: usize) {
        let pos = self.links[link]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.born.total_cmp(&b.1.born))
            .map(|(i, _)| i)
            .expect("link holds a qubit");
        self.remove_at(link, pos);
    }

    fn oldest_birth(&self, link: usize) -> f64 {
        self.links[link]
            .iter()
            .map(|q| q.born)
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies the switching rules to a fresh link entanglement on `link`.
    fn on_generation(&mut self, link: usize) -> Action {
        let cap = self.cfg.buffer_size as usize;
        let here = self.links[link].len();
        let others: Vec<usize> = self.occupied.iter().copied().filter(|&l| l != link).collect();

        match (self.occupied.len(), here > 0) {
            (0, _) => {
                self.store(link);
                Action::Store
            }
            // Only this link holds qubits.
            (1, true) => {
                if here < cap {
                    self.store(link);
                    Action::Store
                } else {
                    Action::Drop
                }
            }
            // A different single link holds qubits.
            (1, false) => {
                if cap == 1 && self.coin(self.pol.r1) {
                    self.take_oldest(others[0]);
                    Action::Bsm
                } else {
                    self.store(link);
                    Action::Store
                }
            }
            // Two links hold qubits and this is one of them.
            (2, true) => {
                if here < cap {
                    self.store(link);
                    Action::Store
                } else if self.coin(self.pol.r3) {
                    self.take_oldest(others[0]);
                    Action::Bsm
                } else {
                    Action::Drop
                }
            }
            // A third link fills.
            (2, false) => {
                let (l1, l2) = (self.occupied[0], self.occupied[1]);
                if self.coin(self.pol.r2) {
                    self.take_oldest(l1);
                    self.take_oldest(l2);
                    Action::Ghz
                } else {
                    let (n1, n2) = (self.links[l1].len(), self.links[l2].len());
                    let partner = if n1 != n2 {
                        if n1 > n2 {
                            l1
                        } else {
                            l2
                        }
                    } else if self.oldest_birth(l1) <= self.oldest_birth(l2) {
                        l1
                    } else {
                        l2
                    };
                    self.take_oldest(partner);
                    Action::Bsm
                }
            }
            (n, _) => unreachable!("{n} links hold qubits"),
        }
    }

    fn check_invariants(&self) {
        debug_assert!(self.occupied.len() <= 2);
        debug_assert!(self
            .occupied
            .iter()
            .all(|&l| !self.links[l].is_empty() && self.links[l].len() <= self.cfg.buffer_size as usize));
    }
}

fn validate_run(cfg: SwitchConfig, pol: PolicyParams, duration: f64) -> Result<()> {
    validate_config(cfg, pol)?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive (got {duration})"
        )));
    }
    Ok(())
}

fn run(
    cfg: SwitchConfig,
    pol: PolicyParams,
    duration: f64,
    seed: u64,
    stream: u64,
    mut trace: Option<&mut dyn Write>,
) -> Result<SimulationEstimate> {
    validate_run(cfg, pol, duration)?;
    let states = states_for(cfg.buffer_size);
    let state_index = |s: ChainState| {
        states
            .iter()
            .position(|x| *x == s)
            .expect("simulated state outside the chain state space")
    };
    let mut sim = SimState::new(cfg, pol, seed, stream);
    let mut win = Window::new(duration, states.len());
    let io = |e: std::io::Error| Error::InvalidArgument(format!("trace output: {e}"));
    if let Some(w) = trace.as_deref_mut() {
        writeln!(w, "time,event_type,link,action").map_err(io)?;
    }

    while let Some(Reverse(ev)) = sim.queue.pop() {
        if ev.time > duration {
            break;
        }
        if let EventKind::Decay { link, qubit } = ev.kind {
            // Lazily discard lifetimes of qubits already consumed.
            if !sim.links[link].iter().any(|q| q.id == qubit) {
                continue;
            }
        }
        let current = state_index(sim.abstract_state());
        win.dwell(current, sim.clock, ev.time);
        sim.clock = ev.time;
        sim.events += 1;
        let batch = win.batch_of(ev.time);

        match ev.kind {
            EventKind::Decay { link, qubit } => {
                let pos = sim.links[link]
                    .iter()
                    .position(|q| q.id == qubit)
                    .expect("checked above");
                sim.remove_at(link, pos);
                sim.counters.decohered += 1;
                if let Some(w) = trace.as_deref_mut() {
                    writeln!(w, "{},decoherence,{link},lost", ev.time).map_err(io)?;
                }
            }
            EventKind::Generation { link } => {
                let dt = sim.exp(cfg.mu);
                sim.schedule(ev.time + dt, EventKind::Generation { link });
                sim.counters.generated += 1;
                let action = sim.on_generation(link);
                match action {
                    Action::Bsm => {
                        sim.counters.bsm += 1;
                        if let Some(b) = batch {
                            win.bsm[b] += 1.0;
                        }
                    }
                    Action::Ghz => {
                        sim.counters.ghz += 1;
                        if let Some(b) = batch {
                            win.ghz[b] += 1.0;
                        }
                    }
                    Action::Drop => sim.counters.dropped += 1,
                    Action::Store => {}
                }
                if let Some(w) = trace.as_deref_mut() {
                    writeln!(w, "{},generation,{link},{}", ev.time, action.label()).map_err(io)?;
                }
            }
        }
        sim.check_invariants();
    }
    let current = state_index(sim.abstract_state());
    win.dwell(current, sim.clock, duration);
    sim.counters.stored_at_end = sim.links.iter().map(|l| l.len() as u64).sum();

    let window_len = duration - win.start;
    let per_second = |v: &[f64]| v.iter().map(|x| x / win.batch_len).collect::<Vec<_>>();
    let (_, ci2) = mean_ci95(&per_second(&win.bsm));
    let (_, ci3) = mean_ci95(&per_second(&win.ghz));
    let occupancy = states
        .iter()
        .zip(&win.time)
        .map(|(&state, batches)| {
            let fractions = per_second(batches);
            let (_, half_width) = mean_ci95(&fractions);
            Occupancy {
                state,
                fraction: batches.iter().sum::<f64>() / window_len,
                half_width,
            }
        })
        .collect();

    Ok(SimulationEstimate {
        c2_hat: win.bsm.iter().sum::<f64>() / window_len,
        c3_hat: win.ghz.iter().sum::<f64>() / window_len,
        ci2,
        ci3,
        total_events: sim.events,
        seed,
        duration,
        replications: 1,
        occupancy,
        counters: sim.counters,
    })
}

/// One simulation run with batch-means confidence intervals.
pub fn simulate(
    cfg: SwitchConfig,
    pol: PolicyParams,
    duration: f64,
    seed: u64,
) -> Result<SimulationEstimate> {
    run(cfg, pol, duration, seed, 0, None)
}

/// Like [`simulate`], also writing one CSV line per event
/// (`time,event_type,link,action`) to `trace`.
pub fn simulate_traced(
    cfg: SwitchConfig,
    pol: PolicyParams,
    duration: f64,
    seed: u64,
    trace: &mut dyn Write,
) -> Result<SimulationEstimate> {
    run(cfg, pol, duration, seed, 0, Some(trace))
}

/// Independent replications on separate streams of `base_seed`, aggregated
/// into across-replication means and 95% intervals.
pub fn replicate(
    cfg: SwitchConfig,
    pol: PolicyParams,
    duration: f64,
    n_reps: u32,
    base_seed: u64,
) -> Result<SimulationEstimate> {
    if n_reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "reps >= 2 required (got {n_reps})"
        )));
    }
    validate_run(cfg, pol, duration)?;
    let runs = (0..u64::from(n_reps))
        .into_par_iter()
        .map(|stream| run(cfg, pol, duration, base_seed, stream, None))
        .collect::<Result<Vec<_>>>()?;

    let column = |f: &dyn Fn(&SimulationEstimate) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let (c2_hat, ci2) = mean_ci95(&column(&|r| r.c2_hat));
    let (c3_hat, ci3) = mean_ci95(&column(&|r| r.c3_hat));
    let occupancy = runs[0]
        .occupancy
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (fraction, half_width) = mean_ci95(&column(&|r| r.occupancy[i].fraction));
            Occupancy {
                state: o.state,
                fraction,
                half_width,
            }
        })
        .collect();
    let mut counters = SimCounters::default();
    runs.iter().for_each(|r| counters.add(&r.counters));

    Ok(SimulationEstimate {
        c2_hat,
        c3_hat,
        ci2,
        ci3,
        total_events: runs.iter().map(|r| r.total_events).sum(),
        seed: base_seed,
        duration,
        replications: n_reps,
        occupancy,
        counters,
    })
}
