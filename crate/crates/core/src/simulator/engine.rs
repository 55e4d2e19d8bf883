//! Thinning simulation with the envelope `(alpha + beta) I(t)`.
//!
//! A proposal is a recovery with probability `alpha / (alpha + beta)`, otherwise
//! an infection attempt by a uniformly chosen infected `j`, accepted with
//! probability `C^S_j / C_j` where `C_j = sum_l K(X_l, X_j)` and `C^S_j` restricts
//! the sum to susceptibles. The accepted target is drawn proportionally to
//! `K(X_i, X_j)` among susceptibles. Marginally this accepts infection of `i`
//! at rate `beta sum_j K(X_i, X_j) / C_j`, the model's contact rate.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::math::CompensatedSum;
use crate::simulator::config::SimConfig;
use crate::simulator::population::{sample_initial, EmpiricalMeasures, Health, Population};
use crate::spectral::TrigPolynomial;
use crate::torus::{kernel_column_sums, KernelSpec, SpatialIndex, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EventKind {
    Infection,
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub agent: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<TorusPoint>,
    pub states: Vec<Health>,
}

impl Snapshot {
    /// `(S, I, R)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.states {
            match s {
                Health::Susceptible => c.0 += 1,
                Health::Infected => c.1 += 1,
                Health::Recovered => c.2 += 1,
            }
        }
        c
    }

    pub fn empirical_measures(&self) -> EmpiricalMeasures {
        EmpiricalMeasures::from_parts(&self.positions, &self.states)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub proposals: u64,
    pub accepted: u64,
}

/// Martingale values scaled by `sqrt(N)` at one snapshot, with the predicted
/// quadratic variations of the scaled martingales.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackRecord {
    pub time: f64,
    /// Susceptible-class martingale.
    pub m: f64,
    /// Infected-class martingale.
    pub l: f64,
    /// Total-population martingale.
    pub h: f64,
    pub qv_m: f64,
    pub qv_l: f64,
    pub qv_h: f64,
    /// Predicted cross-variation of `m` and `l`.
    pub qv_ml: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrack {
    pub phi: TrigPolynomial,
    pub records: Vec<TrackRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<Snapshot>,
    pub tracks: Vec<MartingaleTrack>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event(EventRecord),
    Rejected,
    /// No proposal before the target time; the clock now equals it.
    Reached,
}

/// Drift and variation integrands of the three martingales for one test function.
#[derive(Debug, Clone, Copy, Default)]
struct Integrand {
    drift_s: f64,
    drift_i: f64,
    drift_total: f64,
    qv_m: f64,
    qv_l: f64,
    qv_h: f64,
    qv_ml: f64,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    drift_s: CompensatedSum,
    drift_i: CompensatedSum,
    drift_total: CompensatedSum,
    qv_m: CompensatedSum,
    qv_l: CompensatedSum,
    qv_h: CompensatedSum,
    qv_ml: CompensatedSum,
}

impl Accumulator {
    fn add(&mut self, dt: f64, g: &Integrand) {
        self.drift_s.add(dt * g.drift_s);
        self.drift_i.add(dt * g.drift_i);
        self.drift_total.add(dt * g.drift_total);
        self.qv_m.add(dt * g.qv_m);
        self.qv_l.add(dt * g.qv_l);
        self.qv_h.add(dt * g.qv_h);
        self.qv_ml.add(dt * g.qv_ml);
    }
}

struct Tracker {
    phis: Vec<TrigPolynomial>,
    sub_step: f64,
    initial: Vec<[f64; 3]>,
    acc: Vec<Accumulator>,
    tracks: Vec<MartingaleTrack>,
}

/// `((mu^S, phi), (mu^I, phi), (mu, phi))`.
fn class_pairings(pop: &Population, phi: &TrigPolynomial) -> [f64; 3] {
    let w = 1.0 / pop.len() as f64;
    let mut s = CompensatedSum::new();
    let mut i = CompensatedSum::new();
    let mut all = CompensatedSum::new();
    for (&p, &h) in pop.positions().iter().zip(pop.states()) {
        let v = w * phi.value(p);
        all.add(v);
        match h {
            Health::Susceptible => s.add(v),
            Health::Infected => i.add(v),
            Health::Recovered => {}
        }
    }
    [s.value(), i.value(), all.value()]
}

pub struct Simulation {
    config: SimConfig,
    pop: Population,
    rng: ChaCha8Rng,
    index: SpatialIndex,
    index_fresh: bool,
    scratch: Vec<(u32, f64)>,
    tracker: Option<Tracker>,
    events: Vec<EventRecord>,
    stats: RunStats,
}

impl Simulation {
    /// Draws the initial population from the configured seed.
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let pop = sample_initial(config.n_agents, &config.initial, &mut rng)?;
        Ok(Self::from_parts(config, pop, rng))
    }

    pub fn from_parts(config: &SimConfig, pop: Population, rng: ChaCha8Rng) -> Self {
        Self {
            config: config.clone(),
            index: SpatialIndex::new(config.kernel.radius),
            index_fresh: false,
            scratch: Vec::new(),
            tracker: None,
            events: Vec::new(),
            stats: RunStats::default(),
            pop,
            rng,
        }
    }

    /// Tracks the martingales of each test function, with drift quadrature sub-steps of at most `sub_step`.
    pub fn track(&mut self, phis: &[TrigPolynomial], sub_step: f64) -> Result<()> {
        if !(sub_step > 0.0) {
            return Err(crate::error::invalid("sub_step", "must be positive"));
        }
        let initial = phis.iter().map(|phi| class_pairings(&self.pop, phi)).collect();
        self.tracker = Some(Tracker {
            phis: phis.to_vec(),
            sub_step,
            initial,
            acc: phis.iter().map(|_| Accumulator::default()).collect(),
            tracks: phis.iter().map(|phi| MartingaleTrack { phi: phi.clone(), records: Vec::new() }).collect(),
        });
        Ok(())
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn time(&self) -> f64 {
        self.pop.time()
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { time: self.pop.time(), positions: self.pop.positions().to_vec(), states: self.pop.states().to_vec() }
    }

    /// Exact Brownian increments of per-coordinate variance `2 gamma dt`.
    fn diffuse(&mut self, dt: f64) {
        if self.config.gamma == 0.0 || dt <= 0.0 {
            return;
        }
        let sd = libm::sqrt(2.0 * self.config.gamma * dt);
        let rng = &mut self.rng;
        for p in self.pop.positions_mut() {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            *p = p.translate(sd * z1, sd * z2);
        }
        self.index_fresh = false;
    }

    fn refresh_index(&mut self) {
        if !self.index_fresh {
            self.index.rebuild(self.pop.positions());
            self.index_fresh = true;
        }
    }

    /// Moves the clock forward by `dt` with no events, integrating tracked drifts
    /// by the midpoint rule on sub-steps no longer than the configured one.
    fn advance(&mut self, dt: f64) {
        let Some(sub_step) = self.tracker.as_ref().map(|t| t.sub_step) else {
            self.diffuse(dt);
            return;
        };
        if dt <= 0.0 {
            return;
        }
        if self.config.gamma == 0.0 {
            // Frozen positions: the integrand is constant between events.
            self.integrate(dt);
            return;
        }
        let pieces = libm::ceil(dt / sub_step).max(1.0) as usize;
        let piece = dt / pieces as f64;
        for _ in 0..pieces {
            self.diffuse(0.5 * piece);
            self.integrate(piece);
            self.diffuse(0.5 * piece);
        }
    }

    fn integrate(&mut self, dt: f64) {
        self.refresh_index();
        let tracker = self.tracker.as_mut().expect("tracking enabled");
        let values = integrands(&self.pop, &self.config, &self.index, &tracker.phis);
        for (acc, g) in tracker.acc.iter_mut().zip(&values) {
            acc.add(dt, g);
        }
    }

    /// Appends one record per tracked test function at the current time.
    pub fn record_tracks(&mut self) {
        let Some(tracker) = self.tracker.as_mut() else {
            return;
        };
        let root_n = libm::sqrt(self.pop.len() as f64);
        for k in 0..tracker.phis.len() {
            let now = class_pairings(&self.pop, &tracker.phis[k]);
            let init = tracker.initial[k];
            let acc = &tracker.acc[k];
            tracker.tracks[k].records.push(TrackRecord {
                time: self.pop.time(),
                m: root_n * (now[0] - init[0] - acc.drift_s.value()),
                l: root_n * (now[1] - init[1] - acc.drift_i.value()),
                h: root_n * (now[2] - init[2] - acc.drift_total.value()),
                qv_m: acc.qv_m.value(),
                qv_l: acc.qv_l.value(),
                qv_h: acc.qv_h.value(),
                qv_ml: acc.qv_ml.value(),
            });
        }
    }

    /// One thinning proposal, or none if the next proposal falls after `until`.
    pub fn step(&mut self, until: f64) -> Result<StepOutcome> {
        let t = self.pop.time();
        let infected = self.pop.infected().len();
        let rate_sum = self.config.alpha + self.config.beta;
        if infected == 0 || rate_sum == 0.0 {
            self.advance(until - t);
            self.pop.set_time(until);
            return Ok(StepOutcome::Reached);
        }
        let envelope = rate_sum * infected as f64;
        let delta = loop {
            let e: f64 = Exp1.sample(&mut self.rng);
            let d = e / envelope;
            // Equal timestamps are redrawn so event times stay strictly increasing.
            if t + d > t {
                break d;
            }
        };
        if t + delta > until {
            self.advance(until - t);
            self.pop.set_time(until);
            return Ok(StepOutcome::Reached);
        }
        self.advance(delta);
        let now = t + delta;
        self.pop.set_time(now);
        self.stats.proposals += 1;
        let u = self.rng.random::<f64>() * rate_sum;
        let j = self.pop.infected()[self.rng.random_range(0..infected)];
        let event = if u < self.config.alpha {
            self.pop.recover(j);
            EventRecord { time: now, kind: EventKind::Recovery, agent: j }
        } else {
            match self.infection_target(j)? {
                Some(i) => {
                    self.pop.infect(i);
                    EventRecord { time: now, kind: EventKind::Infection, agent: i }
                }
                None => return Ok(StepOutcome::Rejected),
            }
        };
        self.stats.accepted += 1;
        self.events.push(event);
        Ok(StepOutcome::Event(event))
    }

    /// Thins an infection attempt by `j`; returns the infected susceptible if accepted.
    fn infection_target(&mut self, j: u32) -> Result<Option<u32>> {
        let n = self.pop.len();
        let susceptible = self.pop.susceptible().len();
        if susceptible == 0 {
            return Ok(None);
        }
        if self.config.kernel.is_constant() {
            if self.rng.random::<f64>() * (n as f64) < susceptible as f64 {
                let i = self.pop.susceptible()[self.rng.random_range(0..susceptible)];
                return Ok(Some(i));
            }
            return Ok(None);
        }
        self.refresh_index();
        let kernel = self.config.kernel;
        let xj = self.pop.positions()[j as usize];
        let positions = self.pop.positions();
        let states = self.pop.states();
        self.scratch.clear();
        let mut total = 0.0;
        let mut susceptible_total = 0.0;
        let scratch = &mut self.scratch;
        self.index.for_each_candidate(xj, |l| {
            let k = kernel.eval(positions[l], xj);
            if k > 0.0 {
                total += k;
                if states[l] == Health::Susceptible {
                    susceptible_total += k;
                    scratch.push((l as u32, k));
                }
            }
        });
        if !(total > 0.0) {
            return Err(Error::Invariant(alloc::format!("zero kernel column sum for agent {j}")));
        }
        debug_assert!(susceptible_total <= total * (1.0 + 1e-12));
        if self.rng.random::<f64>() * total >= susceptible_total {
            return Ok(None);
        }
        let target = self.rng.random::<f64>() * susceptible_total;
        let mut acc = 0.0;
        for &(i, k) in self.scratch.iter() {
            acc += k;
            if target < acc {
                return Ok(Some(i));
            }
        }
        Ok(self.scratch.last().map(|&(i, _)| i))
    }

    /// Runs proposals until the clock reaches `target`.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.pop.time() < target {
            self.step(target)?;
        }
        Ok(())
    }

    pub fn finish(self) -> (Vec<EventRecord>, Vec<MartingaleTrack>, RunStats, Population) {
        let tracks = self.tracker.map(|t| t.tracks).unwrap_or_default();
        (self.events, tracks, self.stats, self.pop)
    }
}

fn integrands(pop: &Population, config: &SimConfig, index: &SpatialIndex, phis: &[TrigPolynomial]) -> Vec<Integrand> {
    let n = pop.len();
    let w = 1.0 / n as f64;
    let (beta, alpha, gamma) = (config.beta, config.alpha, config.gamma);
    let positions = pop.positions();
    let states = pop.states();
    let m = phis.len();
    // Per-agent phi values, reused by the infection scan.
    let mut phi_values = alloc::vec![0.0; n * m];
    let mut sums = alloc::vec![[CompensatedSum::new(); 7]; m];
    for (a, (&p, &h)) in positions.iter().zip(states).enumerate() {
        for (k, phi) in phis.iter().enumerate() {
            let v = phi.value(p);
            phi_values[a * m + k] = v;
            let lap = phi.laplacian(p);
            let g = phi.gradient(p);
            let g2 = g[0] * g[0] + g[1] * g[1];
            let s = &mut sums[k];
            s[0].add(lap);
            s[1].add(g2);
            match h {
                Health::Susceptible => {
                    s[2].add(lap);
                    s[3].add(g2);
                }
                Health::Infected => {
                    s[4].add(lap);
                    s[5].add(g2);
                    s[6].add(v);
                }
                Health::Recovered => {}
            }
        }
    }
    let mut i_phi_sq = alloc::vec![CompensatedSum::new(); m];
    for &j in pop.infected() {
        for k in 0..m {
            let v = phi_values[j as usize * m + k];
            i_phi_sq[k].add(v * v);
        }
    }
    // (1/N) sum_{i in S} phi_i r_i and phi_i^2 r_i with r_i = sum_{j in I} K_ij / C_j.
    let mut b1 = alloc::vec![CompensatedSum::new(); m];
    let mut b2 = alloc::vec![CompensatedSum::new(); m];
    if config.kernel.is_constant() {
        let r = pop.infected().len() as f64 / n as f64;
        for &i in pop.susceptible() {
            for k in 0..m {
                let v = phi_values[i as usize * m + k];
                b1[k].add(r * v);
                b2[k].add(r * v * v);
            }
        }
    } else {
        let kernel: &KernelSpec = &config.kernel;
        let mut local: Vec<(u32, f64)> = Vec::new();
        for &j in pop.infected() {
            let xj = positions[j as usize];
            let mut column = 0.0;
            local.clear();
            index.for_each_candidate(xj, |l| {
                let k = kernel.eval(positions[l], xj);
                if k > 0.0 {
                    column += k;
                    if states[l] == Health::Susceptible {
                        local.push((l as u32, k));
                    }
                }
            });
            for &(i, kij) in &local {
                let ratio = kij / column;
                for k in 0..m {
                    let v = phi_values[i as usize * m + k];
                    b1[k].add(ratio * v);
                    b2[k].add(ratio * v * v);
                }
            }
        }
    }
    (0..m)
        .map(|k| {
            let s = &sums[k];
            let (b1, b2) = (w * b1[k].value(), w * b2[k].value());
            Integrand {
                drift_s: gamma * w * s[2].value() - beta * b1,
                drift_i: gamma * w * s[4].value() + beta * b1 - alpha * w * s[6].value(),
                drift_total: gamma * w * s[0].value(),
                qv_m: beta * b2 + 2.0 * gamma * w * s[3].value(),
                qv_l: beta * b2 + 2.0 * gamma * w * s[5].value() + alpha * w * i_phi_sq[k].value(),
                qv_h: 2.0 * gamma * w * s[1].value(),
                qv_ml: -beta * b2,
            }
        })
        .collect()
}

/// Runs to the horizon, taking a snapshot at every configured time.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    run_tracked(config, &[], 0.01)
}

/// As [`run`], also tracking the class martingales of each test function.
pub fn run_tracked(config: &SimConfig, phis: &[TrigPolynomial], sub_step: f64) -> Result<RunOutput> {
    let mut sim = Simulation::new(config)?;
    if !phis.is_empty() {
        sim.track(phis, sub_step)?;
    }
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    for &t in &config.snapshot_times {
        sim.advance_to(t)?;
        snapshots.push(sim.snapshot());
        sim.record_tracks();
    }
    sim.advance_to(config.horizon)?;
    let (events, tracks, stats, _) = sim.finish();
    Ok(RunOutput { events, snapshots, tracks, stats })
}

/// `beta sum_{j in I} K(X_i, X_j) / C_j` for agent `i`, given column sums `C`.
pub fn infection_rate(i: usize, pop: &Population, kernel: &KernelSpec, beta: f64, column_sums: &[f64]) -> Result<f64> {
    if pop.states()[i] != Health::Susceptible {
        return Ok(0.0);
    }
    let xi = pop.positions()[i];
    let mut acc = CompensatedSum::new();
    for &j in pop.infected() {
        let c = column_sums[j as usize];
        if !(c > 0.0) {
            return Err(Error::Invariant(alloc::format!("zero kernel column sum for agent {j}")));
        }
        acc.add(kernel.eval(xi, pop.positions()[j as usize]) / c);
    }
    Ok(beta * acc.value())
}

/// `(alpha + beta) I(t)`.
pub fn total_event_rate_bound(pop: &Population, alpha: f64, beta: f64) -> f64 {
    (alpha + beta) * pop.infected().len() as f64
}

/// `alpha I + sum_{i in S} infection_rate(i)`, by direct summation.
pub fn exact_total_rate(pop: &Population, kernel: &KernelSpec, alpha: f64, beta: f64) -> Result<f64> {
    let sums = kernel_column_sums(kernel, pop.positions())?;
    let mut acc = CompensatedSum::new();
    acc.add(alpha * pop.infected().len() as f64);
    for &i in pop.susceptible() {
        acc.add(infection_rate(i as usize, pop, kernel, beta, &sums)?);
    }
    Ok(acc.value())
}
