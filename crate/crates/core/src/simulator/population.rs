//! Agent states and positions.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::config::{Density, InitialCondition};
use crate::torus::TorusPoint;

/// Proposals allowed per accepted position before rejection sampling gives up.
pub const REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Health {
    Susceptible,
    Infected,
    Recovered,
}

impl Health {
    pub fn letter(self) -> char {
        match self {
            Health::Susceptible => 'S',
            Health::Infected => 'I',
            Health::Recovered => 'R',
        }
    }
}

/// Compact membership list with O(1) insert, remove and uniform choice.
#[derive(Debug, Clone, Default)]
struct Members {
    items: Vec<u32>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Members {
    fn with_capacity(n: usize) -> Self {
        Self { items: Vec::new(), slot: vec![ABSENT; n] }
    }

    fn insert(&mut self, i: u32) {
        debug_assert_eq!(self.slot[i as usize], ABSENT);
        self.slot[i as usize] = self.items.len() as u32;
        self.items.push(i);
    }

    fn remove(&mut self, i: u32) {
        let s = self.slot[i as usize];
        debug_assert_ne!(s, ABSENT);
        let last = *self.items.last().expect("non-empty");
        self.items.swap_remove(s as usize);
        if last != i {
            self.slot[last as usize] = s;
        }
        self.slot[i as usize] = ABSENT;
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    positions: Vec<TorusPoint>,
    states: Vec<Health>,
    time: f64,
    susceptible: Members,
    infected: Members,
    recovered: usize,
}

impl Population {
    pub fn new(positions: Vec<TorusPoint>, states: Vec<Health>) -> Result<Self> {
        if positions.len() != states.len() {
            return Err(Error::GridMismatch { expected: positions.len(), found: states.len() });
        }
        if positions.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let n = positions.len();
        let mut pop = Self {
            positions,
            states,
            time: 0.0,
            susceptible: Members::with_capacity(n),
            infected: Members::with_capacity(n),
            recovered: 0,
        };
        for i in 0..n {
            match pop.states[i] {
                Health::Susceptible => pop.susceptible.insert(i as u32),
                Health::Infected => pop.infected.insert(i as u32),
                Health::Recovered => pop.recovered += 1,
            }
        }
        Ok(pop)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn positions(&self) -> &[TorusPoint] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [TorusPoint] {
        &mut self.positions
    }

    pub fn states(&self) -> &[Health] {
        &self.states
    }

    /// `(S, I, R)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.susceptible.items.len(), self.infected.items.len(), self.recovered)
    }

    pub fn susceptible(&self) -> &[u32] {
        &self.susceptible.items
    }

    pub fn infected(&self) -> &[u32] {
        &self.infected.items
    }

    pub(crate) fn infect(&mut self, i: u32) {
        debug_assert_eq!(self.states[i as usize], Health::Susceptible);
        self.susceptible.remove(i);
        self.infected.insert(i);
        self.states[i as usize] = Health::Infected;
    }

    pub(crate) fn recover(&mut self, j: u32) {
        debug_assert_eq!(self.states[j as usize], Health::Infected);
        self.infected.remove(j);
        self.recovered += 1;
        self.states[j as usize] = Health::Recovered;
    }
}

fn sample_position<R: Rng + ?Sized>(density: &Density, rng: &mut R) -> Result<TorusPoint> {
    let uniform = |rng: &mut R| TorusPoint::wrap(rng.random::<f64>(), rng.random::<f64>()).expect("finite");
    if let Density::Uniform = density {
        return Ok(uniform(rng));
    }
    let (_, upper) = density.bounds();
    for _ in 0..REJECTION_CAP {
        let p = uniform(rng);
        if rng.random::<f64>() * upper < density.value(p) {
            return Ok(p);
        }
    }
    Err(Error::RejectionCap { attempts: REJECTION_CAP })
}

/// `n` i.i.d. positions from `g`; agents in `A` are infected with probability `p`.
pub fn sample_initial<R: Rng + ?Sized>(n: usize, initial: &InitialCondition, rng: &mut R) -> Result<Population> {
    initial.validate()?;
    let mut positions = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let p = sample_position(&initial.density, rng)?;
        let infected = initial.region.contains(p) && rng.random::<f64>() < initial.p;
        positions.push(p);
        states.push(if infected { Health::Infected } else { Health::Susceptible });
    }
    Population::new(positions, states)
}

/// Weighted atoms of the four empirical measures, weight `1/N` each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalMeasures {
    pub susceptible: Vec<(TorusPoint, f64)>,
    pub infected: Vec<(TorusPoint, f64)>,
    pub recovered: Vec<(TorusPoint, f64)>,
    pub total: Vec<(TorusPoint, f64)>,
}

impl EmpiricalMeasures {
    pub fn from_parts(positions: &[TorusPoint], states: &[Health]) -> Self {
        let w = 1.0 / positions.len() as f64;
        let mut out = Self::default();
        for (&p, &s) in positions.iter().zip(states) {
            out.total.push((p, w));
            match s {
                Health::Susceptible => out.susceptible.push((p, w)),
                Health::Infected => out.infected.push((p, w)),
                Health::Recovered => out.recovered.push((p, w)),
            }
        }
        out
    }
}

/// `sum_j w_j phi(X_j)`.
pub fn pair(atoms: &[(TorusPoint, f64)], mut phi: impl FnMut(TorusPoint) -> f64) -> f64 {
    atoms.iter().map(|&(p, w)| w * phi(p)).collect::<crate::math::CompensatedSum>().value()
}
