//! Generic event-driven repeater chain.
//!
//! A chain is a row of stations `0..=L` joined by `L` elementary links. The
//! two end stations measure on arrival; every inner station holds one memory
//! bank per neighbouring link. Links generate pairs independently, inner
//! stations swap as soon as they hold a confirmed qubit on each side, and a
//! sample is recorded once a pair spans the two end stations.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::cutoff::within_cutoff;
use crate::geometry::NodeId;
use crate::quantum::{swap, BellDiagonalState};
use crate::sim::{sample_geometric, stream, EventQueue, SimError, StoredQubit, TimedPair};

/// End of a link: `Left` is the station with the lower chain index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainNode {
    pub id: NodeId,
    /// Memory dephasing time; `None` for a measuring end station.
    pub dephasing_time: Option<f64>,
    /// Light time from this station to the farther end station, i.e. how
    /// long until both ends can know the result of a swap made here.
    pub notice_delay: f64,
}

/// How an elementary link produces pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinkProcess {
    /// Pair source on a third satellite: one photon is loaded into an
    /// absorptive memory, the other is detected at a ground station, and the
    /// memory learns the detection outcome `confirm_delay` after loading.
    /// Each memory mode owns one time slot out of every `slot_period`.
    Relay {
        /// Period of a single mode's time slots (`n / f_clock`).
        slot_period: f64,
        /// Offset between the first slots of consecutive modes (`1 / f_clock`).
        slot_offset: f64,
        /// Probability that a slot loads the memory.
        p_load: f64,
        /// Click probability at the ground detector.
        p_ground: f64,
        /// Fraction of clicks that are genuine photons.
        alpha: f64,
        confirm_delay: f64,
        ground: Side,
    },
    /// Emissive memory at `emitter` sends a photon per trial and hears back
    /// after `trial_time`; the other end either stores it (memory) or
    /// measures it (ground).
    Trial {
        trial_time: f64,
        p_success: f64,
        alpha: f64,
        emitter: Side,
    },
}

impl LinkProcess {
    fn success_probability(&self) -> f64 {
        match self {
            LinkProcess::Relay { p_load, p_ground, .. } => p_load * p_ground,
            LinkProcess::Trial { p_success, .. } => *p_success,
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            LinkProcess::Relay { alpha, .. } | LinkProcess::Trial { alpha, .. } => *alpha,
        }
    }
}

/// A fully specified chain, independent of how it was derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSetup {
    pub nodes: Vec<ChainNode>,
    /// `links[i]` joins `nodes[i]` and `nodes[i + 1]`.
    pub links: Vec<LinkProcess>,
    /// Modes per memory bank.
    pub modes: usize,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("a chain needs at least two stations and exactly one link between neighbours")]
    Shape,
    #[error("station {0} must {1}")]
    Station(usize, &'static str),
    #[error("link {link}: {what} = {value} is not a usable value")]
    Link { link: usize, what: &'static str, value: f64 },
    #[error("memory banks need at least one mode")]
    NoModes,
    #[error("cutoff must be positive, got {0}")]
    Cutoff(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ChainSetup {
    pub fn validate(&self) -> Result<(), ChainError> {
        let last = self.nodes.len().checked_sub(1).ok_or(ChainError::Shape)?;
        if last == 0 || self.links.len() != last {
            return Err(ChainError::Shape);
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let is_end = i == 0 || i == last;
            match n.dephasing_time {
                Some(_) if is_end => return Err(ChainError::Station(i, "measure on arrival")),
                None if !is_end => return Err(ChainError::Station(i, "hold a memory")),
                Some(t) if !(t > 0.0) => return Err(ChainError::Station(i, "have a positive dephasing time")),
                _ => {}
            }
            if !(n.notice_delay >= 0.0 && n.notice_delay.is_finite()) {
                return Err(ChainError::Station(i, "have a finite notice delay"));
            }
        }
        if self.modes == 0 {
            return Err(ChainError::NoModes);
        }
        if let Some(t) = self.cutoff {
            if !(t > 0.0) {
                return Err(ChainError::Cutoff(t));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            let bad = |what, value| ChainError::Link { link: i, what, value };
            let p = link.success_probability();
            if !(p > 0.0 && p <= 1.0) {
                return Err(bad("success probability", p));
            }
            let alpha = link.alpha();
            if !(0.0..=1.0).contains(&alpha) {
                return Err(bad("alpha", alpha));
            }
            match *link {
                LinkProcess::Relay { slot_period, slot_offset, confirm_delay, ground, .. } => {
                    if !(slot_period > 0.0 && slot_period.is_finite()) {
                        return Err(bad("slot period", slot_period));
                    }
                    if !(slot_offset >= 0.0) {
                        return Err(bad("slot offset", slot_offset));
                    }
                    if !(confirm_delay >= 0.0 && confirm_delay.is_finite()) {
                        return Err(bad("confirmation delay", confirm_delay));
                    }
                    let (g, m) = self.ends(i, ground);
                    if self.nodes[g].dephasing_time.is_some() || self.nodes[m].dephasing_time.is_none() {
                        return Err(bad("relay ground side", i as f64));
                    }
                }
                LinkProcess::Trial { trial_time, emitter, .. } => {
                    if !(trial_time > 0.0 && trial_time.is_finite()) {
                        return Err(bad("trial time", trial_time));
                    }
                    let (e, _) = self.ends(i, emitter);
                    if self.nodes[e].dephasing_time.is_none() {
                        return Err(bad("emitter side", i as f64));
                    }
                }
            }
        }
        Ok(())
    }

    /// Station at `side` of link `link` and the one at the other side.
    fn ends(&self, link: usize, side: Side) -> (usize, usize) {
        match side {
            Side::Left => (link, link + 1),
            Side::Right => (link + 1, link),
        }
    }
}

/// One end-to-end pair delivered to the two end stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// When both end stations can know the pair exists.
    pub time: f64,
    pub state: BellDiagonalState,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub established: u64,
    /// Sum and sum of squares of attempt-start to confirmation durations.
    pub duration_sum: f64,
    pub duration_sq_sum: f64,
}

impl LinkStats {
    fn push(&mut self, d: f64) {
        self.established += 1;
        self.duration_sum += d;
        self.duration_sq_sum += d * d;
    }

    pub fn mean_duration(&self) -> f64 {
        self.duration_sum / self.established as f64
    }

    /// Standard error of [`Self::mean_duration`].
    pub fn standard_error(&self) -> f64 {
        let n = self.established as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let mean = self.mean_duration();
        let var = (self.duration_sq_sum - n * mean * mean) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub events: u64,
    pub swaps: u64,
    pub discards: u64,
    pub links: Vec<LinkStats>,
    /// Largest number of simultaneously occupied modes seen in any bank.
    pub peak_occupancy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub samples: usize,
    pub seed: u64,
    pub max_events: u64,
    /// Apply storage dephasing to every live pair at every event instead of
    /// only when a pair is touched. Slow; for cross-checking.
    pub eager_dephasing: bool,
    /// Check bank and selection invariants at every swap. Slow.
    pub audit: bool,
}

impl RunOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, max_events: u64::MAX, eager_dephasing: false, audit: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    /// Sorted by completion time.
    pub records: Vec<SampleRecord>,
    pub stats: RunStats,
    /// Clock when the run stopped.
    pub end_time: f64,
}

#[derive(Debug, Clone, Copy)]
enum ModeState {
    Free,
    Reserved,
    Holding(u64),
}

#[derive(Debug, Default)]
struct Bank {
    modes: Vec<ModeState>,
    tokens: Vec<u64>,
    free: Vec<usize>,
    /// Confirmed qubits in order of confirmation, as (mode, token). Entries
    /// whose token no longer matches the mode are stale.
    waiting: VecDeque<(usize, u64)>,
    occupied: usize,
}

impl Bank {
    fn with_modes(n: usize) -> Self {
        Self {
            modes: vec![ModeState::Free; n],
            tokens: vec![0; n],
            free: (0..n).rev().collect(),
            waiting: VecDeque::new(),
            occupied: 0,
        }
    }

    fn reserve(&mut self) -> Option<usize> {
        let m = self.free.pop()?;
        self.modes[m] = ModeState::Reserved;
        self.tokens[m] += 1;
        self.occupied += 1;
        Some(m)
    }

    fn release(&mut self, m: usize) {
        debug_assert!(!matches!(self.modes[m], ModeState::Free));
        self.modes[m] = ModeState::Free;
        self.tokens[m] += 1;
        self.free.push(m);
        self.occupied -= 1;
    }

    /// Oldest confirmed entry still current, discarding stale ones.
    fn front(&mut self) -> Option<(usize, u64)> {
        while let Some(&(m, token)) = self.waiting.front() {
            match self.modes[m] {
                ModeState::Holding(pair) if self.tokens[m] == token => return Some((m, pair)),
                _ => {
                    self.waiting.pop_front();
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    bank: usize,
    mode: usize,
}

#[derive(Debug, Clone)]
struct LivePair {
    pair: TimedPair,
    slots: [Option<Slot>; 2],
    notice: f64,
}

#[derive(Debug, Clone, Copy)]
struct Attempt {
    started: f64,
    /// Per end: when the stored qubit started to dephase.
    stored_since: [f64; 2],
    modes: [Option<usize>; 2],
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Established { link: usize, attempt: Attempt },
    Expire { pair: u64 },
}

struct Engine<'a> {
    setup: &'a ChainSetup,
    opts: RunOptions,
    queue: EventQueue<Event>,
    banks: Vec<Bank>,
    rngs: Vec<ChaCha8Rng>,
    pairs: BTreeMap<u64, LivePair>,
    next_pair: u64,
    records: Vec<SampleRecord>,
    stats: RunStats,
}

/// Runs `setup` until `opts.samples` end-to-end pairs have been delivered.
pub fn simulate(setup: &ChainSetup, opts: &RunOptions) -> Result<SimOutput, ChainError> {
    setup.validate()?;
    let mut engine = Engine::new(setup, *opts);
    engine.run()?;
    Ok(engine.finish())
}

impl<'a> Engine<'a> {
    fn new(setup: &'a ChainSetup, opts: RunOptions) -> Self {
        let banks = setup
            .nodes
            .iter()
            .flat_map(|n| {
                let modes = if n.dephasing_time.is_some() { setup.modes } else { 0 };
                [Bank::with_modes(modes), Bank::with_modes(modes)]
            })
            .collect();
        let rngs = (0..setup.links.len()).map(|i| stream(opts.seed, i as u64)).collect();
        Self {
            setup,
            opts,
            queue: EventQueue::new(),
            banks,
            rngs,
            pairs: BTreeMap::new(),
            next_pair: 0,
            records: Vec::new(),
            stats: RunStats { links: vec![LinkStats::default(); setup.links.len()], ..RunStats::default() },
        }
    }

    /// Bank at station `node` that serves the link on `side` of it.
    fn bank_id(node: usize, side: Side) -> usize {
        2 * node + side.index()
    }

    /// Bank serving `link` at its `end`, if that station has a memory.
    fn link_bank(&self, link: usize, end: Side) -> Option<usize> {
        let node = link + end.index();
        self.setup.nodes[node].dephasing_time?;
        // the station's bank facing back towards the link
        Some(Self::bank_id(node, end.other()))
    }

    fn run(&mut self) -> Result<(), ChainError> {
        if self.opts.samples == 0 {
            return Ok(());
        }
        for link in 0..self.setup.links.len() {
            self.start_attempts(link, true)?;
        }
        while self.records.len() < self.opts.samples {
            if self.stats.events >= self.opts.max_events {
                return Err(SimError::EventLimit {
                    limit: self.opts.max_events,
                    collected: self.records.len(),
                    wanted: self.opts.samples,
                }
                .into());
            }
            if self.queue.is_empty() {
                return Err(SimError::NoProgress {
                    time: self.queue.now(),
                    collected: self.records.len(),
                    wanted: self.opts.samples,
                }
                .into());
            }
            let ev = self.queue.resolve_next()?;
            self.stats.events += 1;
            if self.opts.eager_dephasing {
                let now = self.queue.now();
                for p in self.pairs.values_mut() {
                    p.pair.lazy_update(now)?;
                }
            }
            match ev.payload {
                Event::Established { link, attempt } => self.establish(link, attempt)?,
                Event::Expire { pair } => {
                    if self.expired(pair) {
                        self.discard(pair)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> SimOutput {
        self.records.sort_by(|a, b| a.time.total_cmp(&b.time));
        self.records.truncate(self.opts.samples);
        SimOutput { records: self.records, stats: self.stats, end_time: self.queue.now() }
    }

    /// Starts one attempt per set of free modes on `link`.
    fn start_attempts(&mut self, link: usize, initial: bool) -> Result<(), ChainError> {
        let banks = [self.link_bank(link, Side::Left), self.link_bank(link, Side::Right)];
        loop {
            let available = banks.iter().flatten().all(|&b| !self.banks[b].free.is_empty());
            if !available {
                return Ok(());
            }
            let mut modes = [None, None];
            for (end, bank) in banks.iter().enumerate() {
                if let Some(b) = *bank {
                    modes[end] = self.banks[b].reserve();
                    let occ = self.banks[b].occupied;
                    self.stats.peak_occupancy = self.stats.peak_occupancy.max(occ);
                }
            }
            self.launch(link, modes, initial)?;
        }
    }

    fn launch(&mut self, link: usize, modes: [Option<usize>; 2], initial: bool) -> Result<(), ChainError> {
        let now = self.queue.now();
        let rng = &mut self.rngs[link];
        let (confirm, stored_since) = match self.setup.links[link] {
            LinkProcess::Relay { slot_period, slot_offset, p_load, p_ground, confirm_delay, ground, .. } => {
                let mode = modes[ground.other().index()].expect("relay memory end reserved a mode");
                let start = if initial { now + mode as f64 * slot_offset } else { now };
                let (slots, loads) = relay_trials(p_load, p_ground, rng)?;
                let confirm = start + slots as f64 * slot_period + loads as f64 * confirm_delay;
                let mut since = [confirm; 2];
                since[ground.other().index()] = confirm - confirm_delay;
                (confirm, since)
            }
            LinkProcess::Trial { trial_time, p_success, emitter, .. } => {
                let k = sample_geometric(p_success, rng)?;
                let confirm = now + k as f64 * trial_time;
                let mut since = [confirm - 0.5 * trial_time; 2];
                since[emitter.index()] = confirm - trial_time;
                (confirm, since)
            }
        };
        let attempt = Attempt { started: now, stored_since, modes };
        self.queue.schedule(confirm, Event::Established { link, attempt })?;
        Ok(())
    }

    fn establish(&mut self, link: usize, attempt: Attempt) -> Result<(), ChainError> {
        let now = self.queue.now();
        self.stats.links[link].push(now - attempt.started);
        let alpha = self.setup.links[link].alpha();
        let state = if alpha < 1.0 {
            BellDiagonalState::phi_plus().white_noise(alpha)
        } else {
            BellDiagonalState::phi_plus()
        };
        let mut slots = [None, None];
        let qubits = [Side::Left, Side::Right].map(|end| {
            let node = link + end.index();
            let tdp = self.setup.nodes[node].dephasing_time;
            if let (Some(mode), Some(bank)) = (attempt.modes[end.index()], self.link_bank(link, end)) {
                slots[end.index()] = Some(Slot { bank, mode });
            }
            StoredQubit {
                node,
                dephasing_time: tdp,
                last_update: if tdp.is_some() { attempt.stored_since[end.index()] } else { now },
                confirmed_at: now,
            }
        });
        self.insert(LivePair { pair: TimedPair::new(state, qubits), slots, notice: now })?;
        for slot in slots.iter().flatten() {
            let token = self.banks[slot.bank].tokens[slot.mode];
            self.banks[slot.bank].waiting.push_back((slot.mode, token));
        }
        for node in [link, link + 1] {
            if self.setup.nodes[node].dephasing_time.is_some() {
                self.try_swap(node)?;
            }
        }
        Ok(())
    }

    /// Stores a pair, points its modes at it and arms its cutoff timer.
    fn insert(&mut self, live: LivePair) -> Result<u64, ChainError> {
        let id = self.next_pair;
        self.next_pair += 1;
        for slot in live.slots.iter().flatten() {
            self.banks[slot.bank].modes[slot.mode] = ModeState::Holding(id);
        }
        if let Some(t_cut) = self.setup.cutoff {
            let first = live
                .pair
                .qubits
                .iter()
                .filter(|q| q.in_memory())
                .map(|q| q.confirmed_at)
                .fold(f64::INFINITY, f64::min);
            if first.is_finite() {
                self.queue.schedule(first_discard_time(first, t_cut), Event::Expire { pair: id })?;
            }
        }
        self.pairs.insert(id, live);
        Ok(id)
    }

    fn expired(&self, id: u64) -> bool {
        let (Some(t_cut), Some(live)) = (self.setup.cutoff, self.pairs.get(&id)) else {
            return false;
        };
        let now = self.queue.now();
        live.pair
            .qubits
            .iter()
            .any(|q| q.in_memory() && !within_cutoff(q.confirmed_at, now, Some(t_cut)))
    }

    fn discard(&mut self, id: u64) -> Result<(), ChainError> {
        let live = self.pairs.remove(&id).expect("discarding a live pair");
        self.stats.discards += 1;
        let mut restart = Vec::new();
        for (end, slot) in live.slots.iter().enumerate() {
            if let Some(slot) = slot {
                self.banks[slot.bank].release(slot.mode);
                let node = live.pair.qubits[end].node;
                restart.push(if end == 0 { node } else { node - 1 });
            }
        }
        for link in restart {
            self.start_attempts(link, false)?;
        }
        Ok(())
    }

    /// Oldest eligible pair held in `bank`, dropping expired ones on the way.
    fn oldest(&mut self, bank: usize) -> Result<Option<(usize, u64)>, ChainError> {
        while let Some((mode, pair)) = self.banks[bank].front() {
            if self.expired(pair) {
                self.discard(pair)?;
                continue;
            }
            return Ok(Some((mode, pair)));
        }
        Ok(None)
    }

    fn try_swap(&mut self, node: usize) -> Result<(), ChainError> {
        let (lb, rb) = (Self::bank_id(node, Side::Left), Self::bank_id(node, Side::Right));
        loop {
            let Some((_, left)) = self.oldest(lb)? else { return Ok(()) };
            let Some((_, right)) = self.oldest(rb)? else { return Ok(()) };
            // an expiry found while scanning the right bank may have removed `left`
            if !self.pairs.contains_key(&left) {
                continue;
            }
            if self.opts.audit {
                self.audit_selection(lb, left);
                self.audit_selection(rb, right);
            }
            self.banks[lb].waiting.pop_front();
            self.banks[rb].waiting.pop_front();
            self.swap_at(node, left, right)?;
        }
    }

    fn swap_at(&mut self, node: usize, left: u64, right: u64) -> Result<(), ChainError> {
        let now = self.queue.now();
        let mut l = self.pairs.remove(&left).expect("left pair is live");
        let mut r = self.pairs.remove(&right).expect("right pair is live");
        debug_assert_eq!(l.pair.qubits[1].node, node);
        debug_assert_eq!(r.pair.qubits[0].node, node);
        l.pair.lazy_update(now)?;
        r.pair.lazy_update(now)?;
        for slot in [l.slots[1], r.slots[0]].into_iter().flatten() {
            self.banks[slot.bank].release(slot.mode);
        }
        self.stats.swaps += 1;
        let joined = TimedPair::new(swap(&l.pair.state, &r.pair.state), [l.pair.qubits[0], r.pair.qubits[1]]);
        let notice = l.notice.max(r.notice).max(now + self.setup.nodes[node].notice_delay);
        let last = self.setup.nodes.len() - 1;
        if joined.qubits[0].node == 0 && joined.qubits[1].node == last {
            self.records.push(SampleRecord { time: notice, state: joined.state });
        } else {
            self.insert(LivePair { pair: joined, slots: [l.slots[0], r.slots[1]], notice })?;
        }
        self.start_attempts(node - 1, false)?;
        self.start_attempts(node, false)?;
        Ok(())
    }

    fn audit_selection(&self, bank: usize, chosen: u64) {
        let now = self.queue.now();
        let b = &self.banks[bank];
        let node = bank / 2;
        let confirmed = |id: u64| {
            let q = self.pairs[&id].pair.qubits;
            q.iter().find(|q| q.node == node).expect("pair touches the bank's station").confirmed_at
        };
        let chosen_at = confirmed(chosen);
        assert!(chosen_at <= now, "swap would use an unconfirmed qubit");
        let held = b.modes.iter().filter(|m| !matches!(m, ModeState::Free)).count();
        assert_eq!(held, b.occupied);
        assert!(held <= b.modes.len());
        for m in &b.modes {
            if let ModeState::Holding(id) = *m {
                assert!(confirmed(id) >= chosen_at, "swap did not pick the oldest qubit");
            }
        }
    }
}

/// Slots until the first confirmed load, and how many loads that took, for
/// independent per-slot load and confirmation probabilities.
fn relay_trials(p_load: f64, p_confirm: f64, rng: &mut impl Rng) -> Result<(u64, u64), SimError> {
    let slots = sample_geometric(p_load * p_confirm, rng)?;
    if slots == 1 {
        return Ok((1, 1));
    }
    // a failed slot was a load that went unconfirmed with this probability
    let q = p_load * (1.0 - p_confirm) / (1.0 - p_load * p_confirm);
    let extra = if q <= 0.0 {
        0
    } else {
        Binomial::new(slots - 1, q.min(1.0)).map_err(|_| SimError::InvalidProbability(q))?.sample(rng)
    };
    Ok((slots, 1 + extra))
}

/// Earliest representable time at which a qubit confirmed at `confirmed`
/// fails the cutoff rule.
fn first_discard_time(confirmed: f64, t_cut: f64) -> f64 {
    let mut t = confirmed + t_cut;
    while t - confirmed <= t_cut {
        t = t.next_up();
    }
    t
}
