//! Monte Carlo dynamics on an [`IsingModel`].
//!
//! Every sweep visits spins in ascending index order; the only randomness
//! is the Metropolis acceptance draw (and the random initial state of an
//! annealing chain), so a chain is a pure function of its [`RandomSource`].

mod campaign;
mod warming;

pub use campaign::{
    sa_campaign, Budget, CampaignCheckpoint, CampaignResult, CampaignRunner, StopReason,
};
pub use warming::{simulated_warm, WarmResult, WarmSample};

use rand::Rng;

use crate::ising::{IsingModel, SpinConfiguration};
use crate::{Error, RandomSource, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `T_i = t_start * rate^i`, with the last sweep at `t_end`.
    GeometricCooling { rate: f64 },
    LinearCooling,
    LinearWarming,
    Constant,
}

/// A temperature per sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl Schedule {
    /// Geometric cooling from `t_start` until the temperature drops below
    /// `t_floor`, followed by one sweep at `T = 0`.
    pub fn geometric(t_start: f64, rate: f64, t_floor: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "geometric cooling rate {rate} must lie in (0, 1)"
            )));
        }
        if !(t_floor > 0.0 && t_floor < t_start) {
            return Err(Error::InvalidArgument(format!(
                "temperature floor {t_floor} must lie in (0, t_start = {t_start})"
            )));
        }
        let decay_sweeps = ((t_floor / t_start).ln() / rate.ln()).ceil() as usize;
        let schedule = Self {
            kind: ScheduleKind::GeometricCooling { rate },
            t_start,
            t_end: 0.0,
            steps: decay_sweeps + 1,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn linear_cooling(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        let s = Self {
            kind: ScheduleKind::LinearCooling,
            t_start,
            t_end,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn linear_warming(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        let s = Self {
            kind: ScheduleKind::LinearWarming,
            t_start,
            t_end,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(t: f64, steps: usize) -> Result<Self> {
        let s = Self {
            kind: ScheduleKind::Constant,
            t_start: t,
            t_end: t,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.steps == 0 {
            return bad("schedule needs at least one sweep".into());
        }
        if !(self.t_start >= 0.0 && self.t_end >= 0.0) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return bad(format!(
                "temperatures must be finite and >= 0 (got {} -> {})",
                self.t_start, self.t_end
            ));
        }
        match self.kind {
            ScheduleKind::GeometricCooling { rate } if !(rate > 0.0 && rate < 1.0) => {
                bad(format!("geometric cooling rate {rate} must lie in (0, 1)"))
            }
            ScheduleKind::GeometricCooling { .. } | ScheduleKind::LinearCooling
                if self.t_end > self.t_start =>
            {
                bad("cooling schedule must not end hotter than it starts".into())
            }
            ScheduleKind::LinearWarming if self.t_end < self.t_start => {
                bad("warming schedule must not end colder than it starts".into())
            }
            ScheduleKind::Constant if self.t_end != self.t_start => {
                bad("constant schedule needs t_start == t_end".into())
            }
            _ => Ok(()),
        }
    }

    pub fn is_cooling(&self) -> bool {
        matches!(
            self.kind,
            ScheduleKind::GeometricCooling { .. } | ScheduleKind::LinearCooling
        )
    }

    pub fn is_warming(&self) -> bool {
        matches!(self.kind, ScheduleKind::LinearWarming)
    }

    /// Temperature of sweep `i` (`0 <= i < steps`).
    pub fn temperature(&self, i: usize) -> f64 {
        let last = self.steps - 1;
        let frac = if last == 0 { 1.0 } else { i as f64 / last as f64 };
        match self.kind {
            ScheduleKind::GeometricCooling { rate } => {
                if i >= last {
                    self.t_end
                } else {
                    (self.t_start * rate.powi(i as i32)).max(self.t_end)
                }
            }
            ScheduleKind::LinearCooling | ScheduleKind::LinearWarming => {
                if i >= last {
                    self.t_end
                } else {
                    self.t_start + (self.t_end - self.t_start) * frac
                }
            }
            ScheduleKind::Constant => self.t_start,
        }
    }

    pub fn temperatures(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|i| self.temperature(i))
    }
}

/// Default cooling regimes: five geometric schedules with per-sweep rates
/// 0.99 .. 0.999999, cooling from `t_start` to `1e-3 * t_start` then
/// quenching at `T = 0`.
pub fn default_regimes(t_start: f64) -> Vec<Schedule> {
    [0.99, 0.999, 0.9999, 0.99999, 0.999999]
        .into_iter()
        .map(|rate| Schedule::geometric(t_start, rate, t_start * 1e-3).expect("valid regime"))
        .collect()
}

/// Smallest temperature (within 1%) at which the mean Metropolis
/// acceptance of single flips from random states is at least `target`.
pub fn calibrate_t_start(model: &IsingModel, target: f64, source: &RandomSource) -> f64 {
    let mut rng = source.rng();
    let n = model.n();
    if n == 0 {
        return 1.0;
    }
    let deltas: Vec<f64> = (0..4096)
        .map(|_| {
            let s = SpinConfiguration::random(n, &mut rng);
            model.delta_unchecked(&s, rng.gen_range(0..n))
        })
        .collect();
    let acceptance = |t: f64| {
        deltas
            .iter()
            .map(|&d| if d <= 0.0 { 1.0 } else { (-d / t).exp() })
            .sum::<f64>()
            / deltas.len() as f64
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    while acceptance(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    while hi / lo > 1.01 {
        let mid = (lo * hi).sqrt();
        if acceptance(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Metropolis acceptance for an energy change `delta` at `temperature`.
/// At `T = 0` only strictly downhill moves pass.
#[inline]
pub(crate) fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta < 0.0 {
        true
    } else if temperature <= 0.0 {
        false
    } else if delta == 0.0 {
        true
    } else {
        rng.gen::<f64>() < (-delta / temperature).exp()
    }
}

/// One Metropolis sweep in ascending spin order. Returns the number of
/// accepted flips.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    model: &IsingModel,
    s: &mut SpinConfiguration,
    temperature: f64,
    rng: &mut R,
) -> usize {
    let mut accepted = 0;
    for k in 0..model.n() {
        let delta = model.delta_unchecked(s, k);
        if metropolis_accept(delta, temperature, rng) {
            s.flip(k);
            accepted += 1;
        }
    }
    accepted
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub final_state: SpinConfiguration,
    /// `(state, energy)` after every `stride`-th sweep, when requested.
    pub trajectory: Option<Vec<(SpinConfiguration, f64)>>,
    pub jump_count: u64,
    pub attempts: u64,
}

/// Annealing chain from a uniformly random state along a cooling schedule
/// that ends at `T = 0`.
pub fn simulated_anneal(
    model: &IsingModel,
    schedule: &Schedule,
    source: &RandomSource,
) -> Result<ChainResult> {
    simulated_anneal_with_trajectory(model, schedule, source, None)
}

pub fn simulated_anneal_with_trajectory(
    model: &IsingModel,
    schedule: &Schedule,
    source: &RandomSource,
    stride: Option<usize>,
) -> Result<ChainResult> {
    schedule.validate()?;
    if !schedule.is_cooling() || schedule.t_end != 0.0 {
        return Err(Error::InvalidArgument(
            "annealing needs a cooling schedule ending at T = 0".into(),
        ));
    }
    run_chain(model, schedule, source, stride)
}

/// Metropolis chain from a uniformly random state along any schedule;
/// the final state is whatever the last sweep left.
pub fn metropolis_chain(model: &IsingModel, schedule: &Schedule, source: &RandomSource) -> Result<ChainResult> {
    schedule.validate()?;
    run_chain(model, schedule, source, None)
}

fn run_chain(
    model: &IsingModel,
    schedule: &Schedule,
    source: &RandomSource,
    stride: Option<usize>,
) -> Result<ChainResult> {
    if stride == Some(0) {
        return Err(Error::InvalidArgument("trajectory stride must be >= 1".into()));
    }
    let mut rng = source.rng();
    let mut s = SpinConfiguration::random(model.n(), &mut rng);
    let mut trajectory = stride.map(|_| Vec::new());
    let mut jumps = 0u64;
    for (i, t) in schedule.temperatures().enumerate() {
        jumps += metropolis_sweep(model, &mut s, t, &mut rng) as u64;
        if let (Some(stride), Some(traj)) = (stride, trajectory.as_mut()) {
            if (i + 1) % stride == 0 {
                let e = model.energy_unchecked(&s);
                traj.push((s.clone(), e));
            }
        }
    }
    Ok(ChainResult {
        final_state: s,
        trajectory,
        jump_count: jumps,
        attempts: (schedule.steps * model.n()) as u64,
    })
}

/// Index of the steepest strictly-downhill flip, lowest index on ties.
fn steepest_move(model: &IsingModel, s: &SpinConfiguration) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for k in 0..model.n() {
        let delta = model.delta_unchecked(s, k);
        if delta < 0.0 && best.is_none_or(|(_, b)| delta < b) {
            best = Some((k, delta));
        }
    }
    best
}

/// Deterministic steepest descent: flip the spin with the most negative
/// `dE` (lowest index on ties) until no flip lowers the energy. Flat moves
/// are never taken. The result is the canonical identity of the valley
/// containing `s`.
pub fn descend_zero_t(model: &IsingModel, s: &SpinConfiguration) -> SpinConfiguration {
    let mut state = s.clone();
    while let Some((k, _)) = steepest_move(model, &state) {
        state.flip(k);
    }
    state
}

/// Steepest descent that also reports the energy after every step,
/// starting with the energy of `s`.
pub fn descent_path(model: &IsingModel, s: &SpinConfiguration) -> (SpinConfiguration, Vec<f64>) {
    let mut state = s.clone();
    let mut energy = model.energy_unchecked(&state);
    let mut energies = vec![energy];
    while let Some((k, delta)) = steepest_move(model, &state) {
        state.flip(k);
        energy += delta;
        energies.push(energy);
    }
    (state, energies)
}

pub fn is_local_minimum(model: &IsingModel, s: &SpinConfiguration) -> bool {
    steepest_move(model, s).is_none()
}

/// Stochastic descent for sensitivity studies: a uniformly chosen
/// strictly-downhill flip per step. Not a canonical identity.
pub fn descend_stochastic<R: Rng + ?Sized>(
    model: &IsingModel,
    s: &SpinConfiguration,
    rng: &mut R,
) -> SpinConfiguration {
    let mut state = s.clone();
    loop {
        let downhill: Vec<usize> = (0..model.n())
            .filter(|&k| model.delta_unchecked(&state, k) < 0.0)
            .collect();
        if downhill.is_empty() {
            return state;
        }
        state.flip(downhill[rng.gen_range(0..downhill.len())]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn ferromagnet() -> IsingModel {
        IsingModel::new(2, [(0, 1, 1.0)], vec![0.0, 0.0]).unwrap()
    }

    /// Independent steepest descent over an explicit energy table.
    fn oracle_descent(model: &IsingModel, start: u64) -> u64 {
        let n = model.n();
        let table: Vec<f64> = (0..(1u64 << n))
            .map(|i| model.energy(&SpinConfiguration::from_index(n, i)).unwrap())
            .collect();
        let mut cur = start;
        loop {
            let mut best = None;
            let mut best_delta = 0.0;
            for k in 0..n {
                let d = table[(cur ^ (1 << k)) as usize] - table[cur as usize];
                if d < best_delta {
                    best_delta = d;
                    best = Some(k);
                }
            }
            match best {
                Some(k) => cur ^= 1 << k,
                None => return cur,
            }
        }
    }

    #[test]
    fn schedules_are_monotone() {
        let g = Schedule::geometric(5.0, 0.9, 0.01).unwrap();
        let temps: Vec<f64> = g.temperatures().collect();
        assert!(temps.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*temps.last().unwrap(), 0.0);
        assert_eq!(temps[0], 5.0);

        let w = Schedule::linear_warming(0.0, 2.0, 5).unwrap();
        assert_eq!(w.temperatures().collect::<Vec<_>>(), [0.0, 0.5, 1.0, 1.5, 2.0]);
        let c = Schedule::linear_cooling(2.0, 0.0, 3).unwrap();
        assert_eq!(c.temperatures().collect::<Vec<_>>(), [2.0, 1.0, 0.0]);

        assert!(Schedule::linear_cooling(0.0, 1.0, 3).is_err());
        assert!(Schedule::linear_warming(1.0, 0.0, 3).is_err());
        assert!(Schedule::constant(1.0, 0).is_err());
        assert!(Schedule::constant(-1.0, 3).is_err());
    }

    #[test]
    fn default_regimes_span_cooling_rates() {
        let regimes = default_regimes(3.0);
        assert_eq!(regimes.len(), 5);
        assert!(regimes.windows(2).all(|w| w[0].steps < w[1].steps));
        assert!(regimes.iter().all(|r| r.is_cooling() && r.t_end == 0.0));
    }

    #[test]
    fn calibrated_start_reaches_target_acceptance() {
        let mut rng = RandomSource::new(1, 0).rng();
        let m = IsingModel::random_dyadic(12, 0.5, &mut rng);
        let t = calibrate_t_start(&m, 0.95, &RandomSource::new(2, 0));
        // measure with fresh draws
        let mut rng = RandomSource::new(3, 0).rng();
        let mut acc = 0.0;
        let trials = 20000;
        for _ in 0..trials {
            let s = SpinConfiguration::random(12, &mut rng);
            let d = m.delta_unchecked(&s, rng.gen_range(0..12));
            acc += if d <= 0.0 { 1.0 } else { (-d / t).exp() };
        }
        assert!(acc / trials as f64 > 0.94, "{}", acc / trials as f64);
    }

    #[test]
    fn zero_temperature_sweep_leaves_strict_minimum() {
        let m = ferromagnet();
        let mut s: SpinConfiguration = "++".parse().unwrap();
        let mut rng = RandomSource::new(0, 0).rng();
        assert_eq!(metropolis_sweep(&m, &mut s, 0.0, &mut rng), 0);
        assert_eq!(s.to_string(), "++");
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let m = IsingModel::new(1, [], vec![1.0]).unwrap();
        let mut s = SpinConfiguration::all_up(1);
        let mut rng = RandomSource::new(4, 0).rng();
        let sweeps = 10_000;
        let accepted: usize = (0..sweeps)
            .map(|_| metropolis_sweep(&m, &mut s, 1e9, &mut rng))
            .sum();
        let rate = accepted as f64 / sweeps as f64;
        assert!((rate - 1.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn ferromagnet_anneals_into_ground_states() {
        let m = ferromagnet();
        let sched = Schedule::geometric(3.0, 0.95, 0.01).unwrap();
        let root = RandomSource::new(9, 0);
        for i in 0..1000 {
            let r = simulated_anneal(&m, &sched, &root.child(i)).unwrap();
            let s = r.final_state.to_string();
            assert!(s == "++" || s == "--", "{s}");
        }
    }

    #[test]
    fn anneal_is_deterministic_and_validates() {
        let mut rng = RandomSource::new(1, 1).rng();
        let m = IsingModel::random_dyadic(10, 0.5, &mut rng);
        let sched = Schedule::geometric(3.0, 0.9, 0.01).unwrap();
        let src = RandomSource::new(77, 2);
        let a = simulated_anneal_with_trajectory(&m, &sched, &src, Some(5)).unwrap();
        let b = simulated_anneal_with_trajectory(&m, &sched, &src, Some(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_count <= a.attempts);
        for (state, e) in a.trajectory.as_ref().unwrap() {
            assert_eq!(m.energy(state).unwrap(), *e);
        }
        let warm = Schedule::linear_warming(0.0, 1.0, 10).unwrap();
        assert!(simulated_anneal(&m, &warm, &src).is_err());
        let not_zero = Schedule::linear_cooling(2.0, 0.5, 10).unwrap();
        assert!(simulated_anneal(&m, &not_zero, &src).is_err());
    }

    #[test]
    fn descent_hand_case() {
        let m = IsingModel::new(2, [(0, 1, 1.0)], vec![0.1, 0.0]).unwrap();
        let out = descend_zero_t(&m, &"-+".parse().unwrap());
        assert_eq!(out.to_string(), "++");
        let min: SpinConfiguration = "++".parse().unwrap();
        assert_eq!(descend_zero_t(&m, &min), min);
    }

    #[test]
    fn descent_matches_table_oracle_n12() {
        let mut rng = RandomSource::new(21, 0).rng();
        let m = IsingModel::random_dyadic(12, 0.5, &mut rng);
        for idx in 0..(1u64 << 12) {
            let s = SpinConfiguration::from_index(12, idx);
            assert_eq!(descend_zero_t(&m, &s).to_index(), oracle_descent(&m, idx));
        }
    }

    #[test]
    fn stochastic_descent_ends_in_a_minimum() {
        let mut rng = RandomSource::new(22, 0).rng();
        let m = IsingModel::random_dyadic(10, 0.5, &mut rng);
        for _ in 0..50 {
            let s = SpinConfiguration::random(10, &mut rng);
            let out = descend_stochastic(&m, &s, &mut rng);
            assert!(is_local_minimum(&m, &out));
        }
    }

    proptest! {
        #[test]
        fn descent_is_monotone_and_idempotent(seed in any::<u64>(), idx in 0u64..1024) {
            let mut rng = RandomSource::from_seed(seed).rng();
            let m = IsingModel::random_dyadic(10, 0.5, &mut rng);
            let s = SpinConfiguration::from_index(10, idx);
            let (end, energies) = descent_path(&m, &s);
            prop_assert!(energies.windows(2).all(|w| w[1] < w[0]));
            prop_assert!(energies.len() <= 1 << 10);
            prop_assert_eq!(*energies.last().unwrap(), m.energy(&end).unwrap());
            prop_assert_eq!(descend_zero_t(&m, &end), end.clone());
            prop_assert_eq!(descend_zero_t(&m, &s), end);
        }
    }
}
