use super::{descend_zero_t, is_local_minimum, metropolis_accept, Schedule};
use crate::ising::{IsingModel, SpinConfiguration};
use crate::{Error, RandomSource, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WarmSample {
    pub state: SpinConfiguration,
    pub energy: f64,
    /// Whether steepest descent from `state` returns to the starting minimum.
    pub in_valley: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmResult {
    pub samples: Vec<WarmSample>,
    /// Accepted flips before the escaping one (inclusive), if the chain escaped.
    pub jumps_before_escape: Option<u64>,
    pub jumps: u64,
    pub attempts: u64,
}

impl WarmResult {
    pub fn escaped(&self) -> bool {
        self.jumps_before_escape.is_some()
    }
}

/// Warming chain started at the local minimum `lm`.
///
/// Every `sample_stride`-th accepted flip is recorded together with its
/// valley membership. The chain stops at the first recorded sample that
/// descends to a different minimum, or when the schedule ends.
pub fn simulated_warm(
    model: &IsingModel,
    lm: &SpinConfiguration,
    schedule: &Schedule,
    source: &RandomSource,
    sample_stride: u64,
) -> Result<WarmResult> {
    model.check_dim(lm)?;
    schedule.validate()?;
    if schedule.is_cooling() {
        return Err(Error::InvalidArgument(
            "simulated warming needs a warming or constant schedule".into(),
        ));
    }
    if sample_stride == 0 {
        return Err(Error::InvalidArgument("sample stride must be >= 1".into()));
    }
    if !is_local_minimum(model, lm) {
        return Err(Error::NotAMinimum(format!(
            "{lm} has a strictly downhill neighbor"
        )));
    }
    let mut rng = source.rng();
    let mut state = lm.clone();
    let mut samples = Vec::new();
    let mut jumps = 0u64;
    let mut attempts = 0u64;
    for t in schedule.temperatures() {
        for k in 0..model.n() {
            attempts += 1;
            let delta = model.delta_unchecked(&state, k);
            if !metropolis_accept(delta, t, &mut rng) {
                continue;
            }
            state.flip(k);
            jumps += 1;
            if !jumps.is_multiple_of(sample_stride) {
                continue;
            }
            let in_valley = descend_zero_t(model, &state) == *lm;
            samples.push(WarmSample {
                state: state.clone(),
                energy: model.energy_unchecked(&state),
                in_valley,
            });
            if !in_valley {
                return Ok(WarmResult {
                    samples,
                    jumps_before_escape: Some(jumps),
                    jumps,
                    attempts,
                });
            }
        }
    }
    Ok(WarmResult {
        samples,
        jumps_before_escape: None,
        jumps,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_never_moves() {
        let m = IsingModel::new(2, [(0, 1, 1.0)], vec![0.0; 2]).unwrap();
        let lm: SpinConfiguration = "++".parse().unwrap();
        let sched = Schedule::constant(0.0, 100).unwrap();
        let r = simulated_warm(&m, &lm, &sched, &RandomSource::from_seed(1), 1).unwrap();
        assert!(r.samples.is_empty());
        assert!(!r.escaped());
        assert_eq!(r.jumps, 0);
    }

    #[test]
    fn single_barrier_escape() {
        // ++ is a local minimum whose two exits both drain into --.
        let m = IsingModel::new(2, [(0, 1, 2.0)], vec![-1.0, -1.0]).unwrap();
        let lm: SpinConfiguration = "++".parse().unwrap();
        let sched = Schedule::linear_warming(0.0, 3.0, 2000).unwrap();
        let r = simulated_warm(&m, &lm, &sched, &RandomSource::from_seed(2), 1).unwrap();
        assert!(r.escaped());
        assert!(r.jumps_before_escape.unwrap() >= 1);
        assert!(!r.samples.last().unwrap().in_valley);
    }

    #[test]
    fn rejects_non_minimum_and_cooling() {
        let m = IsingModel::new(2, [(0, 1, 1.0)], vec![0.0; 2]).unwrap();
        let src = RandomSource::from_seed(1);
        let sched = Schedule::linear_warming(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            simulated_warm(&m, &"+-".parse().unwrap(), &sched, &src, 1),
            Err(Error::NotAMinimum(_))
        ));
        let cool = Schedule::linear_cooling(1.0, 0.0, 10).unwrap();
        assert!(simulated_warm(&m, &"++".parse().unwrap(), &cool, &src, 1).is_err());
    }

    #[test]
    fn recorded_energies_and_membership_are_consistent() {
        let mut rng = RandomSource::new(31, 0).rng();
        let m = IsingModel::random_dyadic(12, 0.5, &mut rng);
        let lm = descend_zero_t(&m, &SpinConfiguration::random(12, &mut rng));
        let sched = Schedule::linear_warming(0.0, 2.0, 500).unwrap();
        for seed in 0..20 {
            let r = simulated_warm(&m, &lm, &sched, &RandomSource::new(seed, 1), 2).unwrap();
            for s in &r.samples {
                assert_eq!(s.energy, m.energy(&s.state).unwrap());
                assert_eq!(s.in_valley, descend_zero_t(&m, &s.state) == lm);
            }
            assert!(r.samples.iter().rev().skip(1).all(|s| s.in_valley));
        }
    }
}
