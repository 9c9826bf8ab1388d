//! Repeated multi-regime annealing campaigns with restartable checkpoints.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{descend_zero_t, simulated_anneal, Schedule, ScheduleKind};
use crate::ising::{IsingModel, SpinConfiguration};
use crate::{Error, RandomSource, Result};

/// Resource cap for a campaign. Sweep caps are deterministic; a wall-clock
/// cap is checked between checkpoint blocks and is not.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    pub max_sweeps: Option<u64>,
    pub max_wall: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn sweeps(max: u64) -> Self {
        Self {
            max_sweeps: Some(max),
            max_wall: None,
        }
    }

    pub fn wall_clock(max: Duration) -> Self {
        Self {
            max_sweeps: None,
            max_wall: Some(max),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_sweeps == Some(0) || self.max_wall == Some(Duration::ZERO) {
            return Err(Error::InvalidArgument("campaign budget must be non-zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    SweepBudget,
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    /// Every distinct minimum with the 0-based cycle in which it was first found.
    pub minima: BTreeMap<SpinConfiguration, u64>,
    pub cycles_completed: u64,
    pub sweeps: u64,
    pub stop: StopReason,
}

impl CampaignResult {
    /// Minima found within the first `cycles` cycles.
    pub fn found_within(&self, cycles: u64) -> impl Iterator<Item = &SpinConfiguration> {
        self.minima
            .iter()
            .filter(move |(_, &c)| c < cycles)
            .map(|(m, _)| m)
    }

    pub fn count_within(&self, cycles: u64) -> usize {
        self.found_within(cycles).count()
    }
}

/// Restart point written at cycle boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignCheckpoint {
    pub digest: String,
    pub seed: u64,
    pub stream: u64,
    pub regime_index: usize,
    pub next_cycle: u64,
    /// Index of the next chain's random stream.
    pub next_chain: u64,
    pub sweeps: u64,
    pub minima: BTreeMap<SpinConfiguration, u64>,
}

const CHECKPOINT_MAGIC: &str = "# sa-checkpoint v1";
const CHECKPOINT_END: &str = "# end";

impl CampaignCheckpoint {
    /// Text header, then one `<byte length>:<payload>` record per minimum,
    /// then an end marker. A missing record or marker means truncation.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{CHECKPOINT_MAGIC}\ndigest={} seed={} stream={} regime={} cycle={} next_chain={} sweeps={} records={}\n",
            self.digest,
            self.seed,
            self.stream,
            self.regime_index,
            self.next_cycle,
            self.next_chain,
            self.sweeps,
            self.minima.len()
        );
        for (m, c) in &self.minima {
            let payload = format!("{m} {c}");
            out.push_str(&format!("{}:{payload}\n", payload.len()));
        }
        out.push_str(CHECKPOINT_END);
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing checkpoint header"));
        }
        let header = lines.next().ok_or_else(|| bad("truncated header"))?;
        let fields: BTreeMap<&str, &str> = header
            .split_whitespace()
            .filter_map(|t| t.split_once('='))
            .collect();
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
        let num = |k: &str| -> Result<u64> {
            field(k)?
                .parse()
                .map_err(|_| bad(&format!("bad value for `{k}`")))
        };
        let records = num("records")? as usize;
        let mut minima = BTreeMap::new();
        for i in 0..records {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("truncated: {i} of {records} records present")))?;
            let (len, payload) = line
                .split_once(':')
                .ok_or_else(|| bad(&format!("record {i} has no length prefix")))?;
            let len: usize = len.parse().map_err(|_| bad("bad record length"))?;
            if payload.len() != len {
                return Err(bad(&format!("record {i} length mismatch (truncated?)")));
            }
            let (lm, cycle) = payload
                .split_once(' ')
                .ok_or_else(|| bad(&format!("record {i} malformed")))?;
            let lm: SpinConfiguration = lm.parse()?;
            let cycle: u64 = cycle.parse().map_err(|_| bad("bad cycle index"))?;
            minima.insert(lm, cycle);
        }
        if lines.next() != Some(CHECKPOINT_END) {
            return Err(bad("truncated: end marker missing"));
        }
        Ok(Self {
            digest: field("digest")?.to_string(),
            seed: num("seed")?,
            stream: num("stream")?,
            regime_index: num("regime")? as usize,
            next_cycle: num("cycle")?,
            next_chain: num("next_chain")?,
            sweeps: num("sweeps")?,
            minima,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Digest of everything that determines a campaign's trajectory.
pub fn campaign_digest(model: &IsingModel, regimes: &[Schedule], source: &RandomSource) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.to_text().as_bytes());
    for r in regimes {
        let rate = match r.kind {
            ScheduleKind::GeometricCooling { rate } => rate,
            _ => 0.0,
        };
        hasher.update(format!("{:?} {rate:?} {:?} {:?} {}\n", r.kind, r.t_start, r.t_end, r.steps).as_bytes());
    }
    hasher.update(format!("{} {}", source.seed, source.stream).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Drives a campaign in checkpointed blocks of cycles.
///
/// Chain `c * R + r` (cycle `c`, regime `r`) always draws from stream
/// `source.child(c * R + r)`, so block size, worker count and restarts do
/// not change the result.
pub struct CampaignRunner<'a> {
    pub model: &'a IsingModel,
    pub regimes: &'a [Schedule],
    pub cycles: u64,
    pub source: RandomSource,
    pub budget: Budget,
    pub checkpoint_every: u64,
}

impl<'a> CampaignRunner<'a> {
    pub fn new(
        model: &'a IsingModel,
        regimes: &'a [Schedule],
        cycles: u64,
        source: RandomSource,
        budget: Budget,
    ) -> Self {
        Self {
            model,
            regimes,
            cycles,
            source,
            budget,
            checkpoint_every: 256,
        }
    }

    pub fn digest(&self) -> String {
        campaign_digest(self.model, self.regimes, &self.source)
    }

    fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::InvalidArgument("campaign needs at least one regime".into()));
        }
        for r in self.regimes {
            r.validate()?;
            if !r.is_cooling() || r.t_end != 0.0 {
                return Err(Error::InvalidArgument(
                    "campaign regimes must be cooling schedules ending at T = 0".into(),
                ));
            }
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidArgument("checkpoint interval must be >= 1".into()));
        }
        self.budget.validate()
    }

    /// Runs from scratch or from `resume`, calling `on_checkpoint` after
    /// every block.
    pub fn run(
        &self,
        resume: Option<CampaignCheckpoint>,
        mut on_checkpoint: impl FnMut(&CampaignCheckpoint) -> Result<()>,
    ) -> Result<CampaignResult> {
        self.validate()?;
        let digest = self.digest();
        let regimes = self.regimes.len() as u64;
        let mut state = match resume {
            Some(cp) => {
                if cp.digest != digest {
                    return Err(Error::Checkpoint(
                        "digest does not match this model/regimes/seed; refusing to resume".into(),
                    ));
                }
                cp
            }
            None => CampaignCheckpoint {
                digest,
                seed: self.source.seed,
                stream: self.source.stream,
                regime_index: 0,
                next_cycle: 0,
                next_chain: 0,
                sweeps: 0,
                minima: BTreeMap::new(),
            },
        };
        let sweeps_per_cycle: u64 = self.regimes.iter().map(|r| r.steps as u64).sum();
        let sweep_cap_cycles = self
            .budget
            .max_sweeps
            .map(|max| max / sweeps_per_cycle)
            .unwrap_or(u64::MAX);
        let target = self.cycles.min(sweep_cap_cycles);
        let started = Instant::now();
        let mut stop = StopReason::Completed;

        while state.next_cycle < target {
            if let Some(limit) = self.budget.max_wall {
                if started.elapsed() >= limit {
                    stop = StopReason::WallClock;
                    break;
                }
            }
            let block_end = (state.next_cycle + self.checkpoint_every).min(target);
            let first_chain = state.next_cycle * regimes;
            let last_chain = block_end * regimes;
            let found: Vec<(SpinConfiguration, u64)> = (first_chain..last_chain)
                .into_par_iter()
                .map(|chain| {
                    let regime = &self.regimes[(chain % regimes) as usize];
                    let result = simulated_anneal(self.model, regime, &self.source.child(chain))
                        .expect("regimes validated");
                    (descend_zero_t(self.model, &result.final_state), chain / regimes)
                })
                .collect();
            for (lm, cycle) in found {
                state
                    .minima
                    .entry(lm)
                    .and_modify(|c| *c = (*c).min(cycle))
                    .or_insert(cycle);
            }
            state.sweeps += (block_end - state.next_cycle) * sweeps_per_cycle;
            state.next_cycle = block_end;
            state.next_chain = last_chain;
            state.regime_index = 0;
            on_checkpoint(&state)?;
        }
        if stop == StopReason::Completed && target < self.cycles {
            stop = StopReason::SweepBudget;
        }
        Ok(CampaignResult {
            minima: state.minima,
            cycles_completed: state.next_cycle,
            sweeps: state.sweeps,
            stop,
        })
    }
}

/// Repeats the regime series for `cycles` rounds (or until `budget` runs
/// out), canonicalizing every chain endpoint by steepest descent.
pub fn sa_campaign(
    model: &IsingModel,
    regimes: &[Schedule],
    cycles: u64,
    source: &RandomSource,
    budget: Budget,
) -> Result<CampaignResult> {
    CampaignRunner::new(model, regimes, cycles, *source, budget).run(None, |_| Ok(()))
}
