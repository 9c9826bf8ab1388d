//! Valley parameters estimated from warming chains, and the registry of
//! valleys keyed by their canonical local minimum.
//!
//! A chain has escaped its valley as soon as steepest descent from its
//! current state lands on a different minimum. Time is counted in
//! single-flip Monte Carlo steps (attempted flips), so the escape rate is
//! the inverse mean number of steps before the first out-of-valley state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::ising::{IsingModel, SpinConfiguration};
use crate::mc::{descend_zero_t, is_local_minimum, metropolis_accept, simulated_warm, CampaignResult, Schedule};
use crate::samplers::SampleSet;
use crate::stats::{least_squares, mean, std_dev};
use crate::{Error, RandomSource, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeRate {
    pub temperature: f64,
    /// `1 / mean(steps before escape)` over escaped chains; 0 when all capped.
    pub rate: f64,
    pub std_error: f64,
    pub chains: usize,
    pub escaped: usize,
    pub capped_fraction: f64,
}

impl EscapeRate {
    pub fn all_capped(&self) -> bool {
        self.escaped == 0
    }
}

struct ChainOutcome {
    steps_to_escape: Option<u64>,
    escape_energy: Option<f64>,
    visited: HashMap<SpinConfiguration, f64>,
}

/// Constant-temperature chain from `lm` until escape or `step_cap` steps.
/// In-valley states visited on the way are collected.
fn escape_chain<R: Rng>(
    model: &IsingModel,
    lm: &SpinConfiguration,
    temperature: f64,
    step_cap: u64,
    rng: &mut R,
) -> ChainOutcome {
    let n = model.n() as u64;
    let mut state = lm.clone();
    let mut membership: HashMap<SpinConfiguration, bool> = HashMap::new();
    let mut visited = HashMap::new();
    let mut steps = 0u64;
    while steps < step_cap {
        let k = (steps % n) as usize;
        steps += 1;
        let delta = model.delta_unchecked(&state, k);
        if !metropolis_accept(delta, temperature, rng) {
            continue;
        }
        state.flip(k);
        let inside = match membership.get(&state) {
            Some(&inside) => inside,
            None => {
                let inside = descend_zero_t(model, &state) == *lm;
                membership.insert(state.clone(), inside);
                inside
            }
        };
        let energy = model.energy_unchecked(&state);
        if !inside {
            return ChainOutcome {
                steps_to_escape: Some(steps),
                escape_energy: Some(energy),
                visited,
            };
        }
        visited.entry(state.clone()).or_insert(energy);
    }
    ChainOutcome {
        steps_to_escape: None,
        escape_energy: None,
        visited,
    }
}

fn check_minimum(model: &IsingModel, lm: &SpinConfiguration) -> Result<()> {
    model.check_dim(lm)?;
    if !is_local_minimum(model, lm) {
        return Err(Error::NotAMinimum(format!("{lm} has a strictly downhill neighbor")));
    }
    Ok(())
}

struct RungOutcome {
    rate: EscapeRate,
    visited: BTreeMap<SpinConfiguration, f64>,
    max_escape_energy: Option<f64>,
}

fn run_rung(
    model: &IsingModel,
    lm: &SpinConfiguration,
    temperature: f64,
    chains: usize,
    step_cap: u64,
    source: &RandomSource,
) -> RungOutcome {
    let outcomes: Vec<ChainOutcome> = (0..chains as u64)
        .into_par_iter()
        .map(|c| escape_chain(model, lm, temperature, step_cap, &mut source.child(c).rng()))
        .collect();
    let escapes: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.steps_to_escape.map(|s| s as f64))
        .collect();
    let (rate, std_error) = if escapes.is_empty() {
        (0.0, 0.0)
    } else {
        let m = mean(&escapes);
        // delta method for 1 / mean
        let se_mean = std_dev(&escapes) / (escapes.len() as f64).sqrt();
        (1.0 / m, se_mean / (m * m))
    };
    let mut visited = BTreeMap::new();
    let mut max_escape_energy: Option<f64> = None;
    for o in outcomes {
        if let Some(e) = o.escape_energy {
            max_escape_energy = Some(max_escape_energy.map_or(e, |m| m.max(e)));
        }
        visited.extend(o.visited);
    }
    RungOutcome {
        rate: EscapeRate {
            temperature,
            rate,
            std_error,
            chains,
            escaped: escapes.len(),
            capped_fraction: 1.0 - escapes.len() as f64 / chains as f64,
        },
        visited,
        max_escape_energy,
    }
}

/// Escape rate out of the valley of `lm` at a fixed temperature, from
/// `chains` independent chains capped at `step_cap` steps each.
pub fn estimate_escape_rate(
    model: &IsingModel,
    lm: &SpinConfiguration,
    temperature: f64,
    chains: usize,
    step_cap: u64,
    source: &RandomSource,
) -> Result<EscapeRate> {
    check_minimum(model, lm)?;
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "escape-rate temperature {temperature} must be > 0"
        )));
    }
    if chains == 0 || step_cap == 0 {
        return Err(Error::InvalidArgument("need at least one chain and one step".into()));
    }
    Ok(run_rung(model, lm, temperature, chains, step_cap, source).rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusFit {
    pub e_act: f64,
    /// Extrapolated `ln(rate)` at `1/T = 0`.
    pub intercept: f64,
    pub residual: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Least squares on `ln(rate)` against `1/T`; non-positive rates are
/// excluded and counted.
pub fn fit_arrhenius(points: &[(f64, f64)]) -> Result<ArrheniusFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *r > 0.0 && *t > 0.0 && r.is_finite() && t.is_finite())
        .map(|&(t, r)| (1.0 / t, r.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    let mut temps: Vec<f64> = usable.iter().map(|p| p.0).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "Arrhenius fit needs >= 3 positive rates at distinct temperatures ({} usable, {excluded} excluded)",
            temps.len()
        )));
    }
    let fit = least_squares(&usable).expect("distinct abscissae");
    Ok(ArrheniusFit {
        e_act: -fit.slope,
        intercept: fit.intercept,
        residual: fit.rms_residual,
        used: usable.len(),
        excluded,
    })
}

/// Warming protocol used by [`characterize_valley`].
#[derive(Debug, Clone, PartialEq)]
pub struct WarmingProtocol {
    /// Constant-temperature escape chains per rung.
    pub chains: usize,
    pub step_cap: u64,
    /// Geometric factor between rungs.
    pub ladder_factor: f64,
    /// First rung as a fraction of the energy scale.
    pub ladder_start: f64,
    pub max_rungs: usize,
    /// Consecutive quiet rungs (every chain escaped, no new state) that
    /// end the ladder.
    pub quiet_rungs: usize,
    /// The ladder keeps going until this many rungs qualify for the fit.
    pub min_fit_points: usize,
    /// Extra simulated-warming chains per rung (census only), each ramping
    /// from 0 to the rung temperature over `warm_sweeps` sweeps.
    pub warm_chains: usize,
    pub warm_sweeps: usize,
    /// Rungs with a larger capped fraction are left out of the fit.
    pub max_capped_fraction: f64,
    /// `N_low` threshold is `e_lm + n_low_multiplier * e_act`.
    pub n_low_multiplier: f64,
    /// DOS window as a fraction of `e_act`.
    pub dos_window_fraction: f64,
    /// Energy unit for the ladder; measured from the model when `None`.
    pub energy_scale: Option<f64>,
}

impl Default for WarmingProtocol {
    fn default() -> Self {
        Self {
            chains: 200,
            step_cap: 1_000_000,
            ladder_factor: 1.5,
            ladder_start: 0.1,
            max_rungs: 40,
            quiet_rungs: 2,
            min_fit_points: 4,
            warm_chains: 20,
            warm_sweeps: 200,
            max_capped_fraction: 0.1,
            n_low_multiplier: 1.0,
            dos_window_fraction: 0.1,
            energy_scale: None,
        }
    }
}

impl WarmingProtocol {
    pub fn validate(&self) -> Result<()> {
        let ok = self.chains >= 1
            && self.step_cap >= 1
            && self.ladder_factor > 1.0
            && self.ladder_start > 0.0
            && self.max_rungs >= 1
            && self.quiet_rungs >= 1
            && (self.warm_chains == 0 || self.warm_sweeps >= 1)
            && (0.0..=1.0).contains(&self.max_capped_fraction)
            && self.n_low_multiplier > 0.0
            && self.dos_window_fraction > 0.0
            && self.energy_scale.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid warming protocol: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusPoint {
    pub temperature: f64,
    pub rate: f64,
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RungSummary {
    pub rate: EscapeRate,
    pub new_states: usize,
    /// Cumulative distinct in-valley states after this rung.
    pub n_lv: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValleyRecord {
    pub lm: SpinConfiguration,
    pub e_lm: f64,
    /// Arrhenius barrier; `None` when the fit failed.
    pub e_act: Option<f64>,
    pub arrhenius_intercept: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Highest sampled energy (in-valley or at escape) above `e_lm`; a
    /// lower bound on the true value, never below `e_act`.
    pub e_max: f64,
    pub n_lv: usize,
    pub n_low: Option<usize>,
    pub n_up: Option<usize>,
    /// Square-well width `n_low / e_act`.
    pub width_w: Option<f64>,
    /// Width proxy from the Arrhenius prefactor, `exp(-intercept)`.
    pub width_intercept: Option<f64>,
    pub dos_bottom: Option<f64>,
    pub dos_window: Option<f64>,
    pub arrhenius: Vec<ArrheniusPoint>,
    pub rungs: Vec<RungSummary>,
    /// Energies of every distinct in-valley sampled state, ascending.
    pub sampled_energies: Vec<f64>,
    /// The minimum has a zero-energy-change neighbor (plateau).
    pub flat_neighbor: bool,
}

impl ValleyRecord {
    /// Re-derives `(n_low, n_up)` from the stored energies.
    pub fn split_counts(&self, e_act: f64, multiplier: f64) -> (usize, usize) {
        let threshold = self.e_lm + multiplier * e_act;
        let low = self.sampled_energies.iter().filter(|&&e| e < threshold).count();
        (low, self.sampled_energies.len() - low)
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.n_lv < 1 || self.n_lv != self.sampled_energies.len() {
            return Err(format!("n_lv {} vs {} stored energies", self.n_lv, self.sampled_energies.len()));
        }
        if let (Some(lo), Some(up)) = (self.n_low, self.n_up) {
            if lo + up != self.n_lv {
                return Err(format!("n_low {lo} + n_up {up} != n_lv {}", self.n_lv));
            }
        }
        if let Some(e_act) = self.e_act {
            if e_act < 0.0 {
                return Err(format!("negative e_act {e_act}"));
            }
            if self.e_max < e_act {
                return Err(format!("e_max {} < e_act {e_act}", self.e_max));
            }
            if let (Some(w), Some(lo)) = (self.width_w, self.n_low) {
                if e_act > 0.0 && (w - lo as f64 / e_act).abs() > 1e-9 * w.abs().max(1.0) {
                    return Err(format!("width {w} != n_low / e_act"));
                }
            }
        }
        if self.rungs.windows(2).any(|w| w[1].n_lv < w[0].n_lv) {
            return Err("n_lv decreased across rungs".into());
        }
        Ok(())
    }
}

/// Smallest positive gap between distinct energies in an ascending list.
fn smallest_gap(sorted: &[f64]) -> Option<f64> {
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
}

/// Fits on all usable rungs, then narrows to the activated regime
/// (`T <= e_act`) while at least three points remain there.
fn fit_activated(points: &[(f64, f64)]) -> Option<ArrheniusFit> {
    let mut fit = fit_arrhenius(points).ok()?;
    for _ in 0..4 {
        let narrowed: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|&(t, r)| r > 0.0 && t <= fit.e_act)
            .collect();
        if narrowed.len() == fit.used {
            break;
        }
        match fit_arrhenius(&narrowed) {
            Ok(f) => fit = f,
            Err(_) => break,
        }
    }
    (fit.e_act > 0.0).then_some(fit)
}

/// Census and kinetics of one valley over an increasing temperature ladder.
///
/// Each rung runs constant-temperature escape chains (which also collect
/// in-valley states) plus optional warming chains. The ladder stops once
/// `quiet_rungs` consecutive rungs saw every chain escape without a new
/// in-valley state, provided enough rungs qualify for the fit.
pub fn characterize_valley(
    model: &IsingModel,
    lm: &SpinConfiguration,
    protocol: &WarmingProtocol,
    source: &RandomSource,
) -> Result<ValleyRecord> {
    check_minimum(model, lm)?;
    protocol.validate()?;
    let scale = match protocol.energy_scale {
        Some(s) => s,
        None => model.energy_scale(4096, &mut source.labeled("scale").rng()),
    };
    let e_lm = model.energy_unchecked(lm);
    let mut census: BTreeMap<SpinConfiguration, f64> = BTreeMap::from([(lm.clone(), e_lm)]);
    let mut max_energy = e_lm;
    let mut rungs = Vec::new();
    let mut temperature = protocol.ladder_start * scale;
    let mut quiet = 0;
    let mut fit_points = 0;

    for rung in 0..protocol.max_rungs {
        let rung_source = source.child(rung as u64);
        let outcome = run_rung(
            model,
            lm,
            temperature,
            protocol.chains,
            protocol.step_cap,
            &rung_source.labeled("escape"),
        );
        let mut visited = outcome.visited;
        if protocol.warm_chains > 0 {
            let schedule = Schedule::linear_warming(0.0, temperature, protocol.warm_sweeps)?;
            let warm_source = rung_source.labeled("warm");
            let warm: Vec<_> = (0..protocol.warm_chains as u64)
                .into_par_iter()
                .map(|c| simulated_warm(model, lm, &schedule, &warm_source.child(c), 1))
                .collect::<Result<_>>()?;
            for w in warm {
                for s in w.samples {
                    if s.in_valley {
                        visited.insert(s.state, s.energy);
                    } else {
                        max_energy = max_energy.max(s.energy);
                    }
                }
            }
        }
        if let Some(e) = outcome.max_escape_energy {
            max_energy = max_energy.max(e);
        }
        let before = census.len();
        census.extend(visited);
        let new_states = census.len() - before;
        rungs.push(RungSummary {
            rate: outcome.rate,
            new_states,
            n_lv: census.len(),
        });
        if outcome.rate.rate > 0.0 && outcome.rate.capped_fraction <= protocol.max_capped_fraction {
            fit_points += 1;
        }
        if new_states == 0 && outcome.rate.escaped == protocol.chains {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= protocol.quiet_rungs && fit_points >= protocol.min_fit_points {
            break;
        }
        temperature *= protocol.ladder_factor;
    }

    let mut sampled_energies: Vec<f64> = census.values().copied().collect();
    sampled_energies.sort_by(f64::total_cmp);
    max_energy = max_energy.max(*sampled_energies.last().expect("census holds lm"));

    let arrhenius: Vec<ArrheniusPoint> = rungs
        .iter()
        .filter(|r| r.rate.rate > 0.0 && r.rate.capped_fraction <= protocol.max_capped_fraction)
        .map(|r| ArrheniusPoint {
            temperature: r.rate.temperature,
            rate: r.rate.rate,
            chains: r.rate.chains,
        })
        .collect();
    let points: Vec<(f64, f64)> = arrhenius.iter().map(|p| (p.temperature, p.rate)).collect();
    let fit = fit_activated(&points);

    let n_lv = census.len();
    let flat_neighbor = (0..model.n()).any(|k| model.delta_unchecked(lm, k) == 0.0);
    let mut record = ValleyRecord {
        lm: lm.clone(),
        e_lm,
        e_act: fit.map(|f| f.e_act),
        arrhenius_intercept: fit.map(|f| f.intercept),
        fit_residual: fit.map(|f| f.residual),
        e_max: max_energy - e_lm,
        n_lv,
        n_low: None,
        n_up: None,
        width_w: None,
        width_intercept: fit.map(|f| (-f.intercept).exp()),
        dos_bottom: None,
        dos_window: None,
        arrhenius,
        rungs,
        sampled_energies,
        flat_neighbor,
    };
    if let Some(e_act) = record.e_act {
        record.e_max = record.e_max.max(e_act);
        let (low, up) = record.split_counts(e_act, protocol.n_low_multiplier);
        record.n_low = Some(low);
        record.n_up = Some(up);
        record.width_w = Some(low as f64 / e_act);
        let window = match smallest_gap(&record.sampled_energies) {
            Some(gap) => (protocol.dos_window_fraction * e_act).max(gap),
            None => protocol.dos_window_fraction * e_act,
        };
        let bottom = record
            .sampled_energies
            .iter()
            .filter(|&&e| e <= e_lm + window)
            .count();
        record.dos_window = Some(window);
        record.dos_bottom = Some(bottom as f64 / window);
    }
    Ok(record)
}

/// Discovery tag: which sampler found a valley and, for campaigns, in
/// which cycle it was first found.
pub type Discovery = BTreeMap<String, Option<u64>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegistryEntry {
    pub discovered_by: Discovery,
    pub record: Option<ValleyRecord>,
}

/// Valleys keyed by canonical minimum, with per-sampler provenance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValleyRegistry {
    n: usize,
    samplers: BTreeSet<String>,
    entries: BTreeMap<SpinConfiguration, RegistryEntry>,
}

impl ValleyRegistry {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn register_sampler(&mut self, name: &str) -> Result<()> {
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ';' || c == '@' || c == ',') {
            return Err(Error::InvalidArgument(format!("invalid sampler name {name:?}")));
        }
        self.samplers.insert(name.to_string());
        Ok(())
    }

    pub fn samplers(&self) -> &BTreeSet<String> {
        &self.samplers
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<SpinConfiguration, RegistryEntry> {
        &self.entries
    }

    pub fn get(&self, lm: &SpinConfiguration) -> Option<&RegistryEntry> {
        self.entries.get(lm)
    }

    pub fn keys(&self) -> impl Iterator<Item = &SpinConfiguration> {
        self.entries.keys()
    }

    /// Tags `lm` (which must already be a minimum) as found by `sampler`,
    /// keeping the earliest cycle stamp.
    pub fn tag_minimum(&mut self, model: &IsingModel, lm: &SpinConfiguration, sampler: &str, cycle: Option<u64>) -> Result<()> {
        if !self.samplers.contains(sampler) {
            return Err(Error::UnknownSampler(sampler.to_string()));
        }
        check_minimum(model, lm)?;
        self.tag_unchecked(lm.clone(), sampler, cycle);
        Ok(())
    }

    fn tag_unchecked(&mut self, lm: SpinConfiguration, sampler: &str, cycle: Option<u64>) {
        let entry = self.entries.entry(lm).or_default();
        entry
            .discovered_by
            .entry(sampler.to_string())
            .and_modify(|c| {
                *c = match (*c, cycle) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            })
            .or_insert(cycle);
    }

    /// Descends every distinct read and tags the resulting minimum with
    /// the sample's sampler name.
    pub fn register_sample(&mut self, sample: &SampleSet, model: &IsingModel) -> Result<()> {
        if model.n() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: model.n(),
            });
        }
        if sample.n() != self.n && !sample.reads().is_empty() {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: sample.n(),
            });
        }
        self.register_sampler(&sample.sampler_name)?;
        let minima: Vec<SpinConfiguration> = sample
            .reads()
            .par_iter()
            .map(|(s, _)| descend_zero_t(model, s))
            .collect();
        for lm in minima {
            self.tag_unchecked(lm, &sample.sampler_name, None);
        }
        Ok(())
    }

    /// Registers the minima of an annealing campaign with their
    /// first-discovery cycle.
    pub fn register_campaign(&mut self, name: &str, campaign: &CampaignResult) -> Result<()> {
        self.register_sampler(name)?;
        for (lm, &cycle) in &campaign.minima {
            if lm.len() != self.n {
                return Err(Error::SizeMismatch {
                    expected: self.n,
                    actual: lm.len(),
                });
            }
            self.tag_unchecked(lm.clone(), name, Some(cycle));
        }
        Ok(())
    }

    pub fn set_record(&mut self, record: ValleyRecord) -> Result<()> {
        let entry = self
            .entries
            .get_mut(&record.lm)
            .ok_or_else(|| Error::InvalidArgument(format!("{} is not in the registry", record.lm)))?;
        entry.record = Some(record);
        Ok(())
    }

    /// Characterizes every registered valley. Each valley draws from a
    /// stream derived from its own key, so adding valleys never changes
    /// another valley's record.
    pub fn characterize_all(&mut self, model: &IsingModel, protocol: &WarmingProtocol, source: &RandomSource) -> Result<()> {
        let keys: Vec<SpinConfiguration> = self.entries.keys().cloned().collect();
        let records: Vec<ValleyRecord> = keys
            .par_iter()
            .map(|lm| characterize_valley(model, lm, protocol, &source.labeled(&lm.to_string())))
            .collect::<Result<_>>()?;
        for r in records {
            self.set_record(r)?;
        }
        Ok(())
    }

    /// `# registry n=<N>`, one `sampler <name>` line per sampler, then one
    /// `valley <lm> <tag>[@cycle];...` line per valley.
    pub fn to_text(&self) -> String {
        let mut out = format!("# registry n={}\n", self.n);
        for s in &self.samplers {
            let _ = writeln!(out, "sampler {s}");
        }
        for (lm, entry) in &self.entries {
            let _ = writeln!(out, "valley {lm} {}", format_tags(&entry.discovered_by, true));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 0, "empty registry file"))?;
        let n = crate::ising::parse_header_n(header.trim(), "registry")
            .ok_or_else(|| Error::parse(origin, 1, "expected `# registry n=<N>`"))?;
        let mut reg = ValleyRegistry::new(n);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                [t, ..] if t.starts_with('#') => {}
                ["sampler", name] => reg
                    .register_sampler(name)
                    .map_err(|e| Error::parse(origin, line_no, e.to_string()))?,
                ["valley", lm, tags] => {
                    let lm: SpinConfiguration = lm
                        .parse()
                        .map_err(|e: Error| Error::parse(origin, line_no, e.to_string()))?;
                    if lm.len() != n {
                        return Err(Error::parse(origin, line_no, format!("expected {n} spins, found {}", lm.len())));
                    }
                    let tags = parse_tags(tags).map_err(|m| Error::parse(origin, line_no, m))?;
                    for (name, cycle) in tags {
                        if !reg.samplers.contains(&name) {
                            return Err(Error::parse(origin, line_no, format!("unregistered sampler `{name}`")));
                        }
                        reg.tag_unchecked(lm.clone(), &name, cycle);
                    }
                }
                _ => return Err(Error::parse(origin, line_no, "expected `sampler <name>` or `valley <lm> <tags>`")),
            }
        }
        Ok(reg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Attaches records read back from a valley report.
    pub fn attach_records(&mut self, records: Vec<ValleyRecord>) -> Result<()> {
        for r in records {
            self.set_record(r)?;
        }
        Ok(())
    }
}

fn format_tags(tags: &Discovery, with_cycles: bool) -> String {
    tags.iter()
        .map(|(name, cycle)| match (with_cycles, cycle) {
            (true, Some(c)) => format!("{name}@{c}"),
            _ => name.clone(),
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_tags(text: &str) -> std::result::Result<Vec<(String, Option<u64>)>, String> {
    text.split(';')
        .map(|tag| match tag.split_once('@') {
            Some((name, c)) => c
                .parse()
                .map(|c| (name.to_string(), Some(c)))
                .map_err(|_| format!("bad cycle in tag `{tag}`")),
            None if !tag.is_empty() => Ok((tag.to_string(), None)),
            None => Err("empty tag".to_string()),
        })
        .collect()
}

pub const VALLEY_CSV_HEADER: &str =
    "lm,e_lm,e_act,e_max,n_lv,n_low,n_up,width_w,dos_bottom,discovered_by,arrhenius_points,fit_residual";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One report row per characterized valley, in key order.
pub fn valley_report_csv(registry: &ValleyRegistry) -> String {
    let mut out = format!("{VALLEY_CSV_HEADER}\n");
    for (lm, entry) in registry.entries() {
        let Some(r) = &entry.record else { continue };
        let _ = writeln!(
            out,
            "{lm},{},{},{},{},{},{},{},{},{},{},{}",
            r.e_lm,
            opt(r.e_act),
            r.e_max,
            r.n_lv,
            opt(r.n_low),
            opt(r.n_up),
            opt(r.width_w),
            opt(r.dos_bottom),
            format_tags(&entry.discovered_by, false),
            r.arrhenius.len(),
            opt(r.fit_residual),
        );
    }
    out
}

/// Reads report rows back into (partial) records: the scalar columns are
/// restored, the per-rung detail and sampled energies are not.
pub fn parse_valley_report(text: &str, origin: &str) -> Result<Vec<ValleyRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == VALLEY_CSV_HEADER => {}
        _ => return Err(Error::parse(origin, 1, "unexpected valley report header")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::parse(origin, line_no, format!("expected 12 columns, found {}", cols.len())));
        }
        let bad = |what: &str| Error::parse(origin, line_no, format!("bad {what}"));
        let f = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        let of = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                f(s, what).map(Some)
            }
        };
        let ou = |s: &str, what: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        let lm: SpinConfiguration = cols[0].parse().map_err(|_| bad("lm"))?;
        let n_lv: usize = cols[4].parse().map_err(|_| bad("n_lv"))?;
        out.push(ValleyRecord {
            lm,
            e_lm: f(cols[1], "e_lm")?,
            e_act: of(cols[2], "e_act")?,
            arrhenius_intercept: None,
            fit_residual: of(cols[11], "fit_residual")?,
            e_max: f(cols[3], "e_max")?,
            n_lv,
            n_low: ou(cols[5], "n_low")?,
            n_up: ou(cols[6], "n_up")?,
            width_w: of(cols[7], "width_w")?,
            width_intercept: None,
            dos_bottom: of(cols[8], "dos_bottom")?,
            dos_window: None,
            arrhenius: Vec::new(),
            rungs: Vec::new(),
            sampled_energies: Vec::new(),
            flat_neighbor: false,
        });
    }
    Ok(out)
}
