//! Samplers that produce [`SampleSet`]s: classical annealing, a
//! simulated-quantum-annealing surrogate, and ingestion of external reads.
//!
//! The quantum surrogate is path-integral Monte Carlo over Trotter slices.
//! It stands in for annealer hardware and makes no claim of fidelity to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::ising::{parse_header, IsingModel, SpinConfiguration};
use crate::mc::{metropolis_accept, metropolis_chain, Schedule};
use crate::{Error, RandomSource, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleMetadata {
    pub read_budget: u64,
    /// Free-form provenance such as a config digest.
    pub fields: BTreeMap<String, String>,
}

/// Distinct reads of one sampler with their occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub sampler_name: String,
    n: usize,
    reads: BTreeMap<SpinConfiguration, u64>,
    pub metadata: SampleMetadata,
}

impl SampleSet {
    pub fn new(sampler_name: &str, n: usize, metadata: SampleMetadata) -> Self {
        Self {
            sampler_name: sampler_name.to_string(),
            n,
            reads: BTreeMap::new(),
            metadata,
        }
    }

    /// Aggregates single reads; the dimension is taken from the first one
    /// and the read budget is set to the number of reads.
    pub fn from_reads(
        sampler_name: &str,
        reads: impl IntoIterator<Item = SpinConfiguration>,
        metadata: SampleMetadata,
    ) -> Result<Self> {
        let mut set: Option<Self> = None;
        for s in reads {
            let set = set.get_or_insert_with(|| Self::new(sampler_name, s.len(), metadata.clone()));
            set.add(s, 1)?;
        }
        let mut set = set.unwrap_or_else(|| Self::new(sampler_name, 0, metadata));
        set.metadata.read_budget = set.total_reads();
        Ok(set)
    }

    pub fn add(&mut self, state: SpinConfiguration, count: u64) -> Result<()> {
        if state.len() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                actual: state.len(),
            });
        }
        if count == 0 {
            return Err(Error::InvalidArgument("occurrence counts must be >= 1".into()));
        }
        *self.reads.entry(state).or_insert(0) += count;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reads(&self) -> &BTreeMap<SpinConfiguration, u64> {
        &self.reads
    }

    pub fn distinct(&self) -> usize {
        self.reads.len()
    }

    pub fn total_reads(&self) -> u64 {
        self.reads.values().sum()
    }

    pub fn is_complete(&self) -> bool {
        self.total_reads() == self.metadata.read_budget
    }

    /// Most frequent read, lowest state on ties.
    pub fn modal_read(&self) -> Option<&SpinConfiguration> {
        self.reads
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(s, _)| s)
    }
}

/// Tabulated anneal functions `A(s)` (driver) and `B(s)` (problem) over
/// `s` in `[0, 1]`, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealFunctions {
    s: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Default for AnnealFunctions {
    /// `A` linear from 10 to 0.01, `B` linear from 0.01 to 10.
    fn default() -> Self {
        Self::linear(10.0, 0.01, 0.01, 10.0).expect("valid default anneal")
    }
}

impl AnnealFunctions {
    pub fn tabulated(s: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let f = Self { s, a, b };
        f.validate()?;
        Ok(f)
    }

    pub fn linear(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self> {
        Self::tabulated(vec![0.0, 1.0], vec![a0, a1], vec![b0, b1])
    }

    /// No driver term and a constant problem weight.
    pub fn classical(b: f64) -> Result<Self> {
        Self::linear(0.0, 0.0, b, b)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("anneal functions: {m}")));
        let len = self.s.len();
        if len < 2 || self.a.len() != len || self.b.len() != len {
            return bad("need >= 2 grid points and equal-length tables");
        }
        if self.s[0] != 0.0 || self.s[len - 1] != 1.0 || self.s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("grid must increase strictly from 0 to 1");
        }
        if self.a.iter().chain(&self.b).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("values must be finite and non-negative");
        }
        if self.a.windows(2).any(|w| w[1] > w[0]) {
            return bad("A must be non-increasing");
        }
        if self.b.windows(2).any(|w| w[1] < w[0]) {
            return bad("B must be non-decreasing");
        }
        Ok(())
    }

    /// Whether `A(0)/B(0) >= ratio` and `B(1)/A(1) >= ratio`.
    pub fn has_ratio_bounds(&self, ratio: f64) -> bool {
        let last = self.s.len() - 1;
        self.a[0] >= ratio * self.b[0] && self.b[last] >= ratio * self.a[last]
    }

    fn interpolate(&self, table: &[f64], s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let k = self.s.partition_point(|&x| x <= s).clamp(1, self.s.len() - 1);
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let t = (s - s0) / (s1 - s0);
        table[k - 1] + (table[k] - table[k - 1]) * t
    }

    pub fn a(&self, s: f64) -> f64 {
        self.interpolate(&self.a, s)
    }

    pub fn b(&self, s: f64) -> f64 {
        self.interpolate(&self.b, s)
    }

    pub fn grid(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.s, &self.a, &self.b)
    }
}

/// `reads` independent Metropolis chains along `schedule`; each read is
/// the final state of its chain.
pub fn sample_sa(model: &IsingModel, reads: u64, schedule: &Schedule, source: &RandomSource) -> Result<SampleSet> {
    if reads == 0 {
        return Err(Error::InvalidArgument("need at least one read".into()));
    }
    schedule.validate()?;
    let finals: Vec<SpinConfiguration> = (0..reads)
        .into_par_iter()
        .map(|r| metropolis_chain(model, schedule, &source.child(r)).map(|c| c.final_state))
        .collect::<Result<_>>()?;
    let mut set = SampleSet::from_reads("sa", finals, SampleMetadata::default())?;
    set.n = model.n();
    set.metadata.read_budget = reads;
    set.metadata
        .fields
        .insert("schedule".into(), format!("{schedule:?}").replace(char::is_whitespace, ""));
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqaParams {
    pub trotter_slices: usize,
    pub sweeps: usize,
    pub base_temperature: f64,
    /// Energy unit of the driver term: the driver enters as
    /// `driver_scale * A(s)`.
    pub driver_scale: f64,
    /// Floor for `A(s)` inside the slice coupling, where `ln tanh` would
    /// otherwise diverge.
    pub epsilon: f64,
    /// Slice reported as the read.
    pub read_slice: usize,
}

impl SqaParams {
    /// 32 slices, 1000 sweeps, base temperature `0.1 * energy_scale`.
    pub fn defaults_for(energy_scale: f64) -> Self {
        Self {
            trotter_slices: 32,
            sweeps: 1000,
            base_temperature: 0.1 * energy_scale,
            driver_scale: energy_scale,
            epsilon: 1e-9,
            read_slice: 0,
        }
    }
}

/// Coupling between neighbouring slices, `-(T P / 2) ln tanh(A / (T P))`.
pub fn slice_coupling(a: f64, temperature: f64, slices: usize) -> f64 {
    let tp = temperature * slices as f64;
    -(tp / 2.0) * (a / tp).tanh().ln()
}

struct Replicas {
    slices: Vec<SpinConfiguration>,
}

impl Replicas {
    fn local_delta(&self, model: &IsingModel, k: usize, i: usize, b: f64, j_perp: f64) -> f64 {
        let p = self.slices.len();
        let s = &self.slices[k];
        let up = self.slices[(k + 1) % p].get(i) as f64;
        let down = self.slices[(k + p - 1) % p].get(i) as f64;
        b * model.delta_unchecked(s, i) + 2.0 * j_perp * s.get(i) as f64 * (up + down)
    }

    fn global_delta(&self, model: &IsingModel, i: usize, b: f64) -> f64 {
        b * self.slices.iter().map(|s| model.delta_unchecked(s, i)).sum::<f64>()
    }
}

fn sqa_read<R: Rng>(model: &IsingModel, anneal: &AnnealFunctions, params: &SqaParams, rng: &mut R) -> (SpinConfiguration, u64) {
    let n = model.n();
    let p = params.trotter_slices;
    let tp = params.base_temperature * p as f64;
    let mut replicas = Replicas {
        slices: (0..p).map(|_| SpinConfiguration::random(n, rng)).collect(),
    };
    let mut clamped = 0u64;
    for sweep in 0..params.sweeps {
        let s = if params.sweeps == 1 { 1.0 } else { sweep as f64 / (params.sweeps - 1) as f64 };
        let mut a = params.driver_scale * anneal.a(s);
        if a < params.epsilon {
            a = params.epsilon;
            clamped += 1;
        }
        let b = anneal.b(s);
        let j_perp = slice_coupling(a, params.base_temperature, p);
        for k in 0..p {
            for i in 0..n {
                let delta = replicas.local_delta(model, k, i, b, j_perp);
                if metropolis_accept(delta, tp, rng) {
                    replicas.slices[k].flip(i);
                }
            }
        }
        for i in 0..n {
            let delta = replicas.global_delta(model, i, b);
            if metropolis_accept(delta, tp, rng) {
                for slice in &mut replicas.slices {
                    slice.flip(i);
                }
            }
        }
    }
    (replicas.slices.swap_remove(params.read_slice), clamped)
}

/// Simulated quantum annealing surrogate. Each read runs path-integral
/// Monte Carlo on `trotter_slices` replicas at temperature `P * T` while
/// `s` sweeps from 0 to 1: single-spin moves within a slice, then a
/// whole-column flip of each spin across all slices.
pub fn sample_sqa(
    model: &IsingModel,
    reads: u64,
    anneal: &AnnealFunctions,
    params: &SqaParams,
    source: &RandomSource,
) -> Result<SampleSet> {
    anneal.validate()?;
    if reads == 0 {
        return Err(Error::InvalidArgument("need at least one read".into()));
    }
    if params.trotter_slices < 2 || params.sweeps == 0 || params.read_slice >= params.trotter_slices {
        return Err(Error::InvalidArgument(format!(
            "SQA needs >= 2 slices, >= 1 sweep and a valid read slice (got {params:?})"
        )));
    }
    if !(params.base_temperature > 0.0 && params.epsilon > 0.0 && params.driver_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "SQA base temperature, driver scale and epsilon must be > 0".into(),
        ));
    }
    let results: Vec<(SpinConfiguration, u64)> = (0..reads)
        .into_par_iter()
        .map(|r| sqa_read(model, anneal, params, &mut source.child(r).rng()))
        .collect();
    let clamped = results.first().map_or(0, |r| r.1);
    let mut set = SampleSet::from_reads("sqa", results.into_iter().map(|r| r.0), SampleMetadata::default())?;
    set.n = model.n();
    set.metadata.read_budget = reads;
    let fields = &mut set.metadata.fields;
    fields.insert("trotter_slices".into(), params.trotter_slices.to_string());
    fields.insert("sweeps".into(), params.sweeps.to_string());
    fields.insert("base_temperature".into(), params.base_temperature.to_string());
    fields.insert("epsilon".into(), params.epsilon.to_string());
    fields.insert("clamped_sweeps".into(), clamped.to_string());
    Ok(set)
}

/// `# sample sampler=<name> n=<N> format=pm1`, an optional `# meta ...`
/// line, then one read per line: `N` tokens in `{+1,-1}` and a count.
pub fn reads_to_text(set: &SampleSet) -> String {
    let mut out = format!("# sample sampler={} n={} format=pm1\n", set.sampler_name, set.n);
    let _ = write!(out, "# meta read_budget={}", set.metadata.read_budget);
    for (k, v) in &set.metadata.fields {
        let _ = write!(out, " {k}={}", v.replace(char::is_whitespace, "_"));
    }
    out.push('\n');
    for (state, count) in &set.reads {
        let tokens: Vec<&str> = state.spins().iter().map(|&x| if x > 0 { "+1" } else { "-1" }).collect();
        let _ = writeln!(out, "{} {count}", tokens.join(" "));
    }
    out
}

pub fn write_reads(set: &SampleSet, path: &Path) -> Result<()> {
    std::fs::write(path, reads_to_text(set)).map_err(|e| Error::io(path, e))
}

pub fn parse_reads(text: &str, origin: &str, expected_n: usize) -> Result<SampleSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::parse(origin, 0, "empty sample file"))?;
    let fields = parse_header(header.1, "sample")
        .ok_or_else(|| Error::parse(origin, header.0, "expected `# sample sampler=<name> n=<N> format=pm1`"))?;
    let name = fields
        .get("sampler")
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::parse(origin, header.0, "missing sampler name"))?;
    let n: usize = fields
        .get("n")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(origin, header.0, "missing or bad n"))?;
    if fields.get("format").map(String::as_str) != Some("pm1") {
        return Err(Error::parse(origin, header.0, "only format=pm1 is supported"));
    }
    if n != expected_n {
        return Err(Error::parse(origin, header.0, format!("file declares n={n}, model has {expected_n} spins")));
    }
    let mut set = SampleSet::new(name, n, SampleMetadata::default());
    let mut budget = None;
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = parse_header(line, "meta") {
            for (k, v) in meta {
                if k == "read_budget" {
                    budget = Some(v.parse().map_err(|_| Error::parse(origin, line_no, "bad read_budget"))?);
                } else {
                    set.metadata.fields.insert(k, v);
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n + 1 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {n} spins and a count, found {} tokens", tokens.len()),
            ));
        }
        let spins = tokens[..n]
            .iter()
            .map(|t| match *t {
                "+1" => Ok(1),
                "-1" => Ok(-1),
                other => Err(Error::parse(origin, line_no, format!("bad spin token `{other}`"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        let count: u64 = tokens[n]
            .parse()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| Error::parse(origin, line_no, format!("bad count `{}`", tokens[n])))?;
        set.add(SpinConfiguration::new(spins)?, count)?;
    }
    if set.reads.is_empty() {
        return Err(Error::parse(origin, 0, "sample file has no reads"));
    }
    set.metadata.read_budget = budget.unwrap_or_else(|| set.total_reads());
    Ok(set)
}

pub fn ingest_reads(path: &Path, expected_n: usize) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reads(&text, &path.display().to_string(), expected_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::enumerate_landscape;
    use crate::stats::total_variation;
    use std::collections::HashMap;

    fn ferromagnet() -> IsingModel {
        IsingModel::new(2, [(0, 1, 1.0)], vec![0.0; 2]).unwrap()
    }

    #[test]
    fn single_read() {
        let sched = Schedule::linear_cooling(2.0, 0.0, 50).unwrap();
        let s = sample_sa(&ferromagnet(), 1, &sched, &RandomSource::from_seed(1)).unwrap();
        assert_eq!(s.distinct(), 1);
        assert_eq!(s.total_reads(), 1);
        assert!(s.is_complete());
    }

    #[test]
    fn sa_finds_both_ferromagnet_ground_states() {
        let sched = Schedule::linear_cooling(3.0, 0.0, 200).unwrap();
        let s = sample_sa(&ferromagnet(), 1000, &sched, &RandomSource::from_seed(2)).unwrap();
        assert_eq!(s.total_reads(), 1000);
        let up = s.reads()[&"++".parse().unwrap()];
        let down = s.reads()[&"--".parse().unwrap()];
        assert_eq!(up + down, 1000);
        assert!((400..=600).contains(&up), "{up}");
        assert_eq!(s, sample_sa(&ferromagnet(), 1000, &sched, &RandomSource::from_seed(2)).unwrap());
    }

    #[test]
    fn anneal_function_validation() {
        let d = AnnealFunctions::default();
        assert!(d.has_ratio_bounds(100.0));
        assert_eq!(d.a(0.0), 10.0);
        assert_eq!(d.b(1.0), 10.0);
        assert!((d.a(0.5) - 5.005).abs() < 1e-12);
        assert!(AnnealFunctions::linear(1.0, 2.0, 0.0, 1.0).is_err());
        assert!(AnnealFunctions::linear(1.0, 0.0, 1.0, 0.5).is_err());
        assert!(AnnealFunctions::tabulated(vec![0.0, 0.5], vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(AnnealFunctions::linear(-1.0, -2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn slice_coupling_grows_as_driver_vanishes() {
        assert!(slice_coupling(10.0, 0.1, 32) < slice_coupling(0.01, 0.1, 32));
        assert!(slice_coupling(1e-9, 0.1, 32).is_finite());
    }

    #[test]
    fn classical_limit_matches_boltzmann() {
        // slices lock together, so column moves do Metropolis at T / B
        let m = IsingModel::new(3, [(0, 1, 1.0), (1, 2, -0.5)], vec![0.25, 0.0, -0.5]).unwrap();
        let t = 1.0;
        let params = SqaParams {
            trotter_slices: 4,
            sweeps: 60,
            base_temperature: t,
            driver_scale: 1.0,
            epsilon: 1e-9,
            read_slice: 0,
        };
        let set = sample_sqa(&m, 20_000, &AnnealFunctions::classical(1.0).unwrap(), &params, &RandomSource::from_seed(6)).unwrap();
        let observed: HashMap<SpinConfiguration, u64> = set.reads().clone().into_iter().collect();
        let landscape = enumerate_landscape(&m).unwrap();
        let z: f64 = landscape.energies().iter().map(|e| (-e / t).exp()).sum();
        // expected counts scaled to a large integer table
        let exact: HashMap<SpinConfiguration, u64> = (0..8u64)
            .map(|i| {
                let p = (-landscape.energy_of(i) / t).exp() / z;
                (SpinConfiguration::from_index(3, i), (p * 1e9).round() as u64)
            })
            .collect();
        assert!(total_variation(&observed, &exact) < 0.03);
    }

    #[test]
    fn sqa_single_spin_prefers_field() {
        let m = IsingModel::new(1, [], vec![1.0]).unwrap();
        let params = SqaParams {
            sweeps: 100,
            ..SqaParams::defaults_for(1.0)
        };
        let set = sample_sqa(&m, 2000, &AnnealFunctions::default(), &params, &RandomSource::from_seed(3)).unwrap();
        let up = set.reads().get(&"+".parse().unwrap()).copied().unwrap_or(0);
        assert!(up as f64 / 2000.0 >= 0.9, "{up}");
        assert_eq!(set.total_reads(), 2000);
    }

    #[test]
    fn sqa_ferromagnet_concentrates_on_ground_states() {
        let params = SqaParams {
            sweeps: 100,
            ..SqaParams::defaults_for(2.0)
        };
        let set = sample_sqa(&ferromagnet(), 2000, &AnnealFunctions::default(), &params, &RandomSource::from_seed(4)).unwrap();
        let ground: u64 = ["++", "--"]
            .iter()
            .map(|s| set.reads().get(&s.parse().unwrap()).copied().unwrap_or(0))
            .sum();
        assert!(ground as f64 / 2000.0 >= 0.95, "{ground}");
    }

    #[test]
    fn sqa_rejects_bad_params() {
        let mut params = SqaParams::defaults_for(1.0);
        params.trotter_slices = 1;
        let r = sample_sqa(&ferromagnet(), 10, &AnnealFunctions::default(), &params, &RandomSource::from_seed(1));
        assert!(r.is_err());
    }

    #[test]
    fn duplicate_lines_aggregate() {
        let text = "# sample sampler=qa n=2 format=pm1\n+1 -1 1\n+1 -1 1\n";
        let s = parse_reads(text, "mem", 2).unwrap();
        assert_eq!(s.distinct(), 1);
        assert_eq!(s.reads()[&"+-".parse().unwrap()], 2);
        assert_eq!(s.sampler_name, "qa");
    }

    #[test]
    fn malformed_files_report_lines() {
        let mut text = String::from("# sample sampler=qa n=4 format=pm1\n+1 +1 +1 +1 2\n");
        text.push_str("+1 +1 +1 1\n");
        match parse_reads(&text, "mem", 4) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_reads("", "mem", 4).is_err());
        assert!(parse_reads("# sample sampler=qa n=4 format=pm1\n", "mem", 4).is_err());
        assert!(parse_reads("# sample sampler=qa n=4 format=pm1\n+1 +1 +1 +1 1\n", "mem", 5).is_err());
        assert!(parse_reads("# sample sampler=qa n=1 format=pm1\n+1 0\n", "mem", 1).is_err());
        assert!(parse_reads("# sample sampler=qa n=1 format=pm1\n1 3\n", "mem", 1).is_err());
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let sched = Schedule::linear_cooling(2.0, 0.0, 20).unwrap();
        let mut rng = RandomSource::from_seed(9).rng();
        let m = IsingModel::random_dyadic(6, 0.5, &mut rng);
        let s = sample_sa(&m, 300, &sched, &RandomSource::from_seed(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reads.txt");
        write_reads(&s, &path).unwrap();
        assert_eq!(ingest_reads(&path, 6).unwrap(), s);
    }
}
