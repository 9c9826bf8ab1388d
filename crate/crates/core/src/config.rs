//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! seed = 7
//! model.source = file
//! model.path = model.txt
//! samplers = sqa
//! sampler.sqa.kind = sqa
//! sampler.sqa.reads = 10000
//! ```
//!
//! Unknown keys are rejected by name, and [`RunConfig::to_text`] writes
//! every key so a parsed config serializes back to the same value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::compare::{BucketParameter, Parameter};
use crate::valley::WarmingProtocol;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSource {
    /// Ising model text file at `model.path`.
    File,
    /// RBM snapshot produced by the train stage, converted to Ising.
    Rbm,
    /// The bundled demo instance.
    Demo,
    /// Random dyadic instance drawn from the global seed.
    Random,
}

impl ModelSource {
    fn name(self) -> &'static str {
        match self {
            ModelSource::File => "file",
            ModelSource::Rbm => "rbm",
            ModelSource::Demo => "demo",
            ModelSource::Random => "random",
        }
    }
}

impl FromStr for ModelSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "file" => Ok(ModelSource::File),
            "rbm" => Ok(ModelSource::Rbm),
            "demo" => Ok(ModelSource::Demo),
            "random" => Ok(ModelSource::Random),
            _ => Err("expected file, rbm, demo or random".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub source: ModelSource,
    pub path: Option<PathBuf>,
    pub random_n: usize,
    pub random_bias_scale: f64,
    /// Which trained snapshot the `rbm` source analyzes.
    pub rbm_snapshot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmConfig {
    /// Pattern file, or synthetic patterns when `None`.
    pub dataset: Option<PathBuf>,
    pub n_visible: usize,
    pub n_hidden: usize,
    pub epochs: usize,
    pub snapshot_epochs: Vec<usize>,
    pub cd_k: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub synthetic_patterns: usize,
    pub synthetic_prototypes: usize,
    pub synthetic_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Registry tag of the campaign.
    pub name: String,
    pub cycles: u64,
    /// Geometric cooling rates, one regime each.
    pub rates: Vec<f64>,
    /// Adds a zero-temperature quench regime (one `T = 0` sweep from a
    /// random state), which reaches shallow plateau minima.
    pub quench: bool,
    /// Calibrated from the model when `None`.
    pub t_start: Option<f64>,
    pub cuts: Vec<u64>,
    pub checkpoint_every: u64,
    pub max_sweeps: Option<u64>,
    pub max_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Sa,
    Sqa,
    Ingest,
}

impl SamplerKind {
    fn name(self) -> &'static str {
        match self {
            SamplerKind::Sa => "sa",
            SamplerKind::Sqa => "sqa",
            SamplerKind::Ingest => "ingest",
        }
    }
}

impl FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sa" => Ok(SamplerKind::Sa),
            "sqa" => Ok(SamplerKind::Sqa),
            "ingest" => Ok(SamplerKind::Ingest),
            _ => Err("expected sa, sqa or ingest".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub name: String,
    pub kind: SamplerKind,
    pub reads: u64,
    /// SA: sweeps of a linear cooling to 0. SQA: anneal sweeps.
    pub sweeps: usize,
    /// SA start temperature; calibrated when `None`.
    pub t_start: Option<f64>,
    pub trotter_slices: usize,
    /// SQA temperature; `0.1 *` energy scale when `None`.
    pub base_temperature: Option<f64>,
    pub path: Option<PathBuf>,
}

impl SamplerSpec {
    pub fn new(name: &str, kind: SamplerKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            reads: 10_000,
            sweeps: 1000,
            t_start: None,
            trotter_slices: 32,
            base_temperature: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    /// Reference sampler (A); the first configured sampler when `None`.
    pub a: Option<String>,
    /// Comparator (B); the search campaign when `None`.
    pub b: Option<String>,
    pub bins: usize,
    pub parameters: Vec<Parameter>,
    pub bucket: Option<BucketParameter>,
    pub bucket_edges: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelConfig,
    pub rbm: RbmConfig,
    pub search: SearchConfig,
    pub warming: WarmingProtocol,
    pub samplers: Vec<SamplerSpec>,
    pub compare: CompareConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = WarmingProtocol::default();
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            model: ModelConfig {
                source: ModelSource::Demo,
                path: None,
                random_n: 12,
                random_bias_scale: 0.5,
                rbm_snapshot: 1,
            },
            rbm: RbmConfig {
                dataset: None,
                n_visible: 8,
                n_hidden: 8,
                epochs: 18,
                snapshot_epochs: vec![1, 5, 18],
                cd_k: 1,
                learning_rate: 0.05,
                batch_size: 10,
                init_scale: 0.01,
                synthetic_patterns: 200,
                synthetic_prototypes: 4,
                synthetic_noise: 0.1,
            },
            search: SearchConfig {
                name: "campaign".into(),
                cycles: 1000,
                rates: vec![0.99, 0.999, 0.9999, 0.99999, 0.999999],
                quench: false,
                t_start: None,
                cuts: vec![10, 100],
                checkpoint_every: 256,
                max_sweeps: None,
                max_seconds: None,
            },
            warming: w,
            samplers: vec![SamplerSpec::new("sqa", SamplerKind::Sqa)],
            compare: CompareConfig {
                a: None,
                b: None,
                bins: 30,
                parameters: Parameter::ALL.to_vec(),
                bucket: Some(BucketParameter::NLow),
                bucket_edges: None,
            },
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(x: &Option<T>, none: &str) -> String {
    x.as_ref().map_or_else(|| none.to_string(), ToString::to_string)
}

fn path_opt(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(String::new, |p| p.display().to_string())
}

impl RunConfig {
    /// Every key in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());

        let m = &self.model;
        put("model.source", m.source.name().into());
        put("model.path", path_opt(&m.path));
        put("model.random_n", m.random_n.to_string());
        put("model.random_bias_scale", m.random_bias_scale.to_string());
        put("model.rbm_snapshot", m.rbm_snapshot.to_string());

        let r = &self.rbm;
        put("rbm.dataset", r.dataset.as_ref().map_or("synthetic".into(), |p| p.display().to_string()));
        put("rbm.n_visible", r.n_visible.to_string());
        put("rbm.n_hidden", r.n_hidden.to_string());
        put("rbm.epochs", r.epochs.to_string());
        put("rbm.snapshot_epochs", join(&r.snapshot_epochs));
        put("rbm.cd_k", r.cd_k.to_string());
        put("rbm.learning_rate", r.learning_rate.to_string());
        put("rbm.batch_size", r.batch_size.to_string());
        put("rbm.init_scale", r.init_scale.to_string());
        put("rbm.synthetic_patterns", r.synthetic_patterns.to_string());
        put("rbm.synthetic_prototypes", r.synthetic_prototypes.to_string());
        put("rbm.synthetic_noise", r.synthetic_noise.to_string());

        let s = &self.search;
        put("search.name", s.name.clone());
        put("search.cycles", s.cycles.to_string());
        put("search.rates", join(&s.rates));
        put("search.quench", s.quench.to_string());
        put("search.t_start", opt(&s.t_start, "auto"));
        put("search.cuts", join(&s.cuts));
        put("search.checkpoint_every", s.checkpoint_every.to_string());
        put("search.max_sweeps", opt(&s.max_sweeps, "none"));
        put("search.max_seconds", opt(&s.max_seconds, "none"));

        let w = &self.warming;
        put("warming.chains", w.chains.to_string());
        put("warming.step_cap", w.step_cap.to_string());
        put("warming.ladder_factor", w.ladder_factor.to_string());
        put("warming.ladder_start", w.ladder_start.to_string());
        put("warming.max_rungs", w.max_rungs.to_string());
        put("warming.warm_chains", w.warm_chains.to_string());
        put("warming.warm_sweeps", w.warm_sweeps.to_string());
        put("warming.max_capped_fraction", w.max_capped_fraction.to_string());
        put("warming.n_low_multiplier", w.n_low_multiplier.to_string());
        put("warming.dos_window_fraction", w.dos_window_fraction.to_string());
        put("warming.energy_scale", opt(&w.energy_scale, "auto"));

        put("samplers", self.samplers.iter().map(|s| s.name.clone()).collect::<Vec<_>>().join(","));
        for sp in &self.samplers {
            let p = format!("sampler.{}", sp.name);
            put(&format!("{p}.kind"), sp.kind.name().into());
            put(&format!("{p}.reads"), sp.reads.to_string());
            put(&format!("{p}.sweeps"), sp.sweeps.to_string());
            put(&format!("{p}.t_start"), opt(&sp.t_start, "auto"));
            put(&format!("{p}.trotter_slices"), sp.trotter_slices.to_string());
            put(&format!("{p}.base_temperature"), opt(&sp.base_temperature, "auto"));
            put(&format!("{p}.path"), path_opt(&sp.path));
        }

        let c = &self.compare;
        put("compare.a", opt(&c.a, "auto"));
        put("compare.b", opt(&c.b, "auto"));
        put("compare.bins", c.bins.to_string());
        put("compare.parameters", c.parameters.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
        put("compare.bucket", c.bucket.map_or("none".into(), |b| b.name().to_string()));
        put("compare.bucket_edges", c.bucket_edges.as_ref().map_or("quartiles".into(), |e| join(e)));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (idx + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", idx + 1)));
            }
        }
        let mut r = Reader { entries };
        let mut cfg = RunConfig::default();
        r.set("seed", &mut cfg.seed)?;
        if let Some(v) = r.take("out") {
            cfg.out = PathBuf::from(v.1);
        }

        let m = &mut cfg.model;
        r.set_with("model.source", &mut m.source, |v| v.parse())?;
        r.set_with("model.path", &mut m.path, |v| Ok(optional_path(v)))?;
        r.set("model.random_n", &mut m.random_n)?;
        r.set("model.random_bias_scale", &mut m.random_bias_scale)?;
        r.set("model.rbm_snapshot", &mut m.rbm_snapshot)?;

        let rb = &mut cfg.rbm;
        r.set_with("rbm.dataset", &mut rb.dataset, |v| {
            Ok(if v == "synthetic" { None } else { optional_path(v) })
        })?;
        r.set("rbm.n_visible", &mut rb.n_visible)?;
        r.set("rbm.n_hidden", &mut rb.n_hidden)?;
        r.set("rbm.epochs", &mut rb.epochs)?;
        r.set_with("rbm.snapshot_epochs", &mut rb.snapshot_epochs, list)?;
        r.set("rbm.cd_k", &mut rb.cd_k)?;
        r.set("rbm.learning_rate", &mut rb.learning_rate)?;
        r.set("rbm.batch_size", &mut rb.batch_size)?;
        r.set("rbm.init_scale", &mut rb.init_scale)?;
        r.set("rbm.synthetic_patterns", &mut rb.synthetic_patterns)?;
        r.set("rbm.synthetic_prototypes", &mut rb.synthetic_prototypes)?;
        r.set("rbm.synthetic_noise", &mut rb.synthetic_noise)?;

        let s = &mut cfg.search;
        r.set_with("search.name", &mut s.name, |v| Ok(v.to_string()))?;
        r.set("search.cycles", &mut s.cycles)?;
        r.set_with("search.rates", &mut s.rates, list)?;
        r.set("search.quench", &mut s.quench)?;
        r.set_with("search.t_start", &mut s.t_start, |v| maybe(v, "auto"))?;
        r.set_with("search.cuts", &mut s.cuts, list)?;
        r.set("search.checkpoint_every", &mut s.checkpoint_every)?;
        r.set_with("search.max_sweeps", &mut s.max_sweeps, |v| maybe(v, "none"))?;
        r.set_with("search.max_seconds", &mut s.max_seconds, |v| maybe(v, "none"))?;

        let w = &mut cfg.warming;
        r.set("warming.chains", &mut w.chains)?;
        r.set("warming.step_cap", &mut w.step_cap)?;
        r.set("warming.ladder_factor", &mut w.ladder_factor)?;
        r.set("warming.ladder_start", &mut w.ladder_start)?;
        r.set("warming.max_rungs", &mut w.max_rungs)?;
        r.set("warming.warm_chains", &mut w.warm_chains)?;
        r.set("warming.warm_sweeps", &mut w.warm_sweeps)?;
        r.set("warming.max_capped_fraction", &mut w.max_capped_fraction)?;
        r.set("warming.n_low_multiplier", &mut w.n_low_multiplier)?;
        r.set("warming.dos_window_fraction", &mut w.dos_window_fraction)?;
        r.set_with("warming.energy_scale", &mut w.energy_scale, |v| maybe(v, "auto"))?;

        if let Some((_, names)) = r.take("samplers") {
            let names: Vec<&str> = names.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            cfg.samplers = Vec::new();
            for name in names {
                let p = format!("sampler.{name}");
                let (line, kind) = r
                    .take(&format!("{p}.kind"))
                    .ok_or_else(|| Error::Config(format!("sampler `{name}` needs `{p}.kind`")))?;
                let kind: SamplerKind = kind
                    .parse()
                    .map_err(|e| Error::Config(format!("line {line}: `{p}.kind`: {e}")))?;
                let mut sp = SamplerSpec::new(name, kind);
                r.set(&format!("{p}.reads"), &mut sp.reads)?;
                r.set(&format!("{p}.sweeps"), &mut sp.sweeps)?;
                r.set_with(&format!("{p}.t_start"), &mut sp.t_start, |v| maybe(v, "auto"))?;
                r.set(&format!("{p}.trotter_slices"), &mut sp.trotter_slices)?;
                r.set_with(&format!("{p}.base_temperature"), &mut sp.base_temperature, |v| maybe(v, "auto"))?;
                r.set_with(&format!("{p}.path"), &mut sp.path, |v| Ok(optional_path(v)))?;
                cfg.samplers.push(sp);
            }
        }

        let c = &mut cfg.compare;
        r.set_with("compare.a", &mut c.a, |v| Ok((v != "auto").then(|| v.to_string())))?;
        r.set_with("compare.b", &mut c.b, |v| Ok((v != "auto").then(|| v.to_string())))?;
        r.set("compare.bins", &mut c.bins)?;
        r.set_with("compare.parameters", &mut c.parameters, |v| {
            v.split(',')
                .map(|p| Parameter::parse(p.trim()).map_err(|e| e.to_string()))
                .collect()
        })?;
        r.set_with("compare.bucket", &mut c.bucket, |v| {
            if v == "none" {
                Ok(None)
            } else {
                BucketParameter::parse(v).map(Some).map_err(|e| e.to_string())
            }
        })?;
        r.set_with("compare.bucket_edges", &mut c.bucket_edges, |v| {
            if v == "quartiles" {
                Ok(None)
            } else {
                list(v).map(Some)
            }
        })?;

        if let Some((key, (line, _))) = r.entries.into_iter().next() {
            return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let mut names = BTreeSet::new();
        for sp in &self.samplers {
            if sp.name.is_empty() || sp.name.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
                return bad(format!("invalid sampler name `{}`", sp.name));
            }
            if !names.insert(sp.name.as_str()) || sp.name == self.search.name {
                return bad(format!("duplicate sampler name `{}`", sp.name));
            }
            if sp.reads == 0 || sp.sweeps == 0 || sp.trotter_slices < 2 {
                return bad(format!("sampler `{}` needs positive reads and sweeps and >= 2 slices", sp.name));
            }
            if sp.kind == SamplerKind::Ingest && sp.path.is_none() {
                return bad(format!("ingest sampler `{}` needs a path", sp.name));
            }
            if sp.t_start.is_some_and(|t| !(t > 0.0)) || sp.base_temperature.is_some_and(|t| !(t > 0.0)) {
                return bad(format!("sampler `{}` temperatures must be > 0", sp.name));
            }
        }
        let s = &self.search;
        if s.cycles == 0 || s.rates.is_empty() || s.rates.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return bad("search needs cycles >= 1 and rates in (0, 1)".into());
        }
        if s.checkpoint_every == 0 || s.max_sweeps == Some(0) || s.max_seconds.is_some_and(|x| !(x > 0.0)) {
            return bad("search checkpoint interval and budgets must be positive".into());
        }
        if s.t_start.is_some_and(|t| !(t > 0.0)) {
            return bad("search.t_start must be > 0".into());
        }
        if s.cuts.windows(2).any(|w| w[1] <= w[0]) || s.cuts.first() == Some(&0) {
            return bad("search.cuts must be positive and strictly increasing".into());
        }
        if s.name.is_empty() || s.name.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
            return bad(format!("invalid search name `{}`", s.name));
        }
        let r = &self.rbm;
        if r.n_visible == 0 || r.n_hidden == 0 || r.epochs == 0 || r.cd_k == 0 || r.batch_size == 0 {
            return bad("rbm sizes, epochs, cd_k and batch_size must be >= 1".into());
        }
        if !(r.learning_rate > 0.0) || r.init_scale < 0.0 || !(0.0..=1.0).contains(&r.synthetic_noise) {
            return bad("rbm learning_rate must be > 0, init_scale >= 0, noise in [0, 1]".into());
        }
        if r.synthetic_patterns == 0 || r.synthetic_prototypes == 0 {
            return bad("rbm synthetic dataset needs patterns and prototypes".into());
        }
        if r.snapshot_epochs.iter().any(|&e| e == 0 || e > r.epochs) {
            return bad("rbm.snapshot_epochs must lie in 1..=rbm.epochs".into());
        }
        let m = &self.model;
        if m.source == ModelSource::File && m.path.is_none() {
            return bad("model.source = file needs model.path".into());
        }
        if m.source == ModelSource::Rbm && !r.snapshot_epochs.contains(&m.rbm_snapshot) {
            return bad(format!("model.rbm_snapshot {} is not in rbm.snapshot_epochs", m.rbm_snapshot));
        }
        if m.random_n == 0 || !(m.random_bias_scale >= 0.0) {
            return bad("model.random_n must be >= 1 and bias scale >= 0".into());
        }
        self.warming.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.compare.bins == 0 {
            return bad("compare.bins must be >= 1".into());
        }
        Ok(())
    }

    /// Reference sampler name for comparison.
    pub fn compare_a(&self) -> Option<String> {
        self.compare.a.clone().or_else(|| self.samplers.first().map(|s| s.name.clone()))
    }

    pub fn compare_b(&self) -> String {
        self.compare.b.clone().unwrap_or_else(|| self.search.name.clone())
    }
}

fn optional_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn maybe<T: FromStr>(v: &str, none: &str) -> std::result::Result<Option<T>, String> {
    if v == none {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|_| format!("expected a number or `{none}`"))
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|x| x.parse().map_err(|_| format!("bad list element `{x}`")))
        .collect()
}

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn set_with<T>(
        &mut self,
        key: &str,
        slot: &mut T,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<()> {
        if let Some((line, v)) = self.take(key) {
            *slot = parse(&v).map_err(|e| Error::Config(format!("line {line}: `{key}`: {e}")))?;
        }
        Ok(())
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        self.set_with(key, slot, |v| v.parse().map_err(|_| format!("cannot parse `{v}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn customized_round_trips() {
        let text = "seed = 9\nmodel.source = random\nmodel.random_n = 10\nsamplers = q,s,ext\n\
                    sampler.q.kind = sqa\nsampler.q.reads = 50\nsampler.s.kind = sa\nsampler.s.t_start = 2.5\n\
                    sampler.ext.kind = ingest\nsampler.ext.path = reads.txt\nsearch.cuts = 5,50\n\
                    compare.bucket = e_act\ncompare.bucket_edges = 0,1,2\nwarming.energy_scale = 1.5\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.samplers.len(), 3);
        assert_eq!(cfg.samplers[1].t_start, Some(2.5));
        assert_eq!(cfg.compare.bucket_edges, Some(vec![0.0, 1.0, 2.0]));
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        match RunConfig::parse("seed = 1\nsearch.cylces = 10\n") {
            Err(Error::Config(m)) => assert!(m.contains("search.cylces"), "{m}"),
            other => panic!("{other:?}"),
        }
        // fields of a sampler not listed in `samplers`
        assert!(RunConfig::parse("sampler.ghost.kind = sa\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("search.cycles = 0\n").is_err());
        assert!(RunConfig::parse("seed = -1\n").is_err());
        assert!(RunConfig::parse("samplers = a,a\nsampler.a.kind = sa\n").is_err());
        assert!(RunConfig::parse("samplers = a\nsampler.a.kind = ingest\n").is_err());
        assert!(RunConfig::parse("seed = 1\nseed = 2\n").is_err());
        assert!(RunConfig::parse("model.source = file\n").is_err());
        assert!(RunConfig::parse("search.cuts = 10,5\n").is_err());
        assert!(RunConfig::parse("just text\n").is_err());
    }
}
