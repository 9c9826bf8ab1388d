//! Pipeline stages behind the `valleyscan` binary.
//!
//! Every stage reads its inputs from the output directory (or the model
//! source named in the config), writes plain-text outputs there, and
//! appends its wall time to the `timing.txt` sidecar. Data outputs are a
//! pure function of the config and seed.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use valleyscan::compare::{compare, Bucketing, CompareOptions};
use valleyscan::config::{ModelSource, RunConfig, SamplerKind, SamplerSpec};
use valleyscan::mc::{calibrate_t_start, Budget, CampaignCheckpoint, CampaignRunner, StopReason};
use valleyscan::oracle::enumerate_landscape;
use valleyscan::rbm::{rbm_to_ising, train_cd};
use valleyscan::samplers::{ingest_reads, sample_sa, sample_sqa, write_reads, SqaParams};
use valleyscan::valley::{parse_valley_report, valley_report_csv};
use valleyscan::{
    AnnealFunctions, Dataset, Error, IsingModel, RandomSource, Rbm, SampleSet, Schedule, TrainingConfig,
    ValleyRegistry,
};

pub const DEMO_MODEL: &str = include_str!("../data/demo12.txt");

pub const TIMING_FILE: &str = "timing.txt";
pub const MODEL_FILE: &str = "model.txt";
pub const REGISTRY_FILE: &str = "registry.txt";
pub const CHECKPOINT_FILE: &str = "search.checkpoint";
pub const CUTS_FILE: &str = "cuts.csv";
pub const FULL_REGISTRY_FILE: &str = "registry_all.txt";
pub const VALLEYS_FILE: &str = "valleys.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const DATASET_FILE: &str = "dataset.txt";
pub const LANDSCAPE_FILE: &str = "landscape.csv";
pub const ORACLE_MINIMA_FILE: &str = "oracle_minima.csv";

/// Desk-scale settings used by `demo` when no config file is given.
pub const DEMO_CONFIG: &str = "\
seed = 1
model.source = demo
search.cycles = 200
search.rates = 0.9,0.95,0.99
search.quench = true
search.cuts = 2,20
samplers = sqa,quick
sampler.sqa.kind = sqa
sampler.sqa.reads = 1000
sampler.sqa.sweeps = 200
sampler.sqa.trotter_slices = 16
sampler.quick.kind = sa
sampler.quick.reads = 100
sampler.quick.sweeps = 10
warming.chains = 50
warming.step_cap = 20000
warming.warm_chains = 10
compare.a = quick
compare.b = campaign
";

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// A budget or size cap stopped the stage early.
    ResourceCap(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TooLarge { .. } => Failure::ResourceCap(e.to_string()),
            other => Failure::Core(other),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::ResourceCap(m) => write!(f, "resource cap reached: {m}"),
        }
    }
}

impl Failure {
    /// 2 config error, 3 data error, 4 resource cap.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::ResourceCap(_) => 4,
            Failure::Core(Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownSampler(_)) => 2,
            Failure::Core(_) => 3,
        }
    }
}

pub type StageResult<T = ()> = Result<T, Failure>;

/// Configuration plus run flags shared by every stage.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub resume: bool,
}

impl Context {
    pub fn new(config: RunConfig, resume: bool) -> StageResult<Self> {
        let out = config.out.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self { config, out, resume })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn source(&self, label: &str) -> RandomSource {
        RandomSource::from_seed(self.config.seed).labeled(label)
    }

    fn write(&self, name: &str, contents: &str) -> StageResult {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    fn require(&self, name: &str) -> StageResult<PathBuf> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Failure::Core(Error::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing upstream file; run the earlier stage first"),
            }));
        }
        Ok(path)
    }

    fn record_timing(&self, stage: &str, elapsed: Duration) -> StageResult {
        let path = self.path(TIMING_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(f, "stage={stage} seconds={:.3}", elapsed.as_secs_f64()).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    fn timed<T>(&self, stage: &str, body: impl FnOnce() -> StageResult<T>) -> StageResult<T> {
        let started = Instant::now();
        let result = body();
        self.record_timing(stage, started.elapsed())?;
        result
    }
}

fn rbm_file(epoch: usize) -> String {
    format!("rbm_epoch_{epoch}.txt")
}

fn reads_file(sampler: &str) -> String {
    format!("reads_{sampler}.txt")
}

pub fn load_model(ctx: &Context) -> StageResult<IsingModel> {
    let m = &ctx.config.model;
    Ok(match m.source {
        ModelSource::File => IsingModel::read(m.path.as_ref().expect("validated"))?,
        ModelSource::Demo => IsingModel::parse(DEMO_MODEL, "bundled demo")?,
        ModelSource::Random => IsingModel::random_dyadic(m.random_n, m.random_bias_scale, &mut ctx.source("model").rng()),
        ModelSource::Rbm => {
            let path = ctx.require(&rbm_file(m.rbm_snapshot))?;
            rbm_to_ising(&Rbm::read(&path)?).0
        }
    })
}

pub fn cmd_train(ctx: &Context) -> StageResult {
    ctx.timed("train", || {
        let r = &ctx.config.rbm;
        let data = match &r.dataset {
            Some(path) => Dataset::read(path)?,
            None => {
                let d = Dataset::synthetic(
                    r.n_visible,
                    r.synthetic_patterns,
                    r.synthetic_prototypes,
                    r.synthetic_noise,
                    &mut ctx.source("dataset").rng(),
                )?;
                ctx.write(DATASET_FILE, &d.to_text())?;
                d
            }
        };
        let init = Rbm::random(r.n_visible, r.n_hidden, r.init_scale, &mut ctx.source("rbm-init").rng());
        let cfg = TrainingConfig {
            cd_k: r.cd_k,
            learning_rate: r.learning_rate,
            epochs: r.epochs,
            batch_size: r.batch_size,
            seed: ctx.source("train").seed,
            snapshot_epochs: r.snapshot_epochs.iter().copied().collect(),
        };
        let run = train_cd(&init, &data, &cfg)?;
        let mut table = String::from("epoch,reconstruction_error\n");
        for (e, err) in run.reconstruction_error.iter().enumerate() {
            table.push_str(&format!("{},{err}\n", e + 1));
        }
        ctx.write(TRAINING_FILE, &table)?;
        for (epoch, rbm) in &run.snapshots {
            ctx.write(&rbm_file(*epoch), &rbm.to_text())?;
        }
        let last = run.reconstruction_error.last().copied().unwrap_or(f64::NAN);
        println!(
            "train: {} patterns, {} epochs, {} snapshots, final reconstruction error {last:.4}",
            data.len(),
            r.epochs,
            run.snapshots.len()
        );
        Ok(())
    })
}

pub fn cmd_search(ctx: &Context) -> StageResult {
    ctx.timed("search", || {
        let model = load_model(ctx)?;
        ctx.write(MODEL_FILE, &model.to_text())?;
        let s = &ctx.config.search;
        let t_start = match s.t_start {
            Some(t) => t,
            None => calibrate_t_start(&model, 0.95, &ctx.source("calibrate")),
        };
        let mut regimes: Vec<Schedule> = s
            .rates
            .iter()
            .map(|&rate| Schedule::geometric(t_start, rate, 1e-3 * t_start))
            .collect::<Result<_, _>>()?;
        if s.quench {
            regimes.push(Schedule::linear_cooling(0.0, 0.0, 1)?);
        }
        let budget = Budget {
            max_sweeps: s.max_sweeps,
            max_wall: s.max_seconds.map(Duration::from_secs_f64),
        };
        let mut runner = CampaignRunner::new(&model, &regimes, s.cycles, ctx.source("search"), budget);
        runner.checkpoint_every = s.checkpoint_every;
        let checkpoint_path = ctx.path(CHECKPOINT_FILE);
        let resume = if ctx.resume && checkpoint_path.exists() {
            Some(CampaignCheckpoint::read(&checkpoint_path)?)
        } else {
            None
        };
        let result = runner.run(resume, |cp| cp.write(&checkpoint_path))?;

        let mut registry = ValleyRegistry::new(model.n());
        registry.register_campaign(&s.name, &result)?;
        registry.write(&ctx.path(REGISTRY_FILE))?;
        let mut cuts = String::from("cut,minima\n");
        for &c in &s.cuts {
            cuts.push_str(&format!("{c},{}\n", result.count_within(c)));
        }
        cuts.push_str(&format!("all,{}\n", result.minima.len()));
        ctx.write(CUTS_FILE, &cuts)?;
        println!(
            "search: {} minima after {} cycles ({} sweeps)",
            result.minima.len(),
            result.cycles_completed,
            result.sweeps
        );
        match result.stop {
            StopReason::Completed => Ok(()),
            StopReason::SweepBudget | StopReason::WallClock => Err(Failure::ResourceCap(format!(
                "search stopped after {} of {} cycles; rerun with --resume to continue",
                result.cycles_completed, s.cycles
            ))),
        }
    })
}

fn run_sampler(ctx: &Context, model: &IsingModel, spec: &SamplerSpec) -> StageResult<SampleSet> {
    let source = ctx.source(&format!("sampler.{}", spec.name));
    let mut set = match spec.kind {
        SamplerKind::Sa => {
            let t_start = spec
                .t_start
                .unwrap_or_else(|| calibrate_t_start(model, 0.95, &source.labeled("calibrate")));
            let schedule = Schedule::linear_cooling(t_start, 0.0, spec.sweeps)?;
            sample_sa(model, spec.reads, &schedule, &source)?
        }
        SamplerKind::Sqa => {
            let scale = model.energy_scale(4096, &mut source.labeled("scale").rng());
            let mut params = SqaParams::defaults_for(scale);
            params.trotter_slices = spec.trotter_slices;
            params.sweeps = spec.sweeps;
            if let Some(t) = spec.base_temperature {
                params.base_temperature = t;
            }
            sample_sqa(model, spec.reads, &AnnealFunctions::default(), &params, &source)?
        }
        SamplerKind::Ingest => {
            let mut set = ingest_reads(spec.path.as_ref().expect("validated"), model.n())?;
            let original = set.sampler_name.clone();
            set.metadata.fields.insert("ingested_as".into(), original);
            set
        }
    };
    set.sampler_name = spec.name.clone();
    Ok(set)
}

pub fn cmd_sample(ctx: &Context) -> StageResult {
    ctx.timed("sample", || {
        let model = load_model(ctx)?;
        for spec in &ctx.config.samplers {
            let set = run_sampler(ctx, &model, spec)?;
            write_reads(&set, &ctx.path(&reads_file(&spec.name)))?;
            println!(
                "sample: {} ({:?}) {} reads, {} distinct",
                spec.name,
                spec.kind,
                set.total_reads(),
                set.distinct()
            );
        }
        Ok(())
    })
}

pub fn cmd_characterize(ctx: &Context) -> StageResult {
    ctx.timed("characterize", || {
        let model = load_model(ctx)?;
        let mut registry = ValleyRegistry::read(&ctx.require(REGISTRY_FILE)?)?;
        for spec in &ctx.config.samplers {
            let mut set = ingest_reads(&ctx.require(&reads_file(&spec.name))?, model.n())?;
            set.sampler_name = spec.name.clone();
            registry.register_sample(&set, &model)?;
        }
        registry.characterize_all(&model, &ctx.config.warming, &ctx.source("characterize"))?;
        registry.write(&ctx.path(FULL_REGISTRY_FILE))?;
        ctx.write(VALLEYS_FILE, &valley_report_csv(&registry))?;
        let fitted = registry
            .entries()
            .values()
            .filter(|e| e.record.as_ref().is_some_and(|r| r.e_act.is_some()))
            .count();
        println!("characterize: {} valleys, {fitted} with an Arrhenius barrier", registry.len());
        Ok(())
    })
}

pub fn cmd_compare(ctx: &Context) -> StageResult {
    ctx.timed("compare", || {
        let mut registry = ValleyRegistry::read(&ctx.require(FULL_REGISTRY_FILE)?)?;
        let report_path = ctx.require(VALLEYS_FILE)?;
        let text = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
        registry.attach_records(parse_valley_report(&text, &report_path.display().to_string())?)?;
        let cfg = &ctx.config;
        let a = cfg
            .compare_a()
            .ok_or_else(|| Error::Config("no reference sampler: set compare.a or configure a sampler".into()))?;
        let b = cfg.compare_b();
        let options = CompareOptions {
            b_cuts: if b == cfg.search.name { cfg.search.cuts.clone() } else { Vec::new() },
            bins: cfg.compare.bins,
            parameters: cfg.compare.parameters.clone(),
            bucketing: cfg.compare.bucket.map(|parameter| Bucketing {
                parameter,
                edges: cfg.compare.bucket_edges.clone(),
            }),
        };
        let report = compare(&registry, &a, &b, &options)?;
        for (name, contents) in report.files() {
            ctx.write(&name, &contents)?;
        }
        let full = report.cuts.last().expect("final cut");
        let ratio = report.ratios.overall().ratio.map_or("undefined".to_string(), |r| format!("{r:.3}"));
        println!(
            "compare: {a} vs {b}: {} A-only, {} both, {} B-only, missed {}, n_up ratio {ratio}{}",
            full.a_only,
            full.both,
            full.b_only,
            full.missed_fraction.map_or("n/a".into(), |m| format!("{:.1}%", 100.0 * m)),
            if report.empty_partition { " (empty partition flagged)" } else { "" }
        );
        Ok(())
    })
}

pub fn cmd_oracle(ctx: &Context) -> StageResult {
    ctx.timed("oracle", || {
        let model = load_model(ctx)?;
        let landscape = enumerate_landscape(&model)?;
        ctx.write(LANDSCAPE_FILE, &landscape.dump_csv())?;
        let mut table = String::from("lm,energy,basin_size,basin_fraction,barrier\n");
        for lm in landscape.minima() {
            let barrier = landscape.exact_barrier(&lm)?.map_or(String::new(), |b| b.to_string());
            table.push_str(&format!(
                "{lm},{},{},{},{barrier}\n",
                landscape.energy_of(lm.to_index()),
                landscape.basin_size(&lm)?,
                landscape.basin_fraction(&lm)?
            ));
        }
        ctx.write(ORACLE_MINIMA_FILE, &table)?;
        println!("oracle: {} states, {} minima", 1u64 << model.n(), landscape.minima().len());
        Ok(())
    })
}

/// Every stage in pipeline order; training only when the model is an RBM.
pub fn cmd_demo(ctx: &Context) -> StageResult {
    if ctx.config.model.source == ModelSource::Rbm {
        cmd_train(ctx)?;
    }
    cmd_search(ctx)?;
    cmd_sample(ctx)?;
    cmd_characterize(ctx)?;
    cmd_compare(ctx)?;
    if ctx.config.model.source != ModelSource::Rbm || load_model(ctx)?.n() <= 20 {
        cmd_oracle(ctx)?;
    }
    Ok(())
}

/// Reads the config file (or the given default text) and applies flag
/// overrides.
pub fn build_config(
    path: Option<&Path>,
    default_text: Option<&str>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> StageResult<RunConfig> {
    let mut cfg = match (path, default_text) {
        (Some(p), _) => RunConfig::read(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read config {}: {source}", path.display())),
            other => other,
        })?,
        (None, Some(text)) => RunConfig::parse(text)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out = out.to_path_buf();
    }
    Ok(cfg)
}
