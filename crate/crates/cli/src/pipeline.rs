//! Pipeline stages behind each subcommand. Every stage reads its inputs from
//! and writes its artifacts under the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::json;

use surrokit::burgers::{
    cfl_limit, energy, init_field, read_trajectory, write_trajectory, Closure, FlowField, Solver, Trajectory,
    TrajectorySidecar,
};
use surrokit::closures::{
    bench_infer, fit_smagorinsky_constant, NeuralClosure, NoClosure, SmagorinskyClosure,
};
use surrokit::coarse::{box_filter, build_pairs};
use surrokit::data::{
    build_dataset, extract_samples, read_dataset, read_split, split_paths, write_dataset, GridInfo, NormStats,
    PrepareOptions, Split,
};
use surrokit::eventgen::{
    build_buffer, bvae_generate, dimension_reports, histogram_csv, isotropy_test, mass_report, mc_generate,
    momentum_residual, physics_report, prior_generate, read_events, write_events, EventManifest, EventNorm,
    EventRecord, EVENT_DIM,
};
use surrokit::neural::{load_mlp, load_vae, save_mlp, save_vae, train_regressor, train_vae, Activation, Mlp, Vae};
use surrokit::rng::{self, child_seed};
use surrokit::validation::{
    apriori_validate, assemble_report, detect_instability, energy_csv, run_closure, spectrum_csv, truth_reference,
};

use crate::args::{BenchCommand, ClosureArg, Command, EventsCommand, RunCommand, ValidateCommand};
use crate::config::RunConfig;
use crate::error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

pub const CONFIG_ECHO: &str = "effective_config.toml";
pub const GEN_DATA_REPORT: &str = "data/gen_data.json";
pub const DATASET_DIR: &str = "data/dataset";
pub const CLOSURE_WEIGHTS: &str = "closure/closure.sknn";
pub const CLOSURE_META: &str = "closure/closure.json";
pub const CLOSURE_HISTORY: &str = "closure/history.csv";
pub const APRIORI_REPORT: &str = "validate/apriori.json";
pub const APOSTERIORI_REPORT: &str = "validate/aposteriori.json";
pub const APOSTERIORI_ENERGY: &str = "validate/energy.csv";
pub const APOSTERIORI_SPECTRUM: &str = "validate/spectrum.csv";
pub const BENCH_REPORT: &str = "bench/infer.json";
pub const VAE_WEIGHTS: &str = "vae/vae.skvae";
pub const VAE_META: &str = "vae/vae.json";
pub const VAE_HISTORY: &str = "vae/history.csv";
pub const MC_TRAIN: &str = "events/mc_train.skev";
pub const MC_TRUTH: &str = "events/mc_truth.skev";
pub const MC_REPORT: &str = "events/mc_report.json";
pub const BVAE_EVENTS: &str = "events/bvae.skev";
pub const PRIOR_EVENTS: &str = "events/prior.skev";
pub const PHYSICS_REPORT: &str = "events/physics_report.json";
pub const HISTOGRAMS: &str = "events/histograms.csv";

pub fn trajectory_path(realization: usize) -> String {
    format!("data/trajectories/real_{realization:03}.sktraj")
}

/// Everything a stage needs: the validated config, where to write, and how
/// many worker threads to use.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub threads: usize,
    pub config_hash: String,
}

/// Wrapper written around every JSON report.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub report: T,
}

impl Context {
    pub fn new(config: RunConfig, threads: usize) -> Self {
        Self {
            out: config.paths.out.clone(),
            config_hash: config.hash(),
            config,
            threads,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.config.sim.seed
    }

    pub fn seed(&self, label: &str) -> u64 {
        child_seed(self.root_seed(), label)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn require(&self, rels: &[&str]) -> Result<()> {
        let missing: Vec<PathBuf> = rels.iter().map(|r| self.path(r)).filter(|p| !p.exists()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Prerequisite { missing })
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))
    }

    fn create(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(p)
    }

    fn write_text(&self, rel: &str, text: &str) -> Result<PathBuf> {
        let p = self.create(rel)?;
        std::fs::write(&p, text)?;
        Ok(p)
    }

    fn write_report<T: Serialize>(
        &self,
        rel: &str,
        command: &str,
        seeds: &[(&str, u64)],
        report: &T,
    ) -> Result<PathBuf> {
        let mut all = BTreeMap::new();
        all.insert("root".to_string(), self.root_seed());
        for (k, v) in seeds {
            all.insert(k.to_string(), *v);
        }
        let env = Envelope {
            command: command.to_string(),
            config_hash: self.config_hash.clone(),
            seeds: all,
            report,
        };
        self.write_text(rel, &(serde_json::to_string_pretty(&env)? + "\n"))
    }

    pub fn echo_config(&self) -> Result<PathBuf> {
        self.write_text(CONFIG_ECHO, &self.config.to_toml())
    }

    fn discard(&self, snapshots: usize) -> usize {
        ((snapshots as f64) * self.config.filter.discard_frac).floor() as usize
    }
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Artifacts written by a stage, relative to the output directory.
#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub command: String,
    pub artifacts: Vec<PathBuf>,
}

pub fn dispatch(ctx: &Context, command: &Command) -> Result<Outcome> {
    let mut written = vec![ctx.echo_config()?];
    let name = match command {
        Command::GenData => {
            written.extend(gen_data(ctx)?);
            "gen-data"
        }
        Command::TrainClosure => {
            written.extend(train_closure(ctx)?);
            "train-closure"
        }
        Command::TrainVae => {
            written.extend(train_vae_stage(ctx)?);
            "train-vae"
        }
        Command::Validate(ValidateCommand::Apriori) => {
            written.extend(validate_apriori(ctx)?);
            "validate apriori"
        }
        Command::Validate(ValidateCommand::Aposteriori) => {
            written.extend(validate_aposteriori(ctx)?);
            "validate aposteriori"
        }
        Command::Events(EventsCommand::Sample) => {
            written.extend(events_sample(ctx)?);
            "events sample"
        }
        Command::Events(EventsCommand::Generate) => {
            written.extend(events_generate(ctx)?);
            "events generate"
        }
        Command::Events(EventsCommand::Validate) => {
            written.extend(events_validate(ctx)?);
            "events validate"
        }
        Command::Bench(BenchCommand::Infer) => {
            written.extend(bench(ctx)?);
            "bench infer"
        }
        Command::Run(RunCommand::Dns) => {
            written.extend(run_dns(ctx)?);
            "run dns"
        }
        Command::Run(RunCommand::Les { closure }) => {
            written.extend(run_les(ctx, *closure)?);
            "run les"
        }
    };
    Ok(Outcome {
        command: name.to_string(),
        artifacts: written
            .into_iter()
            .map(|p| p.strip_prefix(&ctx.out).map(Path::to_path_buf).unwrap_or(p))
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationInfo {
    pub id: usize,
    pub seed: u64,
    pub dt: f64,
    pub snapshots: usize,
    pub discarded: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub pairs: usize,
    pub cells: usize,
    /// Cells where `tau_tot != tau_res + tau_unres` bitwise.
    pub identity_violations: usize,
    pub negative_unres: usize,
    pub min_unres: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenDataReport {
    pub realizations: Vec<RealizationInfo>,
    pub n_fine: usize,
    pub n_coarse: usize,
    pub filter_ratio: usize,
    pub decomposition: DecompositionCheck,
    pub split_sizes: BTreeMap<String, usize>,
    pub split_realizations: BTreeMap<String, Vec<u32>>,
}

fn initial_field(cfg: &RunConfig, seed: u64) -> Result<FlowField<f64>> {
    let s = &cfg.sim;
    Ok(init_field(s.n_fine, s.length, s.nu, s.k_max, s.amplitude, seed)?)
}

fn fine_dt(cfg: &RunConfig, field: &FlowField<f64>) -> f64 {
    cfg.sim.dt.unwrap_or_else(|| cfg.sim.cfl_safety * cfl_limit(field))
}

fn sim_sidecar(cfg: &RunConfig, seed: u64, extra: serde_json::Value) -> TrajectorySidecar {
    TrajectorySidecar {
        start_time: 0.0,
        seed,
        config: json!({ "sim": cfg.sim, "detail": extra }),
    }
}

pub fn gen_data(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let r = cfg.filter.r;
    let pool = ctx.pool()?;
    let per_real: Vec<_> = pool.install(|| {
        (0..cfg.sim.realizations)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let seed = ctx.seed(&format!("realization-{i}"));
                let field = initial_field(cfg, seed)?;
                let dt = fine_dt(cfg, &field);
                let traj = surrokit::burgers::run(&field, cfg.sim.t_end, dt, None, cfg.sim.snapshot_stride)?;
                let path = ctx.create(&trajectory_path(i))?;
                write_trajectory(&traj, &path, &sim_sidecar(cfg, seed, json!({ "realization": i })))?;
                let discarded = ctx.discard(traj.len());
                let pairs = build_pairs(&traj, r, discarded, i as u32)?;
                let mut check = DecompositionCheck {
                    min_unres: f64::INFINITY,
                    ..Default::default()
                };
                for p in &pairs {
                    check.pairs += 1;
                    for c in 0..p.n_coarse() {
                        check.cells += 1;
                        if p.tau_tot[c] != p.tau_res[c] + p.tau_unres[c] {
                            check.identity_violations += 1;
                        }
                        if !(p.tau_unres[c] >= 0.0) {
                            check.negative_unres += 1;
                        }
                        check.min_unres = check.min_unres.min(p.tau_unres[c]);
                    }
                }
                let samples = extract_samples(&pairs)?;
                let info = RealizationInfo {
                    id: i,
                    seed,
                    dt: traj.dt,
                    snapshots: traj.len(),
                    discarded,
                    samples: samples.len(),
                };
                Ok((info, check, samples, path))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut written = Vec::new();
    let mut infos = Vec::new();
    let mut samples = Vec::new();
    let mut check = DecompositionCheck {
        min_unres: f64::INFINITY,
        ..Default::default()
    };
    for (info, c, s, path) in per_real {
        check.pairs += c.pairs;
        check.cells += c.cells;
        check.identity_violations += c.identity_violations;
        check.negative_unres += c.negative_unres;
        check.min_unres = check.min_unres.min(c.min_unres);
        infos.push(info);
        samples.extend(s);
        written.push(path);
    }
    let grid = GridInfo {
        coarse_dx: cfg.coarse_dx(),
        n_coarse: cfg.n_coarse() as u32,
        filter_ratio: r as u32,
    };
    let dataset_seed = ctx.seed("dataset");
    let ds = build_dataset(
        &samples,
        cfg.data.splits,
        dataset_seed,
        grid,
        PrepareOptions {
            augment: cfg.data.augment,
            balance_bins: cfg.data.balance.then_some(cfg.data.n_bins),
            epsilon_std: cfg.data.epsilon_std,
        },
    )?;
    let dir = ctx.path(DATASET_DIR);
    write_dataset(&ds, &dir)?;
    for split in Split::ALL {
        let (a, b) = split_paths(&dir, split);
        written.extend([a, b]);
    }
    let report = GenDataReport {
        realizations: infos,
        n_fine: cfg.sim.n_fine,
        n_coarse: cfg.n_coarse(),
        filter_ratio: r,
        decomposition: check,
        split_sizes: Split::ALL
            .iter()
            .map(|&s| (s.name().to_string(), ds.split(s).len()))
            .collect(),
        split_realizations: Split::ALL
            .iter()
            .map(|&s| (s.name().to_string(), ds.realizations(s).into_iter().collect()))
            .collect(),
    };
    written.push(ctx.write_report(GEN_DATA_REPORT, "gen-data", &[("dataset", dataset_seed)], &report)?);
    Ok(written)
}

/// Everything needed to rebuild the closure besides its weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureMeta {
    pub sizes: Vec<usize>,
    pub slope: f64,
    pub norm_stats: NormStats,
    pub smagorinsky_c: f64,
    pub coarse_dx: f64,
    pub n_coarse: usize,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub augmented: bool,
    pub balanced: bool,
    pub train_samples: usize,
}

pub fn train_closure(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let manifests: Vec<String> = Split::ALL
        .iter()
        .flat_map(|&s| {
            let (a, b) = split_paths(Path::new(DATASET_DIR), s);
            [a, b].map(|p| p.to_string_lossy().into_owned())
        })
        .collect();
    ctx.require(&manifests.iter().map(String::as_str).collect::<Vec<_>>())?;
    let ds = read_dataset(&ctx.path(DATASET_DIR))?;
    let seed = cfg.train.seed.unwrap_or_else(|| ctx.seed("train-closure"));
    let (mlp, history) = train_regressor::<f64>(&ds, &cfg.mlp(), &cfg.closure_training(seed))?;
    let c = fit_smagorinsky_constant(&ds)?;
    let weights = ctx.create(CLOSURE_WEIGHTS)?;
    save_mlp(&mlp, &weights)?;
    let meta = ClosureMeta {
        sizes: mlp.sizes().to_vec(),
        slope: mlp.slope(),
        norm_stats: ds.norm_stats,
        smagorinsky_c: c,
        coarse_dx: ds.grid.coarse_dx,
        n_coarse: ds.grid.n_coarse as usize,
        epochs: history.epochs(),
        best_epoch: history.best_epoch,
        best_val_loss: history.best_epoch.map(|e| history.val_loss[e]),
        augmented: cfg.data.augment,
        balanced: ds.balance.is_some(),
        train_samples: ds.train.len(),
    };
    Ok(vec![
        weights,
        ctx.write_text(CLOSURE_HISTORY, &history.to_csv())?,
        ctx.write_report(CLOSURE_META, "train-closure", &[("train", seed)], &meta)?,
    ])
}

pub fn load_closure(ctx: &Context) -> Result<(Mlp<f64>, ClosureMeta)> {
    ctx.require(&[CLOSURE_WEIGHTS, CLOSURE_META])?;
    let mlp = load_mlp::<f64>(&ctx.path(CLOSURE_WEIGHTS))?;
    let meta = read_report::<ClosureMeta>(&ctx.path(CLOSURE_META))?.report;
    if mlp.sizes() != meta.sizes.as_slice() {
        return Err(CliError::Internal("closure weights and metadata disagree on layer sizes".into()));
    }
    Ok((mlp, meta))
}

#[derive(Debug, Serialize)]
struct AprioriBody {
    #[serde(flatten)]
    scores: surrokit::validation::AprioriReport,
    test_realizations: Vec<u32>,
    neural_r_at_least_smagorinsky: bool,
}

pub fn validate_apriori(ctx: &Context) -> Result<Vec<PathBuf>> {
    let (test_bin, test_manifest) = split_paths(Path::new(DATASET_DIR), Split::Test);
    let (tb, tm) = (test_bin.to_string_lossy().into_owned(), test_manifest.to_string_lossy().into_owned());
    ctx.require(&[CLOSURE_WEIGHTS, CLOSURE_META, &tb, &tm])?;
    let (mlp, meta) = load_closure(ctx)?;
    let test = read_split(&ctx.path(&tb))?;
    let scores = apriori_validate(&mlp, &meta.norm_stats, meta.smagorinsky_c, meta.coarse_dx, &test)?;
    let mut reals: Vec<u32> = test.iter().map(|s| s.realization).collect();
    reals.sort_unstable();
    reals.dedup();
    let body = AprioriBody {
        neural_r_at_least_smagorinsky: scores.neural.pearson_r >= scores.smagorinsky.pearson_r,
        scores,
        test_realizations: reals,
    };
    Ok(vec![ctx.write_report(APRIORI_REPORT, "validate apriori", &[], &body)?])
}

fn gen_data_report(ctx: &Context) -> Result<GenDataReport> {
    ctx.require(&[GEN_DATA_REPORT])?;
    Ok(read_report::<GenDataReport>(&ctx.path(GEN_DATA_REPORT))?.report)
}

fn build_closure(
    name: &str,
    mlp: &Mlp<f64>,
    meta: &ClosureMeta,
) -> Result<Option<Box<dyn Closure<f64> + Send>>> {
    Ok(match name {
        "none" => None,
        "smagorinsky" => Some(Box::new(SmagorinskyClosure { c: meta.smagorinsky_c })),
        "neural" => Some(Box::new(NeuralClosure::new(mlp.clone(), meta.norm_stats, meta.n_coarse)?)),
        other => return Err(CliError::Internal(format!("unknown closure {other}"))),
    })
}

pub fn validate_aposteriori(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let gd = gen_data_report(ctx)?;
    let (mlp, meta) = load_closure(ctx)?;
    let real = *gd
        .split_realizations
        .get("test")
        .and_then(|v| v.first())
        .ok_or_else(|| CliError::Internal("gen-data report lists no test realization".into()))? as usize;
    let traj_rel = trajectory_path(real);
    ctx.require(&[&traj_rel])?;
    let (traj, _) = read_trajectory::<f64>(&ctx.path(&traj_rel))?;
    let ap = cfg.aposteriori();
    let truth = truth_reference(&traj, cfg.filter.r, ctx.discard(traj.len()), ap.horizon_frac)?;
    let pool = ctx.pool()?;
    let runs = pool.install(|| {
        ["none", "smagorinsky", "neural"]
            .par_iter()
            .map(|name| -> Result<_> {
                let mut c = build_closure(name, &mlp, &meta)?;
                let c: Option<&mut dyn Closure<f64>> = match c.as_mut() {
                    Some(b) => Some(b.as_mut()),
                    None => None,
                };
                Ok(run_closure(&truth, name, c, &ap)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let report = assemble_report(truth, cfg.filter.r, ap, runs);
    Ok(vec![
        ctx.write_report(
            APOSTERIORI_REPORT,
            "validate aposteriori",
            &[("realization", gd.realizations[real].seed)],
            &json!({ "realization": real, "trajectory": traj_rel, "result": report }),
        )?,
        ctx.write_text(APOSTERIORI_ENERGY, &energy_csv(&report))?,
        ctx.write_text(APOSTERIORI_SPECTRUM, &spectrum_csv(&report))?,
    ])
}

pub fn bench(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let trained = ctx.path(CLOSURE_WEIGHTS).exists() && ctx.path(CLOSURE_META).exists();
    let (mlp, stats) = if trained {
        let (m, meta) = load_closure(ctx)?;
        (m, meta.norm_stats)
    } else {
        let sizes = cfg.mlp().sizes(surrokit::data::STENCIL, 1);
        let m = Mlp::<f64>::init(&sizes, Activation::LeakyRelu, cfg.net.slope, &mut rng::stream(ctx.seed("bench-net"), "init"))?;
        (m, NormStats::identity())
    };
    let seed = ctx.seed("bench-infer");
    let report = bench_infer(&mlp, &stats, cfg.n_coarse(), cfg.validate.bench_repetitions, seed)?;
    Ok(vec![ctx.write_report(
        BENCH_REPORT,
        "bench infer",
        &[("bench", seed)],
        &json!({ "trained_weights": trained, "result": report }),
    )?])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaeMeta {
    pub norm: EventNorm,
    pub latent_dim: usize,
    pub beta_kl: f64,
    pub smoothing: f64,
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub train_events: usize,
}

fn manifest(ctx: &Context, count: usize, seed: u64, source: &str) -> EventManifest {
    EventManifest {
        count,
        parent_mass: ctx.config.events.parent_mass,
        m1: ctx.config.events.m1,
        m2: ctx.config.events.m2,
        seed,
        source: source.to_string(),
    }
}

fn write_event_set(ctx: &Context, rel: &str, events: &[EventRecord], seed: u64, source: &str) -> Result<Vec<PathBuf>> {
    let p = ctx.create(rel)?;
    write_events(events, &manifest(ctx, events.len(), seed, source), &p)?;
    Ok(vec![p.with_extension("json"), p])
}

pub fn train_vae_stage(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let decay = cfg.decay();
    let (train_seed, val_seed) = (ctx.seed("events-train"), ctx.seed("events-val"));
    let train_ev = mc_generate(cfg.events.n, &decay, train_seed)?;
    let val_ev = mc_generate(cfg.events.n_val, &decay, val_seed)?;
    let norm = EventNorm::fit(&train_ev, cfg.data.epsilon_std)?;
    let seed = cfg.vae.seed.unwrap_or_else(|| ctx.seed("train-vae"));
    let (vae, history) = train_vae::<f64>(
        &norm.rows(&train_ev),
        &norm.rows(&val_ev),
        EVENT_DIM,
        &cfg.vae_model(),
        &cfg.vae_training(seed),
    )?;
    let mut written = write_event_set(ctx, MC_TRAIN, &train_ev, train_seed, "mc")?;
    let weights = ctx.create(VAE_WEIGHTS)?;
    save_vae(&vae, &weights)?;
    written.push(weights);
    written.push(ctx.write_text(VAE_HISTORY, &history.to_csv())?);
    let meta = VaeMeta {
        norm,
        latent_dim: vae.latent_dim,
        beta_kl: vae.beta_kl,
        smoothing: cfg.vae.smoothing,
        epochs: history.epochs(),
        best_epoch: history.best_epoch,
        best_val_loss: history.best_epoch.map(|e| history.val_loss[e]),
        train_events: train_ev.len(),
    };
    written.push(ctx.write_report(
        VAE_META,
        "train-vae",
        &[("events_train", train_seed), ("events_val", val_seed), ("train", seed)],
        &meta,
    )?);
    Ok(written)
}

pub fn load_vae_artifacts(ctx: &Context) -> Result<(Vae<f64>, VaeMeta)> {
    ctx.require(&[VAE_WEIGHTS, VAE_META])?;
    let vae = load_vae::<f64>(&ctx.path(VAE_WEIGHTS))?;
    let meta = read_report::<VaeMeta>(&ctx.path(VAE_META))?.report;
    Ok((vae, meta))
}

#[derive(Debug, Serialize)]
struct McReport {
    count: usize,
    max_on_shell_residual: f64,
    max_momentum_residual_rel: f64,
    max_energy_residual_rel: f64,
    isotropy: Option<surrokit::eventgen::IsotropyTest>,
}

pub fn events_sample(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let decay = cfg.decay();
    let seed = ctx.seed("events-truth");
    let events = mc_generate(cfg.events.n_truth, &decay, seed)?;
    let (_, _, p) = decay.kinematics();
    let m = decay.parent_mass;
    let report = McReport {
        count: events.len(),
        max_on_shell_residual: events
            .iter()
            .flat_map(|e| e.on_shell_residuals())
            .fold(0.0, f64::max),
        max_momentum_residual_rel: events.iter().map(momentum_residual).fold(0.0, f64::max) / p.max(f64::MIN_POSITIVE),
        max_energy_residual_rel: events
            .iter()
            .map(|e| surrokit::eventgen::energy_residual(e, m))
            .fold(0.0, f64::max)
            / m,
        isotropy: if events.len() >= 100 { Some(isotropy_test(&events, 20)?) } else { None },
    };
    let mut written = write_event_set(ctx, MC_TRUTH, &events, seed, "mc")?;
    written.push(ctx.write_report(MC_REPORT, "events sample", &[("events_truth", seed)], &report)?);
    Ok(written)
}

pub fn events_generate(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    ctx.require(&[VAE_WEIGHTS, VAE_META, MC_TRAIN])?;
    let (vae, meta) = load_vae_artifacts(ctx)?;
    let (train_ev, _) = read_events(&ctx.path(MC_TRAIN))?;
    let buffer = build_buffer(&vae, &train_ev, &meta.norm)?;
    let (bseed, pseed) = (ctx.seed("events-bvae"), ctx.seed("events-prior"));
    let bvae = bvae_generate(&vae, &buffer, &meta.norm, cfg.events.n_generate, cfg.vae.smoothing, bseed)?;
    let prior = prior_generate(&vae, &meta.norm, cfg.events.n_generate, pseed)?;
    let mut written = write_event_set(ctx, BVAE_EVENTS, &bvae, bseed, "bvae")?;
    written.extend(write_event_set(ctx, PRIOR_EVENTS, &prior, pseed, "prior")?);
    Ok(written)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionComparison {
    pub name: String,
    pub bvae_w1: f64,
    pub prior_w1: f64,
    pub bvae_not_worse: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerativeChecks {
    pub non_degenerate_dimensions: usize,
    pub bvae_not_worse_dimensions: usize,
    pub comparisons: Vec<DimensionComparison>,
    pub mass_peak_relative_error: f64,
    /// Desk-scale threshold for the invariant-mass peak, not a published figure.
    pub mass_peak_tolerance: f64,
    pub noise_reconstruction_ratio: f64,
    /// Desk-scale threshold for the noise-reconstruction ratio, not a published figure.
    pub noise_ratio_threshold: f64,
}

pub fn events_validate(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    ctx.require(&[MC_TRUTH, BVAE_EVENTS, PRIOR_EVENTS, VAE_WEIGHTS, VAE_META])?;
    let (vae, meta) = load_vae_artifacts(ctx)?;
    let (truth, _) = read_events(&ctx.path(MC_TRUTH))?;
    let (bvae, _) = read_events(&ctx.path(BVAE_EVENTS))?;
    let (prior, _) = read_events(&ctx.path(PRIOR_EVENTS))?;
    let bins = cfg.events.bins;
    let seed = ctx.seed("events-report");
    let bvae_report = physics_report(&truth, &bvae, &vae, &meta.norm, bins, seed)?;
    let prior_dims = dimension_reports(&truth, &prior, bins);
    let prior_mass = mass_report(&prior, bvae_report.invariant_mass.parent_mass, bins);
    let comparisons: Vec<DimensionComparison> = bvae_report
        .dimensions
        .iter()
        .zip(&prior_dims)
        .filter_map(|(b, p)| {
            Some(DimensionComparison {
                name: b.name.clone(),
                bvae_w1: b.wasserstein1?,
                prior_w1: p.wasserstein1?,
                bvae_not_worse: b.wasserstein1? <= p.wasserstein1?,
            })
        })
        .collect();
    let checks = GenerativeChecks {
        non_degenerate_dimensions: comparisons.len(),
        bvae_not_worse_dimensions: comparisons.iter().filter(|c| c.bvae_not_worse).count(),
        comparisons,
        mass_peak_relative_error: bvae_report.invariant_mass.peak_relative_error,
        mass_peak_tolerance: 0.02,
        noise_reconstruction_ratio: bvae_report.noise_reconstruction_ratio,
        noise_ratio_threshold: 5.0,
    };
    let body = json!({
        "bvae": bvae_report,
        "prior": { "dimensions": prior_dims, "invariant_mass": prior_mass },
        "checks": checks,
    });
    Ok(vec![
        ctx.write_report(PHYSICS_REPORT, "events validate", &[("events_report", seed)], &body)?,
        ctx.write_text(HISTOGRAMS, &histogram_csv(&truth, &[("bvae", &bvae), ("prior", &prior)], bins))?,
    ])
}

fn energy_table(traj: &Trajectory<f64>) -> String {
    let mut s = String::from("time,energy\n");
    for (t, e) in traj.snapshot_times.iter().zip(traj.energies()) {
        s.push_str(&format!("{t:e},{e:e}\n"));
    }
    s
}

pub fn run_dns(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let seed = ctx.seed("run");
    let field = initial_field(cfg, seed)?;
    let traj = surrokit::burgers::run(&field, cfg.sim.t_end, fine_dt(cfg, &field), None, cfg.sim.snapshot_stride)?;
    let p = ctx.create("runs/dns.sktraj")?;
    write_trajectory(&traj, &p, &sim_sidecar(cfg, seed, json!({ "run": "dns" })))?;
    Ok(vec![p, ctx.write_text("runs/dns_energy.csv", &energy_table(&traj))?])
}

pub fn run_les(ctx: &Context, which: ClosureArg) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let seed = ctx.seed("run");
    let fine = initial_field(cfg, seed)?;
    let coarse = FlowField::new(box_filter(&fine.values, cfg.filter.r)?, cfg.sim.length, cfg.sim.nu)?;
    let mut closure: Option<Box<dyn Closure<f64> + Send>> = match which {
        ClosureArg::None => Some(Box::new(NoClosure)),
        _ => {
            let (mlp, meta) = load_closure(ctx)?;
            build_closure(which.name(), &mlp, &meta)?
        }
    };
    let dt = cfg.validate.cfl_safety * cfl_limit(&coarse);
    let c: Option<&mut dyn Closure<f64>> = match closure.as_mut() {
        Some(b) => Some(b.as_mut()),
        None => None,
    };
    let traj = Solver::default().run(&coarse, cfg.sim.t_end, dt, c, cfg.sim.snapshot_stride)?;
    let energies: Vec<f64> = traj.snapshots.iter().map(|s| energy(s)).collect();
    let window = cfg.validate.window.min(energies.len());
    let stability = if window >= 4 {
        Some(detect_instability(&energies, window, cfg.validate.growth_threshold, cfg.validate.blowup_factor)?)
    } else {
        None
    };
    let name = which.name();
    let p = ctx.create(&format!("runs/les_{name}.sktraj"))?;
    write_trajectory(&traj, &p, &sim_sidecar(cfg, seed, json!({ "run": "les", "closure": name })))?;
    Ok(vec![
        p,
        ctx.write_text(&format!("runs/les_{name}_energy.csv"), &energy_table(&traj))?,
        ctx.write_report(
            &format!("runs/les_{name}.json"),
            "run les",
            &[("run", seed)],
            &json!({ "closure": name, "dt": traj.dt, "snapshots": traj.len(), "stability": stability }),
        )?,
    ])
}
