//! Batch front end for cascade forecasting: simulate corpora, fit the
//! sampler, forecast held-out cascades, score the comparison models, and
//! run descriptive statistics — all from one reproducible configuration.
//!
//! Every run is deterministic given its settings and seed; artifacts are
//! CSV files that differ across reruns only in the timestamp comment on
//! the first line. Set `CASCADECAST_LOG=debug` (or any `env_logger`
//! filter) for progress detail.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cascadecast::analysis;
use cascadecast::benchmarks;
use cascadecast::data::{load_dataset, save_cascades, Dataset, Role};
use cascadecast::mcmc::{diagnostics, run_chains, ModelKind, PosteriorSamples, SamplerConfig};
use cascadecast::model::{
    default_follower_sampler, simulate_cascade, GlobalParams, Hyperpriors, DEFAULT_MAX_NODES,
};
use cascadecast::predict;
use cascadecast::report::{self, ComparisonRow, ForecastRow, MapeRow};

const DEFAULT_FRACTIONS: [f64; 7] = [0.10, 0.25, 0.40, 0.50, 0.75, 0.90, 1.00];
const ALL_BENCHMARKS: [&str; 6] =
    ["follower_regression", "szabo", "dynamic_poisson", "naive", "full", "poisson"];

#[derive(Parser)]
#[command(name = "cascadecast", version, about = "Forecast final retweet cascade sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic cascades from the generative model.
    Simulate(ConfigArgs),
    /// Fit the sampler and dump posterior samples with diagnostics.
    Fit(ConfigArgs),
    /// Forecast held-out cascades at each observation fraction.
    Predict(ConfigArgs),
    /// Score the comparison models across observation fractions.
    Bench(ConfigArgs),
    /// Descriptive per-tweet and corpus statistics.
    Eda(ConfigArgs),
    /// Recompute convergence diagnostics from a samples CSV.
    Diag(ConfigArgs),
}

/// Every configuration key as an optional flag. Precedence: flag over
/// config-file entry over built-in default. Keys irrelevant to a
/// subcommand are ignored.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Plain-text config file of `key = value` lines (same keys as the
    /// flags below).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cascade file (JSON-Lines); for `diag`, a samples CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory artifacts are written to.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of MCMC chains.
    #[arg(long)]
    chains: Option<u64>,
    /// Sweeps per chain, burn-in included.
    #[arg(long)]
    iters: Option<u64>,
    /// Sweeps discarded from the front of each chain.
    #[arg(long)]
    burnin: Option<u64>,
    /// Keep every k-th sweep after burn-in.
    #[arg(long)]
    thinning: Option<u64>,
    /// Observation fraction used by `fit`.
    #[arg(long)]
    fraction: Option<f64>,
    /// Observation fractions for `predict` and `bench`.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Sampler flavor: `full` or `poisson` (alias `strawman`).
    #[arg(long)]
    model: Option<String>,
    /// Worker threads for chain/tweet/vertex parallelism (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed of the training/held-out split.
    #[arg(long)]
    partition_seed: Option<u64>,
    /// Number of cascades `simulate` draws.
    #[arg(long)]
    n: Option<usize>,
    /// Comparators `bench` scores (comma-separated subset of
    /// follower_regression, szabo, dynamic_poisson, naive, full, poisson).
    #[arg(long, value_delimiter = ',')]
    benchmarks: Option<Vec<String>>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
struct RunConfig {
    input: Option<PathBuf>,
    out: PathBuf,
    seed: u64,
    chains: u64,
    iters: u64,
    burnin: u64,
    thinning: u64,
    fraction: f64,
    fractions: Vec<f64>,
    model: ModelKind,
    workers: usize,
    partition_seed: u64,
    n: usize,
    benchmarks: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out: PathBuf::from("out"),
            seed: 0,
            chains: 3,
            iters: 3000,
            burnin: 1000,
            thinning: 1,
            fraction: 0.5,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            model: ModelKind::Full,
            workers: 0,
            partition_seed: 1,
            n: 40,
            benchmarks: ALL_BENCHMARKS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn parse_model(value: &str) -> Result<ModelKind> {
    match value {
        "full" => Ok(ModelKind::Full),
        "poisson" | "strawman" => Ok(ModelKind::Poisson),
        other => bail!("unknown model '{other}' (expected full, poisson, or strawman)"),
    }
}

fn parse_fractions(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        bail!("fractions list is empty");
    }
    for &f in values {
        if !(f > 0.0 && f <= 1.0) {
            bail!("observation fraction {f} is outside (0, 1]");
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

fn parse_benchmarks(values: &[String]) -> Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for name in values {
        if !ALL_BENCHMARKS.contains(&name.as_str()) {
            bail!(
                "unknown comparator '{name}' (expected one of {})",
                ALL_BENCHMARKS.join(", ")
            );
        }
        set.insert(name.clone());
    }
    if set.is_empty() {
        bail!("comparator list is empty");
    }
    Ok(set)
}

impl RunConfig {
    /// Apply one config-file entry.
    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_err = |what: &str| format!("config key '{key}': invalid {what} '{value}'");
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = value.parse().with_context(|| parse_err("integer"))?,
            "chains" => self.chains = value.parse().with_context(|| parse_err("integer"))?,
            "iters" => self.iters = value.parse().with_context(|| parse_err("integer"))?,
            "burnin" => self.burnin = value.parse().with_context(|| parse_err("integer"))?,
            "thinning" => self.thinning = value.parse().with_context(|| parse_err("integer"))?,
            "fraction" => {
                self.fraction = value.parse().with_context(|| parse_err("number"))?;
            }
            "fractions" => {
                let parsed: Vec<f64> = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| parse_err("number list"))?;
                self.fractions = parse_fractions(&parsed)?;
            }
            "model" => self.model = parse_model(value)?,
            "workers" => self.workers = value.parse().with_context(|| parse_err("integer"))?,
            "partition_seed" => {
                self.partition_seed = value.parse().with_context(|| parse_err("integer"))?;
            }
            "n" => self.n = value.parse().with_context(|| parse_err("integer"))?,
            "benchmarks" => {
                let names: Vec<String> =
                    value.split(',').map(|v| v.trim().to_string()).collect();
                self.benchmarks = parse_benchmarks(&names)?;
            }
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Defaults, then the config file, then the flags.
    fn resolve(args: &ConfigArgs) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').with_context(|| {
                    format!("{} line {}: expected 'key = value'", path.display(), i + 1)
                })?;
                cfg.apply(key.trim(), value.trim())
                    .with_context(|| format!("{} line {}", path.display(), i + 1))?;
            }
        }
        if let Some(v) = &args.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &args.out {
            cfg.out = v.clone();
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.chains {
            cfg.chains = v;
        }
        if let Some(v) = args.iters {
            cfg.iters = v;
        }
        if let Some(v) = args.burnin {
            cfg.burnin = v;
        }
        if let Some(v) = args.thinning {
            cfg.thinning = v;
        }
        if let Some(v) = args.fraction {
            cfg.fraction = v;
        }
        if let Some(v) = &args.fractions {
            cfg.fractions = parse_fractions(v)?;
        }
        if let Some(v) = &args.model {
            cfg.model = parse_model(v)?;
        }
        if let Some(v) = args.workers {
            cfg.workers = v;
        }
        if let Some(v) = args.partition_seed {
            cfg.partition_seed = v;
        }
        if let Some(v) = args.n {
            cfg.n = v;
        }
        if let Some(v) = &args.benchmarks {
            cfg.benchmarks = parse_benchmarks(v)?;
        }
        if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
            bail!("observation fraction {} is outside (0, 1]", cfg.fraction);
        }
        Ok(cfg)
    }

    fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            n_iterations: self.iters,
            burn_in: self.burnin,
            n_chains: self.chains,
            thinning: self.thinning,
            seed: self.seed,
            model: self.model,
            ..SamplerConfig::default()
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))
    }

    fn input_path(&self) -> Result<&Path> {
        self.input.as_deref().context("no input file (pass --input or set it in the config)")
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CASCADECAST_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let (Command::Simulate(args)
    | Command::Fit(args)
    | Command::Predict(args)
    | Command::Bench(args)
    | Command::Eda(args)
    | Command::Diag(args)) = &cli.command;
    let cfg = RunConfig::resolve(args)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Fit(_) => cmd_fit(&cfg),
        Command::Predict(_) => cmd_predict(&cfg),
        Command::Bench(_) => cmd_bench(&cfg),
        Command::Eda(_) => cmd_eda(&cfg),
        Command::Diag(_) => cmd_diag(&cfg),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let globals = GlobalParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut graphs = Vec::with_capacity(cfg.n);
    let mut truncated = 0usize;
    for i in 0..cfg.n {
        let sim = simulate_cascade(
            format!("sim{i:04}"),
            &globals,
            DEFAULT_MAX_NODES,
            &mut default_follower_sampler,
            &mut rng,
        )?;
        truncated += sim.truncated as usize;
        graphs.push(sim.graph);
    }
    let cascades_path = cfg.out_path("cascades.jsonl");
    save_cascades(&graphs, &cascades_path)?;
    let sidecar_path = cfg.out_path("simulation.json");
    report::save(&sidecar_path, |w| {
        report::write_simulation_sidecar(w, &globals, &Hyperpriors::default(), cfg.seed, cfg.n)
    })?;
    println!(
        "wrote {} cascades ({} truncated) to {}",
        graphs.len(),
        truncated,
        cascades_path.display()
    );
    println!("wrote generating parameters to {}", sidecar_path.display());
    Ok(())
}

/// Load, validate, and split a corpus; cascades without any retweet can
/// neither be partially observed nor scored and are dropped up front.
fn prepare_corpus(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.input_path()?;
    let loaded = load_dataset(path)?;
    let before = loaded.len();
    let graphs: Vec<_> = loaded
        .cascades
        .into_iter()
        .filter(|g| g.total_retweets() >= 1)
        .collect();
    let dropped = before - graphs.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} cascades without retweets");
    }
    let mut ds = Dataset::from_graphs(graphs);
    ds.derive_all()?;
    ds.partition(cfg.partition_seed)?;
    log::info!(
        "{} training / {} held-out cascades",
        ds.indices(Role::Training).len(),
        ds.indices(Role::Prediction).len()
    );
    Ok(ds)
}

fn write_fit_artifacts(cfg: &RunConfig, samples: &PosteriorSamples) -> Result<()> {
    let samples_path = cfg.out_path("samples.csv");
    report::save(&samples_path, |w| report::write_samples(w, samples))?;
    let acceptance_path = cfg.out_path("acceptance.csv");
    report::save(&acceptance_path, |w| report::write_acceptance(w, samples))?;
    let rhat_path = cfg.out_path("rhat.csv");
    report::save(&rhat_path, |w| report::write_rhat(w, samples))?;
    println!("wrote {}", samples_path.display());
    println!("wrote {}", acceptance_path.display());
    println!("wrote {}", rhat_path.display());
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let mut ds = prepare_corpus(cfg)?;
    ds.attach_observations(cfg.fraction)?;
    let samples = run_chains(&ds, &cfg.sampler_config(), &Hyperpriors::default())?;
    write_fit_artifacts(cfg, &samples)?;
    if samples.chains.len() >= 2 {
        for (name, rhat) in samples.global_rhat()? {
            println!("rhat {name} = {rhat:.4}");
        }
    } else {
        println!("rhat unavailable (single chain)");
    }
    println!(
        "constraint violations: {}; avg loglik {:.3}; dic {:.3}",
        samples.total_violations(),
        samples.fit.avg_loglik(),
        samples.fit.dic()
    );
    Ok(())
}

fn forecast_rows(samples: &PosteriorSamples, ds: &Dataset, fraction: f64) -> Result<Vec<ForecastRow>> {
    let mut rows = Vec::new();
    for idx in ds.indices(Role::Prediction) {
        let obs = ds.observations[idx]
            .as_ref()
            .context("prediction cascade lost its observation window")?;
        let summary = predict::predictive_total(samples, obs, 0.90)?;
        rows.push(ForecastRow {
            tweet_id: obs.tweet_id.clone(),
            fraction,
            t_x_seconds: obs.observation_time,
            median: summary.median,
            lo90: summary.lo,
            hi90: summary.hi,
            true_m: ds.cascades[idx].total_retweets(),
        });
    }
    Ok(rows)
}

fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let mut ds = prepare_corpus(cfg)?;
    for &fraction in &cfg.fractions {
        ds.attach_observations(fraction)?;
        log::info!("fitting at observation fraction {fraction}");
        let samples = run_chains(&ds, &cfg.sampler_config(), &Hyperpriors::default())?;
        let rows = forecast_rows(&samples, &ds, fraction)?;
        let path = cfg.out_path(&format!("forecast_{fraction:.2}.csv"));
        report::save(&path, |w| report::write_forecast(w, &rows))?;
        println!("wrote {} ({} forecasts)", path.display(), rows.len());
    }
    Ok(())
}

fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let mut ds = prepare_corpus(cfg)?;
    let selected = |name: &str| cfg.benchmarks.contains(name);

    // the cheap baselines fit once on the training half
    let follower = selected("follower_regression")
        .then(|| benchmarks::fit_follower_regression(&ds))
        .transpose()?;
    let szabo = selected("szabo").then(|| benchmarks::fit_szabo(&ds)).transpose()?;
    let dp = selected("dynamic_poisson").then(|| benchmarks::fit_dynamic_poisson(&ds)).transpose()?;
    if let Some(dp) = &dp {
        if dp.boundary {
            log::warn!("decaying-rate fit hit the edge of its decay range; forecasts may be poor");
        }
    }

    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for &fraction in &cfg.fractions {
        ds.attach_observations(fraction)?;
        for idx in ds.indices(Role::Prediction) {
            let g = &ds.cascades[idx];
            let obs = ds.observations[idx]
                .as_ref()
                .context("prediction cascade lost its observation window")?;
            let true_m = g.total_retweets();
            let m_obs = obs.observed_retweets();
            let mut push = |model: &'static str, prediction: f64| -> Result<()> {
                rows.push(benchmarks::BenchmarkRow {
                    model,
                    tweet_id: g.tweet_id.clone(),
                    fraction,
                    m_obs,
                    prediction,
                    true_m,
                    ape: benchmarks::ape(prediction, true_m)?,
                });
                Ok(())
            };
            if let Some(f) = &follower {
                push("follower_regression", f.predict(g.root_followers.max(1))?)?;
            }
            if let Some(s) = &szabo {
                let horizon = if fraction >= 1.0 { f64::INFINITY } else { obs.observation_time };
                push("szabo", s.predict(m_obs, horizon))?;
            }
            if let Some(d) = &dp {
                push("dynamic_poisson", d.predict_final_from_prefix(m_obs, obs.observation_time))?;
            }
            if selected("naive") {
                push("naive", benchmarks::naive_predict(m_obs))?;
            }
        }
        for model in [ModelKind::Full, ModelKind::Poisson] {
            if !selected(model.name()) {
                continue;
            }
            log::info!("fitting {} sampler at fraction {fraction}", model.name());
            let sc = SamplerConfig { model, ..cfg.sampler_config() };
            let samples = run_chains(&ds, &sc, &Hyperpriors::default())?;
            rows.extend(benchmarks::sampler_rows(&samples, &ds)?);
            comparisons.push(ComparisonRow {
                model: model.name().to_string(),
                fraction,
                avg_loglik: benchmarks::avg_loglik(&samples),
                dic: benchmarks::dic(&samples),
            });
        }
    }

    let bench_path = cfg.out_path("benchmark.csv");
    report::save(&bench_path, |w| report::write_benchmark(w, &rows))?;
    println!("wrote {} ({} scored forecasts)", bench_path.display(), rows.len());

    let mape_rows: Vec<MapeRow> = benchmarks::mape_table(&rows)
        .into_iter()
        .map(|(model, fraction, mape_total, mape_remaining)| MapeRow {
            model,
            fraction,
            mape_total,
            mape_remaining,
        })
        .collect();
    let mape_path = cfg.out_path("mape.csv");
    report::save(&mape_path, |w| report::write_mape(w, &mape_rows))?;
    println!("wrote {}", mape_path.display());

    if !comparisons.is_empty() {
        let cmp_path = cfg.out_path("comparison.csv");
        report::save(&cmp_path, |w| report::write_comparison(w, &comparisons))?;
        println!("wrote {}", cmp_path.display());
    }
    Ok(())
}

fn cmd_eda(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let mut ds = load_dataset(cfg.input_path()?)?;
    ds.derive_all()?;
    let report_data = analysis::eda_report(&ds)?;

    let tweets_path = cfg.out_path("eda_tweets.csv");
    report::save(&tweets_path, |w| report::write_eda_tweets(w, &report_data))?;
    let corpus_path = cfg.out_path("eda_corpus.csv");
    report::save(&corpus_path, |w| report::write_eda_corpus(w, &report_data))?;

    let mut reactions = Vec::new();
    for g in &ds.cascades {
        reactions.extend_from_slice(&g.structure()?.reaction_times[1..]);
    }
    let ccdf = analysis::empirical_ccdf(&reactions);
    let ccdf_path = cfg.out_path("ccdf.csv");
    report::save(&ccdf_path, |w| {
        report::write_ccdf(w, &ccdf, report_data.mean_alpha_ml, report_data.mean_tau_ml)
    })?;

    println!("wrote {}", tweets_path.display());
    println!("wrote {}", corpus_path.display());
    println!("wrote {} ({} reaction times)", ccdf_path.display(), reactions.len());
    println!(
        "mean alpha_ml {:.3} (sd {:.3}), mean tau_ml {:.3}, {} depth-1 vs {} deeper retweeters",
        report_data.mean_alpha_ml,
        report_data.sd_alpha_ml,
        report_data.mean_tau_ml,
        report_data.depth.depth_one,
        report_data.depth.deeper
    );
    Ok(())
}

fn cmd_diag(cfg: &RunConfig) -> Result<()> {
    cfg.ensure_out()?;
    let path = cfg.input_path()?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = report::read_samples(file)?;
    let mut table = Vec::new();
    for name in report::global_parameter_names(&rows) {
        let traces = report::traces_by_chain(&rows, &name);
        let rhat = if traces.len() < 2 {
            None
        } else {
            Some(diagnostics::gelman_rubin(&traces)?)
        };
        match rhat {
            Some(v) => println!("rhat {name} = {v:.4}"),
            None => println!("rhat {name} unavailable (single chain)"),
        }
        table.push((name, rhat));
    }
    if table.is_empty() {
        bail!("no corpus-level parameters found in {}", path.display());
    }
    let rhat_path = cfg.out_path("rhat.csv");
    report::save(&rhat_path, |w| report::write_rhat_table(w, &table))?;
    println!("wrote {}", rhat_path.display());
    Ok(())
}
