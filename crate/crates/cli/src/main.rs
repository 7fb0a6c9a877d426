use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ragaudit_core::corpus::load_corpus;
use ragaudit_core::harness::{
    self, contribution_curve, evaluate_run, metrics_table, regroup, run_ablation, sweep_extra_evidence, sweep_table,
    Ablation, Dataset, EvalMetrics, RandomPool,
};
use ragaudit_core::pipeline::{query_id, write_reports};
use ragaudit_core::provider::{HttpProvider, HttpSettings, ENDPOINT_ENV, TOKEN_ENV};
use ragaudit_core::reliability::Rubric;
use ragaudit_core::retrieval::build_index;
use ragaudit_core::stance::{LexicalBaseline, PlantedStances, StanceProvider};
use ragaudit_core::synth::{generate, SynthConfig};
use ragaudit_core::{ErrorKind, ProviderError, PipelineConfig, ResponseLabel, VerificationReport};

const WORKERS_ENV: &str = "RAGAUDIT_WORKERS";

/// Verifies medical RAG answers against a literature corpus.
///
/// Settings resolve as: command-line flag, then environment variable, then
/// the --config file, then the built-in default.
#[derive(Debug, Parser)]
#[command(name = "ragaudit", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML settings file (top-level keys plus a [pipeline] table).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads [env: RAGAUDIT_WORKERS] [default: logical CPUs].
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Reference date for recency scoring, YYYY-MM-DD [default: today].
    #[arg(long, global = true)]
    today: Option<NaiveDate>,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the BM25 index cache for a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Directory receiving index.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify every output in a file and write one report per line.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stance: StanceArgs,
        /// Report file (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Keep per-stage timings in the reports.
        #[arg(long)]
        timings: bool,
    },
    /// Score outputs against their gold labels.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stance: StanceArgs,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        ablation: Option<Ablation>,
        /// Replace the given evidence with a retrieved group.
        #[arg(long, value_enum, default_value_t = Group::Given)]
        group: Group,
        #[arg(long, value_enum, default_value_t = Pool::All)]
        pool: Pool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate across extra-evidence counts and write the contribution curve.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stance: StanceArgs,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,9")]
        m: Vec<usize>,
    },
    /// Run the full method and each ablation.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        stance: StanceArgs,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic benchmark with planted stances.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Preset::Injected)]
        preset: Preset,
        #[arg(long)]
        queries: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// RAG outputs (JSON lines).
    #[arg(long)]
    outputs: PathBuf,
    /// Index cache from `index`; built in memory when absent.
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StanceArgs {
    /// Stance judge [default: planted with --stances, else lexical].
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Planted stance file for the planted provider.
    #[arg(long)]
    stances: Option<PathBuf>,
    /// HTTP judge endpoint [env: RAGAUDIT_STANCE_ENDPOINT].
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Bearer token for the HTTP judge [env: RAGAUDIT_AUTH_TOKEN].
    #[arg(long, env = TOKEN_ENV, hide_env_values = true)]
    auth_token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProviderKind {
    Lexical,
    Planted,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Group {
    Given,
    Finer,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pool {
    All,
    BottomTwelve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Clean,
    Injected,
}

/// Contents of the --config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    today: Option<NaiveDate>,
    workers: Option<usize>,
    provider: Option<ProviderKind>,
    stances: Option<PathBuf>,
    /// Rubric TOML, relative to the config file.
    rubric: Option<PathBuf>,
    http: Option<HttpFile>,
    pipeline: Option<toml::Table>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HttpFile {
    endpoint: Option<String>,
    auth_token: Option<String>,
    timeout_secs: Option<f64>,
    max_in_flight: Option<usize>,
    retries: Option<u32>,
}

/// Failure tagged with the exit status it maps to.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InputError>() {
            return 1;
        }
        if let Some(core) = cause.downcast_ref::<ragaudit_core::Error>() {
            return match core.kind() {
                ErrorKind::Input => 1,
                ErrorKind::Io => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (file, config_dir) = match &cli.global.config {
        Some(path) => {
            require_file("--config", path)?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: FileConfig =
                toml::from_str(&text).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
            (file, path.parent().map(Path::to_owned).unwrap_or_default())
        }
        None => (FileConfig::default(), PathBuf::new()),
    };
    let workers = cli.global.workers.or(file.workers);
    if workers == Some(0) {
        return Err(input_err("--workers must be at least 1"));
    }
    let today = cli
        .global
        .today
        .or(file.today)
        .unwrap_or_else(|| chrono::Local::now().date_naive());
    let ctx = Runner { file, config_dir, today };
    ragaudit_core::par::with_workers(workers, || ctx.dispatch(cli.command))
}

struct Runner {
    file: FileConfig,
    config_dir: PathBuf,
    today: NaiveDate,
}

impl Runner {
    fn dispatch(&self, command: Command) -> anyhow::Result<()> {
        match command {
            Command::Index { corpus, out } => self.index(&corpus, &out),
            Command::Verify {
                data,
                stance,
                out,
                timings,
            } => self.verify(&data, &stance, &out, timings),
            Command::Evaluate {
                data,
                stance,
                out_dir,
                ablation,
                group,
                pool,
                seed,
            } => self.evaluate(&data, &stance, &out_dir, ablation, group, pool, seed),
            Command::Sweep {
                data,
                stance,
                out_dir,
                m,
            } => self.sweep(&data, &stance, &out_dir, &m),
            Command::Ablate {
                data,
                stance,
                out_dir,
                seed,
            } => self.ablate(&data, &stance, &out_dir, seed),
            Command::Synth {
                out_dir,
                seed,
                preset,
                queries,
            } => self.synth(&out_dir, seed, preset, queries),
        }
    }

    /// Defaults overlaid with the file's [pipeline] table and rubric.
    fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let mut config = PipelineConfig::new(self.today);
        if let Some(table) = &self.file.pipeline {
            let mut merged = serde_json::to_value(&config)?;
            merge(&mut merged, serde_json::to_value(table)?);
            config = serde_json::from_value(merged).map_err(|e| input_err(format!("[pipeline]: {e}")))?;
            config.today = self.today;
        }
        if let Some(rubric) = &self.file.rubric {
            config.rubric = Rubric::load(&self.config_dir.join(rubric))?;
        }
        config.validate().map_err(ragaudit_core::Error::from)?;
        Ok(config)
    }

    fn provider(&self, args: &StanceArgs) -> anyhow::Result<Arc<dyn StanceProvider>> {
        let stances = args
            .stances
            .clone()
            .or_else(|| self.file.stances.as_ref().map(|p| self.config_dir.join(p)));
        let kind = args.provider.or(self.file.provider).unwrap_or(if stances.is_some() {
            ProviderKind::Planted
        } else {
            ProviderKind::Lexical
        });
        Ok(match kind {
            ProviderKind::Lexical => Arc::new(LexicalBaseline::default()),
            ProviderKind::Planted => {
                let path = stances.ok_or_else(|| input_err("--provider planted needs --stances"))?;
                require_file("--stances", &path)?;
                Arc::new(PlantedStances::load(&path)?)
            }
            ProviderKind::Http => {
                let http = self.file.http.as_ref();
                let endpoint = args
                    .endpoint
                    .clone()
                    .or_else(|| http.and_then(|h| h.endpoint.clone()))
                    .ok_or_else(|| input_err(format!("--provider http needs --endpoint or {ENDPOINT_ENV}")))?;
                let mut settings = HttpSettings::new(endpoint);
                settings.auth_token = args.auth_token.clone().or_else(|| http.and_then(|h| h.auth_token.clone()));
                if let Some(h) = http {
                    settings.timeout_secs = h.timeout_secs.unwrap_or(settings.timeout_secs);
                    settings.max_in_flight = h.max_in_flight.unwrap_or(settings.max_in_flight);
                    settings.retries = h.retries.unwrap_or(settings.retries);
                }
                Arc::new(HttpProvider::new(settings))
            }
        })
    }

    fn dataset(&self, data: &DataArgs) -> anyhow::Result<Dataset> {
        require_file("--corpus", &data.corpus)?;
        require_file("--outputs", &data.outputs)?;
        if let Some(index) = &data.index {
            if !index.exists() {
                return Err(input_err(format!("--index: {} does not exist", index.display())));
            }
        }
        Ok(Dataset::load(&data.corpus, &data.outputs, data.index.as_deref(), self.today)?)
    }

    fn index(&self, corpus: &Path, out: &Path) -> anyhow::Result<()> {
        require_file("--corpus", corpus)?;
        let corpus = load_corpus(corpus, self.today).map_err(ragaudit_core::Error::from)?;
        let index = build_index(&corpus).map_err(ragaudit_core::Error::from)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = index.save_dir(out).map_err(ragaudit_core::Error::from)?;
        println!("indexed {} articles -> {}", index.doc_count(), path.display());
        Ok(())
    }

    fn verify(&self, data: &DataArgs, stance: &StanceArgs, out: &Path, timings: bool) -> anyhow::Result<()> {
        let dataset = self.dataset(data)?;
        let config = self.pipeline_config()?;
        let reports = harness::run_dataset(&dataset, &config, self.provider(stance)?)?;
        let reports = strip(reports, timings);
        write_out(out, |p| Ok(write_reports(p, &reports)?))?;
        for (i, (output, report)) in dataset.outputs.iter().zip(&reports).enumerate() {
            let flag = if report.degraded { " (degraded)" } else { "" };
            println!("{}\t{}{flag}", query_id(output, i), label_name(report.response_label));
        }
        let incorrect = reports
            .iter()
            .filter(|r| r.response_label == ResponseLabel::Incorrect)
            .count();
        println!("{} verified, {incorrect} incorrect -> {}", reports.len(), out.display());
        degraded_check(reports.iter().filter(|r| r.degraded).count())
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        data: &DataArgs,
        stance: &StanceArgs,
        out_dir: &Path,
        ablation: Option<Ablation>,
        group: Group,
        pool: Pool,
        seed: u64,
    ) -> anyhow::Result<()> {
        let mut dataset = self.dataset(data)?;
        let base = self.pipeline_config()?;
        let config = match ablation {
            Some(a) => a.apply(&base, seed),
            None => base,
        };
        if group != Group::Given {
            let pool = match pool {
                Pool::All => RandomPool::All,
                Pool::BottomTwelve => RandomPool::BottomTwelve,
            };
            let (finer, random) = regroup(&dataset, &config, seed, pool)?;
            dataset = dataset.with_outputs(if group == Group::Finer { finer } else { random });
        }
        let provider = self.provider(stance)?;
        let fingerprint = harness::fingerprint(&dataset, &config, provider.clone())?;
        let (metrics, reports) = evaluate_run(&dataset, &config, provider)?;
        let name = ablation.map_or_else(|| "full".to_owned(), |a| a.to_string());
        let rows = vec![(name, metrics)];
        create_dir(out_dir)?;
        let reports = strip(reports, false);
        write_out(&out_dir.join("reports.jsonl"), |p| Ok(write_reports(p, &reports)?))?;
        write_text(&out_dir.join("metrics.tsv"), &metrics_table(&rows, Some(seed), &fingerprint))?;
        print_metrics(&rows);
        println!("wrote {}", out_dir.display());
        degraded_check(reports.iter().filter(|r| r.degraded).count())
    }

    fn sweep(&self, data: &DataArgs, stance: &StanceArgs, out_dir: &Path, m: &[usize]) -> anyhow::Result<()> {
        if m.is_empty() {
            return Err(input_err("--m needs at least one value"));
        }
        let dataset = self.dataset(data)?;
        let config = self.pipeline_config()?;
        let provider = self.provider(stance)?;
        let fingerprint = harness::fingerprint(&dataset, &config, provider.clone())?;
        let rows = sweep_extra_evidence(&dataset, &config, provider, m)?;
        create_dir(out_dir)?;
        write_text(&out_dir.join("sweep.tsv"), &sweep_table(&rows, None, &fingerprint))?;
        write_text(
            &out_dir.join("contribution.csv"),
            &contribution_curve(&rows, None, &fingerprint),
        )?;
        println!("m\taccuracy\tcontribution");
        for r in &rows {
            let ratio = r.contribution_ratio.map_or("NA".to_owned(), |v| format!("{v:.3}"));
            println!("{}\t{:.3}\t{ratio}", r.extra_m, r.metrics.accuracy);
        }
        println!("wrote {}", out_dir.display());
        degraded_check(rows.iter().map(|r| r.degraded).sum())
    }

    fn ablate(&self, data: &DataArgs, stance: &StanceArgs, out_dir: &Path, seed: u64) -> anyhow::Result<()> {
        let dataset = self.dataset(data)?;
        let config = self.pipeline_config()?;
        let provider = self.provider(stance)?;
        let fingerprint = harness::fingerprint(&dataset, &config, provider.clone())?;
        let mut degraded = 0;
        let mut tally = |(m, reports): (EvalMetrics, Vec<VerificationReport>)| {
            degraded += reports.iter().filter(|r| r.degraded).count();
            m
        };
        let mut rows = vec![("full".to_owned(), tally(evaluate_run(&dataset, &config, provider.clone())?))];
        for a in Ablation::ALL {
            rows.push((a.to_string(), tally(run_ablation(a, &dataset, &config, provider.clone(), seed)?)));
        }
        create_dir(out_dir)?;
        write_text(&out_dir.join("ablations.tsv"), &metrics_table(&rows, Some(seed), &fingerprint))?;
        print_metrics(&rows);
        println!("wrote {}", out_dir.display());
        degraded_check(degraded)
    }

    fn synth(&self, out_dir: &Path, seed: u64, preset: Preset, queries: Option<usize>) -> anyhow::Result<()> {
        let mut config = match preset {
            Preset::Clean => SynthConfig::clean(seed, self.today),
            Preset::Injected => SynthConfig::injected(seed, self.today),
        };
        if let Some(q) = queries {
            if q == 0 {
                bail!(InputError("--queries must be at least 1".into()));
            }
            config.queries = q;
        }
        let synth = generate(&config)?;
        create_dir(out_dir)?;
        let paths = synth.write(out_dir)?;
        let incorrect = synth.outputs.iter().filter(|o| o.gold_label == Some(false)).count();
        println!(
            "{} articles, {} queries ({incorrect} gold-incorrect)",
            synth.corpus.len(),
            synth.outputs.len()
        );
        for p in paths {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

/// Outputs are written first; a run with failed provider calls still exits 2.
fn degraded_check(degraded: usize) -> anyhow::Result<()> {
    if degraded == 0 {
        return Ok(());
    }
    Err(ragaudit_core::Error::Provider(ProviderError::Unavailable(format!(
        "{degraded} report(s) degraded by stance provider failures"
    )))
    .into())
}

fn merge(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn require_file(flag: &str, path: &Path) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(input_err(format!("{flag}: {} is not a readable file", path.display())))
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_out(path: &Path, f: impl FnOnce(&Path) -> anyhow::Result<()>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    f(path)
}

fn strip(reports: Vec<VerificationReport>, timings: bool) -> Vec<VerificationReport> {
    if timings {
        reports
    } else {
        reports.into_iter().map(VerificationReport::without_timings).collect()
    }
}

fn label_name(label: ResponseLabel) -> &'static str {
    match label {
        ResponseLabel::Correct => "correct",
        ResponseLabel::Incorrect => "incorrect",
    }
}

fn print_metrics(rows: &[(String, EvalMetrics)]) {
    let opt = |x: Option<f64>| x.map_or("NA".to_owned(), |v| format!("{v:.3}"));
    println!("run\taccuracy\trecall\tspecificity");
    for (name, m) in rows {
        println!("{name}\t{:.3}\t{}\t{}", m.accuracy, opt(m.recall), opt(m.specificity));
    }
}
