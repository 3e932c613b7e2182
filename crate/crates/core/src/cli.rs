//! Command-line front end.
//!
//! Every stage reads its inputs from files, writes its outputs plus a
//! `manifest-<stage>.json` into the `--output` directory, and exits with a
//! status that classifies failures:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 2    | bad arguments                             |
//! | 3    | unparseable input or invariant violation  |
//! | 4    | K-Access did not converge                 |
//! | 5    | missing input or other I/O failure        |
//!
//! Errors are printed to stderr as one JSON object.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::access::DEFAULT_FLOOR;
use crate::cluster::{k_access_best_of, restart_seed, ClusteringResult};
use crate::error::{Error, Result};
use crate::explore::{compare_initializations, InitialStateSet, DEFAULT_T0};
use crate::io::{self, CoverageSummary};
use crate::pose::{probe_times, sample_static_states, matrix_from_times, ProbeProtocol, SettlingEnvironment};
use crate::quality::{quality_index, sweep_k, QualityReport, DEFAULT_ALPHA, DEFAULT_SEEDS_PER_K};
use crate::synthetic::{generate_planted, PlantedSpec};
use crate::toy_rl::{
    episodes_to_threshold, low_depth_goal, random_init_set, EvalSchedule, LearnerConfig, RecoveryTask,
    TaskParams, ThresholdRun, BENCHMARK_EPISODES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_ARGS: i32 = 2;
pub const EXIT_INVALID_INPUT: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "kaccess", version, about = "Directed accessibility clustering pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted-partition matrix and its ground-truth labels.
    Generate(Options),
    /// Sample stable states from a random settling environment.
    Sample(Options),
    /// Probe all state pairs and write the accessibility matrix.
    Estimate(Options),
    /// Run K-Access for one k and score the result.
    Cluster(Options),
    /// Sweep k and report the quality index for each value.
    Sweep(Options),
    /// Compare exploration coverage of centroids against random sets.
    Evaluate(Options),
    /// Train the tabular learner from centroid and random initial sets.
    Train(Options),
    /// Turn a quality report into a chord-diagram edge list.
    ExportChord(Options),
    /// Run every stage from one configuration file.
    Pipeline(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Settling environment: sample, then estimate.
    Pose,
    /// Planted generator.
    Planted,
}

/// Flags shared by all stages. A TOML file given with `--config` may set any
/// of them using the same kebab-case names; flags on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Stage input file (matrix, states, or quality report)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory, created if needed
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// TOML file with defaults for any of these flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Singleton penalty [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exploration time budget in seconds [default: 3]
    #[arg(long)]
    pub t0: Option<f64>,
    /// Accessibility floor [default: 1e-8]
    #[arg(long)]
    pub floor: Option<f64>,
    /// Probe time cap in seconds [default: 3]
    #[arg(long)]
    pub time_cap: Option<f64>,
    /// Restarts per k [default: 5]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Chord edges at or above this are highlighted [default: 0.15]
    #[arg(long)]
    pub hi: Option<f64>,
    /// Chord edges at or below this are dropped [default: 0.05]
    #[arg(long)]
    pub lo: Option<f64>,

    /// Planted samples [default: 100]
    #[arg(long, help_heading = "Generate")]
    pub n: Option<usize>,
    /// Planted blocks [default: 5]
    #[arg(long, help_heading = "Generate")]
    pub k_star: Option<usize>,
    /// Cross-block time penalty in seconds [default: 3]
    #[arg(long, help_heading = "Generate")]
    pub hop_cost: Option<f64>,

    /// Interior breakpoints of the random potential [default: 40]
    #[arg(long, help_heading = "Sample")]
    pub breakpoints: Option<usize>,
    /// Drop-and-settle trials [default: 1000]
    #[arg(long, help_heading = "Sample")]
    pub count: Option<usize>,
    /// Keep at most this many distinct states
    #[arg(long, help_heading = "Sample")]
    pub max_states: Option<usize>,

    /// Environment JSON [default: environment.json beside --input]
    #[arg(long, help_heading = "Estimate")]
    pub env: Option<PathBuf>,

    /// Clustering JSON whose centroids form the initial set
    #[arg(long, help_heading = "Evaluate / train")]
    pub clustering: Option<PathBuf>,
    /// Random comparison sets [default: 5]
    #[arg(long, help_heading = "Evaluate / train")]
    pub random_sets: Option<usize>,
    /// Goal sample indices, comma separated
    #[arg(long, value_delimiter = ',', help_heading = "Evaluate / train")]
    pub goal: Option<Vec<usize>>,
    /// Pipeline on pose data: goal = this many lowest-potential states [default: 5]
    #[arg(long, help_heading = "Evaluate / train")]
    pub goal_count: Option<usize>,
    /// Training episode budget per arm [default: 3000]
    #[arg(long, help_heading = "Evaluate / train")]
    pub episodes: Option<usize>,

    /// Where the pipeline's matrix comes from [default: pose]
    #[arg(long, value_enum, help_heading = "Pipeline")]
    pub source: Option<Source>,
}

macro_rules! merge_fields {
    ($cli:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.take(); } )*
    };
}

impl Options {
    /// Fills unset flags from the `--config` file, if any. Relative paths in
    /// the file are resolved against the file's directory.
    pub fn resolve(mut self) -> Result<Self> {
        let Some(config) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&config).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(config.clone()),
            _ => Error::Io(e),
        })?;
        let mut file: Options = toml::from_str(&text)
            .map_err(|e| Error::parse(config.display().to_string(), e.to_string()))?;
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        for p in [&mut file.input, &mut file.output, &mut file.env, &mut file.clustering] {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        }
        merge_fields!(self, file;
            input, output, seed, k, k_min, k_max, alpha, t0, floor, time_cap, restarts, hi, lo,
            n, k_star, hop_cost, breakpoints, count, max_states, env, clustering, random_sets,
            goal, goal_count, episodes, source);
        Ok(self)
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--input is required".into()))
    }

    fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--output is required".into()))
    }

    fn clustering(&self) -> Result<&Path> {
        self.clustering
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--clustering is required".into()))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn floor(&self) -> f64 {
        self.floor.unwrap_or(DEFAULT_FLOOR)
    }
}

#[derive(Debug, Serialize)]
struct FileHash {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    stage: &'a str,
    version: &'a str,
    seed: Option<u64>,
    parameters: serde_json::Value,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// Collects input and output files for one stage's manifest.
struct Stage {
    name: &'static str,
    dir: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<String>,
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

impl Stage {
    fn new(name: &'static str, opts: &Options) -> Result<Self> {
        let dir = opts.output()?.to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            name,
            dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash {
            name: file_name(path),
            sha256: io::sha256_file(path)?,
        });
        Ok(())
    }

    fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(self, seed: Option<u64>, parameters: impl Serialize) -> Result<()> {
        let outputs = self
            .outputs
            .iter()
            .map(|name| {
                Ok(FileHash {
                    name: name.clone(),
                    sha256: io::sha256_file(&self.dir.join(name))?,
                })
            })
            .collect::<Result<_>>()?;
        let manifest = Manifest {
            stage: self.name,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            parameters: serde_json::to_value(parameters)?,
            inputs: self.inputs,
            outputs,
        };
        io::write_json(&self.dir.join(format!("manifest-{}.json", self.name)), &manifest)
    }
}

fn planted_spec(opts: &Options) -> PlantedSpec {
    let mut spec = PlantedSpec::new(opts.n.unwrap_or(100), opts.k_star.unwrap_or(5), opts.seed());
    spec.floor = opts.floor();
    if let Some(h) = opts.hop_cost {
        spec.hop_cost = h;
    }
    spec
}

pub fn cmd_generate(opts: &Options) -> Result<()> {
    let spec = planted_spec(opts);
    let data = generate_planted(&spec)?;
    let mut stage = Stage::new("generate", opts)?;
    io::write_matrix_csv(&stage.output("matrix.csv"), &data.matrix)?;
    io::write_labels_csv(&stage.output("labels.csv"), &data.labels)?;
    stage.finish(Some(spec.seed), spec)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SampleParams {
    breakpoints: usize,
    count: usize,
    max_states: Option<usize>,
    closeness_tol: f64,
    found: usize,
}

pub fn cmd_sample(opts: &Options) -> Result<()> {
    let seed = opts.seed();
    let breakpoints = opts.breakpoints.unwrap_or(40);
    let count = opts.count.unwrap_or(1000);
    let protocol = ProbeProtocol::default();
    let env = SettlingEnvironment::random(breakpoints, seed)?;
    let mut states = sample_static_states(&env, count, seed, protocol.closeness_tol)?;
    let found = states.len();
    if let Some(m) = opts.max_states {
        states.truncate(m);
    }
    let mut stage = Stage::new("sample", opts)?;
    io::write_json(&stage.output("environment.json"), &env)?;
    io::write_states_csv(&stage.output("states.csv"), &states)?;
    let params = SampleParams {
        breakpoints,
        count,
        max_states: opts.max_states,
        closeness_tol: protocol.closeness_tol,
        found,
    };
    stage.finish(Some(seed), params)
}

pub fn cmd_estimate(opts: &Options) -> Result<()> {
    let states_path = opts.input()?;
    let env_path = match &opts.env {
        Some(p) => p.clone(),
        None => states_path.with_file_name("environment.json"),
    };
    let env: SettlingEnvironment = io::read_json(&env_path)?;
    let states = io::read_states_csv(states_path)?;
    let protocol = ProbeProtocol {
        time_cap: opts.time_cap.unwrap_or(3.0),
        floor: opts.floor(),
        ..ProbeProtocol::default()
    };
    let times = probe_times(&env, &states, &protocol)?;
    let matrix = matrix_from_times(states.len(), &times, protocol.floor)?;
    let mut stage = Stage::new("estimate", opts)?;
    stage.input(states_path)?;
    stage.input(&env_path)?;
    io::write_matrix_csv(&stage.output("matrix.csv"), &matrix)?;
    io::write_probe_log(&stage.output("probes.jsonl"), states.len(), &times)?;
    stage.finish(None, protocol)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClusterParams {
    k: usize,
    restarts: usize,
    alpha: f64,
}

pub fn cmd_cluster(opts: &Options) -> Result<()> {
    let path = opts.input()?;
    let a = io::read_matrix(path)?;
    let k = opts
        .k
        .ok_or_else(|| Error::InvalidArgument("--k is required".into()))?;
    let params = ClusterParams {
        k,
        restarts: opts.restarts.unwrap_or(DEFAULT_SEEDS_PER_K),
        alpha: opts.alpha.unwrap_or(DEFAULT_ALPHA),
    };
    let result = k_access_best_of(&a, k, opts.seed(), params.restarts)?;
    let report = quality_index(&a, &result, params.alpha)?;
    let mut stage = Stage::new("cluster", opts)?;
    stage.input(path)?;
    io::write_json(&stage.output("clustering.json"), &result)?;
    io::write_json(&stage.output("quality.json"), &report)?;
    stage.finish(Some(opts.seed()), params)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SweepParams {
    k_min: usize,
    k_max: usize,
    alpha: f64,
    seeds_per_k: usize,
}

/// Returns the best `k`, if any run succeeded.
pub fn cmd_sweep(opts: &Options) -> Result<Option<usize>> {
    let path = opts.input()?;
    let a = io::read_matrix(path)?;
    let params = SweepParams {
        k_min: opts.k_min.unwrap_or(1),
        k_max: opts.k_max.unwrap_or(a.n().min(10)),
        alpha: opts.alpha.unwrap_or(DEFAULT_ALPHA),
        seeds_per_k: opts.restarts.unwrap_or(DEFAULT_SEEDS_PER_K),
    };
    let report = sweep_k(&a, params.k_min, params.k_max, params.alpha, params.seeds_per_k, opts.seed())?;
    let mut stage = Stage::new("sweep", opts)?;
    stage.input(path)?;
    io::write_sweep_csv(&stage.output("sweep.csv"), &report)?;
    io::write_json(&stage.output("sweep.json"), &report)?;
    stage.finish(Some(opts.seed()), params)?;
    match report.best_k {
        Some(k) => say(&format!("best k = {k}")),
        None => say("no k produced a valid clustering"),
    }
    Ok(report.best_k)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EvaluateParams {
    t0: f64,
    random_sets: usize,
}

pub fn cmd_evaluate(opts: &Options) -> Result<()> {
    let path = opts.input()?;
    let clustering_path = opts.clustering()?;
    let a = io::read_matrix(path)?;
    let result: ClusteringResult = io::read_json(clustering_path)?;
    result.check(&a)?;
    let params = EvaluateParams {
        t0: opts.t0.unwrap_or(DEFAULT_T0),
        random_sets: opts.random_sets.unwrap_or(5),
    };
    let mut sets = vec![InitialStateSet::new("centroid", result.c_index.clone())];
    for r in 0..params.random_sets {
        let mut set = random_init_set(a.n(), result.k, restart_seed(opts.seed(), r))?;
        set.label = format!("random-{}", r + 1);
        sets.push(set);
    }
    let ranked = compare_initializations(&a, &sets, params.t0)?;
    let summaries: Vec<CoverageSummary> = ranked.iter().map(CoverageSummary::from).collect();
    let mut stage = Stage::new("evaluate", opts)?;
    stage.input(path)?;
    stage.input(clustering_path)?;
    io::write_json(&stage.output("coverage.json"), &summaries)?;
    io::write_coverage_csv(&stage.output("coverage.csv"), &summaries)?;
    stage.finish(Some(opts.seed()), params)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TrainSummary {
    budget: usize,
    threshold: f64,
    goal: Vec<usize>,
    task: TaskParams,
    learner: LearnerConfig,
    arms: Vec<ThresholdRun>,
}

fn train_with_goal(opts: &Options, goal: Vec<usize>) -> Result<()> {
    let path = opts.input()?;
    let clustering_path = opts.clustering()?;
    let a = io::read_matrix(path)?;
    let result: ClusteringResult = io::read_json(clustering_path)?;
    result.check(&a)?;
    let seed = opts.seed();
    let budget = opts.episodes.unwrap_or(BENCHMARK_EPISODES);
    let task = RecoveryTask::new(&a, &goal, TaskParams::default())?;
    let learner = LearnerConfig::new(budget, seed);
    let schedule = EvalSchedule { seed, ..EvalSchedule::default() };
    let test = InitialStateSet::new("all", (0..a.n()).collect());
    let centroid = InitialStateSet::new("centroid", result.c_index.clone());
    let random = random_init_set(a.n(), result.k, seed.wrapping_add(1_000_000))?;
    let (c, r) = rayon::join(
        || episodes_to_threshold(&task, &centroid, &learner, &test, &schedule),
        || episodes_to_threshold(&task, &random, &learner, &test, &schedule),
    );
    let arms = vec![c?, r?];

    let mut stage = Stage::new("train", opts)?;
    stage.input(path)?;
    stage.input(clustering_path)?;
    for arm in &arms {
        io::write_curve_csv(&stage.output(&format!("curve-{}.csv", arm.label)), &arm.curve)?;
    }
    let summary = TrainSummary {
        budget,
        threshold: schedule.threshold,
        goal,
        task: *task.params(),
        learner,
        arms,
    };
    io::write_json(&stage.output("train.json"), &summary)?;
    stage.finish(Some(seed), schedule)
}

pub fn cmd_train(opts: &Options) -> Result<()> {
    let goal = opts
        .goal
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--goal is required".into()))?;
    train_with_goal(opts, goal)
}

#[derive(Serialize)]
struct ChordParams {
    hi: f64,
    lo: f64,
}

pub fn cmd_export_chord(opts: &Options) -> Result<()> {
    let path = opts.input()?;
    let report: QualityReport = io::read_json(path)?;
    let params = ChordParams {
        hi: opts.hi.unwrap_or(0.15),
        lo: opts.lo.unwrap_or(0.05),
    };
    let edges = io::chord_edges(&report.a_inter, params.hi, params.lo)?;
    let mut stage = Stage::new("export-chord", opts)?;
    stage.input(path)?;
    io::write_chord_csv(&stage.output("chord.csv"), &edges)?;
    stage.finish(None, params)
}

/// Runs the stages in order inside one output directory:
/// generate or sample + estimate, then sweep, cluster at the best k (or
/// `--k`), evaluate, export-chord and train.
pub fn cmd_pipeline(opts: &Options) -> Result<()> {
    let out = opts.output()?.to_path_buf();
    let at = |name: &str| Some(out.join(name));
    let source = opts.source.unwrap_or(Source::Pose);
    let goal = match source {
        Source::Planted => {
            cmd_generate(opts)?;
            low_depth_goal(&generate_planted(&planted_spec(opts))?, 0)
        }
        Source::Pose => {
            cmd_sample(opts)?;
            cmd_estimate(&Options {
                input: at("states.csv"),
                env: at("environment.json"),
                ..opts.clone()
            })?;
            let states = io::read_states_csv(&out.join("states.csv"))?;
            let mut by_potential: Vec<usize> = (0..states.len()).collect();
            by_potential.sort_by(|&i, &j| states[i].values[1].total_cmp(&states[j].values[1]));
            by_potential.truncate(opts.goal_count.unwrap_or(5).max(1));
            by_potential.sort_unstable();
            by_potential
        }
    };
    let with_matrix = Options {
        input: at("matrix.csv"),
        ..opts.clone()
    };
    let best_k = cmd_sweep(&with_matrix)?;
    let k = opts
        .k
        .or(best_k)
        .ok_or_else(|| Error::InvalidArgument("sweep found no valid k; pass --k".into()))?;
    cmd_cluster(&Options {
        k: Some(k),
        ..with_matrix.clone()
    })?;
    let with_clustering = Options {
        clustering: at("clustering.json"),
        ..with_matrix
    };
    cmd_evaluate(&with_clustering)?;
    cmd_export_chord(&Options {
        input: at("quality.json"),
        ..opts.clone()
    })?;
    train_with_goal(&with_clustering, opts.goal.clone().unwrap_or(goal))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_BAD_ARGS,
        Error::InvalidMatrix(_)
        | Error::Parse { .. }
        | Error::DuplicateStates { .. }
        | Error::Json(_)
        | Error::Csv(_) => EXIT_INVALID_INPUT,
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::MissingInput(_) | Error::Io(_) => EXIT_IO,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::InvalidMatrix(_) => "invalid-matrix",
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => "parse",
        Error::NonConvergence { .. } => "non-convergence",
        Error::DuplicateStates { .. } => "duplicate-states",
        Error::MissingInput(_) => "missing-input",
        Error::Io(_) => "io",
    }
}

fn say(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn report_error(kind: &str, message: &str, code: i32) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message, "exitCode": code } });
    let _ = writeln!(std::io::stderr(), "{body}");
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(o) => cmd_generate(&o.resolve()?),
        Command::Sample(o) => cmd_sample(&o.resolve()?),
        Command::Estimate(o) => cmd_estimate(&o.resolve()?),
        Command::Cluster(o) => cmd_cluster(&o.resolve()?),
        Command::Sweep(o) => cmd_sweep(&o.resolve()?).map(drop),
        Command::Evaluate(o) => cmd_evaluate(&o.resolve()?),
        Command::Train(o) => cmd_train(&o.resolve()?),
        Command::ExportChord(o) => cmd_export_chord(&o.resolve()?),
        Command::Pipeline(o) => cmd_pipeline(&o.resolve()?),
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(std::io::stdout(), "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end(), EXIT_BAD_ARGS);
            return EXIT_BAD_ARGS;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let code = exit_code(&err);
            report_error(error_kind(&err), &err.to_string(), code);
            code
        }
    }
}
