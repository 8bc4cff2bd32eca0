//! The `emobase` command line.
//!
//! Subcommands read from stdin (or `--input`) and write to stdout (or
//! `--output`), so the pipeline composes with pipes:
//! `emobase synth | emobase ingest | emobase features | emobase train`.
//! Exit status is 2 for bad arguments and 1 for any other failure.

use std::error::Error;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emobase::eval::{
    ablation_skt, binarize_data, compare_classifiers, cross_validate, default_contenders, generate_synthetic_subject,
    window_sweep, Evaluator, PipelineParams, SktMode, SynthSpec,
};
use emobase::features::{read_dataset_csv, write_dataset_csv, ClipRanks, Dataset, FeatureMask, DEFAULT_WINDOW};
use emobase::learn::{TrainedModel, TrainerSpec, TrainingData};
use emobase::protocol::{validate_plan, validate_pool, PlanContext, SessionConstraints, SessionPlan, StimulusClip, SubjectProfile};
use emobase::signal::io::{read_recording, RecordedSession, SessionManifest};
use emobase::signal::pipeline::{ingest_session, IngestConfig};
use emobase::signal::LabeledSignalSet;
use serde::{Deserialize, Serialize};

use crate::api::{serve, ServeConfig};
use crate::runs::parse_mask;

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "emobase", version, about = "Personalized emotion-baseline pipeline")]
pub struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic subject (recordings, manifests, clip rankings).
    Synth(SynthArgs),
    /// Recordings + manifests -> aligned, filtered, normalized, labeled signals.
    Ingest(IngestArgs),
    /// Labeled signals -> windowed feature dataset CSV.
    Features(FeaturesArgs),
    /// Evaluate a classifier on a dataset and optionally save a fitted model.
    Train(TrainArgs),
    /// Cross-validation, window sweeps, SKT ablation or classifier comparison.
    Eval(EvalArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Check a session plan against the protocol rules.
    ValidatePlan(ValidatePlanArgs),
}

#[derive(Debug, Args)]
struct Io {
    /// Input file; stdin when omitted or `-`.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted or `-`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SktArg {
    Profile,
    Leak,
    Noise,
}

impl From<SktArg> for SktMode {
    fn from(a: SktArg) -> Self {
        match a {
            SktArg::Profile => SktMode::Profile,
            SktArg::Leak => SktMode::Leak,
            SktArg::Noise => SktMode::Noise,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of protocol-shaped sessions.
    #[arg(long, default_value_t = 1, conflicts_with = "table_one")]
    sessions: usize,
    /// One long session with the per-emotion durations of the experiment summary.
    #[arg(long)]
    table_one: bool,
    /// Multiplies every segment length of `--table-one`.
    #[arg(long, default_value_t = 1.0, requires = "table_one")]
    scale: f64,
    #[arg(long)]
    separability: Option<f64>,
    #[arg(long, value_enum)]
    skt_mode: Option<SktArg>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MaskArgs {
    /// Include SKT_mean (excluded by default as leak-prone).
    #[arg(long, conflicts_with = "mask")]
    with_skt: bool,
    /// Explicit comma-separated feature list.
    #[arg(long, value_delimiter = ',')]
    mask: Option<Vec<String>>,
}

impl MaskArgs {
    fn resolve(&self) -> CliResult<FeatureMask> {
        Ok(match &self.mask {
            Some(names) => parse_mask(names)?,
            None if self.with_skt => FeatureMask::all(),
            None => FeatureMask::without_skt(),
        })
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Single-session mode: the session manifest JSON.
    #[arg(long, requires = "recording")]
    manifest: Option<PathBuf>,
    /// Single-session mode: `DEVICE=PATH` of one device CSV; repeatable.
    #[arg(long, value_parser = parse_device_path, requires = "manifest")]
    recording: Vec<(String, PathBuf)>,
    /// Seconds dropped from the start of every emotion segment.
    #[arg(long, default_value_t = emobase::signal::DEFAULT_TRIM_S as f64)]
    trim_s: f64,
    #[command(flatten)]
    io: Io,
}

fn parse_device_path(s: &str) -> Result<(String, PathBuf), String> {
    let (dev, path) = s.split_once('=').ok_or_else(|| format!("expected DEVICE=PATH, got `{s}`"))?;
    if dev.is_empty() || path.is_empty() {
        return Err(format!("expected DEVICE=PATH, got `{s}`"));
    }
    Ok((dev.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Window length in samples.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    w: usize,
    /// Keep only windows of clips ranked at least this high.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    min_rank: Option<u8>,
    #[command(flatten)]
    io: Io,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// tree, rf, ann or svm.
    #[arg(long, default_value = "rf", value_parser = parse_trainer)]
    clf: TrainerSpec,
    #[command(flatten)]
    mask: MaskArgs,
    /// Collapse to negative/positive valence.
    #[arg(long)]
    binary: bool,
    /// Also fit on all data and save the model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Human-readable report instead of JSON.
    #[arg(long)]
    text: bool,
    #[command(flatten)]
    io: Io,
}

fn parse_trainer(s: &str) -> Result<TrainerSpec, String> {
    TrainerSpec::from_short_name(s).ok_or_else(|| format!("unknown classifier `{s}` (expected tree, rf, ann or svm)"))
}

fn parse_sizes(s: &str) -> Result<usize, String> {
    let w: usize = s.trim().parse().map_err(|_| format!("bad window size `{s}`"))?;
    if w < 2 {
        return Err(format!("window size must be >= 2, got {w}"));
    }
    Ok(w)
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["cv", "sweep", "ablation_skt", "compare"])))]
struct EvalArgs {
    /// K-fold cross-validation of `--clf`.
    #[arg(long)]
    cv: Option<usize>,
    /// Comma-separated window sizes; needs ingested signals as input.
    #[arg(long, value_delimiter = ',', value_parser = parse_sizes)]
    sweep: Option<Vec<usize>>,
    /// Evaluate `--clf` with and without SKT_mean.
    #[arg(long)]
    ablation_skt: bool,
    /// Binary-setup comparison of tree, network, SVM and forest.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value = "rf", value_parser = parse_trainer)]
    clf: TrainerSpec,
    #[command(flatten)]
    mask: MaskArgs,
    #[arg(long)]
    binary: bool,
    /// Window length when the input is ingested signals.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    w: usize,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    min_rank: Option<u8>,
    /// Folds for the non-forest classifiers of `--compare`.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    text: bool,
    #[command(flatten)]
    io: Io,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "EMOBASE_BIND", default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, env = "EMOBASE_PORT", default_value_t = 8080)]
    port: u16,
    /// Store root directory; created if missing.
    #[arg(long, env = "EMOBASE_STORE", default_value = "emobase-store")]
    store: PathBuf,
    /// Origin allowed to call the API from a browser.
    #[arg(long, env = "EMOBASE_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

#[derive(Debug, Args)]
struct ValidatePlanArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Subject profile the plan was generated for; enables the history rules.
    #[arg(long)]
    profile: Option<PathBuf>,
}

/// Sessions as exchanged between `synth` and `ingest`. A synthetic subject
/// deserializes into this directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionBundle {
    pub sessions: Vec<RecordedSession>,
    #[serde(default)]
    pub rankings: ClipRanks,
}

/// Output of `ingest`, input of `features` and `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestBundle {
    pub sessions: Vec<LabeledSignalSet>,
    #[serde(default)]
    pub rankings: ClipRanks,
}

fn read_input(path: Option<&Path>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    match path {
        Some(p) if p != Path::new("-") => {
            buf = std::fs::read(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
        }
        _ => {
            std::io::stdin().read_to_end(&mut buf)?;
        }
    }
    Ok(buf)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display()))?
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn from_json<T: serde::de::DeserializeOwned>(bytes: &[u8], what: &str) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| format!("input is not a valid {what}: {e}").into())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("outputs serialize");
    v.push(b'\n');
    v
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    from_json(&read_input(Some(path))?, what)
}

fn synth(seed: u64, a: &SynthArgs) -> CliResult {
    let mut spec = if a.table_one { SynthSpec::table_one_scaled(a.scale) } else { SynthSpec::protocol(a.sessions) };
    if let Some(s) = a.separability {
        spec.separability = s;
    }
    if let Some(m) = a.skt_mode {
        spec.skt_mode = m.into();
    }
    let subject = generate_synthetic_subject(&spec, seed)?;
    write_output(a.output.as_deref(), &to_json(&subject))
}

fn ingest(a: &IngestArgs) -> CliResult {
    let bundle = match &a.manifest {
        Some(m) => {
            let manifest: SessionManifest = read_json_file(m, "session manifest")?;
            let mut streams = Vec::new();
            for (dev, path) in &a.recording {
                let f = std::fs::File::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                streams.extend(read_recording(f, dev)?);
            }
            let cfg = IngestConfig { trim_s: a.trim_s, ..Default::default() };
            let signals = ingest_session(&manifest, &streams, &cfg)?.signals;
            IngestBundle { sessions: vec![signals], rankings: ClipRanks::new() }
        }
        None => {
            let input: SessionBundle = from_json(&read_input(a.io.input.as_deref())?, "session bundle")?;
            let cfg = IngestConfig { trim_s: a.trim_s, ..Default::default() };
            let sessions = input
                .sessions
                .iter()
                .map(|s| Ok(ingest_session(&s.manifest, &s.streams()?, &cfg)?.signals))
                .collect::<CliResult<Vec<_>>>()?;
            IngestBundle { sessions, rankings: input.rankings }
        }
    };
    write_output(a.io.output.as_deref(), &to_json(&bundle))
}

fn pipeline_dataset(bundle: &IngestBundle, w: usize, min_rank: Option<u8>, mask: FeatureMask) -> CliResult<Dataset> {
    let params = PipelineParams { mask, min_rank, rankings: bundle.rankings.clone() };
    Ok(params.dataset(&bundle.sessions, w)?)
}

fn features(a: &FeaturesArgs) -> CliResult {
    let bundle: IngestBundle = from_json(&read_input(a.io.input.as_deref())?, "ingested signal bundle")?;
    let ds = pipeline_dataset(&bundle, a.w, a.min_rank, FeatureMask::all())?;
    let mut csv = Vec::new();
    write_dataset_csv(&mut csv, &ds.instances)?;
    write_output(a.io.output.as_deref(), &csv)
}

fn training_data(ds: &Dataset, binary: bool) -> CliResult<TrainingData> {
    let td = TrainingData::from_dataset(ds)?;
    Ok(if binary { binarize_data(&td)? } else { td })
}

fn train(seed: u64, a: &TrainArgs) -> CliResult {
    let bytes = read_input(a.io.input.as_deref())?;
    let ds = Dataset::new(read_dataset_csv(bytes.as_slice())?, a.mask.resolve()?)?;
    let td = training_data(&ds, a.binary)?;
    let report = Evaluator::for_trainer(a.clf.clone()).evaluate(&td, seed)?.without_timing();
    if let Some(path) = &a.model_out {
        let model = TrainedModel::fit(&a.clf, &td, seed)?;
        let f = std::fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        model.save(std::io::BufWriter::new(f))?;
    }
    let out = if a.text { report.render().into_bytes() } else { to_json(&report) };
    write_output(a.io.output.as_deref(), &out)
}

enum EvalInput {
    Signals(IngestBundle),
    Dataset(Vec<emobase::features::LabeledInstance>),
}

/// JSON input is an ingested bundle; anything else is read as dataset CSV.
fn eval_input(bytes: &[u8]) -> CliResult<EvalInput> {
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        Ok(EvalInput::Signals(from_json(bytes, "ingested signal bundle")?))
    } else {
        Ok(EvalInput::Dataset(read_dataset_csv(bytes)?))
    }
}

fn sweep_table(rows: &[emobase::eval::SweepRow]) -> String {
    let mut s = format!("{:>6} {:>18} {:>18} {:>10}\n", "window", "6 emotions err(%)", "binary err(%)", "instances");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>18.1} {:>18.1} {:>10}",
            r.window,
            100.0 * r.six_class.mean_error,
            100.0 * r.binary.mean_error,
            r.six_class.n_instances
        );
    }
    s
}

fn eval(seed: u64, a: &EvalArgs) -> CliResult {
    let input = eval_input(&read_input(a.io.input.as_deref())?)?;
    let mask = a.mask.resolve()?;
    let evaluator = Evaluator::for_trainer(a.clf.clone());

    if let Some(sizes) = &a.sweep {
        let EvalInput::Signals(bundle) = &input else {
            return Err("--sweep re-cuts windows and needs ingested signals (JSON), not a dataset CSV".into());
        };
        let params = PipelineParams { mask, min_rank: a.min_rank, rankings: bundle.rankings.clone() };
        let mut rows = window_sweep(&bundle.sessions, sizes, &params, &evaluator, seed)?;
        for r in &mut rows {
            r.six_class = r.six_class.without_timing();
            r.binary = r.binary.without_timing();
        }
        let out = if a.text { sweep_table(&rows).into_bytes() } else { to_json(&rows) };
        return write_output(a.io.output.as_deref(), &out);
    }

    let ds = match input {
        EvalInput::Signals(bundle) => pipeline_dataset(&bundle, a.w, a.min_rank, mask)?,
        EvalInput::Dataset(instances) => Dataset::new(instances, mask)?,
    };
    let out = if a.ablation_skt {
        let mut r = ablation_skt(&ds, &evaluator, seed)?;
        r.with_skt = r.with_skt.without_timing();
        r.without_skt = r.without_skt.without_timing();
        if a.text {
            format!(
                "{}\n{}\nerror without SKT - with SKT: {:+.1} points\n",
                r.with_skt.render(),
                r.without_skt.render(),
                100.0 * r.delta()
            )
            .into_bytes()
        } else {
            to_json(&r)
        }
    } else if a.compare {
        let mut r = compare_classifiers(&ds, &default_contenders(), a.folds, seed)?;
        for row in &mut r.rows {
            row.report = row.report.without_timing();
        }
        if a.text {
            r.render().into_bytes()
        } else {
            to_json(&r)
        }
    } else {
        let k = a.cv.expect("mode group is required");
        let td = training_data(&ds, a.binary)?;
        let r = cross_validate(&td, &a.clf, k, seed)?.without_timing();
        if a.text {
            r.render().into_bytes()
        } else {
            to_json(&r)
        }
    };
    write_output(a.io.output.as_deref(), &out)
}

fn validate_plan_cmd(a: &ValidatePlanArgs) -> CliResult {
    let plan: SessionPlan = read_json_file(&a.plan, "session plan")?;
    let pool: Vec<StimulusClip> = read_json_file(&a.pool, "stimulus pool")?;
    validate_pool(&pool)?;
    let cons = if plan.personalized { SessionConstraints::personalized() } else { SessionConstraints::default() };
    let profile: Option<SubjectProfile> = a.profile.as_deref().map(|p| read_json_file(p, "subject profile")).transpose()?;
    let ctx = match &profile {
        Some(p) => PlanContext::for_profile(p, &pool, &cons),
        None => PlanContext {
            pool: &pool,
            excluded: Default::default(),
            shown: Default::default(),
            previous: None,
            constraints: &cons,
        },
    };
    validate_plan(&plan, &ctx)?;
    write_output(None, format!("plan {} is valid\n", plan.session_id).as_bytes())
}

fn serve_cmd(a: &ServeArgs) -> CliResult {
    let cfg = ServeConfig { bind: a.bind, port: a.port, store: a.store.clone(), cors_origin: a.cors_origin.clone() };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(cfg))?;
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Synth(a) => synth(cli.seed, a),
        Command::Ingest(a) => ingest(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(cli.seed, a),
        Command::Eval(a) => eval(cli.seed, a),
        Command::Serve(a) => serve_cmd(a),
        Command::ValidatePlan(a) => validate_plan_cmd(a),
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}
