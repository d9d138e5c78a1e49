//! `affattn` command line: `synth`, `roc`, `spread` and `eval`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{compute_affinity, AffinityMatrix};
use crate::error::{Error, Result, RowError};
use crate::eval::{evaluate, EvalOptions, EvalReport, MeanSem};
use crate::grid_io::{
    load_manifest, load_responses, rasterize_mask, read_feature_file, read_mask_file, write_pgm, Condition,
    PatchLabelGrid, SubjectResponses, Trial,
};
use crate::lattice::Connectivity;
use crate::roc::{aggregate_roc, trial_roc, RocPoint};
use crate::spread::{run_trial, SpreadConfig, SpreadSchedule, SpreadTrace};
use crate::synth::{generate_dataset, write_dataset, LinearRtModel, SynthConfig};

pub const DEFAULT_SEED: u64 = 20240;

/// Environment variable supplying the default worker count.
pub const THREADS_ENV: &str = "AFFATTN_THREADS";

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
    pub const IO: i32 = 4;
    pub const EMPTY: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Argument(_) => exit::USAGE,
        Error::Format(_) | Error::Validation(_) | Error::TrialSkipped { .. } => exit::VALIDATION,
        Error::Io { .. } => exit::IO,
        Error::EmptyInput(_) | Error::UndefinedCorrelation(_) => exit::EMPTY,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "affattn",
    version,
    about = "Patch-affinity grouping: ROC, attention spread and RT scoring"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (features, masks, manifest, responses).
    Synth(SynthArgs),
    /// Threshold-sweep ROC of affinity maps against object masks.
    Roc(RocArgs),
    /// Simulate attention spread and predict per-trial step counts.
    Spread(SpreadArgs),
    /// Score predictions against human RTs.
    Eval(EvalArgs),
}

/// Input locations. `--data` points at a directory laid out like `synth`
/// output; explicit paths override it.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Directory of `<image_id>.aftn` files.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory of `<image_id>.afmsk` files.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub responses: Option<PathBuf>,
}

impl DataArgs {
    fn resolve(&self, explicit: &Option<PathBuf>, default: &str, flag: &str) -> Result<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.data.as_ref().map(|d| d.join(default)))
            .ok_or_else(|| Error::Argument(format!("--{flag} (or --data) is required")))
    }

    pub fn features_dir(&self) -> Result<PathBuf> {
        self.resolve(&self.features, "features", "features")
    }

    pub fn masks_dir(&self) -> Result<PathBuf> {
        self.resolve(&self.masks, "masks", "masks")
    }

    pub fn manifest_path(&self) -> Result<PathBuf> {
        self.resolve(&self.manifest, "manifest.csv", "manifest")
    }

    /// Explicit path, else `<data>/responses.csv` when that file exists.
    pub fn responses_path(&self) -> Option<PathBuf> {
        self.responses.clone().or_else(|| {
            let p = self.data.as_ref()?.join("responses.csv");
            p.is_file().then_some(p)
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 255)]
    pub scenes: usize,
    #[arg(long, default_value_t = 72)]
    pub subjects: usize,
    #[arg(long, default_value_t = 32)]
    pub grid_h: usize,
    #[arg(long, default_value_t = 32)]
    pub grid_w: usize,
    #[arg(long, default_value_t = 16)]
    pub patch_px: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub separability: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    /// Per-response Gaussian RT noise.
    #[arg(long, default_value_t = 120.0)]
    pub rt_noise_ms: f64,
    #[arg(long, default_value_t = 620.0)]
    pub base_ms: f64,
    #[arg(long, default_value_t = 90.0)]
    pub diff_penalty_ms: f64,
    #[arg(long, default_value_t = 0.35)]
    pub same_ms_per_px: f64,
    #[arg(long, default_value_t = 0.0)]
    pub diff_ms_per_px: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            n_scenes: self.scenes,
            n_subjects: self.subjects,
            grid_h: self.grid_h,
            grid_w: self.grid_w,
            patch_px: self.patch_px,
            dim: self.dim,
            separability: self.separability,
            noise_sigma: self.noise_sigma,
            rt_noise_ms: self.rt_noise_ms,
            rt_model: LinearRtModel {
                base_ms: self.base_ms,
                diff_penalty_ms: self.diff_penalty_ms,
                same_ms_per_px: self.same_ms_per_px,
                diff_ms_per_px: self.diff_ms_per_px,
            },
            seed: self.seed,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every trial's sweep to `roc_trials.csv`.
    #[arg(long)]
    pub per_trial: bool,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SpreadFlags {
    #[arg(long, default_value_t = 0.8)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.2)]
    pub tau_step: f64,
    #[arg(long, value_enum, default_value_t = SpreadSchedule::Multiplicative)]
    pub schedule: SpreadSchedule,
    #[arg(long, default_value_t = 20)]
    pub max_steps: usize,
    #[arg(long, value_enum, default_value_t = Connectivity::Four)]
    pub connectivity: Connectivity,
}

impl From<SpreadFlags> for SpreadConfig {
    fn from(f: SpreadFlags) -> Self {
        SpreadConfig {
            tau: f.tau,
            tau_step: f.tau_step,
            schedule: f.schedule,
            max_steps: f.max_steps,
            connectivity: f.connectivity,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SpreadArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub spread: SpreadFlags,
    #[arg(long)]
    pub out: PathBuf,
    /// Write `traces.csv` with the patches admitted at every step.
    #[arg(long)]
    pub traces: bool,
    /// Write one PGM segment mask per trial and step under `pgm/`.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV with `trial_id` and `prediction` columns.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_splits: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Use incorrect responses as well when averaging RTs.
    #[arg(long)]
    pub include_incorrect: bool,
    /// Leave trials predicted `max_steps + 1` out of the correlations.
    #[arg(long)]
    pub exclude_unreached: bool,
    /// Step budget the predictions were produced with; sets histogram bins.
    #[arg(long, default_value_t = 20)]
    pub max_steps: usize,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command and returns the text it would print.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Roc(a) => cmd_roc(a),
        Command::Spread(a) => cmd_spread(a),
        Command::Eval(a) => cmd_eval(a),
    })
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    write_text(path, &(text + "\n"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct SynthSummary {
    command: &'static str,
    scenes: usize,
    trials: usize,
    subjects: usize,
    responses: usize,
    discarded_layouts: usize,
    config: SynthConfig,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let config = args.config();
    let dataset = generate_dataset(&config)?;
    create_out(&args.out)?;
    write_dataset(&dataset, &args.out)?;
    let summary = SynthSummary {
        command: "synth",
        scenes: dataset.scenes.len(),
        trials: dataset.manifest.len(),
        subjects: dataset.responses.subjects().len(),
        responses: dataset.responses.rows.len(),
        discarded_layouts: dataset.diagnostics.len(),
        config,
    };
    write_json(&args.out.join("synth_summary.json"), &summary)?;
    Ok(format!(
        "wrote {} scenes, {} trials, {} subjects\n",
        summary.scenes, summary.trials, summary.subjects
    ))
}

fn load_affinity(features: &Path, image_id: &str) -> Result<AffinityMatrix> {
    let grid = read_feature_file(features.join(format!("{image_id}.aftn")))?;
    if grid.image_id != image_id {
        return Err(Error::validation(
            0,
            format!("feature file for {image_id} declares image id {:?}", grid.image_id),
        ));
    }
    compute_affinity(&grid)
}

fn load_labels(masks: &Path, image_id: &str, aff: &AffinityMatrix) -> Result<PatchLabelGrid> {
    let mask = read_mask_file(masks.join(format!("{image_id}.afmsk")))?;
    let g = aff.geometry;
    if (mask.img_h, mask.img_w) != (g.img_h, g.img_w) {
        return Err(Error::validation(
            0,
            format!(
                "mask for {image_id} is {}x{} but features were extracted from a {}x{} image",
                mask.img_h, mask.img_w, g.img_h, g.img_w
            ),
        ));
    }
    rasterize_mask(&mask, g.grid_h, g.grid_w, g.proc_h, g.proc_w)
}

/// Loads each referenced image once, runs `f` over its trials in parallel
/// across images and returns the results in manifest order.
fn per_image<T, F>(manifest: &[Trial], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&str, &[&Trial]) -> Result<Vec<T>> + Sync,
{
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in manifest.iter().enumerate() {
        groups.entry(t.image_id.as_str()).or_default().push(i);
    }
    let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    let done: Vec<Vec<(usize, T)>> = groups
        .par_iter()
        .map(|(image, idx)| {
            let trials: Vec<&Trial> = idx.iter().map(|&i| &manifest[i]).collect();
            let out = f(image, &trials)?;
            Ok(idx.iter().copied().zip(out).collect())
        })
        .collect::<Result<_>>()?;
    let mut slots: Vec<Option<T>> = std::iter::repeat_with(|| None).take(manifest.len()).collect();
    for (i, v) in done.into_iter().flatten() {
        slots[i] = Some(v);
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every trial belongs to a group"))
        .collect())
}

#[derive(Serialize)]
struct RocSummary {
    command: &'static str,
    auc: f64,
    n_trials: usize,
    n_skipped: usize,
    skipped: Vec<(String, String)>,
}

pub fn cmd_roc(args: &RocArgs) -> Result<String> {
    let features = args.data.features_dir()?;
    let masks = args.data.masks_dir()?;
    let manifest = load_manifest(args.data.manifest_path()?)?;

    let results: Vec<std::result::Result<Vec<RocPoint>, String>> = per_image(&manifest, |image, trials| {
        let aff = load_affinity(&features, image)?;
        let labels = load_labels(&masks, image, &aff)?;
        trials
            .iter()
            .map(|t| match trial_roc(&aff, &labels, t) {
                Ok(points) => Ok(Ok(points)),
                Err(Error::TrialSkipped { reason, .. }) => Ok(Err(reason)),
                Err(e) => Err(e),
            })
            .collect()
    })?;

    let mut sweeps = Vec::new();
    let mut scored = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in manifest.iter().zip(results) {
        match r {
            Ok(points) => {
                scored.push(t.trial_id.as_str());
                sweeps.push(points);
            }
            Err(reason) => skipped.push((t.trial_id.clone(), reason)),
        }
    }
    let curve = aggregate_roc(&sweeps)?;

    create_out(&args.out)?;
    let mut csv = String::from("threshold,mean_tpr,mean_fpr\n");
    for p in &curve.points {
        let _ = writeln!(csv, "{},{},{}", p.threshold, p.tpr, p.fpr);
    }
    write_text(&args.out.join("roc.csv"), &csv)?;
    if args.per_trial {
        let mut csv = String::from("trial_id,threshold,tpr,fpr\n");
        for (id, points) in scored.iter().zip(&sweeps) {
            for p in points {
                let _ = writeln!(csv, "{id},{},{},{}", p.threshold, p.tpr, p.fpr);
            }
        }
        write_text(&args.out.join("roc_trials.csv"), &csv)?;
    }
    let line = format!(
        "AUC {:.4} over {} trials ({} skipped)\n",
        curve.auc,
        curve.n_trials,
        skipped.len()
    );
    write_text(&args.out.join("roc_summary.txt"), &line)?;
    let summary = RocSummary {
        command: "roc",
        auc: curve.auc,
        n_trials: curve.n_trials,
        n_skipped: skipped.len(),
        skipped,
    };
    write_json(&args.out.join("roc_summary.json"), &summary)?;
    Ok(line)
}

#[derive(Serialize)]
struct ConditionSteps {
    condition: Condition,
    n: usize,
    mean_steps: Option<f64>,
    unreached: usize,
}

#[derive(Serialize)]
struct SpreadSummary {
    command: &'static str,
    config: SpreadConfig,
    n_trials: usize,
    n_skipped: usize,
    conditions: Vec<ConditionSteps>,
    skipped: Vec<(String, String)>,
}

fn write_trace_pgms(dir: &Path, trace: &SpreadTrace) -> Result<()> {
    let trial_dir = dir.join(&trace.trial_id);
    create_out(&trial_dir)?;
    for (step, mask) in trace.steps.iter().zip(trace.segment_masks()) {
        let mut px: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
        if px[trace.periph] == 0 {
            px[trace.periph] = 128;
        }
        let path = trial_dir.join(format!("step_{:02}.pgm", step.step));
        write_pgm(path, trace.grid_h, trace.grid_w, &px)?;
    }
    Ok(())
}

pub fn cmd_spread(args: &SpreadArgs) -> Result<String> {
    let config: SpreadConfig = args.spread.into();
    config.validate()?;
    let features = args.data.features_dir()?;
    let manifest = load_manifest(args.data.manifest_path()?)?;

    let results: Vec<std::result::Result<SpreadTrace, String>> = per_image(&manifest, |image, trials| {
        let aff = load_affinity(&features, image)?;
        Ok(trials
            .iter()
            .map(|t| run_trial(&aff, t, &config).map_err(|e| e.to_string()))
            .collect())
    })?;

    let bins = config.unreached();
    let mut histogram: BTreeMap<Condition, Vec<usize>> = Condition::ALL.iter().map(|&c| (c, vec![0; bins])).collect();
    let mut traces = Vec::new();
    let mut skipped = Vec::new();
    let mut predictions = String::from("trial_id,image_id,condition,prediction,reached\n");
    let mut by_condition: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for (t, r) in manifest.iter().zip(results) {
        match r {
            Ok(trace) => {
                histogram.get_mut(&t.condition).unwrap()[trace.prediction - 1] += 1;
                by_condition
                    .entry(t.condition)
                    .or_default()
                    .push(trace.prediction as f64);
                let _ = writeln!(
                    predictions,
                    "{},{},{},{},{}",
                    t.trial_id,
                    t.image_id,
                    t.condition,
                    trace.prediction,
                    trace.reached_step.is_some()
                );
                traces.push(trace);
            }
            Err(reason) => skipped.push((t.trial_id.clone(), reason)),
        }
    }
    if traces.is_empty() {
        return Err(Error::EmptyInput(format!("all {} trials were skipped", manifest.len())));
    }

    create_out(&args.out)?;
    write_text(&args.out.join("predictions.csv"), &predictions)?;
    write_text(&args.out.join("histogram.csv"), &histogram_csv(&histogram))?;
    if args.traces {
        let mut csv = String::from("trial_id,step,threshold,added\n");
        for trace in &traces {
            for s in &trace.steps {
                let added: Vec<String> = s.added.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(csv, "{},{},{},{}", trace.trial_id, s.step, s.threshold, added.join(" "));
            }
        }
        write_text(&args.out.join("traces.csv"), &csv)?;
    }
    if args.pgm {
        let dir = args.out.join("pgm");
        for trace in &traces {
            write_trace_pgms(&dir, trace)?;
        }
    }

    let conditions: Vec<ConditionSteps> = Condition::ALL
        .iter()
        .map(|&c| {
            let v = by_condition.get(&c).map(Vec::as_slice).unwrap_or_default();
            ConditionSteps {
                condition: c,
                n: v.len(),
                mean_steps: MeanSem::of(v).map(|m| m.mean),
                unreached: histogram[&c][bins - 1],
            }
        })
        .collect();
    let mut text = format!(
        "{} trials ({} skipped), tau {} tau_step {} {:?}\n",
        traces.len(),
        skipped.len(),
        config.tau,
        config.tau_step,
        config.schedule
    );
    for c in &conditions {
        let _ = writeln!(
            text,
            "  {:<10} n={:<4} mean_steps={} unreached={}",
            c.condition.as_str(),
            c.n,
            c.mean_steps.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into()),
            c.unreached
        );
    }
    let summary = SpreadSummary {
        command: "spread",
        config,
        n_trials: traces.len(),
        n_skipped: skipped.len(),
        conditions,
        skipped,
    };
    write_json(&args.out.join("spread_summary.json"), &summary)?;
    Ok(text)
}

/// `condition,step,count` for steps `1..=bins`, conditions in canonical order.
fn histogram_csv(histogram: &BTreeMap<Condition, Vec<usize>>) -> String {
    let mut csv = String::from("condition,step,count\n");
    for (c, counts) in histogram {
        for (k, n) in counts.iter().enumerate() {
            let _ = writeln!(csv, "{c},{},{n}", k + 1);
        }
    }
    csv
}

#[derive(serde::Deserialize)]
struct PredictionRow {
    trial_id: String,
    prediction: f64,
}

/// Reads a predictions CSV; extra columns are ignored.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    })?;
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for (i, rec) in reader.deserialize::<PredictionRow>().enumerate() {
        let row = i + 1;
        match rec {
            Ok(r) if !r.prediction.is_finite() => problems.push(RowError {
                row,
                message: format!("non-finite prediction for {}", r.trial_id),
            }),
            Ok(r) => {
                if out.insert(r.trial_id.clone(), r.prediction).is_some() {
                    problems.push(RowError {
                        row,
                        message: format!("duplicate trial_id {}", r.trial_id),
                    });
                }
            }
            Err(e) => problems.push(RowError {
                row,
                message: e.to_string(),
            }),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    command: &'static str,
    options: EvalOptions,
    report: &'a EvalReport,
}

fn fmt_stats(m: Option<MeanSem>) -> [String; 3] {
    match m {
        Some(m) => [m.mean.to_string(), m.sem.to_string(), m.n.to_string()],
        None => [String::new(), String::new(), "0".into()],
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let mut manifest = load_manifest(args.data.manifest_path()?)?;
    let responses: Option<SubjectResponses> = args
        .data
        .responses_path()
        .map(|p| load_responses(p, &manifest))
        .transpose()?;
    if let Some(resp) = &responses {
        let means = resp.mean_rt_by_trial(args.include_incorrect);
        for t in manifest.iter_mut().filter(|t| t.mean_rt_ms.is_none()) {
            t.mean_rt_ms = means.get(t.trial_id.as_str()).copied();
        }
    }
    let predictions = load_predictions(&args.predictions)?;
    let unreached = (args.max_steps + 1) as f64;
    let options = EvalOptions {
        n_splits: args.n_splits,
        seed: args.seed,
        include_incorrect: args.include_incorrect,
        exclude_prediction: args.exclude_unreached.then_some(unreached),
    };
    let report = evaluate(&predictions, &manifest, responses.as_ref(), &options)?;

    create_out(&args.out)?;
    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "spearman_rho,{}", report.spearman_rho);
    let _ = writeln!(csv, "baseline_rho,{}", report.baseline_rho);
    let _ = writeln!(csv, "ceiling_rho,{}", opt(report.ceiling_rho));
    let _ = writeln!(csv, "n_trials,{}", report.n_trials);
    write_text(&args.out.join("eval_report.csv"), &csv)?;

    let mut csv = String::from("condition,model_mean,model_sem,model_n,human_mean,human_sem,human_n\n");
    for (c, s) in &report.condition_means {
        let [mm, ms, mn] = fmt_stats(s.model);
        let [hm, hs, hn] = fmt_stats(s.human);
        let _ = writeln!(csv, "{c},{mm},{ms},{mn},{hm},{hs},{hn}");
    }
    write_text(&args.out.join("conditions.csv"), &csv)?;

    let by_id: BTreeMap<&str, Condition> = manifest.iter().map(|t| (t.trial_id.as_str(), t.condition)).collect();
    let steps_like = predictions
        .values()
        .all(|&p| p.fract() == 0.0 && p >= 1.0 && p <= unreached);
    if steps_like {
        let mut histogram: BTreeMap<Condition, Vec<usize>> = Condition::ALL
            .iter()
            .map(|&c| (c, vec![0; args.max_steps + 1]))
            .collect();
        for (id, &p) in &predictions {
            histogram.get_mut(&by_id[id.as_str()]).unwrap()[p as usize - 1] += 1;
        }
        write_text(&args.out.join("histogram.csv"), &histogram_csv(&histogram))?;
    }

    let mut text = format!(
        "spearman rho    {:.4} (n = {})\neuclidean rho   {:.4}\n",
        report.spearman_rho, report.n_trials, report.baseline_rho
    );
    match report.ceiling_rho {
        Some(c) => {
            let _ = writeln!(text, "split-half rho  {c:.4} ({} splits)", args.n_splits);
        }
        None => text.push_str("split-half rho  - (no responses)\n"),
    }
    text.push_str("condition   model mean (sem)      human mean (sem)\n");
    for (c, s) in &report.condition_means {
        let cell = |m: Option<MeanSem>| match m {
            Some(m) => format!("{:.3} ({:.3})", m.mean, m.sem),
            None => "-".into(),
        };
        let _ = writeln!(text, "{:<11} {:<21} {}", c.as_str(), cell(s.model), cell(s.human));
    }
    write_text(&args.out.join("eval_summary.txt"), &text)?;
    write_json(
        &args.out.join("eval_summary.json"),
        &EvalSummary {
            command: "eval",
            options,
            report: &report,
        },
    )?;
    Ok(text)
}
