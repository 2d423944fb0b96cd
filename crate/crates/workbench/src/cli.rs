//! The `rhirl` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rhirl_core::evaluation::{evaluate_group, export_convergence, plateau_report, GroupReport};
use rhirl_core::policy::{rollout, TrainedPolicy};
use rhirl_core::reachability::{validate_reachability, ReachabilityOptions};
use rhirl_core::rhirl::{train_with_clock, LearnerConfig};
use rhirl_core::trace::{to_demonstrations, ExpertOptions, Trace};
use rhirl_core::{FeatureMap, WorldSpec};
use serde::Serialize;
use serde_json::json;

use crate::error::{exit, Result, WorkbenchError};
use crate::fsutil::{read_json, write_atomic, write_json};
use crate::groups::{default_groups, GroupSpec};
use crate::manifest::ManifestBuilder;
use crate::pipeline::{self, sanitize};
use crate::service::{self, AppState};
use crate::store::TraceStore;
use crate::story_io::{self, BUNDLED_STORY, BUNDLED_STORY_NAME};
use crate::weights::WeightsDocument;
use crate::{chart, repl, tables};

#[derive(Debug, Parser)]
#[command(name = "rhirl", version, about = "Learn player reward functions from interactive-fiction traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct StoryArg {
    /// Story document (JSON). Defaults to the bundled story.
    #[arg(long)]
    pub story: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TracesArg {
    /// Trace corpus root, laid out as <root>/<source>/<trace_id>.json.
    #[arg(long, env = "NA_DATA_DIR", default_value = "data/traces")]
    pub traces: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a story document and search for paths to every ending.
    Validate {
        #[command(flatten)]
        story: StoryArg,
        /// Write the report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Play in the terminal and record a trace.
    Play {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        /// Write the trace here instead of into the corpus.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate synthetic expert traces into the corpus.
    Synthesize {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        /// Ending the experts pursue.
        #[arg(long)]
        ending: String,
        /// Traces to keep.
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Rollouts to draw; with --require-ending only those reaching the ending are kept.
        #[arg(long, default_value_t = 60)]
        attempts: usize,
        #[arg(long)]
        require_ending: bool,
        /// Share of the expert reward on the ending indicators.
        #[arg(long, default_value_t = pipeline::DEFAULT_ENDING_SHARE)]
        ending_share: f64,
        /// Per-step cost in the expert reward.
        #[arg(long, default_value_t = pipeline::DEFAULT_LIVING_COST)]
        living_cost: f64,
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the run manifest here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Learn a reward function from one group of traces.
    Train {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        /// `end:<ending id>` or `<factor>=<0|1>`.
        #[arg(long)]
        group: GroupSpec,
        #[arg(long, default_value_t = 4)]
        horizon: usize,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run a learned reward as a policy and record the trace.
    Rollout {
        #[command(flatten)]
        story: StoryArg,
        #[arg(long)]
        weights: PathBuf,
        /// Defaults to the horizon stored with the weights.
        #[arg(long)]
        horizon: Option<usize>,
        /// Defaults to the β stored with the weights.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Sample actions instead of acting greedily.
        #[arg(long)]
        sampled: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "policy")]
        id: String,
        /// Trace file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare a policy trace with every trace of a group.
    Evaluate {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        #[arg(long)]
        group: GroupSpec,
        /// Policy trace file.
        #[arg(long)]
        policy: PathBuf,
        /// Recorded in the report.
        #[arg(long, default_value_t = 4)]
        horizon: usize,
        /// Recorded in the report.
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Train, roll out and evaluate every group × horizon × β cell.
    Grid {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        /// Groups to use; defaults to every ending and profile group present.
        #[arg(long, value_delimiter = ',')]
        group: Vec<GroupSpec>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
        horizon: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0])]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 100)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Draw a convergence table as an SVG line chart.
    Plot {
        /// Convergence table (CSV).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Host live play sessions over HTTP.
    Serve {
        #[command(flatten)]
        story: StoryArg,
        #[command(flatten)]
        traces: TracesArg,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Built play client to serve at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Allowed cross-origin client; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
        /// Idle time after which a session is stored as abandoned.
        #[arg(long, default_value_t = 24.0)]
        ttl_hours: f64,
        /// Write the bound address as JSON once listening.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(out, "{}", e.render());
            return if code == 0 { exit::OK } else { exit::INVALID_INPUT };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) {
    let _ = writeln!(out, "{}", text.as_ref());
}

struct LoadedStory {
    world: WorldSpec,
    bytes: Vec<u8>,
    name: String,
}

fn load_story(arg: &StoryArg) -> Result<LoadedStory> {
    match &arg.story {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| WorkbenchError::io(p, e))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| WorkbenchError::Invalid(format!("{}: not UTF-8", p.display())))?;
            Ok(LoadedStory {
                world: story_io::parse_world(&text, p)?,
                bytes,
                name: p.display().to_string(),
            })
        }
        None => Ok(LoadedStory {
            world: story_io::bundled_world(),
            bytes: BUNDLED_STORY.as_bytes().to_vec(),
            name: BUNDLED_STORY_NAME.to_string(),
        }),
    }
}

fn load_corpus(root: &Path, world: &WorldSpec) -> Result<Vec<Trace>> {
    let all = TraceStore::new(root).load_all()?;
    let (ours, foreign): (Vec<Trace>, Vec<Trace>) =
        all.into_iter().partition(|t| t.story_fingerprint == world.fingerprint());
    if !foreign.is_empty() {
        tracing::warn!("ignoring {} traces recorded against another story", foreign.len());
    }
    Ok(ours)
}

fn manifest_next_to(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Validate { story, output } => cmd_validate(&story, output.as_deref(), out),
        Command::Play { story, traces, output } => cmd_play(&story, &traces.traces, output.as_deref(), out),
        Command::Synthesize {
            story,
            traces,
            ending,
            count,
            attempts,
            require_ending,
            ending_share,
            living_cost,
            beta,
            horizon,
            cap,
            seed,
            output,
        } => {
            let options = ExpertOptions {
                beta,
                horizon,
                cap,
                seed,
            };
            cmd_synthesize(
                &story,
                &traces.traces,
                &ending,
                count,
                attempts,
                require_ending,
                (ending_share, living_cost),
                options,
                output.as_deref(),
                out,
            )
        }
        Command::Train {
            story,
            traces,
            group,
            horizon,
            beta,
            iterations,
            seed,
            output,
        } => {
            let cfg = LearnerConfig {
                horizon,
                beta,
                max_iterations: iterations,
                seed,
                ..LearnerConfig::default()
            };
            cmd_train(&story, &traces.traces, &group, &cfg, &output, out)
        }
        Command::Rollout {
            story,
            weights,
            horizon,
            beta,
            cap,
            sampled,
            seed,
            id,
            output,
        } => cmd_rollout(&story, &weights, horizon, beta, cap, sampled, seed, &id, &output, out),
        Command::Evaluate {
            story,
            traces,
            group,
            policy,
            horizon,
            beta,
            output,
        } => cmd_evaluate(&story, &traces.traces, &group, &policy, horizon, beta, &output, out),
        Command::Grid {
            story,
            traces,
            group,
            horizon,
            beta,
            iterations,
            cap,
            seed,
            jobs,
            output,
        } => {
            let base = LearnerConfig {
                max_iterations: iterations,
                seed,
                ..LearnerConfig::default()
            };
            cmd_grid(&story, &traces.traces, &group, &horizon, &beta, &base, cap, jobs, &output, out)
        }
        Command::Plot { input, title, output } => cmd_plot(&input, title.as_deref(), &output, out),
        Command::Serve {
            story,
            traces,
            bind,
            static_dir,
            cors_origin,
            ttl_hours,
            output,
        } => cmd_serve(&story, &traces.traces, &bind, static_dir, cors_origin.as_deref(), ttl_hours, output.as_deref()),
    }
}

#[derive(Debug, Serialize)]
struct EndingSummary {
    ending: String,
    reachable: bool,
    shortest_length: Option<usize>,
    shortest: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    story: String,
    fingerprint: String,
    locations: usize,
    objects: usize,
    plot_points: usize,
    states_explored: usize,
    search_complete: bool,
    endings: Vec<EndingSummary>,
    unreachable_plot_points: Vec<String>,
}

fn cmd_validate(story: &StoryArg, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let s = load_story(story)?;
    let w = &s.world;
    let report = validate_reachability(w, ReachabilityOptions::default());
    let summary = ValidationReport {
        story: s.name.clone(),
        fingerprint: w.fingerprint().to_string(),
        locations: w.locations().len(),
        objects: w.objects().len(),
        plot_points: w.plot_points().len(),
        states_explored: report.states_explored,
        search_complete: report.complete,
        endings: report
            .endings
            .iter()
            .map(|e| EndingSummary {
                ending: w.plot_point(e.ending).id.clone(),
                reachable: e.reachable(),
                shortest_length: e.shortest.as_ref().map(Vec::len),
                shortest: e.shortest.as_ref().map(|p| p.iter().map(|a| a.label(w)).collect()),
            })
            .collect(),
        unreachable_plot_points: report.unreachable.iter().map(|p| w.plot_point(*p).id.clone()).collect(),
    };
    say(out, format!("{}: {} states explored", s.name, summary.states_explored));
    for e in &summary.endings {
        match e.shortest_length {
            Some(n) => say(out, format!("  {} reachable in {n} actions", e.ending)),
            None => say(out, format!("  {} NOT reachable", e.ending)),
        }
    }
    for p in &summary.unreachable_plot_points {
        say(out, format!("  plot point {p} is unreachable"));
    }
    if let Some(path) = output {
        write_json(path, &summary)?;
        let mut m = ManifestBuilder::new("validate", json!({}), 0);
        m.input_bytes(&s.name, &s.bytes);
        m.output("report", path);
        m.write(&manifest_next_to(path))?;
    }
    if !report.all_endings_reachable() {
        return Err(WorkbenchError::Invalid("some endings cannot be reached".to_string()));
    }
    Ok(())
}

fn cmd_play(story: &StoryArg, traces: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let s = load_story(story)?;
    let id = uuid::Uuid::new_v4().to_string();
    let player = format!("player-{}", &id[..8]);
    let started = Instant::now();
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let trace = repl::play(&s.world, &id, &player, &mut input, out, &mut || {
        started.elapsed().as_millis() as u64
    })?;
    let path = match output {
        Some(p) => {
            write_json(p, &trace)?;
            p.to_path_buf()
        }
        None => TraceStore::new(traces).save(&trace)?,
    };
    let mut m = ManifestBuilder::new("play", json!({}), 0);
    m.input_bytes(&s.name, &s.bytes);
    m.output("trace", &path);
    m.write(&manifest_next_to(&path))?;
    say(out, format!("saved trace {} to {}", trace.trace_id, path.display()));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synthesize(
    story: &StoryArg,
    traces: &Path,
    ending: &str,
    count: usize,
    attempts: usize,
    require_ending: bool,
    (ending_share, living_cost): (f64, f64),
    options: ExpertOptions,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    if count == 0 {
        return Err(WorkbenchError::Invalid("--count must be at least 1".to_string()));
    }
    let s = load_story(story)?;
    let rm = pipeline::expert_reward(&s.world, ending, ending_share, living_cost)?;
    let attempts = if require_ending { attempts } else { count };
    let result = pipeline::synthesize(
        &s.world,
        &rm,
        count,
        attempts,
        require_ending.then_some(ending),
        options,
    )?;
    let store = TraceStore::new(traces);
    let mut m = ManifestBuilder::new(
        "synthesize",
        json!({
            "ending": ending, "count": count, "attempts": attempts, "require_ending": require_ending,
            "ending_share": ending_share, "living_cost": living_cost, "beta": options.beta, "horizon": options.horizon, "cap": options.cap,
        }),
        options.seed,
    );
    m.input_bytes(&s.name, &s.bytes);
    for t in &result.traces {
        let p = store.save(t)?;
        m.output(&t.trace_id, &p);
    }
    let reached = result.traces.iter().filter(|t| t.end_reached.as_deref() == Some(ending)).count();
    say(
        out,
        format!(
            "wrote {} traces ({} reach {ending}); {}/{} rollouts reached it",
            result.traces.len(),
            reached,
            result.successes,
            result.attempts
        ),
    );
    if let Some(path) = output {
        m.write(path)?;
    }
    if result.traces.len() < count {
        return Err(WorkbenchError::Runtime(format!(
            "only {} of {count} requested traces reached {ending}",
            result.traces.len()
        )));
    }
    Ok(())
}

fn cmd_train(
    story: &StoryArg,
    traces: &Path,
    group: &GroupSpec,
    cfg: &LearnerConfig,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    cfg.validate()?;
    let s = load_story(story)?;
    let corpus = load_corpus(traces, &s.world)?;
    let g = group.select(&corpus);
    if g.is_empty() {
        return Err(WorkbenchError::Invalid(format!("group {group} has no traces")));
    }
    let fm = FeatureMap::for_world(&s.world);
    let demos = to_demonstrations(&s.world, &g, &corpus)?;
    let started = Instant::now();
    let (rm, record) = train_with_clock(&s.world, &fm, &demos, cfg, &mut || started.elapsed().as_secs_f64())?;

    let mut m = ManifestBuilder::new("train", json!({"group": group.to_string(), "learner": cfg}), cfg.seed);
    m.input_bytes(&s.name, &s.bytes);
    m.input_dir(traces)?;
    let weights_path = output.join("weights.json");
    write_json(
        &weights_path,
        &WeightsDocument::from_model(&s.world, &rm, Some(cfg.horizon), Some(cfg.beta)),
    )?;
    m.output("weights", &weights_path);
    let training_path = output.join("training.csv");
    write_atomic(&training_path, tables::training_csv(&record).as_bytes())?;
    m.output("training", &training_path);
    m.write(&output.join("manifest.json"))?;
    say(
        out,
        format!(
            "{} demonstrations, log-likelihood {:.4} -> {:.4}",
            demos.len(),
            record.iterations[0].log_likelihood,
            record.final_log_likelihood()
        ),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rollout(
    story: &StoryArg,
    weights: &Path,
    horizon: Option<usize>,
    beta: Option<f64>,
    cap: usize,
    sampled: bool,
    seed: u64,
    id: &str,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let s = load_story(story)?;
    let doc: WeightsDocument = read_json(weights)?;
    let rm = doc.to_model(&s.world)?;
    let horizon = horizon.or(doc.horizon).unwrap_or(4);
    let beta = beta.or(doc.beta).unwrap_or(0.1);
    LearnerConfig::new(horizon, beta).validate()?;
    let policy = if sampled {
        TrainedPolicy::sampled(rm, horizon, beta, seed)
    } else {
        TrainedPolicy::greedy(rm, horizon, beta)
    };
    let generated = rollout(&policy, &s.world, cap)?;
    let trace = pipeline::policy_trace(&s.world, id, &generated)?;
    write_json(output, &trace)?;
    let mut m = ManifestBuilder::new(
        "rollout",
        json!({"horizon": horizon, "beta": beta, "cap": cap, "sampled": sampled, "id": id}),
        seed,
    );
    m.input_bytes(&s.name, &s.bytes);
    m.input_file(weights)?;
    m.output("trace", output);
    m.write(&manifest_next_to(output))?;
    say(
        out,
        format!(
            "{} actions, {} plot points, ending: {}",
            generated.actions.len(),
            generated.plot_points_discovered.len(),
            trace.end_reached.as_deref().unwrap_or("none")
        ),
    );
    Ok(())
}

fn write_report(dir: &Path, report: &GroupReport, m: &mut ManifestBuilder) -> Result<()> {
    let p = dir.join("report.json");
    write_json(&p, report)?;
    m.output("report", &p);
    let p = dir.join("summary.csv");
    write_atomic(&p, tables::summary_csv(std::slice::from_ref(report)).as_bytes())?;
    m.output("summary", &p);
    let p = dir.join("similarities.csv");
    write_atomic(&p, tables::similarities_csv(report).as_bytes())?;
    m.output("similarities", &p);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    story: &StoryArg,
    traces: &Path,
    group: &GroupSpec,
    policy: &Path,
    horizon: usize,
    beta: f64,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let s = load_story(story)?;
    let corpus = load_corpus(traces, &s.world)?;
    let g = group.select(&corpus);
    let policy_trace: Trace = read_json(policy)?;
    let generated = pipeline::generated_from_trace(&s.world, &policy_trace)?;
    let report = evaluate_group(&s.world, &policy_trace.trace_id, &generated, &g, &corpus, horizon, beta)?;
    let mut m = ManifestBuilder::new(
        "evaluate",
        json!({"group": group.to_string(), "horizon": horizon, "beta": beta}),
        0,
    );
    m.input_bytes(&s.name, &s.bytes);
    m.input_dir(traces)?;
    m.input_file(policy)?;
    write_report(output, &report, &mut m)?;
    m.write(&output.join("manifest.json"))?;
    let st = &report.stats;
    say(
        out,
        format!(
            "{}: mean {:.3}, std {:.3}, median {:.3}, min {:.3}, max {:.3} over {} traces",
            report.group_id, st.mean, st.std_dev, st.median, st.min, st.max, st.count
        ),
    );
    Ok(())
}

/// Where one grid cell's files went.
#[derive(Debug, Serialize)]
struct CellEntry {
    group: String,
    horizon: usize,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    files: BTreeMap<String, String>,
    end_reached: Option<String>,
    mean_jaccard: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid(
    story: &StoryArg,
    traces: &Path,
    groups: &[GroupSpec],
    horizons: &[usize],
    betas: &[f64],
    base: &LearnerConfig,
    cap: usize,
    jobs: usize,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let s = load_story(story)?;
    let w = &s.world;
    let corpus = load_corpus(traces, w)?;
    let selected: Vec<_> = if groups.is_empty() {
        default_groups(&corpus)
    } else {
        groups.iter().map(|g| g.select(&corpus)).filter(|g| !g.is_empty()).collect()
    };
    if selected.is_empty() {
        return Err(WorkbenchError::Invalid("no non-empty groups in the corpus".to_string()));
    }
    for &h in horizons {
        LearnerConfig { horizon: h, ..base.clone() }.validate()?;
    }
    for &b in betas {
        LearnerConfig { beta: b, ..base.clone() }.validate()?;
    }
    let results = pipeline::run_grid_cells(w, &selected, &corpus, horizons, betas, base, cap, jobs)?;

    let mut m = ManifestBuilder::new(
        "grid",
        json!({"groups": selected.iter().map(|g| &g.group_id).collect::<Vec<_>>(), "horizons": horizons,
               "betas": betas, "learner": base, "cap": cap}),
        base.seed,
    );
    m.input_bytes(&s.name, &s.bytes);
    m.input_dir(traces)?;

    let mut cells = Vec::new();
    let mut records = BTreeMap::new();
    let mut reports: BTreeMap<(usize, u64), Vec<GroupReport>> = BTreeMap::new();
    let mut failures = 0;
    for (cell, result) in &results {
        let dir = output
            .join("cells")
            .join(sanitize(&cell.group))
            .join(format!("h{}_b{}", cell.horizon, cell.beta));
        let mut entry = CellEntry {
            group: cell.group.clone(),
            horizon: cell.horizon,
            beta: cell.beta,
            error: None,
            files: BTreeMap::new(),
            end_reached: None,
            mean_jaccard: None,
        };
        match result {
            Ok(o) => {
                let mut files = ManifestBuilder::new("cell", json!({}), 0);
                let p = dir.join("weights.json");
                write_json(
                    &p,
                    &WeightsDocument::from_model(w, &o.reward_model, Some(cell.horizon), Some(cell.beta)),
                )?;
                files.output("weights", &p);
                let p = dir.join("training.csv");
                write_atomic(&p, tables::training_csv(&o.record).as_bytes())?;
                files.output("training", &p);
                let p = dir.join("policy.json");
                write_json(&p, &pipeline::policy_trace(w, &o.policy_id, &o.generated)?)?;
                files.output("policy", &p);
                write_report(&dir, &o.report, &mut files)?;
                entry.files = files.finish().outputs;
                entry.end_reached = o.generated.end_reached.map(|e| w.plot_point(e).id.clone());
                entry.mean_jaccard = Some(o.report.stats.mean);
                records.insert(cell.clone(), o.record.clone());
                reports
                    .entry((cell.horizon, cell.beta.to_bits()))
                    .or_default()
                    .push(o.report.clone());
            }
            Err(e) => {
                failures += 1;
                entry.error = Some(e.to_string());
            }
        }
        cells.push(entry);
    }

    for ((h, bits), group_reports) in &reports {
        let p = output.join(format!("summary_h{h}_b{}.csv", f64::from_bits(*bits)));
        write_atomic(&p, tables::summary_csv(group_reports).as_bytes())?;
        m.output(&format!("summary h={h} beta={}", f64::from_bits(*bits)), &p);
    }
    let mut plateaus = Vec::new();
    for table in export_convergence(&records) {
        let stem = format!("{}_b{}", sanitize(&table.group), table.beta);
        let csv_path = output.join("convergence").join(format!("{stem}.csv"));
        write_atomic(&csv_path, tables::convergence_csv(&table).as_bytes())?;
        let svg_path = output.join("convergence").join(format!("{stem}.svg"));
        let title = format!("Convergence, group {} (beta = {})", table.group, table.beta);
        write_atomic(&svg_path, chart::convergence_svg(&table, &title).as_bytes())?;
        m.output(&format!("convergence {stem}"), &csv_path);
        m.output(&format!("chart {stem}"), &svg_path);
        plateaus.push(plateau_report(&table, 0.01));
    }
    let p = output.join("plateau.json");
    write_json(&p, &plateaus)?;
    m.output("plateau", &p);
    let p = output.join("grid.json");
    write_json(&p, &cells)?;
    m.output("grid", &p);
    m.write(&output.join("manifest.json"))?;

    say(out, format!("{} cells, {} failed", results.len(), failures));
    for c in &cells {
        if let Some(mean) = c.mean_jaccard {
            say(
                out,
                format!(
                    "  {:<28} h={} beta={:<4} mean jaccard {:.3}  ending {}",
                    c.group,
                    c.horizon,
                    c.beta,
                    mean,
                    c.end_reached.as_deref().unwrap_or("-")
                ),
            );
        }
    }
    for r in &plateaus {
        say(
            out,
            format!(
                "  plateau {} beta={}: {} (larger horizon not slower: {})",
                r.group,
                r.beta,
                r.entries
                    .iter()
                    .map(|e| format!("h{}:{}", e.horizon, e.iterations_to_plateau))
                    .collect::<Vec<_>>()
                    .join(" "),
                r.larger_horizon_not_slower
            ),
        );
    }
    if failures > 0 {
        return Err(WorkbenchError::Runtime(format!("{failures} grid cells failed")));
    }
    Ok(())
}

fn cmd_plot(input: &Path, title: Option<&str>, output: &Path, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| WorkbenchError::io(input, e))?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let table = tables::parse_convergence_csv(&text, &stem, f64::NAN)?;
    let title = title.map(str::to_string).unwrap_or_else(|| format!("Convergence, {stem}"));
    write_atomic(output, chart::convergence_svg(&table, &title).as_bytes())?;
    let mut m = ManifestBuilder::new("plot", json!({"title": title}), 0);
    m.input_file(input)?;
    m.output("chart", output);
    m.write(&manifest_next_to(output))?;
    say(out, format!("wrote {}", output.display()));
    Ok(())
}

fn cmd_serve(
    story: &StoryArg,
    traces: &Path,
    bind: &str,
    static_dir: Option<PathBuf>,
    cors_origin: Option<&str>,
    ttl_hours: f64,
    output: Option<&Path>,
) -> Result<()> {
    if !(ttl_hours.is_finite() && ttl_hours > 0.0) {
        return Err(WorkbenchError::Invalid("--ttl-hours must be positive".to_string()));
    }
    let s = load_story(story)?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let app = AppState::new(s.world, TraceStore::new(traces), Duration::from_secs_f64(ttl_hours * 3600.0));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| WorkbenchError::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| WorkbenchError::Runtime(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| WorkbenchError::Runtime(e.to_string()))?;
        if let Some(p) = output {
            write_json(p, &json!({"address": addr.to_string()}))?;
        }
        service::serve_on(listener, app, static_dir, cors_origin)
            .await
            .map_err(|e| WorkbenchError::Runtime(e.to_string()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_defaults_match_the_experiment() {
        let cli = Cli::try_parse_from(["rhirl", "grid", "--traces", "t", "--output", "o"]).unwrap();
        match cli.command {
            Command::Grid {
                horizon,
                beta,
                iterations,
                cap,
                ..
            } => {
                assert_eq!(horizon, vec![1, 2, 3, 4]);
                assert_eq!(beta, vec![0.1, 0.5, 1.0]);
                assert_eq!(iterations, 10);
                assert_eq!(cap, 100);
            }
            other => panic!("parsed {other:?}"),
        }
    }
}
