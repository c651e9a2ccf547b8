//! Command-line driver: attack campaigns, parameter sweeps,
//! initialization comparison, trajectory recording, and report emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sparse_strike::campaign::{
    self, CampaignConfig, CompareRow, EpisodeRecord, SummaryRow, Sweep, TcaMode,
};
use sparse_strike::envs::trajectory::{read_trajectory, record_scripted, write_trajectory};
use sparse_strike::envs::{make_env, EnvName, EnvSpec};
use sparse_strike::ga::{GaConfig, InitMode};
use sparse_strike::perturb::{FsaConfig, TargetChannels};
use sparse_strike::policy::{greedy_action, load_policy, PolicySpec};
use sparse_strike::state::{FrameState, StateShape};
use sparse_strike::tca::TcaConfig;

#[derive(Parser)]
#[command(name = "sparse-strike", version, about = "Sparse-pixel adversarial attacks on RL policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an attack campaign with fixed parameters.
    Attack(AttackArgs),
    /// Run unattacked episodes (gate permanently closed).
    Baseline(AttackArgs),
    /// Sweep the perturbation size n.
    SweepFsa(SweepFsaArgs),
    /// Sweep the uncertainty threshold.
    SweepTca(SweepTcaArgs),
    /// Compare random vs warm-start GA initialization on a recorded trajectory.
    CompareInit(CompareInitArgs),
    /// Record a trajectory to a binary file.
    Record(RecordArgs),
    /// Emit plot-ready series from a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TargetChannelsArg {
    NewestOnly,
    AllChannels,
}

impl From<TargetChannelsArg> for TargetChannels {
    fn from(v: TargetChannelsArg) -> Self {
        match v {
            TargetChannelsArg::NewestOnly => TargetChannels::NewestOnly,
            TargetChannelsArg::AllChannels => TargetChannels::AllChannels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitArg {
    RandomInit,
    WarmStart,
}

impl From<InitArg> for InitMode {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::RandomInit => InitMode::RandomInit,
            InitArg::WarmStart => InitMode::WarmStart,
        }
    }
}

/// Flags shared by campaign-shaped subcommands. All optional here;
/// resolution order is flag > config file > built-in default.
#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Policy file (JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Environment name: mini_pong or grid_chase.
    #[arg(long)]
    env: Option<String>,
    /// Frame stack shape HxWxC (default: environment default).
    #[arg(long)]
    shape: Option<String>,
    /// Number of attacked pixels per frame.
    #[arg(long)]
    fsa_size: Option<usize>,
    /// Fixed uncertainty threshold in [0, 1].
    #[arg(long, conflicts_with = "tca_mean_of_trajectory")]
    tca_threshold: Option<f64>,
    /// Use the mean uncertainty of an unattacked rollout as the threshold.
    #[arg(long)]
    tca_mean_of_trajectory: bool,
    /// Channels each perturbed pixel writes to.
    #[arg(long, value_enum)]
    target_channels: Option<TargetChannelsArg>,
    /// GA population size.
    #[arg(long)]
    pop_size: Option<usize>,
    /// GA evaluation budget per attacked frame.
    #[arg(long)]
    max_evals: Option<usize>,
    /// GA elite fraction in (0, 1).
    #[arg(long)]
    selection_rate: Option<f64>,
    /// GA mutation noise scale.
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// GA initialization mode.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Episodes per sweep point.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed (fallback: SPARSE_STRIKE_SEED env var).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: machine parallelism). Does not affect outputs.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON config file supplying defaults for any flag above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SweepFsaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sizes to sweep: comma list (1,2,4) or inclusive range (1:10).
    #[arg(long, default_value = "1:10")]
    sizes: String,
}

#[derive(Args, Debug)]
struct SweepTcaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Thresholds to sweep: comma list (0.1,0.5) or range start:end:step.
    #[arg(long, default_value = "0.0:1.0:0.1")]
    thresholds: String,
}

#[derive(Args, Debug)]
struct CompareInitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recorded trajectory to replay.
    #[arg(long)]
    trajectory: PathBuf,
    /// GA trials per init mode per gated frame.
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Args, Debug)]
struct RecordArgs {
    /// Environment name: mini_pong or grid_chase.
    #[arg(long)]
    env: String,
    /// Acting agent: the env's scripted expert, or a policy file.
    #[arg(long, default_value = "scripted")]
    agent: String,
    /// Policy file; required when --agent policy.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Output trajectory file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory containing summary.csv.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output format (plotdata only).
    #[arg(long, default_value = "plotdata")]
    format: String,
}

/// Optional config-file fields; any flag left unset falls back to these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    policy: Option<PathBuf>,
    env: Option<String>,
    shape: Option<String>,
    fsa_size: Option<usize>,
    tca_threshold: Option<f64>,
    tca_mean_of_trajectory: Option<bool>,
    target_channels: Option<TargetChannelsArg>,
    pop_size: Option<usize>,
    max_evals: Option<usize>,
    selection_rate: Option<f64>,
    mutation_rate: Option<f64>,
    init: Option<InitArg>,
    runs: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
}

/// Fully resolved campaign parameters, written to meta.json verbatim.
#[derive(Debug, Serialize)]
struct ResolvedConfig {
    tool_version: &'static str,
    policy: PathBuf,
    env: String,
    shape: [usize; 3],
    fsa_size: usize,
    tca: TcaMode,
    target_channels: TargetChannelsArg,
    pop_size: usize,
    max_evals: usize,
    selection_rate: f64,
    mutation_rate: f64,
    init: InitArg,
    runs: usize,
    seed: u64,
    threads: Option<usize>,
}

struct Resolved {
    config: CampaignConfig,
    meta: ResolvedConfig,
    out: PathBuf,
}

fn parse_shape(s: &str) -> Result<StateShape> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.parse::<usize>().context("shape must be HxWxC"))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("shape must have three dimensions HxWxC, got `{s}`");
    }
    Ok(StateShape::new(parts[0], parts[1], parts[2])?)
}

fn env_seed() -> Option<u64> {
    std::env::var("SPARSE_STRIKE_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn resolve(common: &CommonArgs) -> Result<Resolved> {
    let file: FileConfig = match &common.config {
        Some(path) => serde_json::from_slice(
            &fs::read(path).with_context(|| format!("reading {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?,
        None => FileConfig::default(),
    };

    let policy_path = common
        .policy
        .clone()
        .or(file.policy)
        .context("--policy is required (flag or config file)")?;
    let policy = load_policy(
        &fs::read(&policy_path).with_context(|| format!("reading {}", policy_path.display()))?,
    )?;

    let env_name: EnvName = common
        .env
        .clone()
        .or(file.env)
        .context("--env is required (flag or config file)")?
        .parse()?;
    let seed = common
        .seed
        .or(file.seed)
        .or_else(env_seed)
        .unwrap_or(0);
    let mut env = EnvSpec::defaults(env_name, seed);
    if let Some(shape) = common.shape.as_deref().or(file.shape.as_deref()) {
        env.shape = parse_shape(shape)?;
    }

    let fsa_size = common.fsa_size.or(file.fsa_size).unwrap_or(1);
    let target_channels = common
        .target_channels
        .or(file.target_channels)
        .unwrap_or(TargetChannelsArg::NewestOnly);
    let fsa = FsaConfig::new(fsa_size, target_channels.into())?;

    let tca = match (
        common.tca_threshold.or(file.tca_threshold),
        common.tca_mean_of_trajectory || file.tca_mean_of_trajectory.unwrap_or(false),
    ) {
        (Some(t), _) => TcaMode::Fixed(t),
        (None, true) => TcaMode::MeanOfTrajectory,
        (None, false) => TcaMode::Fixed(0.5),
    };

    let defaults = GaConfig::default();
    let init = common.init.or(file.init).unwrap_or(InitArg::RandomInit);
    let ga = GaConfig {
        population_size: common.pop_size.or(file.pop_size).unwrap_or(defaults.population_size),
        selection_rate: common
            .selection_rate
            .or(file.selection_rate)
            .unwrap_or(defaults.selection_rate),
        mutation_rate: common
            .mutation_rate
            .or(file.mutation_rate)
            .unwrap_or(defaults.mutation_rate),
        max_evaluations: common
            .max_evals
            .or(file.max_evals)
            .unwrap_or(defaults.max_evaluations),
        init_mode: init.into(),
    };

    let runs = common.runs.or(file.runs).unwrap_or(30);
    let threads = common.threads.or(file.threads);
    let out = common
        .out
        .clone()
        .or(file.out)
        .context("--out is required (flag or config file)")?;

    let meta = ResolvedConfig {
        tool_version: env!("CARGO_PKG_VERSION"),
        policy: policy_path,
        env: env_name.to_string(),
        shape: [env.shape.height, env.shape.width, env.shape.channels],
        fsa_size,
        tca,
        target_channels,
        pop_size: ga.population_size,
        max_evals: ga.max_evaluations,
        selection_rate: ga.selection_rate,
        mutation_rate: ga.mutation_rate,
        init,
        runs,
        seed,
        threads,
    };
    let config = CampaignConfig {
        policy,
        env,
        fsa,
        ga,
        tca,
        runs,
        base_seed: seed,
    };
    config.validate()?;
    Ok(Resolved { config, meta, out })
}

fn init_thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (usize, usize) = (a.parse()?, b.parse()?);
        if a == 0 || b < a {
            bail!("invalid range `{s}`");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| Ok(p.trim().parse::<usize>()?))
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (start, end, step): (f64, f64, f64) =
            (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        if step <= 0.0 || end < start {
            bail!("invalid range `{s}`");
        }
        let mut out = Vec::new();
        // count-based stepping avoids accumulation drift at the endpoint
        let count = ((end - start) / step).round() as usize;
        for i in 0..=count {
            let v = start + i as f64 * step;
            if v <= end + 1e-12 {
                out.push(v.min(end));
            }
        }
        return Ok(out);
    }
    if parts.len() != 1 {
        bail!("threshold range must be start:end:step, got `{s}`");
    }
    s.split(',')
        .map(|p| Ok(p.trim().parse::<f64>()?))
        .collect()
}

fn write_episodes(path: &Path, groups: &[Vec<EpisodeRecord>]) -> Result<()> {
    let mut buf = Vec::new();
    for group in groups {
        for record in group {
            serde_json::to_writer(&mut buf, record)?;
            buf.push(b'\n');
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::from(
        "sweep_param,value,mean_reward,std_reward,mean_attacked_frames,std_attacked_frames,mean_total_frames,std_total_frames,runs\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.sweep_param,
            r.value,
            r.mean_reward,
            r.std_reward,
            r.mean_attacked_frames,
            r.std_attacked_frames,
            r.mean_total_frames,
            r.std_total_frames,
            r.runs
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_compare(path: &Path, rows: &[CompareRow]) -> Result<()> {
    let mut out = String::from("frame,mode,trial,evaluations,best_objective\n");
    for r in rows {
        let mode = match r.mode {
            InitMode::RandomInit => "random_init",
            InitMode::WarmStart => "warm_start",
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.frame, mode, r.trial, r.evaluations, r.best_objective
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_meta(dir: &Path, meta: &ResolvedConfig) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(meta)?;
    bytes.push(b'\n');
    fs::write(dir.join("meta.json"), bytes)?;
    Ok(())
}

fn print_summary_line(rows: &[SummaryRow]) {
    for r in rows {
        println!(
            "{}={}: mean reward {:.3} (std {:.3}), attacked frames {:.1}/{:.1}, runs {}",
            r.sweep_param,
            r.value,
            r.mean_reward,
            r.std_reward,
            r.mean_attacked_frames,
            r.mean_total_frames,
            r.runs
        );
    }
}

fn run_campaign_command(common: &CommonArgs, baseline: bool) -> Result<()> {
    let mut resolved = resolve(common)?;
    init_thread_pool(resolved.meta.threads)?;
    if baseline {
        // closed gate: identical episode mechanics, zero attacks
        resolved.config.tca = TcaMode::Fixed(0.0);
        resolved.meta.tca = TcaMode::Fixed(0.0);
    }
    let records = campaign::run_campaign(&resolved.config)?;
    let label = if baseline { "baseline" } else { "fsa_size" };
    let value = if baseline {
        0.0
    } else {
        resolved.config.fsa.n as f64
    };
    let row = campaign::summarize(label, value, &records)?;

    fs::create_dir_all(&resolved.out)?;
    write_episodes(&resolved.out.join("episodes.jsonl"), &[records])?;
    write_summary(&resolved.out.join("summary.csv"), std::slice::from_ref(&row))?;
    write_meta(&resolved.out, &resolved.meta)?;
    print_summary_line(&[row]);
    Ok(())
}

fn run_sweep_command(common: &CommonArgs, sweep: Sweep) -> Result<()> {
    let resolved = resolve(common)?;
    init_thread_pool(resolved.meta.threads)?;
    let result = campaign::run_sweep(&resolved.config, &sweep)?;
    fs::create_dir_all(&resolved.out)?;
    write_episodes(&resolved.out.join("episodes.jsonl"), &result.episodes)?;
    write_summary(&resolved.out.join("summary.csv"), &result.rows)?;
    write_meta(&resolved.out, &resolved.meta)?;
    print_summary_line(&result.rows);
    Ok(())
}

fn run_compare_init(args: &CompareInitArgs) -> Result<()> {
    let resolved = resolve(&args.common)?;
    init_thread_pool(resolved.meta.threads)?;
    let mut file = fs::File::open(&args.trajectory)
        .with_context(|| format!("reading {}", args.trajectory.display()))?;
    let trajectory = read_trajectory(&mut file)?;
    let gate = match resolved.config.tca {
        TcaMode::Fixed(t) => TcaConfig::new(t)?,
        TcaMode::MeanOfTrajectory => {
            bail!("compare-init needs a fixed --tca-threshold")
        }
    };
    let rows = campaign::compare_init(
        &resolved.config.policy,
        &trajectory,
        &resolved.config.fsa,
        &resolved.config.ga,
        &gate,
        args.trials,
        resolved.config.base_seed,
    )?;
    fs::create_dir_all(&resolved.out)?;
    write_compare(&resolved.out.join("compare_init.csv"), &rows)?;
    write_meta(&resolved.out, &resolved.meta)?;
    let gated: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.frame).collect();
    println!(
        "compare-init: {} gated frames, {} trials written",
        gated.len(),
        rows.len()
    );
    Ok(())
}

fn run_record(args: &RecordArgs) -> Result<()> {
    let name: EnvName = args.env.parse()?;
    let seed = args.seed.or_else(env_seed).unwrap_or(0);
    let mut spec = EnvSpec::defaults(name, seed);
    if let Some(steps) = args.max_steps {
        spec.max_steps = steps;
    }
    let mut env = make_env(&spec)?;
    let trajectory = match args.agent.as_str() {
        "scripted" => record_scripted(env.as_mut(), spec.max_steps)?,
        "policy" => {
            let path = args
                .policy
                .as_ref()
                .context("--agent policy requires --policy")?;
            let policy: PolicySpec = load_policy(&fs::read(path)?)?;
            record_policy(env.as_mut(), &policy, spec.max_steps)?
        }
        other => bail!("unknown agent `{other}` (expected scripted or policy)"),
    };
    let mut out = Vec::new();
    write_trajectory(&mut out, &trajectory)?;
    fs::write(&args.out, out)?;
    println!(
        "recorded {} steps, total reward {}",
        trajectory.steps.len(),
        trajectory.total_reward()
    );
    Ok(())
}

fn record_policy(
    env: &mut dyn sparse_strike::envs::Environment,
    policy: &PolicySpec,
    max_steps: usize,
) -> Result<sparse_strike::envs::trajectory::Trajectory> {
    use sparse_strike::envs::trajectory::{Trajectory, TrajectoryStep};
    let mut state = FrameState::zeros(policy.input_shape);
    let mut frame = env.reset();
    state = state.push_frame(&frame)?;
    let mut steps = Vec::new();
    let mut t = 0;
    while !env.done() && t < max_steps {
        let action = greedy_action(&policy.query(&state)?);
        let result = env.step(action)?;
        steps.push(TrajectoryStep {
            t: t as u32,
            frame,
            action: action as u32,
            reward: result.reward,
            done: result.done,
        });
        frame = result.observation;
        state = state.push_frame(&frame)?;
        t += 1;
    }
    Ok(Trajectory {
        height: env.frame_height(),
        width: env.frame_width(),
        steps,
    })
}

#[derive(Debug, Serialize)]
struct PlotSeries {
    sweep_param: String,
    x: Vec<f64>,
    y: Vec<f64>,
    err: Vec<f64>,
}

fn run_report(args: &ReportArgs) -> Result<()> {
    if args.format != "plotdata" {
        bail!("unknown report format `{}`", args.format);
    }
    let path = args.input.join("summary.csv");
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty summary.csv")?;
    if !header.starts_with("sweep_param,value,mean_reward,std_reward") {
        bail!("unrecognized summary.csv header");
    }
    let mut series: Vec<PlotSeries> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            bail!("malformed summary row: `{line}`");
        }
        let param = cols[0];
        let (x, y, err): (f64, f64, f64) =
            (cols[1].parse()?, cols[2].parse()?, cols[3].parse()?);
        match series.iter_mut().find(|s| s.sweep_param == param) {
            Some(s) => {
                s.x.push(x);
                s.y.push(y);
                s.err.push(err);
            }
            None => series.push(PlotSeries {
                sweep_param: param.to_string(),
                x: vec![x],
                y: vec![y],
                err: vec![err],
            }),
        }
    }
    // tolerate a closed pipe (e.g. `report | head`)
    use std::io::Write;
    let mut stdout = std::io::stdout();
    let payload = serde_json::to_string_pretty(&series)?;
    match writeln!(stdout, "{payload}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Attack(args) => run_campaign_command(&args.common, false),
        Command::Baseline(args) => run_campaign_command(&args.common, true),
        Command::SweepFsa(args) => {
            let sizes = parse_usize_list(&args.sizes)?;
            run_sweep_command(&args.common, Sweep::FsaSizes(sizes))
        }
        Command::SweepTca(args) => {
            let thresholds = parse_f64_list(&args.thresholds)?;
            run_sweep_command(&args.common, Sweep::TcaThresholds(thresholds))
        }
        Command::CompareInit(args) => run_compare_init(&args),
        Command::Record(args) => run_record(&args),
        Command::Report(args) => run_report(&args),
    }
}

fn main() -> ExitCode {
    // clap handles usage errors itself with exit status 2
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
