//! `mtplan`: validate, solve, simulate, serve and benchmark multitask
//! scheduling instances.

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};

use mtplan::bench::{
    evaluate_pairs, load_instance_dir, load_recipe_dir, run_bench, write_atomic, write_run_dir,
    BenchConfig, InstanceFilterCriteria, Runner,
};
use mtplan::bridge::{serve_session, BridgeConfig, StreamTransport};
use mtplan::dsl::{parse_recipe, render_recipe_numbered, RenderMode};
use mtplan::gantt::{plan_timeline, render_gantt, GanttFormat, GanttOptions};
use mtplan::interchange::{
    instance_from_str, instance_to_string, transcript_from_str, transcript_to_string,
};
use mtplan::metrics::{evaluate, PrefixOrder};
use mtplan::sched::{greedy_schedule, heuristic_schedule, optimal_schedule, Limits, Plan};
use mtplan::sim::{replay_with, SessionConfig};
use mtplan::{fixtures, Duration, Execution, Instance, Recipe};

const FIXTURES_VAR: &str = "MTPLAN_FIXTURES";

macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

macro_rules! put {
    ($($arg:tt)*) => {
        write!(io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "mtplan", version, about = "Multitask scheduling with time constraints")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Heuristic,
    Greedy,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunnerKind {
    Heuristic,
    Greedy,
    Optimal,
    AgentScript,
    Serve,
}

#[derive(clap::Args)]
struct SessionFlags {
    /// Withhold concurrency and resource annotations (default).
    #[arg(long, conflicts_with = "full")]
    masked: bool,
    /// Show every annotation.
    #[arg(long)]
    full: bool,
    /// Send a hint after every accepted command.
    #[arg(long)]
    hints: bool,
    #[arg(long, default_value_t = 10)]
    max_revisions: u32,
    #[arg(long, default_value_t = 3)]
    repeat_limit: u32,
}

impl SessionFlags {
    fn bridge(&self) -> BridgeConfig {
        BridgeConfig {
            mode: if self.full {
                RenderMode::Full
            } else {
                RenderMode::Masked
            },
            session: SessionConfig {
                hints: self.hints,
                max_revisions: self.max_revisions,
                repeat_limit: self.repeat_limit,
            },
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a recipe document or an instance.
    Validate { target: String },
    /// Print a plan for an instance.
    Solve {
        #[arg(long, value_enum, default_value = "heuristic")]
        solver: Solver,
        /// Plan as if no time constraints existed.
        #[arg(long)]
        no_time_constraints: bool,
        /// Largest instance the optimal solver accepts.
        #[arg(long, default_value_t = 12)]
        max_actions: usize,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        instance: String,
    },
    /// Replay a plan file and score it against the heuristic plan.
    Simulate {
        #[arg(long)]
        hints: bool,
        /// Cut the reference plan in command order instead of completion order.
        #[arg(long)]
        command_order: bool,
        /// Save the transcript as JSON for `gantt`.
        #[arg(long)]
        transcript: Option<PathBuf>,
        instance: String,
        plan: PathBuf,
    },
    /// Run a session with an external agent on standard streams or a socket.
    Serve {
        #[command(flatten)]
        session: SessionFlags,
        /// Accept agents on this address, one session per connection.
        #[arg(long)]
        listen: Option<String>,
        /// Save the transcript as JSON (standard streams only).
        #[arg(long, conflicts_with = "listen")]
        transcript: Option<PathBuf>,
        instance: String,
    },
    /// Run a solver or agent over a directory of instances.
    Bench {
        #[arg(long, value_enum)]
        runner: RunnerKind,
        #[arg(long, conflicts_with = "without_tc")]
        with_tc: bool,
        #[arg(long)]
        without_tc: bool,
        /// Plan directory for the agent-script runner.
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Parent of the run directories.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        command_order: bool,
        #[arg(long, default_value_t = 12)]
        max_actions: usize,
        #[command(flatten)]
        session: SessionFlags,
        instance_dir: PathBuf,
        /// Agent command for the serve runner.
        #[arg(last = true)]
        agent: Vec<String>,
    },
    /// Select recipe pairs worth multitasking.
    Gen {
        #[arg(long, default_value_t = 0.8)]
        min_eff: f64,
        #[arg(long, conflicts_with = "allow_no_drop")]
        require_drop: bool,
        /// Keep pairs whose efficiency does not drop under time constraints.
        #[arg(long)]
        allow_no_drop: bool,
        /// Write every kept instance here as `<label>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
        /// Defaults to the fixture directory, then the bundled library.
        recipe_dir: Option<PathBuf>,
    },
    /// Chart a plan or a saved transcript.
    Gantt {
        #[arg(long)]
        svg: bool,
        /// Instance a plan file belongs to.
        #[arg(long)]
        instance: Option<String>,
        /// Seconds per column or pixel block.
        #[arg(long, default_value_t = 60)]
        quantum: u32,
        #[arg(long, default_value_t = 12)]
        pixels_per_quantum: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        input: PathBuf,
    },
    /// Print the recipe documents of an instance.
    Render {
        #[arg(long, action = ArgAction::SetTrue)]
        masked: bool,
        /// Write the instance file instead of the documents.
        #[arg(long, conflicts_with = "masked")]
        json: bool,
        instance: String,
    },
}

fn fixture_dir() -> Option<PathBuf> {
    std::env::var_os(FIXTURES_VAR).map(PathBuf::from)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn resolve_recipe(name: &str) -> Result<Recipe> {
    let path = Path::new(name);
    if path.is_file() {
        return parse_recipe(&read(path)?).with_context(|| format!("parsing {name}"));
    }
    if let Some(dir) = fixture_dir() {
        for candidate in [name.to_string(), name.to_lowercase()] {
            let p = dir.join(format!("{candidate}.recipe"));
            if p.is_file() {
                return parse_recipe(&read(&p)?).with_context(|| format!("parsing {}", p.display()));
            }
        }
    }
    Ok(fixtures::recipe(name)?)
}

/// A path to an instance or recipe file, or a `+`-joined list of recipe
/// names looked up in the fixture directory and then the bundled library.
fn resolve_instance(spec: &str) -> Result<Instance> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = read(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            return instance_from_str(&text).with_context(|| format!("loading {spec}"));
        }
        let recipe = parse_recipe(&text).with_context(|| format!("parsing {spec}"))?;
        return Ok(Instance::new(vec![recipe])?);
    }
    if let Some(dir) = fixture_dir() {
        let p = dir.join(format!("{spec}.json"));
        if p.is_file() {
            return instance_from_str(&read(&p)?).with_context(|| format!("loading {}", p.display()));
        }
    }
    let recipes = spec
        .split('+')
        .map(|n| resolve_recipe(n.trim()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance::new(recipes)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn validate(target: &str) -> Result<()> {
    let instance = resolve_instance(target)?;
    let mut ok = true;
    for recipe in &instance.recipes {
        let report = recipe.validate();
        say!("{}: {report}", recipe.name);
        ok &= report.is_valid();
    }
    if !ok {
        bail!("{target} is not valid");
    }
    instance.validate()?;
    say!(
        "{}: {} recipes, {} actions",
        instance.label(),
        instance.recipes.len(),
        instance.action_count()
    );
    Ok(())
}

fn solve(solver: Solver, relax: bool, max_actions: usize, out: Option<&Path>, spec: &str) -> Result<()> {
    let mut instance = resolve_instance(spec)?;
    if relax {
        instance = instance.without_time_constraints();
    }
    let plan = match solver {
        Solver::Heuristic => heuristic_schedule(&instance, true)?,
        Solver::Optimal => optimal_schedule(
            &instance,
            Limits {
                max_actions,
                ..Limits::default()
            },
        )?,
        Solver::Greedy => {
            let result = greedy_schedule(&instance)?;
            eprintln!("greedy outcome: {}", result.outcome);
            result.plan
        }
    };
    eprintln!("makespan: {} min", plan.makespan.as_minutes());
    emit(out, &plan.render())
}

fn simulate(hints: bool, command_order: bool, transcript_out: Option<&Path>, spec: &str, plan: &Path) -> Result<()> {
    let instance = resolve_instance(spec)?;
    let plan = Plan::parse(&read(plan)?).with_context(|| format!("parsing {}", plan.display()))?;
    let config = SessionConfig {
        hints,
        ..SessionConfig::default()
    };
    let transcript = replay_with(&instance, &plan.commands(), config)?;
    put!("{}", transcript.render());
    match heuristic_schedule(&instance, true) {
        Ok(reference) => {
            let order = if command_order {
                PrefixOrder::Command
            } else {
                PrefixOrder::Completion
            };
            put!("{}", evaluate(&instance, &transcript, &reference, order)?.to_kv());
        }
        Err(e) => eprintln!("no reference plan, metrics skipped: {e}"),
    }
    if let Some(path) = transcript_out {
        write_atomic(path, &transcript_to_string(&transcript))?;
    }
    Ok(())
}

fn serve(session: &SessionFlags, listen: Option<&str>, transcript_out: Option<&Path>, spec: &str) -> Result<()> {
    let instance = resolve_instance(spec)?;
    let config = session.bridge();
    let reference = heuristic_schedule(&instance, true).ok();
    let Some(addr) = listen else {
        let stdin = io::stdin();
        let mut transport = StreamTransport::new(stdin.lock(), io::stdout());
        let result = serve_session(&instance, &config, &mut transport, reference.as_ref())?;
        eprintln!("{}", result.transcript.outcome);
        if let Some(path) = transcript_out {
            write_atomic(path, &transcript_to_string(&result.transcript))?;
        }
        return Ok(());
    };
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                eprintln!("accept failed: {e}");
                continue;
            }
        };
        let (instance, reference) = (instance.clone(), reference.clone());
        thread::spawn(move || {
            let peer = stream
                .peer_addr()
                .map_or_else(|_| "?".to_string(), |a| a.to_string());
            let reader = match stream.try_clone() {
                Ok(r) => BufReader::new(r),
                Err(e) => return eprintln!("{peer}: {e}"),
            };
            let mut transport = StreamTransport::new(reader, stream);
            match serve_session(&instance, &config, &mut transport, reference.as_ref()) {
                Ok(r) => eprintln!("{peer}: {}", r.transcript.outcome),
                Err(e) => eprintln!("{peer}: {e}"),
            }
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    kind: RunnerKind,
    without_tc: bool,
    plans: Option<PathBuf>,
    out: &Path,
    sequential: bool,
    command_order: bool,
    max_actions: usize,
    session: &SessionFlags,
    dir: &Path,
    agent: Vec<String>,
) -> Result<()> {
    let runner = match kind {
        RunnerKind::Heuristic => Runner::Heuristic,
        RunnerKind::Greedy => Runner::Greedy,
        RunnerKind::Optimal => Runner::Optimal(Limits {
            max_actions,
            ..Limits::default()
        }),
        RunnerKind::AgentScript => Runner::AgentScript(
            plans.ok_or_else(|| anyhow!("--runner agent-script needs --plans <dir>"))?,
        ),
        RunnerKind::Serve => {
            if agent.is_empty() {
                bail!("--runner serve needs an agent command after `--`");
            }
            Runner::Serve(agent)
        }
    };
    let instances = load_instance_dir(dir)?;
    let config = BenchConfig {
        with_time_constraints: !without_tc,
        execution: if sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        order: if command_order {
            PrefixOrder::Command
        } else {
            PrefixOrder::Completion
        },
        bridge: session.bridge(),
    };
    let report = run_bench(&instances, &runner, &config)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string();
    let run = write_run_dir(out, &stamp, &report)?;
    put!("{}", report.table());
    say!("\nreport written to {}", run.display());
    Ok(())
}

fn gen(min_eff: f64, allow_no_drop: bool, out: Option<&Path>, sequential: bool, dir: Option<PathBuf>) -> Result<()> {
    let library = match dir.or_else(fixture_dir) {
        Some(d) => load_recipe_dir(&d).with_context(|| format!("loading {}", d.display()))?,
        None => fixtures::library(),
    };
    let criteria = InstanceFilterCriteria {
        min_eff_without_tc: min_eff,
        require_efficiency_drop: !allow_no_drop,
    };
    let execution = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let pairs = evaluate_pairs(&library, &criteria, execution)?;
    let width = pairs.iter().map(|p| p.instance.label().len()).max().unwrap_or(8);
    say!("{:<width$}  {:>10}  {:>10}  kept", "pair", "eff w/o tc", "eff w/ tc");
    for p in &pairs {
        let with = p
            .eff_with
            .map_or_else(|| "infeasible".to_string(), |e| format!("{:.3}", e));
        say!(
            "{:<width$}  {:>10.3}  {:>10}  {}",
            p.instance.label(),
            p.eff_without,
            with,
            if p.kept { "yes" } else { "no" }
        );
    }
    let kept: Vec<&Instance> = pairs.iter().filter(|p| p.kept).map(|p| &p.instance).collect();
    say!("{} of {} pairs kept", kept.len(), pairs.len());
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        for inst in kept {
            write_atomic(&out.join(format!("{}.json", inst.label())), &instance_to_string(inst))?;
        }
    }
    Ok(())
}

fn gantt(svg: bool, instance: Option<&str>, quantum: u32, ppq: u32, out: Option<&Path>, input: &Path) -> Result<()> {
    let text = read(input)?;
    let timeline = match transcript_from_str(&text) {
        Ok(t) => t.timeline,
        Err(_) => {
            let spec = instance.ok_or_else(|| {
                anyhow!("{} is not a transcript; pass --instance to chart a plan", input.display())
            })?;
            let plan = Plan::parse(&text).with_context(|| format!("parsing {}", input.display()))?;
            plan_timeline(&resolve_instance(spec)?, &plan)?
        }
    };
    let options = GanttOptions {
        quantum: Duration::from_secs(quantum),
        pixels_per_quantum: ppq,
    };
    let format = if svg { GanttFormat::Svg } else { GanttFormat::Text };
    emit(out, &render_gantt(&timeline, format, &options)?)
}

fn render(masked: bool, json: bool, spec: &str) -> Result<()> {
    let instance = resolve_instance(spec)?;
    if json {
        put!("{}", instance_to_string(&instance));
        return Ok(());
    }
    let mode = if masked { RenderMode::Masked } else { RenderMode::Full };
    let docs: Vec<String> = instance
        .recipes
        .iter()
        .enumerate()
        .map(|(i, r)| render_recipe_numbered(r, mode, i + 1))
        .collect();
    say!("{}", docs.join("\n"));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Validate { target } => validate(&target),
        Cmd::Solve {
            solver,
            no_time_constraints,
            max_actions,
            out,
            instance,
        } => solve(solver, no_time_constraints, max_actions, out.as_deref(), &instance),
        Cmd::Simulate {
            hints,
            command_order,
            transcript,
            instance,
            plan,
        } => simulate(hints, command_order, transcript.as_deref(), &instance, &plan),
        Cmd::Serve {
            session,
            listen,
            transcript,
            instance,
        } => serve(&session, listen.as_deref(), transcript.as_deref(), &instance),
        Cmd::Bench {
            runner,
            with_tc: _,
            without_tc,
            plans,
            out,
            sequential,
            command_order,
            max_actions,
            session,
            instance_dir,
            agent,
        } => bench(
            runner,
            without_tc,
            plans,
            &out,
            sequential,
            command_order,
            max_actions,
            &session,
            &instance_dir,
            agent,
        ),
        Cmd::Gen {
            min_eff,
            require_drop: _,
            allow_no_drop,
            out,
            sequential,
            recipe_dir,
        } => gen(min_eff, allow_no_drop, out.as_deref(), sequential, recipe_dir),
        Cmd::Gantt {
            svg,
            instance,
            quantum,
            pixels_per_quantum,
            out,
            input,
        } => gantt(svg, instance.as_deref(), quantum, pixels_per_quantum, out.as_deref(), &input),
        Cmd::Render {
            masked,
            json,
            instance,
        } => render(masked, json, &instance),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
