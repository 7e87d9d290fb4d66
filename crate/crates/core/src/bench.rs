//! Instance selection and batch evaluation.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Command as Process, Stdio};

use serde::{Deserialize, Serialize};

use crate::bridge::{serve_session, AgentTransport, BridgeConfig, ScriptedAgent, StreamTransport};
use crate::dsl::parse_recipe;
use crate::interchange::instance_from_str;
use crate::metrics::{aggregate, efficiency, evaluate, MetricsReport, PrefixOrder, Summary};
use crate::model::{Duration, Instance, Recipe};
use crate::par::Execution;
use crate::sched::{check_plan, greedy_schedule, heuristic_schedule, optimal_schedule, Limits, Plan};
use crate::sim::{FailureReason, Outcome, Transcript};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFilterCriteria {
    pub min_eff_without_tc: f64,
    pub require_efficiency_drop: bool,
}

impl Default for InstanceFilterCriteria {
    fn default() -> Self {
        InstanceFilterCriteria {
            min_eff_without_tc: 0.8,
            require_efficiency_drop: true,
        }
    }
}

impl InstanceFilterCriteria {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.min_eff_without_tc) {
            return Err(Error::Argument(format!(
                "minimum efficiency {} is outside [0, 1]",
                self.min_eff_without_tc
            )));
        }
        Ok(())
    }

    pub fn keeps(&self, eff_without: f64, eff_with: Option<f64>) -> bool {
        let Some(with) = eff_with else {
            return false;
        };
        eff_without > self.min_eff_without_tc
            && (!self.require_efficiency_drop || with < eff_without)
    }
}

/// Heuristic efficiencies of one recipe pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEvaluation {
    pub instance: Instance,
    pub eff_without: f64,
    /// `None` when no plan honours the time constraints.
    pub eff_with: Option<f64>,
    pub kept: bool,
}

fn plan_efficiency(instance: &Instance, plan: &Plan) -> Result<f64, Error> {
    let (_, transcript) = check_plan(instance, plan)?;
    Ok(efficiency(&transcript).efficiency)
}

fn evaluate_pair(instance: Instance, criteria: &InstanceFilterCriteria) -> Result<PairEvaluation, Error> {
    let relaxed = instance.without_time_constraints();
    let eff_without = plan_efficiency(&relaxed, &heuristic_schedule(&instance, false)?)?;
    let eff_with = match heuristic_schedule(&instance, true) {
        Ok(plan) => Some(plan_efficiency(&instance, &plan)?),
        Err(_) => None,
    };
    Ok(PairEvaluation {
        kept: criteria.keeps(eff_without, eff_with),
        instance,
        eff_without,
        eff_with,
    })
}

/// Scores every unordered pair of `library`, in library order.
pub fn evaluate_pairs(
    library: &[Recipe],
    criteria: &InstanceFilterCriteria,
    execution: Execution,
) -> Result<Vec<PairEvaluation>, Error> {
    criteria.validate()?;
    if library.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least two recipes to pair, got {}",
            library.len()
        )));
    }
    let mut pairs = Vec::new();
    for i in 0..library.len() {
        for j in i + 1..library.len() {
            pairs.push(Instance::new(vec![library[i].clone(), library[j].clone()])?);
        }
    }
    execution
        .map(&pairs, |inst| evaluate_pair(inst.clone(), criteria))
        .into_iter()
        .collect()
}

/// The pairs whose heuristic plan multitasks well without time constraints
/// and loses efficiency once they apply.
pub fn generate_instances(
    library: &[Recipe],
    criteria: &InstanceFilterCriteria,
    execution: Execution,
) -> Result<Vec<Instance>, Error> {
    Ok(evaluate_pairs(library, criteria, execution)?
        .into_iter()
        .filter(|p| p.kept)
        .map(|p| p.instance)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Runner {
    Heuristic,
    Greedy,
    Optimal(Limits),
    /// Plan files named `<instance label>.plan` in a directory.
    AgentScript(PathBuf),
    /// An external agent process spoken to over its standard streams.
    Serve(Vec<String>),
}

impl Runner {
    pub fn name(&self) -> &'static str {
        match self {
            Runner::Heuristic => "heuristic",
            Runner::Greedy => "greedy",
            Runner::Optimal(_) => "optimal",
            Runner::AgentScript(_) => "agent-script",
            Runner::Serve(_) => "serve",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchConfig {
    pub with_time_constraints: bool,
    pub execution: Execution,
    pub order: PrefixOrder,
    pub bridge: BridgeConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            with_time_constraints: true,
            execution: Execution::Parallel,
            order: PrefixOrder::Completion,
            bridge: BridgeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub report: MetricsReport,
    /// Set when the runner itself failed on this instance.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runner: String,
    pub with_time_constraints: bool,
    pub rows: Vec<BenchRow>,
    pub summary: Summary,
}

fn runner_failure(instance: &Instance, error: String) -> BenchRow {
    BenchRow {
        report: MetricsReport {
            instance: instance.label(),
            outcome: Outcome::Failure(FailureReason::AgentAborted),
            success: false,
            progress_rate: 0.0,
            efficiency: 0.0,
            reference_efficiency: 0.0,
            relative_efficiency: 0.0,
            relative_efficiency_infinite: false,
            multitask_score: 0.0,
            t_save: Duration::ZERO,
            t_auto: Duration::ZERO,
            makespan: Duration::ZERO,
            completed_actions: 0,
            total_actions: instance.action_count(),
        },
        error: Some(error),
    }
}

fn run_agent(
    instance: &Instance,
    runner: &Runner,
    config: &BenchConfig,
    reference: &Plan,
) -> Result<Transcript, Error> {
    match runner {
        Runner::Heuristic => Ok(check_plan(instance, &heuristic_schedule(instance, true)?)?.1),
        Runner::Greedy => Ok(greedy_schedule(instance)?.transcript),
        Runner::Optimal(limits) => Ok(check_plan(instance, &optimal_schedule(instance, *limits)?)?.1),
        Runner::AgentScript(dir) => {
            let path = dir.join(format!("{}.plan", instance.label()));
            let agent = ScriptedAgent::from_plan_file(&fs::read_to_string(&path)?)?;
            let mut transport = AgentTransport::new(agent);
            Ok(serve_session(instance, &config.bridge, &mut transport, Some(reference))?.transcript)
        }
        Runner::Serve(argv) => {
            let (program, args) = argv
                .split_first()
                .ok_or_else(|| Error::Argument("serve runner needs an agent command".into()))?;
            let mut child = Process::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
            let mut transport = StreamTransport::new(stdout, stdin);
            let result = serve_session(instance, &config.bridge, &mut transport, Some(reference));
            drop(transport);
            let _ = child.wait();
            Ok(result?.transcript)
        }
    }
}

fn bench_one(instance: &Instance, runner: &Runner, config: &BenchConfig) -> BenchRow {
    let instance = if config.with_time_constraints {
        instance.clone()
    } else {
        instance.without_time_constraints()
    };
    let reference = match heuristic_schedule(&instance, true) {
        Ok(plan) => plan,
        Err(e) => return runner_failure(&instance, format!("no reference plan: {e}")),
    };
    let scored = run_agent(&instance, runner, config, &reference)
        .and_then(|t| evaluate(&instance, &t, &reference, config.order));
    match scored {
        Ok(report) => BenchRow {
            report,
            error: None,
        },
        Err(e) => runner_failure(&instance, e.to_string()),
    }
}

/// Runs `runner` on every instance and aggregates the scores. A runner
/// failure becomes a failed row; the batch carries on.
pub fn run_bench(
    instances: &[Instance],
    runner: &Runner,
    config: &BenchConfig,
) -> Result<BenchReport, Error> {
    let rows = config
        .execution
        .map(instances, |inst| bench_one(inst, runner, config));
    let reports: Vec<MetricsReport> = rows.iter().map(|r| r.report.clone()).collect();
    Ok(BenchReport {
        runner: runner.name().to_string(),
        with_time_constraints: config.with_time_constraints,
        summary: aggregate(&reports)?,
        rows,
    })
}

impl BenchReport {
    /// Per-instance rows followed by the aggregate.
    pub fn table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.report.instance.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "runner: {}  time constraints: {}",
            self.runner,
            if self.with_time_constraints { "on" } else { "off" }
        );
        let _ = writeln!(
            out,
            "{:<width$} | {:<32} | {:>7} | {:>8} | {:>12} | {:>6}",
            "Instance", "Outcome", "Success", "Progress", "R-Efficiency", "S×E"
        );
        for row in &self.rows {
            let r = &row.report;
            let rel = if r.relative_efficiency_infinite {
                "inf".to_string()
            } else {
                format!("{:.1}", 100.0 * r.relative_efficiency)
            };
            let _ = writeln!(
                out,
                "{:<width$} | {:<32} | {:>7.1} | {:>8.1} | {:>12} | {:>6.1}",
                r.instance,
                r.outcome.to_string(),
                100.0 * f64::from(u8::from(r.success)),
                100.0 * r.progress_rate,
                rel,
                100.0 * r.multitask_score
            );
        }
        out.push('\n');
        out.push_str(&self.summary.to_string());
        out
    }

    /// Indented `key value` tree, two spaces per level.
    pub fn tree(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "runner {}", self.runner);
        let _ = writeln!(out, "time_constraints {}", self.with_time_constraints);
        let s = &self.summary;
        let _ = writeln!(out, "summary");
        for (k, v) in [
            ("runs", s.runs.to_string()),
            ("success", format!("{:.4}", s.success)),
            ("progress", format!("{:.4}", s.progress)),
            ("relative_efficiency", format!("{:.4}", s.relative_efficiency)),
            ("multitask_score", format!("{:.4}", s.multitask_score)),
        ] {
            let _ = writeln!(out, "  {k} {v}");
        }
        let _ = writeln!(out, "instances");
        for row in &self.rows {
            let _ = writeln!(out, "  {}", row.report.instance);
            for line in row.report.to_kv().lines().skip(1) {
                let (k, v) = line.split_once('=').unwrap_or((line, ""));
                let _ = writeln!(out, "    {k} {v}");
            }
            if let Some(e) = &row.error {
                let _ = writeln!(out, "    error {}", e.replace('\n', " "));
            }
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(contents.as_bytes())?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Creates `<base>/<stamp>-<runner>-<tc|notc>` and writes `report.txt` and
/// `report.tree` into it. An existing run directory is never reused.
pub fn write_run_dir(base: &Path, stamp: &str, report: &BenchReport) -> Result<PathBuf, Error> {
    fs::create_dir_all(base)?;
    let dir = base.join(format!(
        "{stamp}-{}-{}",
        report.runner,
        if report.with_time_constraints { "tc" } else { "notc" }
    ));
    fs::create_dir(&dir)?;
    write_atomic(&dir.join("report.txt"), &report.table())?;
    write_atomic(&dir.join("report.tree"), &report.tree())?;
    Ok(dir)
}

fn sorted_entries(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Every `*.recipe` document in `dir`, by file name.
pub fn load_recipe_dir(dir: &Path) -> Result<Vec<Recipe>, Error> {
    sorted_entries(dir, "recipe")?
        .iter()
        .map(|p| Ok(parse_recipe(&fs::read_to_string(p)?)?))
        .collect()
}

/// Every `*.json` instance in `dir` followed by one single-recipe instance
/// per `*.recipe` document.
pub fn load_instance_dir(dir: &Path) -> Result<Vec<Instance>, Error> {
    let mut out = Vec::new();
    for p in sorted_entries(dir, "json")? {
        out.push(instance_from_str(&fs::read_to_string(&p)?)?);
    }
    for r in load_recipe_dir(dir)? {
        out.push(Instance::new(vec![r])?);
    }
    if out.is_empty() {
        return Err(Error::Argument(format!(
            "no .json or .recipe files in {}",
            dir.display()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn criteria_thresholds() {
        let c = InstanceFilterCriteria::default();
        assert!(c.keeps(0.861, Some(0.737)));
        assert!(!c.keeps(0.5, Some(0.4)));
        assert!(!c.keeps(0.9, Some(0.9)));
        assert!(!c.keeps(0.9, None));
        let loose = InstanceFilterCriteria {
            require_efficiency_drop: false,
            ..c
        };
        assert!(loose.keeps(0.9, Some(0.9)));
        assert!(InstanceFilterCriteria {
            min_eff_without_tc: 1.5,
            ..c
        }
        .validate()
        .is_err());
    }

    #[test]
    fn too_small_library_is_rejected() {
        let lib = vec![fixtures::recipe("Tea").unwrap()];
        assert!(generate_instances(&lib, &Default::default(), Execution::Sequential).is_err());
        assert!(generate_instances(&[], &Default::default(), Execution::Sequential).is_err());
    }

    #[test]
    fn heuristic_bench_is_perfect() {
        let report = run_bench(
            &fixtures::bundled_instances(),
            &Runner::Heuristic,
            &BenchConfig::default(),
        )
        .unwrap();
        let s = &report.summary;
        assert_eq!(
            (s.success, s.progress, s.relative_efficiency, s.multitask_score),
            (100.0, 100.0, 100.0, 100.0)
        );
        assert!(report.tree().contains("  Baked-Potato\n    outcome Success\n"));
    }

    #[test]
    fn missing_script_becomes_failed_row() {
        let dir = tempfile::tempdir().unwrap();
        let inst = vec![fixtures::instance(&["Tea"]).unwrap()];
        let report = run_bench(
            &inst,
            &Runner::AgentScript(dir.path().to_path_buf()),
            &BenchConfig::default(),
        )
        .unwrap();
        assert!(!report.rows[0].report.success);
        assert!(report.rows[0].error.is_some());
    }

    #[test]
    fn run_dirs_are_not_reused() {
        let dir = tempfile::tempdir().unwrap();
        let inst = vec![fixtures::instance(&["Toast"]).unwrap()];
        let report = run_bench(&inst, &Runner::Heuristic, &BenchConfig::default()).unwrap();
        let run = write_run_dir(dir.path(), "20260101T000000", &report).unwrap();
        assert!(run.join("report.txt").is_file());
        assert!(run.join("report.tree").is_file());
        assert!(write_run_dir(dir.path(), "20260101T000000", &report).is_err());
    }
}
