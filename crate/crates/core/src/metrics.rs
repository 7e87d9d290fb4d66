//! Feasibility and efficiency scores for a finished session.
//!
//! Efficiency is the share of autonomous time the agent managed to overlap
//! with other work: `t_save / t_auto`, where `t_save` is total executed time
//! minus the elapsed span. Relative efficiency divides it by the efficiency of
//! a reference plan cut back to the same number of completed actions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Duration, Instance, Timestamp};
use crate::sched::{check_plan, Plan};
use crate::sim::{Outcome, Timeline, Transcript};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub t_save: Duration,
    pub t_auto: Duration,
    pub efficiency: f64,
    /// First segment start to last segment end.
    pub span: Duration,
}

/// Efficiency of `timeline` with every segment clipped at `cut`.
pub fn efficiency_until(timeline: &Timeline, cut: Timestamp) -> Efficiency {
    let mut executed = 0u32;
    let mut autonomous = 0u32;
    let mut first = u32::MAX;
    let mut last = 0u32;
    for action in &timeline.actions {
        for seg in &action.segments {
            let start = seg.start.secs();
            let end = seg.end.secs().min(cut.secs());
            if end <= start {
                continue;
            }
            executed += end - start;
            if action.autonomous {
                autonomous += end - start;
            }
            first = first.min(start);
            last = last.max(end);
        }
    }
    let span = last.saturating_sub(first.min(last));
    let t_save = executed.saturating_sub(span);
    let efficiency = if autonomous == 0 {
        0.0
    } else {
        f64::from(t_save) / f64::from(autonomous)
    };
    Efficiency {
        t_save: Duration::from_secs(t_save),
        t_auto: Duration::from_secs(autonomous),
        efficiency,
        span: Duration::from_secs(span),
    }
}

/// Efficiency of a transcript up to its final clock.
pub fn efficiency(transcript: &Transcript) -> Efficiency {
    efficiency_until(&transcript.timeline, transcript.timeline.end)
}

pub fn progress_rate(transcript: &Transcript) -> f64 {
    let total = transcript.timeline.actions.len();
    if total == 0 {
        return 0.0;
    }
    transcript.timeline.completed() as f64 / total as f64
}

pub fn multitask_score(success: bool, relative_efficiency: f64) -> f64 {
    if success {
        relative_efficiency
    } else {
        0.0
    }
}

/// How the reference plan is cut to the agent's progress.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrefixOrder {
    /// The first k actions to complete.
    #[default]
    Completion,
    /// The first k actions to appear in the plan's command order.
    Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeEfficiency {
    pub agent: f64,
    pub reference: f64,
    /// `agent / reference`; infinite when only the reference is zero.
    pub ratio: f64,
    pub infinite: bool,
}

fn prefix_cut(reference: &Transcript, plan: &Plan, k: usize, order: PrefixOrder) -> Timestamp {
    let timeline = &reference.timeline;
    if k == 0 {
        return Timestamp::ZERO;
    }
    let done = |recipe: &str, step: usize| {
        timeline
            .actions
            .iter()
            .find(|a| a.recipe == recipe && a.step == step)
            .and_then(|a| a.completed_at)
    };
    match order {
        PrefixOrder::Completion => {
            let mut completed: Vec<(Timestamp, &str, usize)> = timeline
                .actions
                .iter()
                .filter_map(|a| a.completed_at.map(|t| (t, a.recipe.as_str(), a.step)))
                .collect();
            completed.sort();
            completed
                .get(k - 1)
                .or(completed.last())
                .map_or(timeline.end, |c| c.0)
        }
        PrefixOrder::Command => {
            let mut seen: BTreeSet<(&str, usize)> = BTreeSet::new();
            let mut cut = Timestamp::ZERO;
            for e in &plan.entries {
                if seen.len() == k {
                    break;
                }
                if seen.insert((e.recipe.as_str(), e.step)) {
                    if let Some(t) = done(&e.recipe, e.step) {
                        cut = cut.max(t);
                    }
                }
            }
            cut
        }
    }
}

/// Agent efficiency over the efficiency of `reference` truncated to the
/// agent's completed-action count.
pub fn relative_efficiency(
    instance: &Instance,
    transcript: &Transcript,
    reference: &Plan,
    order: PrefixOrder,
) -> Result<RelativeEfficiency, Error> {
    let (outcome, ref_transcript) = check_plan(instance, reference)?;
    if outcome != Outcome::Success {
        return Err(Error::Argument(format!(
            "reference plan does not succeed: {outcome}"
        )));
    }
    let k = transcript.timeline.completed();
    let cut = prefix_cut(&ref_transcript, reference, k, order);
    let agent = efficiency(transcript).efficiency;
    let reference = efficiency_until(&ref_transcript.timeline, cut).efficiency;
    let (ratio, infinite) = if reference == 0.0 {
        if agent == 0.0 {
            (1.0, false)
        } else {
            (f64::INFINITY, true)
        }
    } else {
        (agent / reference, false)
    };
    Ok(RelativeEfficiency {
        agent,
        reference,
        ratio,
        infinite,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub instance: String,
    pub outcome: Outcome,
    pub success: bool,
    pub progress_rate: f64,
    pub efficiency: f64,
    pub reference_efficiency: f64,
    pub relative_efficiency: f64,
    pub relative_efficiency_infinite: bool,
    pub multitask_score: f64,
    pub t_save: Duration,
    pub t_auto: Duration,
    pub makespan: Duration,
    pub completed_actions: usize,
    pub total_actions: usize,
}

/// Scores a transcript against a reference plan.
pub fn evaluate(
    instance: &Instance,
    transcript: &Transcript,
    reference: &Plan,
    order: PrefixOrder,
) -> Result<MetricsReport, Error> {
    let eff = efficiency(transcript);
    let rel = relative_efficiency(instance, transcript, reference, order)?;
    let success = transcript.outcome.is_success();
    Ok(MetricsReport {
        instance: transcript.instance.clone(),
        outcome: transcript.outcome,
        success,
        progress_rate: progress_rate(transcript),
        efficiency: eff.efficiency,
        reference_efficiency: rel.reference,
        relative_efficiency: rel.ratio,
        relative_efficiency_infinite: rel.infinite,
        multitask_score: multitask_score(success, rel.ratio),
        t_save: eff.t_save,
        t_auto: eff.t_auto,
        makespan: eff.span,
        completed_actions: transcript.timeline.completed(),
        total_actions: transcript.timeline.actions.len(),
    })
}

impl MetricsReport {
    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let rows = [
            ("instance", self.instance.clone()),
            ("outcome", self.outcome.to_string()),
            ("success", u8::from(self.success).to_string()),
            ("progress_rate", format!("{:.6}", self.progress_rate)),
            ("efficiency", format!("{:.6}", self.efficiency)),
            ("reference_efficiency", format!("{:.6}", self.reference_efficiency)),
            ("relative_efficiency", format!("{:.6}", self.relative_efficiency)),
            (
                "relative_efficiency_infinite",
                self.relative_efficiency_infinite.to_string(),
            ),
            ("multitask_score", format!("{:.6}", self.multitask_score)),
            ("t_save_min", self.t_save.minutes_text()),
            ("t_auto_min", self.t_auto.minutes_text()),
            ("makespan_min", self.makespan.minutes_text()),
            ("completed_actions", self.completed_actions.to_string()),
            ("total_actions", self.total_actions.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Means over runs, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub success: f64,
    pub progress: f64,
    pub relative_efficiency: f64,
    pub multitask_score: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Arithmetic means. Infinite relative efficiencies are left out of the
/// R-Efficiency and score means.
pub fn aggregate(reports: &[MetricsReport]) -> Result<Summary, Error> {
    if reports.is_empty() {
        return Err(Error::Argument("cannot aggregate zero reports".into()));
    }
    let finite = || reports.iter().filter(|r| !r.relative_efficiency_infinite);
    Ok(Summary {
        runs: reports.len(),
        success: 100.0 * mean(reports.iter().map(|r| f64::from(u8::from(r.success)))),
        progress: 100.0 * mean(reports.iter().map(|r| r.progress_rate)),
        relative_efficiency: 100.0 * mean(finite().map(|r| r.relative_efficiency)),
        multitask_score: 100.0 * mean(finite().map(|r| r.multitask_score)),
    })
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5} | {:>7} | {:>8} | {:>12} | {:>6}",
            "Runs", "Success", "Progress", "R-Efficiency", "S×E"
        )?;
        writeln!(
            f,
            "{:>5} | {:>7.1} | {:>8.1} | {:>12.1} | {:>6.1}",
            self.runs, self.success, self.progress, self.relative_efficiency, self.multitask_score
        )
    }
}
