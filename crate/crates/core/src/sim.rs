//! Discrete-event environment. A session applies agent commands to a shared
//! timeline, enforces every multitasking constraint and renders the feedback
//! and observation text an agent sees.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_command, Command};
use crate::model::{ActionRef, Condition, Duration, Instance, ModelError, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub hints: bool,
    pub max_revisions: u32,
    pub repeat_limit: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            hints: false,
            max_revisions: 10,
            repeat_limit: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    TimeConstraintViolation,
    MaxRevisions,
    RepeatLoop,
    AgentAborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Pending,
    Success,
    Failure(FailureReason),
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pending => f.write_str("Pending"),
            Outcome::Success => f.write_str("Success"),
            Outcome::Failure(reason) => write!(f, "Failure({reason:?})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    WrongRecipe,
    WrongAction,
    TimeError,
    InfeasibleMultitask,
    ObjectOccupancy,
    ObjectCondition,
    Dependency,
    RepeatedAction,
    TimeConstraint,
    ActionDuration,
    Interruptibility,
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Ok,
    Error(ErrorKind),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub status: Status,
    /// Error template text, or the success headline (empty for `Finish`).
    pub message: String,
    /// Status block, present on `Ok`.
    pub observation: Option<String>,
    pub hint: Option<String>,
}

impl Feedback {
    /// Message and observation joined the way an agent reads them.
    pub fn text(&self) -> String {
        match (&self.observation, self.message.is_empty()) {
            (Some(obs), true) => obs.clone(),
            (Some(obs), false) => format!("{} {obs}", self.message),
            (None, _) => self.message.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Segment {
    pub fn len(&self) -> Duration {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionProgress {
    pub executed: Duration,
    pub segments: Vec<Segment>,
    pub completed_at: Option<Timestamp>,
}

impl ActionProgress {
    pub fn started(&self) -> bool {
        !self.segments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("session is already decided: {0}")]
    SessionOver(Outcome),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Why a command was rejected, before it is rendered as text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    Unparseable { raw: String },
    WrongRecipe { recipe: String },
    WrongAction { recipe: String, step: usize },
    TimeError,
    InfeasibleMultitask { action: usize, other: usize },
    RepeatedAction { action: usize, next: usize },
    ActionDuration { exec: Duration },
    Interruptibility { action: usize },
    Dependency {
        action: usize,
        pred: usize,
        expected: Option<Timestamp>,
    },
    ObjectOccupancy { kind: usize },
    ObjectCondition {
        action: usize,
        have: Condition,
        need: Condition,
    },
    Incomplete { missing: Vec<usize> },
}

impl Rejection {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Rejection::Unparseable { .. } | Rejection::WrongAction { .. } => ErrorKind::WrongAction,
            Rejection::WrongRecipe { .. } => ErrorKind::WrongRecipe,
            Rejection::TimeError => ErrorKind::TimeError,
            Rejection::InfeasibleMultitask { .. } => ErrorKind::InfeasibleMultitask,
            Rejection::RepeatedAction { .. } => ErrorKind::RepeatedAction,
            Rejection::ActionDuration { .. } => ErrorKind::ActionDuration,
            Rejection::Interruptibility { .. } => ErrorKind::Interruptibility,
            Rejection::Dependency { .. } => ErrorKind::Dependency,
            Rejection::ObjectOccupancy { .. } => ErrorKind::ObjectOccupancy,
            Rejection::ObjectCondition { .. } => ErrorKind::ObjectCondition,
            Rejection::Incomplete { .. } => ErrorKind::Incomplete,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Requirement {
    pub kind: usize,
    pub required: Condition,
    pub establishes: Condition,
    pub signature: Condition,
}

#[derive(Clone, Debug)]
pub(crate) struct Kind {
    pub name: String,
    pub units: u32,
    /// `(action, requirement index)` pairs that establish a condition here.
    pub establishers: Vec<(usize, usize)>,
    pub preheatable: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tc {
    pub pred: usize,
    pub succ: usize,
    pub gap: u32,
}

/// An instance flattened to global action ids for fast simulation.
#[derive(Debug)]
pub struct Compiled {
    pub instance: Instance,
    pub(crate) refs: Vec<ActionRef>,
    pub(crate) offsets: Vec<usize>,
    pub(crate) dur: Vec<u32>,
    pub(crate) auto: Vec<bool>,
    pub(crate) intr: Vec<bool>,
    pub(crate) preds: Vec<Vec<usize>>,
    pub(crate) succs: Vec<Vec<usize>>,
    pub(crate) tcs: Vec<Tc>,
    pub(crate) reqs: Vec<Vec<Requirement>>,
    pub(crate) kinds: Vec<Kind>,
}

impl Compiled {
    pub fn new(instance: Instance) -> Result<Compiled, ModelError> {
        instance.validate()?;
        let mut refs = Vec::new();
        let mut offsets = Vec::new();
        for (r, recipe) in instance.recipes.iter().enumerate() {
            offsets.push(refs.len());
            refs.extend((0..recipe.len()).map(|step| ActionRef { recipe: r, step }));
        }
        let n = refs.len();
        let mut kinds: Vec<Kind> = instance
            .resource_inventory
            .iter()
            .map(|u| Kind {
                name: u.kind.clone(),
                units: u.units,
                establishers: Vec::new(),
                preheatable: false,
            })
            .collect();
        let mut dur = Vec::with_capacity(n);
        let mut auto = Vec::with_capacity(n);
        let mut intr = Vec::with_capacity(n);
        let mut reqs = Vec::with_capacity(n);
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut tcs = Vec::new();
        for (r, recipe) in instance.recipes.iter().enumerate() {
            let base = offsets[r];
            for action in &recipe.actions {
                let id = base + action.index;
                dur.push(action.duration.secs());
                auto.push(action.is_autonomous());
                intr.push(action.interruptible);
                let mut list: Vec<Requirement> = Vec::new();
                for req in &action.resources {
                    let kind = kinds
                        .iter()
                        .position(|k| k.name == req.kind)
                        .expect("validated inventory");
                    if !req.establishes_condition.is_empty() {
                        kinds[kind].establishers.push((id, list.len()));
                        if req.establishes_condition.contains_key("temperature") {
                            kinds[kind].preheatable = true;
                        }
                    }
                    list.push(Requirement {
                        kind,
                        required: req.required_condition.clone(),
                        establishes: req.establishes_condition.clone(),
                        signature: req.signature(),
                    });
                }
                reqs.push(list);
            }
            for &(p, s) in &recipe.dependencies {
                preds[base + s].push(base + p);
                succs[base + p].push(base + s);
            }
            for tc in &recipe.time_constraints {
                tcs.push(Tc {
                    pred: base + tc.pred,
                    succ: base + tc.succ,
                    gap: tc.max_gap.secs(),
                });
            }
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Compiled {
            instance,
            refs,
            offsets,
            dur,
            auto,
            intr,
            preds,
            succs,
            tcs,
            reqs,
            kinds,
        })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn id(&self, at: ActionRef) -> usize {
        self.offsets[at.recipe] + at.step
    }

    pub fn action_ref(&self, id: usize) -> ActionRef {
        self.refs[id]
    }

    pub fn recipe_name(&self, id: usize) -> &str {
        &self.instance.recipes[self.refs[id].recipe].name
    }

    pub fn step(&self, id: usize) -> usize {
        self.refs[id].step
    }

    /// `(recipe name, step)` for ordering and rendering.
    pub(crate) fn key(&self, id: usize) -> (&str, usize) {
        (self.recipe_name(id), self.refs[id].step)
    }

    pub(crate) fn describe(&self, id: usize) -> String {
        format!("step {} of {}", self.step(id), self.recipe_name(id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Hold {
    pub start: u32,
    pub end: u32,
    pub holder: usize,
    pub req: usize,
}

/// One agent session. `apply` calls must be serialized; clones are
/// independent.
#[derive(Clone, Debug)]
pub struct SimState {
    compiled: Arc<Compiled>,
    config: SessionConfig,
    clock: u32,
    progress: Vec<ActionProgress>,
    holds: Vec<Vec<Hold>>,
    revision_count: u32,
    repeat_counts: Vec<u32>,
    outcome: Outcome,
}

/// Renders `425` as `425.0`, leaving non-numeric values alone.
fn render_value(value: &str) -> String {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v:?}"),
        _ => value.to_string(),
    }
}

fn render_condition(cond: &Condition) -> String {
    if cond.is_empty() {
        return "none".to_string();
    }
    cond.iter()
        .map(|(k, v)| format!("{k} {}", render_value(v)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_names(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

impl SimState {
    pub fn new(instance: Instance, config: SessionConfig) -> Result<SimState, SimError> {
        Ok(SimState::from_compiled(
            Arc::new(Compiled::new(instance)?),
            config,
        ))
    }

    pub fn from_compiled(compiled: Arc<Compiled>, config: SessionConfig) -> SimState {
        let n = compiled.len();
        let kinds = compiled.kinds.len();
        SimState {
            compiled,
            config,
            clock: 0,
            progress: vec![ActionProgress::default(); n],
            holds: vec![Vec::new(); kinds],
            revision_count: 0,
            repeat_counts: vec![0; n],
            outcome: Outcome::Pending,
        }
    }

    pub fn compiled(&self) -> &Arc<Compiled> {
        &self.compiled
    }

    pub fn instance(&self) -> &Instance {
        &self.compiled.instance
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    pub fn clock(&self) -> Timestamp {
        Timestamp::from_secs(self.clock)
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn revision_count(&self) -> u32 {
        self.revision_count
    }

    pub fn repeat_count(&self, at: ActionRef) -> u32 {
        self.repeat_counts[self.compiled.id(at)]
    }

    pub fn progress(&self, at: ActionRef) -> &ActionProgress {
        &self.progress[self.compiled.id(at)]
    }

    pub(crate) fn progress_by_id(&self, id: usize) -> &ActionProgress {
        &self.progress[id]
    }

    pub(crate) fn clock_secs(&self) -> u32 {
        self.clock
    }

    pub(crate) fn remaining(&self, id: usize) -> u32 {
        self.compiled.dur[id] - self.progress[id].executed.secs()
    }

    pub(crate) fn completed_at(&self, id: usize) -> Option<u32> {
        self.progress[id].completed_at.map(Timestamp::secs)
    }

    pub fn all_scheduled(&self) -> bool {
        (0..self.compiled.len()).all(|id| self.remaining(id) == 0)
    }

    /// Condition on `kind` established by completions at or before `t`.
    pub(crate) fn condition_at(&self, kind: usize, t: u32) -> Condition {
        let mut events: Vec<(u32, usize, usize)> = self.compiled.kinds[kind]
            .establishers
            .iter()
            .filter_map(|&(id, req)| {
                self.completed_at(id)
                    .filter(|&done| done <= t)
                    .map(|done| (done, id, req))
            })
            .collect();
        events.sort_unstable();
        let mut cond = Condition::new();
        for (_, id, req) in events {
            cond.extend(
                self.compiled.reqs[id][req]
                    .establishes
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone())),
            );
        }
        cond
    }

    fn units_in_use(&self, kind: usize, t: u32, joining: Option<&Condition>) -> u32 {
        let mut shared: BTreeSet<&Condition> = BTreeSet::new();
        let mut solo = 0;
        for h in &self.holds[kind] {
            if h.start <= t && t < h.end {
                let sig = &self.compiled.reqs[h.holder][h.req].signature;
                if sig.is_empty() {
                    solo += 1;
                } else {
                    shared.insert(sig);
                }
            }
        }
        let mine = match joining {
            Some(sig) if !sig.is_empty() && shared.contains(sig) => 0,
            Some(_) => 1,
            None => 0,
        };
        solo + shared.len() as u32 + mine
    }

    fn check_resources(&self, id: usize, start: u32, end: u32) -> Result<(), Rejection> {
        for req in &self.compiled.reqs[id] {
            let kind = req.kind;
            let units = self.compiled.kinds[kind].units;
            let mut points = vec![start];
            points.extend(
                self.holds[kind]
                    .iter()
                    .filter(|h| h.start > start && h.start < end)
                    .map(|h| h.start),
            );
            if points
                .into_iter()
                .any(|p| self.units_in_use(kind, p, Some(&req.signature)) > units)
            {
                return Err(Rejection::ObjectOccupancy { kind });
            }
        }
        for req in &self.compiled.reqs[id] {
            if req.required.is_empty() {
                continue;
            }
            let have = self.condition_at(req.kind, start);
            if req.required.iter().any(|(k, v)| have.get(k) != Some(v)) {
                return Err(Rejection::ObjectCondition {
                    action: id,
                    have,
                    need: req.required.clone(),
                });
            }
        }
        Ok(())
    }

    /// Validates a step on global ids without touching the state.
    pub(crate) fn check_id(&self, id: usize, exec: u32, at: u32) -> Result<(), Rejection> {
        let c = &*self.compiled;
        if at < self.clock {
            if !c.auto[id] {
                let covering = (0..c.len()).find(|&other| {
                    !c.auto[other]
                        && self.progress[other]
                            .segments
                            .iter()
                            .any(|s| s.start.secs() <= at && at < s.end.secs())
                });
                if let Some(other) = covering {
                    return Err(Rejection::InfeasibleMultitask { action: id, other });
                }
            }
            return Err(Rejection::TimeError);
        }
        let p = &self.progress[id];
        if p.completed_at.is_some() || (c.auto[id] && p.started()) {
            let next = c.succs[id].first().copied().unwrap_or(id);
            return Err(Rejection::RepeatedAction { action: id, next });
        }
        let remaining = self.remaining(id);
        if exec == 0 || exec > remaining {
            return Err(Rejection::ActionDuration {
                exec: Duration::from_secs(exec),
            });
        }
        if !c.intr[id] && exec < remaining {
            return Err(Rejection::Interruptibility { action: id });
        }
        for &pred in &c.preds[id] {
            match self.completed_at(pred) {
                Some(done) if done <= at => {}
                Some(done) => {
                    return Err(Rejection::Dependency {
                        action: id,
                        pred,
                        expected: Some(Timestamp::from_secs(done)),
                    })
                }
                None => {
                    return Err(Rejection::Dependency {
                        action: id,
                        pred,
                        expected: None,
                    })
                }
            }
        }
        let length = if c.auto[id] { c.dur[id] } else { exec };
        self.check_resources(id, at, at + length)
    }

    /// First breached time constraint at the current clock.
    fn sweep(&self) -> Option<usize> {
        self.compiled.tcs.iter().position(|tc| {
            matches!(self.completed_at(tc.pred), Some(done) if self.clock > done + tc.gap)
                && !self.progress[tc.succ].started()
        })
    }

    fn advance(&mut self, to: u32) -> Result<(), usize> {
        if to > self.clock {
            self.clock = to;
            if let Some(tc) = self.sweep() {
                self.outcome = Outcome::Failure(FailureReason::TimeConstraintViolation);
                return Err(tc);
            }
        }
        Ok(())
    }

    /// Executes an already validated step. On a deadline breach the outcome
    /// becomes a failure and the breached constraint index is returned.
    pub(crate) fn execute_id(&mut self, id: usize, exec: u32, at: u32) -> Result<(), usize> {
        self.advance(at)?;
        let c = Arc::clone(&self.compiled);
        let length = if c.auto[id] { c.dur[id] } else { exec };
        let end = at + length;
        let p = &mut self.progress[id];
        p.segments.push(Segment {
            start: Timestamp::from_secs(at),
            end: Timestamp::from_secs(end),
        });
        p.executed += Duration::from_secs(length);
        if p.executed.secs() == c.dur[id] {
            p.completed_at = Some(Timestamp::from_secs(end));
        }
        for (r, req) in c.reqs[id].iter().enumerate() {
            self.holds[req.kind].push(Hold {
                start: at,
                end,
                holder: id,
                req: r,
            });
        }
        if !c.auto[id] {
            self.advance(end)?;
        }
        Ok(())
    }

    fn resolve(&self, recipe: &str, step: usize) -> Result<usize, Rejection> {
        let r = self
            .compiled
            .instance
            .recipe_index(recipe)
            .ok_or_else(|| Rejection::WrongRecipe {
                recipe: recipe.to_string(),
            })?;
        if step >= self.compiled.instance.recipes[r].len() {
            return Err(Rejection::WrongAction {
                recipe: recipe.to_string(),
                step,
            });
        }
        Ok(self.compiled.id(ActionRef { recipe: r, step }))
    }

    /// Validates a command against the current state.
    pub fn check(&self, command: &Command) -> Result<(), Rejection> {
        match command {
            Command::Finish => {
                let missing: Vec<usize> = (0..self.compiled.len())
                    .filter(|&id| self.remaining(id) > 0)
                    .collect();
                if missing.is_empty() {
                    Ok(())
                } else {
                    Err(Rejection::Incomplete { missing })
                }
            }
            Command::Step {
                recipe,
                step,
                exec_time,
                at,
            } => {
                let id = self.resolve(recipe, *step)?;
                self.check_id(id, exec_time.secs(), at.secs())
            }
        }
    }

    /// Parses and applies one raw protocol line.
    pub fn apply_line(&mut self, line: &str) -> Result<Feedback, SimError> {
        match parse_command(line) {
            Ok(command) => self.apply(&command),
            Err(_) => {
                self.ensure_pending()?;
                Ok(self.reject(
                    Rejection::Unparseable {
                        raw: line.trim().to_string(),
                    },
                    None,
                ))
            }
        }
    }

    fn ensure_pending(&self) -> Result<(), SimError> {
        match self.outcome {
            Outcome::Pending => Ok(()),
            other => Err(SimError::SessionOver(other)),
        }
    }

    pub fn apply(&mut self, command: &Command) -> Result<Feedback, SimError> {
        self.ensure_pending()?;
        let target = match command {
            Command::Step { recipe, step, .. } => self.resolve(recipe, *step).ok(),
            Command::Finish => None,
        };
        if let Err(rejection) = self.check(command) {
            return Ok(self.reject(rejection, target));
        }
        match command {
            Command::Finish => {
                let end = (0..self.compiled.len())
                    .filter_map(|id| self.completed_at(id))
                    .max()
                    .unwrap_or(0)
                    .max(self.clock);
                if let Err(tc) = self.advance(end) {
                    return Ok(self.deadline_feedback(tc));
                }
                self.outcome = Outcome::Success;
                Ok(Feedback {
                    status: Status::Ok,
                    message: String::new(),
                    observation: Some(self.observation()),
                    hint: None,
                })
            }
            Command::Step { exec_time, at, .. } => {
                let id = target.expect("checked");
                if let Err(tc) = self.execute_id(id, exec_time.secs(), at.secs()) {
                    return Ok(self.deadline_feedback(tc));
                }
                let headline = if self.compiled.auto[id] {
                    "Autonomous action started successfully."
                } else {
                    "Continuous action executed successfully."
                };
                let hint = if self.config.hints {
                    self.hint()
                } else {
                    None
                };
                Ok(Feedback {
                    status: Status::Ok,
                    message: headline.to_string(),
                    observation: Some(self.observation()),
                    hint,
                })
            }
        }
    }

    fn deadline_feedback(&self, tc: usize) -> Feedback {
        let tc = self.compiled.tcs[tc];
        Feedback {
            status: Status::Error(ErrorKind::TimeConstraint),
            message: format!(
                "The time interval between Step {} and Step {} in Recipe {} exceeds the allowed time limit {} min.",
                self.compiled.step(tc.pred),
                self.compiled.step(tc.succ),
                self.compiled.recipe_name(tc.pred),
                Duration::from_secs(tc.gap).minutes_text()
            ),
            observation: None,
            hint: None,
        }
    }

    fn reject(&mut self, rejection: Rejection, target: Option<usize>) -> Feedback {
        let message = self.render_rejection(&rejection);
        self.revision_count += 1;
        if let Some(id) = target {
            self.repeat_counts[id] += 1;
        }
        if self.revision_count >= self.config.max_revisions {
            self.outcome = Outcome::Failure(FailureReason::MaxRevisions);
        } else if target.is_some_and(|id| self.repeat_counts[id] >= self.config.repeat_limit) {
            self.outcome = Outcome::Failure(FailureReason::RepeatLoop);
        }
        Feedback {
            status: Status::Error(rejection.kind()),
            message,
            observation: None,
            hint: None,
        }
    }

    /// Marks the session as abandoned by the agent.
    pub fn abort(&mut self) {
        if self.outcome == Outcome::Pending {
            self.outcome = Outcome::Failure(FailureReason::AgentAborted);
        }
    }

    pub fn render_rejection(&self, rejection: &Rejection) -> String {
        let c = &*self.compiled;
        match rejection {
            Rejection::Unparseable { raw } => format!(
                "There is no step in the action '{raw}'. Please use the format Step(step_num, recipe_name, time, timestamp)."
            ),
            Rejection::WrongRecipe { recipe } => {
                let names: Vec<&str> = c.instance.recipes.iter().map(|r| r.name.as_str()).collect();
                format!(
                    "Recipe {recipe} is not one of our goals. Please select actions from our recipes {}",
                    join_names(&names)
                )
            }
            Rejection::WrongAction { recipe, step } => {
                format!("There is no step {step} in recipe {recipe}.")
            }
            Rejection::TimeError => format!(
                "The current time is {}. You can not perform any actions before the current timestamp.",
                Timestamp::from_secs(self.clock).padded()
            ),
            Rejection::InfeasibleMultitask { action, other } => format!(
                "You can not perform step {} of Recipe {} and step {} of Recipe {} simultaneously since they are all continuous actions.",
                c.step(*action),
                c.recipe_name(*action),
                c.step(*other),
                c.recipe_name(*other)
            ),
            Rejection::RepeatedAction { action, next } => format!(
                "Prerequisite step {} is already used for the next action step {} in recipe {}. You should not execute the same step twice. If you insist, please complete all the previous steps first.",
                c.step(*action),
                c.step(*next),
                c.recipe_name(*action)
            ),
            Rejection::ActionDuration { exec } => format!(
                "Your plan execution time {} min exceeds the time needed to perform the action.",
                exec.minutes_text()
            ),
            Rejection::Interruptibility { action } => format!(
                "Step {} of Recipe {} is not interruptable. You should finish the action in one go.",
                c.step(*action),
                c.recipe_name(*action)
            ),
            Rejection::Dependency {
                action,
                pred,
                expected,
            } => {
                let mut text = format!(
                    "Step {} of recipe {} can not be performed because prerequisite step {} is not completed.",
                    c.step(*action),
                    c.recipe_name(*action),
                    c.step(*pred)
                );
                if let Some(t) = expected {
                    text.push_str(&format!(" (The expected finish time is {})", t.padded()));
                }
                text
            }
            Rejection::ObjectOccupancy { kind } => {
                format!("Object {} is currently occupied.", c.kinds[*kind].name)
            }
            Rejection::ObjectCondition { action, have, need } => format!(
                "The Property of the Object is {}, but step {} of recipe {} needs {}.",
                render_condition(have),
                c.step(*action),
                c.recipe_name(*action),
                render_condition(need)
            ),
            Rejection::Incomplete { missing } => {
                let list: Vec<String> = missing.iter().map(|&id| c.describe(id)).collect();
                format!(
                    "The following actions are not completed: {}.",
                    list.join("; ")
                )
            }
        }
    }

    /// `The current timestamp is ... Status of physical objects: ...`
    pub fn observation(&self) -> String {
        let c = &*self.compiled;
        let t = self.clock;
        let objects: Vec<String> = c
            .kinds
            .iter()
            .enumerate()
            .map(|(k, kind)| {
                let active: Vec<&Hold> = self.holds[k]
                    .iter()
                    .filter(|h| h.start <= t && t < h.end)
                    .collect();
                let occupied = !active.is_empty() && self.units_in_use(k, t, None) >= kind.units;
                let mut text = format!(
                    "{} is {}occupied",
                    kind.name,
                    if occupied { "" } else { "not " }
                );
                let shown = active
                    .iter()
                    .map(|h| &c.reqs[h.holder][h.req].signature)
                    .find(|sig| !sig.is_empty())
                    .cloned()
                    .unwrap_or_else(|| self.condition_at(k, t));
                if !shown.is_empty() {
                    for (key, value) in &shown {
                        text.push_str(&format!(", {key} is {}", render_value(value)));
                    }
                } else if kind.preheatable {
                    text.push_str(", is not preheated");
                }
                text
            })
            .collect();
        let mut out = format!(
            "The current timestamp is {}. Status of physical objects: {}",
            Timestamp::from_secs(t),
            objects.join("; ")
        );
        let mut running: Vec<(u32, usize, usize, u32)> = (0..c.len())
            .filter(|&id| c.auto[id])
            .filter_map(|id| {
                let done = self.completed_at(id)?;
                let start = self.progress[id].segments.first()?.start.secs();
                (done > t).then(|| (start, c.refs[id].recipe, c.refs[id].step, done))
            })
            .collect();
        running.sort_unstable();
        if !running.is_empty() {
            let items: Vec<String> = running
                .iter()
                .map(|&(_, r, step, done)| {
                    format!(
                        "step {step} of {} (will finish at {})",
                        c.instance.recipes[r].name,
                        Timestamp::from_secs(done)
                    )
                })
                .collect();
            out.push_str("; You are currently executing the following autonomous actions: ");
            out.push_str(&items.join(", "));
        }
        out
    }

    /// Earliest start ≥ `from` at which `id` passes every check, assuming
    /// its prerequisites are already placed. Tries the base time and then
    /// every later hold end or condition-establishing completion.
    pub(crate) fn earliest_start(&self, id: usize, from: u32, exec: u32) -> Option<u32> {
        let c = &*self.compiled;
        let mut base = from.max(self.clock);
        for &pred in &c.preds[id] {
            base = base.max(self.completed_at(pred)?);
        }
        if self.check_id(id, exec, base).is_ok() {
            return Some(base);
        }
        let mut times: Vec<u32> = Vec::new();
        for req in &c.reqs[id] {
            times.extend(
                self.holds[req.kind]
                    .iter()
                    .map(|h| h.end)
                    .filter(|&e| e > base),
            );
            times.extend(
                c.kinds[req.kind]
                    .establishers
                    .iter()
                    .filter_map(|&(e, _)| self.completed_at(e))
                    .filter(|&e| e > base),
            );
        }
        times.sort_unstable();
        times.dedup();
        times
            .into_iter()
            .find(|&t| self.check_id(id, exec, t).is_ok())
    }

    /// Every unfinished action whose prerequisites have known completion
    /// times, with its earliest feasible start, sorted by
    /// `(start, recipe, step)`.
    pub fn executable_actions(&self, at: Timestamp) -> Vec<(ActionRef, Timestamp)> {
        if self.outcome != Outcome::Pending {
            return Vec::new();
        }
        let c = &*self.compiled;
        let mut out: Vec<(u32, usize)> = (0..c.len())
            .filter(|&id| self.remaining(id) > 0)
            .filter_map(|id| {
                self.earliest_start(id, at.secs(), self.remaining(id))
                    .map(|t| (t, id))
            })
            .collect();
        out.sort_by(|a, b| (a.0, c.key(a.1)).cmp(&(b.0, c.key(b.1))));
        out.into_iter()
            .map(|(t, id)| (c.refs[id], Timestamp::from_secs(t)))
            .collect()
    }

    /// Hint line listing the actions with the smallest earliest start.
    pub fn hint(&self) -> Option<String> {
        let ready = self.executable_actions(self.clock());
        let first = ready.first()?.1;
        let items: Vec<String> = ready
            .iter()
            .take_while(|(_, t)| *t == first)
            .map(|(a, _)| {
                format!(
                    "Step {} of Recipe {}",
                    a.step,
                    self.compiled.instance.recipes[a.recipe].name
                )
            })
            .collect();
        Some(format!(
            "The following actions are ready to be executed after {}, {}.",
            first.padded(),
            items.join(", ")
        ))
    }

    /// Per-action progress at the current clock.
    pub fn timeline(&self) -> Timeline {
        let c = &*self.compiled;
        Timeline {
            end: self.clock(),
            actions: (0..c.len())
                .map(|id| ActionRecord {
                    recipe: c.recipe_name(id).to_string(),
                    step: c.step(id),
                    autonomous: c.auto[id],
                    duration: Duration::from_secs(c.dur[id]),
                    segments: self.progress[id].segments.clone(),
                    completed_at: self.progress[id].completed_at,
                })
                .collect(),
            time_constraints: c
                .tcs
                .iter()
                .map(|tc| TimelineConstraint {
                    recipe: c.recipe_name(tc.pred).to_string(),
                    pred: c.step(tc.pred),
                    succ: c.step(tc.succ),
                    max_gap: Duration::from_secs(tc.gap),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub recipe: String,
    pub step: usize,
    pub autonomous: bool,
    pub duration: Duration,
    pub segments: Vec<Segment>,
    pub completed_at: Option<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineConstraint {
    pub recipe: String,
    pub pred: usize,
    pub succ: usize,
    pub max_gap: Duration,
}

/// Executed segments of every action as of `end`, the session's final
/// clock. Autonomous segments may extend past `end`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub end: Timestamp,
    pub actions: Vec<ActionRecord>,
    #[serde(default)]
    pub time_constraints: Vec<TimelineConstraint>,
}

impl Timeline {
    /// Actions completed by `end`.
    pub fn completed(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| a.completed_at.is_some_and(|t| t <= self.end))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub command: String,
    pub feedback: Feedback,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub instance: String,
    pub initial_observation: String,
    pub entries: Vec<TranscriptEntry>,
    pub outcome: Outcome,
    pub timeline: Timeline,
}

impl Transcript {
    pub fn final_clock(&self) -> Timestamp {
        self.timeline.end
    }

    /// Line form: `> command`, `< feedback`, `? hint`, closed by `= outcome`.
    pub fn render(&self) -> String {
        let mut out = format!("# {}\n< {}\n", self.instance, self.initial_observation);
        for entry in &self.entries {
            out.push_str(&format!("> {}\n< {}\n", entry.command, entry.feedback.text()));
            if let Some(hint) = &entry.feedback.hint {
                out.push_str(&format!("? {hint}\n"));
            }
        }
        out.push_str(&format!(
            "= {} at {}\n",
            self.outcome,
            self.timeline.end.padded()
        ));
        out
    }
}

/// Records a session as commands are applied.
#[derive(Clone, Debug)]
pub struct Recorder {
    pub state: SimState,
    initial_observation: String,
    entries: Vec<TranscriptEntry>,
}

impl Recorder {
    pub fn new(state: SimState) -> Recorder {
        let initial_observation = state.observation();
        Recorder {
            state,
            initial_observation,
            entries: Vec::new(),
        }
    }

    /// Applies a raw line; `None` once the session is decided.
    pub fn apply_line(&mut self, line: &str) -> Option<&Feedback> {
        let feedback = self.state.apply_line(line).ok()?;
        self.entries.push(TranscriptEntry {
            command: line.trim().to_string(),
            feedback,
        });
        self.entries.last().map(|e| &e.feedback)
    }

    pub fn apply(&mut self, command: &Command) -> Option<&Feedback> {
        let feedback = self.state.apply(command).ok()?;
        self.entries.push(TranscriptEntry {
            command: command.to_string(),
            feedback,
        });
        self.entries.last().map(|e| &e.feedback)
    }

    pub fn finish(self) -> Transcript {
        Transcript {
            instance: self.state.instance().label(),
            initial_observation: self.initial_observation,
            entries: self.entries,
            outcome: self.state.outcome(),
            timeline: self.state.timeline(),
        }
    }
}

/// Applies `commands` in order until the session is decided.
pub fn replay(instance: &Instance, commands: &[Command]) -> Result<Transcript, SimError> {
    replay_with(instance, commands, SessionConfig::default())
}

pub fn replay_with(
    instance: &Instance,
    commands: &[Command],
    config: SessionConfig,
) -> Result<Transcript, SimError> {
    let mut recorder = Recorder::new(SimState::new(instance.clone(), config)?);
    for command in commands {
        if recorder.state.outcome() != Outcome::Pending {
            break;
        }
        recorder.apply(command);
    }
    Ok(recorder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_command;
    use crate::fixtures;

    fn cmd(text: &str) -> Command {
        parse_command(text).unwrap()
    }

    fn bp() -> SimState {
        SimState::new(
            fixtures::instance(&["Baked-Potato"]).unwrap(),
            SessionConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn initial_observation() {
        assert_eq!(
            bp().observation(),
            "The current timestamp is 0:0:0. Status of physical objects: oven is not occupied, is not preheated; microwave is not occupied"
        );
    }

    #[test]
    fn preheat_occupies_oven_and_keeps_clock() {
        let mut s = bp();
        let fb = s.apply(&cmd("Step(0, Baked-Potato, 00:10:00, 00:00:00)")).unwrap();
        assert_eq!(fb.status, Status::Ok);
        assert_eq!(
            fb.text(),
            "Autonomous action started successfully. The current timestamp is 0:0:0. Status of physical objects: oven is occupied, temperature is 425.0; microwave is not occupied; You are currently executing the following autonomous actions: step 0 of Baked-Potato (will finish at 0:10:0)"
        );
        assert_eq!(s.clock(), Timestamp::ZERO);
    }

    #[test]
    fn dependency_message_with_expected_finish() {
        let mut s = bp();
        s.apply(&cmd("Step(0, Baked-Potato, 00:10:00, 00:00:00)")).unwrap();
        s.apply(&cmd("Step(1, Baked-Potato, 00:02:00, 00:00:00)")).unwrap();
        let fb = s.apply(&cmd("Step(2, Baked-Potato, 00:05:00, 00:05:00)")).unwrap();
        assert_eq!(fb.status, Status::Error(ErrorKind::Dependency));
        assert_eq!(
            fb.message,
            "Step 2 of recipe Baked-Potato can not be performed because prerequisite step 0 is not completed. (The expected finish time is 00:10:00)"
        );
        let fresh = bp();
        let fb = fresh
            .check(&cmd("Step(2, Baked-Potato, 00:05:00, 00:05:00)"))
            .unwrap_err();
        assert_eq!(
            fresh.render_rejection(&fb),
            "Step 2 of recipe Baked-Potato can not be performed because prerequisite step 0 is not completed."
        );
    }

    #[test]
    fn error_templates() {
        let mut s = bp();
        let msg = |s: &mut SimState, c: &str| s.apply_line(c).unwrap().message;
        assert_eq!(
            msg(&mut s, "Step(0, Pizza, 00:10:00, 00:00:00)"),
            "Recipe Pizza is not one of our goals. Please select actions from our recipes Baked-Potato"
        );
        assert_eq!(
            msg(&mut s, "Step(9, Baked-Potato, 00:10:00, 00:00:00)"),
            "There is no step 9 in recipe Baked-Potato."
        );
        assert_eq!(
            msg(&mut s, "Step(0, Baked-Potato, 00:11:00, 00:00:00)"),
            "Your plan execution time 11 min exceeds the time needed to perform the action."
        );
        assert_eq!(
            msg(&mut s, "Step(0, Baked-Potato, 00:05:00, 00:00:00)"),
            "Step 0 of Recipe Baked-Potato is not interruptable. You should finish the action in one go."
        );
        assert_eq!(
            msg(&mut s, "hello"),
            "There is no step in the action 'hello'. Please use the format Step(step_num, recipe_name, time, timestamp)."
        );
        assert_eq!(s.revision_count(), 5);
        s.apply_line("Step(1, Baked-Potato, 00:02:00, 00:01:00)").unwrap();
        assert_eq!(
            msg(&mut s, "Step(4, Baked-Potato, 00:02:00, 00:03:00)"),
            "Step 4 of recipe Baked-Potato can not be performed because prerequisite step 2 is not completed."
        );
        assert_eq!(
            msg(&mut s, "Step(3, Baked-Potato, 00:01:00, 00:00:00)"),
            "The current time is 00:03:00. You can not perform any actions before the current timestamp."
        );
        assert_eq!(
            msg(&mut s, "Step(1, Baked-Potato, 00:01:00, 00:03:00)"),
            "Prerequisite step 1 is already used for the next action step 2 in recipe Baked-Potato. You should not execute the same step twice. If you insist, please complete all the previous steps first."
        );
        assert_eq!(
            msg(&mut s, "Finish"),
            "The following actions are not completed: step 0 of Baked-Potato; step 2 of Baked-Potato; step 3 of Baked-Potato; step 4 of Baked-Potato; step 5 of Baked-Potato."
        );
    }

    #[test]
    fn infeasible_multitask_inside_continuous_segment() {
        let mut s = bp();
        s.apply_line("Step(1, Baked-Potato, 00:02:00, 00:00:00)").unwrap();
        let fb = s.apply_line("Step(4, Baked-Potato, 00:01:00, 00:01:00)").unwrap();
        assert_eq!(
            fb.message,
            "You can not perform step 4 of Recipe Baked-Potato and step 1 of Recipe Baked-Potato simultaneously since they are all continuous actions."
        );
        let fb = s.apply_line("Step(3, Baked-Potato, 00:01:00, 00:01:00)").unwrap();
        assert_eq!(fb.status, Status::Error(ErrorKind::TimeError));
    }

    #[test]
    fn occupancy_and_condition() {
        let inst = fixtures::instance(&["Baked-Potato", "Smore-Bars"]).unwrap();
        let mut s = SimState::new(inst, SessionConfig::default()).unwrap();
        s.apply_line("Step(0, Baked-Potato, 00:10:00, 00:00:00)").unwrap();
        let fb = s.apply_line("Step(0, Smore-Bars, 00:10:00, 00:00:00)").unwrap();
        assert_eq!(fb.message, "Object oven is currently occupied.");
        s.apply_line("Step(0, Smore-Bars, 00:10:00, 00:10:00)").unwrap();
        s.apply_line("Step(1, Baked-Potato, 00:02:00, 00:20:00)").unwrap();
        let fb = s.apply_line("Step(2, Baked-Potato, 00:05:00, 00:22:00)").unwrap();
        assert_eq!(
            fb.message,
            "The Property of the Object is temperature 350.0, but step 2 of recipe Baked-Potato needs temperature 425.0."
        );
    }

    #[test]
    fn identical_conditions_share_a_resource() {
        let inst = fixtures::instance(&["Baked-Potato", "Cheese-Sandwich"]).unwrap();
        let mut s = SimState::new(inst, SessionConfig::default()).unwrap();
        s.apply_line("Step(0, Baked-Potato, 00:10:00, 00:00:00)").unwrap();
        let fb = s.apply_line("Step(0, Cheese-Sandwich, 00:10:00, 00:00:00)").unwrap();
        assert_eq!(fb.status, Status::Ok);
        let inst = fixtures::instance(&["Vada", "Daikon-Radish"]).unwrap();
        let mut s = SimState::new(inst, SessionConfig::default()).unwrap();
        s.apply_line("Step(5, Vada, 00:05:00, 00:00:00)").unwrap();
        s.apply_line("Step(10, Daikon-Radish, 00:03:00, 00:00:00)").unwrap();
        let fb = s.apply_line("Step(11, Daikon-Radish, 00:10:00, 00:03:00)").unwrap();
        assert_eq!(fb.message, "Object stove is currently occupied.");
    }

    #[test]
    fn eager_deadline_failure() {
        let inst = fixtures::instance(&["Vada", "Daikon-Radish"]).unwrap();
        let mut s = SimState::new(inst, SessionConfig::default()).unwrap();
        s.apply_line("Step(5, Vada, 00:05:00, 00:00:00)").unwrap();
        s.apply_line("Step(0, Vada, 00:05:00, 00:00:00)").unwrap();
        assert_eq!(s.outcome(), Outcome::Pending);
        s.apply_line("Step(2, Vada, 00:05:00, 00:05:00)").unwrap();
        assert_eq!(s.outcome(), Outcome::Pending);
        let fb = s.apply_line("Step(1, Vada, 00:03:00, 00:10:00)").unwrap();
        assert_eq!(s.outcome(), Outcome::Failure(FailureReason::TimeConstraintViolation));
        assert_eq!(
            fb.message,
            "The time interval between Step 5 and Step 7 in Recipe Vada exceeds the allowed time limit 5 min."
        );
        assert_eq!(s.clock(), Timestamp::from_minutes(13));
    }

    #[test]
    fn hints_follow_ok_feedback() {
        let inst = fixtures::instance(&["Baked-Potato"]).unwrap();
        let mut s = SimState::new(
            inst,
            SessionConfig {
                hints: true,
                ..SessionConfig::default()
            },
        )
        .unwrap();
        let fb = s.apply_line("Step(0, Baked-Potato, 00:10:00, 00:00:00)").unwrap();
        assert_eq!(
            fb.hint.as_deref(),
            Some("The following actions are ready to be executed after 00:00:00, Step 1 of Recipe Baked-Potato, Step 3 of Recipe Baked-Potato.")
        );
        s.apply_line("Step(1, Baked-Potato, 00:02:00, 00:00:00)").unwrap();
        let ready = s.executable_actions(s.clock());
        let two = ready.iter().find(|(a, _)| a.step == 2).unwrap();
        assert_eq!(two.1, Timestamp::from_minutes(10));
        let bad = s.apply_line("Step(9, Baked-Potato, 00:02:00, 00:00:00)").unwrap();
        assert!(bad.hint.is_none());
    }

    #[test]
    fn executable_actions_on_fresh_and_finished_sessions() {
        let s = bp();
        let ready: Vec<(usize, u32)> = s
            .executable_actions(Timestamp::ZERO)
            .into_iter()
            .map(|(a, t)| (a.step, t.secs()))
            .collect();
        assert_eq!(ready, vec![(0, 0), (1, 0), (3, 0)]);
    }

    #[test]
    fn decided_session_rejects_commands() {
        let mut s = bp();
        s.abort();
        assert_eq!(s.outcome(), Outcome::Failure(FailureReason::AgentAborted));
        assert!(matches!(
            s.apply(&Command::Finish),
            Err(SimError::SessionOver(_))
        ));
    }
}
