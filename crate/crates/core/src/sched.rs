//! Schedulers: the ordering heuristic with backtracking, an always-busy
//! greedy baseline and an exact branch-and-bound search for small instances.
//!
//! All three build plans by driving a [`SimState`], so feasibility is decided
//! by the same code that judges agents. Start times are drawn from a finite
//! event-aligned set: the earliest feasible start, completion events and the
//! latest starts that still meet a pending time constraint.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_command, Command};
use crate::model::{Duration, Instance, ModelError, Timestamp};
use crate::sim::{replay, Compiled, Outcome, SessionConfig, SimState, Transcript};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub recipe: String,
    pub step: usize,
    pub start: Timestamp,
    pub exec_time: Duration,
}

impl ScheduleEntry {
    pub fn command(&self) -> Command {
        Command::Step {
            recipe: self.recipe.clone(),
            step: self.step,
            exec_time: self.exec_time,
            at: self.start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub entries: Vec<ScheduleEntry>,
    pub makespan: Duration,
}

impl Plan {
    pub fn new(entries: Vec<ScheduleEntry>) -> Plan {
        let makespan = entries
            .iter()
            .map(|e| (e.start + e.exec_time) - Timestamp::ZERO)
            .max()
            .unwrap_or(Duration::ZERO);
        Plan { entries, makespan }
    }

    /// Entries as agent commands, closed by `Finish`.
    pub fn commands(&self) -> Vec<Command> {
        self.entries
            .iter()
            .map(ScheduleEntry::command)
            .chain(std::iter::once(Command::Finish))
            .collect()
    }

    /// Plan file text: one `Step(...)` per line, then `Finish`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for command in self.commands() {
            out.push_str(&command.to_string());
            out.push('\n');
        }
        out
    }

    /// Reads a plan file. Blank lines and `#` comments are skipped; a
    /// trailing `Finish` is optional but nothing may follow it.
    pub fn parse(text: &str) -> Result<Plan, Error> {
        let mut entries = Vec::new();
        let mut finished = false;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if finished {
                return Err(Error::Argument(format!(
                    "line {}: command after Finish",
                    n + 1
                )));
            }
            match parse_command(line)? {
                Command::Finish => finished = true,
                Command::Step {
                    recipe,
                    step,
                    exec_time,
                    at,
                } => entries.push(ScheduleEntry {
                    recipe,
                    step,
                    start: at,
                    exec_time,
                }),
            }
        }
        Ok(Plan::new(entries))
    }

    /// Plan of the segments executed so far in `state`, ordered by start with
    /// autonomous starts ahead of the continuous one at the same instant.
    pub fn from_state(state: &SimState) -> Plan {
        let c = state.compiled();
        let mut rows: Vec<(u32, bool, &str, usize, ScheduleEntry)> = Vec::new();
        for id in 0..c.len() {
            for seg in &state.progress_by_id(id).segments {
                rows.push((
                    seg.start.secs(),
                    !c.auto[id],
                    c.recipe_name(id),
                    c.step(id),
                    ScheduleEntry {
                        recipe: c.recipe_name(id).to_string(),
                        step: c.step(id),
                        start: seg.start,
                        exec_time: seg.len(),
                    },
                ));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
        Plan::new(rows.into_iter().map(|r| r.4).collect())
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("No feasible schedule found.")]
    NoFeasiblePlan,
    #[error("instance has {actions} actions, above the limit of {limit}")]
    TooLarge { actions: usize, limit: usize },
    #[error("search budget exhausted; best plan found is not proven optimal")]
    Budget { best: Option<Plan> },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Replays a plan followed by `Finish`.
pub fn check_plan(instance: &Instance, plan: &Plan) -> Result<(Outcome, Transcript), Error> {
    let transcript = replay(instance, &plan.commands())?;
    Ok((transcript.outcome, transcript))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Move {
    id: usize,
    at: u32,
    exec: u32,
}

type Key = Vec<u32>;

/// Search context shared by the heuristic and the exact solver.
struct Ctx {
    c: Arc<Compiled>,
    topo: Vec<usize>,
    ancestors: Vec<Vec<usize>>,
    priority: Vec<usize>,
    exhaustive: bool,
}

impl Ctx {
    fn new(c: Arc<Compiled>, exhaustive: bool) -> Ctx {
        let n = c.len();
        let topo = global_topo(&c);
        let mut ancestors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &x in &topo {
            let mut set: Vec<usize> = Vec::new();
            for &p in &c.preds[x] {
                set.push(p);
                set.extend(ancestors[p].iter().copied());
            }
            set.sort_unstable();
            set.dedup();
            ancestors[x] = set;
        }
        let priority = action_priority(&c, &topo, &ancestors);
        Ctx {
            c,
            topo,
            ancestors,
            priority,
            exhaustive,
        }
    }

    fn key(st: &SimState) -> Key {
        let n = st.compiled().len();
        let mut key = Vec::with_capacity(2 * n + 1);
        key.push(st.clock_secs());
        for id in 0..n {
            key.push(st.progress_by_id(id).executed.secs());
            key.push(st.completed_at(id).map_or(u32::MAX, |t| t));
        }
        key
    }

    /// Optimistic finish time of every action from the current state.
    fn finish_bounds(&self, st: &SimState) -> Vec<u32> {
        let mut fin = vec![0u32; self.c.len()];
        for &x in &self.topo {
            fin[x] = match st.completed_at(x) {
                Some(done) => done,
                None => {
                    let es = self.c.preds[x]
                        .iter()
                        .map(|&p| fin[p])
                        .fold(st.clock_secs(), u32::max);
                    es + st.remaining(x)
                }
            };
        }
        fin
    }

    /// Lower bound on the start of `q`: its dependency path, and the agent's
    /// remaining continuous work among its unfinished ancestors.
    fn earliest_bound(&self, st: &SimState, fin: &[u32], q: usize) -> u32 {
        let clock = st.clock_secs();
        let path = self.c.preds[q]
            .iter()
            .map(|&p| fin[p])
            .fold(clock, u32::max);
        let work: u32 = self.ancestors[q]
            .iter()
            .filter(|&&y| !self.c.auto[y])
            .map(|&y| st.remaining(y))
            .sum();
        path.max(clock + work)
    }

    /// True when some started constraint can no longer be met.
    fn doomed(&self, st: &SimState) -> bool {
        let mut fin = None;
        for tc in &self.c.tcs {
            let Some(done) = st.completed_at(tc.pred) else {
                continue;
            };
            if st.progress_by_id(tc.succ).started() {
                continue;
            }
            let fin = fin.get_or_insert_with(|| self.finish_bounds(st));
            if self.earliest_bound(st, fin, tc.succ) > done + tc.gap {
                return true;
            }
        }
        false
    }

    fn lower_bound(&self, st: &SimState) -> u32 {
        let fin = self.finish_bounds(st);
        let critical = fin.iter().copied().max().unwrap_or(0);
        let work: u32 = (0..self.c.len())
            .filter(|&y| !self.c.auto[y])
            .map(|y| st.remaining(y))
            .sum();
        critical.max(st.clock_secs() + work)
    }

    fn ready(&self, st: &SimState, id: usize) -> bool {
        st.remaining(id) > 0
            && !(self.c.auto[id] && st.progress_by_id(id).started())
            && self.c.preds[id]
                .iter()
                .all(|&p| st.completed_at(p).is_some())
    }

    /// Candidate moves in the order the search should try them.
    fn moves(&self, st: &SimState) -> Vec<Move> {
        let c = &*self.c;
        let clock = st.clock_secs();
        let fin = self.finish_bounds(st);

        // Latest useful starts for unstarted autonomous predecessors of a
        // time constraint whose successor has not started.
        let mut targets: Vec<Vec<u32>> = vec![Vec::new(); c.len()];
        for tc in &c.tcs {
            let p = tc.pred;
            if !c.auto[p]
                || st.progress_by_id(p).started()
                || st.progress_by_id(tc.succ).started()
            {
                continue;
            }
            let q_start = self.earliest_bound(st, &fin, tc.succ);
            for t in [
                q_start.saturating_sub(c.dur[p] + tc.gap),
                q_start.saturating_sub(c.dur[p]),
            ] {
                if t >= clock && !targets[p].contains(&t) {
                    targets[p].push(t);
                }
            }
        }
        let running: Vec<u32> = (0..c.len())
            .filter_map(|id| st.completed_at(id).filter(|&t| t > clock))
            .collect();
        // Completions that open a deadline window for a waiting successor.
        let mut urgent: Vec<u32> = c
            .tcs
            .iter()
            .filter(|tc| !st.progress_by_id(tc.succ).started())
            .filter_map(|tc| st.completed_at(tc.pred).filter(|&t| t > clock))
            .collect();
        urgent.sort_unstable();
        urgent.dedup();

        let mut split_points: Vec<u32> = Vec::new();
        for (p, ts) in targets.iter().enumerate() {
            let preds_done_by = c.preds[p].iter().map(|&x| fin[x]).max().unwrap_or(0);
            split_points.extend(ts.iter().copied().filter(|&t| t >= preds_done_by));
        }

        let mut out: Vec<(u32, usize, usize, Move)> = Vec::new();
        for (id, own_targets) in targets.iter().enumerate() {
            if !self.ready(st, id) {
                continue;
            }
            let full = st.remaining(id);
            let Some(e) = st.earliest_start(id, clock, full) else {
                continue;
            };
            let mut starts = vec![e];
            let mut extra: Vec<u32> = own_targets.clone();
            if self.exhaustive {
                extra.extend(running.iter().copied());
            }
            for t in extra {
                if t > e {
                    if let Some(s) = st.earliest_start(id, t, full) {
                        starts.push(s);
                    }
                }
            }
            starts.sort_unstable();
            starts.dedup();
            for s in starts {
                let mut execs: Vec<u32> = Vec::new();
                if !c.auto[id] && c.intr[id] {
                    let mut cuts: Vec<u32> = split_points.clone();
                    if self.exhaustive {
                        cuts.extend(running.iter().copied());
                    } else {
                        cuts.extend(urgent.iter().copied());
                    }
                    for t in cuts {
                        if t > s && t < s + full && !execs.contains(&(t - s)) {
                            execs.push(t - s);
                        }
                    }
                }
                execs.push(full);
                for (variant, exec) in execs.into_iter().enumerate() {
                    out.push((s, self.priority[id], variant, Move { id, at: s, exec }));
                }
            }
        }
        out.sort_by_key(|&(s, pos, variant, _)| (s, pos, variant));
        out.into_iter().map(|(_, _, _, m)| m).collect()
    }

    fn step(&self, st: &SimState, m: Move) -> Option<SimState> {
        st.check_id(m.id, m.exec, m.at).ok()?;
        let mut next = st.clone();
        next.execute_id(m.id, m.exec, m.at).ok()?;
        (!self.doomed(&next)).then_some(next)
    }
}

/// Kahn order over all actions, ties by `(recipe name, step)`.
fn global_topo(c: &Compiled) -> Vec<usize> {
    let n = c.len();
    let mut indegree: Vec<usize> = (0..n).map(|id| c.preds[id].len()).collect();
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&id| indegree[id] == 0).collect();
    while !ready.is_empty() {
        ready.sort_by(|&a, &b| c.key(b).cmp(&c.key(a)));
        let next = ready.pop().expect("non-empty");
        order.push(next);
        for &s in &c.succs[next] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(s);
            }
        }
    }
    order
}

/// Position of every action in the heuristic's action list: autonomous
/// actions by duration (longest first), then continuous ones, each preceded
/// by its unplaced prerequisites in topological order.
fn action_priority(c: &Compiled, topo: &[usize], ancestors: &[Vec<usize>]) -> Vec<usize> {
    let n = c.len();
    let mut autonomous: Vec<usize> = (0..n).filter(|&id| c.auto[id]).collect();
    autonomous.sort_by(|&a, &b| c.dur[b].cmp(&c.dur[a]).then_with(|| c.key(a).cmp(&c.key(b))));
    let mut continuous: Vec<usize> = (0..n).filter(|&id| !c.auto[id]).collect();
    continuous.sort_by(|&a, &b| c.key(a).cmp(&c.key(b)));
    let rank: Vec<usize> = {
        let mut r = vec![0; n];
        for (i, &id) in topo.iter().enumerate() {
            r[id] = i;
        }
        r
    };
    let mut placed = vec![false; n];
    let mut list = Vec::with_capacity(n);
    for id in autonomous.into_iter().chain(continuous) {
        if placed[id] {
            continue;
        }
        let mut missing: Vec<usize> = ancestors[id]
            .iter()
            .copied()
            .filter(|&a| !placed[a])
            .collect();
        missing.sort_by_key(|&a| rank[a]);
        for a in missing.into_iter().chain(std::iter::once(id)) {
            placed[a] = true;
            list.push(a);
        }
    }
    let mut priority = vec![0; n];
    for (pos, &id) in list.iter().enumerate() {
        priority[id] = pos;
    }
    priority
}

/// Node limit for the heuristic's depth-first search.
pub const HEURISTIC_NODE_BUDGET: usize = 500_000;

struct Dfs<'a> {
    ctx: &'a Ctx,
    failed: HashSet<Key>,
    nodes: usize,
    budget: usize,
}

impl Dfs<'_> {
    fn run(&mut self, st: &SimState, path: &mut Vec<Move>) -> Option<bool> {
        if st.all_scheduled() {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        let key = Ctx::key(st);
        if self.failed.contains(&key) {
            return Some(false);
        }
        for m in self.ctx.moves(st) {
            let Some(next) = self.ctx.step(st, m) else {
                continue;
            };
            path.push(m);
            if self.run(&next, path)? {
                return Some(true);
            }
            path.pop();
        }
        self.failed.insert(key);
        Some(false)
    }
}

fn plan_from_moves(c: &Arc<Compiled>, moves: &[Move]) -> Plan {
    let mut state = SimState::from_compiled(Arc::clone(c), SessionConfig::default());
    for m in moves {
        state
            .execute_id(m.id, m.exec, m.at)
            .expect("search moves are feasible");
    }
    Plan::from_state(&state)
}

fn search_first(instance: &Instance, budget: usize) -> Result<Plan, ScheduleError> {
    let compiled = Arc::new(Compiled::new(instance.clone())?);
    let ctx = Ctx::new(Arc::clone(&compiled), false);
    let root = SimState::from_compiled(Arc::clone(&compiled), SessionConfig::default());
    let mut dfs = Dfs {
        ctx: &ctx,
        failed: HashSet::new(),
        nodes: 0,
        budget,
    };
    let mut path = Vec::new();
    match dfs.run(&root, &mut path) {
        Some(true) => Ok(plan_from_moves(&compiled, &path)),
        _ => Err(ScheduleError::NoFeasiblePlan),
    }
}

/// The ordering heuristic with full backtracking. With
/// `respect_time_constraints == false` the deadlines are dropped and the
/// better of the relaxed and constrained plans is returned.
pub fn heuristic_schedule(
    instance: &Instance,
    respect_time_constraints: bool,
) -> Result<Plan, ScheduleError> {
    heuristic_schedule_with_budget(instance, respect_time_constraints, HEURISTIC_NODE_BUDGET)
}

pub fn heuristic_schedule_with_budget(
    instance: &Instance,
    respect_time_constraints: bool,
    budget: usize,
) -> Result<Plan, ScheduleError> {
    if respect_time_constraints || !instance.has_time_constraints() {
        return search_first(instance, budget);
    }
    let relaxed = search_first(&instance.without_time_constraints(), budget);
    let constrained = search_first(instance, budget);
    match (relaxed, constrained) {
        (Ok(r), Ok(c)) if c.makespan < r.makespan => Ok(c),
        (Ok(r), _) => Ok(r),
        (Err(_), Ok(c)) => Ok(c),
        (Err(e), Err(_)) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_actions: usize,
    /// Children explored per node; a cut makes the result non-optimal.
    pub max_branch: usize,
    pub time_budget: std::time::Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_actions: 12,
            max_branch: 256,
            time_budget: std::time::Duration::from_secs(60),
        }
    }
}

struct BranchAndBound<'a> {
    ctx: &'a Ctx,
    limits: Limits,
    started: Instant,
    visited: HashSet<Key>,
    best: u32,
    best_path: Option<Vec<Move>>,
    exhausted: bool,
    nodes: u64,
}

impl BranchAndBound<'_> {
    fn run(&mut self, st: &SimState, path: &mut Vec<Move>) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) && self.started.elapsed() > self.limits.time_budget {
            self.exhausted = true;
            return;
        }
        if st.all_scheduled() {
            let end = (0..self.ctx.c.len())
                .filter_map(|id| st.completed_at(id))
                .fold(st.clock_secs(), u32::max);
            if end < self.best {
                self.best = end;
                self.best_path = Some(path.clone());
            }
            return;
        }
        if self.ctx.lower_bound(st) >= self.best || !self.visited.insert(Ctx::key(st)) {
            return;
        }
        let moves = self.ctx.moves(st);
        if moves.len() > self.limits.max_branch {
            self.exhausted = true;
        }
        for m in moves.into_iter().take(self.limits.max_branch) {
            let Some(next) = self.ctx.step(st, m) else {
                continue;
            };
            path.push(m);
            self.run(&next, path);
            path.pop();
        }
    }
}

/// Minimum-makespan plan over the event-aligned schedule space.
pub fn optimal_schedule(instance: &Instance, limits: Limits) -> Result<Plan, ScheduleError> {
    let actions = instance.action_count();
    if actions > limits.max_actions {
        return Err(ScheduleError::TooLarge {
            actions,
            limit: limits.max_actions,
        });
    }
    let compiled = Arc::new(Compiled::new(instance.clone())?);
    let ctx = Ctx::new(Arc::clone(&compiled), true);
    let seed = search_first(instance, HEURISTIC_NODE_BUDGET).ok();
    let mut bnb = BranchAndBound {
        ctx: &ctx,
        limits,
        started: Instant::now(),
        visited: HashSet::new(),
        best: seed
            .as_ref()
            .map_or(u32::MAX, |p| p.makespan.secs().saturating_add(1)),
        best_path: None,
        exhausted: false,
        nodes: 0,
    };
    let root = SimState::from_compiled(Arc::clone(&compiled), SessionConfig::default());
    bnb.run(&root, &mut Vec::new());
    let best = match bnb.best_path {
        Some(path) => {
            let plan = plan_from_moves(&compiled, &path);
            match &seed {
                Some(s) if s.makespan <= plan.makespan => Some(s.clone()),
                _ => Some(plan),
            }
        }
        None => seed,
    };
    match (best, bnb.exhausted) {
        (best, true) => Err(ScheduleError::Budget { best }),
        (Some(plan), false) => Ok(plan),
        (None, false) => Err(ScheduleError::NoFeasiblePlan),
    }
}

/// Result of the always-busy baseline: the commands it issued and how the
/// environment judged them.
#[derive(Clone, Debug)]
pub struct GreedyResult {
    pub plan: Plan,
    pub outcome: Outcome,
    pub transcript: Transcript,
}

/// Keeps the agent occupied: at every event it starts every runnable
/// autonomous action, then the runnable continuous action with the smallest
/// `(recipe, step)`, and otherwise waits for the next completion. It never
/// looks ahead at deadlines.
pub fn greedy_schedule(instance: &Instance) -> Result<GreedyResult, Error> {
    let mut st = SimState::new(instance.clone(), SessionConfig::default())?;
    let compiled = Arc::clone(st.compiled());
    let c = &*compiled;
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c.key(a).cmp(&c.key(b)));
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    let mut t = 0u32;
    let runnable = |st: &SimState, id: usize, t: u32| {
        st.remaining(id) > 0
            && !(c.auto[id] && st.progress_by_id(id).started())
            && st.check_id(id, st.remaining(id), t).is_ok()
    };
    'events: while !st.all_scheduled() && st.outcome() == Outcome::Pending {
        for &id in &order {
            if c.auto[id] && runnable(&st, id, t) {
                let exec = st.remaining(id);
                entries.push(entry(c, id, t, exec));
                if st.execute_id(id, exec, t).is_err() {
                    break 'events;
                }
            }
        }
        if let Some(&id) = order.iter().find(|&&id| !c.auto[id] && runnable(&st, id, t)) {
            let exec = st.remaining(id);
            entries.push(entry(c, id, t, exec));
            if st.execute_id(id, exec, t).is_err() {
                break;
            }
            t = st.clock_secs();
            continue;
        }
        match (0..c.len())
            .filter_map(|id| st.completed_at(id))
            .filter(|&done| done > t)
            .min()
        {
            Some(next) => t = next,
            None => break,
        }
    }
    let plan = Plan::new(entries);
    let (outcome, transcript) = check_plan(instance, &plan)?;
    Ok(GreedyResult {
        plan,
        outcome,
        transcript,
    })
}

fn entry(c: &Compiled, id: usize, at: u32, exec: u32) -> ScheduleEntry {
    ScheduleEntry {
        recipe: c.recipe_name(id).to_string(),
        step: c.step(id),
        start: Timestamp::from_secs(at),
        exec_time: Duration::from_secs(exec),
    }
}
