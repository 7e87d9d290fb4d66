//! The line-oriented recipe document format and the agent command grammar.
//!
//! A recipe document looks like:
//!
//! ```text
//! ## Recipe 1:Baked-Potato
//! Step 0 (10 min): Preheat the oven to 425 degrees.
//! Step 1 (2 min): Pierce the potato several times with a fork.
//! ...
//! Interruptible steps: 1, 4.
//! Autonomous actions: step 0, 2, 3.
//! Action Dependency: 0->2, 1->2, 2->4, 3->5, 4->5.
//! Time Constraints: 3->5 (2 min).
//! Steps 0, 2 require oven, Steps 3 requires microwave.
//! Resource Conditions: step 0 sets oven temperature=425; step 2 requires oven temperature=425.
//! ```
//!
//! Annotation lines are optional; a step missing from the autonomous list is
//! continuous and a step missing from the interruptible list runs in one go.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{
    name_is_valid, Action, ConcurrencyClass, Duration, Recipe, ResourceRequirement,
    TimeConstraint, Timestamp,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected a `## Recipe N:Name` header")]
    MissingHeader,
    #[error("invalid recipe name {0:?}")]
    BadName(String),
    #[error("{0}")]
    Syntax(String),
    #[error("step {0} is defined twice")]
    DuplicateStep(usize),
    #[error("expected step {expected}, found step {found}")]
    NonDenseStep { expected: usize, found: usize },
    #[error("step {0} does not exist")]
    DanglingReference(usize),
    #[error("step {step} does not require {kind}")]
    UnknownResource { step: usize, kind: String },
    #[error("annotation line {0:?} appears twice")]
    DuplicateLine(&'static str),
    #[error("unrecognised line")]
    UnknownLine,
    #[error("document contains no steps")]
    NoSteps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RenderMode {
    /// Every annotation, as in the oracle setting.
    Full,
    /// Concurrency and resource annotations withheld; interruptibility,
    /// dependencies and time constraints kept.
    Masked,
}

static HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^##\s*Recipe\s*(?:\d+\s*)?:\s*(.+?)\s*$").unwrap());
static STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^Step\s+(\d+)\s*\(\s*([0-9]+(?:\.[0-9]+)?)\s*(min|sec|s)\s*\)\s*:\s?(.*)$")
        .unwrap()
});
static EDGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d+)\s*-(>?)\s*(\d+)$").unwrap());
static TC_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d+)\s*-(>?)\s*(\d+)\s*\(\s*([0-9]+(?:\.[0-9]+)?)\s*(min|sec|s)\s*\)$").unwrap()
});
static RESOURCE_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"Steps?\s+((?:\d+\s*,\s*)*\d+)\s+requires?\s+([A-Za-z][A-Za-z0-9_-]*)").unwrap()
});
static CONDITION_ITEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^step\s+(\d+)\s+(sets|requires)\s+([A-Za-z][A-Za-z0-9_-]*)((?:\s+[^\s=;]+=[^\s=;]+)+)$")
        .unwrap()
});
static COMMAND_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^Step\s*\(\s*(\d+)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")
        .unwrap()
});

fn parse_amount(number: &str, unit: &str) -> Option<Duration> {
    let value: f64 = number.parse().ok()?;
    let secs = if unit == "min" { value * 60.0 } else { value };
    if secs < 0.0 || secs > f64::from(u32::MAX) || (secs - secs.round()).abs() > 1e-6 {
        return None;
    }
    Some(Duration::from_secs(secs.round() as u32))
}

fn render_amount(d: Duration) -> String {
    if d.secs().is_multiple_of(60) {
        format!("{} min", d.secs() / 60)
    } else {
        format!("{} sec", d.secs())
    }
}

/// Splits `text` on commas, yielding `(column offset, trimmed item)`.
fn items(text: &str, base: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in text.split(',') {
        let lead = part.len() - part.trim_start().len();
        let item = part.trim();
        if !item.is_empty() {
            out.push((base + offset + lead, item));
        }
        offset += part.len() + 1;
    }
    out
}

fn strip_period(text: &str) -> &str {
    text.trim_end().trim_end_matches('.').trim_end()
}

struct Ref {
    step: usize,
    line: usize,
    column: usize,
}

struct Parser {
    name: String,
    actions: Vec<Action>,
    interruptible: Option<Vec<Ref>>,
    autonomous: Option<Vec<Ref>>,
    dependencies: Option<Vec<(Ref, Ref)>>,
    time_constraints: Option<Vec<(Ref, Ref, Duration)>>,
    resources: Option<Vec<(Ref, String)>>,
    conditions: Option<Vec<RawCondition>>,
}

type RawCondition = (Ref, bool, String, Vec<(String, String)>);

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn set_once<T>(
    slot: &mut Option<T>,
    value: T,
    what: &'static str,
    line: usize,
) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(err(line, 1, ParseErrorKind::DuplicateLine(what)));
    }
    *slot = Some(value);
    Ok(())
}

fn step_number(text: &str, line: usize, column: usize) -> Result<Ref, ParseError> {
    let digits = text
        .strip_prefix("steps")
        .or_else(|| text.strip_prefix("step"))
        .unwrap_or(text)
        .trim();
    let step = digits.parse::<usize>().map_err(|_| {
        err(
            line,
            column,
            ParseErrorKind::Syntax(format!("expected a step number, found {text:?}")),
        )
    })?;
    Ok(Ref {
        step,
        line,
        column,
    })
}

fn step_list(body: &str, line: usize, base: usize) -> Result<Vec<Ref>, ParseError> {
    let body = strip_period(body);
    if body.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    items(body, base)
        .into_iter()
        .map(|(col, item)| step_number(item, line, col))
        .collect()
}

/// Parses a single recipe document.
pub fn parse_recipe(text: &str) -> Result<Recipe, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| err(1, 1, ParseErrorKind::MissingHeader))?;
    let name = HEADER
        .captures(header.trim())
        .ok_or_else(|| err(header_line, 1, ParseErrorKind::MissingHeader))?[1]
        .to_string();
    if !name_is_valid(&name) {
        return Err(err(header_line, 1, ParseErrorKind::BadName(name)));
    }

    let mut p = Parser {
        name,
        actions: Vec::new(),
        interruptible: None,
        autonomous: None,
        dependencies: None,
        time_constraints: None,
        resources: None,
        conditions: None,
    };

    for (ln, raw) in lines {
        let indent = raw.len() - raw.trim_start().len();
        let line = raw.trim();
        let col = |offset: usize| indent + offset + 1;
        if let Some(c) = STEP.captures(line) {
            let found: usize = c[1].parse().map_err(|_| {
                err(ln, col(5), ParseErrorKind::Syntax("step number too large".into()))
            })?;
            let expected = p.actions.len();
            if found < expected {
                return Err(err(ln, col(5), ParseErrorKind::DuplicateStep(found)));
            }
            if found != expected {
                return Err(err(
                    ln,
                    col(5),
                    ParseErrorKind::NonDenseStep { expected, found },
                ));
            }
            let duration = parse_amount(&c[2], &c[3]).ok_or_else(|| {
                err(
                    ln,
                    col(c.get(2).unwrap().start()),
                    ParseErrorKind::Syntax("duration must be a whole number of seconds".into()),
                )
            })?;
            p.actions
                .push(Action::new(found, c[4].trim().to_string(), duration));
            continue;
        }
        let Some((key, body)) = line.split_once(':') else {
            if line.starts_with("Step") && line.contains("require") {
                parse_resources(&mut p, line, ln, indent)?;
                continue;
            }
            return Err(err(ln, col(0), ParseErrorKind::UnknownLine));
        };
        let base = indent + key.len() + 2;
        match key.trim().to_ascii_lowercase().as_str() {
            "interruptible steps" | "interrutable steps" | "interruptable steps" => {
                let refs = step_list(body, ln, base)?;
                set_once(&mut p.interruptible, refs, "Interruptible steps", ln)?;
            }
            "autonomous actions" => {
                let refs = step_list(body, ln, base)?;
                set_once(&mut p.autonomous, refs, "Autonomous actions", ln)?;
            }
            "action dependency" | "action dependencies" => {
                let mut edges = Vec::new();
                for (c, item) in items(strip_period(body), base) {
                    let m = EDGE.captures(item).ok_or_else(|| {
                        err(
                            ln,
                            c,
                            ParseErrorKind::Syntax(format!("expected `a->b`, found {item:?}")),
                        )
                    })?;
                    edges.push((
                        step_number(&m[1], ln, c)?,
                        step_number(&m[3], ln, c + m.get(3).unwrap().start())?,
                    ));
                }
                set_once(&mut p.dependencies, edges, "Action Dependency", ln)?;
            }
            "time constraints" => {
                let mut tcs = Vec::new();
                for (c, item) in items(strip_period(body), base) {
                    let m = TC_ITEM.captures(item).ok_or_else(|| {
                        err(
                            ln,
                            c,
                            ParseErrorKind::Syntax(format!(
                                "expected `a->b (N min)`, found {item:?}"
                            )),
                        )
                    })?;
                    let gap = parse_amount(&m[4], &m[5]).ok_or_else(|| {
                        err(ln, c, ParseErrorKind::Syntax("invalid gap".into()))
                    })?;
                    tcs.push((
                        step_number(&m[1], ln, c)?,
                        step_number(&m[3], ln, c + m.get(3).unwrap().start())?,
                        gap,
                    ));
                }
                set_once(&mut p.time_constraints, tcs, "Time Constraints", ln)?;
            }
            "resource conditions" => {
                let mut conds = Vec::new();
                let body = strip_period(body);
                let mut offset = 0;
                for part in body.split(';') {
                    let c = base + offset + (part.len() - part.trim_start().len());
                    offset += part.len() + 1;
                    let item = part.trim();
                    if item.is_empty() {
                        continue;
                    }
                    let m = CONDITION_ITEM.captures(item).ok_or_else(|| {
                        err(
                            ln,
                            c,
                            ParseErrorKind::Syntax(format!(
                                "expected `step K sets|requires KIND key=value`, found {item:?}"
                            )),
                        )
                    })?;
                    let pairs = m[4]
                        .split_whitespace()
                        .filter_map(|kv| kv.split_once('='))
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect();
                    conds.push((
                        step_number(&m[1], ln, c)?,
                        &m[2] == "sets",
                        m[3].to_string(),
                        pairs,
                    ));
                }
                set_once(&mut p.conditions, conds, "Resource Conditions", ln)?;
            }
            _ if line.starts_with("Step") && line.contains("require") => {
                parse_resources(&mut p, line, ln, indent)?;
            }
            _ => return Err(err(ln, col(0), ParseErrorKind::UnknownLine)),
        }
    }
    p.finish()
}

fn parse_resources(p: &mut Parser, line: &str, ln: usize, indent: usize) -> Result<(), ParseError> {
    let body = strip_period(line);
    let mut refs = Vec::new();
    let mut covered = 0;
    for m in RESOURCE_ITEM.captures_iter(body) {
        let whole = m.get(0).unwrap();
        let between = &body[covered..whole.start()];
        if !between.trim().trim_matches(',').trim().is_empty() {
            return Err(err(
                ln,
                indent + covered + 1,
                ParseErrorKind::Syntax(format!("unexpected text {between:?}")),
            ));
        }
        covered = whole.end();
        let list = m.get(1).unwrap();
        for (c, item) in items(list.as_str(), indent + list.start() + 1) {
            refs.push((step_number(item, ln, c)?, m[2].to_string()));
        }
    }
    if refs.is_empty() || !body[covered..].trim().is_empty() {
        return Err(err(
            ln,
            indent + covered + 1,
            ParseErrorKind::Syntax("expected `Steps a, b require KIND`".into()),
        ));
    }
    match &mut p.resources {
        // Several resource lines are allowed; they accumulate.
        Some(existing) => existing.extend(refs),
        None => p.resources = Some(refs),
    }
    Ok(())
}

impl Parser {
    fn finish(self) -> Result<Recipe, ParseError> {
        let n = self.actions.len();
        if n == 0 {
            return Err(err(1, 1, ParseErrorKind::NoSteps));
        }
        let check = |r: &Ref| -> Result<usize, ParseError> {
            if r.step >= n {
                Err(err(r.line, r.column, ParseErrorKind::DanglingReference(r.step)))
            } else {
                Ok(r.step)
            }
        };
        let mut actions = self.actions;
        for r in self.interruptible.iter().flatten() {
            actions[check(r)?].interruptible = true;
        }
        for r in self.autonomous.iter().flatten() {
            actions[check(r)?].concurrency = ConcurrencyClass::Autonomous;
        }
        let mut dependencies = BTreeSet::new();
        for (a, b) in self.dependencies.iter().flatten() {
            dependencies.insert((check(a)?, check(b)?));
        }
        let mut time_constraints = Vec::new();
        for (a, b, gap) in self.time_constraints.iter().flatten() {
            time_constraints.push(TimeConstraint {
                pred: check(a)?,
                succ: check(b)?,
                max_gap: *gap,
            });
        }
        for (r, kind) in self.resources.iter().flatten() {
            let step = check(r)?;
            if !actions[step].resources.iter().any(|q| &q.kind == kind) {
                actions[step].resources.push(ResourceRequirement::new(kind.clone()));
            }
        }
        for (r, sets, kind, pairs) in self.conditions.iter().flatten() {
            let step = check(r)?;
            let req = actions[step]
                .resources
                .iter_mut()
                .find(|q| &q.kind == kind)
                .ok_or_else(|| {
                    err(
                        r.line,
                        r.column,
                        ParseErrorKind::UnknownResource {
                            step,
                            kind: kind.clone(),
                        },
                    )
                })?;
            let target = if *sets {
                &mut req.establishes_condition
            } else {
                &mut req.required_condition
            };
            target.extend(pairs.iter().cloned());
        }
        Ok(Recipe {
            name: self.name,
            actions,
            dependencies,
            time_constraints,
        })
    }
}

fn join_steps(steps: impl Iterator<Item = usize>) -> String {
    steps.map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

/// Renders a recipe as `## Recipe 1:<name>` followed by its lines.
pub fn render_recipe(recipe: &Recipe, mode: RenderMode) -> String {
    render_recipe_numbered(recipe, mode, 1)
}

pub fn render_recipe_numbered(recipe: &Recipe, mode: RenderMode, number: usize) -> String {
    let mut out = format!("## Recipe {number}:{}\n", recipe.name);
    for a in &recipe.actions {
        out.push_str(&format!(
            "Step {} ({}): {}\n",
            a.index,
            render_amount(a.duration),
            a.description
        ));
    }
    out.push('\n');
    let interruptible: Vec<usize> = recipe
        .actions
        .iter()
        .filter(|a| a.interruptible)
        .map(|a| a.index)
        .collect();
    if !interruptible.is_empty() {
        out.push_str(&format!(
            "Interruptible steps: {}.\n",
            join_steps(interruptible.into_iter())
        ));
    }
    let autonomous: Vec<usize> = recipe
        .actions
        .iter()
        .filter(|a| a.is_autonomous())
        .map(|a| a.index)
        .collect();
    if mode == RenderMode::Full && !autonomous.is_empty() {
        out.push_str(&format!(
            "Autonomous actions: step {}.\n",
            join_steps(autonomous.into_iter())
        ));
    }
    if !recipe.dependencies.is_empty() {
        let edges: Vec<String> = recipe
            .dependencies
            .iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect();
        out.push_str(&format!("Action Dependency: {}.\n", edges.join(", ")));
    }
    if !recipe.time_constraints.is_empty() {
        let tcs: Vec<String> = recipe
            .time_constraints
            .iter()
            .map(|tc| format!("{}->{} ({})", tc.pred, tc.succ, render_amount(tc.max_gap)))
            .collect();
        out.push_str(&format!("Time Constraints: {}.\n", tcs.join(", ")));
    }
    if mode == RenderMode::Full {
        let mut kinds: Vec<&str> = Vec::new();
        for req in recipe.actions.iter().flat_map(|a| &a.resources) {
            if !kinds.contains(&req.kind.as_str()) {
                kinds.push(&req.kind);
            }
        }
        if !kinds.is_empty() {
            let groups: Vec<String> = kinds
                .iter()
                .map(|kind| {
                    let steps: Vec<usize> = recipe
                        .actions
                        .iter()
                        .filter(|a| a.resources.iter().any(|r| r.kind == *kind))
                        .map(|a| a.index)
                        .collect();
                    let verb = if steps.len() > 1 { "require" } else { "requires" };
                    format!("Steps {} {verb} {kind}", join_steps(steps.into_iter()))
                })
                .collect();
            out.push_str(&format!("{}.\n", groups.join(", ")));
        }
        let mut clauses = Vec::new();
        for a in &recipe.actions {
            for req in &a.resources {
                for (verb, cond) in [
                    ("sets", &req.establishes_condition),
                    ("requires", &req.required_condition),
                ] {
                    if !cond.is_empty() {
                        let pairs: Vec<String> =
                            cond.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        clauses.push(format!(
                            "step {} {verb} {} {}",
                            a.index,
                            req.kind,
                            pairs.join(" ")
                        ));
                    }
                }
            }
        }
        if !clauses.is_empty() {
            out.push_str(&format!("Resource Conditions: {}.\n", clauses.join("; ")));
        }
    }
    out
}

/// One agent command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    /// Execute `step` of `recipe` for `exec_time`, starting at `at`.
    Step {
        recipe: String,
        step: usize,
        exec_time: Duration,
        at: Timestamp,
    },
    Finish,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Step {
                recipe,
                step,
                exec_time,
                at,
            } => write!(
                f,
                "Step({step}, {recipe}, {}, {})",
                Timestamp::from_secs(exec_time.secs()).padded(),
                at.padded()
            ),
            Command::Finish => f.write_str("Finish"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse command {text:?}: {reason}")]
pub struct CommandParseError {
    pub text: String,
    pub reason: String,
}

fn parse_exec_time(text: &str) -> Option<Duration> {
    if let Some(t) = Timestamp::parse(text) {
        return Some(Duration::from_secs(t.secs()));
    }
    let (number, unit) = text.trim().split_once(char::is_whitespace)?;
    match unit.trim() {
        "min" | "mins" | "minutes" => parse_amount(number, "min"),
        _ => None,
    }
}

/// Parses `Step(step_num, recipe_name, HH:MM:SS, HH:MM:SS)` or `Finish`.
/// Execution time also accepts `N min`.
pub fn parse_command(text: &str) -> Result<Command, CommandParseError> {
    let trimmed = text.trim();
    let fail = |reason: &str| CommandParseError {
        text: trimmed.to_string(),
        reason: reason.to_string(),
    };
    if trimmed == "Finish" {
        return Ok(Command::Finish);
    }
    let c = COMMAND_STEP
        .captures(trimmed)
        .ok_or_else(|| fail("expected Step(step_num, recipe_name, time, timestamp) or Finish"))?;
    let step = c[1].parse().map_err(|_| fail("step number out of range"))?;
    let exec_time = parse_exec_time(&c[3]).ok_or_else(|| fail("invalid execution time"))?;
    let at = Timestamp::parse(&c[4]).ok_or_else(|| fail("invalid timestamp"))?;
    Ok(Command::Step {
        recipe: c[2].to_string(),
        step,
        exec_time,
        at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn parses_baked_potato() {
        let bp = parse_recipe(fixtures::source("Baked-Potato").unwrap()).unwrap();
        assert_eq!(bp.name, "Baked-Potato");
        assert_eq!(bp.actions.len(), 6);
        let autonomous: Vec<usize> = bp
            .actions
            .iter()
            .filter(|a| a.is_autonomous())
            .map(|a| a.index)
            .collect();
        assert_eq!(autonomous, vec![0, 2, 3]);
        let interruptible: Vec<usize> = bp
            .actions
            .iter()
            .filter(|a| a.interruptible)
            .map(|a| a.index)
            .collect();
        assert_eq!(interruptible, vec![1, 4]);
        assert_eq!(
            bp.dependencies,
            BTreeSet::from([(0, 2), (1, 2), (2, 4), (3, 5), (4, 5)])
        );
        assert_eq!(
            bp.time_constraints,
            vec![TimeConstraint {
                pred: 3,
                succ: 5,
                max_gap: Duration::from_minutes(2)
            }]
        );
        let users = |kind: &str| -> Vec<usize> {
            bp.actions
                .iter()
                .filter(|a| a.resources.iter().any(|r| r.kind == kind))
                .map(|a| a.index)
                .collect()
        };
        assert_eq!(users("oven"), vec![0, 2]);
        assert_eq!(users("microwave"), vec![3]);
        assert_eq!(
            bp.actions[0].resources[0].establishes_condition["temperature"],
            "425"
        );
        assert_eq!(
            bp.actions[2].resources[0].required_condition["temperature"],
            "425"
        );
    }

    #[test]
    fn parses_daikon_time_constraints() {
        let d = parse_recipe(fixtures::source("Daikon-Radish").unwrap()).unwrap();
        let tcs: Vec<(usize, usize, u32)> = d
            .time_constraints
            .iter()
            .map(|t| (t.pred, t.succ, t.max_gap.secs() / 60))
            .collect();
        assert_eq!(tcs, vec![(5, 6, 2), (6, 7, 1), (7, 8, 3), (8, 9, 2)]);
    }

    #[test]
    fn accepts_dash_spelling_and_misspelled_interruptible() {
        let vada = parse_recipe(fixtures::source("Vada").unwrap()).unwrap();
        assert_eq!((vada.time_constraints[0].pred, vada.time_constraints[0].succ), (5, 7));
        let tacos = parse_recipe(fixtures::source("Tacos").unwrap()).unwrap();
        assert!(tacos.actions[3].interruptible && tacos.actions[4].interruptible);
    }

    #[test]
    fn dangling_dependency() {
        let doc = "## Recipe 1:R\nStep 0 (1 min): a\nStep 1 (1 min): b\nStep 2 (1 min): c\n\
                   Step 3 (1 min): d\nStep 4 (1 min): e\nAction Dependency: 0->9.\n";
        let e = parse_recipe(doc).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DanglingReference(9));
        assert_eq!(e.line, 7);
        assert_eq!(e.column, 23);
    }

    #[test]
    fn duplicate_and_sparse_steps() {
        let dup = "## Recipe 1:R\nStep 0 (1 min): a\nStep 0 (1 min): b\n";
        assert_eq!(
            parse_recipe(dup).unwrap_err().kind,
            ParseErrorKind::DuplicateStep(0)
        );
        let sparse = "## Recipe 1:R\nStep 0 (1 min): a\nStep 2 (1 min): b\n";
        assert_eq!(
            parse_recipe(sparse).unwrap_err().kind,
            ParseErrorKind::NonDenseStep {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_recipe("Step 0 (1 min): a").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
        let e = parse_recipe("## Recipe 1:R\nStep 0 (1 min): a\nAction Dependency: 0=>1.\n")
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!((e.line, e.column), (3, 20));
        let e = parse_recipe("## Recipe 1:R\nStep 0 (1 min): a\nWhatever\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownLine);
        let e = parse_recipe(
            "## Recipe 1:R\nStep 0 (1 min): a\nResource Conditions: step 0 sets oven t=1.\n",
        )
        .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnknownResource { .. }));
    }

    #[test]
    fn round_trips_every_fixture() {
        for (name, src) in fixtures::SOURCES {
            let r = parse_recipe(src).unwrap();
            let again = parse_recipe(&render_recipe(&r, RenderMode::Full)).unwrap();
            assert_eq!(r, again, "{name}");
        }
    }

    #[test]
    fn masked_rendering() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        let masked = render_recipe(&bp, RenderMode::Masked);
        assert!(!masked.contains("Autonomous actions"));
        assert!(!masked.contains("require oven"));
        assert!(!masked.contains("Resource Conditions"));
        assert!(masked.contains("Interruptible steps: 1, 4."));
        assert!(masked.contains("Time Constraints: 3->5 (2 min)."));
        let full = render_recipe(&bp, RenderMode::Full);
        let full_lines: Vec<&str> = full.lines().collect();
        assert!(masked.lines().all(|l| full_lines.contains(&l)));
        assert!(masked.lines().count() < full_lines.len());

        let vada = fixtures::recipe("Vada").unwrap();
        assert!(render_recipe(&vada, RenderMode::Masked)
            .contains("Time Constraints: 5->7 (5 min), 7->8 (5 min), 8->9 (5 min)."));
    }

    #[test]
    fn full_rendering_matches_table_layout() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        let full = render_recipe(&bp, RenderMode::Full);
        assert!(full.starts_with("## Recipe 1:Baked-Potato\nStep 0 (10 min): Preheat"));
        assert!(full.contains("Steps 0, 2 require oven, Steps 3 requires microwave.\n"));
        assert!(full.contains("Autonomous actions: step 0, 2, 3.\n"));
    }

    #[test]
    fn command_grammar() {
        assert_eq!(
            parse_command("Step(4, Baked-Potato, 00:05:00, 00:15:00)").unwrap(),
            Command::Step {
                recipe: "Baked-Potato".into(),
                step: 4,
                exec_time: Duration::from_secs(300),
                at: Timestamp::from_secs(900),
            }
        );
        assert_eq!(
            parse_command("Step(4, Baked-Potato, 00:05:00, 00:15:0)").unwrap(),
            parse_command("Step( 4 ,Baked-Potato,0:5:0 , 0:15:0 )").unwrap()
        );
        assert_eq!(parse_command("Finish").unwrap(), Command::Finish);
        assert!(parse_command("Step(4 Baked-Potato)").is_err());
        assert!(parse_command("Step(4, Baked-Potato, 00:05:00)").is_err());
        assert!(parse_command("Step(x, Baked-Potato, 00:05:00, 00:00:00)").is_err());
        assert_eq!(
            parse_command("Step(0, Baked-Potato, 10 min, 00:00:00)").unwrap(),
            parse_command("Step(0, Baked-Potato, 00:10:00, 00:00:00)").unwrap()
        );
        let cmd = parse_command("Step(4, Baked-Potato, 0:5:0, 0:15:0)").unwrap();
        assert_eq!(cmd.to_string(), "Step(4, Baked-Potato, 00:05:00, 00:15:00)");
    }
}
