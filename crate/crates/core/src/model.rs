//! Recipe task graphs: actions, dependencies, time constraints and
//! multi-recipe instances.
//!
//! All time quantities are integer seconds. The textual formats render
//! durations in minutes and timestamps as `H:M:S`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A length of time in whole seconds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Duration(u32);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_secs(secs: u32) -> Self {
        Duration(secs)
    }

    pub const fn from_minutes(minutes: u32) -> Self {
        Duration(minutes * 60)
    }

    pub const fn secs(self) -> u32 {
        self.0
    }

    pub fn as_minutes(self) -> f64 {
        f64::from(self.0) / 60.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Minutes as the number part of an `"N min"` rendering: `2`, `1.5`, `0.25`.
    pub fn minutes_text(self) -> String {
        if self.0.is_multiple_of(60) {
            (self.0 / 60).to_string()
        } else {
            let text = format!("{:.4}", self.as_minutes());
            text.trim_end_matches('0').trim_end_matches('.').to_string()
        }
    }

    pub fn saturating_sub(self, other: Duration) -> Duration {
        Duration(self.0.saturating_sub(other.0))
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} min", self.minutes_text())
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        self.0 += rhs.0;
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Sum for Duration {
    fn sum<I: Iterator<Item = Duration>>(iter: I) -> Duration {
        iter.fold(Duration::ZERO, Add::add)
    }
}

/// An instant on the session timeline, seconds since session start.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(u32);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_secs(secs: u32) -> Self {
        Timestamp(secs)
    }

    pub const fn from_minutes(minutes: u32) -> Self {
        Timestamp(minutes * 60)
    }

    pub const fn secs(self) -> u32 {
        self.0
    }

    /// Zero-padded `HH:MM:SS`. Hours are not wrapped at 24.
    pub fn padded(self) -> String {
        let (h, m, s) = self.hms();
        format!("{h:02}:{m:02}:{s:02}")
    }

    fn hms(self) -> (u32, u32, u32) {
        (self.0 / 3600, (self.0 / 60) % 60, self.0 % 60)
    }

    /// Parses `H:M:S` with any number of digits per field (`00:15:0`, `0:5:0`).
    pub fn parse(text: &str) -> Option<Timestamp> {
        let mut parts = text.trim().split(':');
        let mut fields = [0u32; 3];
        for field in &mut fields {
            let part = parts.next()?;
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            *field = part.parse().ok()?;
        }
        if parts.next().is_some() || fields[1] >= 60 || fields[2] >= 60 {
            return None;
        }
        fields[0]
            .checked_mul(3600)?
            .checked_add(fields[1] * 60 + fields[2])
            .map(Timestamp)
    }
}

/// Non-padded `H:M:S`, the form used in environment observations.
impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, m, s) = self.hms();
        write!(f, "{h}:{m}:{s}")
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 + rhs.0)
    }
}

impl Sub for Timestamp {
    type Output = Duration;
    fn sub(self, rhs: Timestamp) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcurrencyClass {
    /// Runs unattended once started.
    Autonomous,
    /// Occupies the agent for every second it executes.
    Continuous,
}

/// Property name to value, e.g. `temperature -> 425`.
pub type Condition = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRequirement {
    pub kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub required_condition: Condition,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub establishes_condition: Condition,
}

impl ResourceRequirement {
    pub fn new(kind: impl Into<String>) -> Self {
        ResourceRequirement {
            kind: kind.into(),
            required_condition: Condition::new(),
            establishes_condition: Condition::new(),
        }
    }

    /// The condition this holder brings to the resource. Two holders may share
    /// a unit only when their signatures are equal and non-empty.
    pub fn signature(&self) -> Condition {
        let mut sig = self.required_condition.clone();
        sig.extend(
            self.establishes_condition
                .iter()
                .map(|(k, v)| (k.clone(), v.clone())),
        );
        sig
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub index: usize,
    pub description: String,
    pub duration: Duration,
    pub concurrency: ConcurrencyClass,
    pub interruptible: bool,
    #[serde(default)]
    pub resources: Vec<ResourceRequirement>,
}

impl Action {
    pub fn new(index: usize, description: impl Into<String>, duration: Duration) -> Self {
        Action {
            index,
            description: description.into(),
            duration,
            concurrency: ConcurrencyClass::Continuous,
            interruptible: false,
            resources: Vec::new(),
        }
    }

    pub fn is_autonomous(&self) -> bool {
        self.concurrency == ConcurrencyClass::Autonomous
    }
}

/// The successor must start no later than `max_gap` after the predecessor
/// finishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeConstraint {
    pub pred: usize,
    pub succ: usize,
    pub max_gap: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub actions: Vec<Action>,
    pub dependencies: BTreeSet<(usize, usize)>,
    #[serde(default)]
    pub time_constraints: Vec<TimeConstraint>,
}

/// `(total, autonomous)` summed durations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DurationTotals {
    pub total: Duration,
    pub autonomous: Duration,
}

impl Add for DurationTotals {
    type Output = DurationTotals;
    fn add(self, rhs: DurationTotals) -> DurationTotals {
        DurationTotals {
            total: self.total + rhs.total,
            autonomous: self.autonomous + rhs.autonomous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("recipe has no actions")]
    EmptyRecipe,
    #[error("recipe name {0:?} is empty or contains a parenthesis, comma, '|' or newline")]
    BadName(String),
    #[error("action at position {position} carries index {index}")]
    IndexMismatch { position: usize, index: usize },
    #[error("step {0} has zero duration")]
    ZeroDuration(usize),
    #[error("step {0} is interruptible but autonomous")]
    InterruptibleAutonomous(usize),
    #[error("step {0} has a resource requirement with an empty kind")]
    EmptyResourceKind(usize),
    #[error("step {step} lists resource {kind} twice")]
    DuplicateResource { step: usize, kind: String },
    #[error("step {step} both requires and establishes {key} on {kind}")]
    ConditionKeyOverlap {
        step: usize,
        kind: String,
        key: String,
    },
    #[error("dependency {pred}->{succ} references a missing step")]
    DanglingEdge { pred: usize, succ: usize },
    #[error("dependency cycle through steps {0:?}")]
    Cycle(Vec<usize>),
    #[error("time constraint {pred}->{succ} references a missing step")]
    DanglingTimeConstraint { pred: usize, succ: usize },
    #[error("time constraint without dependency: {pred}->{succ}")]
    TimeConstraintWithoutDependency { pred: usize, succ: usize },
    #[error("duplicate time constraint {pred}->{succ}")]
    DuplicateTimeConstraint { pred: usize, succ: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("step {step} does not exist in recipe {recipe}")]
    IndexOutOfRange { recipe: String, step: usize },
    #[error("recipe name {0} is used more than once")]
    NameCollision(String),
    #[error("instance has no recipes")]
    EmptyInstance,
    #[error("recipe {name} is invalid: {report}")]
    InvalidRecipe {
        name: String,
        report: ValidationReport,
    },
    #[error("resource {0} is used but missing from the inventory")]
    MissingInventory(String),
    #[error("resource {0} has zero units")]
    ZeroUnits(String),
}

pub(crate) fn name_is_valid(name: &str) -> bool {
    !name.trim().is_empty()
        && name.trim() == name
        && !name.contains(['(', ')', ',', '|', '\n', '\r'])
}

impl Recipe {
    pub fn new(name: impl Into<String>, actions: Vec<Action>) -> Self {
        Recipe {
            name: name.into(),
            actions,
            dependencies: BTreeSet::new(),
            time_constraints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, step: usize) -> Option<&Action> {
        self.actions.get(step)
    }

    pub fn direct_predecessors(&self, step: usize) -> impl Iterator<Item = usize> + '_ {
        self.dependencies
            .iter()
            .filter(move |&&(_, s)| s == step)
            .map(|&(p, _)| p)
    }

    pub fn direct_successors(&self, step: usize) -> impl Iterator<Item = usize> + '_ {
        self.dependencies
            .range((step, 0)..=(step, usize::MAX))
            .map(|&(_, s)| s)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_recipe(self)
    }

    /// Transitive predecessors of `step`, excluding `step` itself.
    pub fn prerequisites(&self, step: usize) -> Result<BTreeSet<usize>, ModelError> {
        prerequisites(self, step)
    }

    pub fn duration_totals(&self) -> DurationTotals {
        self.actions
            .iter()
            .map(|a| DurationTotals {
                total: a.duration,
                autonomous: if a.is_autonomous() {
                    a.duration
                } else {
                    Duration::ZERO
                },
            })
            .fold(DurationTotals::default(), Add::add)
    }

    /// Kahn's order, smallest ready index first. `None` when the graph has a
    /// cycle or a dangling edge.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.actions.len();
        if self.dependencies.iter().any(|&(p, s)| p >= n || s >= n) {
            return None;
        }
        let (order, _) = kahn(n, &self.dependencies);
        (order.len() == n).then_some(order)
    }

    pub fn without_time_constraints(&self) -> Recipe {
        Recipe {
            time_constraints: Vec::new(),
            ..self.clone()
        }
    }
}

fn kahn(n: usize, edges: &BTreeSet<(usize, usize)>) -> (Vec<usize>, Vec<usize>) {
    let mut indegree = vec![0usize; n];
    for &(_, s) in edges {
        indegree[s] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &(_, s) in edges.range((next, 0)..=(next, usize::MAX)) {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.insert(s);
            }
        }
    }
    let stuck = (0..n).filter(|&i| indegree[i] > 0).collect();
    (order, stuck)
}

pub fn validate_recipe(recipe: &Recipe) -> ValidationReport {
    let mut violations = Vec::new();
    let n = recipe.actions.len();
    if n == 0 {
        violations.push(Violation::EmptyRecipe);
    }
    if !name_is_valid(&recipe.name) {
        violations.push(Violation::BadName(recipe.name.clone()));
    }
    for (position, action) in recipe.actions.iter().enumerate() {
        let step = action.index;
        if step != position {
            violations.push(Violation::IndexMismatch {
                position,
                index: step,
            });
        }
        if action.duration.is_zero() {
            violations.push(Violation::ZeroDuration(step));
        }
        if action.interruptible && action.is_autonomous() {
            violations.push(Violation::InterruptibleAutonomous(step));
        }
        let mut kinds = BTreeSet::new();
        for req in &action.resources {
            if req.kind.trim().is_empty() {
                violations.push(Violation::EmptyResourceKind(step));
            }
            if !kinds.insert(req.kind.as_str()) {
                violations.push(Violation::DuplicateResource {
                    step,
                    kind: req.kind.clone(),
                });
            }
            for key in req.required_condition.keys() {
                if req.establishes_condition.contains_key(key) {
                    violations.push(Violation::ConditionKeyOverlap {
                        step,
                        kind: req.kind.clone(),
                        key: key.clone(),
                    });
                }
            }
        }
    }
    let mut edges_ok = true;
    for &(pred, succ) in &recipe.dependencies {
        if pred >= n || succ >= n {
            violations.push(Violation::DanglingEdge { pred, succ });
            edges_ok = false;
        }
    }
    if edges_ok {
        let (_, stuck) = kahn(n, &recipe.dependencies);
        if !stuck.is_empty() {
            violations.push(Violation::Cycle(stuck));
        }
    }
    let mut seen = BTreeSet::new();
    for tc in &recipe.time_constraints {
        let (pred, succ) = (tc.pred, tc.succ);
        if pred >= n || succ >= n {
            violations.push(Violation::DanglingTimeConstraint { pred, succ });
        } else if !recipe.dependencies.contains(&(pred, succ)) {
            violations.push(Violation::TimeConstraintWithoutDependency { pred, succ });
        }
        if !seen.insert((pred, succ)) {
            violations.push(Violation::DuplicateTimeConstraint { pred, succ });
        }
    }
    ValidationReport { violations }
}

pub fn prerequisites(recipe: &Recipe, step: usize) -> Result<BTreeSet<usize>, ModelError> {
    if step >= recipe.actions.len() {
        return Err(ModelError::IndexOutOfRange {
            recipe: recipe.name.clone(),
            step,
        });
    }
    let mut found = BTreeSet::new();
    let mut queue = VecDeque::from([step]);
    while let Some(current) = queue.pop_front() {
        for pred in recipe.direct_predecessors(current) {
            if pred != step && found.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUnits {
    pub kind: String,
    pub units: u32,
}

/// Recipes sharing one agent and one resource inventory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub recipes: Vec<Recipe>,
    /// Ordered by first use across the recipes.
    pub resource_inventory: Vec<ResourceUnits>,
}

/// `(recipe position, step)` address of an action inside an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionRef {
    pub recipe: usize,
    pub step: usize,
}

impl Instance {
    /// Combines recipes with one unit of every resource kind they use.
    pub fn new(recipes: Vec<Recipe>) -> Result<Instance, ModelError> {
        let resource_inventory = resource_kinds(&recipes)
            .into_iter()
            .map(|kind| ResourceUnits { kind, units: 1 })
            .collect();
        let instance = Instance {
            recipes,
            resource_inventory,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Overrides the unit count for `kind`, adding it when absent.
    pub fn with_units(mut self, kind: &str, units: u32) -> Instance {
        match self.resource_inventory.iter_mut().find(|r| r.kind == kind) {
            Some(entry) => entry.units = units,
            None => self.resource_inventory.push(ResourceUnits {
                kind: kind.to_string(),
                units,
            }),
        }
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.recipes.is_empty() {
            return Err(ModelError::EmptyInstance);
        }
        let mut names = BTreeSet::new();
        for recipe in &self.recipes {
            if !names.insert(recipe.name.as_str()) {
                return Err(ModelError::NameCollision(recipe.name.clone()));
            }
            let report = recipe.validate();
            if !report.is_valid() {
                return Err(ModelError::InvalidRecipe {
                    name: recipe.name.clone(),
                    report,
                });
            }
        }
        for kind in resource_kinds(&self.recipes) {
            match self.resource_inventory.iter().find(|r| r.kind == kind) {
                None => return Err(ModelError::MissingInventory(kind)),
                Some(r) if r.units == 0 => return Err(ModelError::ZeroUnits(kind)),
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn recipe_index(&self, name: &str) -> Option<usize> {
        self.recipes.iter().position(|r| r.name == name)
    }

    pub fn recipe(&self, name: &str) -> Option<&Recipe> {
        self.recipes.iter().find(|r| r.name == name)
    }

    pub fn action(&self, at: ActionRef) -> Option<&Action> {
        self.recipes.get(at.recipe)?.actions.get(at.step)
    }

    pub fn action_count(&self) -> usize {
        self.recipes.iter().map(Recipe::len).sum()
    }

    pub fn duration_totals(&self) -> DurationTotals {
        self.recipes
            .iter()
            .map(Recipe::duration_totals)
            .fold(DurationTotals::default(), Add::add)
    }

    pub fn has_time_constraints(&self) -> bool {
        self.recipes.iter().any(|r| !r.time_constraints.is_empty())
    }

    pub fn without_time_constraints(&self) -> Instance {
        Instance {
            recipes: self
                .recipes
                .iter()
                .map(Recipe::without_time_constraints)
                .collect(),
            resource_inventory: self.resource_inventory.clone(),
        }
    }

    /// `Baked-Potato+Cheese-Sandwich`
    pub fn label(&self) -> String {
        self.recipes
            .iter()
            .map(|r| r.name.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Combines recipes into one instance; names must be unique.
pub fn combine(recipes: Vec<Recipe>) -> Result<Instance, ModelError> {
    Instance::new(recipes)
}

fn resource_kinds(recipes: &[Recipe]) -> Vec<String> {
    let mut kinds: Vec<String> = Vec::new();
    for req in recipes
        .iter()
        .flat_map(|r| &r.actions)
        .flat_map(|a| &a.resources)
    {
        if !kinds.contains(&req.kind) {
            kinds.push(req.kind.clone());
        }
    }
    kinds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn chain(name: &str, minutes: &[u32]) -> Recipe {
        let actions = minutes
            .iter()
            .enumerate()
            .map(|(i, &m)| Action::new(i, format!("step {i}"), Duration::from_minutes(m)))
            .collect();
        let mut recipe = Recipe::new(name, actions);
        for i in 1..minutes.len() {
            recipe.dependencies.insert((i - 1, i));
        }
        recipe
    }

    #[test]
    fn timestamp_forms() {
        let t = Timestamp::from_secs(15 * 60);
        assert_eq!(t.to_string(), "0:15:0");
        assert_eq!(t.padded(), "00:15:00");
        assert_eq!(Timestamp::parse("00:15:0"), Some(t));
        assert_eq!(Timestamp::parse("0:15:00"), Some(t));
        assert_eq!(
            Timestamp::parse("25:00:00"),
            Some(Timestamp::from_secs(25 * 3600))
        );
        assert_eq!(Timestamp::parse("0:60:0"), None);
        assert_eq!(Timestamp::parse("1:2"), None);
        assert_eq!(Timestamp::parse("a:0:0"), None);
    }

    #[test]
    fn duration_text() {
        assert_eq!(Duration::from_minutes(2).to_string(), "2 min");
        assert_eq!(Duration::from_secs(90).minutes_text(), "1.5");
    }

    #[test]
    fn baked_potato_is_valid() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        assert!(bp.validate().is_valid(), "{}", bp.validate());
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut r = chain("R", &[1, 1, 1]);
        r.dependencies.insert((2, 2));
        let report = r.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle(steps) if steps.contains(&2))));
    }

    #[test]
    fn time_constraint_needs_dependency() {
        let mut r = chain("R", &[1, 1, 1, 1, 1]);
        r.time_constraints.push(TimeConstraint {
            pred: 1,
            succ: 4,
            max_gap: Duration::from_minutes(1),
        });
        let report = r.validate();
        assert_eq!(
            report.violations,
            vec![Violation::TimeConstraintWithoutDependency { pred: 1, succ: 4 }]
        );
        assert!(report.to_string().contains("time constraint without dependency"));
    }

    #[test]
    fn structural_violations() {
        let mut r = chain("Bad,Name", &[1, 0]);
        r.actions[0].interruptible = true;
        r.actions[0].concurrency = ConcurrencyClass::Autonomous;
        r.dependencies.insert((0, 7));
        let mut req = ResourceRequirement::new("oven");
        req.required_condition
            .insert("temperature".into(), "1".into());
        req.establishes_condition
            .insert("temperature".into(), "2".into());
        r.actions[1].resources.push(req);
        let v = r.validate().violations;
        assert!(v.contains(&Violation::BadName("Bad,Name".into())));
        assert!(v.contains(&Violation::ZeroDuration(1)));
        assert!(v.contains(&Violation::InterruptibleAutonomous(0)));
        assert!(v.contains(&Violation::DanglingEdge { pred: 0, succ: 7 }));
        assert!(v.iter().any(|x| matches!(x, Violation::ConditionKeyOverlap { .. })));
    }

    #[test]
    fn prerequisites_of_baked_potato() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        assert_eq!(bp.prerequisites(5).unwrap(), BTreeSet::from([0, 1, 2, 3, 4]));
        assert!(bp.prerequisites(0).unwrap().is_empty());
        assert_eq!(bp.prerequisites(2).unwrap(), BTreeSet::from([0, 1]));
        assert!(matches!(
            bp.prerequisites(6),
            Err(ModelError::IndexOutOfRange { step: 6, .. })
        ));
    }

    #[test]
    fn totals() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        let t = bp.duration_totals();
        assert_eq!(t.total, Duration::from_minutes(29));
        assert_eq!(t.autonomous, Duration::from_minutes(16));
        let vada = fixtures::recipe("Vada").unwrap();
        assert_eq!(vada.duration_totals().autonomous, Duration::from_minutes(20));
        let both = combine(vec![bp.clone(), vada.clone()]).unwrap();
        assert_eq!(
            both.duration_totals(),
            bp.duration_totals() + vada.duration_totals()
        );
    }

    #[test]
    fn combine_shares_inventory() {
        let inst = combine(vec![
            fixtures::recipe("Baked-Potato").unwrap(),
            fixtures::recipe("Cheese-Sandwich").unwrap(),
        ])
        .unwrap();
        let kinds: Vec<_> = inst
            .resource_inventory
            .iter()
            .map(|r| (r.kind.as_str(), r.units))
            .collect();
        assert_eq!(kinds, vec![("oven", 1), ("microwave", 1)]);

        let inst = combine(vec![
            fixtures::recipe("Tacos").unwrap(),
            fixtures::recipe("Smore-Bars").unwrap(),
        ])
        .unwrap();
        let kinds: Vec<_> = inst
            .resource_inventory
            .iter()
            .map(|r| r.kind.as_str())
            .collect();
        assert_eq!(kinds, vec!["stove", "microwave", "oven"]);

        let r = chain("R", &[1]);
        assert_eq!(
            combine(vec![r.clone(), r]),
            Err(ModelError::NameCollision("R".into()))
        );
        assert_eq!(combine(vec![]), Err(ModelError::EmptyInstance));
    }

    #[test]
    fn inventory_override() {
        let inst = combine(vec![fixtures::recipe("Tacos").unwrap()])
            .unwrap()
            .with_units("stove", 2);
        assert_eq!(inst.resource_inventory[0].units, 2);
        assert!(inst.clone().with_units("stove", 0).validate().is_err());
    }

    #[test]
    fn topological_order_is_lexicographic() {
        let bp = fixtures::recipe("Baked-Potato").unwrap();
        assert_eq!(bp.topological_order(), Some(vec![0, 1, 2, 3, 4, 5]));
    }
}
