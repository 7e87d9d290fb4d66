//! Shared helpers for the integration tests.
#![allow(dead_code)]

use mtplan::dsl::{parse_command, Command};
use mtplan::model::TimeConstraint;
use mtplan::sched::Plan;
use mtplan::sim::{Outcome, Recorder, SessionConfig, SimState, Transcript};
use mtplan::{Action, ConcurrencyClass, Duration, Instance, Recipe, ResourceRequirement, Timestamp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn cmd(text: &str) -> Command {
    parse_command(text).unwrap()
}

pub fn cmds(lines: &[&str]) -> Vec<Command> {
    lines.iter().map(|l| cmd(l)).collect()
}

/// Random recipe with `n` actions: forward-only dependencies, optional
/// time constraints on some edges, and exclusive or condition-shared
/// resources on autonomous actions.
pub fn random_recipe(rng: &mut StdRng, name: &str, n: usize) -> Recipe {
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = Action::new(
            i,
            format!("Do thing {i}."),
            Duration::from_minutes(rng.random_range(1..=6)),
        );
        if rng.random_bool(0.35) {
            a.concurrency = ConcurrencyClass::Autonomous;
            match rng.random_range(0..4) {
                0 => a.resources.push(ResourceRequirement::new("pot")),
                1 => {
                    let mut r = ResourceRequirement::new("oven");
                    r.establishes_condition
                        .insert("temperature".into(), "400".into());
                    a.resources.push(r);
                }
                _ => {}
            }
        } else {
            a.interruptible = rng.random_bool(0.3);
        }
        actions.push(a);
    }
    let mut recipe = Recipe::new(name, actions);
    for j in 1..n {
        for i in 0..j {
            if rng.random_bool(0.35) {
                recipe.dependencies.insert((i, j));
                if rng.random_bool(0.3) {
                    recipe.time_constraints.push(TimeConstraint {
                        pred: i,
                        succ: j,
                        max_gap: Duration::from_minutes(rng.random_range(0..=4)),
                    });
                }
            }
        }
    }
    recipe
}

/// One or two random recipes with at most `max_actions` actions in total.
pub fn random_instance(seed: u64, max_actions: usize) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let first = rng.random_range(2..=max_actions.min(7));
    let mut recipes = vec![random_recipe(&mut rng, "Synth-A", first)];
    if max_actions - first >= 2 && rng.random_bool(0.5) {
        let second = rng.random_range(2..=(max_actions - first).min(6));
        recipes.push(random_recipe(&mut rng, "Synth-B", second));
    }
    Instance::new(recipes).expect("generated instance is valid")
}

/// Efficiency computed straight from plan entries: every entry runs for its
/// exec time from its start, nothing is clipped.
pub fn plan_efficiency(instance: &Instance, plan: &Plan) -> f64 {
    let mut executed = 0u32;
    let mut auto = 0u32;
    let mut first = u32::MAX;
    let mut last = 0u32;
    for e in &plan.entries {
        let recipe = instance.recipes.iter().find(|r| r.name == e.recipe).unwrap();
        let len = e.exec_time.secs();
        executed += len;
        if recipe.actions[e.step].concurrency == ConcurrencyClass::Autonomous {
            auto += len;
        }
        first = first.min(e.start.secs());
        last = last.max(e.start.secs() + len);
    }
    if auto == 0 {
        return 0.0;
    }
    f64::from(executed.saturating_sub(last - first)) / f64::from(auto)
}

/// Longest duration-weighted path through a recipe's dependency graph,
/// relaxed until stable.
pub fn critical_path(recipe: &Recipe) -> Duration {
    let n = recipe.actions.len();
    let dur: Vec<u32> = recipe.actions.iter().map(|a| a.duration.secs()).collect();
    let mut finish = dur.clone();
    for _ in 0..n {
        for &(p, s) in &recipe.dependencies {
            finish[s] = finish[s].max(finish[p] + dur[s]);
        }
    }
    Duration::from_secs(finish.into_iter().max().unwrap_or(0))
}

/// A session driven by a noisy agent: mostly ready actions at or after their
/// earliest start, sometimes arbitrary steps, partial executions and early
/// or missing `Finish`.
pub fn random_transcript(instance: &Instance, seed: u64) -> Transcript {
    let mut rng = StdRng::seed_from_u64(seed);
    let state = SimState::new(instance.clone(), SessionConfig::default()).unwrap();
    let mut rec = Recorder::new(state);
    let steps = rng.random_range(0..50);
    for _ in 0..steps {
        if rec.state.outcome() != Outcome::Pending {
            break;
        }
        let clock = rec.state.clock();
        let ready = rec.state.executable_actions(clock);
        let line = if !ready.is_empty() && rng.random_bool(0.8) {
            let (at, earliest) = ready[rng.random_range(0..ready.len())];
            let action = instance.action(at).unwrap();
            let left = action.duration.secs() - rec.state.progress(at).executed.secs();
            let exec = if action.interruptible && left > 60 && rng.random_bool(0.4) {
                60 * rng.random_range(1..=left / 60)
            } else {
                left
            };
            let start = earliest.secs().max(clock.secs()) + 60 * rng.random_range(0..3);
            format!(
                "Step({}, {}, {}, {})",
                at.step,
                instance.recipes[at.recipe].name,
                Duration::from_secs(exec).minutes_text() + " min",
                Timestamp::from_secs(start).padded()
            )
        } else {
            let r = &instance.recipes[rng.random_range(0..instance.recipes.len())];
            format!(
                "Step({}, {}, {} min, {})",
                rng.random_range(0..r.actions.len() + 1),
                r.name,
                rng.random_range(0..8),
                Timestamp::from_minutes(rng.random_range(0..40)).padded()
            )
        };
        rec.apply_line(&line);
    }
    if rng.random_bool(0.7) {
        rec.apply_line("Finish");
    }
    rec.state.abort();
    rec.finish()
}

/// Replays raw agent lines, garbage included, until the session is decided.
pub fn replay_lines(instance: &Instance, lines: &[&str]) -> Transcript {
    let mut rec = Recorder::new(SimState::new(instance.clone(), SessionConfig::default()).unwrap());
    for line in lines {
        if rec.apply_line(line).is_none() {
            break;
        }
    }
    rec.finish()
}
