//! Gantt charts of a timeline, as fixed-width text or SVG.
//!
//! Text charts use one column per quantum and sample each column at its
//! midpoint: `#` continuous, `=` autonomous, `.` idle. Time-constraint rows
//! mark the allowed window after the predecessor with `-` and the
//! successor's start with `^`.

use std::fmt::Write as _;

use crate::model::{Duration, Instance};
use crate::sched::{check_plan, Plan};
use crate::sim::{ActionRecord, Timeline, TimelineConstraint};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanttFormat {
    Text,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GanttOptions {
    pub quantum: Duration,
    pub pixels_per_quantum: u32,
}

impl Default for GanttOptions {
    fn default() -> Self {
        GanttOptions {
            quantum: Duration::from_minutes(1),
            pixels_per_quantum: 12,
        }
    }
}

const ROW_HEIGHT: u32 = 18;

/// Timeline of `plan` replayed against `instance`, failing plans included.
pub fn plan_timeline(instance: &Instance, plan: &Plan) -> Result<Timeline, Error> {
    Ok(check_plan(instance, plan)?.1.timeline)
}

fn horizon(timeline: &Timeline) -> Result<u32, Error> {
    let end = timeline
        .actions
        .iter()
        .flat_map(|a| &a.segments)
        .filter(|s| s.end > s.start)
        .map(|s| s.end.secs())
        .max()
        .ok_or_else(|| Error::Argument("timeline has no executed segments".into()))?;
    Ok(end)
}

fn check_options(options: &GanttOptions) -> Result<u32, Error> {
    if options.quantum.is_zero() {
        return Err(Error::Argument("quantum must be positive".into()));
    }
    Ok(options.quantum.secs())
}

/// Recipes in order of first appearance, each with its actions.
fn grouped(timeline: &Timeline) -> Vec<(&str, Vec<&ActionRecord>)> {
    let mut groups: Vec<(&str, Vec<&ActionRecord>)> = Vec::new();
    for a in &timeline.actions {
        match groups.iter_mut().find(|(r, _)| *r == a.recipe) {
            Some((_, rows)) => rows.push(a),
            None => groups.push((&a.recipe, vec![a])),
        }
    }
    groups
}

fn constraints<'a>(timeline: &'a Timeline, recipe: &str) -> Vec<&'a TimelineConstraint> {
    timeline
        .time_constraints
        .iter()
        .filter(|c| c.recipe == recipe)
        .collect()
}

fn record<'a>(timeline: &'a Timeline, recipe: &str, step: usize) -> Option<&'a ActionRecord> {
    timeline
        .actions
        .iter()
        .find(|a| a.recipe == recipe && a.step == step)
}

/// `(window start, window end, successor start)` in seconds.
fn window(timeline: &Timeline, c: &TimelineConstraint) -> Option<(u32, u32, Option<u32>)> {
    let done = record(timeline, &c.recipe, c.pred)?.completed_at?.secs();
    let start = record(timeline, &c.recipe, c.succ)
        .and_then(|a| a.segments.first())
        .map(|s| s.start.secs());
    Some((done, done + c.max_gap.secs(), start))
}

pub fn render_text(timeline: &Timeline, options: &GanttOptions) -> Result<String, Error> {
    let q = check_options(options)?;
    let cols = horizon(timeline)?.div_ceil(q);
    let groups = grouped(timeline);
    let label_width = groups
        .iter()
        .flat_map(|(r, _)| constraints(timeline, r))
        .map(|c| format!("  {}->{} <={}m", c.pred, c.succ, c.max_gap.minutes_text()).len())
        .chain([10])
        .max()
        .unwrap_or(10);
    let mid = |col: u32| col * q + q / 2;

    let mut out = String::new();
    let mut ruler = String::new();
    for col in 0..cols {
        let minute = col * q / 60;
        ruler.push(if col % 10 == 0 {
            char::from_digit(minute / 10 % 10, 10).unwrap_or('0')
        } else if col % 5 == 0 {
            '+'
        } else {
            ' '
        });
    }
    let _ = writeln!(out, "{:<label_width$} {}", "", ruler.trim_end());
    for (recipe, rows) in &groups {
        let _ = writeln!(out, "{recipe}");
        for a in rows {
            let cells: String = (0..cols)
                .map(|col| {
                    let t = mid(col);
                    let busy = a.segments.iter().any(|s| s.start.secs() <= t && t < s.end.secs());
                    match (busy, a.autonomous) {
                        (false, _) => '.',
                        (true, true) => '=',
                        (true, false) => '#',
                    }
                })
                .collect();
            let _ = writeln!(out, "{:<label_width$} {cells}", format!("  step {}", a.step));
        }
        for c in constraints(timeline, recipe) {
            let w = window(timeline, c);
            let cells: String = (0..cols)
                .map(|col| match w {
                    Some((_, _, Some(s))) if col == s / q => '^',
                    Some((from, to, _)) if from <= mid(col) && mid(col) < to => '-',
                    _ => '.',
                })
                .collect();
            let label = format!("  {}->{} <={}m", c.pred, c.succ, c.max_gap.minutes_text());
            let _ = writeln!(out, "{label:<label_width$} {cells}");
        }
    }
    Ok(out)
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG chart. The document is exactly `makespan / quantum ×
/// pixels_per_quantum` wide; segment edges are placed to the second.
pub fn render_svg(timeline: &Timeline, options: &GanttOptions) -> Result<String, Error> {
    let q = check_options(options)?;
    let end = horizon(timeline)?;
    let scale = f64::from(options.pixels_per_quantum) / f64::from(q);
    let x = |secs: u32| f64::from(secs) * scale;
    let width = x(end);
    let groups = grouped(timeline);
    let rows: usize = groups.iter().map(|(_, r)| r.len() + 1).sum();
    let height = rows as u32 * ROW_HEIGHT;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">"#
    );
    let mut y = 0u32;
    for (recipe, actions) in &groups {
        let _ = writeln!(
            out,
            r#"  <text x="2" y="{}" font-weight="bold">{}</text>"#,
            y + ROW_HEIGHT - 5,
            escape_xml(recipe)
        );
        y += ROW_HEIGHT;
        for a in actions {
            let row_y = y;
            for s in &a.segments {
                if s.end <= s.start {
                    continue;
                }
                let (fill, class) = if a.autonomous {
                    ("#e8a33d", "autonomous")
                } else {
                    ("#3d6fb6", "continuous")
                };
                let _ = writeln!(
                    out,
                    r#"  <rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"{}/>"#,
                    x(s.start.secs()),
                    row_y + 2,
                    x(s.end.secs()) - x(s.start.secs()),
                    ROW_HEIGHT - 4,
                    if a.autonomous { r#" fill-opacity="0.6""# } else { "" }
                );
            }
            let _ = writeln!(
                out,
                r#"  <text x="2" y="{}">step {}</text>"#,
                row_y + ROW_HEIGHT - 5,
                a.step
            );
            y += ROW_HEIGHT;
        }
        for c in constraints(timeline, recipe) {
            let Some((from, to, _)) = window(timeline, c) else {
                continue;
            };
            let Some(idx) = actions.iter().position(|a| a.step == c.succ) else {
                continue;
            };
            let base = y - (actions.len() - idx) as u32 * ROW_HEIGHT + 2;
            let (x1, x2) = (x(from), x(to));
            let _ = writeln!(
                out,
                r##"  <path class="deadline" d="M {x1} {base} Q {} {} {x2} {base}" fill="none" stroke="#c0392b"/>"##,
                (x1 + x2) / 2.0,
                f64::from(base) - f64::from(ROW_HEIGHT) * 0.8
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_gantt(
    timeline: &Timeline,
    format: GanttFormat,
    options: &GanttOptions,
) -> Result<String, Error> {
    match format {
        GanttFormat::Text => render_text(timeline, options),
        GanttFormat::Svg => render_svg(timeline, options),
    }
}
