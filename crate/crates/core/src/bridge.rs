//! Line protocol between a session and an external agent.
//!
//! Every message to the agent is one line with a tag: `TASK|`, `OBS|`,
//! `ERR|`, `HINT|` or `END|`. Newlines inside payloads are escaped as `\n`
//! and backslashes as `\\`. The agent answers each prompt with one raw command
//! line. The first `TASK|` line echoes the session configuration.

use std::collections::VecDeque;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dsl::{render_recipe_numbered, RenderMode};
use crate::metrics::{evaluate, MetricsReport, PrefixOrder};
use crate::model::Instance;
use crate::sched::{heuristic_schedule, Plan};
use crate::sim::{Recorder, SessionConfig, SimState, Status, Transcript};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub mode: RenderMode,
    pub session: SessionConfig,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            mode: RenderMode::Masked,
            session: SessionConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Task,
    Obs,
    Err,
    Hint,
    End,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Task => "TASK",
            Tag::Obs => "OBS",
            Tag::Err => "ERR",
            Tag::Hint => "HINT",
            Tag::End => "END",
        }
    }

    fn parse(text: &str) -> Option<Tag> {
        Some(match text {
            "TASK" => Tag::Task,
            "OBS" => Tag::Obs,
            "ERR" => Tag::Err,
            "HINT" => Tag::Hint,
            "END" => Tag::End,
            _ => return None,
        })
    }
}

pub fn escape(payload: &str) -> String {
    let mut out = String::with_capacity(payload.len());
    for ch in payload.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

pub fn unescape(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

pub fn encode(tag: Tag, payload: &str) -> String {
    format!("{}|{}", tag.as_str(), escape(payload))
}

/// Splits a tagged line into its tag and unescaped payload.
pub fn decode(line: &str) -> Option<(Tag, String)> {
    let (tag, payload) = line.split_once('|')?;
    Some((Tag::parse(tag)?, unescape(payload)))
}

/// A bidirectional line channel to one agent.
pub trait Transport {
    fn send(&mut self, line: &str) -> io::Result<()>;
    /// Next line from the agent; `None` at end of stream.
    fn recv(&mut self) -> io::Result<Option<String>>;
}

/// Transport over any buffered reader and writer: standard streams or a
/// socket.
pub struct StreamTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamTransport { reader, writer }
    }
}

impl<R: BufRead, W: Write> Transport for StreamTransport<R, W> {
    fn send(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    fn recv(&mut self) -> io::Result<Option<String>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
    }
}

/// An in-process agent.
pub trait Agent {
    /// Receives one decoded message.
    fn observe(&mut self, tag: Tag, payload: &str);
    /// The next command line, or `None` to walk away.
    fn act(&mut self) -> Option<String>;
}

/// Adapts an [`Agent`] to a [`Transport`], keeping every line sent to it.
pub struct AgentTransport<A> {
    pub agent: A,
    pub received: Vec<String>,
}

impl<A: Agent> AgentTransport<A> {
    pub fn new(agent: A) -> Self {
        AgentTransport {
            agent,
            received: Vec::new(),
        }
    }
}

impl<A: Agent> Transport for AgentTransport<A> {
    fn send(&mut self, line: &str) -> io::Result<()> {
        if let Some((tag, payload)) = decode(line) {
            self.agent.observe(tag, &payload);
        }
        self.received.push(line.to_string());
        Ok(())
    }

    fn recv(&mut self) -> io::Result<Option<String>> {
        Ok(self.agent.act())
    }
}

/// Replays fixed command lines and then stops.
#[derive(Clone, Debug, Default)]
pub struct ScriptedAgent {
    lines: VecDeque<String>,
}

impl ScriptedAgent {
    pub fn new(lines: impl IntoIterator<Item = String>) -> Self {
        ScriptedAgent {
            lines: lines.into_iter().collect(),
        }
    }

    /// Every plan entry in order, then `Finish`.
    pub fn from_plan(plan: &Plan) -> Self {
        ScriptedAgent::new(plan.commands().iter().map(ToString::to_string))
    }

    /// Parses a plan file before the session starts.
    pub fn from_plan_file(text: &str) -> Result<Self, Error> {
        Ok(ScriptedAgent::from_plan(&Plan::parse(text)?))
    }
}

impl Agent for ScriptedAgent {
    fn observe(&mut self, _tag: Tag, _payload: &str) {}

    fn act(&mut self) -> Option<String> {
        self.lines.pop_front()
    }
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub transcript: Transcript,
    pub report: Option<MetricsReport>,
}

fn config_echo(instance: &Instance, config: &BridgeConfig) -> String {
    format!(
        "instance={} mode={} hints={} max_revisions={} repeat_limit={}",
        instance.label(),
        match config.mode {
            RenderMode::Full => "full",
            RenderMode::Masked => "masked",
        },
        config.session.hints,
        config.session.max_revisions,
        config.session.repeat_limit
    )
}

/// Runs one session over `transport`. Metrics are computed against
/// `reference`, or the heuristic plan when none is given; they are omitted
/// when no reference plan exists.
pub fn serve_session(
    instance: &Instance,
    config: &BridgeConfig,
    transport: &mut dyn Transport,
    reference: Option<&Plan>,
) -> Result<SessionResult, Error> {
    let state = SimState::new(instance.clone(), config.session)?;
    let mut recorder = Recorder::new(state);
    let mut lines = vec![encode(Tag::Task, &config_echo(instance, config))];
    for (i, recipe) in instance.recipes.iter().enumerate() {
        lines.push(encode(
            Tag::Task,
            &render_recipe_numbered(recipe, config.mode, i + 1),
        ));
    }
    lines.push(encode(Tag::Obs, &recorder.state.observation()));
    let mut alive = lines.iter().all(|l| transport.send(l).is_ok());

    while alive && recorder.state.outcome() == crate::sim::Outcome::Pending {
        let line = match transport.recv() {
            Ok(Some(line)) => line,
            Ok(None) | Err(_) => break,
        };
        let Some(feedback) = recorder.apply_line(&line) else {
            break;
        };
        let tag = match feedback.status {
            Status::Ok => Tag::Obs,
            Status::Error(_) => Tag::Err,
        };
        let mut out = vec![encode(tag, &feedback.text())];
        if let Some(hint) = &feedback.hint {
            out.push(encode(Tag::Hint, hint));
        }
        alive = out.iter().all(|l| transport.send(l).is_ok());
    }
    recorder.state.abort();
    let transcript = recorder.finish();

    let owned;
    let reference = match reference {
        Some(plan) => Some(plan),
        None => {
            owned = heuristic_schedule(instance, true).ok();
            owned.as_ref()
        }
    };
    let report = match reference {
        Some(plan) => Some(evaluate(
            instance,
            &transcript,
            plan,
            PrefixOrder::Completion,
        )?),
        None => None,
    };
    let mut end = format!(
        "outcome={} clock={}",
        transcript.outcome,
        transcript.final_clock().padded()
    );
    if let Some(r) = &report {
        end.push_str(&format!(
            " success={} progress={:.4} efficiency={:.4} relative_efficiency={:.4} multitask_score={:.4}",
            u8::from(r.success),
            r.progress_rate,
            r.efficiency,
            r.relative_efficiency,
            r.multitask_score
        ));
    }
    let _ = transport.send(&encode(Tag::End, &end));
    Ok(SessionResult { transcript, report })
}
