//! Natural-language task commands.
//!
//! The built-in grammar accepts one command shape:
//!
//! ```text
//! [fillers] <verb> [me|us] <item> from <zone> [over|all the way] (to|into) <zone> [please|now|thanks]
//! ```
//!
//! with verbs `bring`, `take`, `deliver`, `carry` and `move`. Leading articles
//! (`the`, `a`, `an`, `some`, `this`, `that`, `my`) are dropped from the item
//! and from both zone names, and punctuation is ignored. Anything else is
//! rejected with [`NluError::Unparsable`].
//!
//! An external interpreter (for example a hosted language model) can stand in
//! for the grammar. It receives `{"command": ..., "zones": [...]}` over HTTP
//! POST and must answer `{"pickup": ..., "drop": ..., "item": ...}`.

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Workspace};
use crate::world::{resolve_zone, SemanticMap, WorldError};

pub const VERBS: [&str; 5] = ["bring", "take", "deliver", "carry", "move"];

const ARTICLES: [&str; 7] = ["the", "a", "an", "some", "this", "that", "my"];
const LEADING_FILLERS: [&str; 17] = [
    "please", "kindly", "can", "could", "would", "will", "you", "hey", "robot", "robots", "team",
    "i", "want", "need", "to", "ok", "okay",
];
const TRAILING_FILLERS: [&str; 5] = ["please", "now", "thanks", "thank", "you"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NluError {
    #[error("empty command")]
    EmptyCommand,
    #[error("cannot parse command: {0}")]
    Unparsable(String),
    #[error("unknown zone {0:?}")]
    UnknownZone(String),
    #[error("pickup and drop are the same place")]
    SameZone,
    #[error("task endpoint {0} lies outside the workspace")]
    PointOutsideWorkspace(Point),
    #[error("interpreter endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("interpreter endpoint timed out")]
    EndpointTimeout,
    #[error("malformed interpreter response: {0}")]
    MalformedResponse(String),
    #[error("invalid interpreter configuration: {0}")]
    InvalidConfig(&'static str),
}

impl NluError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            NluError::EmptyCommand => "empty_command",
            NluError::Unparsable(_) => "unparsable_command",
            NluError::UnknownZone(_) => "unknown_zone",
            NluError::SameZone => "same_zone",
            NluError::PointOutsideWorkspace(_) => "point_outside_workspace",
            NluError::EndpointUnreachable(_) => "endpoint_unreachable",
            NluError::EndpointTimeout => "endpoint_timeout",
            NluError::MalformedResponse(_) => "malformed_response",
            NluError::InvalidConfig(_) => "invalid_config",
        }
    }

    fn allows_fallback(&self) -> bool {
        matches!(
            self,
            NluError::EndpointUnreachable(_)
                | NluError::EndpointTimeout
                | NluError::MalformedResponse(_)
        )
    }
}

impl From<WorldError> for NluError {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::UnknownZone(name) => NluError::UnknownZone(name),
            WorldError::PointOutsideWorkspace(p) => NluError::PointOutsideWorkspace(p),
            other => NluError::Unparsable(other.to_string()),
        }
    }
}

/// Structured pickup-and-delivery task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub pickup: Point,
    pub drop: Point,
    pub item: String,
    pub source_text: String,
}

impl TaskSpec {
    /// Equality of the task itself, ignoring the original wording.
    pub fn same_task(&self, other: &TaskSpec) -> bool {
        self.pickup == other.pickup && self.drop == other.drop && self.item == other.item
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpreterMode {
    Grammar,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpreterConfig {
    pub mode: InterpreterMode,
    pub endpoint: Option<String>,
    pub timeout: Duration,
    /// Use the grammar when the external interpreter fails or answers garbage.
    pub fallback: bool,
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        InterpreterConfig {
            mode: InterpreterMode::Grammar,
            endpoint: None,
            timeout: Duration::from_secs(5),
            fallback: true,
        }
    }
}

impl InterpreterConfig {
    pub fn external(endpoint: impl Into<String>) -> Self {
        InterpreterConfig {
            mode: InterpreterMode::External,
            endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), NluError> {
        match (self.mode, &self.endpoint) {
            (InterpreterMode::External, None) => Err(NluError::InvalidConfig(
                "external mode requires an endpoint",
            )),
            (InterpreterMode::Grammar, Some(_)) => Err(NluError::InvalidConfig(
                "an endpoint is only valid in external mode",
            )),
            _ => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '\'' {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn strip_articles(mut words: &[String]) -> &[String] {
    while let Some((first, rest)) = words.split_first() {
        if ARTICLES.contains(&first.as_str()) {
            words = rest;
        } else {
            break;
        }
    }
    words
}

fn normalize_item(item: &str) -> String {
    strip_articles(&tokenize(item)).join(" ")
}

/// The `(item, pickup zone, drop zone)` phrases of a command, before grounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandParts {
    pub item: String,
    pub pickup_zone: String,
    pub drop_zone: String,
}

/// Splits a command into its item and zone phrases.
pub fn split_command(text: &str) -> Result<CommandParts, NluError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(NluError::EmptyCommand);
    }
    let unparsable = |why: &str| NluError::Unparsable(format!("{why}: {:?}", text.trim()));

    let verb_at = tokens
        .iter()
        .position(|t| VERBS.contains(&t.as_str()))
        .ok_or_else(|| unparsable("no delivery verb"))?;
    if !tokens[..verb_at]
        .iter()
        .all(|t| LEADING_FILLERS.contains(&t.as_str()))
    {
        return Err(unparsable("unexpected words before the verb"));
    }
    let mut rest = &tokens[verb_at + 1..];
    if let Some((first, tail)) = rest.split_first() {
        if first == "me" || first == "us" {
            rest = tail;
        }
    }

    let from_at = rest
        .iter()
        .position(|t| t == "from")
        .ok_or_else(|| unparsable("missing 'from'"))?;
    let item = strip_articles(&rest[..from_at]);
    let after_from = &rest[from_at + 1..];
    let to_at = after_from
        .iter()
        .position(|t| t == "to" || t == "into")
        .ok_or_else(|| unparsable("missing 'to'"))?;

    let mut pickup = strip_articles(&after_from[..to_at]);
    if pickup.ends_with(&["all".into(), "the".into(), "way".into()]) {
        pickup = &pickup[..pickup.len() - 3];
    } else if pickup.last().is_some_and(|t| t == "over") {
        pickup = &pickup[..pickup.len() - 1];
    }
    let mut drop = strip_articles(&after_from[to_at + 1..]);
    while drop
        .last()
        .is_some_and(|t| TRAILING_FILLERS.contains(&t.as_str()))
    {
        drop = &drop[..drop.len() - 1];
    }

    if item.is_empty() {
        return Err(unparsable("missing item"));
    }
    if pickup.is_empty() || drop.is_empty() {
        return Err(unparsable("missing zone"));
    }
    Ok(CommandParts {
        item: item.join(" "),
        pickup_zone: pickup.join(" "),
        drop_zone: drop.join(" "),
    })
}

/// Parses `text` with the built-in grammar and grounds its zones in `map`.
pub fn parse_command(text: &str, map: &SemanticMap) -> Result<TaskSpec, NluError> {
    let parts = split_command(text)?;
    ground(text, &parts.pickup_zone, &parts.drop_zone, &parts.item, map)
}

fn ground(
    text: &str,
    pickup_zone: &str,
    drop_zone: &str,
    item: &str,
    map: &SemanticMap,
) -> Result<TaskSpec, NluError> {
    let pickup = resolve_zone(pickup_zone, map)?;
    let drop = resolve_zone(drop_zone, map)?;
    let task = TaskSpec {
        pickup,
        drop,
        item: normalize_item(item),
        source_text: text.to_owned(),
    };
    if task.item.is_empty() {
        return Err(NluError::MalformedResponse("empty item".into()));
    }
    validate_task(task, map.workspace())
}

/// Checks that both endpoints lie in the workspace and differ.
pub fn validate_task(task: TaskSpec, workspace: &Workspace) -> Result<TaskSpec, NluError> {
    for p in [task.pickup, task.drop] {
        if !workspace.contains(p) {
            return Err(NluError::PointOutsideWorkspace(p));
        }
    }
    if task.pickup == task.drop {
        return Err(NluError::SameZone);
    }
    Ok(task)
}

/// Request body sent to an external interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpreterRequest {
    pub command: String,
    pub zones: Vec<String>,
}

/// Response body expected from an external interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpreterReply {
    pub pickup: String,
    pub drop: String,
    pub item: String,
}

/// Anything that can turn a request into a reply.
pub trait InterpreterClient {
    fn interpret(&self, request: &InterpreterRequest) -> Result<InterpreterReply, NluError>;
}

/// JSON-over-HTTP client for a remote interpreter (plain `http://` only).
#[derive(Debug, Clone)]
pub struct HttpInterpreter {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpInterpreter {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpInterpreter {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

fn is_timeout(err: &ureq::Transport) -> bool {
    let mut source = std::error::Error::source(err);
    while let Some(e) = source {
        if let Some(io) = e.downcast_ref::<io::Error>() {
            return matches!(
                io.kind(),
                io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
            );
        }
        source = e.source();
    }
    false
}

impl InterpreterClient for HttpInterpreter {
    fn interpret(&self, request: &InterpreterRequest) -> Result<InterpreterReply, NluError> {
        let body = serde_json::to_string(request).expect("request serialization is infallible");
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json")
            .send_string(&body);
        let text = match response {
            Ok(resp) => resp.into_string().map_err(|e| {
                if matches!(
                    e.kind(),
                    io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
                ) {
                    NluError::EndpointTimeout
                } else {
                    NluError::EndpointUnreachable(e.to_string())
                }
            })?,
            Err(ureq::Error::Status(code, _)) => {
                return Err(NluError::MalformedResponse(format!("HTTP status {code}")))
            }
            Err(ureq::Error::Transport(t)) if is_timeout(&t) => {
                return Err(NluError::EndpointTimeout)
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(NluError::EndpointUnreachable(t.to_string()))
            }
        };
        serde_json::from_str(&text).map_err(|e| NluError::MalformedResponse(e.to_string()))
    }
}

/// Interprets `text` through `client`, grounding the reply in `map`. With
/// `fallback` set, transport failures and malformed replies are answered by
/// the grammar parser instead.
pub fn interpret_with(
    client: &dyn InterpreterClient,
    text: &str,
    map: &SemanticMap,
    fallback: bool,
) -> Result<TaskSpec, NluError> {
    if text.trim().is_empty() {
        return Err(NluError::EmptyCommand);
    }
    let request = InterpreterRequest {
        command: text.to_owned(),
        zones: map.zone_names(),
    };
    match client.interpret(&request) {
        Ok(reply) => ground(text, &reply.pickup, &reply.drop, &reply.item, map),
        Err(e) if fallback && e.allows_fallback() => {
            log::info!("external interpreter failed ({e}); using the grammar parser");
            parse_command(text, map)
        }
        Err(e) => Err(e),
    }
}

/// Sends `text` to the configured external endpoint.
pub fn interpret_external(
    text: &str,
    map: &SemanticMap,
    config: &InterpreterConfig,
) -> Result<TaskSpec, NluError> {
    config.validate()?;
    let endpoint = match (config.mode, &config.endpoint) {
        (InterpreterMode::External, Some(endpoint)) => endpoint,
        _ => {
            return Err(NluError::InvalidConfig(
                "interpret_external requires external mode",
            ))
        }
    };
    let client = HttpInterpreter::new(endpoint.clone(), config.timeout);
    interpret_with(&client, text, map, config.fallback)
}

/// Dispatches on the configured mode.
pub fn interpret(
    text: &str,
    map: &SemanticMap,
    config: &InterpreterConfig,
) -> Result<TaskSpec, NluError> {
    config.validate()?;
    match config.mode {
        InterpreterMode::Grammar => parse_command(text, map),
        InterpreterMode::External => interpret_external(text, map, config),
    }
}
