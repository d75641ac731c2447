//! Edit-command protocol (`<add>…</add>` / `<remove>…</remove>` strings under a
//! `"commands"` key) and strict parsing of single-object model outputs.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::ssr::{object_from_value, ParseError, SceneObject};

/// Candidate texts longer than this are rejected unread.
pub const MAX_CANDIDATE_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Add,
    Remove,
}

impl CommandKind {
    pub fn tag(self) -> &'static str {
        match self {
            CommandKind::Add => "add",
            CommandKind::Remove => "remove",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCommand {
    pub kind: CommandKind,
    pub description: String,
}

impl EditCommand {
    pub fn add(description: impl Into<String>) -> Self {
        Self {
            kind: CommandKind::Add,
            description: description.into(),
        }
    }

    pub fn remove(description: impl Into<String>) -> Self {
        Self {
            kind: CommandKind::Remove,
            description: description.into(),
        }
    }
}

impl fmt::Display for EditCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.kind.tag();
        write!(f, "<{t}>{}</{t}>", self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommandList {
    pub commands: Vec<EditCommand>,
    pub reasoning: Option<String>,
    /// Set when a remove command follows an add command.
    pub order_warning: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommandError {
    #[error("no commands found")]
    NoCommands,
    #[error("command {0} is not a well-formed <add>/<remove> tag")]
    MalformedTag(usize),
}

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)<\s*(add|remove)\s*>(.*?)<\s*/\s*(add|remove)\s*>").expect("valid regex")
    })
}

fn loose_reasoning_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?s)['"]reasoning['"]\s*:\s*(?:'((?:[^'\\]|\\.)*)'|"((?:[^"\\]|\\.)*)")"#)
            .expect("valid regex")
    })
}

/// Parses one tagged command string; `None` if it is not exactly one balanced tag.
fn parse_tag(entry: &str) -> Option<EditCommand> {
    let entry = entry.trim();
    let caps = tag_re().captures(entry)?;
    let whole = caps.get(0)?;
    if whole.start() != 0 || whole.end() != entry.len() {
        return None;
    }
    let (open, close) = (caps[1].to_ascii_lowercase(), caps[3].to_ascii_lowercase());
    if open != close {
        return None;
    }
    let description = caps[2].split_whitespace().collect::<Vec<_>>().join(" ");
    if description.is_empty() {
        return None;
    }
    let kind = if open == "add" {
        CommandKind::Add
    } else {
        CommandKind::Remove
    };
    Some(EditCommand { kind, description })
}

/// First JSON object embedded in `text` that has a `"commands"` key.
fn find_command_doc(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if map.contains_key("commands") {
                return Some(map);
            }
        }
    }
    None
}

fn finish(
    commands: Vec<EditCommand>,
    reasoning: Option<String>,
) -> Result<CommandList, CommandError> {
    if commands.is_empty() {
        return Err(CommandError::NoCommands);
    }
    let first_add = commands.iter().position(|c| c.kind == CommandKind::Add);
    let order_warning =
        first_add.is_some_and(|a| commands[a..].iter().any(|c| c.kind == CommandKind::Remove));
    if order_warning {
        log::warn!("remove command after an add command");
    }
    Ok(CommandList {
        commands,
        reasoning,
        order_warning,
    })
}

/// Extracts the command list from a model response.
///
/// The response should contain a JSON object with a `"commands"` array of tag
/// strings and an optional `"reasoning"` string; prose around it is ignored. If
/// no such object parses (e.g. the model used single quotes), balanced tags
/// are collected from the raw text instead.
pub fn parse_commands(text: &str) -> Result<CommandList, CommandError> {
    if let Some(doc) = find_command_doc(text) {
        let reasoning = doc
            .get("reasoning")
            .and_then(Value::as_str)
            .map(str::to_string);
        let entries = match doc.get("commands") {
            Some(Value::Array(a)) => a,
            _ => return Err(CommandError::MalformedTag(0)),
        };
        let commands = entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.as_str()
                    .and_then(parse_tag)
                    .ok_or(CommandError::MalformedTag(i))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return finish(commands, reasoning);
    }
    let commands = tag_re()
        .find_iter(text)
        .filter_map(|m| parse_tag(m.as_str()))
        .collect();
    let reasoning = loose_reasoning_re()
        .captures(text)
        .and_then(|c| c.get(1).or_else(|| c.get(2)))
        .map(|m| m.as_str().to_string());
    finish(commands, reasoning)
}

/// Canonical JSON form of a command list (`reasoning` first when present).
pub fn render_commands(list: &CommandList) -> String {
    let mut doc = Map::new();
    if let Some(r) = &list.reasoning {
        doc.insert("reasoning".into(), json!(r));
    }
    doc.insert(
        "commands".into(),
        list.commands
            .iter()
            .map(|c| Value::String(c.to_string()))
            .collect(),
    );
    Value::Object(doc).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidKind {
    Malformed,
    TooLarge,
    NotAnObject,
    MissingKey,
    BadType,
    BadArity,
    BadValue,
}

/// Why a candidate was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind:?}: {detail}")]
pub struct InvalidOutput {
    pub kind: InvalidKind,
    pub detail: String,
}

fn invalid(kind: InvalidKind, detail: impl Into<String>) -> InvalidOutput {
    InvalidOutput {
        kind,
        detail: detail.into(),
    }
}

/// Strictly parses a single object: a JSON object with `desc` (non-empty
/// string), `size` and `pos` (3 finite numbers, size positive) and `rot`
/// (4 finite numbers, not all zero). Extra keys are kept.
pub fn parse_candidate_object(text: &str) -> Result<SceneObject, InvalidOutput> {
    if text.len() > MAX_CANDIDATE_BYTES {
        return Err(invalid(
            InvalidKind::TooLarge,
            format!("{} bytes", text.len()),
        ));
    }
    let v: Value =
        serde_json::from_str(text).map_err(|e| invalid(InvalidKind::Malformed, e.to_string()))?;
    let map = v
        .as_object()
        .ok_or_else(|| invalid(InvalidKind::NotAnObject, "top level is not an object"))?;
    for (key, arity) in [("desc", 0), ("size", 3), ("pos", 3), ("rot", 4)] {
        let field = map
            .get(key)
            .ok_or_else(|| invalid(InvalidKind::MissingKey, key))?;
        if arity == 0 {
            continue;
        }
        let arr = field
            .as_array()
            .ok_or_else(|| invalid(InvalidKind::BadType, format!("{key} is not an array")))?;
        if arr.len() != arity {
            return Err(invalid(
                InvalidKind::BadArity,
                format!("{key} has {} components, expected {arity}", arr.len()),
            ));
        }
    }
    let obj = object_from_value(&v, "candidate").map_err(|e| match e {
        ParseError::MissingKey(p) => invalid(InvalidKind::MissingKey, p),
        ParseError::BadType(p) => invalid(InvalidKind::BadType, p),
        ParseError::InvariantViolation(m) => invalid(InvalidKind::BadValue, m),
        ParseError::Malformed(m) => invalid(InvalidKind::Malformed, m),
    })?;
    obj.check().map_err(|m| invalid(InvalidKind::BadValue, m))?;
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_commands_with_prose() {
        let text = "Sure! Here you go:\n{\"reasoning\": \"swap\", \"commands\": [\"<remove>old bed</remove>\", \"<ADD> dark  wooden bed </add>\"]}\nThanks";
        let l = parse_commands(text).unwrap();
        assert_eq!(
            l.commands,
            vec![
                EditCommand::remove("old bed"),
                EditCommand::add("dark wooden bed")
            ]
        );
        assert_eq!(l.reasoning.as_deref(), Some("swap"));
        assert!(!l.order_warning);
    }

    #[test]
    fn single_quoted_response_falls_back_to_tags() {
        let text = "{'commands': ['<add>low shelf</add>', '<add>black floor lamp</add>']}";
        let l = parse_commands(text).unwrap();
        assert_eq!(
            l.commands,
            vec![
                EditCommand::add("low shelf"),
                EditCommand::add("black floor lamp")
            ]
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_commands("{\"commands\": []}"),
            Err(CommandError::NoCommands)
        );
        assert_eq!(
            parse_commands("nothing here"),
            Err(CommandError::NoCommands)
        );
        assert_eq!(
            parse_commands("{\"commands\": [\"<add>a</add>\", \"<add>b</remove>\"]}"),
            Err(CommandError::MalformedTag(1))
        );
        assert_eq!(
            parse_commands("{\"commands\": [\"<add></add>\"]}"),
            Err(CommandError::MalformedTag(0))
        );
        assert_eq!(
            parse_commands("{\"commands\": [3]}"),
            Err(CommandError::MalformedTag(0))
        );
        assert_eq!(
            parse_commands("{\"commands\": \"<add>a</add>\"}"),
            Err(CommandError::MalformedTag(0))
        );
    }

    #[test]
    fn remove_after_add_warns() {
        let l = parse_commands("{\"commands\": [\"<add>sofa</add>\", \"<remove>chair</remove>\"]}")
            .unwrap();
        assert!(l.order_warning);
        assert_eq!(l.commands[1].kind, CommandKind::Remove);
    }

    #[test]
    fn render_round_trip() {
        let l = CommandList {
            commands: vec![
                EditCommand::remove("blue chair"),
                EditCommand::add("red chair"),
            ],
            reasoning: Some("replace".into()),
            order_warning: false,
        };
        assert_eq!(parse_commands(&render_commands(&l)).unwrap(), l);
    }

    #[test]
    fn candidate_ok_and_extras_kept() {
        let o = parse_candidate_object(r#"{"desc": "bed", "size": [1, 2, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 1], "note": 5}"#).unwrap();
        assert_eq!(o.desc, "bed");
        assert_eq!(o.extra.get("note"), Some(&json!(5)));
    }

    #[test]
    fn candidate_rejections() {
        let kind = |t: &str| parse_candidate_object(t).unwrap_err().kind;
        assert_eq!(
            kind(r#"{"desc": "bed", "size": [1, 2"#),
            InvalidKind::Malformed
        );
        assert_eq!(kind(r#"[1]"#), InvalidKind::NotAnObject);
        assert_eq!(
            kind(r#"{"size": [1, 2, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 1]}"#),
            InvalidKind::MissingKey
        );
        assert_eq!(
            kind(r#"{"desc": "bed", "size": [1, 2, 3], "pos": [0, 0, 0], "rot": [0, 0, 1]}"#),
            InvalidKind::BadArity
        );
        assert_eq!(
            kind(r#"{"desc": "bed", "size": [1, 0, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 1]}"#),
            InvalidKind::BadValue
        );
        assert_eq!(
            kind(r#"{"desc": "bed", "size": [1, 1, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 0]}"#),
            InvalidKind::BadValue
        );
        assert_eq!(
            kind(r#"{"desc": "", "size": [1, 1, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 1]}"#),
            InvalidKind::BadValue
        );
        assert_eq!(
            kind(r#"{"desc": 4, "size": [1, 1, 3], "pos": [0, 0, 0], "rot": [0, 0, 0, 1]}"#),
            InvalidKind::BadType
        );
        assert_eq!(
            kind(r#"{"desc": "a", "size": "big", "pos": [0, 0, 0], "rot": [0, 0, 0, 1]}"#),
            InvalidKind::BadType
        );
    }
}
