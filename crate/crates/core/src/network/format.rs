//! Sectioned text format for road networks.
//!
//! ```text
//! # comment
//! [states]
//! A: a            # name, then comma-separated label propositions
//! B
//! [roads]
//! A -> B 2        # directed road with travel duration 2
//! A <-> B 2       # two-way shorthand, expands to both directions
//! ```

use super::{NetworkError, RoadNetwork};

#[derive(Debug, Clone)]
pub struct StateDecl {
    pub name: String,
    pub props: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RoadDecl {
    pub from: String,
    pub to: String,
    pub weight: u64,
    pub two_way: bool,
}

/// Parsed but not yet validated network description.
#[derive(Debug, Clone, Default)]
pub struct NetworkSpec {
    pub states: Vec<StateDecl>,
    pub roads: Vec<RoadDecl>,
}

/// Parses and validates a network description in one step.
pub fn load_network(source: &str) -> Result<RoadNetwork, NetworkError> {
    RoadNetwork::from_spec(&parse_spec(source)?)
}

fn ident_ok(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_spec(source: &str) -> Result<NetworkSpec, NetworkError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        States,
        Roads,
    }
    let mut spec = NetworkSpec::default();
    let mut section = Section::None;
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let err = |msg: String| NetworkError::Parse { line, msg };
        match text {
            "[states]" => {
                section = Section::States;
                continue;
            }
            "[roads]" => {
                section = Section::Roads;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => {
                return Err(err(format!("expected [states] or [roads], got `{text}`")))
            }
            Section::States => {
                let (name, rest) = match text.split_once(':') {
                    Some((n, r)) => (n.trim(), r.trim()),
                    None => (text, ""),
                };
                if !ident_ok(name) {
                    return Err(err(format!("bad state name `{name}`")));
                }
                let props: Vec<String> = if rest.is_empty() {
                    Vec::new()
                } else {
                    rest.split(',')
                        .map(|p| p.trim().to_string())
                        .collect::<Vec<_>>()
                };
                for p in &props {
                    if !ident_ok(p) {
                        return Err(err(format!("bad proposition `{p}`")));
                    }
                }
                spec.states.push(StateDecl {
                    name: name.to_string(),
                    props,
                });
            }
            Section::Roads => {
                let (two_way, arrow) = if text.contains("<->") {
                    (true, "<->")
                } else if text.contains("->") {
                    (false, "->")
                } else {
                    return Err(err(format!("expected `from -> to weight`, got `{text}`")));
                };
                let (from, rest) = text.split_once(arrow).unwrap();
                let from = from.trim();
                let mut parts = rest.split_whitespace();
                let to = parts.next().unwrap_or("");
                let weight_text = parts.next().ok_or_else(|| {
                    err(format!("road {from} {arrow} {to}: missing weight"))
                })?;
                if parts.next().is_some() {
                    return Err(err(format!("trailing input after road `{text}`")));
                }
                if !ident_ok(from) || !ident_ok(to) {
                    return Err(err(format!("bad road endpoints in `{text}`")));
                }
                let weight: u64 = weight_text.parse().map_err(|_| {
                    err(format!(
                        "road {from} {arrow} {to}: bad weight `{weight_text}`"
                    ))
                })?;
                spec.roads.push(RoadDecl {
                    from: from.to_string(),
                    to: to.to_string(),
                    weight,
                    two_way,
                });
            }
        }
    }
    Ok(spec)
}
