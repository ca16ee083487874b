//! Processors, memories, ports and buffer-movement patterns.

mod sdk;
mod xml;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Clock;

pub use sdk::{parse_sdk_meta, GroundedMeta, SdkError, SdkFunctionMeta, ASSIGN_EMPTY_META, ERROR_MESSAGE_META};
pub use xml::{import_pattern_xml, parse_platform_xml, platform_to_xml};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("`{name}` is referenced by {context} but not defined")]
    DanglingReference { name: String, context: String },
    #[error("malformed pattern name `{name}`: {reason}")]
    MalformedPatternName { name: String, reason: String },
    #[error("pattern `{name}`: {field} is `{found}` but the name implies `{expected}`")]
    AnchorMismatch {
        name: String,
        field: &'static str,
        found: String,
        expected: String,
    },
    #[error("no port connects `{from}` and `{to}` (pattern `{pattern}`)")]
    NoPort {
        pattern: String,
        from: String,
        to: String,
    },
    #[error("name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("port `{0}` has a zero bandwidth term")]
    ZeroBandwidth(String),
    #[error("invalid platform YAML: {0}")]
    Yaml(String),
    #[error("invalid platform XML: {0}")]
    Xml(String),
    #[error("pattern set is empty for `{function}` on `{producer}`")]
    EmptyCompatibleSet { function: String, producer: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcClass {
    Cpu,
    Accel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Processor {
    pub name: String,
    pub class: ProcClass,
    /// Memories this processor can read.
    #[serde(default)]
    pub memories: Vec<String>,
    /// Memory that holds task scratch (internalsize) while running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_memory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Memory {
    pub name: String,
    pub capacity: u64,
}

/// `bytes` per `clocks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bandwidth {
    pub bytes: u64,
    pub clocks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub name: String,
    pub connects: [String; 2],
    pub bandwidth: Bandwidth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_clocks: Option<Clock>,
}

/// The eight port-sharing relations, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShareSet {
    L2II,
    L2IO,
    L2OI,
    L2OO,
    L3II,
    L3IO,
    L3OI,
    L3OO,
}

impl ShareSet {
    pub const ALL: [ShareSet; 8] = [
        ShareSet::L2II,
        ShareSet::L2IO,
        ShareSet::L2OI,
        ShareSet::L2OO,
        ShareSet::L3II,
        ShareSet::L3IO,
        ShareSet::L3OI,
        ShareSet::L3OO,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ShareSet::L2II => "shares_L2_II_with",
            ShareSet::L2IO => "shares_L2_IO_with",
            ShareSet::L2OI => "shares_L2_OI_with",
            ShareSet::L2OO => "shares_L2_OO_with",
            ShareSet::L3II => "shares_L3_II_with",
            ShareSet::L3IO => "shares_L3_IO_with",
            ShareSet::L3OI => "shares_L3_OI_with",
            ShareSet::L3OO => "shares_L3_OO_with",
        }
    }

    /// Which leg of (this pattern, the other pattern) contends:
    /// `I` is the first leg, `O` the last.
    pub fn sides(self) -> (Side, Side) {
        use Side::*;
        match self {
            ShareSet::L2II | ShareSet::L3II => (In, In),
            ShareSet::L2IO | ShareSet::L3IO => (In, Out),
            ShareSet::L2OI | ShareSet::L3OI => (Out, In),
            ShareSet::L2OO | ShareSet::L3OO => (Out, Out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    In,
    Out,
}

/// One hop of a pattern's memory chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Leg {
    pub from: String,
    pub to: String,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub name: String,
    pub family: String,
    pub home_processor: String,
    /// Memories in data-path order, from definition to observation.
    pub chain: Vec<String>,
    pub defining_memory: String,
    pub observing_memory: String,
    pub legs: Vec<Leg>,
    pub exclusive_define_with: BTreeSet<String>,
    pub shares: BTreeMap<ShareSet, BTreeSet<String>>,
    pub can_observe: BTreeSet<String>,
}

impl Pattern {
    pub fn delay_capable(&self) -> bool {
        self.family == "big_delay"
    }

    pub fn share_set(&self, set: ShareSet) -> &BTreeSet<String> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        self.shares.get(&set).unwrap_or(&EMPTY)
    }

    /// Index of the leg on the given side, if the pattern moves data at all.
    pub fn leg_index(&self, side: Side) -> Option<usize> {
        match (side, self.legs.len()) {
            (_, 0) => None,
            (Side::In, _) => Some(0),
            (Side::Out, n) => Some(n - 1),
        }
    }
}

/// Splits `<family>.<processor>.<mem>(.<mem>)*`.
pub fn split_pattern_name(name: &str) -> Result<(String, String, Vec<String>), PlatformError> {
    let parts: Vec<&str> = name.split('.').collect();
    let bad = |reason: &str| PlatformError::MalformedPatternName {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    if parts.len() < 3 {
        return Err(bad("expected <family>.<processor>.<memory>[.<memory>...]"));
    }
    if parts.iter().any(|p| !crate::model::is_identifier(p)) {
        return Err(bad("every component must be an identifier"));
    }
    Ok((
        parts[0].to_string(),
        parts[1].to_string(),
        parts[2..].iter().map(|s| s.to_string()).collect(),
    ))
}

/// Pattern as written in a platform file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defining_memory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observing_memory: Option<String>,
    #[serde(default)]
    pub exclusive_define_with: Vec<String>,
    #[serde(default, rename = "shares_L2_II_with")]
    pub shares_l2_ii_with: Vec<String>,
    #[serde(default, rename = "shares_L2_IO_with")]
    pub shares_l2_io_with: Vec<String>,
    #[serde(default, rename = "shares_L2_OI_with")]
    pub shares_l2_oi_with: Vec<String>,
    #[serde(default, rename = "shares_L2_OO_with")]
    pub shares_l2_oo_with: Vec<String>,
    #[serde(default, rename = "shares_L3_II_with")]
    pub shares_l3_ii_with: Vec<String>,
    #[serde(default, rename = "shares_L3_IO_with")]
    pub shares_l3_io_with: Vec<String>,
    #[serde(default, rename = "shares_L3_OI_with")]
    pub shares_l3_oi_with: Vec<String>,
    #[serde(default, rename = "shares_L3_OO_with")]
    pub shares_l3_oo_with: Vec<String>,
    #[serde(default)]
    pub can_observe: Vec<String>,
}

impl PatternDoc {
    pub fn share(&self, set: ShareSet) -> &Vec<String> {
        match set {
            ShareSet::L2II => &self.shares_l2_ii_with,
            ShareSet::L2IO => &self.shares_l2_io_with,
            ShareSet::L2OI => &self.shares_l2_oi_with,
            ShareSet::L2OO => &self.shares_l2_oo_with,
            ShareSet::L3II => &self.shares_l3_ii_with,
            ShareSet::L3IO => &self.shares_l3_io_with,
            ShareSet::L3OI => &self.shares_l3_oi_with,
            ShareSet::L3OO => &self.shares_l3_oo_with,
        }
    }

    pub fn share_mut(&mut self, set: ShareSet) -> &mut Vec<String> {
        match set {
            ShareSet::L2II => &mut self.shares_l2_ii_with,
            ShareSet::L2IO => &mut self.shares_l2_io_with,
            ShareSet::L2OI => &mut self.shares_l2_oi_with,
            ShareSet::L2OO => &mut self.shares_l2_oo_with,
            ShareSet::L3II => &mut self.shares_l3_ii_with,
            ShareSet::L3IO => &mut self.shares_l3_io_with,
            ShareSet::L3OI => &mut self.shares_l3_oi_with,
            ShareSet::L3OO => &mut self.shares_l3_oo_with,
        }
    }
}

/// Platform file schema.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformDoc {
    #[serde(default)]
    pub base_clocks: Clock,
    #[serde(default)]
    pub processors: Vec<Processor>,
    #[serde(default)]
    pub memories: Vec<Memory>,
    #[serde(default)]
    pub ports: Vec<Port>,
    #[serde(default)]
    pub patterns: Vec<PatternDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformDesc {
    pub base_clocks: Clock,
    pub processors: BTreeMap<String, Processor>,
    pub memories: BTreeMap<String, Memory>,
    pub ports: BTreeMap<String, Port>,
    pub patterns: BTreeMap<String, Pattern>,
}

pub fn parse_platform(text: &str) -> Result<PlatformDesc, PlatformError> {
    let doc: PlatformDoc =
        serde_yaml::from_str(text).map_err(|e| PlatformError::Yaml(e.to_string()))?;
    PlatformDesc::from_doc(doc)
}

impl PlatformDesc {
    pub fn from_doc(doc: PlatformDoc) -> Result<PlatformDesc, PlatformError> {
        let mut names = BTreeSet::new();
        let all_names = doc
            .processors
            .iter()
            .map(|p| &p.name)
            .chain(doc.memories.iter().map(|m| &m.name))
            .chain(doc.ports.iter().map(|p| &p.name))
            .chain(doc.patterns.iter().map(|p| &p.name));
        for n in all_names {
            if !names.insert(n.clone()) {
                return Err(PlatformError::DuplicateName(n.clone()));
            }
        }
        let memories: BTreeMap<String, Memory> = doc
            .memories
            .into_iter()
            .map(|m| (m.name.clone(), m))
            .collect();
        let dangling = |name: &str, context: String| PlatformError::DanglingReference {
            name: name.to_string(),
            context,
        };
        for p in &doc.processors {
            for m in p.memories.iter().chain(&p.local_memory) {
                if !memories.contains_key(m) {
                    return Err(dangling(m, format!("processor `{}`", p.name)));
                }
            }
        }
        for p in &doc.ports {
            for m in &p.connects {
                if !memories.contains_key(m) {
                    return Err(dangling(m, format!("port `{}`", p.name)));
                }
            }
            if p.bandwidth.bytes == 0 || p.bandwidth.clocks == 0 {
                return Err(PlatformError::ZeroBandwidth(p.name.clone()));
            }
        }
        let processors: BTreeMap<String, Processor> = doc
            .processors
            .into_iter()
            .map(|p| (p.name.clone(), p))
            .collect();
        let ports: BTreeMap<String, Port> =
            doc.ports.into_iter().map(|p| (p.name.clone(), p)).collect();

        let mut patterns = BTreeMap::new();
        for pd in &doc.patterns {
            let (family, home, chain) = split_pattern_name(&pd.name)?;
            if !processors.contains_key(&home) {
                return Err(dangling(&home, format!("pattern `{}`", pd.name)));
            }
            for m in &chain {
                if !memories.contains_key(m) {
                    return Err(dangling(m, format!("pattern `{}`", pd.name)));
                }
            }
            let first = chain.first().cloned().expect("non-empty chain");
            let last = chain.last().cloned().expect("non-empty chain");
            for (field, given, expected) in [
                ("defining_memory", &pd.defining_memory, &first),
                ("observing_memory", &pd.observing_memory, &last),
            ] {
                if let Some(g) = given {
                    if g != expected {
                        return Err(PlatformError::AnchorMismatch {
                            name: pd.name.clone(),
                            field,
                            found: g.clone(),
                            expected: expected.clone(),
                        });
                    }
                }
            }
            let mut legs = Vec::new();
            for w in chain.windows(2) {
                let port = ports
                    .values()
                    .find(|p| {
                        (p.connects[0] == w[0] && p.connects[1] == w[1])
                            || (p.connects[0] == w[1] && p.connects[1] == w[0])
                    })
                    .ok_or_else(|| PlatformError::NoPort {
                        pattern: pd.name.clone(),
                        from: w[0].clone(),
                        to: w[1].clone(),
                    })?;
                legs.push(Leg {
                    from: w[0].clone(),
                    to: w[1].clone(),
                    port: port.name.clone(),
                });
            }
            let set = |v: &Vec<String>| v.iter().cloned().collect::<BTreeSet<_>>();
            patterns.insert(
                pd.name.clone(),
                Pattern {
                    name: pd.name.clone(),
                    family,
                    home_processor: home,
                    defining_memory: first,
                    observing_memory: last,
                    chain,
                    legs,
                    exclusive_define_with: set(&pd.exclusive_define_with),
                    shares: ShareSet::ALL
                        .iter()
                        .map(|s| (*s, set(pd.share(*s))))
                        .collect(),
                    can_observe: set(&pd.can_observe),
                },
            );
        }

        // every relation member must name a pattern
        for p in patterns.values() {
            let members = p
                .exclusive_define_with
                .iter()
                .chain(p.shares.values().flatten())
                .chain(&p.can_observe);
            for m in members {
                if !patterns.contains_key(m) {
                    return Err(dangling(m, format!("relations of pattern `{}`", p.name)));
                }
            }
        }
        close_relations(&mut patterns);

        Ok(PlatformDesc {
            base_clocks: doc.base_clocks,
            processors,
            memories,
            ports,
            patterns,
        })
    }

    pub fn to_doc(&self) -> PlatformDoc {
        let list = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>();
        PlatformDoc {
            base_clocks: self.base_clocks,
            processors: self.processors.values().cloned().collect(),
            memories: self.memories.values().cloned().collect(),
            ports: self.ports.values().cloned().collect(),
            patterns: self
                .patterns
                .values()
                .map(|p| {
                    let mut d = PatternDoc {
                        name: p.name.clone(),
                        defining_memory: Some(p.defining_memory.clone()),
                        observing_memory: Some(p.observing_memory.clone()),
                        exclusive_define_with: list(&p.exclusive_define_with),
                        can_observe: list(&p.can_observe),
                        ..PatternDoc::default()
                    };
                    for s in ShareSet::ALL {
                        *d.share_mut(s) = list(p.share_set(s));
                    }
                    d
                })
                .collect(),
        }
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&self.to_doc()).expect("platform serializes")
    }

    pub fn pattern(&self, name: &str) -> Option<&Pattern> {
        self.patterns.get(name)
    }

    pub fn processor(&self, name: &str) -> Option<&Processor> {
        self.processors.get(name)
    }

    pub fn leg_base(&self, leg: &Leg) -> Clock {
        self.ports[&leg.port].base_clocks.unwrap_or(self.base_clocks)
    }

    pub fn leg_latency(&self, leg: &Leg, size_bytes: u64) -> Clock {
        let port = &self.ports[&leg.port];
        let bw = port.bandwidth;
        let stream = (size_bytes as u128 * bw.clocks as u128).div_ceil(bw.bytes as u128);
        self.leg_base(leg) + stream as Clock
    }

    /// Sum over legs of `base + ceil(size * clocks / bytes)`.
    pub fn transfer_latency(&self, pattern: &Pattern, size_bytes: u64) -> Clock {
        pattern
            .legs
            .iter()
            .map(|l| self.leg_latency(l, size_bytes))
            .sum()
    }

    /// Patterns from `available` homed on `producer` whose observing memory
    /// is readable by every consumer processor.
    pub fn compatible_patterns<'a>(
        &self,
        available: &'a [String],
        producer: &str,
        consumers: &[&str],
    ) -> Vec<&'a str> {
        available
            .iter()
            .filter(|name| {
                let Some(p) = self.patterns.get(*name) else {
                    return false;
                };
                p.home_processor == producer
                    && consumers.iter().all(|c| {
                        self.processors
                            .get(*c)
                            .is_some_and(|proc| proc.memories.contains(&p.observing_memory))
                    })
            })
            .map(String::as_str)
            .collect()
    }

    /// Does a buffer on pattern `a` contend with one on pattern `b`, and on
    /// which legs? Returns pairs of (leg index in a, leg index in b).
    pub fn contending_legs(&self, a: &Pattern, b: &Pattern) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for set in ShareSet::ALL {
            if a.share_set(set).contains(&b.name) {
                let (sa, sb) = set.sides();
                if let (Some(ia), Some(ib)) = (a.leg_index(sa), b.leg_index(sb)) {
                    out.push((ia, ib));
                }
                if let (Some(ia), Some(ib)) = (a.leg_index(sb), b.leg_index(sa)) {
                    out.push((ia, ib));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn close_relations(patterns: &mut BTreeMap<String, Pattern>) {
    let snapshot: Vec<Pattern> = patterns.values().cloned().collect();
    for p in &snapshot {
        for m in &p.exclusive_define_with {
            patterns
                .get_mut(m)
                .expect("checked")
                .exclusive_define_with
                .insert(p.name.clone());
        }
        for (set, members) in &p.shares {
            for m in members {
                patterns
                    .get_mut(m)
                    .expect("checked")
                    .shares
                    .entry(*set)
                    .or_default()
                    .insert(p.name.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests;
