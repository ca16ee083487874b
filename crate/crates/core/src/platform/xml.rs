//! XML form of the platform file. Element names follow the YAML keys;
//! relation sets hold `<member>` children and any other text (such as an
//! elided `...`) is ignored.

use std::fmt::Write;

use roxmltree::{Document, Node};

use super::{
    Bandwidth, Memory, PatternDoc, PlatformDesc, PlatformDoc, PlatformError, Port, ProcClass,
    Processor, ShareSet,
};

fn err(msg: impl Into<String>) -> PlatformError {
    PlatformError::Xml(msg.into())
}

fn attr<'a>(n: Node<'a, '_>, name: &str) -> Result<&'a str, PlatformError> {
    n.attribute(name)
        .ok_or_else(|| err(format!("<{}> needs attribute `{name}`", n.tag_name().name())))
}

fn num<T: std::str::FromStr>(n: Node, name: &str) -> Result<T, PlatformError> {
    attr(n, name)?
        .trim()
        .parse()
        .map_err(|_| err(format!("attribute `{name}` must be an unsigned integer")))
}

fn elements<'a, 'i>(n: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    n.children().filter(Node::is_element)
}

fn text_of(n: Node) -> String {
    n.text().unwrap_or("").trim().to_string()
}

fn members(n: Node) -> Vec<String> {
    elements(n)
        .filter(|c| c.has_tag_name("member"))
        .map(text_of)
        .collect()
}

fn pattern_from(n: Node) -> Result<PatternDoc, PlatformError> {
    let mut doc = PatternDoc {
        name: attr(n, "name")?.to_string(),
        ..PatternDoc::default()
    };
    for c in elements(n) {
        let tag = c.tag_name().name();
        match tag {
            "defining_memory" => doc.defining_memory = Some(text_of(c)),
            "observing_memory" => doc.observing_memory = Some(text_of(c)),
            "exclusive_define_with" => doc.exclusive_define_with = members(c),
            "can_observe" => doc.can_observe = members(c),
            _ => match ShareSet::ALL.iter().find(|s| s.key() == tag) {
                Some(s) => *doc.share_mut(*s) = members(c),
                None => return Err(err(format!("unknown pattern element <{tag}>"))),
            },
        }
    }
    Ok(doc)
}

/// Reads a bare `<pattern>` element (or every `<pattern>` below the root).
pub fn import_pattern_xml(text: &str) -> Result<Vec<PatternDoc>, PlatformError> {
    let doc = Document::parse(text).map_err(|e| err(e.to_string()))?;
    let root = doc.root_element();
    if root.has_tag_name("pattern") {
        return Ok(vec![pattern_from(root)?]);
    }
    elements(root)
        .filter(|c| c.has_tag_name("pattern"))
        .map(pattern_from)
        .collect()
}

pub fn parse_platform_xml(text: &str) -> Result<PlatformDesc, PlatformError> {
    let xml = Document::parse(text).map_err(|e| err(e.to_string()))?;
    let root = xml.root_element();
    if !root.has_tag_name("platform") {
        return Err(err("root element must be <platform>"));
    }
    let mut doc = PlatformDoc {
        base_clocks: root
            .attribute("base_clocks")
            .map(|_| num(root, "base_clocks"))
            .transpose()?
            .unwrap_or(0),
        ..PlatformDoc::default()
    };
    for c in elements(root) {
        match c.tag_name().name() {
            "processor" => doc.processors.push(Processor {
                name: attr(c, "name")?.to_string(),
                class: match attr(c, "class")? {
                    "cpu" => ProcClass::Cpu,
                    "accel" => ProcClass::Accel,
                    other => return Err(err(format!("unknown processor class `{other}`"))),
                },
                memories: elements(c)
                    .filter(|m| m.has_tag_name("memory"))
                    .map(text_of)
                    .collect(),
                local_memory: c.attribute("local_memory").map(str::to_string),
            }),
            "memory" => doc.memories.push(Memory {
                name: attr(c, "name")?.to_string(),
                capacity: num(c, "capacity")?,
            }),
            "port" => {
                let ends: Vec<String> = elements(c)
                    .filter(|m| m.has_tag_name("connects"))
                    .map(text_of)
                    .collect();
                let connects: [String; 2] = ends
                    .try_into()
                    .map_err(|_| err("<port> needs exactly two <connects>"))?;
                doc.ports.push(Port {
                    name: attr(c, "name")?.to_string(),
                    connects,
                    bandwidth: Bandwidth {
                        bytes: num(c, "bytes")?,
                        clocks: num(c, "clocks")?,
                    },
                    base_clocks: c
                        .attribute("base_clocks")
                        .map(|_| num(c, "base_clocks"))
                        .transpose()?,
                });
            }
            "pattern" => doc.patterns.push(pattern_from(c)?),
            other => return Err(err(format!("unknown element <{other}>"))),
        }
    }
    PlatformDesc::from_doc(doc)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn platform_to_xml(p: &PlatformDesc) -> String {
    let doc = p.to_doc();
    let mut s = String::new();
    let _ = writeln!(s, "<platform base_clocks=\"{}\">", doc.base_clocks);
    for pr in &doc.processors {
        let class = match pr.class {
            ProcClass::Cpu => "cpu",
            ProcClass::Accel => "accel",
        };
        let local = pr
            .local_memory
            .as_ref()
            .map(|m| format!(" local_memory=\"{}\"", esc(m)))
            .unwrap_or_default();
        let _ = writeln!(s, "  <processor name=\"{}\" class=\"{class}\"{local}>", esc(&pr.name));
        for m in &pr.memories {
            let _ = writeln!(s, "    <memory>{}</memory>", esc(m));
        }
        s.push_str("  </processor>\n");
    }
    for m in &doc.memories {
        let _ = writeln!(s, "  <memory name=\"{}\" capacity=\"{}\"/>", esc(&m.name), m.capacity);
    }
    for port in &doc.ports {
        let base = port
            .base_clocks
            .map(|b| format!(" base_clocks=\"{b}\""))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "  <port name=\"{}\" bytes=\"{}\" clocks=\"{}\"{base}>",
            esc(&port.name),
            port.bandwidth.bytes,
            port.bandwidth.clocks
        );
        for c in &port.connects {
            let _ = writeln!(s, "    <connects>{}</connects>", esc(c));
        }
        s.push_str("  </port>\n");
    }
    for pat in &doc.patterns {
        let _ = writeln!(s, "  <pattern name=\"{}\">", esc(&pat.name));
        for (tag, v) in [
            ("defining_memory", &pat.defining_memory),
            ("observing_memory", &pat.observing_memory),
        ] {
            if let Some(v) = v {
                let _ = writeln!(s, "    <{tag}>{}</{tag}>", esc(v));
            }
        }
        let mut sets = vec![("exclusive_define_with", &pat.exclusive_define_with)];
        sets.extend(ShareSet::ALL.iter().map(|k| (k.key(), pat.share(*k))));
        sets.push(("can_observe", &pat.can_observe));
        for (tag, list) in sets {
            if list.is_empty() {
                let _ = writeln!(s, "    <{tag}/>");
            } else {
                let _ = writeln!(s, "    <{tag}>");
                for m in list {
                    let _ = writeln!(s, "      <member>{}</member>", esc(m));
                }
                let _ = writeln!(s, "    </{tag}>");
            }
        }
        s.push_str("  </pattern>\n");
    }
    s.push_str("</platform>\n");
    s
}
