//! Timing charts from an event trace: one lane per processor and port.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::model::Clock;
use crate::verify::{Event, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Svg,
    Text,
}

pub const TEXT_WIDTH: usize = 80;
const TEXT_LABEL: usize = 12;
pub const SVG_WIDTH: u64 = 1000;
const SVG_LEFT: u64 = 140;
const SVG_RIGHT: u64 = 20;
const LANE_H: u64 = 24;
const RULER_H: u64 = 30;
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bar {
    pub label: String,
    pub start: Clock,
    pub end: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lane {
    /// `proc:` or `port:` followed by the resource name.
    pub name: String,
    pub bars: Vec<Bar>,
}

/// Pairs start and finish events into bars, lanes sorted by kind then name.
pub fn lanes(trace: &[Event]) -> Vec<Lane> {
    let mut open: BTreeMap<(bool, &str, &str, &str), Clock> = BTreeMap::new();
    let mut out: BTreeMap<(u8, String), Vec<Bar>> = BTreeMap::new();
    for e in trace {
        let task = matches!(e.kind, EventKind::TaskStart | EventKind::TaskFinish);
        let key = (task, e.subject.as_str(), e.resource.as_str(), if task { "" } else { e.detail.as_str() });
        match e.kind {
            EventKind::TaskStart | EventKind::TransferStart => {
                open.insert(key, e.at);
            }
            EventKind::TaskFinish | EventKind::TransferFinish => {
                let Some(s) = open.remove(&key) else { continue };
                let lane = if task {
                    (0, format!("proc:{}", e.resource))
                } else {
                    (1, format!("port:{}", e.resource))
                };
                let label = if task { e.subject.clone() } else { format!("{} {}", e.subject, e.detail) };
                out.entry(lane).or_default().push(Bar { label, start: s, end: e.at });
            }
            _ => {}
        }
    }
    out.into_iter()
        .map(|((_, name), mut bars)| {
            bars.sort_by(|a, b| (a.start, a.end, &a.label).cmp(&(b.start, b.end, &b.label)));
            Lane { name, bars }
        })
        .collect()
}

fn span(lanes: &[Lane]) -> Option<(Clock, Clock)> {
    let bars = lanes.iter().flat_map(|l| &l.bars);
    let lo = bars.clone().map(|b| b.start).min()?;
    let hi = bars.map(|b| b.end).max()?;
    Some((lo, hi.max(lo + 1)))
}

pub fn emit_gantt(trace: &[Event], format: GanttFormat) -> String {
    let ls = lanes(trace);
    match format {
        GanttFormat::Svg => svg(&ls),
        GanttFormat::Text => text(&ls),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg(lanes: &[Lane]) -> String {
    let plot = SVG_WIDTH - SVG_LEFT - SVG_RIGHT;
    let height = RULER_H + LANE_H * lanes.len().max(1) as u64 + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{height}" viewBox="0 0 {SVG_WIDTH} {height}" font-family="monospace" font-size="11">"#
    );
    let axis_y = RULER_H - 6;
    let _ = writeln!(
        s,
        r##"<line x1="{SVG_LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="#333"/>"##,
        SVG_LEFT + plot
    );
    let Some((lo, hi)) = span(lanes) else {
        let _ = writeln!(s, r#"<text x="{SVG_LEFT}" y="{}">no events</text>"#, axis_y + 16);
        s.push_str("</svg>\n");
        return s;
    };
    let w = (hi - lo) as f64;
    let x_of = |c: Clock| SVG_LEFT as f64 + (c - lo) as f64 / w * plot as f64;
    for k in 0..=10u64 {
        let c = lo + (hi - lo) * k / 10;
        let x = x_of(c);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{axis_y}" stroke="#333"/><text x="{x:.1}" y="{}" text-anchor="middle">{c}</text>"##,
            axis_y - 4,
            axis_y - 8
        );
    }
    for (i, lane) in lanes.iter().enumerate() {
        let y = RULER_H + LANE_H * i as u64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<text x="4" y="{}">{}</text>"#,
            y + LANE_H / 2 + 4,
            escape(&lane.name)
        );
        for b in &lane.bars {
            let x = x_of(b.start);
            let right = x_of(b.end).max(x + 1.0).min((SVG_LEFT + plot) as f64);
            let x = x.min(right - 1.0);
            let _ = writeln!(
                s,
                r##"<g><title>{} start={} duration={}</title><rect x="{x:.1}" y="{}" width="{:.1}" height="{}" fill="{color}" stroke="#222" stroke-width="0.5"/><text x="{:.1}" y="{}" fill="#fff">{}</text></g>"##,
                escape(&b.label),
                b.start,
                b.end - b.start,
                y + 3,
                right - x,
                LANE_H - 6,
                x + 2.0,
                y + LANE_H / 2 + 4,
                escape(&b.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn symbol(i: usize) -> char {
    const SYMS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    SYMS[i % SYMS.len()] as char
}

fn text(lanes: &[Lane]) -> String {
    let cols = TEXT_WIDTH - TEXT_LABEL - 1;
    let mut s = String::new();
    let Some((lo, hi)) = span(lanes) else {
        let _ = writeln!(s, "clocks per column: 1");
        let _ = writeln!(s, "{:>w$}|{}", "", "-".repeat(cols), w = TEXT_LABEL);
        let _ = writeln!(s, "no events");
        return s;
    };
    let per = (hi - lo).div_ceil(cols as Clock).max(1);
    let _ = writeln!(s, "clocks per column: {per}");
    let _ = writeln!(s, "origin: {lo}");
    let mut legend = Vec::new();
    let mut n = 0;
    for lane in lanes {
        let mut row = vec!['.'; cols];
        for b in &lane.bars {
            let c = symbol(n);
            n += 1;
            let a = ((b.start - lo) / per) as usize;
            let e = ((b.end - lo).div_ceil(per) as usize).max(a + 1).min(cols);
            for cell in row.iter_mut().take(e).skip(a.min(cols - 1)) {
                *cell = c;
            }
            legend.push(format!("{c} {} [{}, {})", b.label, b.start, b.end));
        }
        let mut name = lane.name.clone();
        name.truncate(TEXT_LABEL);
        let _ = writeln!(s, "{name:<w$}|{}", row.into_iter().collect::<String>(), w = TEXT_LABEL);
    }
    let _ = writeln!(s, "{:>w$}|{}", "", "-".repeat(cols), w = TEXT_LABEL);
    for l in legend {
        let mut l = l;
        l.truncate(TEXT_WIDTH);
        let _ = writeln!(s, "{l}");
    }
    s
}
