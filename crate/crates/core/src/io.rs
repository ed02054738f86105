//! Plain-text graph and label files.
//!
//! Edge list: a header line `n=<count>` followed by one edge per line as
//! `u v length [similarity]`. Labels: one `1` or `-1` per line.
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Edge, Label, LabelSignal, WeightedGraph};

pub fn format_edge_list(g: &WeightedGraph) -> String {
    let mut out = format!("n={}\n", g.node_count());
    for e in g.edges() {
        match e.similarity {
            Some(s) => writeln!(out, "{} {} {} {}", e.u, e.v, e.length, s),
            None => writeln!(out, "{} {} {}", e.u, e.v, e.length),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line: hline + 1,
            msg: format!("bad header {header:?}"),
        })?;
    let mut g = WeightedGraph::new(n);
    for (idx, line) in lines {
        let err = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err("expected `u v length [similarity]`"));
        }
        let u: usize = fields[0].parse().map_err(|_| err("bad node id"))?;
        let v: usize = fields[1].parse().map_err(|_| err("bad node id"))?;
        let length: f64 = fields[2].parse().map_err(|_| err("bad length"))?;
        let mut edge = Edge::new(u, v, length);
        if let Some(s) = fields.get(3) {
            edge = edge.with_similarity(s.parse().map_err(|_| err("bad similarity"))?);
        }
        g.add_edge(edge)?;
    }
    Ok(g)
}

pub fn write_edge_list(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_edge_list(g))?;
    Ok(())
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    parse_edge_list(&fs::read_to_string(path)?)
}

pub fn format_labels(f: &LabelSignal) -> String {
    let mut out = String::with_capacity(3 * f.len());
    for l in f.labels() {
        writeln!(out, "{l}").expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_labels(text: &str) -> Result<LabelSignal> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| {
            l.parse::<Label>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelSignal::new)
}

pub fn write_labels(f: &LabelSignal, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_labels(f))?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelSignal> {
    parse_labels(&fs::read_to_string(path)?)
}
