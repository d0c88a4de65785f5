//! Readers and writers for the TNTP link and trip table formats.
//!
//! Link files carry optional `<KEY> value` metadata lines closed by
//! `<END OF METADATA>`, followed by one `;`-terminated record per link with
//! columns `init_node term_node capacity length free_flow_time b power speed
//! toll link_type`. `~` starts a comment anywhere on a line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{Commodity, Edge, Network, NodeId, DEFAULT_BETA, DEFAULT_LAMBDA};
use crate::error::{Error, Result};

const END_OF_METADATA: &str = "<END OF METADATA>";

fn strip_comment(line: &str) -> &str {
    match line.find('~') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn metadata_entry(line: &str) -> Option<(String, String)> {
    let rest = line.trim().strip_prefix('<')?;
    let close = rest.find('>')?;
    Some((
        rest[..close].trim().to_string(),
        rest[close + 1..].trim().to_string(),
    ))
}

fn number<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: `{token}` is not a number")))
}

/// Splits off the metadata block. Returns the metadata, the zero-based index
/// of the first body line, and whether an end marker was found.
fn split_metadata(lines: &[&str]) -> (Vec<(String, String)>, usize, bool) {
    let mut meta = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        // The ORIGINAL HEADER entry of published files contains `~`, so the
        // comment is stripped only after recognising the entry.
        let trimmed = raw.trim();
        if trimmed == END_OF_METADATA {
            return (meta, i + 1, true);
        }
        if let Some((k, v)) = metadata_entry(trimmed) {
            if k == "END OF METADATA" {
                return (meta, i + 1, true);
            }
            meta.push((k, v));
        }
    }
    (meta, lines.len(), false)
}

fn header_count<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(key))
        .map(|(_, v)| v.as_str())
}

pub fn parse_network(text: &str) -> Result<Network> {
    let lines: Vec<&str> = text.lines().collect();
    let (metadata, body_start, terminated) = split_metadata(&lines);
    if !terminated {
        return Err(Error::parse(
            lines.len().max(1),
            "missing <END OF METADATA> marker",
        ));
    }

    let mut edges = Vec::new();
    for (offset, raw) in lines[body_start..].iter().enumerate() {
        let lineno = body_start + offset + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some(record) = line.strip_suffix(';') else {
            return Err(Error::parse(lineno, "link record is not terminated by `;`"));
        };
        let fields: Vec<&str> = record.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(Error::parse(
                lineno,
                format!("expected at least 5 fields, found {}", fields.len()),
            ));
        }
        let tail: NodeId = number(fields[0], lineno, "init_node")?;
        let head: NodeId = number(fields[1], lineno, "term_node")?;
        let capacity: f64 = number(fields[2], lineno, "capacity")?;
        let length: f64 = number(fields[3], lineno, "length")?;
        let free_flow_time: f64 = number(fields[4], lineno, "free_flow_time")?;
        let opt = |i: usize, what: &str| -> Result<f64> {
            fields.get(i).map_or(Ok(0.0), |t| number(t, lineno, what))
        };
        let b = opt(5, "b")?;
        let power = opt(6, "power")?;
        let speed = opt(7, "speed")?;
        let toll = opt(8, "toll")?;
        let link_type = match fields.get(9) {
            Some(t) => number::<i64>(t, lineno, "link_type")?,
            None => 0,
        };
        if !(capacity > 0.0) {
            return Err(Error::parse(lineno, format!("capacity must be positive, got {capacity}")));
        }
        if !(free_flow_time > 0.0) {
            return Err(Error::parse(
                lineno,
                format!("free_flow_time must be positive, got {free_flow_time}"),
            ));
        }
        let lambda = if b == 0.0 { DEFAULT_LAMBDA } else { b };
        let beta = if power == 0.0 { DEFAULT_BETA } else { power };
        if lambda < 0.0 || beta < 1.0 {
            return Err(Error::parse(lineno, "BPR parameters need b >= 0 and power >= 1"));
        }
        if tail == head {
            return Err(Error::parse(lineno, "self-loop link"));
        }
        edges.push(Edge {
            id: edges.len(),
            tail,
            head,
            free_flow_time,
            capacity,
            lambda,
            beta,
            length,
            speed,
            toll,
            link_type,
        });
    }

    let meta_line = body_start.max(1);
    if let Some(v) = header_count(&metadata, "NUMBER OF LINKS") {
        let declared: usize = number(v, meta_line, "<NUMBER OF LINKS>")?;
        if declared != edges.len() {
            return Err(Error::parse(
                meta_line,
                format!("header declares {declared} links but {} records follow", edges.len()),
            ));
        }
    }
    let mut extra_nodes = BTreeSet::new();
    if let Some(v) = header_count(&metadata, "NUMBER OF NODES") {
        let declared: NodeId = number(v, meta_line, "<NUMBER OF NODES>")?;
        extra_nodes.extend(1..=declared);
    }
    Network::with_metadata(edges, extra_nodes, metadata)
}

/// Writes a network in the TNTP link format. The output parses back to an
/// identical network.
pub fn write_network(network: &Network) -> String {
    let mut out = String::new();
    for (k, v) in network.metadata() {
        if k.eq_ignore_ascii_case("NUMBER OF LINKS") {
            let _ = writeln!(out, "<{k}> {}", network.num_edges());
        } else {
            let _ = writeln!(out, "<{k}> {v}");
        }
    }
    out.push_str("<END OF METADATA>\n\n");
    out.push_str(
        "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n",
    );
    for e in network.edges() {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t;",
            e.tail,
            e.head,
            e.capacity,
            e.length,
            e.free_flow_time,
            e.lambda,
            e.beta,
            e.speed,
            e.toll,
            e.link_type
        );
    }
    out
}

/// Parses a TNTP trip table into positive-demand commodities, ordered by
/// origin block and then by entry order.
pub fn parse_trips(text: &str) -> Result<Vec<Commodity>> {
    let mut total_header: Option<(f64, usize)> = None;
    let mut origin: Option<NodeId> = None;
    let mut out = Vec::new();
    let mut sum = 0.0;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = raw.trim();
        if trimmed.starts_with('<') {
            if origin.is_some() {
                return Err(Error::parse(lineno, "metadata after the first Origin block"));
            }
            if let Some((k, v)) = metadata_entry(trimmed) {
                if k.eq_ignore_ascii_case("TOTAL OD FLOW") {
                    total_header = Some((number(&v, lineno, "<TOTAL OD FLOW>")?, lineno));
                }
            }
            continue;
        }
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            origin = Some(number(rest.trim(), lineno, "origin")?);
            continue;
        }
        let Some(o) = origin else {
            return Err(Error::parse(lineno, "destination entries before any Origin line"));
        };
        for chunk in line.split(';') {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let mut parts = chunk.split(':');
            let (Some(d), Some(flow), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(
                    lineno,
                    format!("malformed entry `{chunk}`, expected `dest : flow`"),
                ));
            };
            let d: NodeId = number(d.trim(), lineno, "destination")?;
            let flow: f64 = number(flow.trim(), lineno, "flow")?;
            if !(flow >= 0.0 && flow.is_finite()) {
                return Err(Error::parse(lineno, format!("invalid flow {flow}")));
            }
            if flow == 0.0 {
                continue;
            }
            if d == o {
                return Err(Error::parse(lineno, format!("positive intrazonal demand at {o}")));
            }
            sum += flow;
            out.push(Commodity::new(o, d, flow));
        }
    }

    if let Some((total, lineno)) = total_header {
        let scale = total.abs().max(1.0);
        if (sum - total).abs() > 1e-6 * scale {
            return Err(Error::parse(
                lineno,
                format!("entries sum to {sum} but the header declares {total}"),
            ));
        }
    }
    Ok(out)
}

pub fn write_trips(commodities: &[Commodity]) -> String {
    let total: f64 = commodities.iter().map(|c| c.demand).sum();
    let zones = commodities
        .iter()
        .flat_map(|c| [c.source, c.destination])
        .max()
        .unwrap_or(0);
    let mut out = format!("<NUMBER OF ZONES> {zones}\n<TOTAL OD FLOW> {total}\n<END OF METADATA>\n\n");
    let mut current = None;
    for c in commodities {
        if current != Some(c.source) {
            let _ = write!(out, "\nOrigin {}\n", c.source);
            current = Some(c.source);
        }
        let _ = writeln!(out, "    {} : {};", c.destination, c.demand);
    }
    out
}
