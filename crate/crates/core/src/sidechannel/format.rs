//! Line-oriented text and JSON-lines encodings of traces.
//!
//! Text form, one event per line: `<label> <delta> (<latency>)`. A blank line
//! ends a sample, `#` starts a comment, a lone `...` marks elided output.
//! A `#! trace id=<id> idA=<id> idB=<id> [token=<hex>]` directive starts a new
//! trace; files without directives hold a single trace.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ProbeEvent, ProbeLabel, Sample, Trace};
use crate::identity::Identity;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
}

fn line_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Line { line, msg: msg.into() }
}

fn parse_event(s: &str, line: usize) -> Result<ProbeEvent, FormatError> {
    let mut it = s.split_whitespace();
    let (Some(name), Some(delta), Some(lat), None) = (it.next(), it.next(), it.next(), it.next()) else {
        return Err(line_err(line, "expected `<label> <delta> (<latency>)`"));
    };
    let label = ProbeLabel::from_name(name).ok_or_else(|| line_err(line, format!("unknown label `{name}`")))?;
    let delta = delta.parse().map_err(|_| line_err(line, format!("bad delta `{delta}`")))?;
    let lat = lat
        .strip_prefix('(')
        .and_then(|l| l.strip_suffix(')'))
        .ok_or_else(|| line_err(line, "latency must be parenthesized"))?;
    let latency = lat.parse().map_err(|_| line_err(line, format!("bad latency `{lat}`")))?;
    Ok(ProbeEvent { label, delta, latency })
}

fn parse_token(s: &str, line: usize) -> Result<[u8; 4], FormatError> {
    hex::decode(s).ok().and_then(|v| v.try_into().ok()).ok_or_else(|| line_err(line, "token must be 8 hex digits"))
}

fn apply_directive(trace: &mut Trace, body: &str, line: usize) -> Result<(), FormatError> {
    for kv in body.split_whitespace().skip(1) {
        let (k, v) = kv.split_once('=').ok_or_else(|| line_err(line, format!("expected key=value, got `{kv}`")))?;
        let ident = || v.parse::<Identity>().map_err(|e| line_err(line, e.to_string()));
        match k {
            "id" => trace.id = v.to_string(),
            "idA" => trace.id_a = Some(ident()?),
            "idB" => trace.id_b = Some(ident()?),
            "token" => trace.token = Some(parse_token(v, line)?),
            _ => return Err(line_err(line, format!("unknown trace attribute `{k}`"))),
        }
    }
    Ok(())
}

/// Parses one or more traces from text.
pub fn parse_trace_text(text: &str) -> Result<Vec<Trace>, FormatError> {
    let mut traces: Vec<Trace> = Vec::new();
    let mut current: Option<Trace> = None;
    let mut sample = Sample::default();
    let flush_sample = |cur: &mut Option<Trace>, sample: &mut Sample| {
        if !sample.events.is_empty() {
            cur.get_or_insert_with(|| Trace::new("trace-1")).samples.push(std::mem::take(sample));
        }
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if let Some(body) = s.strip_prefix("#!") {
            let body = body.trim();
            if body.split_whitespace().next() != Some("trace") {
                continue;
            }
            flush_sample(&mut current, &mut sample);
            if let Some(t) = current.take() {
                traces.push(t);
            }
            let mut t = Trace::new(format!("trace-{}", traces.len() + 1));
            apply_directive(&mut t, body, line)?;
            current = Some(t);
        } else if s.starts_with('#') || s == "..." {
            continue;
        } else if s.is_empty() {
            flush_sample(&mut current, &mut sample);
        } else {
            sample.events.push(parse_event(s, line)?);
        }
    }
    flush_sample(&mut current, &mut sample);
    if let Some(t) = current {
        traces.push(t);
    }
    Ok(traces)
}

fn directive(t: &Trace) -> String {
    let mut s = format!("#! trace id={}", t.id);
    if let Some(a) = &t.id_a {
        s += &format!(" idA={a}");
    }
    if let Some(b) = &t.id_b {
        s += &format!(" idB={b}");
    }
    if let Some(tok) = t.token {
        s += &format!(" token={}", hex::encode(tok));
    }
    s
}

/// Text encoding of `traces`. Ground truth is never written.
pub fn serialize_trace_text(traces: &[Trace]) -> String {
    let mut out = String::new();
    for t in traces {
        out += &directive(t);
        out.push('\n');
        for s in &t.samples {
            for e in &s.events {
                out += &format!("{} {} ({})\n", e.label.as_str(), e.delta, e.latency);
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    trace_id: String,
    #[serde(rename = "idA", default, skip_serializing_if = "Option::is_none")]
    id_a: Option<Identity>,
    #[serde(rename = "idB", default, skip_serializing_if = "Option::is_none")]
    id_b: Option<Identity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    events: Vec<(String, u64, u32)>,
}

/// JSON-lines encoding: one sample per line.
pub fn serialize_trace_jsonl(traces: &[Trace]) -> String {
    let mut out = String::new();
    for t in traces {
        for s in &t.samples {
            let line = SampleLine {
                trace_id: t.id.clone(),
                id_a: t.id_a.clone(),
                id_b: t.id_b.clone(),
                token: t.token.map(hex::encode),
                events: s.events.iter().map(|e| (e.label.as_str().to_string(), e.delta, e.latency)).collect(),
            };
            out += &serde_json::to_string(&line).expect("serializable");
            out.push('\n');
        }
    }
    out
}

/// Parses JSON lines, grouping samples by `trace_id` in order of first appearance.
pub fn parse_trace_jsonl(text: &str) -> Result<Vec<Trace>, FormatError> {
    let mut traces: Vec<Trace> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let sl: SampleLine = serde_json::from_str(raw).map_err(|e| line_err(line, e.to_string()))?;
        let mut events = Vec::with_capacity(sl.events.len());
        for (name, delta, latency) in sl.events {
            let label =
                ProbeLabel::from_name(&name).ok_or_else(|| line_err(line, format!("unknown label `{name}`")))?;
            events.push(ProbeEvent { label, delta, latency });
        }
        let slot = *index.entry(sl.trace_id.clone()).or_insert_with(|| {
            traces.push(Trace::new(sl.trace_id.clone()));
            traces.len() - 1
        });
        let t = &mut traces[slot];
        t.id_a = t.id_a.take().or(sl.id_a);
        t.id_b = t.id_b.take().or(sl.id_b);
        if let Some(tok) = sl.token {
            t.token = Some(parse_token(&tok, line)?);
        }
        t.samples.push(Sample { events });
    }
    Ok(traces)
}

/// Sidecar record linking a trace to its hidden iteration count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub trace_id: String,
    pub truth_k: u32,
}

pub fn serialize_answers(traces: &[Trace]) -> String {
    traces
        .iter()
        .filter_map(|t| t.ground_truth.map(|k| Answer { trace_id: t.id.clone(), truth_k: k }))
        .map(|a| serde_json::to_string(&a).expect("serializable") + "\n")
        .collect()
}

pub fn parse_answers(text: &str) -> Result<Vec<Answer>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| line_err(i + 1, e.to_string())))
        .collect()
}
