use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::TemporalEdge;

pub const EDGES_HEADER: &str = "# streamtgn-edges v1";

/// Serializes a stream with the shortest round-tripping decimal form of
/// every number.
pub fn format_edges(edges: &[TemporalEdge], d_e: usize) -> String {
    let mut out = format!("{EDGES_HEADER} d_e={d_e}\n");
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut record = Vec::with_capacity(3 + d_e);
    for e in edges {
        record.clear();
        record.push(e.src.to_string());
        record.push(e.dst.to_string());
        record.push(e.t.to_string());
        record.extend(e.feat.iter().map(f64::to_string));
        wtr.write_record(&record).expect("writing to memory");
    }
    let body = String::from_utf8(wtr.into_inner().expect("flushing to memory")).expect("ascii output");
    let _ = write!(out, "{body}");
    out
}

fn parse_header(line: &str) -> Result<usize> {
    let rest = line
        .strip_prefix(EDGES_HEADER)
        .ok_or_else(|| Error::parse(1, format!("expected header `{EDGES_HEADER} d_e=<k>`")))?;
    let value = rest
        .trim()
        .strip_prefix("d_e=")
        .ok_or_else(|| Error::parse(1, "header is missing d_e=<k>"))?;
    value
        .parse()
        .map_err(|_| Error::parse(1, format!("bad d_e value `{value}`")))
}

/// Parses an edge file. Returns `d_e` and the edges. Timestamps must be
/// non-decreasing unless `sort` is set, in which case the rows are stably
/// sorted by time.
pub fn parse_edges(text: &str, sort: bool) -> Result<(usize, Vec<TemporalEdge>)> {
    let (header, body) = match text.split_once('\n') {
        Some((h, b)) => (h, b),
        None => (text, ""),
    };
    let d_e = parse_header(header.trim_end_matches('\r'))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let mut edges: Vec<TemporalEdge> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 3 + d_e {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", 3 + d_e, record.len()),
            ));
        }
        let node = |i: usize, name: &str| {
            record[i]
                .parse::<usize>()
                .map_err(|_| Error::parse(line, format!("bad {name} `{}`", &record[i])))
        };
        let number = |i: usize, name: &str| {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line, format!("bad {name} `{}`", &record[i])))
        };
        let src = node(0, "src")?;
        let dst = node(1, "dst")?;
        let t = number(2, "timestamp")?;
        if t < 0.0 {
            return Err(Error::parse(line, format!("negative timestamp {t}")));
        }
        let feat = (3..record.len())
            .map(|i| number(i, "feature"))
            .collect::<Result<Vec<_>>>()?;
        if !sort {
            if let Some(prev) = edges.last() {
                if t < prev.t {
                    return Err(Error::parse(
                        line,
                        format!("timestamp {t} precedes {} (use --sort to reorder)", prev.t),
                    ));
                }
            }
        }
        edges.push(TemporalEdge::new(src, dst, t, feat));
    }
    if sort {
        edges.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok((d_e, edges))
}
