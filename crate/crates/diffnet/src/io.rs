//! On-disk formats.
//!
//! * Network TSV: a `# nodes=<N> layers=<K>` metadata line, a
//!   `layer\tsrc\tdst\trate` header, then one edge per line. Rates are
//!   written with 17 significant digits so values round-trip bitwise.
//!   Rows are ordered by (layer, src, dst). UTF-8, LF line endings.
//! * Cascades JSONL: one JSON object per line,
//!   `{"id":0,"T":10.0,"events":[[node,time],...],"truth":{...}}` with
//!   events ascending in time and the optional `truth` block carrying
//!   generation labels (`main_layer` is a 0-based layer index).
//!
//! Readers validate every stated invariant and name the offending line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, CascadeSet, CascadeTruth};
use crate::error::{Error, Result};
use crate::network::MultilayerNetwork;

const NETWORK_HEADER: &str = "layer\tsrc\tdst\trate";

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Serialize an `f64` with 17 significant digits (enough for bitwise
/// round-trips through `str::parse::<f64>`).
pub fn format_rate(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_network(net: &MultilayerNetwork, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    write_network_to(net, &mut w).map_err(|e| Error::io(path_str(path), e))
}

pub fn write_network_to(net: &MultilayerNetwork, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# nodes={} layers={}", net.n_nodes(), net.n_layers())?;
    writeln!(w, "{NETWORK_HEADER}")?;
    for k in 0..net.n_layers() as usize {
        for &(s, d, r) in net.layer_edges(k) {
            writeln!(w, "{k}\t{s}\t{d}\t{}", format_rate(r))?;
        }
    }
    w.flush()
}

pub fn read_network(path: &Path) -> Result<MultilayerNetwork> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    read_network_from(BufReader::new(file), &path_str(path))
}

pub fn read_network_from(r: impl BufRead, label: &str) -> Result<MultilayerNetwork> {
    let mut lines = r.lines().enumerate();

    let (_, meta) = lines
        .next()
        .ok_or_else(|| Error::parse(label, 1, "empty file; expected metadata line"))?;
    let meta = meta.map_err(|e| Error::io(label, e))?;
    let (n_nodes, n_layers) = parse_metadata(&meta).ok_or_else(|| {
        Error::parse(label, 1, format!("expected `# nodes=<N> layers=<K>`, got `{meta}`"))
    })?;

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(label, 2, "missing header line"))?;
    let header = header.map_err(|e| Error::io(label, e))?;
    if header != NETWORK_HEADER {
        return Err(Error::parse(
            label,
            2,
            format!("expected header `{NETWORK_HEADER}`, got `{header}`"),
        ));
    }

    let mut layers: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); n_layers as usize];
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let mut field = |name: &str| {
            fields
                .next()
                .ok_or_else(|| Error::parse(label, lineno, format!("missing `{name}` column")))
        };
        let k: u32 = parse_field(field("layer")?, "layer", label, lineno)?;
        let s: u32 = parse_field(field("src")?, "src", label, lineno)?;
        let d: u32 = parse_field(field("dst")?, "dst", label, lineno)?;
        let rate: f64 = parse_field(field("rate")?, "rate", label, lineno)?;
        if fields.next().is_some() {
            return Err(Error::parse(label, lineno, "too many columns"));
        }
        if k >= n_layers {
            return Err(Error::parse(label, lineno, format!("layer {k} >= layers={n_layers}")));
        }
        if s >= n_nodes || d >= n_nodes {
            return Err(Error::parse(
                label,
                lineno,
                format!("edge ({s},{d}) references node >= nodes={n_nodes}"),
            ));
        }
        if s == d {
            return Err(Error::parse(label, lineno, format!("self-loop at node {s}")));
        }
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::parse(label, lineno, format!("rate {rate} outside (0, 1]")));
        }
        if !seen.insert((k, s, d)) {
            return Err(Error::parse(label, lineno, format!("duplicate edge ({k},{s},{d})")));
        }
        layers[k as usize].push((s, d, rate));
    }
    MultilayerNetwork::new(n_nodes, layers)
}

fn parse_metadata(line: &str) -> Option<(u32, u32)> {
    let rest = line.strip_prefix("# ")?;
    let mut parts = rest.split_whitespace();
    let nodes = parts.next()?.strip_prefix("nodes=")?.parse().ok()?;
    let layers = parts.next()?.strip_prefix("layers=")?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((nodes, layers))
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    name: &str,
    label: &str,
    lineno: usize,
) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(label, lineno, format!("bad `{name}` value `{raw}`")))
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    main_layer: u32,
    eps: f64,
    pi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CascadeRecord {
    id: u64,
    #[serde(rename = "T")]
    horizon: f64,
    events: Vec<(u32, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<TruthRecord>,
}

pub fn write_cascades(set: &CascadeSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    write_cascades_to(set, &mut w).map_err(|e| Error::io(path_str(path), e))
}

pub fn write_cascades_to(set: &CascadeSet, w: &mut impl Write) -> std::io::Result<()> {
    for c in set.iter() {
        let record = CascadeRecord {
            id: c.id,
            horizon: c.horizon,
            events: c.events().to_vec(),
            truth: c.truth.as_ref().map(|t| TruthRecord {
                main_layer: t.main_layer,
                eps: t.eps,
                pi: t.pi.clone(),
            }),
        };
        serde_json::to_writer(&mut *w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_cascades(path: &Path) -> Result<CascadeSet> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    read_cascades_from(BufReader::new(file), &path_str(path))
}

pub fn read_cascades_from(r: impl Read, label: &str) -> Result<CascadeSet> {
    let mut cascades = Vec::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(label, e))?;
        if line.is_empty() {
            continue;
        }
        let record: CascadeRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(label, lineno, e.to_string()))?;
        if record
            .events
            .windows(2)
            .any(|w| w[0].1 > w[1].1)
        {
            return Err(Error::parse(label, lineno, "events not ascending in time"));
        }
        let truth = record.truth.map(|t| CascadeTruth {
            main_layer: t.main_layer,
            eps: t.eps,
            pi: t.pi,
        });
        let cascade = Cascade::new(record.id, record.horizon, record.events, truth)
            .map_err(|e| Error::parse(label, lineno, e.to_string()))?;
        cascades.push(cascade);
    }
    Ok(CascadeSet::new(cascades))
}
