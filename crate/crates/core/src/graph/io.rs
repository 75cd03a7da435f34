//! Text formats for networks and teams.
//!
//! Edge file: `src<TAB>dst[<TAB>weight]`, weight defaults to 1.0.
//! Feature file: `node<TAB>feature<TAB>value`.
//! Team file: one team per line, space-separated ids.
//!
//! `#` lines are comments. Two comment forms are read as declarations so
//! that isolated nodes and trailing all-zero feature columns survive a
//! save/load cycle: `# nodes: N` in the edge file and `# dims: D` in the
//! feature file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{SocialNetwork, Team};
use crate::error::{Error, Result};
use crate::sparse::Csr;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_field<T: FromStr>(path: &Path, line: usize, field: Option<&str>, what: &str) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse {
        path: path.into(),
        line,
        message: format!("missing {what}"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        message: format!("invalid {what} {raw:?}"),
    })
}

/// Returns the declared value when `line` is `# <key>: <value>`.
fn declaration(path: &Path, lineno: usize, line: &str, key: &str) -> Result<Option<usize>> {
    let body = line.trim_start_matches('#').trim();
    match body.strip_prefix(key).and_then(|r| r.strip_prefix(':')) {
        Some(v) => parse_field(path, lineno, Some(v.trim()), key).map(Some),
        None => Ok(None),
    }
}

/// Data lines with their 1-based line numbers; comments handed to `on_comment`.
fn data_lines(
    text: &str,
    mut on_comment: impl FnMut(usize, &str) -> Result<()>,
) -> Result<Vec<(usize, &str)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            on_comment(i + 1, trimmed)?;
            continue;
        }
        out.push((i + 1, trimmed));
    }
    Ok(out)
}

pub fn load_network(edge_path: impl AsRef<Path>, feature_path: impl AsRef<Path>) -> Result<SocialNetwork> {
    let edge_path = edge_path.as_ref();
    let feature_path = feature_path.as_ref();

    let edge_text = read(edge_path)?;
    let mut declared_n = None;
    let edge_lines = data_lines(&edge_text, |no, line| {
        if let Some(n) = declaration(edge_path, no, line, "nodes")? {
            declared_n = Some(n);
        }
        Ok(())
    })?;
    let mut edges = Vec::with_capacity(edge_lines.len());
    for (no, line) in edge_lines {
        let mut fields = line.split_whitespace();
        let src: usize = parse_field(edge_path, no, fields.next(), "source node")?;
        let dst: usize = parse_field(edge_path, no, fields.next(), "target node")?;
        let w: f64 = match fields.next() {
            Some(f) => parse_field(edge_path, no, Some(f), "weight")?,
            None => 1.0,
        };
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: edge_path.into(),
                line: no,
                message: "too many fields".into(),
            });
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Validation(format!(
                "{}:{no}: edge weight {w} must be finite and non-negative",
                edge_path.display()
            )));
        }
        edges.push((no, src, dst, w));
    }

    let feature_text = read(feature_path)?;
    let mut declared_d = None;
    let feature_lines = data_lines(&feature_text, |no, line| {
        if let Some(d) = declaration(feature_path, no, line, "dims")? {
            declared_d = Some(d);
        }
        Ok(())
    })?;
    let mut feats = Vec::with_capacity(feature_lines.len());
    for (no, line) in feature_lines {
        let mut fields = line.split_whitespace();
        let node: usize = parse_field(feature_path, no, fields.next(), "node")?;
        let feature: usize = parse_field(feature_path, no, fields.next(), "feature index")?;
        let value: f64 = parse_field(feature_path, no, fields.next(), "feature value")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: feature_path.into(),
                line: no,
                message: "too many fields".into(),
            });
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Validation(format!(
                "{}:{no}: feature value {value} must be finite and non-negative",
                feature_path.display()
            )));
        }
        feats.push((no, node, feature, value));
    }

    let n = match declared_n {
        Some(n) => n,
        None => edges
            .iter()
            .flat_map(|&(_, s, t, _)| [s, t])
            .chain(feats.iter().map(|&(_, v, _, _)| v))
            .max()
            .map_or(0, |m| m + 1),
    };
    let d = declared_d.unwrap_or_else(|| feats.iter().map(|&(_, _, f, _)| f + 1).max().unwrap_or(0));

    let mut triplets = Vec::with_capacity(2 * edges.len());
    for (no, s, t, w) in edges {
        if s >= n || t >= n {
            return Err(Error::Validation(format!(
                "{}:{no}: edge ({s},{t}) references a node outside 0..{n}",
                edge_path.display()
            )));
        }
        triplets.push((s, t, w));
        if s != t {
            triplets.push((t, s, w));
        }
    }
    let adjacency = Csr::from_triplets(n, n, triplets, f64::max);

    let mut ftrip = Vec::with_capacity(feats.len());
    for (no, v, f, x) in feats {
        if v >= n {
            return Err(Error::Validation(format!(
                "{}:{no}: node {v} out of range (n = {n})",
                feature_path.display()
            )));
        }
        if f >= d {
            return Err(Error::Validation(format!(
                "{}:{no}: feature {f} out of range (d = {d})",
                feature_path.display()
            )));
        }
        ftrip.push((v, f, x));
    }
    let features = Csr::from_triplets(n, d, ftrip, |a, b| a + b);

    SocialNetwork::new(adjacency, features)
}

/// Writes the upper triangle of the adjacency and every stored feature.
pub fn save_network(
    net: &SocialNetwork,
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
) -> Result<()> {
    let mut edges = format!("# nodes: {}\n", net.n());
    for (r, c, w) in net.adjacency().iter().filter(|&(r, c, _)| r <= c) {
        writeln!(edges, "{r}\t{c}\t{w:?}").expect("string write");
    }
    let mut feats = format!("# dims: {}\n", net.d());
    for (r, c, v) in net.features().iter() {
        writeln!(feats, "{r}\t{c}\t{v:?}").expect("string write");
    }
    let edge_path = edge_path.as_ref();
    let feature_path = feature_path.as_ref();
    fs::write(edge_path, edges).map_err(|e| Error::io(edge_path, e))?;
    fs::write(feature_path, feats).map_err(|e| Error::io(feature_path, e))
}

pub fn load_teams(team_path: impl AsRef<Path>, net: &SocialNetwork) -> Result<Vec<Team>> {
    let path = team_path.as_ref();
    let text = read(path)?;
    let mut teams = Vec::new();
    for (no, line) in data_lines(&text, |_, _| Ok(()))? {
        let ids = line
            .split_whitespace()
            .map(|f| parse_field(path, no, Some(f), "node id"))
            .collect::<Result<Vec<usize>>>()?;
        let team = Team::new(ids, net.n())
            .map_err(|e| Error::Validation(format!("{}:{no}: {e}", path.display())))?;
        teams.push(team);
    }
    Ok(teams)
}

pub fn save_teams(teams: &[Team], team_path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for t in teams {
        let ids: Vec<String> = t.members().iter().map(usize::to_string).collect();
        out.push_str(&ids.join(" "));
        out.push('\n');
    }
    let path = team_path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Optional display names, `node<TAB>name` per line.
pub fn load_names(path: impl AsRef<Path>) -> Result<BTreeMap<usize, String>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut names = BTreeMap::new();
    for (no, line) in data_lines(&text, |_, _| Ok(()))? {
        let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: no,
            message: "expected `node<TAB>name`".into(),
        })?;
        let id: usize = parse_field(path, no, Some(id.trim()), "node id")?;
        names.insert(id, name.trim().to_string());
    }
    Ok(names)
}
