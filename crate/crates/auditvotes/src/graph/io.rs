//! Text file ingestion and persistence.
//!
//! Formats (all UTF-8, tab-separated, lines starting with '#' ignored):
//!   edges:     "u<TAB>v"
//!   features:  header "n<TAB>d", then "node<TAB>dim<TAB>value"
//!   labels:    "node<TAB>class"
//!   split:     "node<TAB>{ltrain|utrain|val|test}"
//!   node ids:  "external_id<TAB>internal_id"

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::{InductiveSplit, SparseFeatures, SparseGraph};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields<'a>(path: &Path, lineno: usize, line: &'a str, want: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != want {
        return Err(parse_err(path, lineno, format!("expected {want} fields, got {}", f.len())));
    }
    Ok(f)
}

fn parse_num<T: std::str::FromStr>(path: &Path, lineno: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(path, lineno, format!("invalid number {s:?}")))
}

/// Load a dataset from edge, feature and label files. Directed edge
/// lists are symmetrized; duplicates and self-loops dropped.
pub fn load_dataset(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<SparseGraph> {
    let feature_path = feature_path.as_ref();
    let text = fs::read_to_string(feature_path)?;
    let mut lines = data_lines(&text);
    let (lineno, header) = lines
        .next()
        .ok_or_else(|| parse_err(feature_path, 1, "empty feature file"))?;
    let h = fields(feature_path, lineno, header, 2)?;
    let n: usize = parse_num(feature_path, lineno, h[0])?;
    let d: usize = parse_num(feature_path, lineno, h[1])?;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let f = fields(feature_path, lineno, line, 3)?;
        triplets.push((
            parse_num(feature_path, lineno, f[0])?,
            parse_num(feature_path, lineno, f[1])?,
            parse_num(feature_path, lineno, f[2])?,
        ));
    }
    let features = SparseFeatures::from_triplets(n, d, triplets)?;

    let label_path = label_path.as_ref();
    let text = fs::read_to_string(label_path)?;
    let mut labels = vec![u32::MAX; n];
    for (lineno, line) in data_lines(&text) {
        let f = fields(label_path, lineno, line, 2)?;
        let u: usize = parse_num(label_path, lineno, f[0])?;
        if u >= n {
            return Err(Error::NodeOutOfBounds { id: u as u64, n });
        }
        labels[u] = parse_num(label_path, lineno, f[1])?;
    }
    if labels.iter().any(|&c| c == u32::MAX) {
        return Err(Error::Shape("label file does not cover all nodes".into()));
    }

    let edge_path = edge_path.as_ref();
    let text = fs::read_to_string(edge_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in data_lines(&text) {
        let f = fields(edge_path, lineno, line, 2)?;
        let u: u64 = parse_num(edge_path, lineno, f[0])?;
        let v: u64 = parse_num(edge_path, lineno, f[1])?;
        if u as usize >= n || v as usize >= n {
            return Err(Error::NodeOutOfBounds { id: u.max(v), n });
        }
        edges.push((u as u32, v as u32));
    }
    SparseGraph::from_edges(Arc::new(features), edges, Some(Arc::new(labels)), None)
}

/// [`load_dataset`] plus the external node-id map.
pub fn load_dataset_with_ids(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    id_path: impl AsRef<Path>,
) -> Result<SparseGraph> {
    let mut g = load_dataset(edge_path, feature_path, label_path)?;
    let ids = load_node_ids(id_path, g.n())?;
    g.set_external_ids(ids)?;
    Ok(g)
}

/// Node-id map: one "external_id<TAB>internal_id" per line.
pub fn load_node_ids(path: impl AsRef<Path>, n: usize) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut ids = vec![String::new(); n];
    let mut seen = vec![false; n];
    for (lineno, line) in data_lines(&text) {
        let f = fields(path, lineno, line, 2)?;
        let internal: usize = parse_num(path, lineno, f[1])?;
        if internal >= n {
            return Err(Error::NodeOutOfBounds { id: internal as u64, n });
        }
        ids[internal] = f[0].to_string();
        seen[internal] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::MissingExternalId(missing as u32));
    }
    Ok(ids)
}

pub fn save_node_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for (internal, ext) in ids.iter().enumerate() {
        writeln!(out, "{ext}\t{internal}")?;
    }
    Ok(())
}

/// Persist a graph back to the three text files (canonical form:
/// upper-triangle edges, sorted triplets).
pub fn save_dataset(
    g: &SparseGraph,
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = fs::File::create(edge_path)?;
    for &(u, v) in g.edges() {
        writeln!(out, "{u}\t{v}")?;
    }
    let f = g.features();
    let mut out = fs::File::create(feature_path)?;
    writeln!(out, "{}\t{}", f.n(), f.dim())?;
    for (u, j, v) in f.triplets() {
        writeln!(out, "{u}\t{j}\t{v}")?;
    }
    let mut out = fs::File::create(label_path)?;
    if let Some(labels) = g.labels() {
        for (u, &c) in labels.iter().enumerate() {
            writeln!(out, "{u}\t{c}")?;
        }
    }
    Ok(())
}

pub fn save_split(path: impl AsRef<Path>, split: &InductiveSplit) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for (set, tag) in [
        (&split.labeled_train, "ltrain"),
        (&split.unlabeled_train, "utrain"),
        (&split.validation, "val"),
        (&split.test, "test"),
    ] {
        for &u in set {
            writeln!(out, "{u}\t{tag}")?;
        }
    }
    Ok(())
}

pub fn load_split(path: impl AsRef<Path>, n: usize) -> Result<InductiveSplit> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut split = InductiveSplit::default();
    for (lineno, line) in data_lines(&text) {
        let f = fields(path, lineno, line, 2)?;
        let u: u32 = parse_num(path, lineno, f[0])?;
        if u as usize >= n {
            return Err(Error::NodeOutOfBounds { id: u as u64, n });
        }
        match f[1] {
            "ltrain" => split.labeled_train.push(u),
            "utrain" => split.unlabeled_train.push(u),
            "val" => split.validation.push(u),
            "test" => split.test.push(u),
            other => return Err(parse_err(path, lineno, format!("unknown set {other:?}"))),
        }
    }
    split.sort();
    split.validate(n)?;
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        p
    }

    #[test]
    fn load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "# comment\n0\t1\n1\t0\n1\t1\n");
        let f = write(dir.path(), "f.tsv", "2\t2\n0\t0\t1\n1\t1\t1\n");
        let l = write(dir.path(), "l.tsv", "0\t0\n1\t1\n");
        let g = load_dataset(&e, &f, &l).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.labels(), Some(&[0u32, 1][..]));

        // save -> load is identity on the canonicalized graph
        let e2 = dir.path().join("e2.tsv");
        let f2 = dir.path().join("f2.tsv");
        let l2 = dir.path().join("l2.tsv");
        save_dataset(&g, &e2, &f2, &l2).unwrap();
        let g2 = load_dataset(&e2, &f2, &l2).unwrap();
        assert_eq!(g.edges(), g2.edges());
        assert_eq!(g.features(), g2.features());
        assert_eq!(g.labels(), g2.labels());
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "0\t1\nbogus\n");
        let f = write(dir.path(), "f.tsv", "2\t1\n0\t0\t1\n");
        let l = write(dir.path(), "l.tsv", "0\t0\n1\t0\n");
        let err = load_dataset(&e, &f, &l).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("e.tsv:2"), "{msg}");
    }

    #[test]
    fn edge_id_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.tsv", "0\t7\n");
        let f = write(dir.path(), "f.tsv", "2\t1\n0\t0\t1\n");
        let l = write(dir.path(), "l.tsv", "0\t0\n1\t0\n");
        assert!(matches!(
            load_dataset(&e, &f, &l).unwrap_err(),
            Error::NodeOutOfBounds { id: 7, n: 2 }
        ));
    }
}
