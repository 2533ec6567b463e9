//! Text and binary formats for graph inputs.
//!
//! * edge list: `u<TAB>v` per line, 0-based, `#` comments
//! * labels: `node<TAB>class` per line
//! * features: `TEFX` magic, u64 rows, u64 cols, rows x cols f32 little-endian,
//!   or text lines `node<TAB>x1<TAB>x2...`

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

pub const FEATURES_MAGIC: &[u8; 4] = b"TEFX";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Splits a data line on tabs (falling back to any whitespace).
pub(crate) fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    raw: &str,
    path: &Path,
    lineno: usize,
) -> Result<T> {
    raw.parse().map_err(|_| {
        Error::Data(format!(
            "{}:{}: cannot parse field {raw:?}",
            path.display(),
            lineno + 1
        ))
    })
}

/// Reads an edge list. Returns the edges and one past the largest id seen.
pub fn read_edge_list(path: &Path) -> Result<(Vec<(NodeId, NodeId)>, usize)> {
    let reader = BufReader::new(open(path)?);
    let mut edges = Vec::new();
    let mut bound = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts = fields(line);
        if parts.len() < 2 {
            return Err(Error::Data(format!(
                "{}:{}: expected `u<TAB>v`",
                path.display(),
                lineno + 1
            )));
        }
        let u: NodeId = parse_field(parts[0], path, lineno)?;
        let v: NodeId = parse_field(parts[1], path, lineno)?;
        bound = bound.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    Ok((edges, bound))
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        writeln!(w, "# nodes {}", g.num_nodes())?;
        for (u, v) in g.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Raw `(node, class)` entries of a label file.
pub fn read_label_entries(path: &Path) -> Result<Vec<(NodeId, usize)>> {
    let reader = BufReader::new(open(path)?);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts = fields(line);
        if parts.len() < 2 {
            return Err(Error::Data(format!(
                "{}:{}: expected `node<TAB>class`",
                path.display(),
                lineno + 1
            )));
        }
        entries.push((
            parse_field(parts[0], path, lineno)?,
            parse_field(parts[1], path, lineno)?,
        ));
    }
    Ok(entries)
}

/// Reads `node<TAB>class` lines. Every node in `0..num_nodes` must appear.
pub fn read_labels(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    labels_from_entries(&read_label_entries(path)?, num_nodes)
}

pub fn labels_from_entries(entries: &[(NodeId, usize)], num_nodes: usize) -> Result<Vec<usize>> {
    let mut labels = vec![None; num_nodes];
    for &(node, class) in entries {
        if node >= num_nodes {
            return Err(Error::Data(format!(
                "label for node {node} outside 0..{num_nodes}"
            )));
        }
        labels[node] = Some(class);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::Data(format!("node {v} has no label"))))
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        for (v, l) in labels.iter().enumerate() {
            writeln!(w, "{v}\t{l}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let mut r = BufReader::new(open(path)?);
    let io = |e| Error::io(path, e);
    let mut magic = Vec::with_capacity(4);
    r.by_ref().take(4).read_to_end(&mut magic).map_err(io)?;
    if magic != FEATURES_MAGIC {
        return read_text_features(path);
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(io)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(io)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut raw = vec![0u8; rows * cols * 4];
    r.read_exact(&mut raw).map_err(io)?;
    let data: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
}

fn read_text_features(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(open(path)?);
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts = fields(line);
        let node: usize = parse_field(parts[0], path, lineno)?;
        let values = parts[1..]
            .iter()
            .map(|f| parse_field(f, path, lineno))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((node, values));
    }
    let n = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut x = Array2::zeros((n, dim));
    let mut seen = vec![false; n];
    for (node, values) in rows {
        if values.len() != dim {
            return Err(Error::Data(format!(
                "{}: node {node} has {} features, expected {dim}",
                path.display(),
                values.len()
            )));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::Data(format!(
                "{}: node {node} listed twice",
                path.display()
            )));
        }
        x.row_mut(node)
            .assign(&ndarray::ArrayView1::from(&values[..]));
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::Data(format!(
            "{}: node {v} has no features",
            path.display()
        )));
    }
    Ok(x)
}

pub fn write_features(path: &Path, features: &Array2<f64>) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        w.write_all(FEATURES_MAGIC)?;
        w.write_all(&(features.nrows() as u64).to_le_bytes())?;
        w.write_all(&(features.ncols() as u64).to_le_bytes())?;
        for x in features.iter() {
            w.write_all(&(*x as f32).to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tsv");
        std::fs::write(&p, "# header\n0\t1\n\n1\t2\n2 3\n").unwrap();
        let (edges, bound) = read_edge_list(&p).unwrap();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(bound, 4);
    }

    #[test]
    fn edge_list_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tsv");
        std::fs::write(&p, "0\tx\n").unwrap();
        assert!(matches!(read_edge_list(&p), Err(Error::Data(_))));
    }

    #[test]
    fn labels_must_cover_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.tsv");
        std::fs::write(&p, "0\t1\n2\t0\n").unwrap();
        assert!(read_labels(&p, 3).is_err());
        std::fs::write(&p, "0\t1\n2\t0\n1\t1\n").unwrap();
        assert_eq!(read_labels(&p, 3).unwrap(), vec![1, 1, 0]);
    }

    #[test]
    fn features_round_trip_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        let x = Array2::from_shape_fn((3, 2), |(i, j)| i as f64 * 0.5 - j as f64);
        write_features(&p, &x).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"TEFX");
        assert_eq!(bytes.len(), 4 + 16 + 6 * 4);
        assert_eq!(read_features(&p).unwrap(), x);
    }

    #[test]
    fn text_features() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, "1\t0.5\t2\n0\t1\t-1\n").unwrap();
        let x = read_features(&p).unwrap();
        assert_eq!(x, ndarray::array![[1.0, -1.0], [0.5, 2.0]]);
        std::fs::write(&p, "0\t1\n2\t1\n").unwrap();
        assert!(read_features(&p).is_err());
    }
}
