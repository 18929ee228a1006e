//! Dataset file formats.
//!
//! * edges: `src<TAB>dst` per line, `#` comments
//! * features: binary `b"LZFT"`, `u32` version, `u64` N, `u64` d, then N*d
//!   row-major `f32` (little-endian); or CSV `node_id,f0,f1,...`
//! * labels: CSV `node_id,class`
//! * splits: CSV `node_id,{train|val|test}`
//!
//! CSV files may start with a header line whose first field is `node_id`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, Split, SplitKind};
use crate::graph::{read_edge_list, write_edge_list};
use crate::{build_graph, Error, Matrix, Real, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"LZFT";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: Option<PathBuf>,
}

impl DatasetPaths {
    /// `edges.tsv`, `features.lzft` (or `features.csv`), `labels.csv` and, if
    /// present, `splits.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let bin = dir.join("features.lzft");
        let features = if bin.exists() { bin } else { dir.join("features.csv") };
        let splits = dir.join("splits.csv");
        Self {
            edges: dir.join("edges.tsv"),
            features,
            labels: dir.join("labels.csv"),
            splits: splits.exists().then_some(splits),
        }
    }
}

/// Loads and validates a dataset; the graph is normalized with self-loops.
///
/// The label file fixes the node count. Without a split file the nodes are
/// split 60/20/20 by a shuffle seeded with `split_seed`.
pub fn load_dataset<T: Real>(paths: &DatasetPaths, split_seed: u64) -> Result<Dataset<T>> {
    let labels = read_labels(&paths.labels)?;
    let n = labels.len();
    let features: Matrix<T> = read_features(&paths.features)?;
    if features.rows() != n {
        return Err(Error::Inconsistent(format!(
            "{} has {} feature rows but {} has {n} labels",
            paths.features.display(),
            features.rows(),
            paths.labels.display()
        )));
    }
    let edges = read_edge_list(&paths.edges)?;
    if let Some(&(s, d)) = edges.iter().find(|&&(s, d)| s >= n || d >= n) {
        return Err(Error::Inconsistent(format!(
            "{} references node {} but {} has only {n} labels",
            paths.edges.display(),
            s.max(d),
            paths.labels.display()
        )));
    }
    let graph = build_graph::<T>(&edges, n)?.normalize(true);
    let split = match &paths.splits {
        Some(p) => read_splits(p, n)?,
        None => Split::default_for(n, split_seed),
    };
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(graph, features, labels, num_classes, split)
}

pub fn load_dataset_dir<T: Real>(dir: &Path, split_seed: u64) -> Result<Dataset<T>> {
    load_dataset(&DatasetPaths::in_dir(dir), split_seed)
}

/// Writes `edges.tsv`, `features.lzft`, `labels.csv` and `splits.csv` into `dir`.
///
/// Self-loops are not written; [`load_dataset`] adds them back.
pub fn write_dataset<T: Real>(dir: &Path, data: &Dataset<T>) -> Result<DatasetPaths> {
    fs::create_dir_all(dir)?;
    let paths = DatasetPaths {
        edges: dir.join("edges.tsv"),
        features: dir.join("features.lzft"),
        labels: dir.join("labels.csv"),
        splits: Some(dir.join("splits.csv")),
    };
    let edges: Vec<_> = data.graph.edge_pairs().into_iter().filter(|(s, d)| s != d).collect();
    let mut w = BufWriter::new(File::create(&paths.edges)?);
    writeln!(w, "# {} nodes, {} undirected edges", data.num_nodes(), edges.len())?;
    write_edge_list(&mut w, &edges)?;
    w.flush()?;
    write_features_lzft(BufWriter::new(File::create(&paths.features)?), &data.features)?;
    write_labels_csv(BufWriter::new(File::create(&paths.labels)?), &data.labels)?;
    write_splits_csv(BufWriter::new(File::create(dir.join("splits.csv"))?), &data.split)?;
    Ok(paths)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Yields `(line_number, fields)` for the data lines of a CSV file.
fn csv_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = body.split(',').map(|f| f.trim().to_string()).collect();
        if out.is_empty() && fields[0] == "node_id" {
            continue;
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn parse_id(path: &Path, line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| parse_err(path, line, format!("invalid node id {s:?}")))
}

/// Reads `node_id,class`; ids must cover `0..N` exactly once.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let records = csv_records(path)?;
    let n = records.len();
    let mut labels = vec![None; n];
    for (line, f) in records {
        if f.len() != 2 {
            return Err(parse_err(path, line, "expected `node_id,class`"));
        }
        let id = parse_id(path, line, &f[0])?;
        let class: usize = f[1].parse().map_err(|_| parse_err(path, line, format!("invalid class {:?}", f[1])))?;
        if id >= n {
            return Err(parse_err(path, line, format!("node id {id} outside 0..{n}")));
        }
        if labels[id].replace(class).is_some() {
            return Err(parse_err(path, line, format!("node {id} labeled twice")));
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("every id in 0..n seen once")).collect())
}

/// Reads `node_id,{train|val|test}` for a graph of `n` nodes.
pub fn read_splits(path: &Path, n: usize) -> Result<Split> {
    let mut split = Split::default();
    let mut seen = vec![false; n];
    for (line, f) in csv_records(path)? {
        if f.len() != 2 {
            return Err(parse_err(path, line, "expected `node_id,{train|val|test}`"));
        }
        let id = parse_id(path, line, &f[0])?;
        if id >= n {
            return Err(Error::Inconsistent(format!(
                "{}:{line}: node {id} but the dataset has {n} nodes",
                path.display()
            )));
        }
        let kind = SplitKind::parse(&f[1]).ok_or_else(|| parse_err(path, line, format!("unknown split {:?}", f[1])))?;
        if std::mem::replace(&mut seen[id], true) {
            return Err(parse_err(path, line, format!("node {id} assigned twice")));
        }
        match kind {
            SplitKind::Train => split.train.push(id),
            SplitKind::Val => split.val.push(id),
            SplitKind::Test => split.test.push(id),
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Reads a feature file, detecting the binary format by its magic bytes.
pub fn read_features<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    let is_binary = file.read(&mut magic)? == 4 && &magic == FEATURE_MAGIC;
    if is_binary {
        read_features_lzft(BufReader::new(file))
    } else {
        read_features_csv(path)
    }
}

/// Body of an LZFT file after the magic.
fn read_features_lzft<T: Real>(mut r: impl Read) -> Result<Matrix<T>> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("unsupported feature file version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    let mut raw = vec![0u8; n * d * 4];
    r.read_exact(&mut raw).map_err(|_| Error::Format(format!("feature file truncated: expected {n}x{d} values")))?;
    let data = raw.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
    Matrix::new(n, d, data)
}

fn read_features_csv<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let records = csv_records(path)?;
    let n = records.len();
    let d = records.first().map_or(0, |(_, f)| f.len().saturating_sub(1));
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    for (line, f) in records {
        if f.len() != d + 1 {
            return Err(parse_err(path, line, format!("expected {} columns, got {}", d + 1, f.len())));
        }
        let id = parse_id(path, line, &f[0])?;
        if id >= n {
            return Err(parse_err(path, line, format!("node id {id} outside 0..{n}")));
        }
        let values = f[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(path, line, format!("invalid value {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if rows[id].replace(values).is_some() {
            return Err(parse_err(path, line, format!("node {id} listed twice")));
        }
    }
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.expect("every id seen once")).collect();
    Matrix::from_f64(n, d, &flat)
}

/// Values are narrowed to `f32`.
pub fn write_features_lzft<T: Real>(mut w: impl Write, x: &Matrix<T>) -> Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes())?;
    w.write_all(&(x.rows() as u64).to_le_bytes())?;
    w.write_all(&(x.cols() as u64).to_le_bytes())?;
    for &v in x.data() {
        w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Full-precision CSV with a `node_id,f0,...` header.
pub fn write_features_csv<T: Real>(mut w: impl Write, x: &Matrix<T>) -> Result<()> {
    let header: Vec<String> = (0..x.cols()).map(|j| format!("f{j}")).collect();
    writeln!(w, "node_id,{}", header.join(","))?;
    for r in 0..x.rows() {
        write!(w, "{r}")?;
        for &v in x.row(r) {
            write!(w, ",{:?}", v.as_f64())?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels_csv(mut w: impl Write, labels: &[usize]) -> Result<()> {
    writeln!(w, "node_id,class")?;
    for (i, y) in labels.iter().enumerate() {
        writeln!(w, "{i},{y}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_splits_csv(mut w: impl Write, split: &Split) -> Result<()> {
    writeln!(w, "node_id,split")?;
    let max = split.train.iter().chain(&split.val).chain(&split.test).max().map_or(0, |m| m + 1);
    for (i, kind) in split.assignment(max).into_iter().enumerate() {
        if let Some(k) = kind {
            writeln!(w, "{i},{}", k.as_str())?;
        }
    }
    w.flush()?;
    Ok(())
}
