//! File formats read and written by the command-line pipeline.
//!
//! Matrices are stored as CSV with a `n=<n>,floor=<floor>` header line
//! followed by `n` rows, or as JSON `{n, floor, entries}` with nested rows.
//! Every loader validates what it reads.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::access::{AccessibilityMatrix, StateVector, TimeCost};
use crate::error::{Error, Result};
use crate::explore::RankedSet;
use crate::quality::SweepReport;
use crate::toy_rl::EpisodeRecord;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let read = file.read(&mut buf)?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::parse(label(path), e.to_string()))
}

pub fn matrix_to_csv(a: &AccessibilityMatrix) -> String {
    let n = a.n();
    let mut out = format!("n={n},floor={:e}\n", a.floor());
    for i in 0..n {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses the CSV matrix format. `source` only labels error messages.
pub fn matrix_from_csv(text: &str, source: &str) -> Result<AccessibilityMatrix> {
    let err = |m: String| Error::parse(source, m);
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err("empty file".into()))?;
    let mut n = None;
    let mut floor = None;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("bad header field '{field}'")))?;
        match key.trim() {
            "n" => n = Some(value.trim().parse::<usize>().map_err(|e| err(format!("n: {e}")))?),
            "floor" => {
                floor = Some(value.trim().parse::<f64>().map_err(|e| err(format!("floor: {e}")))?)
            }
            other => return Err(err(format!("unknown header key '{other}'"))),
        }
    }
    let n = n.ok_or_else(|| err("header lacks n".into()))?;
    let floor = floor.ok_or_else(|| err("header lacks floor".into()))?;
    let mut entries = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (lineno, line) in lines {
        rows += 1;
        let before = entries.len();
        for cell in line.split(',') {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|e| err(format!("line {}: '{}': {e}", lineno + 1, cell.trim())))?;
            entries.push(v);
        }
        if entries.len() - before != n {
            return Err(err(format!(
                "line {}: expected {n} values, found {}",
                lineno + 1,
                entries.len() - before
            )));
        }
    }
    if rows != n {
        return Err(err(format!("expected {n} rows, found {rows}")));
    }
    AccessibilityMatrix::new(n, entries, floor)
}

pub fn write_matrix_csv(path: &Path, a: &AccessibilityMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(a))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<AccessibilityMatrix> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    matrix_from_csv(&text, &label(path))
}

pub fn read_matrix_json(path: &Path) -> Result<AccessibilityMatrix> {
    let reader = BufReader::new(open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::parse(label(path), e.to_string()))
}

/// Reads a matrix, choosing JSON for `.json` files and CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<AccessibilityMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_matrix_json(path),
        _ => read_matrix_csv(path),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateRow {
    id: usize,
    x: f64,
    u: f64,
}

pub fn write_states_csv(path: &Path, states: &[StateVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for s in states {
        if s.values.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "state {} has {} values; the states file holds (x, u) pairs",
                s.id,
                s.values.len()
            )));
        }
        w.serialize(StateRow {
            id: s.id,
            x: s.values[0],
            u: s.values[1],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_states_csv(path: &Path) -> Result<Vec<StateVector>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize::<StateRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::parse(label(path), e.to_string()))?;
            StateVector::new(row.id, vec![row.x, row.u])
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    index: usize,
    group: usize,
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (index, &group) in labels.iter().enumerate() {
        w.serialize(LabelRow { index, group })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut labels = Vec::new();
    for row in r.deserialize::<LabelRow>() {
        let row = row.map_err(|e| Error::parse(label(path), e.to_string()))?;
        if row.index != labels.len() {
            return Err(Error::parse(
                label(path),
                format!("expected index {}, found {}", labels.len(), row.index),
            ));
        }
        labels.push(row.group);
    }
    Ok(labels)
}

pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for run in &report.runs {
        w.serialize(run)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for rec in curve {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(label(path), e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageSummary {
    pub rank: usize,
    pub label: String,
    pub size: usize,
    pub coverage: f64,
    pub overlap_ratio: f64,
    pub histogram: Vec<usize>,
}

impl From<&RankedSet> for CoverageSummary {
    fn from(r: &RankedSet) -> Self {
        Self {
            rank: r.rank,
            label: r.label.clone(),
            size: r.size,
            coverage: r.report.coverage,
            overlap_ratio: r.report.overlap_ratio,
            histogram: r.report.histogram(),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CoverageRow<'a> {
    rank: usize,
    label: &'a str,
    size: usize,
    coverage: f64,
    overlap_ratio: f64,
}

/// Flat CSV of a ranking: one row per set, histograms omitted.
pub fn write_coverage_csv(path: &Path, summaries: &[CoverageSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for s in summaries {
        w.serialize(CoverageRow {
            rank: s.rank,
            label: &s.label,
            size: s.size,
            coverage: s.coverage,
            overlap_ratio: s.overlap_ratio,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ProbeSeconds {
    Seconds(f64),
    Label(Unreachable),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Unreachable {
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub from: usize,
    pub to: usize,
    #[serde(with = "probe_seconds")]
    pub seconds: TimeCost,
}

mod probe_seconds {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &TimeCost, s: S) -> std::result::Result<S::Ok, S::Error> {
        match t {
            TimeCost::Seconds(v) => ProbeSeconds::Seconds(*v),
            TimeCost::Unreachable => ProbeSeconds::Label(Unreachable::Unreachable),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TimeCost, D::Error> {
        match ProbeSeconds::deserialize(d)? {
            ProbeSeconds::Seconds(v) => TimeCost::seconds(v).map_err(serde::de::Error::custom),
            ProbeSeconds::Label(_) => Ok(TimeCost::Unreachable),
        }
    }
}

/// One JSON object per line for every off-diagonal probe.
pub fn write_probe_log(path: &Path, n: usize, times: &[TimeCost]) -> Result<()> {
    if times.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "expected {} probe times, got {}",
            n * n,
            times.len()
        )));
    }
    let mut w = create(path)?;
    for from in 0..n {
        for to in (0..n).filter(|&to| to != from) {
            let rec = ProbeRecord {
                from,
                to,
                seconds: times[from * n + to],
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_probe_log(path: &Path) -> Result<Vec<ProbeRecord>> {
    BufReader::new(open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|line| {
            serde_json::from_str(&line?).map_err(|e| Error::parse(label(path), e.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Highlighted,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChordEdge {
    pub src_cluster: usize,
    pub dst_cluster: usize,
    pub a_inter: f64,
    pub tier: Tier,
}

/// Edges between distinct clusters: `≥ hi` highlighted, `(lo, hi)` normal,
/// `≤ lo` dropped.
pub fn chord_edges(a_inter: &[Vec<f64>], hi: f64, lo: f64) -> Result<Vec<ChordEdge>> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidArgument(format!(
            "thresholds need 0 ≤ lo ≤ hi ≤ 1, got lo = {lo}, hi = {hi}"
        )));
    }
    let mut edges = Vec::new();
    for (i, row) in a_inter.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i == j || v <= lo {
                continue;
            }
            let tier = if v >= hi { Tier::Highlighted } else { Tier::Normal };
            edges.push(ChordEdge {
                src_cluster: i,
                dst_cluster: j,
                a_inter: v,
                tier,
            });
        }
    }
    Ok(edges)
}

pub fn write_chord_csv(path: &Path, edges: &[ChordEdge]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if edges.is_empty() {
        w.write_record(["srcCluster", "dstCluster", "aInter", "tier"])?;
    }
    for e in edges {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chord_csv(path: &Path) -> Result<Vec<ChordEdge>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::parse(label(path), e.to_string())))
        .collect()
}
