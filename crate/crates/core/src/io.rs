//! CSV, key-value and gnuplot artifacts.
//!
//! Floats are written as `{:.9e}`, which round-trips to well under 1e-9 relative.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gp::SampleSet;
use crate::regulator::JumpDecision;
use crate::sim::{HybridTrajectory, TrajectoryRecord};

fn num(v: f64) -> String {
    format!("{v:.9e}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Argument(format!("{}:{line}: {message}", path.display()))
}

/// Column groups of the trajectory CSV, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryLayout {
    pub n_w: usize,
    pub n_x: usize,
    pub n_e: usize,
    pub n_y: usize,
    pub n_xi: usize,
    pub n_eta: usize,
}

impl TrajectoryLayout {
    pub fn of(record: &TrajectoryRecord) -> Self {
        TrajectoryLayout {
            n_w: record.w.len(),
            n_x: record.x.len(),
            n_e: record.e.len(),
            n_y: record.y.len(),
            n_xi: record.xi.len(),
            n_eta: record.eta.len(),
        }
    }

    /// The benchmark layout, used for the header of an empty trajectory.
    pub fn benchmark() -> Self {
        TrajectoryLayout {
            n_w: 2,
            n_x: 2,
            n_e: 2,
            n_y: 1,
            n_xi: 2,
            n_eta: 6,
        }
    }

    fn groups(&self) -> Vec<(&'static str, usize, bool)> {
        // (name, count, always numbered)
        vec![
            ("w", self.n_w, true),
            ("chi", self.n_x, true),
            ("e", self.n_e, true),
            ("y", self.n_y, false),
            ("u", self.n_y, false),
            ("u_star", self.n_y, false),
            ("mu", self.n_y, false),
            ("var", 1, false),
            ("sigma_hat", self.n_y, false),
            ("xi", self.n_xi, true),
            ("eta", self.n_eta, true),
        ]
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "j".to_string(), "jump_kind".to_string()];
        for (name, count, numbered) in self.groups() {
            if count == 1 && !numbered {
                cols.push(name.to_string());
            } else {
                cols.extend((1..=count).map(|i| format!("{name}{i}")));
            }
        }
        cols
    }

    fn from_header(cols: &[&str]) -> Option<Self> {
        let count = |prefix: &str| {
            let plain = cols.iter().filter(|c| **c == prefix).count();
            let numbered = cols
                .iter()
                .filter(|c| {
                    c.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                })
                .count();
            plain + numbered
        };
        let layout = TrajectoryLayout {
            n_w: count("w"),
            n_x: count("chi"),
            n_e: count("e"),
            n_y: count("y"),
            n_xi: count("xi"),
            n_eta: count("eta"),
        };
        let expected = layout.header();
        (expected.len() == cols.len() && expected.iter().zip(cols).all(|(a, b)| a == b)).then_some(layout)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Argument(format!("{}: {other:?}", path.display())),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<fs::File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

pub fn write_trajectory_csv(traj: &HybridTrajectory, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let layout = traj
        .records
        .first()
        .map_or_else(TrajectoryLayout::benchmark, TrajectoryLayout::of);
    let mut out = csv_writer(path)?;
    out.write_record(layout.header()).map_err(|e| csv_error(path, e))?;
    let mut row: Vec<String> = Vec::new();
    for r in &traj.records {
        row.clear();
        row.extend([num(r.t), r.j.to_string(), r.jump_kind.as_str().to_string()]);
        for v in [&r.w, &r.x, &r.e, &r.y, &r.u, &r.u_star, &r.mu] {
            row.extend(v.iter().map(|x| num(*x)));
        }
        row.push(num(r.var));
        for v in [&r.sigma_hat, &r.xi, &r.eta] {
            row.extend(v.iter().map(|x| num(*x)));
        }
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(traj.records.len())
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<HybridTrajectory> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let layout = TrajectoryLayout::from_header(&cols)
        .ok_or_else(|| malformed(path, 1, "not a trajectory header"))?;
    let mut traj = HybridTrajectory::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&record);
        let real = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|_| malformed(path, line, format!("bad number {:?} in column {}", &record[k], cols[k])))
        };
        let mut k = 3;
        let mut take = |n: usize| -> Result<DVector<f64>> {
            let v = (k..k + n).map(&real).collect::<Result<Vec<_>>>()?;
            k += n;
            Ok(DVector::from_vec(v))
        };
        let w = take(layout.n_w)?;
        let x = take(layout.n_x)?;
        let e = take(layout.n_e)?;
        let y = take(layout.n_y)?;
        let u = take(layout.n_y)?;
        let u_star = take(layout.n_y)?;
        let mu = take(layout.n_y)?;
        let var = take(1)?[0];
        let sigma_hat = take(layout.n_y)?;
        let xi = take(layout.n_xi)?;
        let eta = take(layout.n_eta)?;
        traj.records.push(TrajectoryRecord {
            t: real(0)?,
            j: record[1]
                .parse()
                .map_err(|_| malformed(path, line, "bad jump counter"))?,
            jump_kind: record[2]
                .parse::<JumpDecision>()
                .map_err(|e| malformed(path, line, e))?,
            w,
            x,
            e,
            y,
            u,
            u_star,
            mu,
            var,
            sigma_hat,
            xi,
            eta,
        });
    }
    Ok(traj)
}

/// One stored identifier sample with its collection time.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub t: f64,
    pub eta: DVector<f64>,
    pub u: DVector<f64>,
}

/// Rows of the final buffer: the last `buffer_len` collect records of the run.
pub fn dataset_rows(traj: &HybridTrajectory, buffer_len: usize) -> Vec<DatasetRow> {
    let collects: Vec<_> = traj
        .jumps()
        .filter(|r| r.jump_kind == JumpDecision::CollectJump)
        .collect();
    collects[collects.len().saturating_sub(buffer_len)..]
        .iter()
        .map(|r| DatasetRow {
            t: r.t,
            eta: r.eta.clone(),
            u: r.u.clone(),
        })
        .collect()
}

pub fn write_dataset_csv(rows: &[DatasetRow], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let (n_eta, n_u) = rows.first().map_or((6, 1), |r| (r.eta.len(), r.u.len()));
    let mut header = vec!["t".to_string()];
    header.extend((1..=n_eta).map(|i| format!("eta{i}")));
    if n_u == 1 {
        header.push("u".to_string());
    } else {
        header.extend((1..=n_u).map(|i| format!("u{i}")));
    }
    let mut out = csv_writer(path)?;
    out.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let fields = std::iter::once(r.t).chain(r.eta.iter().copied()).chain(r.u.iter().copied());
        out.write_record(fields.map(num)).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}

pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Vec<DatasetRow>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let is_u = |c: &str| c == "u" || c.strip_prefix('u').is_some_and(|r| r.parse::<usize>().is_ok());
    let n_eta = header.iter().filter(|c| c.starts_with("eta")).count();
    let n_u = header.iter().filter(|c| is_u(c)).count();
    if header.get(0) != Some("t") || n_eta == 0 || n_u == 0 || header.len() != 1 + n_eta + n_u {
        return Err(malformed(path, 1, "expected header t,eta1..,u"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let vals = record
            .iter()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| malformed(path, record_line(&record), "bad number"))?;
        rows.push(DatasetRow {
            t: vals[0],
            eta: DVector::from_column_slice(&vals[1..=n_eta]),
            u: DVector::from_column_slice(&vals[1 + n_eta..]),
        });
    }
    Ok(rows)
}

/// Sample set holding every row, in file order.
pub fn rows_to_samples(rows: &[DatasetRow]) -> Result<SampleSet> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Argument("dataset is empty".into()))?;
    let mut set = SampleSet::new(first.eta.len(), first.u.len(), rows.len())?;
    for r in rows {
        set.push(r.eta.clone(), r.u.clone())?;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub identifier: String,
    pub n: usize,
    pub max_abs_y_ss: f64,
    pub rms_y_ss: f64,
    pub max_friend_err: f64,
    /// Absent for identifiers without a GP dataset.
    pub rho_star: Option<f64>,
    pub claim2_bound: Option<f64>,
}

pub const METRICS_HEADER: [&str; 7] = [
    "identifier",
    "N",
    "max_abs_y_ss",
    "rms_y_ss",
    "max_friend_err",
    "rho_star",
    "claim2_bound",
];

pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), num);
    let mut out = csv_writer(path)?;
    out.write_record(METRICS_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        out.write_record([
            r.identifier.clone(),
            r.n.to_string(),
            num(r.max_abs_y_ss),
            num(r.rms_y_ss),
            num(r.max_friend_err),
            opt(r.rho_star),
            opt(r.claim2_bound),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if !header.iter().eq(METRICS_HEADER) {
        return Err(malformed(path, 1, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let f = record.map_err(|e| csv_error(path, e))?;
        let line = record_line(&f);
        let real = |s: &str| s.parse::<f64>().map_err(|_| malformed(path, line, "bad number"));
        let opt = |s: &str| real(s).map(|v| (!v.is_nan()).then_some(v));
        rows.push(MetricsRow {
            identifier: f[0].to_string(),
            n: f[1].parse().map_err(|_| malformed(path, line, "bad N"))?,
            max_abs_y_ss: real(&f[2])?,
            rms_y_ss: real(&f[3])?,
            max_friend_err: real(&f[4])?,
            rho_star: opt(&f[5])?,
            claim2_bound: opt(&f[6])?,
        });
    }
    Ok(rows)
}

/// `key = value` lines, in the given order.
pub fn write_key_values(pairs: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::new();
    for (k, v) in pairs {
        let _ = writeln!(text, "{k} = {v}");
    }
    write_all(path.as_ref(), &text)
}

pub fn read_key_values(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(idx, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| malformed(path, idx + 1, "expected key = value"))
        })
        .collect()
}

/// Plain text writer used for plot scripts and other free-form files.
pub fn write_text(text: &str, path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), text)
}

/// Inventory of emitted files.
#[derive(Debug, Default, Clone)]
pub struct Manifest {
    pub config_hash: String,
    entries: Vec<(PathBuf, usize)>,
}

impl Manifest {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Manifest {
            config_hash: config_hash.into(),
            entries: Vec::new(),
        }
    }

    /// Records a file and its data-row count (lines for non-tabular files).
    pub fn add(&mut self, file: impl Into<PathBuf>, rows: usize) {
        self.entries.push((file.into(), rows));
    }

    pub fn entries(&self) -> &[(PathBuf, usize)] {
        &self.entries
    }

    /// Writes `manifest.txt` in `dir`, with paths relative to it.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let mut text = format!("# config_hash = {}\n# file,rows\n", self.config_hash);
        for (file, rows) in &self.entries {
            let rel = file.strip_prefix(dir).unwrap_or(file);
            let _ = writeln!(text, "{},{rows}", rel.display());
        }
        let path = dir.join("manifest.txt");
        write_all(&path, &text)?;
        Ok(path)
    }
}

/// Line count of a text file, for the manifest of non-tabular files.
pub fn count_lines(path: impl AsRef<Path>) -> Result<usize> {
    Ok(read_lines(path.as_ref())?.len())
}
